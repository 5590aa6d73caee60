"""Small convolutional policy/value network with hand-written gradients.

Three stride-2 conv blocks (8 -> 16 -> 32 -> 32 channels, 3x3 kernels, each
followed by a per-channel scale/shift normalization and a rectifier), a
128-wide hidden feature, and two MLP heads: a softmax policy over the action
set and a sigmoid value in [0, 1].  Normalization runs against fixed running
statistics (0, 1) so single-sample inference is deterministic; the scale and
shift are the trained parameters.

Training is plain momentum SGD on the summed cross-entropy + squared-error
loss.  Gradients are computed analytically; `tests` verify them against
central finite differences.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .encoding import CHANNELS, GRID_SIZE
from .rng import make_rng

CONV_CHANNELS = (CHANNELS, 16, 32, 32)
KERNEL = 3
STRIDE = 2
PAD = 1
FEATURE_DIM = 128
HEAD_HIDDEN = 64

CHECKPOINT_MAGIC = b"PKMC1"


class CheckpointError(ValueError):
    pass


def layer_specs(action_count: int) -> list[tuple[str, tuple[int, ...]]]:
    """Parameter declaration order; also the checkpoint serialization order."""
    specs: list[tuple[str, tuple[int, ...]]] = []
    spatial = GRID_SIZE
    for i in range(3):
        cin, cout = CONV_CHANNELS[i], CONV_CHANNELS[i + 1]
        specs.append((f"conv{i + 1}.w", (cout, cin, KERNEL, KERNEL)))
        specs.append((f"conv{i + 1}.b", (cout,)))
        specs.append((f"norm{i + 1}.gamma", (cout,)))
        specs.append((f"norm{i + 1}.beta", (cout,)))
        spatial = (spatial + 2 * PAD - KERNEL) // STRIDE + 1
    flat = CONV_CHANNELS[-1] * spatial * spatial
    specs.append(("feature.w", (FEATURE_DIM, flat)))
    specs.append(("feature.b", (FEATURE_DIM,)))
    specs.append(("policy1.w", (HEAD_HIDDEN, FEATURE_DIM)))
    specs.append(("policy1.b", (HEAD_HIDDEN,)))
    specs.append(("policy2.w", (action_count, HEAD_HIDDEN)))
    specs.append(("policy2.b", (action_count,)))
    specs.append(("value1.w", (HEAD_HIDDEN, FEATURE_DIM)))
    specs.append(("value1.b", (HEAD_HIDDEN,)))
    specs.append(("value2.w", (1, HEAD_HIDDEN)))
    specs.append(("value2.b", (1,)))
    return specs


@dataclass
class NetworkParams:
    """Named parameter arrays plus the action-set identity they were built for."""

    action_count: int
    arrays: dict[str, np.ndarray]
    action_descriptor: dict = field(default_factory=dict)

    def copy(self) -> "NetworkParams":
        return NetworkParams(
            action_count=self.action_count,
            arrays={k: v.copy() for k, v in self.arrays.items()},
            action_descriptor=dict(self.action_descriptor),
        )

    def astype(self, dtype) -> "NetworkParams":
        return NetworkParams(
            action_count=self.action_count,
            arrays={k: v.astype(dtype) for k, v in self.arrays.items()},
            action_descriptor=dict(self.action_descriptor),
        )

    def n_parameters(self) -> int:
        return sum(v.size for v in self.arrays.values())


def init_params(action_count: int, seed: int = 0, action_descriptor: dict | None = None) -> NetworkParams:
    rng = make_rng(seed)
    arrays: dict[str, np.ndarray] = {}
    for name, shape in layer_specs(action_count):
        if name.endswith(".b") or name.endswith(".beta"):
            # small nonzero offsets: occupancy inputs are sparse and binary, so
            # zero offsets would leave many rectifier units exactly on the kink
            arrays[name] = (rng.uniform(0.01, 0.05, size=shape)).astype(np.float32)
        elif name.endswith(".gamma"):
            arrays[name] = np.ones(shape, dtype=np.float32)
        else:
            fan_in = int(np.prod(shape[1:]))
            std = np.sqrt(2.0 / fan_in)
            if name.startswith(("policy2", "value2")):
                std = 0.01  # near-uniform policy and mid-range value at the start
            arrays[name] = (rng.standard_normal(shape) * std).astype(np.float32)
    return NetworkParams(
        action_count=action_count,
        arrays=arrays,
        action_descriptor=dict(action_descriptor or {}),
    )


def zero_params(action_count: int) -> NetworkParams:
    arrays = {name: np.zeros(shape, dtype=np.float32) for name, shape in layer_specs(action_count)}
    return NetworkParams(action_count=action_count, arrays=arrays)


# ---------------------------------------------------------------------------
# conv plumbing (im2col form)


def _conv_geometry(h: int, w: int) -> tuple[int, int]:
    ho = (h + 2 * PAD - KERNEL) // STRIDE + 1
    wo = (w + 2 * PAD - KERNEL) // STRIDE + 1
    return ho, wo


def _im2col(x: np.ndarray) -> np.ndarray:
    """(B, C, H, W) -> (B, C*K*K, Ho*Wo) patch matrix."""
    b, c, h, w = x.shape
    ho, wo = _conv_geometry(h, w)
    xp = np.zeros((b, c, h + 2 * PAD, w + 2 * PAD), dtype=x.dtype)
    xp[:, :, PAD : PAD + h, PAD : PAD + w] = x
    s0, s1, s2, s3 = xp.strides
    windows = np.lib.stride_tricks.as_strided(
        xp,
        shape=(b, c, ho, wo, KERNEL, KERNEL),
        strides=(s0, s1, s2 * STRIDE, s3 * STRIDE, s2, s3),
        writeable=False,
    )
    cols = windows.transpose(0, 1, 4, 5, 2, 3).reshape(b, c * KERNEL * KERNEL, ho * wo)
    return np.ascontiguousarray(cols)


def _col_target_indices(c: int, h: int, w: int) -> np.ndarray:
    """Flat padded-input index for every im2col row/column entry."""
    ho, wo = _conv_geometry(h, w)
    hp, wp = h + 2 * PAD, w + 2 * PAD
    ci, ki, kj = np.meshgrid(np.arange(c), np.arange(KERNEL), np.arange(KERNEL), indexing="ij")
    row_index = (ci * hp * wp + ki * wp + kj).reshape(-1)  # (C*K*K,)
    oy, ox = np.meshgrid(np.arange(ho), np.arange(wo), indexing="ij")
    col_offset = (oy * STRIDE * wp + ox * STRIDE).reshape(-1)  # (Ho*Wo,)
    return row_index[:, None] + col_offset[None, :]


def _col2im(dcols: np.ndarray, c: int, h: int, w: int) -> np.ndarray:
    """Scatter-add patch gradients back to (B, C, H, W)."""
    b = dcols.shape[0]
    hp, wp = h + 2 * PAD, w + 2 * PAD
    idx = _col_target_indices(c, h, w).ravel()
    flat = np.zeros((b, c * hp * wp), dtype=dcols.dtype)
    vals = dcols.reshape(b, -1)
    for i in range(b):
        flat[i] = np.bincount(idx, weights=vals[i], minlength=c * hp * wp)
    xp = flat.reshape(b, c, hp, wp)
    return xp[:, :, PAD : PAD + h, PAD : PAD + w]


def _conv_forward(x: np.ndarray, w: np.ndarray, b: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    bsz, c, h, wd = x.shape
    ho, wo = _conv_geometry(h, wd)
    cols = _im2col(x)
    wmat = w.reshape(w.shape[0], -1)
    out = np.einsum("fk,bkp->bfp", wmat, cols) + b[None, :, None]
    return out.reshape(bsz, w.shape[0], ho, wo), cols


def _conv_backward(
    dout: np.ndarray, cols: np.ndarray, w: np.ndarray, x_shape: tuple[int, ...], need_dx: bool
) -> tuple[np.ndarray, np.ndarray, np.ndarray | None]:
    bsz, c, h, wd = x_shape
    f = w.shape[0]
    dflat = dout.reshape(bsz, f, -1)
    dw = np.einsum("bfp,bkp->fk", dflat, cols).reshape(w.shape)
    db = dflat.sum(axis=(0, 2))
    dx = None
    if need_dx:
        wmat = w.reshape(f, -1)
        dcols = np.einsum("fk,bfp->bkp", wmat, dflat)
        dx = _col2im(dcols, c, h, wd)
    return dw, db, dx


def _log_softmax(z: np.ndarray) -> np.ndarray:
    zmax = z.max(axis=1, keepdims=True)
    shifted = z - zmax
    return shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def forward_batch(params: NetworkParams, x: np.ndarray, want_cache: bool = False):
    """Policy probabilities and values for a batch of state tensors.

    x: (B, CHANNELS, GRID, GRID).  Returns (p, v) or (p, v, cache).
    """
    a = params.arrays
    if x.ndim != 4 or x.shape[1:] != (CHANNELS, GRID_SIZE, GRID_SIZE):
        raise ValueError(f"input tensor must be (B, {CHANNELS}, {GRID_SIZE}, {GRID_SIZE})")
    x = x.astype(a["conv1.w"].dtype, copy=False)
    cache: dict[str, object] = {"x": x}
    cur = x
    for i in (1, 2, 3):
        conv, cols = _conv_forward(cur, a[f"conv{i}.w"], a[f"conv{i}.b"])
        normed = a[f"norm{i}.gamma"][None, :, None, None] * conv + a[f"norm{i}.beta"][None, :, None, None]
        act = np.maximum(normed, 0.0)
        cache[f"in{i}"] = cur
        cache[f"cols{i}"] = cols
        cache[f"conv{i}"] = conv
        cache[f"act{i}"] = act
        cur = act
    bsz = cur.shape[0]
    flat = cur.reshape(bsz, -1)
    feature = np.maximum(flat @ a["feature.w"].T + a["feature.b"], 0.0)
    hp = np.maximum(feature @ a["policy1.w"].T + a["policy1.b"], 0.0)
    logits = hp @ a["policy2.w"].T + a["policy2.b"]
    logp = _log_softmax(logits)
    p = np.exp(logp)
    hv = np.maximum(feature @ a["value1.w"].T + a["value1.b"], 0.0)
    z = hv @ a["value2.w"].T + a["value2.b"]
    v = _sigmoid(z)[:, 0]
    if not want_cache:
        return p, v
    cache.update(flat=flat, feature=feature, hp=hp, logp=logp, p=p, hv=hv, v=v)
    return p, v, cache


def forward(params: NetworkParams, x: np.ndarray) -> tuple[np.ndarray, float]:
    """Single-sample forward pass."""
    p, v = forward_batch(params, x[None])
    return p[0], float(v[0])


def sample_losses(logp: np.ndarray, pis: np.ndarray, v: np.ndarray, rs: np.ndarray) -> np.ndarray:
    """Per-sample cross-entropy of the policy plus squared error of the value."""
    ce = -(pis * logp).sum(axis=1)
    se = (v - rs) ** 2
    return ce + se


def loss_batch(params: NetworkParams, tensors: np.ndarray, pis: np.ndarray, rs: np.ndarray) -> float:
    """Mean of [cross-entropy(policy) + squared error(value)] over the batch."""
    p, v, cache = forward_batch(params, tensors, want_cache=True)
    return float(sample_losses(cache["logp"], pis, v, rs).mean())


def loss_and_grads(
    params: NetworkParams, tensors: np.ndarray, pis: np.ndarray, rs: np.ndarray
) -> tuple[float, dict[str, np.ndarray]]:
    a = params.arrays
    p, v, cache = forward_batch(params, tensors, want_cache=True)
    bsz = tensors.shape[0]
    loss = float(sample_losses(cache["logp"], pis, v, rs).mean())

    grads: dict[str, np.ndarray] = {}
    feature = cache["feature"]
    hp, hv, flat = cache["hp"], cache["hv"], cache["flat"]

    dlogits = (p - pis) / bsz
    grads["policy2.w"] = dlogits.T @ hp
    grads["policy2.b"] = dlogits.sum(axis=0)
    dhp = dlogits @ a["policy2.w"]
    dhp[hp <= 0.0] = 0.0
    grads["policy1.w"] = dhp.T @ feature
    grads["policy1.b"] = dhp.sum(axis=0)

    dz = (2.0 * (v - rs) * v * (1.0 - v) / bsz)[:, None]
    grads["value2.w"] = dz.T @ hv
    grads["value2.b"] = dz.sum(axis=0)
    dhv = dz @ a["value2.w"]
    dhv[hv <= 0.0] = 0.0
    grads["value1.w"] = dhv.T @ feature
    grads["value1.b"] = dhv.sum(axis=0)

    dfeature = dhp @ a["policy1.w"] + dhv @ a["value1.w"]
    dfeature[feature <= 0.0] = 0.0
    grads["feature.w"] = dfeature.T @ flat
    grads["feature.b"] = dfeature.sum(axis=0)

    dcur = (dfeature @ a["feature.w"]).reshape(cache["act3"].shape)
    for i in (3, 2, 1):
        act = cache[f"act{i}"]
        conv = cache[f"conv{i}"]
        dact = dcur
        dact[act <= 0.0] = 0.0
        grads[f"norm{i}.gamma"] = (dact * conv).sum(axis=(0, 2, 3))
        grads[f"norm{i}.beta"] = dact.sum(axis=(0, 2, 3))
        dconv = dact * a[f"norm{i}.gamma"][None, :, None, None]
        dw, db, dx = _conv_backward(
            dconv, cache[f"cols{i}"], a[f"conv{i}.w"], cache[f"in{i}"].shape, need_dx=(i > 1)
        )
        grads[f"conv{i}.w"] = dw
        grads[f"conv{i}.b"] = db
        if dx is not None:
            dcur = dx
    return loss, grads


class Trainer:
    """Momentum SGD over a parameter set; owns the velocity buffers."""

    def __init__(self, params: NetworkParams, momentum: float = 0.9):
        self.params = params
        self.momentum = momentum
        self.velocity = {k: np.zeros_like(v) for k, v in params.arrays.items()}

    def train_step(self, tensors: np.ndarray, pis: np.ndarray, rs: np.ndarray, learning_rate: float) -> float:
        """One gradient step; returns the pre-step loss."""
        loss, grads = loss_and_grads(self.params, tensors, pis, rs)
        for g in grads.values():
            if not np.isfinite(g).all():
                raise FloatingPointError("non-finite gradient; step aborted")
        for name, g in grads.items():
            vel = self.velocity[name]
            vel *= self.momentum
            vel += g.astype(vel.dtype)
            self.params.arrays[name] -= (learning_rate * vel).astype(self.params.arrays[name].dtype)
        return loss


# ---------------------------------------------------------------------------
# checkpoints


def save_checkpoint(params: NetworkParams, path: str | Path) -> None:
    specs = layer_specs(params.action_count)
    meta = {
        "layers": [[name, list(shape)] for name, shape in specs],
        "action_count": params.action_count,
        "action_set": params.action_descriptor,
        "grid_size": GRID_SIZE,
        "channels": CHANNELS,
    }
    meta_bytes = json.dumps(meta, sort_keys=True, separators=(",", ":")).encode("utf-8")
    blob = bytearray()
    blob += CHECKPOINT_MAGIC
    blob += struct.pack("<I", len(meta_bytes))
    blob += meta_bytes
    for name, shape in specs:
        arr = params.arrays[name]
        if tuple(arr.shape) != shape:
            raise CheckpointError(f"parameter {name} has shape {arr.shape}, expected {shape}")
        blob += np.ascontiguousarray(arr, dtype="<f4").tobytes()
    Path(path).write_bytes(bytes(blob))


def load_checkpoint(path: str | Path, expect_action_descriptor: dict | None = None) -> NetworkParams:
    data = Path(path).read_bytes()
    if data[: len(CHECKPOINT_MAGIC)] != CHECKPOINT_MAGIC:
        raise CheckpointError(f"{path}: bad magic, not a checkpoint file")
    off = len(CHECKPOINT_MAGIC)
    if len(data) < off + 4:
        raise CheckpointError(f"{path}: truncated header")
    (meta_len,) = struct.unpack_from("<I", data, off)
    off += 4
    if len(data) < off + meta_len:
        raise CheckpointError(f"{path}: truncated metadata")
    meta = json.loads(data[off : off + meta_len].decode("utf-8"))
    off += meta_len
    action_count = int(meta["action_count"])
    specs = layer_specs(action_count)
    if [[name, list(shape)] for name, shape in specs] != meta["layers"]:
        raise CheckpointError(f"{path}: layer table does not match this build")
    if meta.get("grid_size") != GRID_SIZE or meta.get("channels") != CHANNELS:
        raise CheckpointError(f"{path}: grid/channel mismatch")
    if expect_action_descriptor is not None and meta.get("action_set") != expect_action_descriptor:
        raise CheckpointError(
            f"{path}: checkpoint action set {meta.get('action_set')} does not match "
            f"the requested {expect_action_descriptor}"
        )
    arrays: dict[str, np.ndarray] = {}
    for name, shape in specs:
        n = int(np.prod(shape))
        end = off + 4 * n
        if end > len(data):
            raise CheckpointError(f"{path}: truncated parameter block at {name}")
        arrays[name] = np.frombuffer(data[off:end], dtype="<f4").reshape(shape).copy()
        off = end
    if off != len(data):
        raise CheckpointError(f"{path}: trailing bytes after parameter block")
    return NetworkParams(
        action_count=action_count,
        arrays=arrays,
        action_descriptor=dict(meta.get("action_set", {})),
    )
