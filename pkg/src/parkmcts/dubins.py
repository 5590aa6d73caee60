"""Shortest forward-only Dubins paths between planar poses.

Solves all six word classes (LSL, RSR, LSR, RSL, RLR, LRL) at a fixed turn
radius and samples the winning path at a bounded arc-length step for
collision checking and path export.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

TWO_PI = 2.0 * math.pi
_EPS_NEG = -1e-9


def _mod2pi(a: float) -> float:
    r = math.fmod(a, TWO_PI)
    if r < 0.0:
        r += TWO_PI
    return r


def _lsl(a: float, b: float, d: float):
    sa, sb, ca, cb = math.sin(a), math.sin(b), math.cos(a), math.cos(b)
    p_sq = 2.0 + d * d - 2.0 * math.cos(a - b) + 2.0 * d * (sa - sb)
    if p_sq < _EPS_NEG:
        return None
    tmp = math.atan2(cb - ca, d + sa - sb)
    return _mod2pi(-a + tmp), math.sqrt(max(p_sq, 0.0)), _mod2pi(b - tmp)


def _rsr(a: float, b: float, d: float):
    sa, sb, ca, cb = math.sin(a), math.sin(b), math.cos(a), math.cos(b)
    p_sq = 2.0 + d * d - 2.0 * math.cos(a - b) + 2.0 * d * (sb - sa)
    if p_sq < _EPS_NEG:
        return None
    tmp = math.atan2(ca - cb, d - sa + sb)
    return _mod2pi(a - tmp), math.sqrt(max(p_sq, 0.0)), _mod2pi(-b + tmp)


def _lsr(a: float, b: float, d: float):
    sa, sb, ca, cb = math.sin(a), math.sin(b), math.cos(a), math.cos(b)
    p_sq = -2.0 + d * d + 2.0 * math.cos(a - b) + 2.0 * d * (sa + sb)
    if p_sq < _EPS_NEG:
        return None
    p = math.sqrt(max(p_sq, 0.0))
    tmp = math.atan2(-ca - cb, d + sa + sb) - math.atan2(-2.0, p)
    return _mod2pi(-a + tmp), p, _mod2pi(-_mod2pi(b) + tmp)


def _rsl(a: float, b: float, d: float):
    sa, sb, ca, cb = math.sin(a), math.sin(b), math.cos(a), math.cos(b)
    p_sq = -2.0 + d * d + 2.0 * math.cos(a - b) - 2.0 * d * (sa + sb)
    if p_sq < _EPS_NEG:
        return None
    p = math.sqrt(max(p_sq, 0.0))
    tmp = math.atan2(ca + cb, d - sa - sb) - math.atan2(2.0, p)
    return _mod2pi(a - tmp), p, _mod2pi(b - tmp)


def _rlr(a: float, b: float, d: float):
    sa, sb, ca, cb = math.sin(a), math.sin(b), math.cos(a), math.cos(b)
    tmp = (6.0 - d * d + 2.0 * math.cos(a - b) + 2.0 * d * (sa - sb)) / 8.0
    if abs(tmp) > 1.0:
        return None
    p = _mod2pi(TWO_PI - math.acos(tmp))
    t = _mod2pi(a - math.atan2(ca - cb, d - sa + sb) + p / 2.0)
    return t, p, _mod2pi(a - b - t + p)


def _lrl(a: float, b: float, d: float):
    sa, sb, ca, cb = math.sin(a), math.sin(b), math.cos(a), math.cos(b)
    tmp = (6.0 - d * d + 2.0 * math.cos(a - b) + 2.0 * d * (sb - sa)) / 8.0
    if abs(tmp) > 1.0:
        return None
    p = _mod2pi(TWO_PI - math.acos(tmp))
    t = _mod2pi(-a - math.atan2(ca - cb, d + sa - sb) + p / 2.0)
    return t, p, _mod2pi(_mod2pi(b) - a - t + p)


_WORDS = (
    ("LSL", _lsl),
    ("RSR", _rsr),
    ("LSR", _lsr),
    ("RSL", _rsl),
    ("RLR", _rlr),
    ("LRL", _lrl),
)


@dataclass(frozen=True)
class DubinsPath:
    """One solved word: segment parameters are in normalized (radius=1) units."""

    word: str
    params: tuple[float, float, float]
    radius: float
    start: tuple[float, float, float]

    @property
    def length(self) -> float:
        return sum(self.params) * self.radius

    def segment_lengths(self) -> tuple[float, float, float]:
        return tuple(p * self.radius for p in self.params)


def shortest_path(start: tuple[float, float, float], goal: tuple[float, float, float], radius: float) -> DubinsPath | None:
    """Shortest Dubins path over all six words, or None if no word solves."""
    if radius <= 0.0:
        raise ValueError("turn radius must be positive")
    x0, y0, h0 = start
    x1, y1, h1 = goal
    dx, dy = x1 - x0, y1 - y0
    big_d = math.hypot(dx, dy)
    d = big_d / radius
    theta = math.atan2(dy, dx) if big_d > 1e-12 else 0.0
    alpha = _mod2pi(h0 - theta)
    beta = _mod2pi(h1 - theta)
    best: DubinsPath | None = None
    for word, solver in _WORDS:
        res = solver(alpha, beta, d)
        if res is None:
            continue
        path = DubinsPath(word=word, params=res, radius=radius, start=(x0, y0, h0))
        if best is None or path.length < best.length:
            best = path
    return best


def sample_path(path: DubinsPath, step: float = 0.1) -> np.ndarray:
    """Poses along the path at arc-length spacing <= step, endpoints included.

    Returns an (m, 3) array of x, y, heading; headings are not re-wrapped so
    consecutive samples stay continuous.
    """
    if step <= 0.0:
        raise ValueError("sample step must be positive")
    x, y, h = path.start
    chunks = [np.array([[x, y, h]])]
    radius = path.radius
    for seg, param in zip(path.word, path.params):
        seg_len = param * radius
        if seg_len <= 0.0:
            continue
        n = max(1, int(math.ceil(seg_len / step)))
        s = np.linspace(seg_len / n, seg_len, n)
        if seg == "S":
            xs = x + s * math.cos(h)
            ys = y + s * math.sin(h)
            hs = np.full(n, h)
        else:
            sign = 1.0 if seg == "L" else -1.0
            hs = h + sign * s / radius
            xs = x + radius * sign * (np.sin(hs) - math.sin(h))
            ys = y - radius * sign * (np.cos(hs) - math.cos(h))
        chunks.append(np.stack([xs, ys, hs], axis=1))
        x, y, h = float(xs[-1]), float(ys[-1]), float(hs[-1])
    return np.concatenate(chunks, axis=0)
