"""Flat key/value text documents used for scenario, path and config files.

One `key = value` pair per line, UTF-8, order-insensitive on read but written
in a canonical order so rewrites are byte-identical.  Floats are written with
repr() and therefore round-trip exactly.
"""

from __future__ import annotations

from pathlib import Path
from typing import Iterable, Mapping


class DocumentError(ValueError):
    """Parse or schema failure; message names the offending line or field."""


def parse_document(text: str, source: str = "<string>") -> dict[str, str]:
    """Parse a key/value document; duplicate keys are rejected."""
    fields: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise DocumentError(f"{source}:{lineno}: expected 'key = value', got {raw!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if not key:
            raise DocumentError(f"{source}:{lineno}: empty key")
        if key in fields:
            raise DocumentError(f"{source}:{lineno}: duplicate key {key!r}")
        fields[key] = value
    return fields


def format_document(pairs: Iterable[tuple[str, str]]) -> str:
    return "".join(f"{k} = {v}\n" for k, v in pairs)


def read_document(path: str | Path) -> dict[str, str]:
    p = Path(path)
    return parse_document(p.read_text(encoding="utf-8"), source=str(p))


def write_document(path: str | Path, pairs: Iterable[tuple[str, str]]) -> None:
    Path(path).write_text(format_document(pairs), encoding="utf-8")


def fmt_float(x: float) -> str:
    return repr(float(x))


def fmt_floats(xs: Iterable[float]) -> str:
    return " ".join(fmt_float(x) for x in xs)


class FieldReader:
    """Typed access to parsed fields with unknown-field rejection."""

    def __init__(self, fields: Mapping[str, str], source: str = "<document>"):
        self.fields = dict(fields)
        self.source = source
        self._used: set[str] = set()

    def _raw(self, key: str) -> str:
        if key not in self.fields:
            raise DocumentError(f"{self.source}: missing required field {key!r}")
        self._used.add(key)
        return self.fields[key]

    def has(self, key: str) -> bool:
        return key in self.fields

    def str_(self, key: str) -> str:
        return self._raw(key)

    def int_(self, key: str) -> int:
        raw = self._raw(key)
        try:
            return int(raw)
        except ValueError as exc:
            raise DocumentError(f"{self.source}: field {key!r} is not an integer: {raw!r}") from exc

    def float_(self, key: str) -> float:
        raw = self._raw(key)
        try:
            return float(raw)
        except ValueError as exc:
            raise DocumentError(f"{self.source}: field {key!r} is not a number: {raw!r}") from exc

    def floats(self, key: str) -> list[float]:
        raw = self._raw(key)
        try:
            return [float(tok) for tok in raw.split()]
        except ValueError as exc:
            raise DocumentError(f"{self.source}: field {key!r} is not a number list: {raw!r}") from exc

    def finish(self) -> None:
        """Reject any field that was present but never consumed."""
        unknown = sorted(set(self.fields) - self._used)
        if unknown:
            raise DocumentError(f"{self.source}: unknown field {unknown[0]!r}")
