"""Append-only run trace.

Every interesting event in a run becomes one TraceRecord; the text rendering
is the determinism contract, so formatting is fixed: timestamps print as
exact milliseconds with three decimals, floats as six significant digits and
everything in the order it was recorded.
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass

from ..core import format_us


def format_value(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        return format(value, ".6g")
    return str(value)


@dataclass(frozen=True)
class TraceRecord:
    t_us: int
    entity: str
    kind: str
    fields: tuple[tuple[str, object], ...]

    def get(self, key: str, default=None):
        for k, v in self.fields:
            if k == key:
                return v
        return default

    def line(self) -> str:
        parts = [f"t={format_us(self.t_us)}", f"ent={self.entity}", f"rec={self.kind}"]
        parts.extend(f"{k}={format_value(v)}" for k, v in self.fields)
        return " ".join(parts)


class TraceLog:
    def __init__(self) -> None:
        self.records: list[TraceRecord] = []

    def add(self, t_us: int, entity: str, kind: str, **fields) -> None:
        if self.records and t_us < self.records[-1].t_us:
            raise AssertionError(
                f"trace time went backwards: {t_us} after {self.records[-1].t_us}")
        self.records.append(TraceRecord(t_us, entity, kind, tuple(fields.items())))

    def filter(self, kind: str) -> list[TraceRecord]:
        return [r for r in self.records if r.kind == kind]

    def lines(self) -> list[str]:
        return [r.line() for r in self.records]

    def text(self) -> str:
        return "".join(line + "\n" for line in self.lines())

    def sha256(self) -> str:
        return hashlib.sha256(self.text().encode()).hexdigest()

    def write(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(self.text())
