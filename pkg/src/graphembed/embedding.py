"""The embedding container shared by every method, plus its text format."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, TextIO

import numpy as np


@dataclass
class Embedding:
    Y: np.ndarray
    method: str
    params: dict = field(default_factory=dict)
    Y_s: np.ndarray | None = None
    Y_t: np.ndarray | None = None
    loss_trace: list = field(default_factory=list)
    model: Any = None
    warnings: list = field(default_factory=list)

    def __post_init__(self):
        self.Y = np.asarray(self.Y, dtype=np.float64)
        if self.Y.ndim != 2:
            raise ValueError("embedding must be a 2-D array")
        if not np.all(np.isfinite(self.Y)):
            raise ValueError("embedding contains non-finite entries")
        if (self.Y_s is None) != (self.Y_t is None):
            raise ValueError("Y_s and Y_t must be given together")
        if self.Y_s is not None:
            self.Y_s = np.asarray(self.Y_s, dtype=np.float64)
            self.Y_t = np.asarray(self.Y_t, dtype=np.float64)
            if self.Y_s.shape != self.Y_t.shape or self.Y_s.shape != self.Y.shape:
                raise ValueError("source/target factors must match Y's shape")
            if not np.array_equal(self.Y, self.Y_s):
                raise ValueError("with paired factors Y must equal Y_s")

    @property
    def n(self):
        return self.Y.shape[0]

    @property
    def d(self):
        return self.Y.shape[1]

    @property
    def paired(self):
        return self.Y_s is not None


def format_rows(Y, stream: TextIO):
    n, d = Y.shape
    stream.write(f"{n} {d}\n")
    for i, row in enumerate(Y):
        stream.write(str(i) + "".join(f" {v:.9g}" for v in row) + "\n")


def write_embedding(Y, stream: TextIO):
    """Write ``n d`` then one ``node_id v1 ... vd`` line per node (9 significant digits)."""
    format_rows(np.asarray(Y, dtype=np.float64), stream)


def read_embedding(stream: TextIO) -> np.ndarray:
    header = stream.readline().split()
    if len(header) != 2:
        raise ValueError("embedding header must be 'n d'")
    n, d = int(header[0]), int(header[1])
    Y = np.zeros((n, d))
    seen = np.zeros(n, dtype=bool)
    for lineno, line in enumerate(stream, start=2):
        parts = line.split()
        if not parts:
            continue
        if len(parts) != d + 1:
            raise ValueError(f"line {lineno}: expected {d + 1} fields, got {len(parts)}")
        i = int(parts[0])
        Y[i] = [float(x) for x in parts[1:]]
        seen[i] = True
    if not seen.all():
        raise ValueError(f"embedding file is missing {int((~seen).sum())} node rows")
    return Y
