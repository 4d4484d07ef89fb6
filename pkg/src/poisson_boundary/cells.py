"""Per-cell counts, maxima and bias-corrected extremes."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import Partition
from .simulate import ProcessSample


class DataError(ValueError):
    pass


@dataclass(frozen=True)
class CellStats:
    """Counts N_r, maxima Y*_r and xi_r = (1 + 1/N_r) n c nu_r Y*_r (0 for empty cells)."""

    counts: np.ndarray
    ymax: np.ndarray
    xi: np.ndarray
    corrected: np.ndarray  # (1 + 1/N_r) Y*_r
    n: int
    c: float
    k: int

    @property
    def total(self) -> int:
        return int(self.counts.sum())


def reduce_cells(sample: ProcessSample, part: Partition) -> CellStats:
    if sample.dim != part.dim:
        raise ValueError(f"dimension mismatch: sample d={sample.dim}, partition d={part.dim}")
    x, y = sample.x, sample.y
    if x.size and (np.any(x < 0.0) or np.any(x > 1.0) or np.any(y < 0.0)):
        raise DataError("sample contains points outside [0, 1]^d x [0, inf)")
    idx = part.locate(x) if x.size else np.zeros(0, dtype=np.int64)
    counts = np.bincount(idx, minlength=part.k)
    ymax = np.zeros(part.k)
    np.maximum.at(ymax, idx, y)
    scale = sample.n * sample.c / part.k
    safe = np.maximum(counts, 1)
    corrected = np.where(counts > 0, (1.0 + 1.0 / safe) * ymax, 0.0)
    return CellStats(counts=counts, ymax=ymax, xi=scale * corrected, corrected=corrected,
                     n=sample.n, c=sample.c, k=part.k)
