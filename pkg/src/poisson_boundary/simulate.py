"""Exact simulation of the Poisson process with intensity n c (Lebesgue) on the hypograph of f."""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .model import BoundarySpec

_MASK64 = (1 << 64) - 1
# numpy's Poisson sampler rejects means beyond roughly 1e18; stay far below.
MAX_BOX_MEAN = 1e12


class ConfigurationError(ValueError):
    pass


@dataclass(frozen=True)
class ProcessSample:
    x: np.ndarray  # (N, d)
    y: np.ndarray  # (N,)
    n: int
    c: float
    seed: int
    replicate_id: int = 0

    @property
    def total(self) -> int:
        return int(self.y.shape[0])

    @property
    def dim(self) -> int:
        return int(self.x.shape[1])


def _splitmix64(z: int) -> int:
    z = (z + 0x9E3779B97F4A7C15) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def derive_replicate_seed(master: int, replicate_id: int) -> int:
    """Deterministic 64-bit seed for one replicate.

    Two rounds of splitmix64 over (master, replicate_id); the result depends
    on nothing else, so any scheduling of replicates reproduces it.
    """
    h = _splitmix64(int(master) & _MASK64)
    return _splitmix64(h ^ (int(replicate_id) & _MASK64))


def sample_process(spec: BoundarySpec, n: int, c: float, seed: int,
                   replicate_id: int = 0) -> ProcessSample:
    """Draw one realization by thinning a homogeneous process on [0,1]^d x [0, M].

    Parameters
    ----------
    spec : BoundarySpec
        Boundary f; points are kept when ``y <= f(x)``.
    n, c : int, float
        The intensity is ``n * c`` per unit of (d+1)-volume.
    seed : int
        64-bit seed; the sample is a pure function of it.
    """
    if n < 1:
        raise ConfigurationError(f"n must be >= 1, got {n}")
    if not c > 0:
        raise ConfigurationError(f"c must be > 0, got {c}")
    box_mean = n * c * spec.M
    if not np.isfinite(box_mean) or box_mean > MAX_BOX_MEAN:
        raise ConfigurationError(f"n*c*M = {box_mean:.3g} exceeds the Poisson sampler range")
    rng = np.random.default_rng(int(seed) & _MASK64)
    n_box = int(rng.poisson(box_mean))
    x = rng.random((n_box, spec.dim))
    y = rng.random(n_box) * spec.M
    keep = y <= spec(x) if n_box else np.zeros(0, dtype=bool)
    return ProcessSample(x=x[keep], y=y[keep], n=n, c=float(c), seed=int(seed),
                         replicate_id=int(replicate_id))


def write_points_csv(path: str | Path, samples: list[ProcessSample]) -> None:
    """Write ``replicate,x1..xd,y`` rows for each sample."""
    if not samples:
        raise ValueError("no samples to write")
    d = samples[0].dim
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["replicate"] + [f"x{j + 1}" for j in range(d)] + ["y"])
        for s in samples:
            for xi, yi in zip(s.x, s.y):
                w.writerow([s.replicate_id] + [repr(float(v)) for v in xi] + [repr(float(yi))])


def read_points_csv(path: str | Path, n: int, c: float) -> list[ProcessSample]:
    """Load samples written by :func:`write_points_csv`, one per replicate id."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    if header[0] != "replicate" or header[-1] != "y":
        raise ValueError(f"unexpected points header {header}")
    d = len(header) - 2
    data = np.array(body, dtype=float).reshape(-1, d + 2)
    out = []
    for rep in sorted(set(data[:, 0].astype(int))):
        sel = data[:, 0].astype(int) == rep
        out.append(ProcessSample(x=data[sel, 1:-1], y=data[sel, -1], n=n, c=c, seed=-1,
                                 replicate_id=rep))
    return out
