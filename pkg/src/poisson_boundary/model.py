"""Boundary functions on [0, 1]^d, equidistant partitions and per-cell profiles.

Every boundary in the catalog knows its exact range and mean over an
axis-aligned box, so cell infima/suprema/means are analytic rather than
sampled.  A dense-grid scan is only used to validate the catalog invariants
at construction time.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import ClassVar

import numpy as np

GRID_CHECK_POINTS = 2001


class DomainError(ValueError):
    """A point lies outside [0, 1]^d."""


class AdmissibilityError(ValueError):
    """A cell count k does not admit an exact equidistant box grid in dimension d."""


@dataclass(frozen=True)
class Holder:
    alpha: float

    def to_record(self) -> dict:
        return {"kind": "holder", "alpha": self.alpha}


@dataclass(frozen=True)
class C2Periodic:
    # Lipschitz constant exponent used by the Parzen schedules.
    alpha: ClassVar[float] = 1.0

    def to_record(self) -> dict:
        return {"kind": "c2_periodic"}


@dataclass(frozen=True)
class BoundarySpec:
    """Base class of the boundary catalog.

    Subclasses implement ``_values`` (vectorized evaluation on an ``(N, d)``
    array), ``box_range`` and ``box_mean``.
    """

    kind: ClassVar[str] = ""

    @property
    def dim(self) -> int:
        return 1

    @property
    def smoothness(self) -> Holder | C2Periodic:
        raise NotImplementedError

    def _values(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def box_range(self, lo: np.ndarray, hi: np.ndarray) -> tuple[float, float]:
        """Exact (inf, sup) of f over the box prod [lo_j, hi_j]."""
        raise NotImplementedError

    def box_mean(self, lo: np.ndarray, hi: np.ndarray) -> float:
        """Exact mean of f over the box prod [lo_j, hi_j]."""
        raise NotImplementedError

    def __call__(self, x) -> np.ndarray:
        x = _as_points(x, self.dim)
        return self._values(x)

    @property
    def m(self) -> float:
        return self.box_range(np.zeros(self.dim), np.ones(self.dim))[0]

    @property
    def M(self) -> float:
        return self.box_range(np.zeros(self.dim), np.ones(self.dim))[1]

    @property
    def integral(self) -> float:
        """a = int f over [0, 1]^d."""
        return self.box_mean(np.zeros(self.dim), np.ones(self.dim))

    def __post_init__(self) -> None:
        self._validate()

    def _validate(self) -> None:
        m, M = self.m, self.M
        if not (m > 0 and M >= m and math.isfinite(M)):
            raise ValueError(f"{self.kind}: need 0 < m <= M < inf, got m={m}, M={M}")
        g = np.linspace(0.0, 1.0, GRID_CHECK_POINTS if self.dim == 1 else 101)
        if self.dim == 1:
            pts = g[:, None]
        else:
            pts = np.stack(np.meshgrid(*([g] * self.dim), indexing="ij"), -1).reshape(-1, self.dim)
        v = self._values(pts)
        if v.min() < m - 1e-12 or v.max() > M + 1e-12:
            raise ValueError(f"{self.kind}: values escape [m, M] on the check grid")
        if isinstance(self.smoothness, C2Periodic) and self.dim == 1:
            f0, f1 = self._values(np.array([[0.0]]))[0], self._values(np.array([[1.0]]))[0]
            eps = 1e-6
            d0 = (self._values(np.array([[eps]]))[0] - f0) / eps
            d1 = (f1 - self._values(np.array([[1.0 - eps]]))[0]) / eps
            if abs(f0 - f1) > 1e-12 or abs(d0 - d1) > 1e-4 * max(1.0, abs(d0)):
                raise ValueError(f"{self.kind}: not periodic to first order on [0, 1]")

    def to_record(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True)
class Constant(BoundarySpec):
    level: float = 1.0
    d: int = 1
    kind: ClassVar[str] = "constant"

    @property
    def dim(self) -> int:
        return self.d

    @property
    def smoothness(self):
        return C2Periodic()

    def _values(self, x):
        return np.full(x.shape[0], float(self.level))

    def box_range(self, lo, hi):
        return float(self.level), float(self.level)

    def box_mean(self, lo, hi):
        return float(self.level)

    def to_record(self):
        rec = {"kind": self.kind, "level": self.level}
        if self.d != 1:
            rec["dim"] = self.d
        return rec


@dataclass(frozen=True)
class Linear(BoundarySpec):
    """f(x) = a + b x on [0, 1]."""

    a: float = 1.0
    b: float = 1.0
    kind: ClassVar[str] = "linear"

    @property
    def smoothness(self):
        return Holder(1.0)

    def _values(self, x):
        return self.a + self.b * x[:, 0]

    def box_range(self, lo, hi):
        u, v = self.a + self.b * float(lo[0]), self.a + self.b * float(hi[0])
        return min(u, v), max(u, v)

    def box_mean(self, lo, hi):
        return self.a + self.b * 0.5 * (float(lo[0]) + float(hi[0]))

    def to_record(self):
        return {"kind": self.kind, "a": self.a, "b": self.b}


def _sin_range(freq: float, lo: float, hi: float) -> tuple[float, float]:
    """Exact range of sin(2 pi freq t) for t in [lo, hi]."""
    vals = [math.sin(2 * math.pi * freq * lo), math.sin(2 * math.pi * freq * hi)]
    if freq != 0:
        # critical points: 2 pi freq t = pi/2 + j pi
        a, b = sorted((2 * freq * lo - 0.5, 2 * freq * hi - 0.5))
        for j in range(math.ceil(a), math.floor(b) + 1):
            vals.append(1.0 if j % 2 == 0 else -1.0)
    return min(vals), max(vals)


def _sin_mean(freq: float, lo: float, hi: float) -> float:
    if hi == lo:
        return math.sin(2 * math.pi * freq * lo)
    if freq == 0:
        return 0.0
    w = 2 * math.pi * freq
    return (math.cos(w * lo) - math.cos(w * hi)) / (w * (hi - lo))


@dataclass(frozen=True)
class Sine(BoundarySpec):
    """f(x) = base + amplitude * sin(2 pi frequency x)."""

    base: float = 2.0
    amplitude: float = 0.5
    frequency: float = 1.0
    kind: ClassVar[str] = "sine"

    @property
    def smoothness(self):
        if float(self.frequency).is_integer():
            return C2Periodic()
        return Holder(1.0)

    def _values(self, x):
        return self.base + self.amplitude * np.sin(2 * np.pi * self.frequency * x[:, 0])

    def box_range(self, lo, hi):
        s_lo, s_hi = _sin_range(self.frequency, float(lo[0]), float(hi[0]))
        u, v = self.base + self.amplitude * s_lo, self.base + self.amplitude * s_hi
        return min(u, v), max(u, v)

    def box_mean(self, lo, hi):
        return self.base + self.amplitude * _sin_mean(self.frequency, float(lo[0]), float(hi[0]))

    def to_record(self):
        return {"kind": self.kind, "base": self.base, "amplitude": self.amplitude,
                "frequency": self.frequency}


@dataclass(frozen=True)
class HolderCusp(BoundarySpec):
    """f(x) = base + |x - center|^alpha, alpha-Holder at the cusp."""

    base: float = 1.0
    alpha: float = 0.5
    center: float = 0.5
    kind: ClassVar[str] = "holder_cusp"

    @property
    def smoothness(self):
        return Holder(float(self.alpha))

    def _validate(self):
        if not 0 < self.alpha <= 1:
            raise ValueError(f"holder_cusp: alpha must lie in (0, 1], got {self.alpha}")
        if not 0 <= self.center <= 1:
            raise ValueError(f"holder_cusp: center must lie in [0, 1], got {self.center}")
        super()._validate()

    def _values(self, x):
        return self.base + np.abs(x[:, 0] - self.center) ** self.alpha

    def box_range(self, lo, hi):
        lo, hi = float(lo[0]), float(hi[0])
        ends = [abs(lo - self.center), abs(hi - self.center)]
        near = 0.0 if lo <= self.center <= hi else min(ends)
        return self.base + near ** self.alpha, self.base + max(ends) ** self.alpha

    def _antiderivative(self, t: float) -> float:
        # d/dt of this equals |t - center|^alpha
        s = t - self.center
        return math.copysign(abs(s) ** (self.alpha + 1) / (self.alpha + 1), s)

    def box_mean(self, lo, hi):
        lo, hi = float(lo[0]), float(hi[0])
        if hi == lo:
            return self.base + abs(lo - self.center) ** self.alpha
        return self.base + (self._antiderivative(hi) - self._antiderivative(lo)) / (hi - lo)

    def to_record(self):
        return {"kind": self.kind, "base": self.base, "alpha": self.alpha, "center": self.center}


@dataclass(frozen=True)
class ProductSine(BoundarySpec):
    """f(x) = base + amplitude * prod_j sin(2 pi frequency x_j), d >= 2."""

    base: float = 2.0
    amplitude: float = 0.5
    frequency: float = 1.0
    d: int = 2
    kind: ClassVar[str] = "product_sine"

    @property
    def dim(self) -> int:
        return self.d

    @property
    def smoothness(self):
        return C2Periodic()

    def __post_init__(self):
        if self.d < 2:
            raise ValueError("product_sine requires dim >= 2")
        if not float(self.frequency).is_integer():
            raise ValueError("product_sine requires an integer frequency")
        super().__post_init__()

    def _values(self, x):
        return self.base + self.amplitude * np.prod(np.sin(2 * np.pi * self.frequency * x), axis=1)

    def box_range(self, lo, hi):
        ranges = [_sin_range(self.frequency, float(a), float(b)) for a, b in zip(lo, hi)]
        # multilinear in the factor values: extremes sit on corners of the range box
        corners = np.array([1.0])
        for r in ranges:
            corners = np.concatenate([corners * r[0], corners * r[1]])
        vals = self.base + self.amplitude * corners
        return float(vals.min()), float(vals.max())

    def box_mean(self, lo, hi):
        p = 1.0
        for a, b in zip(lo, hi):
            p *= _sin_mean(self.frequency, float(a), float(b))
        return self.base + self.amplitude * p

    def to_record(self):
        return {"kind": self.kind, "base": self.base, "amplitude": self.amplitude,
                "frequency": self.frequency, "dim": self.d}


_CATALOG = {cls.kind: cls for cls in (Constant, Linear, Sine, HolderCusp, ProductSine)}


def boundary_from_record(record: dict) -> BoundarySpec:
    """Build a boundary from a tagged record such as ``{"kind": "sine", "base": 2.0}``."""
    rec = dict(record)
    kind = rec.pop("kind", None)
    if kind not in _CATALOG:
        raise ValueError(f"unknown boundary kind {kind!r}; expected one of {sorted(_CATALOG)}")
    if "dim" in rec:
        rec["d"] = int(rec.pop("dim"))
    return _CATALOG[kind](**rec)


def _as_points(x, dim: int) -> np.ndarray:
    arr = np.asarray(x, dtype=float)
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
    elif arr.ndim == 1:
        arr = arr.reshape(-1, 1) if dim == 1 else arr.reshape(1, -1)
    if arr.shape[1] != dim:
        raise ValueError(f"expected points of dimension {dim}, got shape {arr.shape}")
    if np.any(arr < 0.0) or np.any(arr > 1.0) or np.any(~np.isfinite(arr)):
        raise DomainError("point outside [0, 1]^d")
    return arr


def eval_boundary(spec: BoundarySpec, x) -> float:
    """Value f(x) at a single point of [0, 1]^d."""
    pts = _as_points(x, spec.dim)
    if pts.shape[0] != 1:
        raise ValueError("eval_boundary takes a single point; call the boundary on an array instead")
    return float(spec(pts)[0])


def integer_root(k: int, d: int) -> int:
    """Return s with s**d == k, or raise AdmissibilityError."""
    if k < 1 or d < 1:
        raise AdmissibilityError(f"k={k}, d={d} must be positive")
    s = round(k ** (1.0 / d))
    for cand in (s - 1, s, s + 1):
        if cand >= 1 and cand**d == k:
            return cand
    raise AdmissibilityError(f"k={k} has no integer {d}-th root; equidistant grid impossible")


@dataclass(frozen=True)
class Partition:
    """Equidistant box partition of [0, 1]^d into k cells (row-major order)."""

    k: int
    dim: int = 1
    side: int = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "side", integer_root(self.k, self.dim))

    @property
    def nu(self) -> np.ndarray:
        return np.full(self.k, 1.0 / self.k)

    @property
    def edges(self) -> np.ndarray:
        """Per-axis cell edges, length side + 1."""
        return np.arange(self.side + 1) / self.side

    def multi_index(self, r: int) -> tuple[int, ...]:
        return tuple(int(i) for i in np.unravel_index(r, (self.side,) * self.dim))

    def cell_bounds(self, r: int) -> tuple[np.ndarray, np.ndarray]:
        idx = np.array(self.multi_index(r))
        return idx / self.side, (idx + 1) / self.side

    def centers(self) -> np.ndarray:
        """Cell centers, shape (k, dim)."""
        mids = (np.arange(self.side) + 0.5) / self.side
        grid = np.meshgrid(*([mids] * self.dim), indexing="ij")
        return np.stack(grid, -1).reshape(-1, self.dim)

    def axis_index(self, coords: np.ndarray) -> np.ndarray:
        """Per-axis cell index; interior edges go to the upper cell, 1.0 to the last."""
        return np.minimum(np.floor(coords * self.side).astype(np.int64), self.side - 1)

    def locate(self, x: np.ndarray) -> np.ndarray:
        """Flat cell index for each row of an (N, dim) array."""
        idx = self.axis_index(np.asarray(x, dtype=float))
        if idx.ndim == 1:
            idx = idx[:, None]
        return np.ravel_multi_index(tuple(idx.T), (self.side,) * self.dim)


@dataclass(frozen=True)
class CellProfile:
    m_r: np.ndarray
    M_r: np.ndarray
    fbar_r: np.ndarray
    k: int

    @property
    def Delta_n(self) -> float:
        return float(np.max(self.M_r - self.m_r))

    @property
    def delta_n(self) -> float:
        return float(np.max((self.M_r - self.m_r) / self.k))


def profile_cells(spec: BoundarySpec, part: Partition) -> CellProfile:
    """Exact infimum, supremum and mean of ``spec`` on every cell of ``part``."""
    if spec.dim != part.dim:
        raise ValueError(f"dimension mismatch: boundary d={spec.dim}, partition d={part.dim}")
    m_r = np.empty(part.k)
    M_r = np.empty(part.k)
    fbar = np.empty(part.k)
    for r in range(part.k):
        lo, hi = part.cell_bounds(r)
        m_r[r], M_r[r] = spec.box_range(lo, hi)
        fbar[r] = spec.box_mean(lo, hi)
    return CellProfile(m_r=m_r, M_r=M_r, fbar_r=fbar, k=part.k)
