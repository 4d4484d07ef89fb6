"""Weight schemes kappa_{n,r}(x): indicator, Parzen kernels and Dirichlet projection.

Integrated weights are the cell averages of a smoothing kernel,
``kappa_r(x) = k * int_{I_r} K_n(x, t) dt``, computed from closed-form
antiderivatives.  Midpoint weights evaluate the kernel at the cell center.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Literal, Union

import numpy as np

from .model import BoundarySpec, CellProfile, Partition

Mode = Literal["integrated", "midpoint"]


class DegenerateWeightsError(ValueError):
    """All weights vanish at the evaluation point."""


# ---------------------------------------------------------------------------
# One-dimensional kernel profiles on [-1, 1]


def _triangular(u):
    return np.clip(1.0 - np.abs(u), 0.0, None)


def _triangular_cdf(u):
    u = np.clip(u, -1.0, 1.0)
    return np.where(u < 0, 0.5 * (1 + u) ** 2, 1.0 - 0.5 * (1 - u) ** 2)


def _epanechnikov(u):
    return np.where(np.abs(u) <= 1, 0.75 * (1 - u**2), 0.0)


def _epanechnikov_cdf(u):
    u = np.clip(u, -1.0, 1.0)
    return 0.5 + 0.75 * (u - u**3 / 3)


def _biweight(u):
    return np.where(np.abs(u) <= 1, 15 / 16 * (1 - u**2) ** 2, 0.0)


def _biweight_cdf(u):
    u = np.clip(u, -1.0, 1.0)
    return 0.5 + 15 / 16 * (u - 2 * u**3 / 3 + u**5 / 5)


@dataclass(frozen=True)
class KernelProfile:
    name: str
    pdf: object
    cdf: object
    l2_squared: float  # int K^2
    peak: float  # K(0)


KERNELS = {
    "triangular": KernelProfile("triangular", _triangular, _triangular_cdf, 2 / 3, 1.0),
    "epanechnikov": KernelProfile("epanechnikov", _epanechnikov, _epanechnikov_cdf, 3 / 5, 0.75),
    "biweight": KernelProfile("biweight", _biweight, _biweight_cdf, 5 / 7, 15 / 16),
}


# ---------------------------------------------------------------------------
# Schemes


@dataclass(frozen=True)
class Indicator:
    """Geffroy weights: kappa_r(x) = k 1{x in I_r}."""

    kind = "indicator"

    def to_record(self) -> dict:
        return {"kind": self.kind}


@dataclass(frozen=True)
class Parzen:
    """Product Parzen kernel h^-d prod K((x_j - t_j) / h); ``h=None`` defers to a schedule rule."""

    h: float | None = None
    kernel: str = "triangular"
    mode: Mode = "integrated"
    kind = "parzen"

    def __post_init__(self):
        if self.kernel not in KERNELS:
            raise ValueError(f"unknown kernel {self.kernel!r}; expected one of {sorted(KERNELS)}")
        if self.h is not None and not self.h > 0:
            raise ValueError(f"bandwidth must be > 0, got {self.h}")
        if self.mode not in ("integrated", "midpoint"):
            raise ValueError(f"unknown mode {self.mode!r}")

    @property
    def profile(self) -> KernelProfile:
        return KERNELS[self.kernel]

    def to_record(self) -> dict:
        return {"kind": self.kind, "kernel": self.kernel, "h": self.h, "mode": self.mode}


@dataclass(frozen=True)
class Dirichlet:
    """Trigonometric projection of order b on [0, 1]."""

    b: int | None = None
    mode: Mode = "integrated"
    kind = "dirichlet"

    def __post_init__(self):
        if self.b is not None and (self.b < 0 or int(self.b) != self.b):
            raise ValueError(f"truncation order must be a nonnegative integer, got {self.b}")
        if self.mode not in ("integrated", "midpoint"):
            raise ValueError(f"unknown mode {self.mode!r}")

    def to_record(self) -> dict:
        return {"kind": self.kind, "b": self.b, "mode": self.mode}


WeightScheme = Union[Indicator, Parzen, Dirichlet]


def scheme_from_record(record: dict) -> WeightScheme:
    rec = dict(record)
    kind = rec.pop("kind", None)
    if kind == "indicator":
        return Indicator(**rec)
    if kind == "parzen":
        return Parzen(**rec)
    if kind == "dirichlet":
        return Dirichlet(**rec)
    raise ValueError(f"unknown weight scheme {kind!r}")


def with_mode(scheme: WeightScheme, mode: Mode) -> WeightScheme:
    """Same scheme with integrated/midpoint mode switched (indicator has no mode)."""
    if isinstance(scheme, Indicator):
        return scheme
    rec = scheme.to_record()
    rec["mode"] = mode
    return scheme_from_record(rec)


# ---------------------------------------------------------------------------
# Dirichlet kernel and trigonometric basis


def dirichlet_kernel(x, t, b: int) -> np.ndarray:
    """K_b(x, t) = sum_{j<=b} e_j(x) e_j(t) for the trigonometric basis.

    For even b this is sin((1+b) pi u) / sin(pi u) with u = x - t, evaluated
    as a ratio of sinc functions of the offset to the nearest integer, which
    is exact and needs no special case at u = 0.
    """
    u = np.asarray(x, dtype=float) - np.asarray(t, dtype=float)
    if b % 2 == 0:
        e = u - np.round(u)
        return (1 + b) * np.sinc((1 + b) * e) / np.sinc(e)
    # odd b: the last cosine has no sine partner
    top = (b + 1) // 2
    out = dirichlet_kernel(x, t, b - 1)
    return out + 2 * np.cos(2 * top * np.pi * np.asarray(x)) * np.cos(2 * top * np.pi * np.asarray(t))


def trig_basis(x: np.ndarray, b: int) -> np.ndarray:
    """Rows e_0..e_b evaluated at x; shape (b + 1, len(x))."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    out = np.empty((b + 1, x.size))
    out[0] = 1.0
    for j in range(1, b + 1):
        freq = 2 * np.pi * ((j + 1) // 2)
        out[j] = math.sqrt(2) * (np.cos(freq * x) if j % 2 else np.sin(freq * x))
    return out


def trig_basis_cell_integrals(edges: np.ndarray, b: int) -> np.ndarray:
    """int_{edges[i]}^{edges[i+1]} e_j(t) dt; shape (b + 1, len(edges) - 1)."""
    lo, hi = edges[:-1], edges[1:]
    out = np.empty((b + 1, lo.size))
    out[0] = hi - lo
    for j in range(1, b + 1):
        w = 2 * np.pi * ((j + 1) // 2)
        if j % 2:
            out[j] = math.sqrt(2) * (np.sin(w * hi) - np.sin(w * lo)) / w
        else:
            out[j] = math.sqrt(2) * (np.cos(w * lo) - np.cos(w * hi)) / w
    return out


# ---------------------------------------------------------------------------
# Weight rows


@dataclass(frozen=True)
class WeightRow:
    kappa: np.ndarray
    kappa_norm: float
    w: np.ndarray


def _axis_factors(scheme: WeightScheme, part: Partition, coord: float) -> np.ndarray:
    """Per-axis factor whose d-fold Kronecker product gives kappa_r(x)."""
    s = part.side
    edges = part.edges
    if isinstance(scheme, Indicator):
        out = np.zeros(s)
        out[part.axis_index(np.array([coord]))[0]] = s
        return out
    if isinstance(scheme, Parzen):
        prof, h = scheme.profile, scheme.h
        if scheme.mode == "integrated":
            return s * (prof.cdf((coord - edges[:-1]) / h) - prof.cdf((coord - edges[1:]) / h))
        mids = 0.5 * (edges[:-1] + edges[1:])
        return prof.pdf((coord - mids) / h) / h
    raise TypeError(f"no axis factorization for {scheme!r}")


def _require_resolved(scheme: WeightScheme) -> None:
    if (isinstance(scheme, Parzen) and scheme.h is None) or (
            isinstance(scheme, Dirichlet) and scheme.b is None):
        raise ValueError(f"{scheme!r} has no bandwidth/order; resolve it for a sample size first")


def weight_matrix(scheme: WeightScheme, part: Partition, xs) -> np.ndarray:
    """kappa_r(x) for every x in ``xs``; shape (p, k)."""
    _require_resolved(scheme)
    xs = np.asarray(xs, dtype=float)
    xs = xs.reshape(-1, part.dim)
    if np.any(xs < 0) or np.any(xs > 1):
        raise ValueError("evaluation points must lie in [0, 1]^d")
    if isinstance(scheme, Dirichlet):
        if part.dim != 1:
            raise ValueError("the Dirichlet scheme is defined for d = 1 only")
        x = xs[:, 0]
        if scheme.mode == "integrated":
            basis = trig_basis(x, scheme.b)
            ints = trig_basis_cell_integrals(part.edges, scheme.b)
            return part.k * (basis.T @ ints)
        return dirichlet_kernel(x[:, None], part.centers()[None, :, 0], scheme.b)
    rows = np.empty((xs.shape[0], part.k))
    for i, x in enumerate(xs):
        row = np.ones(1)
        for coord in x:
            row = np.kron(row, _axis_factors(scheme, part, float(coord)))
        rows[i] = row
    return rows


def weight_row(scheme: WeightScheme, part: Partition, x) -> WeightRow:
    kappa = weight_matrix(scheme, part, np.asarray(x, dtype=float).reshape(1, -1))[0]
    norm = float(np.sqrt(np.sum(kappa**2)))
    if norm == 0.0:
        raise DegenerateWeightsError(f"all weights vanish at x={x} for {scheme!r}")
    return WeightRow(kappa=kappa, kappa_norm=norm, w=kappa / norm)


# ---------------------------------------------------------------------------
# Kernel norms


@dataclass(frozen=True)
class KernelNorms:
    l1: float
    l2: float
    sup: float


def _dirichlet_l1(b: int) -> float:
    # |K_b(x, .)| over one period by 20-point Gauss-Legendre per panel.  For
    # even b the panels are the lobes between consecutive zeros m / (1 + b), so
    # the integrand is smooth on each; odd b gets a fine uniform grid instead.
    nodes, wts = np.polynomial.legendre.leggauss(20)
    panels = b + 1 if b % 2 == 0 else 64 * (b + 1)
    cuts = np.arange(panels + 1) / panels
    a, c = cuts[:-1, None], cuts[1:, None]
    u = 0.5 * (c - a) * nodes + 0.5 * (a + c)
    return float(np.sum(0.5 * (c - a) * wts * np.abs(dirichlet_kernel(u, 0.0, b))))


def kernel_norms(scheme: WeightScheme, part: Partition) -> KernelNorms:
    """L1, L2 and sup norms of K_n(x, .) at an interior x.

    Parzen values assume the support [x - h, x + h]^d lies inside [0, 1]^d.
    """
    _require_resolved(scheme)
    if isinstance(scheme, Parzen):
        d, h, prof = part.dim, scheme.h, scheme.profile
        return KernelNorms(l1=1.0, l2=h ** (-d / 2) * prof.l2_squared ** (d / 2),
                           sup=h ** (-d) * prof.peak**d)
    if isinstance(scheme, Dirichlet):
        return KernelNorms(l1=_dirichlet_l1(scheme.b), l2=math.sqrt(1 + scheme.b),
                           sup=float(1 + scheme.b))
    raise ValueError("kernel norms are defined for Parzen and Dirichlet schemes")


# ---------------------------------------------------------------------------
# Assumption diagnostics


@dataclass(frozen=True)
class DiagnosticTolerances:
    min_cell_mean: float = 10.0  # H.1: n c nu_r m_r
    n_delta: float = 0.5  # H.2
    max_abs_w: float = 0.2  # H.4
    bias_budget: float = 0.5  # H.5
    h6: float = 0.5  # H.6 (no finite-n rule exists; default is a judgment call)


@dataclass
class AssumptionReport:
    delta_n: float
    Delta_n: float
    n_delta_n: float
    min_cell_mean: float
    probes: list
    kappa_norm: list
    max_abs_w: list
    sum_abs_w: list
    sigma_hat: np.ndarray
    bias_budget: list
    h6_term: list
    flags: dict = field(default_factory=dict)
    degenerate: list = field(default_factory=list)

    def to_dict(self) -> dict:
        probe_rows = [
            {"x": p, "kappa_norm": kn, "max_abs_w": mw, "sum_abs_w": sw,
             "bias_budget": bb, "h6_term": h6}
            for p, kn, mw, sw, bb, h6 in zip(self.probes, self.kappa_norm, self.max_abs_w,
                                            self.sum_abs_w, self.bias_budget, self.h6_term)
        ]
        return {
            "H.1": {"min_cell_mean": self.min_cell_mean, "ok": self.flags["H.1"]},
            "H.2": {"delta_n": self.delta_n, "Delta_n": self.Delta_n,
                    "n_delta_n": self.n_delta_n, "ok": self.flags["H.2"]},
            "H.3": {"sigma_hat": np.asarray(self.sigma_hat).tolist(), "ok": self.flags["H.3"]},
            "H.4": {"max_abs_w": self.max_abs_w, "ok": self.flags["H.4"]},
            "H.5": {"bias_budget": self.bias_budget, "ok": self.flags["H.5"]},
            "H.6": {"h6_term": self.h6_term, "ok": self.flags["H.6"]},
            "probes": probe_rows,
            "degenerate_probes": self.degenerate,
        }


def diagnose(scheme: WeightScheme, part: Partition, spec: BoundarySpec, profile: CellProfile,
             n: int, c: float, probes, tol: DiagnosticTolerances | None = None) -> AssumptionReport:
    """Finite-n proxies for the regularity assumptions at the given probe points.

    Degenerate probes (all weights zero) are reported, not raised.
    """
    tol = tol or DiagnosticTolerances()
    probes = np.asarray(probes, dtype=float).reshape(-1, part.dim)
    nu = 1.0 / part.k
    delta_n, Delta_n = profile.delta_n, profile.Delta_n
    n_delta = n * delta_n
    min_cell_mean = float(n * c * nu * profile.m_r.min())
    h6_scale = max(n_delta**2, n * nu * math.exp(-spec.m * c * n * nu), Delta_n)

    K = weight_matrix(scheme, part, probes)
    norms = np.sqrt(np.sum(K**2, axis=1))
    degenerate = [probes[i].tolist() for i in np.flatnonzero(norms == 0)]
    W = np.divide(K, norms[:, None], out=np.zeros_like(K), where=norms[:, None] > 0)
    sigma = W @ W.T
    fx = spec(probes)
    smoothed = K @ (nu * profile.fbar_r)
    with np.errstate(divide="ignore", invalid="ignore"):
        bias = np.where(norms > 0, n * np.abs(smoothed - fx) / norms, np.inf)
    max_w = np.max(np.abs(W), axis=1)
    sum_w = np.sum(np.abs(W), axis=1)
    h6 = sum_w * h6_scale

    eig_min = float(np.min(np.linalg.eigvalsh(sigma))) if sigma.size else 0.0
    live = norms > 0
    flags = {
        "H.1": bool(min_cell_mean >= tol.min_cell_mean),
        "H.2": bool(spec.m > 0 and n_delta <= tol.n_delta),
        "H.3": bool(eig_min >= -1e-10 and np.allclose(np.diag(sigma)[live], 1.0, atol=1e-12)
                    and live.all()),
        "H.4": bool(np.all(max_w[live] <= tol.max_abs_w) and live.all()),
        "H.5": bool(np.all(bias <= tol.bias_budget)),
        "H.6": bool(np.all(h6[live] <= tol.h6) and live.all()),
    }
    def listify(a):
        return [float(v) for v in a]

    return AssumptionReport(
        delta_n=delta_n, Delta_n=Delta_n, n_delta_n=n_delta, min_cell_mean=min_cell_mean,
        probes=[p.tolist() if part.dim > 1 else float(p[0]) for p in probes],
        kappa_norm=listify(norms), max_abs_w=listify(max_w), sum_abs_w=listify(sum_w),
        sigma_hat=sigma, bias_budget=listify(bias), h6_term=listify(h6), flags=flags,
        degenerate=degenerate,
    )
