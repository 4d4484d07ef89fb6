"""Exact laws of the rescaled cell maximum on a flat cell, and checks on weight arrays.

On a cell where f is constant (so the cell is exactly a rectangle of height
m_r), the rescaled maximum Z = n c nu_r Y*_r lives on [0, lambda] with
lambda = n c nu_r m_r, has an atom exp(-lambda) at 0 (the empty cell) and
distribution function exp(t - lambda) on [0, lambda].
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class CellLaw:
    lam: float

    def __post_init__(self):
        if not self.lam > 0:
            raise ValueError(f"lambda must be > 0, got {self.lam}")


@dataclass(frozen=True)
class ZMoments:
    mean: float
    variance: float
    ratio_mean: float  # E(Z / N), with Z / N := 0 on an empty cell


def zminus_cdf(law: CellLaw, t):
    """P(Z <= t): 0 below 0, exp(t - lambda) on [0, lambda], 1 above."""
    t = np.asarray(t, dtype=float)
    out = np.where(t < 0, 0.0, np.where(t > law.lam, 1.0, np.exp(np.minimum(t, law.lam) - law.lam)))
    return out if out.ndim else float(out)


def zminus_cdf_left(law: CellLaw, t):
    """Left limit P(Z < t); differs from the CDF only at the atom t = 0."""
    t = np.asarray(t, dtype=float)
    out = np.where(t <= 0, 0.0, zminus_cdf(law, t))
    return out if out.ndim else float(out)


def zminus_moments(law: CellLaw) -> ZMoments:
    lam = law.lam
    e = math.exp(-lam)
    return ZMoments(
        mean=lam - (1.0 - e),
        variance=1.0 - 2.0 * lam * e - e * e,
        ratio_mean=1.0 - e * (1.0 + lam),
    )


def conditional_max_cdf(law: CellLaw, t: float, q: int) -> float:
    """P(Z <= t | N = q) = (t / lambda)^q: Z is the max of q uniforms on [0, lambda]."""
    if not 0.0 <= t <= law.lam:
        raise ValueError(f"t={t} outside [0, lambda={law.lam}]")
    if q < 0:
        raise ValueError("count must be nonnegative")
    return 1.0 if q == 0 else (t / law.lam) ** q


def ratio_moment_series(law: CellLaw, ell: int, terms: int | None = None) -> float:
    """E((Z/N)^ell) by summing over the Poisson count.

    Given N = q >= 1, E(Z^ell | N = q) = lambda^ell q / (q + ell).
    """
    lam = law.lam
    terms = terms or int(lam + 20 * math.sqrt(lam) + 60)
    q = np.arange(1, terms + 1, dtype=float)
    logp = q * math.log(lam) - lam - np.array([math.lgamma(v + 1) for v in q])
    vals = lam**ell * q / (q + ell) / q**ell
    return float(np.sum(np.exp(logp) * vals))


@dataclass
class ArrayDiagnostics:
    quad_form: list  # sum_r <w_r, lambda>^2 per direction
    target_quad_form: list  # lambda' Sigma lambda per direction, when Sigma is given
    max_norm: float
    variance_error: float | None = None
    lindeberg_tail: dict = field(default_factory=dict)
    flags: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "A.2": {"variance_error": self.variance_error, "ok": self.flags.get("A.2")},
            "A.3": {"quad_form": self.quad_form, "target": self.target_quad_form,
                    "ok": self.flags.get("A.3")},
            "A.4": {"max_norm": self.max_norm, "ok": self.flags.get("A.4")},
            "A.5": {"lindeberg_tail": {str(k): v for k, v in self.lindeberg_tail.items()},
                    "ok": self.flags.get("A.5")},
        }


def check_array(weights, sigma=None, directions=None, samples=None,
                alphas=(1.0, 2.0, 3.0, 4.0), max_norm_tol: float = 0.2,
                quad_tol: float = 0.05, variance_tol: float = 0.1,
                tail_tol: float = 0.05) -> ArrayDiagnostics:
    """Finite-array proxies for the triangular-array CLT conditions.

    Parameters
    ----------
    weights : array, shape (k,) or (k, p)
        Row r is the vector w_{n,r} in R^p.
    sigma : array (p, p), optional
        Target covariance; defaults to ``W' W`` (A.3 then holds trivially).
    directions : array (q, p), optional
        Probe directions lambda; defaults to the coordinate axes.
    samples : array (R, k), optional
        Draws of the standardized variables zeta_{n,r}, used for A.2 and A.5.
    """
    W = np.asarray(weights, dtype=float)
    if W.ndim == 1:
        W = W[:, None]
    p = W.shape[1]
    dirs = np.eye(p) if directions is None else np.atleast_2d(np.asarray(directions, dtype=float))
    quad = np.sum((W @ dirs.T) ** 2, axis=0)
    S = W.T @ W if sigma is None else np.atleast_2d(np.asarray(sigma, dtype=float))
    target = np.einsum("ij,jk,ik->i", dirs, S, dirs)
    max_norm = float(np.max(np.linalg.norm(W, axis=1)))
    diag = ArrayDiagnostics(quad_form=quad.tolist(), target_quad_form=target.tolist(),
                            max_norm=max_norm)
    diag.flags["A.3"] = bool(np.all(np.abs(quad - target) <= quad_tol * np.maximum(1.0, target)))
    diag.flags["A.4"] = bool(max_norm <= max_norm_tol)
    if samples is not None:
        Z = np.asarray(samples, dtype=float)
        diag.variance_error = float(np.max(np.abs(np.mean(Z**2, axis=0) - 1.0)))
        diag.lindeberg_tail = {
            float(a): float(np.max(np.mean(Z**2 * (np.abs(Z) > a), axis=0))) for a in alphas
        }
        diag.flags["A.2"] = bool(diag.variance_error <= variance_tol)
        diag.flags["A.5"] = bool(diag.lindeberg_tail[float(max(alphas))] <= tail_tol)
    return diag
