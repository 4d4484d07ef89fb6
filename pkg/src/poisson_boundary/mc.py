"""Monte Carlo harness: pointwise CLT, interval coverage, convergence rates, c_hat consistency.

Every replicate draws its own generator from ``derive_replicate_seed`` and
results are reduced in replicate order, so a report is a pure function of the
plan: the worker count changes wall time and nothing else.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import stats as sps
from scipy.special import ndtr

from .cells import reduce_cells
from .estimate import estimate_a_and_c, z_level
from .model import BoundarySpec, Constant, Partition
from .simulate import derive_replicate_seed, sample_process
from .theory import CellLaw, zminus_cdf, zminus_cdf_left, zminus_moments
from .weights import (DegenerateWeightsError, Dirichlet, Indicator, Parzen, WeightScheme,
                      kernel_norms, weight_matrix)

_STEP_SALT = 0x5EED5A17


class McFailure(RuntimeError):
    """Too many degenerate replicates to report a meaningful result."""


# ---------------------------------------------------------------------------
# Schedules


def default_u(n: int) -> float:
    """Slowly divergent factor used in the default k_n rules."""
    return math.log(math.log(max(n, 16)))


def admissible_k(target: float, dim: int) -> int:
    """Smallest k >= target whose d-th root is an integer."""
    s = max(1, math.ceil(target ** (1.0 / dim) - 1e-12))
    return s**dim


@dataclass(frozen=True)
class Step:
    n: int
    part: Partition
    scheme: WeightScheme


@dataclass(frozen=True)
class ExperimentPlan:
    spec: BoundarySpec
    scheme: WeightScheme
    probes: tuple
    n_schedule: tuple = (5000,)
    c: float = 1.0
    gamma: float = 0.95
    replicates: int = 500
    seed: int = 12345
    c_mode: str = "known"  # or "estimated"
    k: int | None = None  # fixed cell count; None -> default rule
    alpha: float | None = None  # smoothness used by the rules; None -> from the boundary
    max_failure_fraction: float = 0.01

    def __post_init__(self):
        probes = np.asarray(self.probes, dtype=float).reshape(-1, self.spec.dim)
        if np.any(probes <= 0) or np.any(probes >= 1):
            raise ValueError("probes must lie in the open cube (0, 1)^d")
        if len({tuple(p) for p in probes}) != len(probes):
            raise ValueError("probes must be pairwise distinct")
        ns = list(self.n_schedule)
        if not ns or any(n < 1 for n in ns) or any(b <= a for a, b in zip(ns, ns[1:])):
            raise ValueError("n schedule must be positive and increasing")
        if self.c_mode not in ("known", "estimated"):
            raise ValueError(f"c_mode must be 'known' or 'estimated', got {self.c_mode!r}")
        if self.replicates < 1:
            raise ValueError("need at least one replicate")
        if not 0 <= self.gamma < 1:
            raise ValueError("gamma must lie in [0, 1)")

    @property
    def probe_array(self) -> np.ndarray:
        return np.asarray(self.probes, dtype=float).reshape(-1, self.spec.dim)

    @property
    def smoothness_alpha(self) -> float:
        return float(self.alpha if self.alpha is not None else self.spec.smoothness.alpha)

    def resolve(self, n: int) -> Step:
        """Cell count and smoothing parameter at sample size n.

        Defaults: h_n = n^(-1/(alpha+d)), k_n = n^(d/(alpha+d)) u_n^2 (Parzen and
        indicator); b_n = floor(sqrt(n)), k_n = sqrt(n) log(n) u_n^2 (Dirichlet).
        Explicit values in the plan's scheme / k override the rules.
        """
        d, a, u = self.spec.dim, self.smoothness_alpha, default_u(n)
        scheme = self.scheme
        if isinstance(scheme, Dirichlet):
            target_k = math.sqrt(n) * math.log(n) * u**2
            if scheme.b is None:
                scheme = replace(scheme, b=int(math.isqrt(n)))
        else:
            target_k = n ** (d / (a + d)) * u**2
            if isinstance(scheme, Parzen) and scheme.h is None:
                scheme = replace(scheme, h=n ** (-1.0 / (a + d)))
        k = self.k if self.k is not None else admissible_k(target_k, d)
        return Step(n=n, part=Partition(k, d), scheme=scheme)


# ---------------------------------------------------------------------------
# Replicates


@dataclass(frozen=True)
class ReplicateResult:
    fhat: np.ndarray
    total: int
    a_hat: float
    c_hat: float
    ci_lo: np.ndarray
    ci_hi: np.ndarray


def _step_seed(master: int, step_index: int) -> int:
    return master if step_index == 0 else derive_replicate_seed(master ^ _STEP_SALT, step_index)


def run_replicates(plan: ExperimentPlan, step: Step, step_index: int = 0,
                   threads: int = 1) -> tuple[list[ReplicateResult], np.ndarray, np.ndarray]:
    """Simulate and estimate at all probes for every replicate of one schedule step."""
    K = weight_matrix(step.scheme, step.part, plan.probe_array)
    norms = np.sqrt(np.sum(K**2, axis=1))
    if np.any(norms == 0):
        raise DegenerateWeightsError("probe with all-zero weights")
    z = z_level(plan.gamma)
    nu = 1.0 / step.part.k
    master = _step_seed(plan.seed, step_index)

    def one(rep: int) -> ReplicateResult:
        sample = sample_process(plan.spec, step.n, plan.c, derive_replicate_seed(master, rep), rep)
        stats = reduce_cells(sample, step.part)
        ac = estimate_a_and_c(stats)
        fhat = K @ stats.corrected * nu
        if stats.total > 0:
            spread = z * norms[:, None] / stats.total
            lo = (K - spread) @ stats.corrected * nu
            hi = (K + spread) @ stats.corrected * nu
        else:
            lo = hi = np.full(len(norms), np.nan)
        return ReplicateResult(fhat=fhat, total=stats.total, a_hat=ac.a_hat, c_hat=ac.c_hat,
                               ci_lo=lo, ci_hi=hi)

    reps = range(plan.replicates)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(one, reps))
    else:
        results = [one(r) for r in reps]
    return results, K, norms


# ---------------------------------------------------------------------------
# Statistics


def ks_statistic(sample, cdf, cdf_left=None, atoms=()) -> float:
    """Exact sup |F_n - F| for a distribution continuous except at ``atoms``.

    ``cdf_left`` gives F(t-) and is only needed when F has atoms; the
    supremum is attained at sample points or atoms, from one side or the other.
    """
    x = np.sort(np.asarray(sample, dtype=float).ravel())
    if x.size == 0:
        raise ValueError("KS statistic of an empty sample")
    pts = np.union1d(x, np.asarray(atoms, dtype=float))
    m = x.size
    fn_right = np.searchsorted(x, pts, side="right") / m
    fn_left = np.searchsorted(x, pts, side="left") / m
    F = np.asarray(cdf(pts), dtype=float)
    Fl = F if cdf_left is None else np.asarray(cdf_left(pts), dtype=float)
    return float(max(np.max(np.abs(fn_right - F)), np.max(np.abs(fn_left - Fl))))


def ks_normal(sample) -> float:
    return ks_statistic(sample, ndtr)


# ---------------------------------------------------------------------------
# Reports


@dataclass
class McReport:
    kind: str
    plan: dict
    probes: list
    n_values: list
    replicates: int
    failures: int = 0
    z: np.ndarray | None = None  # (R, p) standardized errors under plan.c_mode
    z_known: np.ndarray | None = None
    z_estimated: np.ndarray | None = None
    z_kernel_form: np.ndarray | None = None
    ks: list | None = None
    ks_kernel_form: list | None = None
    ks_defined: bool = False
    mean: list | None = None
    variance: list | None = None
    correlation: list | None = None
    coverage: list | None = None
    rmse: list | None = None
    rmse_by_probe: list | None = None
    slope: float | None = None
    slope_halfwidth: float | None = None
    chat_median: list | None = None
    chat_q99: list | None = None
    chat_ratios: list | None = None
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        out = {}
        for key, val in self.__dict__.items():
            if key.startswith("z") or key == "chat_ratios":
                continue
            out[key] = _jsonable(val)
        return out


def _jsonable(val):
    if isinstance(val, np.ndarray):
        return _jsonable(val.tolist())
    if isinstance(val, dict):
        return {str(k): _jsonable(v) for k, v in val.items()}
    if isinstance(val, (list, tuple)):
        return [_jsonable(v) for v in val]
    if isinstance(val, (np.floating, float)):
        v = float(val)
        return v if math.isfinite(v) else None
    if isinstance(val, np.integer):
        return int(val)
    if isinstance(val, np.bool_):
        return bool(val)
    return val


def plan_record(plan: ExperimentPlan) -> dict:
    return {
        "boundary": plan.spec.to_record(),
        "scheme": plan.scheme.to_record(),
        "probes": plan.probe_array.tolist(),
        "n_schedule": list(plan.n_schedule),
        "c": plan.c, "gamma": plan.gamma, "replicates": plan.replicates, "seed": plan.seed,
        "c_mode": plan.c_mode, "k": plan.k, "alpha": plan.alpha,
    }


def _step_record(step: Step) -> dict:
    return {"n": step.n, "k": step.part.k, "scheme": step.scheme.to_record()}


def _kernel_scale(step: Step) -> float | None:
    """k^(1/2) ||K_n(x, .)||_2, the normalizer of the kernel form of the CLT."""
    if isinstance(step.scheme, Indicator):
        return None
    return math.sqrt(step.part.k) * kernel_norms(step.scheme, step.part).l2


def _moments(z: np.ndarray) -> tuple[list, list, list | None]:
    mean = z.mean(axis=0).tolist()
    var = z.var(axis=0, ddof=1).tolist() if z.shape[0] > 1 else [float("nan")] * z.shape[1]
    corr = None
    if z.shape[1] > 1 and z.shape[0] > 2:
        corr = np.corrcoef(z.T).tolist()
    return mean, var, corr


def _usable(results, plan: ExperimentPlan, need_chat: bool) -> tuple[list, int]:
    ok = [r for r in results if r.total > 0 and (not need_chat or math.isfinite(r.c_hat))]
    failures = len(results) - len(ok)
    if failures > plan.max_failure_fraction * len(results) and failures > 0:
        raise McFailure(f"{failures}/{len(results)} degenerate replicates exceed the allowed "
                        f"fraction {plan.max_failure_fraction}")
    return ok, failures


def run_clt(plan: ExperimentPlan, threads: int = 1) -> McReport:
    """Standardized errors (n c / kappa_n(x)) (fhat - f) at each probe, with KS vs N(0, 1)."""
    step = plan.resolve(plan.n_schedule[0])
    results, K, norms = run_replicates(plan, step, 0, threads)
    ok, failures = _usable(results, plan, need_chat=plan.c_mode == "estimated")
    fx = plan.spec(plan.probe_array)
    err = np.array([r.fhat - fx for r in ok]).reshape(len(ok), -1)
    chat = np.array([r.c_hat for r in ok])
    z_known = step.n * plan.c * err / norms
    z_est = step.n * chat[:, None] * err / norms
    z = z_known if plan.c_mode == "known" else z_est
    scale = _kernel_scale(step)
    z_kernel = None if scale is None else z * norms / scale
    defined = z.shape[0] >= 2
    mean, var, corr = _moments(z)
    report = McReport(
        kind="clt", plan=plan_record(plan), probes=plan.probe_array.tolist(), n_values=[step.n],
        replicates=plan.replicates, failures=failures, z=z, z_known=z_known, z_estimated=z_est,
        z_kernel_form=z_kernel, ks_defined=defined, mean=mean, variance=var, correlation=corr,
        extra={"step": _step_record(step), "kappa_norm": norms.tolist(),
               "kernel_scale": scale},
    )
    if defined:
        report.ks = [ks_normal(z[:, j]) for j in range(z.shape[1])]
        report.extra["ks_known"] = [ks_normal(z_known[:, j]) for j in range(z.shape[1])]
        report.extra["ks_estimated"] = [ks_normal(z_est[:, j]) for j in range(z.shape[1])
                                        ] if np.all(np.isfinite(z_est)) else None
        if z_kernel is not None:
            report.ks_kernel_form = [ks_normal(z_kernel[:, j]) for j in range(z.shape[1])]
    return report


def run_coverage(plan: ExperimentPlan, threads: int = 1) -> McReport:
    """Fraction of replicates whose explicit gamma-interval contains f(x)."""
    step = plan.resolve(plan.n_schedule[0])
    results, _, _ = run_replicates(plan, step, 0, threads)
    ok, failures = _usable(results, plan, need_chat=False)
    fx = plan.spec(plan.probe_array)
    lo = np.array([r.ci_lo for r in ok])
    hi = np.array([r.ci_hi for r in ok])
    covered = (lo <= fx) & (fx <= hi)
    return McReport(
        kind="coverage", plan=plan_record(plan), probes=plan.probe_array.tolist(),
        n_values=[step.n], replicates=plan.replicates, failures=failures,
        coverage=covered.mean(axis=0).tolist(),
        extra={"step": _step_record(step), "gamma": plan.gamma,
               "mean_width": (hi - lo).mean(axis=0).tolist()},
    )


def run_rate(plan: ExperimentPlan, threads: int = 1) -> McReport:
    """RMSE at the probes along the n schedule and its log-log OLS slope."""
    if len(plan.n_schedule) < 2:
        raise ValueError("rate experiments need at least two schedule points")
    fx = plan.spec(plan.probe_array)
    rmse, by_probe, steps, failures = [], [], [], 0
    for i, n in enumerate(plan.n_schedule):
        step = plan.resolve(n)
        results, _, _ = run_replicates(plan, step, i, threads)
        ok, bad = _usable(results, plan, need_chat=False)
        failures += bad
        err = np.array([r.fhat - fx for r in ok])
        rmse.append(float(np.sqrt(np.mean(err**2))))
        by_probe.append(np.sqrt(np.mean(err**2, axis=0)).tolist())
        steps.append(_step_record(step))
    logn, logr = np.log(np.asarray(plan.n_schedule, dtype=float)), np.log(rmse)
    fit = sps.linregress(logn, logr)
    dof = len(rmse) - 2
    half = float(sps.t.ppf(0.975, dof) * fit.stderr) if dof > 0 else float("nan")
    return McReport(
        kind="rate", plan=plan_record(plan), probes=plan.probe_array.tolist(),
        n_values=list(plan.n_schedule), replicates=plan.replicates, failures=failures,
        rmse=rmse, rmse_by_probe=by_probe, slope=float(fit.slope), slope_halfwidth=half,
        extra={"steps": steps, "intercept": float(fit.intercept)},
    )


def run_chat_consistency(plan: ExperimentPlan, threads: int = 1) -> McReport:
    """Distribution of |c_hat - c| along the n schedule."""
    med, q99, ratios, steps, failures = [], [], [], [], 0
    for i, n in enumerate(plan.n_schedule):
        step = plan.resolve(n)
        results, _, _ = run_replicates(plan, step, i, threads)
        ok, bad = _usable(results, plan, need_chat=True)
        failures += bad
        chat = np.array([r.c_hat for r in ok])
        dev = np.abs(chat - plan.c)
        med.append(float(np.median(dev)))
        q99.append(float(np.quantile(dev, 0.99)))
        ratios.append((chat / plan.c).tolist())
        steps.append(_step_record(step))
    decreasing = all(b < a for a, b in zip(med, med[1:]))
    return McReport(
        kind="chat-consistency", plan=plan_record(plan), probes=plan.probe_array.tolist(),
        n_values=list(plan.n_schedule), replicates=plan.replicates, failures=failures,
        chat_median=med, chat_q99=q99, chat_ratios=ratios,
        extra={"steps": steps, "median_strictly_decreasing": decreasing},
    )


# ---------------------------------------------------------------------------
# Flat-cell oracle validation


def flat_cell_draws(lam: float, n_cells: int, seed: int, k: int = 20,
                    threads: int = 1) -> tuple[np.ndarray, np.ndarray]:
    """Rescaled maxima Z and counts N from simulated flat cells with parameter lam.

    Runs the full simulate -> reduce pipeline on f = 1, c = 1 with n = lam * k,
    so each of the k cells has lambda = n / k.
    """
    n = lam * k
    if abs(n - round(n)) > 1e-9:
        raise ValueError(f"lam * k = {n} must be an integer")
    n = int(round(n))
    spec, part = Constant(1.0), Partition(k, 1)
    reps = math.ceil(n_cells / k)

    def one(rep):
        s = reduce_cells(sample_process(spec, n, 1.0, derive_replicate_seed(seed, rep), rep), part)
        return s.ymax * (n / k), s.counts

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            out = list(pool.map(one, range(reps)))
    else:
        out = [one(r) for r in range(reps)]
    Z = np.concatenate([o[0] for o in out])[:n_cells]
    N = np.concatenate([o[1] for o in out])[:n_cells]
    return Z, N


def ratio_samples(Z: np.ndarray, N: np.ndarray) -> np.ndarray:
    """Z / N with the empty-cell convention Z / N = 0."""
    return np.where(N > 0, Z / np.maximum(N, 1), 0.0)


def oracle_validate(lams=(2.0, 5.0, 20.0), n_cells: int = 100_000, seed: int = 12345,
                    threads: int = 1) -> dict:
    """Closed-form flat-cell law versus simulation, one entry per lambda."""
    rows = []
    for lam in lams:
        law = CellLaw(lam)
        Z, N = flat_cell_draws(lam, n_cells, seed, threads=threads)
        th = zminus_moments(law)
        ratio = ratio_samples(Z, N)
        R = Z.size
        row = {
            "lambda": lam, "cells": R,
            "mean": {"closed_form": th.mean, "mc": float(Z.mean()),
                     "se": float(Z.std(ddof=1) / math.sqrt(R))},
            "variance": {"closed_form": th.variance, "mc": float(Z.var(ddof=1)),
                         "se": float(np.std((Z - Z.mean()) ** 2, ddof=1) / math.sqrt(R))},
            "ratio_mean": {"closed_form": th.ratio_mean, "mc": float(ratio.mean()),
                           "se": float(ratio.std(ddof=1) / math.sqrt(R))},
            "ks": ks_statistic(Z, lambda t: zminus_cdf(law, t),
                               lambda t: zminus_cdf_left(law, t), atoms=(0.0,)),
            "ratio_moments": [],
        }
        for ell in (1, 2, 3):
            vals = ratio**ell
            row["ratio_moments"].append({
                "ell": ell, "mc": float(vals.mean()),
                "se": float(vals.std(ddof=1) / math.sqrt(R)), "bound": math.factorial(ell)})
        for key in ("mean", "variance", "ratio_mean"):
            row[key]["delta"] = row[key]["mc"] - row[key]["closed_form"]
        rows.append(row)
    return {"kind": "oracle-validate", "seed": seed, "rows": rows}
