"""Command-line entry point: ``poisson-boundary <subcommand> --config run.json``.

Exit status: 0 success, 2 ran but an acceptance threshold failed, 1 error.
"""
from __future__ import annotations

import argparse
import csv
import dataclasses
import hashlib
import json
import logging
import sys
from dataclasses import dataclass, field
from datetime import datetime, timezone
from importlib import resources
from pathlib import Path
from statistics import NormalDist

import jsonschema
import numpy as np

from . import __version__
from .cells import reduce_cells
from .estimate import estimate, write_estimate_csv
from .mc import (ExperimentPlan, McReport, _jsonable, oracle_validate, run_chat_consistency,
                 run_clt, run_coverage, run_rate)
from .model import BoundarySpec, boundary_from_record, integer_root, profile_cells
from .simulate import derive_replicate_seed, read_points_csv, sample_process, write_points_csv
from .theory import check_array
from .weights import (DiagnosticTolerances, Dirichlet, WeightScheme, diagnose, scheme_from_record,
                      weight_matrix)

log = logging.getLogger("poisson_boundary")

KINDS = ("simulate", "estimate", "diagnose", "diagnose-array", "clt", "coverage", "rate",
         "chat-consistency", "oracle-validate")
EXIT_OK, EXIT_ERROR, EXIT_THRESHOLD = 0, 1, 2


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class Tolerances:
    ks_max: float = 0.08
    corr_max: float = 0.1
    coverage_lo: float = 0.91
    coverage_hi: float = 0.98
    slope_target: float | None = None  # None -> -alpha/(alpha+d), or -1/2 for Dirichlet
    slope_tol: float = 0.15
    chat_median_max: float = 0.02
    oracle_se_mult: float = 4.0
    oracle_ks_max: float = 0.01
    min_cell_mean: float = 10.0
    n_delta: float = 0.5
    max_abs_w: float = 0.2
    bias_budget: float = 0.5
    h6: float = 0.5

    def diagnostics(self) -> DiagnosticTolerances:
        return DiagnosticTolerances(min_cell_mean=self.min_cell_mean, n_delta=self.n_delta,
                                    max_abs_w=self.max_abs_w, bias_budget=self.bias_budget,
                                    h6=self.h6)


@dataclass(frozen=True)
class RunConfig:
    kind: str
    boundary: dict = field(default_factory=lambda: {"kind": "sine", "base": 2.0,
                                                    "amplitude": 0.5, "frequency": 1.0})
    scheme: dict = field(default_factory=lambda: {"kind": "parzen", "kernel": "triangular",
                                                  "h": 0.05, "mode": "integrated"})
    n: int = 5000
    n_schedule: tuple | None = None
    k: int | None = 250
    alpha: float | None = None
    c: float = 1.0
    gamma: float = 0.95
    probes: tuple = (0.3, 0.7)
    replicates: int = 500
    seed: int = 12345
    c_mode: str = "known"
    variants: tuple = ("smoothed",)
    points_file: str | None = None
    lambdas: tuple = (2.0, 5.0, 20.0)
    cells: int = 100_000
    max_failure_fraction: float = 0.01
    output_dir: str = "out"
    tolerances: Tolerances = Tolerances()

    # -- derived objects -------------------------------------------------
    def boundary_spec(self) -> BoundarySpec:
        return boundary_from_record(self.boundary)

    def weight_scheme(self) -> WeightScheme:
        return scheme_from_record(self.scheme)

    def schedule(self) -> tuple:
        return tuple(self.n_schedule) if self.n_schedule else (self.n,)

    def plan(self) -> ExperimentPlan:
        return ExperimentPlan(
            spec=self.boundary_spec(), scheme=self.weight_scheme(), probes=self.probes,
            n_schedule=self.schedule(), c=self.c, gamma=self.gamma, replicates=self.replicates,
            seed=self.seed, c_mode=self.c_mode, k=self.k, alpha=self.alpha,
            max_failure_fraction=self.max_failure_fraction)

    def to_dict(self) -> dict:
        out = dataclasses.asdict(self)
        for key in ("probes", "variants", "lambdas"):
            out[key] = list(out[key])
        out["probes"] = [list(p) if isinstance(p, tuple) else p for p in out["probes"]]
        if out["n_schedule"] is not None:
            out["n_schedule"] = list(out["n_schedule"])
        return out

    def digest(self) -> str:
        return hashlib.sha256(canonical_json(self.to_dict()).encode()).hexdigest()


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2) + "\n"


def load_schema() -> dict:
    return json.loads(resources.files(__package__).joinpath("config_schema.json").read_text())


def parse_config(source: str | Path | dict, kind: str | None = None) -> RunConfig:
    """Validate a JSON config (path, JSON text or dict) and fill in every default."""
    if isinstance(source, dict):
        raw = dict(source)
    else:
        text = str(source)
        if not text.lstrip().startswith("{"):
            text = Path(text).read_text()
        try:
            raw = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from exc
    if kind is not None:
        if raw.get("kind", kind) != kind:
            raise ConfigError(f"config kind {raw['kind']!r} does not match subcommand {kind!r}")
        raw["kind"] = kind
    try:
        jsonschema.validate(raw, load_schema())
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"config error at '{where}': {exc.message}") from exc

    kw = dict(raw)
    if "tolerances" in kw:
        kw["tolerances"] = Tolerances(**kw["tolerances"])
    for key in ("probes", "variants", "lambdas", "n_schedule"):
        if kw.get(key) is not None:
            kw[key] = tuple(tuple(v) if isinstance(v, list) else v for v in kw[key])
    cfg = RunConfig(**kw)
    _check_semantics(cfg)
    return cfg


def _check_semantics(cfg: RunConfig) -> None:
    try:
        spec = cfg.boundary_spec()
        scheme = cfg.weight_scheme()
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"config error: {exc}") from exc
    if cfg.k is not None:
        try:
            integer_root(cfg.k, spec.dim)
        except ValueError as exc:
            raise ConfigError(f"config error at 'k': {exc}") from exc
    if isinstance(scheme, Dirichlet) and spec.dim != 1:
        raise ConfigError("config error at 'scheme': the Dirichlet scheme needs a 1-d boundary")
    if cfg.kind in ("simulate", "oracle-validate"):
        return
    if cfg.kind in ("rate", "chat-consistency") and len(cfg.schedule()) < 2:
        raise ConfigError(f"config error at 'n_schedule': {cfg.kind} needs at least two sizes")
    try:
        cfg.plan()
    except ValueError as exc:
        raise ConfigError(f"config error: {exc}") from exc


# ---------------------------------------------------------------------------
# Runners: each returns (report dict, {filename: rows}, passed)


def _csv(path: Path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])


def _fixed_part(cfg: RunConfig, n: int):
    step = cfg.plan().resolve(n)
    return step.part, step.scheme


def _run_simulate(cfg, out, threads, dump_points):
    spec = cfg.boundary_spec()
    samples = [sample_process(spec, cfg.n, cfg.c, derive_replicate_seed(cfg.seed, r), r)
               for r in range(cfg.replicates)]
    totals = [s.total for s in samples]
    if dump_points:
        write_points_csv(out / "points.csv", samples)
    report = {"totals": totals, "mean_total": float(np.mean(totals)),
              "expected_total": cfg.n * cfg.c * spec.integral}
    return report, True


def _run_estimate(cfg, out, threads, dump_points):
    spec = cfg.boundary_spec()
    part, scheme = _fixed_part(cfg, cfg.n)
    if cfg.points_file:
        samples = read_points_csv(cfg.points_file, cfg.n, cfg.c)
    else:
        samples = [sample_process(spec, cfg.n, cfg.c, derive_replicate_seed(cfg.seed, 0), 0)]
        if dump_points:
            write_points_csv(out / "points.csv", samples)
    results, rows = [], []
    for sample in samples:
        stats = reduce_cells(sample, part)
        c = cfg.c if cfg.c_mode == "known" else None
        for variant in cfg.variants:
            res = estimate(stats, scheme, part, cfg.probes, gamma=cfg.gamma, variant=variant, c=c)
            results.append(res)
            rows.append({"replicate": sample.replicate_id, "variant": variant,
                         "a_hat": res.a_hat, "c_used": res.c_used, "total": stats.total,
                         "fhat": res.fhat, "ci_lo": res.ci_lo, "ci_hi": res.ci_hi})
    write_estimate_csv(out / "estimate.csv", results)
    return {"k": part.k, "scheme": scheme.to_record(), "estimates": rows}, True


def _run_diagnose(cfg, out, threads, dump_points):
    spec = cfg.boundary_spec()
    part, scheme = _fixed_part(cfg, cfg.n)
    rep = diagnose(scheme, part, spec, profile_cells(spec, part), cfg.n, cfg.c, cfg.probes,
                   cfg.tolerances.diagnostics())
    return rep.to_dict(), True


def _run_diagnose_array(cfg, out, threads, dump_points):
    spec = cfg.boundary_spec()
    part, scheme = _fixed_part(cfg, cfg.n)
    K = weight_matrix(scheme, part, cfg.probes)
    W = (K / np.sqrt(np.sum(K**2, axis=1, keepdims=True))).T
    samples = None
    if spec.kind == "constant":
        # standardized cell variables zeta_r = xi_r - E xi_r on a flat boundary
        mu = cfg.n * cfg.c * spec.integral / part.k
        samples = np.array([
            reduce_cells(sample_process(spec, cfg.n, cfg.c, derive_replicate_seed(cfg.seed, r), r),
                         part).xi - mu for r in range(cfg.replicates)])
    diag = check_array(W, samples=samples, max_norm_tol=cfg.tolerances.max_abs_w)
    return {"k": part.k, "scheme": scheme.to_record(), **diag.to_dict()}, True


def _clt_passes(rep: McReport, tol: Tolerances) -> bool:
    ok = rep.ks_defined and all(v <= tol.ks_max for v in rep.ks)
    if rep.correlation is not None:
        p = len(rep.correlation)
        off = [abs(rep.correlation[i][j]) for i in range(p) for j in range(p) if i != j]
        ok = ok and all(v <= tol.corr_max for v in off)
    return bool(ok)


def _run_clt(cfg, out, threads, dump_points):
    rep = run_clt(cfg.plan(), threads)
    R, p = rep.z.shape
    _csv(out / "z.csv", ["probe", "replicate", "z"],
         ([j, r, rep.z[r, j]] for j in range(p) for r in range(R)))
    for j in range(p):
        emp = np.sort(rep.z[:, j])
        theo = [NormalDist().inv_cdf((i + 0.5) / R) for i in range(R)]
        _csv(out / f"qq_probe{j}.csv", ["theoretical_q", "empirical_q"], zip(theo, emp))
    return rep.to_dict(), _clt_passes(rep, cfg.tolerances)


def _run_coverage(cfg, out, threads, dump_points):
    rep = run_coverage(cfg.plan(), threads)
    tol = cfg.tolerances
    ok = all(tol.coverage_lo <= v <= tol.coverage_hi for v in rep.coverage)
    return rep.to_dict(), ok


def default_slope_target(plan: ExperimentPlan) -> float:
    if isinstance(plan.scheme, Dirichlet):
        return -0.5
    a, d = plan.smoothness_alpha, plan.spec.dim
    return -a / (a + d)


def _run_rate(cfg, out, threads, dump_points):
    plan = cfg.plan()
    rep = run_rate(plan, threads)
    _csv(out / "rate.csv", ["n", "rmse"], zip(rep.n_values, rep.rmse))
    target = cfg.tolerances.slope_target
    target = default_slope_target(plan) if target is None else target
    rep.extra["slope_target"] = target
    return rep.to_dict(), abs(rep.slope - target) <= cfg.tolerances.slope_tol


def _run_chat(cfg, out, threads, dump_points):
    rep = run_chat_consistency(cfg.plan(), threads)
    _csv(out / "chat.csv", ["n", "replicate", "c_hat"],
         ([n, r, v * cfg.c] for n, ratios in zip(rep.n_values, rep.chat_ratios)
          for r, v in enumerate(ratios)))
    ok = rep.extra["median_strictly_decreasing"] and rep.chat_median[-1] <= \
        cfg.tolerances.chat_median_max
    return rep.to_dict(), ok


def _run_oracle(cfg, out, threads, dump_points):
    rep = oracle_validate(cfg.lambdas, cfg.cells, cfg.seed, threads)
    tol = cfg.tolerances
    ok = True
    for row in rep["rows"]:
        for key in ("mean", "variance", "ratio_mean"):
            ok &= abs(row[key]["delta"]) <= tol.oracle_se_mult * row[key]["se"]
        ok &= row["ks"] <= tol.oracle_ks_max
        for mom in row["ratio_moments"]:
            ok &= mom["mc"] <= mom["bound"] + 3 * mom["se"]
    return rep, bool(ok)


RUNNERS = {
    "simulate": _run_simulate, "estimate": _run_estimate, "diagnose": _run_diagnose,
    "diagnose-array": _run_diagnose_array, "clt": _run_clt, "coverage": _run_coverage,
    "rate": _run_rate, "chat-consistency": _run_chat, "oracle-validate": _run_oracle,
}


def run(cfg: RunConfig, threads: int = 1, dump_points: bool = False) -> int:
    """Execute one configured experiment and write its artifacts to ``cfg.output_dir``."""
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    body, passed = RUNNERS[cfg.kind](cfg, out, threads, dump_points)
    config = {k: v for k, v in cfg.to_dict().items() if k != "output_dir"}
    report = {"kind": cfg.kind, "config": config, "passed": bool(passed),
              "result": _jsonable(body)}
    (out / "report.json").write_text(canonical_json(report))
    manifest = {
        "seed": cfg.seed, "config_sha256": cfg.digest(), "software_version": __version__,
        "numpy_version": np.__version__,
        "timestamp": datetime.now(timezone.utc).isoformat(timespec="seconds"),
        "files": sorted(p.name for p in out.iterdir() if p.name != "manifest.json"),
    }
    (out / "manifest.json").write_text(canonical_json(manifest))
    log.info("%s: %s -> %s", cfg.kind, "passed" if passed else "THRESHOLD FAILED", out)
    return EXIT_OK if passed else EXIT_THRESHOLD


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="poisson-boundary", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for kind in KINDS:
        p = sub.add_parser(kind)
        p.add_argument("--config", required=False, help="JSON run config (path or inline text)")
        p.add_argument("--seed", type=int, help="master seed (overrides the config)")
        p.add_argument("--out", help="output directory (overrides the config)")
        p.add_argument("--threads", type=int, default=1, help="worker threads; never changes results")
        p.add_argument("--dump-points", action="store_true", help="write simulated points to CSV")
    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")
    args = build_parser().parse_args(argv)
    try:
        raw = {}
        if args.config:
            text = args.config
            if not text.lstrip().startswith("{"):
                text = Path(text).read_text()
            raw = json.loads(text)
        if args.seed is not None:
            raw["seed"] = args.seed
        if args.out is not None:
            raw["output_dir"] = args.out
        cfg = parse_config(raw, kind=args.command)
        return run(cfg, threads=max(1, args.threads), dump_points=args.dump_points)
    except (ConfigError, ValueError, OSError, json.JSONDecodeError) as exc:
        log.error("%s", exc)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
