"""Command-line front door.

Subcommands: ``simulate``, ``fit``, ``bootstrap``, ``mallows``,
``validate``.  All stdout is machine-readable JSON; human diagnostics go to
stderr.  Exit codes: 0 on success, 1 when a validation verdict fails, 2 on
usage or configuration errors.

The only randomness source is the configured seed; no subcommand reads
environment entropy, so identical invocations produce byte-identical
outputs.  Every run writes a manifest (before computation starts) listing
the resolved configuration and the output paths; JSON outputs point back at
it.  Wall-clock timing lives only in the manifest, never in reports, which
keeps reports byte-stable.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .bootstrap import BootstrapConfig, UnstableOperatorError, bootstrap_statistics
from .estimation import TruncationError, fit, parse_k_rule
from .fileio import (
    dump_json,
    fit_from_dict,
    fit_to_dict,
    load_toml,
    model_from_dict,
    read_cloud_csv,
    read_sample_csv,
    write_sample_csv,
)
from .harness import (
    EXPERIMENTS,
    McConfig,
    default_config,
    rate_condition_table,
    run_experiment,
)
from .mallows import optimal_matching
from .process import ExponentialSpectrum, PolynomialSpectrum, simulate

USAGE_ERROR = 2
VERDICT_ERROR = 1


@dataclass
class RunManifest:
    """Provenance record written before computation starts."""

    subcommand: str
    argv: list[str]
    config_path: str | None
    resolved_seed: int | None
    outputs: list[str] = field(default_factory=list)
    version: str = __version__
    started_at: str = ""
    wall_clock_s: float | None = None

    def to_dict(self) -> dict:
        return {
            "subcommand": self.subcommand,
            "argv": self.argv,
            "config_path": self.config_path,
            "resolved_seed": self.resolved_seed,
            "outputs": self.outputs,
            "version": self.version,
            "started_at": self.started_at,
            "wall_clock_s": self.wall_clock_s,
        }


def _start_manifest(args, subcommand: str, outputs: list[str], seed: int | None) -> tuple[RunManifest, Path | None, float]:
    manifest = RunManifest(
        subcommand=subcommand,
        argv=sys.argv[1:],
        config_path=getattr(args, "config", None),
        resolved_seed=seed,
        outputs=[str(o) for o in outputs if o],
        started_at=datetime.now(timezone.utc).isoformat(),
    )
    path = None
    if getattr(args, "manifest", None):
        path = Path(args.manifest)
    elif getattr(args, "out_dir", None):
        path = Path(args.out_dir) / "manifest.json"
    else:
        primary = next((o for o in outputs if o), None)
        if primary is not None:
            p = Path(primary)
            path = p.with_name(p.stem + ".manifest.json")
    if path is not None:
        path.parent.mkdir(parents=True, exist_ok=True)
        dump_json(manifest.to_dict(), path)
    return manifest, path, time.perf_counter()

def _finish_manifest(manifest: RunManifest, path: Path | None, t0: float) -> None:
    manifest.wall_clock_s = time.perf_counter() - t0
    if path is not None:
        dump_json(manifest.to_dict(), path)


def _emit(payload: dict) -> None:
    sys.stdout.write(dump_json(payload))


def _load_model(args):
    cfg = load_toml(args.config) if args.config else {}
    if "model" not in cfg:
        raise ValueError("config file must contain a [model] section")
    return model_from_dict(cfg["model"]), cfg


def cmd_simulate(args) -> int:
    (model, burn_in), _ = _load_model(args)
    if args.burn_in is not None:
        burn_in = args.burn_in
    manifest, mpath, t0 = _start_manifest(args, "simulate", [args.out], args.seed)
    sample = simulate(model, args.n, burn_in=burn_in, seed=args.seed)
    write_sample_csv(sample, args.out)
    _finish_manifest(manifest, mpath, t0)
    _emit(
        {
            "subcommand": "simulate",
            "n": sample.n,
            "dim": sample.dim,
            "seed": args.seed,
            "burn_in": burn_in,
            "out": str(args.out),
            "manifest": mpath.name if mpath else None,
        }
    )
    return 0


def cmd_fit(args) -> int:
    rule = parse_k_rule(args.k_rule)
    sample = read_sample_csv(args.infile)
    outputs = [args.out, args.residuals_csv]
    manifest, mpath, t0 = _start_manifest(args, "fit", outputs, None)
    result = fit(sample, rule)
    payload = fit_to_dict(result, k_rule=rule)
    payload["manifest"] = mpath.name if mpath else None
    dump_json(payload, args.out)
    if args.residuals_csv:
        _write_residuals_csv(result, args.residuals_csv)
    _finish_manifest(manifest, mpath, t0)
    _emit(
        {
            "subcommand": "fit",
            "k": result.k,
            "n": result.n,
            "dim": result.dim,
            "diagnostics": payload["diagnostics"],
            "out": str(args.out),
            "manifest": mpath.name if mpath else None,
        }
    )
    return 0


def _write_residuals_csv(result, path) -> None:
    import csv as _csv

    with open(path, "w", newline="") as fh:
        writer = _csv.writer(fh)
        d = result.dim
        writer.writerow(["j"] + [f"raw_c{i + 1}" for i in range(d)] + [f"centered_c{i + 1}" for i in range(d)])
        for j in range(result.n):
            writer.writerow(
                [j + 1]
                + ["%.17g" % v for v in result.raw_residuals[j]]
                + ["%.17g" % v for v in result.centered_residuals[j]]
            )


def cmd_bootstrap(args) -> int:
    fit_doc = json.loads(Path(args.fit).read_text())
    f = fit_from_dict(fit_doc)
    cfg = BootstrapConfig(B=args.B, x0_policy=args.x0_policy, seed=args.seed)
    outputs = [args.out_json, args.out_csv]
    manifest, mpath, t0 = _start_manifest(args, "bootstrap", outputs, args.seed)
    stats = bootstrap_statistics(f, cfg)

    qs = [5.0, 25.0, 50.0, 75.0, 95.0]
    gam_norms = np.linalg.norm(stats.centered_gammas.reshape(cfg.B, -1), axis=1)
    c_norms = np.linalg.norm(stats.centered_cs.reshape(cfg.B, -1), axis=1)
    mean_norms = np.linalg.norm(stats.means, axis=1)
    payload = {
        "subcommand": "bootstrap",
        "B": cfg.B,
        "x0_policy": cfg.x0_policy,
        "seed": cfg.seed,
        "mean_of_means": [float(v) for v in stats.means.mean(axis=0)],
        "mean_gamma": [[float(v) for v in row] for row in stats.gammas.mean(axis=0)],
        "mean_c": [[float(v) for v in row] for row in stats.cs.mean(axis=0)],
        "covariance_of_means": [
            [float(v) for v in row] for row in np.cov(stats.means, rowvar=False, ddof=1)
        ],
        "norm_quantiles": {
            "levels": qs,
            "mean": [float(v) for v in np.percentile(mean_norms, qs)],
            "centered_gamma": [float(v) for v in np.percentile(gam_norms, qs)],
            "centered_c": [float(v) for v in np.percentile(c_norms, qs)],
        },
        "out_csv": str(args.out_csv) if args.out_csv else None,
        "manifest": mpath.name if mpath else None,
    }
    if args.out_json:
        dump_json(payload, args.out_json)
    if args.out_csv:
        _write_bootstrap_csv(stats, args.out_csv)
    _finish_manifest(manifest, mpath, t0)
    _emit(payload)
    return 0


def _write_bootstrap_csv(stats, path) -> None:
    import csv as _csv

    d = stats.means.shape[1]
    with open(path, "w", newline="") as fh:
        writer = _csv.writer(fh)
        header = (
            ["b"]
            + [f"mean_c{j + 1}" for j in range(d)]
            + [f"gamma_{i + 1}{j + 1}" for i in range(d) for j in range(d)]
            + [f"c_{i + 1}{j + 1}" for i in range(d) for j in range(d)]
        )
        writer.writerow(header)
        for b in range(stats.B):
            row = (
                [b]
                + ["%.17g" % v for v in stats.means[b]]
                + ["%.17g" % v for v in stats.gammas[b].ravel()]
                + ["%.17g" % v for v in stats.cs[b].ravel()]
            )
            writer.writerow(row)


def cmd_mallows(args) -> int:
    xs = read_cloud_csv(args.xs)
    ys = read_cloud_csv(args.ys)
    if args.operator_dim:
        d = args.operator_dim
        if xs.shape[1] != d * d or ys.shape[1] != d * d:
            raise ValueError(f"operator clouds need {d * d} columns for dimension {d}")
    manifest, mpath, t0 = _start_manifest(args, "mallows", [], None)
    distance, matching = optimal_matching(xs, ys)
    _finish_manifest(manifest, mpath, t0)
    _emit(
        {
            "subcommand": "mallows",
            "distance": distance,
            "matching": [int(j) for j in matching],
            "size": int(xs.shape[0]),
            "dim": int(xs.shape[1]),
            "manifest": mpath.name if mpath else None,
        }
    )
    return 0


def _mc_config_from_file(args) -> McConfig:
    doc = load_toml(args.config) if args.config else {}
    mc = doc.get("mc", {})
    master_seed = args.seed if args.seed is not None else int(mc.get("master_seed", 0))
    if "model" in doc:
        model, burn_in = model_from_dict(doc["model"])
        rule = parse_k_rule(doc.get("fit", {}).get("k_rule", "log:0.75:0.005"))
        return McConfig(
            model=model,
            n_grid=tuple(int(n) for n in mc.get("n_grid", (100, 200, 400, 800))),
            r_reps=int(mc.get("R", 100)),
            b_reps=int(mc.get("B", mc.get("R", 100))),
            k_rule=rule,
            master_seed=master_seed,
            burn_in=int(mc.get("burn_in", burn_in)),
            x0_policy=str(doc.get("bootstrap", {}).get("x0_policy", "zero")),
        )
    cfg = default_config(args.experiment)
    if args.seed is not None:
        cfg = default_config(args.experiment, master_seed=args.seed)
    return cfg


def cmd_validate(args) -> int:
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    report_path = out_dir / "report.json"
    raw_path = out_dir / "raw_values.csv"
    long_path = out_dir / "long_values.csv"

    if args.experiment == "rates":
        doc = load_toml(args.config) if args.config else {}
        rates = doc.get("rates", {})
        kind = rates.get("spectrum", "exponential")
        if kind == "exponential":
            spectrum = ExponentialSpectrum(
                c=float(rates.get("c", 1.0)), rho=float(rates.get("rho", 0.5))
            )
        else:
            spectrum = PolynomialSpectrum(
                c=float(rates.get("c", 1.0)), a=float(rates.get("a", 2.0))
            )
        rule = parse_k_rule(rates.get("k_rule", "log:0.5:0.05"))
        n_grid = tuple(int(n) for n in rates.get("n_grid", (10**3, 10**4, 10**5, 10**6)))
        manifest, mpath, t0 = _start_manifest(
            args, "validate", [str(report_path), str(raw_path)], None
        )
        table = rate_condition_table(spectrum, n_grid, rule)
        payload = {
            "experiment": "rates",
            "spectrum": repr(spectrum),
            "k_rule": rates.get("k_rule", "log:0.5:0.05"),
            "table": table.to_dict(),
            "manifest": mpath.name if mpath else None,
        }
        dump_json(payload, report_path)
        _write_rate_csv(table, raw_path)
        _finish_manifest(manifest, mpath, t0)
        _emit(payload)
        ok = table.gap_load_decreasing and table.inv_ratio_bounded
        return 0 if ok else VERDICT_ERROR

    cfg = _mc_config_from_file(args)
    manifest, mpath, t0 = _start_manifest(
        args, "validate", [str(report_path), str(raw_path), str(long_path)], cfg.master_seed
    )
    report = run_experiment(args.experiment, cfg)
    payload = report.to_dict()
    payload["manifest"] = mpath.name if mpath else None
    dump_json(payload, report_path)
    _write_report_csvs(report, raw_path, long_path)
    _finish_manifest(manifest, mpath, t0)
    _emit(payload)
    print(f"experiment {report.experiment}: verdict {report.verdict}", file=sys.stderr)
    return 0 if report.verdict == "pass" else VERDICT_ERROR


def _write_rate_csv(table, path) -> None:
    import csv as _csv

    with open(path, "w", newline="") as fh:
        writer = _csv.writer(fh)
        writer.writerow(["n", "k", "gap_load", "lam_k", "inv_lam_ratio", "inv_load", "inv_load_ratio"])
        for r in table.rows:
            writer.writerow(
                [r.n, r.k]
                + ["%.17g" % v for v in (r.gap_load, r.lam_k, r.inv_lam_ratio, r.inv_load, r.inv_load_ratio)]
            )


def _write_report_csvs(report, raw_path, long_path) -> None:
    import csv as _csv

    with open(raw_path, "w", newline="") as fh:
        writer = _csv.writer(fh)
        writer.writerow(["experiment", "n", "replication", "value", "floor_value"])
        for cell in report.cells:
            for r, (v, fv) in enumerate(zip(cell.values, cell.floor_values)):
                writer.writerow([report.experiment, cell.n, r, "%.17g" % v, "%.17g" % fv])
    with open(long_path, "w", newline="") as fh:
        writer = _csv.writer(fh)
        writer.writerow(["experiment", "n", "replication", "value"])
        for cell in report.cells:
            for r, v in enumerate(cell.values):
                writer.writerow([report.experiment, cell.n, r, "%.17g" % v])


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="farboot",
        description="Functional autoregression: simulation, estimation, residual bootstrap, "
        "Mallows-metric validation experiments.",
    )
    parser.add_argument("--threads", type=int, default=1, help="worker concurrency cap (recorded; execution is deterministic regardless)")
    sub = parser.add_subparsers(dest="subcommand")

    p = sub.add_parser("simulate", help="simulate a path and write it as CSV")
    p.add_argument("--config", required=True, help="TOML file with a [model] section")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--burn-in", type=int, default=None, dest="burn_in")
    p.add_argument("--out", required=True)
    p.add_argument("--manifest", default=None)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("fit", help="fit the autoregression to a CSV sample")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--k-rule", dest="k_rule", default="log:0.75:0.005")
    p.add_argument("--out", required=True)
    p.add_argument("--residuals-csv", dest="residuals_csv", default=None)
    p.add_argument("--manifest", default=None)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("bootstrap", help="resample a fitted model")
    p.add_argument("--fit", required=True, help="fit JSON produced by the fit subcommand")
    p.add_argument("--B", type=int, default=1000)
    p.add_argument("--x0-policy", dest="x0_policy", choices=("zero", "copy_x0"), default="zero")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-json", dest="out_json", default=None)
    p.add_argument("--out-csv", dest="out_csv", default=None)
    p.add_argument("--manifest", default=None)
    p.set_defaults(func=cmd_bootstrap)

    p = sub.add_parser("mallows", help="exact distance between two CSV point clouds")
    p.add_argument("--xs", required=True)
    p.add_argument("--ys", required=True)
    p.add_argument("--operator-dim", dest="operator_dim", type=int, default=None)
    p.add_argument("--manifest", default=None)
    p.set_defaults(func=cmd_mallows)

    p = sub.add_parser("validate", help="run a seeded validation experiment")
    p.add_argument("--experiment", required=True, choices=EXPERIMENTS)
    p.add_argument("--config", default=None)
    p.add_argument("--seed", type=int, default=None, help="override the master seed")
    p.add_argument("--out-dir", dest="out_dir", required=True)
    p.set_defaults(func=cmd_validate)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return USAGE_ERROR if exc.code not in (0, None) else 0
    if not getattr(args, "subcommand", None):
        parser.print_usage(sys.stderr)
        return USAGE_ERROR
    try:
        return args.func(args)
    except (ValueError, TruncationError, UnstableOperatorError, FileNotFoundError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE_ERROR


if __name__ == "__main__":
    sys.exit(main())
