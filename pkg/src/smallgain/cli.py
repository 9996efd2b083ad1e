"""Scenario-driven batch runner.

Verbs: run (one scenario: CSV trajectory + JSON report), gains-check
(cyclic small-gain verdict for a configured map), sweep (one run per
swept value + summary table), plot (SVGs from a trajectory CSV).

Exit codes: 0 pass, 1 check failure, 2 validation error, 3 runtime
divergence.
"""

from __future__ import annotations

import concurrent.futures
import copy
import json
import sys
from pathlib import Path

import click
import numpy as np

from . import __version__
from .config import (
    ConfigError,
    ScenarioConfig,
    load_config,
    map_from_spec,
    parse_config,
    set_by_path,
)
from .gains import check_cyclic_small_gain, iterate_gamma
from .plots import plot_trajectory_csv
from .scenarios import run_config
from .sim.integrators import ConstraintExitError, DivergenceError
from .sim.trajectory import CsvFormatError, write_csv

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_VALIDATION = 2
EXIT_DIVERGENCE = 3


def _write_report(report: dict, path: Path) -> None:
    path.write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")


def _load(config_path: str, seed, out) -> ScenarioConfig:
    cfg = load_config(config_path)
    if seed is not None:
        cfg.doc["seed"] = int(seed)
    if out is not None:
        cfg.doc.setdefault("output", {})
        cfg.doc["output"]["dir"] = str(out)
    return cfg


def _out_dir(cfg: ScenarioConfig, out) -> Path:
    if out is not None:
        return Path(out)
    configured = cfg.doc.get("output", {}).get("dir")
    return Path(configured) if configured else Path("out")


@click.group()
@click.version_option(version=__version__)
def main():
    """Simulate the closed-loop systems and verify their trajectory
    estimates."""


@main.command("run")
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
@click.option("--out", type=click.Path(), default=None, help="output directory")
@click.option("--seed", type=int, default=None, help="override the config seed")
def cmd_run(config_path, out, seed):
    """Run one scenario; write trajectory.csv and report.json."""
    try:
        cfg = _load(config_path, seed, out)
    except ConfigError as exc:
        for e in exc.errors:
            click.echo(f"config error: {e}", err=True)
        sys.exit(EXIT_VALIDATION)
    out_dir = _out_dir(cfg, out)
    out_dir.mkdir(parents=True, exist_ok=True)
    try:
        traj, rows, report = run_config(cfg)
    except (DivergenceError, ConstraintExitError) as exc:
        click.echo(f"runtime failure: {exc}", err=True)
        sys.exit(EXIT_DIVERGENCE)
    write_csv(traj, out_dir / "trajectory.csv")
    _write_report(report, out_dir / "report.json")
    failed = [r for r in rows if not r["ok"]]
    for r in rows:
        verdict = "ok" if r["ok"] else "FAIL"
        click.echo(
            f"[{verdict}] {r['name']} (expect {r['expect']}): "
            f"worst residual {r['worst_residual']:.3e} at t={r['worst_time']:.4g}"
        )
    click.echo(f"report: {out_dir / 'report.json'}")
    sys.exit(EXIT_CHECK_FAILED if failed else EXIT_OK)


@main.command("gains-check")
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
@click.option("--out", type=click.Path(), default=None)
def cmd_gains_check(config_path, out):
    """Cyclic small-gain verdict plus iteration traces for a gain map."""
    try:
        doc = json.loads(Path(config_path).read_text())
    except json.JSONDecodeError as exc:
        click.echo(f"config error: not valid JSON: {exc}", err=True)
        sys.exit(EXIT_VALIDATION)
    spec = doc.get("gains_check")
    if not isinstance(spec, dict) or "map" not in spec:
        click.echo("config error: gains-check needs a gains_check.map block", err=True)
        sys.exit(EXIT_VALIDATION)
    try:
        gmap = map_from_spec(spec["map"])
    except ValueError as exc:
        click.echo(f"config error: {exc}", err=True)
        sys.exit(EXIT_VALIDATION)
    gspec = spec.get("grid", {})
    grid = np.geomspace(
        float(gspec.get("min", 1e-6)),
        float(gspec.get("max", 1e6)),
        int(gspec.get("points", 60)),
    )
    report = check_cyclic_small_gain(gmap, grid)
    iterates = []
    it_spec = spec.get("iterate", {})
    for start in it_spec.get("starts", []):
        seq, converged = iterate_gamma(
            gmap,
            np.asarray(start, dtype=float),
            int(it_spec.get("k_max", 200)),
            float(it_spec.get("tol", 1e-9)),
        )
        iterates.append(
            {"start": list(map(float, start)), "converged": bool(converged),
             "iterations": int(len(seq) - 1),
             "final_max": float(np.max(np.abs(seq[-1])))}
        )
    out_doc = {
        "version": __version__,
        "satisfied": bool(report.satisfied),
        "violated_cycle": list(report.violated_cycle) if report.violated_cycle else None,
        "witness_s": report.witness_s,
        "margin": report.margin if np.isfinite(report.margin) else None,
        "method": report.method,
        "iterates": iterates,
    }
    if out is not None:
        out_dir = Path(out)
        out_dir.mkdir(parents=True, exist_ok=True)
        _write_report(out_doc, out_dir / "gains_report.json")
    click.echo(json.dumps(out_doc, indent=2, sort_keys=True))
    bad_iter = any(not it["converged"] for it in iterates)
    sys.exit(EXIT_OK if report.satisfied and not bad_iter else EXIT_CHECK_FAILED)


def _sweep_one(args):
    doc, idx = args
    try:
        cfg = parse_config(doc)
        _, rows, report = run_config(cfg)
        return idx, None, rows, report
    except (DivergenceError, ConstraintExitError) as exc:
        return idx, str(exc), None, None


@main.command("sweep")
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
@click.option("--param", "param_path", required=True, help="dotted path, e.g. params.r")
@click.option("--values", required=True, help="JSON list of values")
@click.option("--out", type=click.Path(), default="out_sweep")
@click.option("--seed", type=int, default=None)
@click.option("--workers", type=int, default=1, help="parallel worker processes")
def cmd_sweep(config_path, param_path, values, out, seed, workers):
    """Run the scenario once per swept value; write per-value reports
    and a summary CSV with deterministic row order."""
    try:
        base = _load(config_path, seed, None)
        value_list = json.loads(values)
        if not isinstance(value_list, list) or not value_list:
            raise ConfigError(["--values must be a nonempty JSON list"])
    except ConfigError as exc:
        for e in exc.errors:
            click.echo(f"config error: {e}", err=True)
        sys.exit(EXIT_VALIDATION)

    out_root = Path(out)
    out_root.mkdir(parents=True, exist_ok=True)
    jobs = []
    rows_by_idx = {}
    errors_by_idx = {}
    for idx, value in enumerate(value_list):
        doc = copy.deepcopy(base.doc)
        try:
            set_by_path(doc, param_path, value)
            parse_config(doc)  # validate eagerly so bad rows are recorded
        except (KeyError, ConfigError) as exc:
            msg = "; ".join(exc.errors) if isinstance(exc, ConfigError) else str(exc)
            errors_by_idx[idx] = ("validation_error", msg)
            continue
        jobs.append((doc, idx))

    def handle(idx, err, rows, report):
        if err is not None:
            errors_by_idx[idx] = ("runtime_error", err)
        else:
            rows_by_idx[idx] = (rows, report)

    if workers > 1 and len(jobs) > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=workers) as pool:
            for result in pool.map(_sweep_one, jobs):
                handle(*result)
    else:
        for job in jobs:
            handle(*_sweep_one(job))

    check_names = [c.get("name") for c in base.doc.get("checks", [])]
    header = ["value", "status", "settled", "settling_time"] + [
        f"res_{n}" for n in check_names
    ]
    lines = [",".join(header)]
    any_fail = False
    any_validation = False
    for idx, value in enumerate(value_list):
        if idx in errors_by_idx:
            status, msg = errors_by_idx[idx]
            any_validation = any_validation or status == "validation_error"
            any_fail = any_fail or status == "runtime_error"
            lines.append(
                ",".join([json.dumps(value), status, "", ""] + [""] * len(check_names))
            )
            (out_root / f"row_{idx}").mkdir(exist_ok=True)
            (out_root / f"row_{idx}" / "error.txt").write_text(msg + "\n")
            continue
        rows, report = rows_by_idx[idx]
        _write_report(report, _ensure_dir(out_root / f"row_{idx}") / "report.json")
        ok = all(r["ok"] for r in rows)
        settled = report["settling_time"] is not None
        if not ok:
            any_fail = True
        res = {r["name"]: r["worst_residual"] for r in rows}
        lines.append(
            ",".join(
                [json.dumps(value), "ok" if ok else "check_failed",
                 str(settled).lower(),
                 "" if report["settling_time"] is None else repr(report["settling_time"])]
                + [repr(res[n]) if n in res else "" for n in check_names]
            )
        )
    (out_root / "summary.csv").write_text("\n".join(lines) + "\n")
    click.echo("\n".join(lines))
    if any_fail:
        sys.exit(EXIT_CHECK_FAILED)
    if any_validation:
        sys.exit(EXIT_VALIDATION)
    sys.exit(EXIT_OK)


def _ensure_dir(p: Path) -> Path:
    p.mkdir(parents=True, exist_ok=True)
    return p


@main.command("plot")
@click.argument("csv_path", type=click.Path(exists=True))
@click.option("--out", type=click.Path(), default="plots")
def cmd_plot(csv_path, out):
    """Render SVG plots from a trajectory CSV."""
    try:
        written = plot_trajectory_csv(csv_path, out)
    except CsvFormatError as exc:
        click.echo(f"csv error: {exc}", err=True)
        sys.exit(EXIT_VALIDATION)
    for w in written:
        click.echo(w)
    sys.exit(EXIT_OK)


if __name__ == "__main__":
    main()
