"""Command-line entry point: ``opcalc simulate|infer|compare|verify``.

Exit codes: 0 success, 1 usage or configuration error, 2 inference did not
converge, 3 verification failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import sys
import tempfile
import time
from pathlib import Path

import numpy as np

from .config import ConfigError, ModelConfig, load_config
from .field import Field
from .selfcal import make_mock_data, minimize_gibbs, posterior_response_mean, uncertainty_band
from .svg import Plot

EXIT_OK, EXIT_USAGE, EXIT_NOT_CONVERGED, EXIT_VERIFY = 0, 1, 2, 3

DATASET_COLUMNS = ["pixel_index", "x", "data", "truth_a", "truth_signal_response"]
RECON_COLUMNS = ["pixel_index", "x", "m_a", "band", "posterior_response_mean", "data"]
COMPARE_COLUMNS = ["seed", "truth", "gibbs", "gibbs_sigma", "map", "map_sigma", "gibbs_z", "map_z"]

log = logging.getLogger("opcalc")


class UsageError(Exception):
    pass


def _fmt(value) -> str:
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return repr(float(value))


def write_atomic(path: Path, text: str):
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def csv_text(columns, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def json_text(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=False, allow_nan=True) + "\n"


def read_dataset(path: Path, config: ModelConfig) -> dict:
    path = Path(path)
    try:
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header != DATASET_COLUMNS:
                raise UsageError(f"{path}: expected header {','.join(DATASET_COLUMNS)}, got {header}")
            rows = []
            for lineno, row in enumerate(reader, start=2):
                if len(row) != len(DATASET_COLUMNS):
                    raise UsageError(f"{path}: line {lineno}: expected {len(DATASET_COLUMNS)} fields, got {len(row)}")
                try:
                    rows.append([float(v) for v in row])
                except ValueError as exc:
                    raise UsageError(f"{path}: line {lineno}: {exc}") from None
    except OSError as exc:
        raise UsageError(f"cannot read dataset: {exc}") from None
    table = np.array(rows).reshape(-1, len(DATASET_COLUMNS))
    if table.shape[0] != config.grid.n_pixels:
        raise UsageError(f"{path}: {table.shape[0]} rows but the configuration has {config.grid.n_pixels} pixels")
    if not np.array_equal(table[:, 0], np.arange(config.grid.n_pixels)):
        raise UsageError(f"{path}: pixel_index column must run 0..n_pixels-1")
    return {name: table[:, k] for k, name in enumerate(DATASET_COLUMNS)}


def _out_dir(path) -> Path:
    out = Path(path)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise UsageError(f"cannot create output directory {out}: {exc}") from None
    return out


def cmd_simulate(config_path, seed, out_dir) -> int:
    config = load_config(config_path)
    seed = config.seed if seed is None else seed
    out = _out_dir(out_dir)
    data = make_mock_data(config, seed)
    x = config.grid.coordinates
    rows = zip(range(config.grid.n_pixels), x, data.d.values, data.truth_a.values, data.signal_response.values)
    write_atomic(out / "dataset.csv", csv_text(DATASET_COLUMNS, rows))
    truth = {"truth_r": data.truth_r, "truth_response": data.truth_response, "seed": seed}
    write_atomic(out / "truth.json", json_text(truth))
    log.info("wrote %s and %s", out / "dataset.csv", out / "truth.json")
    return EXIT_OK


def _figures(out: Path, x, data, result, config, truth_a=None, truth_response_field=None):
    state = result.state
    fig1 = Plot("Signal response", ylabel="(r + r0) exp(a)")
    if truth_response_field is not None:
        fig1.line(x, truth_response_field, color="black", label="true signal response")
    fig1.line(x, posterior_response_mean(state, config).values, color="#d62728", dash="6,4", label="posterior mean")
    fig1.points(x, data, label="data")
    write_atomic(out / "fig1.svg", fig1.render())

    band = uncertainty_band(state).values
    m_a = state.m_a.values
    fig2 = Plot("Signal reconstruction", ylabel="a")
    fig2.band(x, m_a - band, m_a + band, label="m_a +/- sqrt(diag D_aa)")
    if truth_a is not None:
        fig2.line(x, truth_a, color="black", label="true a")
    fig2.line(x, m_a, color="#1f77b4", dash="6,4", label="m_a")
    write_atomic(out / "fig2.svg", fig2.render())


def run_summary(config, result, truth_response, wall_time) -> dict:
    return {
        "config": config.to_dict(),
        "truth_response": truth_response,
        "gibbs_response": result.response(config),
        "gibbs_sigma": result.gibbs_sigma_r,
        "map_response": result.map_response(config),
        "map_sigma": result.map_sigma_r,
        "iterations": result.iterations,
        "converged": result.converged,
        "final_grad_norm": result.final_grad_norm,
        "wall_time": wall_time,
    }


def cmd_infer(config_path, dataset_path, out_dir, plots=True) -> int:
    config = load_config(config_path)
    table = read_dataset(dataset_path, config)
    out = _out_dir(out_dir)
    truth_response = None
    truth_file = Path(dataset_path).with_name("truth.json")
    if truth_file.exists():
        try:
            truth_response = float(json.loads(truth_file.read_text())["truth_response"])
        except (ValueError, KeyError, TypeError) as exc:
            raise UsageError(f"{truth_file}: {exc}") from None

    t0 = time.perf_counter()
    d = Field(config.grid, table["data"])
    result = minimize_gibbs(d, config)
    wall = time.perf_counter() - t0

    state = result.state
    rows = zip(
        range(config.grid.n_pixels),
        table["x"],
        state.m_a.values,
        uncertainty_band(state).values,
        posterior_response_mean(state, config).values,
        table["data"],
    )
    write_atomic(out / "reconstruction.csv", csv_text(RECON_COLUMNS, rows))
    write_atomic(out / "summary.json", json_text(run_summary(config, result, truth_response, wall)))
    if plots:
        _figures(out, table["x"], table["data"], result, config, table["truth_a"], table["truth_signal_response"])
    log.info(
        "response %.4f +/- %.4f (MAP %.4f +/- %.4f), %d iterations, converged=%s",
        result.response(config),
        result.gibbs_sigma_r,
        result.map_response(config),
        result.map_sigma_r,
        result.iterations,
        result.converged,
    )
    return EXIT_OK if result.converged else EXIT_NOT_CONVERGED


def compare_rows(config: ModelConfig, n_seeds: int):
    rows, failures = [], {}
    for seed in range(1, n_seeds + 1):
        try:
            data = make_mock_data(config, seed)
            res = minimize_gibbs(data.d, config)
            truth = data.truth_response
            gibbs, gsig = res.response(config), res.gibbs_sigma_r
            mp, msig = res.map_response(config), res.map_sigma_r
            if not res.converged:
                failures[seed] = "Gibbs minimization did not converge"
            elif not res.map_converged:
                failures[seed] = "MAP minimization did not converge"
            rows.append([seed, truth, gibbs, gsig, mp, msig, (gibbs - truth) / gsig, (mp - truth) / msig])
        except Exception as exc:  # noqa: BLE001
            log.error("seed %d failed: %s", seed, exc)
            failures[seed] = repr(exc)
            rows.append([seed] + [float("nan")] * (len(COMPARE_COLUMNS) - 1))
    return rows, failures


def compare_stats(rows) -> dict:
    table = np.array([r[1:] for r in rows], dtype=float).reshape(-1, len(COMPARE_COLUMNS) - 1)
    ok = np.all(np.isfinite(table), axis=1)
    stats = {"n_seeds": len(rows), "n_ok": int(ok.sum())}
    for name, col in (("gibbs", 5), ("map", 6)):
        z = np.abs(table[ok, col])
        stats[name] = {
            "mean_abs_z": float(z.mean()) if z.size else float("nan"),
            "coverage_1sigma": float((z <= 1).mean()) if z.size else float("nan"),
            "coverage_2sigma": float((z <= 2).mean()) if z.size else float("nan"),
            "coverage_3sigma": float((z <= 3).mean()) if z.size else float("nan"),
        }
    return stats


def cmd_compare(config_path, n_seeds, out_dir) -> int:
    if n_seeds < 1:
        raise UsageError("--n-seeds must be >= 1")
    config = load_config(config_path)
    out = _out_dir(out_dir)
    rows, failures = compare_rows(config, n_seeds)
    write_atomic(out / "compare.csv", csv_text(COMPARE_COLUMNS, rows))
    stats = compare_stats(rows)
    stats["failures"] = {str(k): v for k, v in failures.items()}
    write_atomic(out / "compare_summary.json", json_text(stats))
    log.info(
        "Gibbs mean|z|=%.2f (3 sigma coverage %.2f), MAP mean|z|=%.2f (3 sigma coverage %.2f)",
        stats["gibbs"]["mean_abs_z"],
        stats["gibbs"]["coverage_3sigma"],
        stats["map"]["mean_abs_z"],
        stats["map"]["coverage_3sigma"],
    )
    return EXIT_OK if not failures else EXIT_NOT_CONVERGED


def cmd_verify(level="fast", fault=None) -> int:
    from .verify import run_suite

    t0 = time.perf_counter()
    results = run_suite(level, fault=fault, report=lambda line: print(line, flush=True))
    failed = [r for r in results if not r.passed]
    print(f"{len(results) - len(failed)}/{len(results)} checks passed in {time.perf_counter() - t0:.1f}s")
    return EXIT_OK if not failed else EXIT_VERIFY


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="opcalc", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="draw mock data from the prior")
    p.add_argument("--config", metavar="PATH")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", metavar="DIR", required=True)

    p = sub.add_parser("infer", help="run the Gibbs reconstruction on a dataset")
    p.add_argument("--config", metavar="PATH")
    p.add_argument("--data", metavar="PATH", required=True, help="dataset.csv written by simulate")
    p.add_argument("--out", metavar="DIR", required=True)
    p.add_argument("--no-plots", action="store_true")

    p = sub.add_parser("compare", help="Gibbs vs MAP over many mock datasets")
    p.add_argument("--config", metavar="PATH")
    p.add_argument("--n-seeds", type=int, default=20)
    p.add_argument("--out", metavar="DIR", required=True)

    p = sub.add_parser("verify", help="run the oracle self-checks")
    p.add_argument("--level", choices=["fast", "full"], default="fast")
    p.add_argument("--inject-fault", choices=["gradient"], help=argparse.SUPPRESS)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO, format="%(levelname)s %(message)s")
    try:
        if args.command == "simulate":
            return cmd_simulate(args.config, args.seed, args.out)
        if args.command == "infer":
            return cmd_infer(args.config, args.data, args.out, plots=not args.no_plots)
        if args.command == "compare":
            return cmd_compare(args.config, args.n_seeds, args.out)
        return cmd_verify(args.level, args.inject_fault)
    except (ConfigError, UsageError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
