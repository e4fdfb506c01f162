"""Command-line entry point: ``sigapprox {simulate,fit,diagnose,stopped-audit,report}``."""
from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .brownian import brownian_values, extended_increments, map_chunks, simulate_bm
from .config import ConfigError, ExperimentConfig
from .pipeline import run_diagnose, run_fit, run_stopped_audit, target_values
from .regress import FitError
from .sde import NumericalError

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3


def _dump_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _write_csv(path: Path, header, rows) -> None:
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def _num(x) -> str:
    return repr(float(x))


def _manifest(cfg: ExperimentConfig, command: str, files) -> dict:
    return {
        "command": command,
        "version": __version__,
        "config_hash": cfg.config_hash(),
        "seed": cfg.brownian.seed,
        "rng": "philox(key=[seed, path_index])",
        "config": cfg.identity(),
        "files": sorted(files),
    }


def cmd_simulate(cfg: ExperimentConfig, out: Path, threads: int = 1) -> list[str]:
    """PathGrid CSVs (one per path), a target dump and a manifest."""
    bc = cfg.brownian
    paths_dir = out / "paths"
    paths_dir.mkdir(parents=True, exist_ok=True)
    files = []
    width = len(str(bc.n_paths - 1))
    for i in range(bc.n_paths):
        name = f"paths/path_{i:0{width}d}.csv"
        (out / name).write_text(simulate_bm(bc, i).to_csv())
        files.append(name)

    def chunk(idx):
        w = brownian_values(extended_increments(bc, idx)[..., 1:])
        return idx, target_values(cfg.target.spec, bc.times, w)

    rows = []
    for idx, y in map_chunks(chunk, range(bc.n_paths), 1000, threads):
        for pid, series in zip(idx, y):
            rows.extend((pid, _num(t), _num(v)) for t, v in zip(bc.times, series))
    _write_csv(out / "targets.csv", ["path_id", "t", "y_1"], rows)
    files.append("targets.csv")
    _dump_json(out / "manifest.json", _manifest(cfg, "simulate", files))
    return files


def cmd_fit(cfg: ExperimentConfig, out: Path, threads: int = 1) -> list[str]:
    """FitReport + LinearFunctional JSON per level and a summary CSV."""
    out.mkdir(parents=True, exist_ok=True)
    results = run_fit(cfg, threads)
    files, rows = [], []
    for ell, rep in results:
        _dump_json(out / f"report_N{rep.N}.json", rep.to_dict())
        _dump_json(out / f"functional_N{rep.N}.json", ell.to_dict())
        files += [f"report_N{rep.N}.json", f"functional_N{rep.N}.json"]
        rows.append(
            (rep.N, _num(rep.train_error), _num(rep.test_error), _num(rep.train_rel_error), _num(rep.test_rel_error))
        )
    _write_csv(out / "summary.csv", ["N", "train_error", "test_error", "train_rel_error", "test_rel_error"], rows)
    files.append("summary.csv")
    _dump_json(out / "manifest.json", _manifest(cfg, "fit", files))
    return files


def cmd_diagnose(cfg: ExperimentConfig, out: Path, threads: int = 1) -> list[str]:
    out.mkdir(parents=True, exist_ok=True)
    _dump_json(out / "diagnostics.json", run_diagnose(cfg, threads))
    _dump_json(out / "manifest.json", _manifest(cfg, "diagnose", ["diagnostics.json"]))
    return ["diagnostics.json"]


def cmd_stopped_audit(cfg: ExperimentConfig, out: Path, threads: int = 1) -> list[str]:
    out.mkdir(parents=True, exist_ok=True)
    rows, worst = run_stopped_audit(cfg, threads)
    _write_csv(
        out / "stopped_audit.csv",
        ["stop_index", "path_id", "t_index", "word", "value", "closed_form", "residual"],
        [(s, pid, k, "-".join(map(str, w)), _num(v), _num(c), _num(r)) for s, pid, k, w, v, c, r in rows],
    )
    _dump_json(out / "stopped_audit_summary.json", {"max_residual": worst, "n_rows": len(rows)})
    files = ["stopped_audit.csv", "stopped_audit_summary.json"]
    _dump_json(out / "manifest.json", _manifest(cfg, "stopped-audit", files))
    return files


def cmd_report(dirs, out: Path) -> list[str]:
    """Concatenate summary CSVs of several fit runs, tagged by run directory."""
    out.mkdir(parents=True, exist_ok=True)
    rows, header = [], None
    for d in dirs:
        path = Path(d) / "summary.csv"
        if not path.exists():
            raise ConfigError(f"no summary.csv in {d}")
        with path.open(newline="") as fh:
            reader = csv.reader(fh)
            head = next(reader)
            if header is None:
                header = head
            elif head != header:
                raise ConfigError(f"summary columns differ in {d}")
            rows.extend([str(d)] + r for r in reader)
    _write_csv(out / "report.csv", ["run"] + (header or []), rows)
    return ["report.csv"]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sigapprox", description=__doc__)
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("simulate", "fit", "diagnose", "stopped-audit"):
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="experiment config (JSON)")
        p.add_argument("--out", help="output directory (overrides output_dir)")
        p.add_argument("--threads", type=int, default=1, help="worker threads; never changes results")
        p.add_argument("--seed", type=int, help="override brownian.seed")
    p = sub.add_parser("report")
    p.add_argument("runs", nargs="+", help="fit output directories")
    p.add_argument("--out", required=True)
    return parser


COMMANDS = {
    "simulate": cmd_simulate,
    "fit": cmd_fit,
    "diagnose": cmd_diagnose,
    "stopped-audit": cmd_stopped_audit,
}


def _fail(out: Path | None, code: int, exc: Exception) -> int:
    report = {"error": type(exc).__name__, "message": str(exc), "exit_code": code}
    print(json.dumps(report), file=sys.stderr)
    if out is not None:
        try:
            out.mkdir(parents=True, exist_ok=True)
            _dump_json(out / "error.json", report)
        except OSError:
            pass
    return code


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    out = Path(args.out) if args.out else None
    try:
        if args.command == "report":
            cmd_report(args.runs, out)
            return EXIT_OK
        if args.threads < 1:
            raise ConfigError("--threads must be >= 1")
        cfg = ExperimentConfig.load(args.config).with_overrides(seed=args.seed, output_dir=args.out)
        out = Path(cfg.output_dir)
        COMMANDS[args.command](cfg, out, args.threads)
    except ConfigError as exc:
        return _fail(out, EXIT_CONFIG, exc)
    except (NumericalError, FitError, OverflowError, FloatingPointError, np.linalg.LinAlgError) as exc:
        return _fail(out, EXIT_NUMERIC, exc)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
