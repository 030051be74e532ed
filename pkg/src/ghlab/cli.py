"""Command-line driver and CSV/JSON emission.

Subcommands: geometry-check, harmonic, poincare, indicial, uniformity,
kernel, adjoint, commutator, all.  Exit codes: 0 every verdict passes,
1 at least one failure, 2 failures absent but indeterminate records present,
3 configuration error.

The CSV schema is the fixed column list
:data:`ghlab.experiments.CSV_COLUMNS`; floats are written with 17 significant
digits so parsing an emitted file reconstructs every scalar exactly.  The
JSON summary carries {experiment, pass_count, fail_count,
indeterminate_count, worst_case}.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import asdict
from pathlib import Path

from .config import EXPERIMENTS, Config, parse_config
from .errors import ConfigError
from .experiments import CSV_COLUMNS, FAIL, INDET, PASS, SweepRecord
from .profiles import PROFILES

EXIT_PASS, EXIT_FAIL, EXIT_INDET, EXIT_CONFIG = 0, 1, 2, 3


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        if math.isnan(value):
            return "nan"
        return f"{value:.17g}"
    return str(value)


def records_to_csv(records) -> str:
    lines = [",".join(CSV_COLUMNS)]
    for r in records:
        row = asdict(r)
        lines.append(",".join(_fmt(row[c]).replace(",", ";") for c in CSV_COLUMNS))
    return "\n".join(lines) + "\n"


def parse_csv(text: str):
    """Round-trip reader for emitted CSVs (scalars reconstructed exactly)."""
    lines = [ln for ln in text.splitlines() if ln.strip()]
    header = lines[0].split(",")
    out = []
    floats = {"c", "eps", "delta", "rho_min", "rho_max", "sigma_min",
              "max_ratio_excess", "residual", "convergence_order", "defect",
              "drift", "tolerance"}
    ints = {"k", "n", "n_rho", "n_ang1", "n_ang2", "n_fiber", "kernel_dim",
            "seed"}
    for ln in lines[1:]:
        vals = ln.split(",")
        row = {}
        for key, val in zip(header, vals):
            if val == "":
                row[key] = None
            elif key in floats:
                row[key] = float(val)
            elif key in ints:
                row[key] = int(val)
            else:
                row[key] = val
        out.append(SweepRecord(**row))
    return out


def _badness(r: SweepRecord) -> float:
    rank = {FAIL: 2, INDET: 1, PASS: 0}[r.verdict]
    closeness = 0.0
    if r.tolerance and r.max_ratio_excess is not None:
        closeness = r.max_ratio_excess / r.tolerance
    elif r.tolerance and r.residual is not None and r.tolerance > 0:
        closeness = r.residual / r.tolerance
    return rank * 1e6 + closeness


def summarize(experiment: str, records) -> dict:
    worst = max(records, key=_badness)
    return {
        "experiment": experiment,
        "pass_count": sum(r.verdict == PASS for r in records),
        "fail_count": sum(r.verdict == FAIL for r in records),
        "indeterminate_count": sum(r.verdict == INDET for r in records),
        "worst_case": {k: v for k, v in asdict(worst).items() if v is not None},
    }


def emit(records, csv_path, json_path):
    """Write the CSV and JSON summary (deterministic, idempotent)."""
    if not records:
        raise ValueError("no records to emit")
    records = sorted(records, key=lambda r: r.sort_key())
    experiment = records[0].experiment
    csv_path = Path(csv_path)
    json_path = Path(json_path)
    try:
        csv_path.parent.mkdir(parents=True, exist_ok=True)
        csv_path.write_text(records_to_csv(records), encoding="utf-8")
        json_path.write_text(
            json.dumps(summarize(experiment, records), sort_keys=True,
                       indent=2, allow_nan=True) + "\n", encoding="utf-8")
    except OSError as exc:
        raise OSError(f"cannot write {exc.filename}: {exc.strerror}") from exc


def _run_one(name: str, cfg: Config, quick: bool, out_dir: Path):
    records = PROFILES[name](cfg, quick=quick)
    stem = name.replace("-", "_")
    emit(records, out_dir / f"{stem}.csv", out_dir / f"{stem}.json")
    npass = sum(r.verdict == PASS for r in records)
    nfail = sum(r.verdict == FAIL for r in records)
    nind = len(records) - npass - nfail
    print(f"{name}: {npass} pass, {nfail} fail, {nind} indeterminate "
          f"-> {out_dir / (stem + '.csv')}")
    if any(r.seed is not None for r in records):
        print(f"  seed = {cfg.seed}")
    return records


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(
        prog="ghlab",
        description="Desk-scale verification lab for weighted Laplacians on "
                    "collapsing circle-fibered model ends")
    ap.add_argument("command", choices=EXPERIMENTS)
    ap.add_argument("--config", type=Path, default=None,
                    help="configuration file (documented key = value format)")
    ap.add_argument("--out", type=Path, default=None,
                    help="output directory (default: config or ./out)")
    ap.add_argument("--seed", type=int, default=None)
    ap.add_argument("--threads", type=int, default=None)
    ap.add_argument("--quick", action="store_true",
                    help="coarse preset for smoke runs")
    args = ap.parse_args(argv)

    try:
        if args.config is not None:
            cfg = parse_config(Path(args.config).read_text(encoding="utf-8"))
        else:
            cfg = Config()
        if args.seed is not None:
            cfg.seed = args.seed
        if args.threads is not None:
            cfg.threads = args.threads
    except (ConfigError, OSError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    out_dir = args.out or Path(cfg.out_dir)
    names = list(PROFILES) if args.command == "all" else [args.command]
    all_records = []
    for name in names:
        all_records += _run_one(name, cfg, args.quick, out_dir)
    if any(r.verdict == FAIL for r in all_records):
        return EXIT_FAIL
    if any(r.verdict == INDET for r in all_records):
        return EXIT_INDET
    return EXIT_PASS


if __name__ == "__main__":
    sys.exit(main())
