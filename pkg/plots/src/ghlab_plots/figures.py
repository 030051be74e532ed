"""Render the standard figures from ghlab experiment CSVs.

The package consumes only the documented CSV format (header row with fixed
column names, 17-digit floats, empty cells for absent scalars); there is no
in-process coupling to the solver package.  Renders are deterministic: the
Agg backend, fixed dpi, and no timestamp metadata.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

KINDS = ("indicial", "uniformity", "convergence", "poincare")

_REQUIRED = {
    "indicial": ("kind", "n", "delta", "sigma_min"),
    "uniformity": ("n", "eps", "sigma_min"),
    "convergence": ("kind", "n_rho", "residual", "note",
                    "convergence_order"),
    "poincare": ("eps", "max_ratio_excess", "note"),
}


class SchemaError(ValueError):
    """The CSV does not carry the columns a figure kind needs."""


@dataclass(frozen=True)
class FigureSpec:
    csv_path: Path
    kind: str
    out_path: Path
    title: str | None = None
    dpi: int = 150

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"figure kind must be one of {KINDS}, "
                             f"got {self.kind!r}")


@dataclass
class RenderInfo:
    """What a render produced: the file plus any fitted annotations."""

    path: Path
    annotations: dict = field(default_factory=dict)


def read_rows(csv_path, required):
    with open(csv_path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        missing = [c for c in required if c not in header]
        if missing:
            raise SchemaError(
                f"{csv_path}: missing required columns {missing}")
        rows = list(reader)
    if not rows:
        raise SchemaError(f"{csv_path}: no data rows")
    return rows


def _fnum(row, key):
    val = row.get(key, "")
    return float(val) if val not in ("", None) else math.nan


def render(spec: FigureSpec) -> RenderInfo:
    """Render one figure; returns the output path and fit annotations.

    Raises :class:`SchemaError` (and writes nothing) when the CSV is empty or
    lacks the columns the figure kind needs.
    """
    rows = read_rows(spec.csv_path, _REQUIRED[spec.kind])
    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    info = RenderInfo(path=Path(spec.out_path))
    try:
        if spec.kind == "indicial":
            _indicial(ax, rows)
        elif spec.kind == "uniformity":
            _uniformity(ax, rows)
        elif spec.kind == "convergence":
            info.annotations = _convergence(ax, rows)
        else:
            _poincare(ax, rows)
        if spec.title:
            ax.set_title(spec.title)
        fig.tight_layout()
        Path(spec.out_path).parent.mkdir(parents=True, exist_ok=True)
        fig.savefig(spec.out_path, dpi=spec.dpi,
                    metadata={"Software": "ghlab-plots"})
    finally:
        plt.close(fig)
    return info


def _indicial(ax, rows):
    groups = {}
    for r in rows:
        key = (r["kind"], int(_fnum(r, "n")))
        groups.setdefault(key, []).append((_fnum(r, "delta"),
                                           _fnum(r, "sigma_min")))
    deltas_all = []
    for (kind, n), pts in sorted(groups.items()):
        pts.sort()
        d = np.array([p[0] for p in pts])
        s = np.array([p[1] for p in pts])
        deltas_all.extend(d)
        ax.semilogy(d, s, marker=".", markersize=3, linewidth=1.0,
                    label=f"{kind}, n={n}")
    lo, hi = math.floor(min(deltas_all)), math.ceil(max(deltas_all))
    for m in range(lo, hi + 1):
        ax.axvline(m, color="0.75", linewidth=0.8, zorder=0)
    ax.set_xlabel(r"weight $\delta$")
    ax.set_ylabel(r"$\sigma_{\min}$")
    ax.legend(fontsize=8)


def _uniformity(ax, rows):
    groups = {}
    for r in rows:
        groups.setdefault(int(_fnum(r, "n")), []).append(
            (_fnum(r, "eps"), _fnum(r, "sigma_min")))
    for n, pts in sorted(groups.items()):
        pts.sort()
        e = np.array([p[0] for p in pts])
        s = np.array([p[1] for p in pts])
        ax.loglog(e, s, marker="o", markersize=3, linewidth=1.0,
                  label=f"n={n}")
    ax.set_xlabel(r"collapsing parameter $\varepsilon$")
    ax.set_ylabel(r"$\sigma_{\min}$")
    ax.legend(fontsize=8)


def _convergence(ax, rows):
    groups = {}
    exact = set()
    for r in rows:
        label = f"{r['kind']} {r['note']}".strip()
        groups.setdefault(label, []).append((_fnum(r, "n_rho"),
                                             _fnum(r, "residual")))
        if not math.isfinite(_fnum(r, "convergence_order")):
            exact.add(label)  # discretely annihilated; no order to fit
    slopes = {}
    for label, pts in sorted(groups.items()):
        pts.sort()
        m = np.array([p[0] for p in pts], dtype=float)
        res = np.array([p[1] for p in pts], dtype=float)
        live = res > 0
        if label not in exact and np.count_nonzero(live) >= 2:
            slope = float(np.polyfit(np.log(m[live]), np.log(res[live]), 1)[0])
            slopes[label] = slope
            tag = f"{label}: slope {slope:.3f}"
        else:
            tag = f"{label}: exact"
        ax.loglog(m[live], res[live], marker="s", markersize=3,
                  linewidth=1.0, label=tag)
    ax.set_xlabel("radial points")
    ax.set_ylabel("residual max-norm")
    if slopes:
        mean_slope = float(np.mean(list(slopes.values())))
        ax.text(0.02, 0.05, f"mean fitted slope {mean_slope:.6f}",
                transform=ax.transAxes, fontsize=8)
    ax.legend(fontsize=7)
    return {"slopes": slopes}


def _poincare(ax, rows):
    samples = [_fnum(r, "max_ratio_excess") for r in rows
               if r.get("note", "").startswith("sample")]
    if not samples:
        raise SchemaError("poincare CSV carries no sample rows")
    ax.hist(samples, bins=40, color="tab:blue", alpha=0.8)
    ax.axvline(1.0, color="k", linewidth=1.0)
    ax.set_xlabel("fiberwise excess over the Poincare bound")
    ax.set_ylabel("samples")
