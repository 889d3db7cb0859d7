"""
Binned curves, 2-D density grids and the end-to-end pipeline.

Bins are low-inclusive and high-exclusive, except the last bin which also
includes its upper edge.
"""

from __future__ import annotations

import hashlib
import json
import os
import platform
import shutil
import tempfile
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd

from . import __version__
from .ingest import Dataset, load_dataset
from .metrics import UserProfiles, compute_profiles
from .taxonomy import TaxonomyThresholds, classify_population

CURVE_COLUMNS = ("bin_low", "bin_high", "bin_center", "mean", "std", "count")
GRID_COLUMNS = ("x_bin", "y_bin", "x_low", "x_high", "y_low", "y_high", "count")


def bin_edges(low: float, high: float, n_bins: int, scale: str = "linear") -> np.ndarray:
    """``n_bins + 1`` edges spanning ``[low, high]`` on a linear or log scale."""
    if n_bins < 1:
        raise ValueError("number of bins must be >= 1")
    if not high > low:
        raise ValueError(f"empty bin range [{low}, {high}]")
    if scale == "linear":
        edges = np.linspace(low, high, n_bins + 1)
    elif scale == "log":
        if low <= 0:
            raise ValueError("log bins need a positive lower edge")
        edges = np.logspace(np.log10(low), np.log10(high), n_bins + 1)
    else:
        raise ValueError(f"unknown scale {scale!r}")
    edges[0], edges[-1] = low, high
    return edges


def assign_bins(values, edges: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Bin index of each value plus masks of values below/above the range.

    Out-of-range values are clipped into the first or last bin.
    """
    v = np.asarray(values, dtype=np.float64)
    n = len(edges) - 1
    idx = np.searchsorted(edges, v, side="right") - 1
    below = v < edges[0]
    above = v > edges[-1]
    idx[v == edges[-1]] = n - 1
    return np.clip(idx, 0, n - 1), below, above


def _data_range(x: np.ndarray, scale: str) -> tuple[float, float]:
    lo, hi = float(x.min()), float(x.max())
    if hi > lo:
        return lo, hi
    return (lo, lo * 10.0) if scale == "log" else (lo, lo + 1.0)


@dataclass(frozen=True, eq=False)
class BinnedCurve:
    low: np.ndarray
    high: np.ndarray
    center: np.ndarray
    mean: np.ndarray
    std: np.ndarray
    count: np.ndarray
    scale: str = "linear"

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            {"bin_low": self.low, "bin_high": self.high, "bin_center": self.center,
             "mean": self.mean, "std": self.std, "count": self.count},
            columns=list(CURVE_COLUMNS),
        )

    def to_csv(self, path) -> None:
        self.to_frame().to_csv(path, index=False, float_format="%.6f", na_rep="", lineterminator="\n")


def binned_average(x, y, binning: str = "log", n_bins: int = 40, range=None) -> BinnedCurve:
    """Mean and standard deviation of ``y`` within bins of ``x``.

    Parameters
    ----------
    x, y : array_like
        Aligned per-user series.
    binning : {'log', 'linear'}
    n_bins : int
    range : (float, float), optional
        Bin span; defaults to the data range.  Values outside it are dropped.

    Returns
    -------
    BinnedCurve
        Empty bins have ``count == 0`` and ``nan`` mean/std.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape:
        raise ValueError("x and y must have the same length")
    if binning == "log" and np.any(x <= 0):
        raise ValueError(f"log binning needs x > 0; {int((x <= 0).sum())} values are not positive")
    if x.size == 0 and range is None:
        raise ValueError("cannot infer a bin range from no data")
    lo, hi = range if range is not None else _data_range(x, binning)
    edges = bin_edges(lo, hi, n_bins, binning)
    keep = (x >= lo) & (x <= hi)
    idx, _, _ = assign_bins(x[keep], edges)
    yk = y[keep]

    count = np.bincount(idx, minlength=n_bins)
    mean = np.full(n_bins, np.nan)
    std = np.full(n_bins, np.nan)
    order = np.argsort(idx, kind="stable")
    ys, bs = yk[order], idx[order]
    nz = np.flatnonzero(count)
    if len(nz):
        starts = np.searchsorted(bs, nz)
        sums = np.add.reduceat(ys, starts)
        m = sums / count[nz]
        # the true mean lies between the bin's min and max
        m = np.clip(m, np.minimum.reduceat(ys, starts), np.maximum.reduceat(ys, starts))
        dev = (ys - np.repeat(m, count[nz])) ** 2
        mean[nz] = m
        std[nz] = np.sqrt(np.add.reduceat(dev, starts) / count[nz])
    center = np.sqrt(edges[:-1] * edges[1:]) if binning == "log" else (edges[:-1] + edges[1:]) / 2
    return BinnedCurve(edges[:-1], edges[1:], center, mean, std, count, binning)


@dataclass(frozen=True)
class AxisSpec:
    scale: str = "linear"
    low: float = 0.0
    high: float = 1.0
    bins: int = 50

    def edges(self) -> np.ndarray:
        if self.bins < 1:
            raise ValueError("axis resolution must be >= 1")
        return bin_edges(self.low, self.high, self.bins, self.scale)


@dataclass(frozen=True, eq=False)
class DensityGrid:
    x_edges: np.ndarray
    y_edges: np.ndarray
    counts: np.ndarray
    clipped: dict = field(default_factory=dict)

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def to_frame(self) -> pd.DataFrame:
        xi, yi = np.nonzero(self.counts)
        return pd.DataFrame(
            {"x_bin": xi, "y_bin": yi,
             "x_low": self.x_edges[xi], "x_high": self.x_edges[xi + 1],
             "y_low": self.y_edges[yi], "y_high": self.y_edges[yi + 1],
             "count": self.counts[xi, yi]},
            columns=list(GRID_COLUMNS),
        )

    def to_csv(self, path) -> None:
        self.to_frame().to_csv(path, index=False, float_format="%.6f", lineterminator="\n")


def density_grid(x, y, x_axis: AxisSpec, y_axis: AxisSpec) -> DensityGrid:
    """Count users per (x, y) cell.

    Values outside an axis range are clipped into the edge bins and tallied
    in ``clipped``; every input point lands in exactly one cell.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape:
        raise ValueError("x and y must have the same length")
    xe, ye = x_axis.edges(), y_axis.edges()
    xi, xb, xa = assign_bins(x, xe)
    yi, yb, ya = assign_bins(y, ye)
    flat = np.bincount(xi * y_axis.bins + yi, minlength=x_axis.bins * y_axis.bins)
    clipped = {"x_below": int(xb.sum()), "x_above": int(xa.sum()),
               "y_below": int(yb.sum()), "y_above": int(ya.sum())}
    return DensityGrid(xe, ye, flat.reshape(x_axis.bins, y_axis.bins), clipped)


# ---------------------------------------------------------------------------
# pipeline


@dataclass
class PipelineOptions:
    log_bins: int = 40
    linear_bins: int = 50
    thresholds: TaxonomyThresholds | None = None
    workers: int = 1


def sha256_of(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def _log_axis(values: np.ndarray, bins: int) -> AxisSpec:
    lo, hi = _data_range(values, "log")
    return AxisSpec("log", lo, hi, bins)


def write_curves(profiles: UserProfiles, out_dir: Path, opts: PipelineOptions) -> dict:
    """Pages/topics vs activity/lifetime curves; returns per-file metadata."""
    meta = {}
    act = profiles.activity.astype(np.float64)
    life = profiles.lifetime_days
    alive = life > 0
    series = [("activity", act, np.ones(len(profiles), bool)), ("lifetime", life, alive)]
    targets = [("pages", profiles.n_pages)]
    if profiles.has_topics:
        targets.append(("topics", profiles.n_topics))
    for xname, xv, xmask in series:
        for yname, yv in targets:
            name = f"curve_{xname}_{yname}.csv"
            if xmask.any():
                curve = binned_average(xv[xmask], yv[xmask], "log", opts.log_bins)
                curve.to_csv(out_dir / name)
            else:
                BinnedCurve(*(np.zeros(0),) * 5, np.zeros(0, dtype=np.int64)).to_csv(out_dir / name)
            meta[name] = {"eligible_users": int(xmask.sum()), "x": xname, "y": yname,
                          "binning": "log", "bins": opts.log_bins}
    return meta


def write_grids(profiles: UserProfiles, out_dir: Path, opts: PipelineOptions) -> dict:
    meta = {}
    n = len(profiles)
    act = profiles.activity.astype(np.float64)
    life = profiles.lifetime_days
    gini_axis = AxisSpec("linear", 0.0, 1.0, opts.linear_bins)
    everyone = np.ones(n, dtype=bool)
    scored = profiles.topic_scored
    plans = [("activity", act, everyone, "gini_pages_norm", profiles.gini_pages_norm, everyone),
             ("lifetime", life, life > 0, "gini_pages_norm", profiles.gini_pages_norm, everyone)]
    if profiles.has_topics:
        plans = [("activity", act, everyone, "gini_topics", profiles.gini_topics, scored),
                 ("lifetime", life, life > 0, "gini_topics", profiles.gini_topics, scored),
                 *plans,
                 ("gini_pages_norm", profiles.gini_pages_norm, everyone,
                  "gini_topics", profiles.gini_topics, scored)]
    for xname, xv, xmask, yname, yv, ymask in plans:
        mask = xmask & ymask
        name = f"grid_{xname}_{yname}.csv"
        x_axis = gini_axis if xname.startswith("gini") else (
            _log_axis(xv[mask], opts.log_bins) if mask.any() else AxisSpec("log", 1.0, 10.0, opts.log_bins)
        )
        grid = density_grid(xv[mask], yv[mask], x_axis, gini_axis)
        grid.to_csv(out_dir / name)
        meta[name] = {"eligible_users": int(mask.sum()), "x": xname, "y": yname,
                      "x_axis": asdict(x_axis), "y_axis": asdict(gini_axis),
                      "clipped": grid.clipped}
    return meta


def run_pipeline(
    interactions,
    posts,
    out_dir,
    topics=None,
    options: PipelineOptions | None = None,
    dataset: Dataset | None = None,
) -> dict[str, Path]:
    """Ingest, score, classify and bin; write every artifact to ``out_dir``.

    Files are first written to a scratch directory and moved into place only
    when every stage succeeded, so a failed run leaves no partial outputs.
    Without a topics file only the page-side outputs are produced and the
    manifest lists what was omitted.

    Returns
    -------
    dict
        Output file name -> path.
    """
    opts = options or PipelineOptions()
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    scratch = Path(tempfile.mkdtemp(prefix=".partial-", dir=out_dir))
    try:
        if dataset is None:
            dataset = load_dataset(interactions, posts, topics)
        profiles = compute_profiles(dataset, workers=opts.workers)
        profiles.to_csv(scratch / "profiles.csv")

        outputs = {"profiles.csv": {"rows": len(profiles)}}
        omitted = []
        thresholds = None
        if profiles.has_topics and profiles.topic_scored.any():
            cls = classify_population(profiles, opts.thresholds)
            cls.to_csv(scratch / "taxonomy.csv")
            cls.write_summary(scratch / "taxonomy_summary.json")
            thresholds = cls.thresholds.as_dict()
            outputs["taxonomy.csv"] = {"rows": len(cls.codes)}
            outputs["taxonomy_summary.json"] = {}
        else:
            omitted += ["taxonomy.csv", "taxonomy_summary.json"]
        if not profiles.has_topics:
            omitted += ["curve_activity_topics.csv", "curve_lifetime_topics.csv",
                        "grid_activity_gini_topics.csv", "grid_lifetime_gini_topics.csv",
                        "grid_gini_pages_norm_gini_topics.csv"]
        if len(profiles):
            outputs.update(write_curves(profiles, scratch, opts))
            outputs.update(write_grids(profiles, scratch, opts))

        inputs = {"interactions": interactions, "posts": posts, "topics": topics}
        manifest = {
            "package": "selective_exposure",
            "version": __version__,
            "python": platform.python_version(),
            "numpy": np.__version__,
            "options": {
                "log_bins": opts.log_bins,
                "linear_bins": opts.linear_bins,
                "thresholds": opts.thresholds.as_dict() if opts.thresholds else None,
            },
            "thresholds_used": thresholds,
            "inputs": {k: {"file": os.path.basename(str(v)), "sha256": sha256_of(v)}
                       for k, v in inputs.items() if v is not None},
            "counts": dataset.summary(),
            "topics_available": profiles.has_topics,
            "omitted": omitted,
            "outputs": outputs,
        }
        with open(scratch / "manifest.json", "w", encoding="utf-8") as fh:
            json.dump(manifest, fh, indent=2, sort_keys=True)
            fh.write("\n")

        written = {}
        for f in sorted(scratch.iterdir()):
            target = out_dir / f.name
            os.replace(f, target)
            written[f.name] = target
        return written
    finally:
        shutil.rmtree(scratch, ignore_errors=True)
