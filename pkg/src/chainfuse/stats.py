"""Rank-based comparison of methods across datasets.

Fractional average ranks, the Friedman test (uncorrected for ties: the rank
tables this stage consumes contain ties but no correction is applied, kept
as a documented knob), the Bonferroni-Dunn critical difference, and a
critical-difference diagram rendered to a vector image.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import stats as scipy_stats


@dataclass(frozen=True)
class RankTable:
    """Per-dataset fractional ranks (rank 1 = best) for a set of methods."""

    methods: tuple[str, ...]
    datasets: tuple[str, ...]
    ranks: np.ndarray  # (n_datasets, n_methods)

    def __post_init__(self):
        ranks = np.asarray(self.ranks, dtype=np.float64)
        object.__setattr__(self, "methods", tuple(self.methods))
        object.__setattr__(self, "datasets", tuple(self.datasets))
        object.__setattr__(self, "ranks", ranks)
        ranks.setflags(write=False)
        k = len(self.methods)
        if ranks.shape != (len(self.datasets), k):
            raise ValueError("rank matrix shape does not match labels")
        expected = k * (k + 1) / 2
        if not np.allclose(ranks.sum(axis=1), expected):
            raise ValueError(f"each row of ranks must sum to {expected}")

    @property
    def k(self) -> int:
        return len(self.methods)

    @property
    def n(self) -> int:
        return len(self.datasets)

    def avg_ranks(self) -> np.ndarray:
        return self.ranks.mean(axis=0)


def rank_row(values, higher_is_better: bool) -> np.ndarray:
    """Fractional ranks of one dataset row; ties share the mean position."""
    v = np.asarray(values, dtype=np.float64)
    if v.ndim != 1 or v.size == 0:
        raise ValueError("expected a non-empty 1-D value row")
    return scipy_stats.rankdata(-v if higher_is_better else v)


def build_rank_table(
    methods, datasets, values: np.ndarray, higher_is_better: bool
) -> RankTable:
    """Rank a (datasets x methods) matrix of metric means row by row."""
    values = np.asarray(values, dtype=np.float64)
    ranks = np.vstack([rank_row(row, higher_is_better) for row in values])
    return RankTable(methods=tuple(methods), datasets=tuple(datasets), ranks=ranks)


def average_ranks(rt: RankTable) -> dict[str, float]:
    return {m: float(r) for m, r in zip(rt.methods, rt.avg_ranks())}


def friedman(rt: RankTable) -> tuple[float, float]:
    """Friedman chi-square statistic and its p-value (k - 1 degrees of freedom)."""
    n, k = rt.n, rt.k
    if k < 2:
        raise ValueError("the Friedman test needs at least two methods")
    avg = rt.avg_ranks()
    statistic = 12.0 * n / (k * (k + 1)) * (float((avg**2).sum()) - k * (k + 1) ** 2 / 4.0)
    statistic = max(statistic, 0.0)
    p_value = float(scipy_stats.chi2.sf(statistic, k - 1))
    return float(statistic), p_value


def bonferroni_dunn_cd(k: int, n_datasets: int, alpha: float) -> float:
    """Critical average-rank difference for k methods over N datasets.

    Uses the normal quantile at alpha / (2 * (k - 1)), i.e. a two-sided
    comparison against a control, Bonferroni-corrected for k - 1 comparisons.
    """
    if k < 2 or n_datasets < 1:
        raise ValueError("need at least two methods and one dataset")
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie in (0, 1)")
    z = float(scipy_stats.norm.ppf(1.0 - alpha / (2.0 * (k - 1))))
    return z * float(np.sqrt(k * (k + 1) / (6.0 * n_datasets)))


def cd_groups(avg_ranks: np.ndarray, cd: float) -> list[tuple[int, ...]]:
    """Connected components of the graph joining methods closer than cd.

    Every method appears in exactly one group; singleton groups mean the
    method is separated from all others.
    """
    avg = np.asarray(avg_ranks, dtype=np.float64)
    k = avg.size
    parent = list(range(k))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i in range(k):
        for j in range(i + 1, k):
            if abs(avg[i] - avg[j]) < cd:
                parent[find(i)] = find(j)
    groups: dict[int, list[int]] = {}
    for i in range(k):
        groups.setdefault(find(i), []).append(i)
    return sorted(tuple(sorted(v)) for v in groups.values())


def render_cd_diagram(rt: RankTable, cd: float, path) -> Path:
    """Draw a critical-difference diagram and save it (format by extension).

    A horizontal rank axis carries each method at its average rank; thick
    bars underneath join groups whose pairwise average-rank differences stay
    below the critical difference, and a ruler shows the CD length.
    """
    from matplotlib.figure import Figure

    avg = rt.avg_ranks()
    k = rt.k
    order = np.argsort(avg)
    lo = float(np.floor(avg.min()))
    hi = float(np.ceil(avg.max()))
    if hi - lo < 1.0:
        hi = lo + 1.0

    fig = Figure(figsize=(7.0, 2.2 + 0.32 * k))
    ax = fig.add_subplot(111)
    ax.set_xlim(lo - 0.25, hi + 0.25)
    axis_y = 0.0
    ax.plot([lo, hi], [axis_y, axis_y], color="black", lw=1.2)
    for tick in np.arange(lo, hi + 0.5, 0.5):
        major = float(tick).is_integer()
        ax.plot([tick, tick], [axis_y, axis_y + (0.12 if major else 0.06)],
                color="black", lw=1.0)
        if major:
            ax.text(tick, axis_y + 0.18, f"{int(tick)}", ha="center", fontsize=9)

    # CD ruler above the axis
    ruler_y = axis_y + 0.45
    ax.plot([lo, lo + cd], [ruler_y, ruler_y], color="black", lw=1.5)
    for x in (lo, lo + cd):
        ax.plot([x, x], [ruler_y - 0.04, ruler_y + 0.04], color="black", lw=1.5)
    ax.text(lo + cd / 2, ruler_y + 0.08, f"CD = {cd:.3f}", ha="center", fontsize=9)

    # method leader lines, best (lowest rank) listed first
    label_step = 0.28
    for slot, idx in enumerate(order):
        label_y = axis_y - 0.45 - slot * label_step
        side_x = lo - 0.2 if slot % 2 == 0 else hi + 0.2
        align = "right" if slot % 2 == 0 else "left"
        ax.plot([avg[idx], avg[idx]], [axis_y, label_y], color="gray", lw=0.8)
        ax.plot([avg[idx], side_x], [label_y, label_y], color="gray", lw=0.8)
        ax.text(side_x, label_y, f" {rt.methods[idx]} ({avg[idx]:.3f}) ",
                ha=align, va="center", fontsize=9)

    # group bars just below the axis
    bar_y = axis_y - 0.18
    for group in cd_groups(avg, cd):
        if len(group) < 2:
            continue
        xs = avg[list(group)]
        ax.plot([xs.min(), xs.max()], [bar_y, bar_y], color="black", lw=3.5,
                solid_capstyle="round")
        bar_y -= 0.12

    ax.set_ylim(axis_y - 0.6 - label_step * k, ruler_y + 0.35)
    ax.axis("off")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, bbox_inches="tight")
    return path


# ---------------------------------------------------------------------------
# Results-CSV ingestion
# ---------------------------------------------------------------------------


def read_results_csv(path) -> list[dict]:
    with Path(path).open() as handle:
        return list(csv.DictReader(handle))


def rank_table_from_results(
    rows: list[dict],
    metric: str,
    higher_is_better: bool,
    min_diversity: float | None = None,
) -> RankTable:
    """Build a dataset x method rank table from benchmark result rows.

    Rows are the output of the evaluation stage's CSV; only datasets with a
    value for every method are ranked.  ``min_diversity`` keeps datasets
    whose diversity is strictly above the bound.
    """
    cells: dict[str, dict[str, float]] = {}
    div: dict[str, float] = {}
    methods: list[str] = []
    for row in rows:
        if row["metric"] != metric:
            continue
        ds, method = row["dataset"], row["method"]
        cells.setdefault(ds, {})[method] = float(row["mean"])
        if row.get("diversity"):
            div[ds] = float(row["diversity"])
        if method not in methods:
            methods.append(method)
    if not methods:
        raise ValueError(f"no rows found for metric {metric!r}")
    datasets = []
    values = []
    for ds in cells:
        if min_diversity is not None and div.get(ds, 0.0) <= min_diversity:
            continue
        if set(methods) <= set(cells[ds]):
            datasets.append(ds)
            values.append([cells[ds][m] for m in methods])
    if not datasets:
        raise ValueError("no dataset has results for every method")
    return build_rank_table(methods, datasets, np.array(values), higher_is_better)
