"""Inter-annotator agreement statistics over ordinal rating matrices.

Five statistics are provided: Fleiss' kappa, mean-pairwise Cohen's kappa,
ICC(2,1), Krippendorff's alpha with interval distance, and mean-pairwise
Pearson correlation. Ratings are ordinal scores on a fixed 1..10 scale;
Krippendorff's alpha additionally tolerates missing cells.
"""

from __future__ import annotations

import csv
import itertools
from dataclasses import dataclass
from typing import Mapping, Optional

import numpy as np

from .errors import (
    DegenerateAgreement,
    MissingCells,
    NoPairableValues,
    ZeroVariance,
    ZeroVarianceRater,
)

SCORE_MIN = 1
SCORE_MAX = 10
N_CATEGORIES = SCORE_MAX - SCORE_MIN + 1

# report tags for the concrete forms chosen for multi-rater extensions
METHODS = {
    "cohens_kappa": "mean-pairwise",
    "icc": "ICC(2,1)",
    "krippendorff_distance": "interval",
}

CSV_COLUMNS = ("doc_id", "model_id", "rater_id", "criterion", "score")


@dataclass(frozen=True)
class RatingMatrix:
    """N items by R raters; None marks a missing cell."""

    scores: tuple
    criterion: str = ""
    item_ids: tuple = ()
    rater_ids: tuple = ()

    def __post_init__(self):
        rows = tuple(tuple(row) for row in self.scores)
        object.__setattr__(self, "scores", rows)
        if len(rows) < 2:
            raise ValueError("need at least 2 items")
        widths = {len(row) for row in rows}
        if len(widths) != 1:
            raise ValueError("ragged score rows")
        if next(iter(widths)) < 2:
            raise ValueError("need at least 2 raters")
        for row in rows:
            for cell in row:
                if cell is None:
                    continue
                if not isinstance(cell, int) or isinstance(cell, bool):
                    raise ValueError(f"score {cell!r} is not an integer")
                if not SCORE_MIN <= cell <= SCORE_MAX:
                    raise ValueError(f"score {cell} outside {SCORE_MIN}..{SCORE_MAX}")
        if self.item_ids and len(self.item_ids) != len(rows):
            raise ValueError("item_ids length mismatch")
        if self.rater_ids and len(self.rater_ids) != len(rows[0]):
            raise ValueError("rater_ids length mismatch")

    @property
    def n_items(self) -> int:
        return len(self.scores)

    @property
    def n_raters(self) -> int:
        return len(self.scores[0])

    @property
    def has_missing(self) -> bool:
        return any(cell is None for row in self.scores for cell in row)

    def rater_label(self, j: int) -> str:
        if self.rater_ids:
            return str(self.rater_ids[j])
        return f"rater{j}"

    def complete(self) -> np.ndarray:
        # float64 grid; callers must have rejected missing cells already
        return np.array(self.scores, dtype=np.float64)


def _require_complete(matrix: RatingMatrix) -> np.ndarray:
    if matrix.has_missing:
        raise MissingCells("statistic requires a fully observed matrix")
    return matrix.complete()


def _category_counts(matrix: RatingMatrix) -> np.ndarray:
    """N x 10 table of per-item category tallies."""
    counts = np.zeros((matrix.n_items, N_CATEGORIES), dtype=np.float64)
    for i, row in enumerate(matrix.scores):
        for cell in row:
            counts[i, cell - SCORE_MIN] += 1.0
    return counts


def _fleiss_from(p_bar: float, p_e: float) -> float:
    if p_e >= 1.0:
        if p_bar >= 1.0:
            return 1.0
        raise DegenerateAgreement("chance agreement is 1 but observed is not")
    return (p_bar - p_e) / (1.0 - p_e)


def fleiss_kappa(matrix: RatingMatrix) -> float:
    """Chance-corrected agreement over all raters with fixed categories 1..10."""
    _require_complete(matrix)
    r = matrix.n_raters
    counts = _category_counts(matrix)
    per_item = ((counts**2).sum(axis=1) - r) / (r * (r - 1))
    p_bar = float(per_item.mean())
    p_j = counts.sum(axis=0) / (matrix.n_items * r)
    p_e = float((p_j**2).sum())
    return _fleiss_from(p_bar, p_e)


def _pair_kappa(p_o: float, p_e: float) -> Optional[float]:
    # None means the pair is undefined and must be excluded from the mean
    if p_e >= 1.0:
        return 1.0 if p_o >= 1.0 else None
    return (p_o - p_e) / (1.0 - p_e)


def cohen_pair_values(matrix: RatingMatrix):
    """Per-pair Cohen's kappa; value None flags an excluded pair."""
    _require_complete(matrix)
    n = matrix.n_items
    columns = list(zip(*matrix.scores))
    out = []
    for a, b in itertools.combinations(range(matrix.n_raters), 2):
        col_a, col_b = columns[a], columns[b]
        p_o = sum(1 for x, y in zip(col_a, col_b) if x == y) / n
        p_e = 0.0
        for c in range(SCORE_MIN, SCORE_MAX + 1):
            p_e += (col_a.count(c) / n) * (col_b.count(c) / n)
        out.append(((a, b), _pair_kappa(p_o, p_e)))
    return out


def cohens_kappa_mean_pairwise(matrix: RatingMatrix) -> float:
    values = [v for _, v in cohen_pair_values(matrix) if v is not None]
    if not values:
        raise DegenerateAgreement("every rater pair was excluded")
    return sum(values) / len(values)


def _icc_mean_squares(grid: np.ndarray):
    n, r = grid.shape
    grand = grid.mean()
    row_means = grid.mean(axis=1)
    col_means = grid.mean(axis=0)
    ss_total = float(((grid - grand) ** 2).sum())
    ss_rows = float(r * ((row_means - grand) ** 2).sum())
    ss_cols = float(n * ((col_means - grand) ** 2).sum())
    ss_err = max(ss_total - ss_rows - ss_cols, 0.0)
    msr = ss_rows / (n - 1)
    msc = ss_cols / (r - 1)
    mse = ss_err / ((n - 1) * (r - 1))
    return msr, msc, mse


def icc_2_1(matrix: RatingMatrix) -> float:
    """Two-way random effects, absolute agreement, single rater."""
    grid = _require_complete(matrix)
    if np.all(grid == grid.flat[0]):
        return 1.0
    n, r = grid.shape
    msr, msc, mse = _icc_mean_squares(grid)
    denom = msr + (r - 1) * mse + r * (msc - mse) / n
    if denom == 0.0:
        raise ZeroVariance("variance components cancel; ICC undefined")
    return (msr - mse) / denom


def _interval_delta() -> np.ndarray:
    v = np.arange(SCORE_MIN, SCORE_MAX + 1, dtype=np.float64)
    return (v[:, None] - v[None, :]) ** 2


def krippendorff_alpha_interval(matrix: RatingMatrix, dropped_sink: Optional[list] = None) -> float:
    """Coincidence-matrix alpha with squared-difference distance.

    Items with fewer than two present ratings carry no pairable values;
    they are dropped and, when a sink list is given, their indices are
    appended to it.
    """
    units = []
    for idx, row in enumerate(matrix.scores):
        present = [cell for cell in row if cell is not None]
        if len(present) >= 2:
            units.append(present)
        elif dropped_sink is not None:
            dropped_sink.append(idx)
    if not units:
        raise NoPairableValues("no item has two or more ratings")
    coincidence = np.zeros((N_CATEGORIES, N_CATEGORIES), dtype=np.float64)
    for values in units:
        m = len(values)
        cnt = np.bincount(
            [v - SCORE_MIN for v in values], minlength=N_CATEGORIES
        ).astype(np.float64)
        coincidence += (np.outer(cnt, cnt) - np.diag(cnt)) / (m - 1)
    delta = _interval_delta()
    n_total = float(coincidence.sum())
    marginals = coincidence.sum(axis=1)
    d_e = float((np.outer(marginals, marginals) * delta).sum()) / (
        n_total * (n_total - 1.0)
    )
    if d_e == 0.0:
        return 1.0
    d_o = float((coincidence * delta).sum()) / n_total
    return 1.0 - d_o / d_e


def _pearson(a: np.ndarray, b: np.ndarray) -> float:
    da = a - a.mean()
    db = b - b.mean()
    return float((da * db).sum() / np.sqrt((da**2).sum() * (db**2).sum()))


def pearson_mean_pairwise(matrix: RatingMatrix) -> float:
    grid = _require_complete(matrix)
    for j in range(matrix.n_raters):
        if np.all(grid[:, j] == grid[0, j]):
            raise ZeroVarianceRater(matrix.rater_label(j))
    values = [
        _pearson(grid[:, a], grid[:, b])
        for a, b in itertools.combinations(range(matrix.n_raters), 2)
    ]
    return sum(values) / len(values)


# --- ingestion and reporting ------------------------------------------------

def read_rating_rows(path) -> list:
    """Parse the delimited ratings file into validated row dicts."""
    with open(path, "r", encoding="utf-8", newline="") as handle:
        reader = csv.DictReader(handle)
        header = reader.fieldnames or []
        missing = [col for col in CSV_COLUMNS if col not in header]
        if missing:
            raise ValueError(f"ratings file lacks columns: {', '.join(missing)}")
        rows = []
        for line_no, raw in enumerate(reader, start=2):
            try:
                score = int(str(raw["score"]).strip())
            except (TypeError, ValueError):
                raise ValueError(f"line {line_no}: score {raw['score']!r} is not an integer")
            if not SCORE_MIN <= score <= SCORE_MAX:
                raise ValueError(f"line {line_no}: score {score} outside {SCORE_MIN}..{SCORE_MAX}")
            rows.append(
                {
                    "doc_id": str(raw["doc_id"]).strip(),
                    "model_id": str(raw["model_id"]).strip(),
                    "rater_id": str(raw["rater_id"]).strip(),
                    "criterion": str(raw["criterion"]).strip(),
                    "score": score,
                }
            )
        return rows


def load_rating_matrices(path) -> dict:
    """Group rating rows into one matrix per (model_id, criterion)."""
    rows = read_rating_rows(path)
    groups: dict = {}
    for row in rows:
        key = (row["model_id"], row["criterion"])
        cell_key = (row["doc_id"], row["rater_id"])
        cells = groups.setdefault(key, {})
        if cell_key in cells:
            raise ValueError(
                f"duplicate rating for doc {row['doc_id']!r} by rater "
                f"{row['rater_id']!r} under {key}"
            )
        cells[cell_key] = row["score"]
    matrices = {}
    for key, cells in sorted(groups.items()):
        doc_ids = sorted({doc for doc, _ in cells})
        rater_ids = sorted({rater for _, rater in cells})
        if len(doc_ids) < 2 or len(rater_ids) < 2:
            raise ValueError(f"group {key} needs at least 2 items and 2 raters")
        grid = tuple(
            tuple(cells.get((doc, rater)) for rater in rater_ids) for doc in doc_ids
        )
        matrices[key] = RatingMatrix(
            scores=grid,
            criterion=key[1],
            item_ids=tuple(doc_ids),
            rater_ids=tuple(rater_ids),
        )
    return matrices


def summarize(matrix: RatingMatrix) -> dict:
    """All five statistics for one matrix; unobtainable cells are None."""
    flags: list = []
    row: dict = {}

    def attempt(name, fn):
        try:
            row[name] = fn(matrix)
        except MissingCells:
            row[name] = None
            flags.append(f"{name}:missing_cells")
        except ZeroVarianceRater as exc:
            row[name] = None
            flags.append(f"{name}:zero_variance_rater:{exc.rater}")
        except (DegenerateAgreement, ZeroVariance) as exc:
            row[name] = None
            flags.append(f"{name}:undefined:{exc}")

    attempt("fleiss_kappa", fleiss_kappa)
    attempt("cohens_kappa", cohens_kappa_mean_pairwise)
    if row["cohens_kappa"] is not None:
        excluded = [pair for pair, v in cohen_pair_values(matrix) if v is None]
        for a, b in excluded:
            flags.append(f"cohens_kappa:pair_excluded:{a}-{b}")
    attempt("icc_2_1", icc_2_1)
    dropped: list = []
    try:
        row["krippendorff_alpha"] = krippendorff_alpha_interval(matrix, dropped)
    except NoPairableValues:
        row["krippendorff_alpha"] = None
        flags.append("krippendorff_alpha:no_pairable_values")
    if dropped:
        flags.append(f"krippendorff_alpha:items_dropped:{len(dropped)}")
    attempt("pearson_r", pearson_mean_pairwise)
    row["flags"] = flags
    return row


def agreement_report(matrices: Mapping) -> dict:
    """Table rows keyed by model and criterion, plus the method tags."""
    rows = []
    for (model_id, criterion), matrix in sorted(matrices.items()):
        row = {"model_id": model_id, "criterion": criterion}
        row.update(summarize(matrix))
        rows.append(row)
    return {"methods": dict(METHODS), "rows": rows}
