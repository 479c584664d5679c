"""Post-campaign analysis: feature matrices, z-normalization, Gaussianization,
PCA, cycle histograms and outcome breakdowns.

Only Benign and SDC runs with complete event vectors become feature rows;
Other runs show up in the breakdown only.
"""

from __future__ import annotations

import logging
from collections import defaultdict
from dataclasses import dataclass, field, replace
from typing import Iterable, Optional, Sequence

import numpy as np
import pandas as pd
from scipy.special import ndtri
from scipy.stats import rankdata

from app.config import LabSettings, get_settings
from app.errors import AnalysisError, DegenerateCovariance, EmptyInput, TooFewRows
from app.models.schemas import (
    CATALOG,
    BreakdownReport,
    BreakdownRow,
    CampaignRecord,
    CycleStats,
    EventKind,
    LocationClass,
    OutcomeClass,
    parse_event,
)
from app.services.storage_service import CampaignStore

logger = logging.getLogger("softerr.analysis")

FEATURE_CLASSES = (OutcomeClass.BENIGN, OutcomeClass.SDC)
RANK_TOLERANCE = 1e-12

PCA_SCATTER = "pca_scatter.csv"
CYCLES_HIST = "cycles_hist.csv"
BREAKDOWN = "breakdown.csv"

SCATTER_COLUMNS = ["fault_id", "outcome", "pc1", "pc2"]
HIST_COLUMNS = ["bin_lo", "bin_hi", "count_benign", "count_sdc"]
MIN_FEATURE_ROWS = 2


# ── Feature matrix ────────────────────────────────────────────────────────────

@dataclass(frozen=True)
class FeatureMatrix:
    """Rows are faults, columns are events in catalog order."""
    values: np.ndarray
    events: tuple[EventKind, ...]
    fault_ids: tuple[int, ...]
    labels: tuple[OutcomeClass, ...]

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    def column(self, event: EventKind) -> np.ndarray:
        try:
            return self.values[:, self.events.index(parse_event(event))]
        except ValueError:
            raise AnalysisError(f"event {event!r} is not a column of this matrix") from None

    def with_values(self, values: np.ndarray) -> "FeatureMatrix":
        return replace(self, values=values)


def build_feature_matrix(
    records: Iterable[CampaignRecord],
    events: Optional[Sequence[EventKind]] = None,
    drop_constant: bool = False,
) -> FeatureMatrix:
    rows = [r for r in records if r.outcome in FEATURE_CLASSES and r.events_complete]
    if events is None:
        present = set(rows[0].events) if rows else set()
        for r in rows[1:]:
            present &= set(r.events)
        wanted = [e for e in CATALOG if e.name in present]
    else:
        wanted = sorted({parse_event(e) for e in events})

    kept = []
    for r in rows:
        if all(e.name in r.events for e in wanted):
            kept.append(r)
        else:
            logger.warning("fault %d lacks some of the requested events; skipped", r.fault.id)

    values = np.array(
        [[float(r.events[e.name]) for e in wanted] for r in kept], dtype=np.float64
    ).reshape(len(kept), len(wanted))
    matrix = FeatureMatrix(
        values=values,
        events=tuple(wanted),
        fault_ids=tuple(r.fault.id for r in kept),
        labels=tuple(r.outcome for r in kept),
    )
    if drop_constant and len(kept):
        varying = np.ptp(values, axis=0) > 0
        dropped = [e.name for e, v in zip(wanted, varying) if not v]
        if dropped:
            logger.info("dropping constant events: %s", ", ".join(dropped))
        matrix = FeatureMatrix(
            values=values[:, varying],
            events=tuple(e for e, v in zip(wanted, varying) if v),
            fault_ids=matrix.fault_ids,
            labels=matrix.labels,
        )
    return matrix


# ── Preprocessing ─────────────────────────────────────────────────────────────

def _as_2d(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        x = x[:, None]
    if x.shape[0] < 2:
        raise TooFewRows(f"need at least 2 rows, got {x.shape[0]}")
    return x


def z_normalize(x: np.ndarray) -> np.ndarray:
    """Zero mean, unit population std per column; constant columns become zeros."""
    x = _as_2d(x)
    out = np.zeros_like(x)
    constant = np.ptp(x, axis=0) == 0
    for j in np.flatnonzero(constant):
        logger.warning("column %d is constant; normalized to zeros", j)
    live = ~constant
    if live.any():
        cols = x[:, live]
        out[:, live] = (cols - cols.mean(axis=0)) / cols.std(axis=0, ddof=0)
    return out


def gaussianize(x: np.ndarray) -> np.ndarray:
    """Rank-based inverse-normal transform, Φ⁻¹(rank / (n + 1)) with average ranks for ties.

    Φ⁻¹ is ``scipy.special.ndtri`` (Cephes rational approximations, double
    precision over the open unit interval).
    """
    x = _as_2d(x)
    ranks = rankdata(x, method="average", axis=0)
    return ndtri(ranks / (x.shape[0] + 1))


def preprocess(matrix: FeatureMatrix) -> FeatureMatrix:
    """z-normalization followed by Gaussianization."""
    return matrix.with_values(gaussianize(z_normalize(matrix.values)))


# ── PCA ──────────────────────────────────────────────────────────────────────

@dataclass(frozen=True)
class PcaResult:
    components: np.ndarray          # k x m, orthonormal rows
    projections: np.ndarray         # n x k
    explained_variance: np.ndarray  # k ratios of the total variance
    eigenvalues: np.ndarray         # all m, descending
    mean: np.ndarray = field(repr=False)

    def reconstruct(self) -> np.ndarray:
        return self.projections @ self.components + self.mean


def pca(x: np.ndarray, k: int) -> PcaResult:
    """Eigendecomposition of the population covariance matrix.

    Components come in descending eigenvalue order (equal eigenvalues keep
    their index order) and each is signed so its largest-magnitude
    coordinate is positive.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2:
        raise AnalysisError("pca expects a 2-D matrix")
    n, m = x.shape
    if k < 0 or k > m:
        raise AnalysisError(f"k must be in 0..{m}, got {k}")
    if n == 0:
        raise EmptyInput("pca on an empty matrix")

    mean = x.mean(axis=0)
    centered = x - mean
    cov = centered.T @ centered / n
    eigvals, eigvecs = np.linalg.eigh(cov)
    order = np.argsort(-eigvals, kind="stable")
    eigvals = np.clip(eigvals[order], 0.0, None)
    eigvecs = eigvecs[:, order]

    trace = float(eigvals.sum())
    rank = int(np.count_nonzero(eigvals >= RANK_TOLERANCE * trace)) if trace > 0 else 0
    if k > rank:
        raise DegenerateCovariance(f"requested {k} components but the covariance has rank {rank}")

    components = eigvecs[:, :k].T.copy()
    for i, comp in enumerate(components):
        if comp[np.argmax(np.abs(comp))] < 0:
            components[i] = -comp

    explained = eigvals[:k] / trace if trace > 0 else np.zeros(k)
    return PcaResult(
        components=components,
        projections=centered @ components.T,
        explained_variance=explained,
        eigenvalues=eigvals,
        mean=mean,
    )


def numerical_rank(x: np.ndarray) -> int:
    x = np.asarray(x, dtype=np.float64)
    if x.shape[0] == 0:
        return 0
    centered = x - x.mean(axis=0)
    eigvals = np.linalg.eigvalsh(centered.T @ centered / x.shape[0])
    trace = float(np.clip(eigvals, 0.0, None).sum())
    return int(np.count_nonzero(eigvals >= RANK_TOLERANCE * trace)) if trace > 0 else 0


# ── Histograms ────────────────────────────────────────────────────────────────

@dataclass(frozen=True)
class Histogram:
    edges: np.ndarray
    counts: np.ndarray


def histogram(values: Sequence[float], num_bins: int) -> Histogram:
    """Equal-width bins over [min, max]; the max value lands in the last bin."""
    values = np.asarray(values, dtype=np.float64)
    if values.size == 0:
        raise EmptyInput("histogram of no values")
    if num_bins < 1:
        raise AnalysisError(f"num_bins must be >= 1, got {num_bins}")
    counts, edges = np.histogram(values, bins=num_bins)
    return Histogram(edges=edges, counts=counts)


def cycle_histogram(
    records: Sequence[CampaignRecord], num_bins: int, preprocessed: bool = True
) -> pd.DataFrame:
    """CYCLES of Benign and SDC runs binned once over both classes, counts split per class."""
    matrix = build_feature_matrix(records)
    if EventKind.CYCLES not in matrix.events:
        raise AnalysisError("CYCLES was not collected in this campaign")
    if preprocessed:
        matrix = preprocess(matrix)
    cycles = matrix.column(EventKind.CYCLES)
    hist = histogram(cycles, num_bins)
    labels = np.array([lbl.value for lbl in matrix.labels])
    per_class = {
        c: np.histogram(cycles[labels == c.value], bins=hist.edges)[0] for c in FEATURE_CLASSES
    }
    return pd.DataFrame({
        "bin_lo": hist.edges[:-1],
        "bin_hi": hist.edges[1:],
        "count_benign": per_class[OutcomeClass.BENIGN],
        "count_sdc": per_class[OutcomeClass.SDC],
    })


# ── Breakdown ─────────────────────────────────────────────────────────────────

def largest_remainder(counts: Sequence[int], total_units: int = 1000) -> list[int]:
    """Integer shares of ``total_units`` proportional to ``counts``, summing exactly."""
    n = sum(counts)
    exact = [c * total_units / n for c in counts]
    shares = [int(q) for q in exact]
    leftovers = sorted(range(len(counts)), key=lambda i: (-(exact[i] - shares[i]), i))
    for i in leftovers[:total_units - sum(shares)]:
        shares[i] += 1
    return shares


def _cycle_stats(records: Sequence[CampaignRecord]) -> list[CycleStats]:
    stats = []
    for c in OutcomeClass:
        cycles = np.array([r.cycles for r in records if r.outcome is c], dtype=np.float64)
        if cycles.size:
            stats.append(CycleStats(outcome=c, count=int(cycles.size),
                                    mean=float(cycles.mean()), std=float(cycles.std(ddof=0))))
        else:
            stats.append(CycleStats(outcome=c, count=0))
    return stats


def summarize(records: Sequence[CampaignRecord]) -> BreakdownReport:
    """Outcome percentages (one decimal, summing to 100.0) per benchmark x location."""
    if not records:
        raise EmptyInput("no records to summarize")
    groups: dict[tuple[str, LocationClass], list[CampaignRecord]] = defaultdict(list)
    for r in records:
        groups[(r.fault.benchmark, r.fault.target.location)].append(r)

    rows = []
    for (bench, loc), group in sorted(groups.items(), key=lambda kv: (kv[0][0], kv[0][1].value)):
        counts = [sum(1 for r in group if r.outcome is c) for c in OutcomeClass]
        benign, sdc, other = (s / 10 for s in largest_remainder(counts))
        rows.append(BreakdownRow(
            benchmark=bench, location=loc, total=len(group),
            benign_pct=benign, sdc_pct=sdc, other_pct=other,
            cycle_stats=_cycle_stats(group),
        ))
    return BreakdownReport(rows=rows)


def breakdown_frame(report: BreakdownReport) -> pd.DataFrame:
    return pd.DataFrame(
        [
            {"benchmark": r.benchmark, "location": r.location.value, "benign_pct": r.benign_pct,
             "sdc_pct": r.sdc_pct, "other_pct": r.other_pct}
            for r in report.rows
        ],
        columns=["benchmark", "location", "benign_pct", "sdc_pct", "other_pct"],
    )


# ── Service ──────────────────────────────────────────────────────────────────

@dataclass
class AnalysisOutputs:
    scatter: pd.DataFrame
    cycles: pd.DataFrame
    breakdown: BreakdownReport
    explained_variance: list[float] = field(default_factory=list)


class AnalysisService:
    def __init__(self, settings: Optional[LabSettings] = None) -> None:
        self.settings = settings or get_settings()

    def pca_scatter(self, records: Sequence[CampaignRecord]) -> tuple[pd.DataFrame, list[float]]:
        """First two principal coordinates per Benign/SDC fault (zeros past the matrix rank)."""
        matrix = preprocess(build_feature_matrix(records))
        k = min(2, numerical_rank(matrix.values))
        if k < 2:
            logger.warning("preprocessed features have rank %d; missing components reported as 0", k)
        result = pca(matrix.values, k)
        coords = np.zeros((matrix.shape[0], 2))
        coords[:, :k] = result.projections
        frame = pd.DataFrame({
            "fault_id": matrix.fault_ids,
            "outcome": [lbl.value for lbl in matrix.labels],
            "pc1": coords[:, 0],
            "pc2": coords[:, 1],
        })
        return frame, [float(v) for v in result.explained_variance]

    def analyze(
        self, store: CampaignStore, num_bins: Optional[int] = None, raw_cycles: bool = False
    ) -> AnalysisOutputs:
        records = store.load_records()
        if not records:
            raise EmptyInput(f"{store.root} holds no records")
        bins = num_bins or self.settings.hist_bins
        breakdown = summarize(records)
        store.write_csv(BREAKDOWN, breakdown_frame(breakdown))

        feature_rows = build_feature_matrix(records).shape[0]
        if feature_rows < MIN_FEATURE_ROWS:
            logger.warning(
                "%s: %d Benign/SDC rows with complete events; %s and %s left empty",
                store.root, feature_rows, PCA_SCATTER, CYCLES_HIST,
            )
            scatter = pd.DataFrame(columns=SCATTER_COLUMNS)
            cycles = pd.DataFrame(columns=HIST_COLUMNS)
            explained: list[float] = []
        else:
            scatter, explained = self.pca_scatter(records)
            cycles = cycle_histogram(records, bins, preprocessed=not raw_cycles)

        store.write_csv(PCA_SCATTER, scatter)
        store.write_csv(CYCLES_HIST, cycles)
        logger.info(
            "analysis of %s: %d feature rows, explained variance %s",
            store.root, len(scatter), ", ".join(f"{v:.3f}" for v in explained),
        )
        return AnalysisOutputs(scatter, cycles, breakdown, explained)

    def analyze_grid(
        self, root: CampaignStore, num_bins: Optional[int] = None, raw_cycles: bool = False
    ) -> BreakdownReport:
        """Analyze every sub-campaign and write one combined breakdown at the root."""
        subs = root.sub_campaigns()
        if not subs:
            raise EmptyInput(f"{root.root} contains no campaign directories")
        rows = []
        for sub in subs:
            rows.extend(self.analyze(sub, num_bins, raw_cycles).breakdown.rows)
        combined = BreakdownReport(rows=rows)
        root.write_csv(BREAKDOWN, breakdown_frame(combined))
        return combined
