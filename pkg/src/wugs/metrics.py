"""Agreement statistics, judgment distributions, and diachronic change scores.

Score 0 ("cannot decide") is treated as a non-judgment throughout: it is
excluded from rank correlations, from the reliability coefficient, and from
disagreement counting.
"""

from __future__ import annotations

import statistics
from collections import Counter, defaultdict
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from scipy.spatial.distance import jensenshannon
from scipy.stats import spearmanr

from .clustering import Clustering
from .graph import WUG, GraphError, Judgment


@dataclass(frozen=True)
class AgreementReport:
    """Pairwise and pooled inter-annotator agreement.

    ``pairwise_spearman`` maps each annotator pair to (rho, shared edge
    count); the weighted mean weights each rho by its shared count.  Values
    are None when undefined (no annotator pair shares two scorable edges,
    or no edge carries two judgments).
    """

    pairwise_spearman: dict[tuple[str, str], tuple[float, int]]
    weighted_mean_spearman: float | None
    krippendorff_alpha: float | None


def _scores_by_annotator(judgments: Iterable[Judgment]) -> dict[str, dict[tuple[str, str], float]]:
    per: dict[str, dict[tuple[str, str], list[int]]] = defaultdict(lambda: defaultdict(list))
    for j in judgments:
        if j.score != 0:
            per[j.annotator][j.pair].append(j.score)
    # an annotator rarely scores one pair twice (separate rounds); collapse by median
    return {
        ann: {pair: float(statistics.median(scores)) for pair, scores in pairs.items()}
        for ann, pairs in per.items()
    }


def pairwise_spearman(
    judgments: Iterable[Judgment],
) -> tuple[dict[tuple[str, str], tuple[float, int]], float | None]:
    """Spearman's rho per annotator pair over shared non-zero-judged edges.

    Ties get average ranks.  Pairs sharing fewer than two edges, or whose
    shared scores are constant for either annotator (rho undefined), are
    excluded.  Returns the per-pair map and the shared-count-weighted mean.
    """
    per = _scores_by_annotator(judgments)
    annotators = sorted(per)
    table: dict[tuple[str, str], tuple[float, int]] = {}
    for i, a in enumerate(annotators):
        for b in annotators[i + 1:]:
            shared = sorted(set(per[a]) & set(per[b]))
            if len(shared) < 2:
                continue
            xs = [per[a][p] for p in shared]
            ys = [per[b][p] for p in shared]
            if len(set(xs)) < 2 or len(set(ys)) < 2:
                continue  # constant scores: rank correlation undefined
            rho = spearmanr(xs, ys).statistic
            if np.isnan(rho):
                continue
            table[(a, b)] = (float(rho), len(shared))
    if not table:
        return table, None
    total = sum(n for _, n in table.values())
    mean = sum(rho * n for rho, n in table.values()) / total
    return table, mean


def krippendorff_alpha(judgments: Iterable[Judgment]) -> float | None:
    """Krippendorff's alpha with the interval metric on scores 1-4.

    Units are node pairs; 0 scores are dropped before anything else.  The
    coincidence matrix is built over units carrying at least two scores;
    with no such unit the coefficient is undefined and None is returned.
    """
    by_unit: dict[tuple[str, str], list[int]] = defaultdict(list)
    for j in judgments:
        if j.score != 0:
            by_unit[j.pair].append(j.score)
    units = [vs for vs in by_unit.values() if len(vs) >= 2]
    if not units:
        return None
    cats = sorted({v for vs in units for v in vs})
    index = {c: i for i, c in enumerate(cats)}
    o = np.zeros((len(cats), len(cats)))
    for vs in units:
        m = len(vs)
        counts = Counter(vs)
        for c, nc in counts.items():
            for k, nk in counts.items():
                o[index[c], index[k]] += nc * (nk - (c == k)) / (m - 1)
    n_c = o.sum(axis=1)
    n = o.sum()
    diffs = np.array(cats, dtype=float)
    delta2 = (diffs[:, None] - diffs[None, :]) ** 2
    d_o = float((o * delta2).sum())
    d_e = float((np.outer(n_c, n_c) * delta2).sum()) / float(n - 1)
    if d_e == 0.0:
        return 1.0
    return float(1.0 - d_o / d_e)


def agreement_report(judgments: Iterable[Judgment]) -> AgreementReport:
    judgments = list(judgments)
    table, mean = pairwise_spearman(judgments)
    return AgreementReport(
        pairwise_spearman=table,
        weighted_mean_spearman=mean,
        krippendorff_alpha=krippendorff_alpha(judgments),
    )


def disagreement_histogram(judgments: Iterable[Judgment]) -> dict[int, float]:
    """Distribution of |score difference| on edges with exactly two non-zero
    judgments, over bins 0-3.  All-zero when no such edge exists."""
    by_unit: dict[tuple[str, str], list[int]] = defaultdict(list)
    for j in judgments:
        if j.score != 0:
            by_unit[j.pair].append(j.score)
    diffs = [abs(vs[0] - vs[1]) for vs in by_unit.values() if len(vs) == 2]
    hist = {d: 0.0 for d in range(4)}
    if not diffs:
        return hist
    for d in diffs:
        hist[d] += 1
    return {d: c / len(diffs) for d, c in hist.items()}


def judgment_frequencies(
    judgments: Iterable[Judgment],
) -> tuple[dict[int, int], dict[int, float]]:
    """Exact counts and proportions of each score 0-4."""
    counts = {s: 0 for s in range(5)}
    for j in judgments:
        counts[j.score] += 1
    total = sum(counts.values())
    if total == 0:
        return counts, {s: 0.0 for s in counts}
    return counts, {s: c / total for s, c in counts.items()}


def _clustered_usage_ids(g: WUG, clustering: Clustering) -> list[str]:
    isolated = set(clustering.isolates)
    return [uid for uid in sorted(g.usages) if uid in clustering.assignment and uid not in isolated]


def _non_isolate_cluster_ids(g: WUG, clustering: Clustering) -> list[int]:
    return sorted({clustering.assignment[uid] for uid in _clustered_usage_ids(g, clustering)}
                  | {clustering.assignment[sid] for sid in g.senses
                     if sid in clustering.assignment and sid not in set(clustering.isolates)})


def cluster_frequency_dist(g: WUG, clustering: Clustering, grouping: int) -> tuple[int, ...]:
    """Count one period's clustered usages per full-graph cluster.

    The vector is indexed over the clusters that contain at least one
    non-isolated node (isolate singletons are not senses and not counted).
    """
    if grouping not in g.groupings:
        raise GraphError(f"unknown grouping {grouping!r}")
    cluster_ids = _non_isolate_cluster_ids(g, clustering)
    position = {c: i for i, c in enumerate(cluster_ids)}
    vector = [0] * len(cluster_ids)
    for uid in _clustered_usage_ids(g, clustering):
        if g.usages[uid].grouping == grouping:
            vector[position[clustering.assignment[uid]]] += 1
    return tuple(vector)


def _two_period_vectors(
    g: WUG, clustering: Clustering
) -> tuple[tuple[int, ...], tuple[int, ...]] | None:
    periods = sorted(g.groupings)
    if len(periods) != 2:
        raise GraphError(f"expected exactly two periods, found {periods}")
    v1 = cluster_frequency_dist(g, clustering, periods[0])
    v2 = cluster_frequency_dist(g, clustering, periods[1])
    if sum(v1) == 0 or sum(v2) == 0:
        return None
    return v1, v2


def graded_change(g: WUG, clustering: Clustering) -> float | None:
    """Jensen-Shannon distance (base 2) between the two periods' normalized
    cluster frequency distributions; None when a period has no clustered
    usage.  0 for identical distributions, 1 for disjoint supports."""
    vectors = _two_period_vectors(g, clustering)
    if vectors is None:
        return None
    v1, v2 = vectors
    p = np.array(v1, dtype=float) / sum(v1)
    q = np.array(v2, dtype=float) / sum(v2)
    if np.array_equal(p, q):
        return 0.0
    if not np.any((p > 0) & (q > 0)):
        return 1.0
    return float(min(1.0, jensenshannon(p, q, base=2)))


def binary_change(g: WUG, clustering: Clustering, k: int = 2, n: int = 0) -> bool | None:
    """True iff some cluster is attested at least ``k`` times in one period
    and at most ``n`` times in the other (a gained or lost sense)."""
    vectors = _two_period_vectors(g, clustering)
    if vectors is None:
        return None
    v1, v2 = vectors
    return any((a >= k and b <= n) or (b >= k and a <= n) for a, b in zip(v1, v2))


@dataclass(frozen=True)
class ChangeScores:
    """Per-period cluster frequencies plus graded and binary change values."""

    freq_dist: dict[int, tuple[int, ...]]
    graded: float | None
    binary: bool | None
    k: int
    n: int


def change_scores(g: WUG, clustering: Clustering, k: int = 2, n: int = 0) -> ChangeScores:
    periods = sorted(g.groupings)
    freq = {p: cluster_frequency_dist(g, clustering, p) for p in periods}
    return ChangeScores(
        freq_dist=freq,
        graded=graded_change(g, clustering),
        binary=binary_change(g, clustering, k=k, n=n),
        k=k,
        n=n,
    )
