"""Round-based edge sampling: which pairs do annotators judge next.

Round 1 walks a random subset of usages; later rounds combine unassigned
usages against the inferred multi-clusters, explore among non-assignable
usages, corroborate the structure, redistribute disagreements, and resample
around clustering conflicts.  All operations are pure functions of their
inputs and an explicit RNG, emit canonical pairs only, and never emit a
self-pair.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from itertools import combinations
from typing import Iterable, Sequence

import numpy as np

from .clustering import Clustering, conflicts
from .graph import WUG, Usage, canonical_pair, edge_weight

log = logging.getLogger(__name__)

Pair = tuple[str, str]

# How close an edge median must be to the 2.5 decision boundary to count as
# a disagreement worth redistributing.  0.25 captures exactly the 2.5
# medians under the 0.5-step median grid.
MEDIAN_BOUNDARY_EPSILON = 0.25


@dataclass(frozen=True)
class SamplingConfig:
    """Sampling fractions and the double-annotation share.

    ``node_fraction_round1`` and ``edge_fraction`` must lie in (0, 1];
    ``multi_annotation_fraction`` may be 0 for single-annotator projects.
    """

    node_fraction_round1: float = 0.10
    edge_fraction: float = 0.30
    corroboration_count: int = 0
    multi_annotation_fraction: float = 0.5
    seed: int = 0

    def __post_init__(self) -> None:
        for name in ("node_fraction_round1", "edge_fraction"):
            value = getattr(self, name)
            if not 0.0 < value <= 1.0:
                raise ValueError(f"{name} must be in (0, 1], got {value}")
        if not 0.0 <= self.multi_annotation_fraction <= 1.0:
            raise ValueError("multi_annotation_fraction must be in [0, 1]")
        if self.corroboration_count < 0:
            raise ValueError("corroboration_count must be >= 0")


@dataclass(frozen=True)
class AnnotationBatch:
    """The pairs scheduled for one annotation round.

    ``provenance`` tags each pair with the heuristic that proposed it
    (exploration | combination | corroboration | disagreement | conflict);
    ``assignments`` maps each pair to the annotators asked to judge it
    (empty tuples when no roster was supplied).
    """

    round: int
    pairs: tuple[Pair, ...]
    provenance: dict[Pair, str] = field(default_factory=dict)
    assignments: dict[Pair, tuple[str, ...]] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if len(set(self.pairs)) != len(self.pairs):
            raise ValueError("batch contains duplicate pairs")

    def by_provenance(self, tag: str) -> list[Pair]:
        return [p for p in self.pairs if self.provenance.get(p) == tag]


@dataclass(frozen=True)
class RoundState:
    """What is known after clustering a round's graph.

    ``multi_clusters`` are the cluster ids holding at least two usages;
    ``unassigned`` usages sit in no multi-cluster; the ``non_assignable``
    subset has already been compared to every multi-cluster (at least one
    annotated edge to a member of each) without being placed in one.
    """

    round: int
    graph: WUG
    clustering: Clustering
    multi_clusters: frozenset[int]
    unassigned: tuple[str, ...]
    non_assignable: tuple[str, ...]

    @classmethod
    def from_graph(cls, round: int, graph: WUG, clustering: Clustering) -> "RoundState":
        members: dict[int, list[str]] = {}
        for uid in sorted(graph.usages):
            cid = clustering.assignment.get(uid)
            if cid is not None:
                members.setdefault(cid, []).append(uid)
        multi = frozenset(cid for cid, ms in members.items() if len(ms) >= 2)
        in_multi = {uid for cid in multi for uid in members[cid]}
        unassigned = tuple(uid for uid in sorted(graph.usages) if uid not in in_multi)
        neighbor_map = _annotated_adjacency(graph)
        non_assignable = tuple(
            uid for uid in unassigned
            if all(neighbor_map.get(uid, set()) & set(members[cid]) for cid in multi)
        )
        return cls(round=round, graph=graph, clustering=clustering,
                   multi_clusters=multi, unassigned=unassigned,
                   non_assignable=non_assignable)

    def multi_cluster_members(self) -> dict[int, list[str]]:
        members: dict[int, list[str]] = {cid: [] for cid in self.multi_clusters}
        for uid in sorted(self.graph.usages):
            cid = self.clustering.assignment.get(uid)
            if cid in members:
                members[cid].append(uid)
        return members


def _annotated_adjacency(g: WUG) -> dict[str, set[str]]:
    adj: dict[str, set[str]] = {}
    for a, b in g.judgments:
        adj.setdefault(a, set()).add(b)
        adj.setdefault(b, set()).add(a)
    return adj


def _walk_pairs(nodes: Sequence[str], edge_fraction: float,
                rng: np.random.Generator) -> list[Pair]:
    """Random walk over the complete graph on ``nodes`` emitting distinct
    edges until the budget is met.

    The next step prefers unvisited nodes, so the emitted edges always span
    the node set.  Budget: ceil(edge_fraction * m) over the m possible
    edges, raised to n-1 when the fraction alone could not span.
    """
    nodes = sorted(nodes)
    s = len(nodes)
    if s < 2:
        return []
    m = s * (s - 1) // 2
    budget = min(m, max(math.ceil(edge_fraction * m), s - 1))
    emitted: set[Pair] = set()
    current = nodes[int(rng.integers(s))]
    visited = {current}
    while len(emitted) < budget:
        unvisited = [v for v in nodes if v not in visited]
        if unvisited:
            nxt = unvisited[int(rng.integers(len(unvisited)))]
        else:
            others = [v for v in nodes if v != current]
            nxt = others[int(rng.integers(len(others)))]
        emitted.add(canonical_pair(current, nxt))
        visited.add(nxt)
        current = nxt
    return sorted(emitted)


def _assign_annotators(
    pairs: Sequence[Pair],
    provenance: dict[Pair, str],
    annotators: Sequence[str],
    fraction: float,
    rng: np.random.Generator,
    prior: dict[Pair, set[str]] | None = None,
) -> tuple[dict[Pair, tuple[str, ...]], list[Pair]]:
    """One annotator per pair, a ``fraction`` share with a second one.

    Disagreement pairs draw only from annotators who have not judged them
    and never get a second assignee; a disagreement pair with no fresh
    annotator left is dropped (returned in the skip list) with a warning.
    """
    prior = prior or {}
    annotators = sorted(annotators)
    if not annotators:
        return {p: () for p in pairs}, []
    assignments: dict[Pair, tuple[str, ...]] = {}
    skipped: list[Pair] = []
    doublable: list[Pair] = []
    for pair in pairs:
        if provenance.get(pair) == "disagreement":
            eligible = [a for a in annotators if a not in prior.get(pair, set())]
            if not eligible:
                log.warning("disagreement pair %s skipped: every annotator already judged it", pair)
                skipped.append(pair)
                continue
        else:
            eligible = annotators
            if len(annotators) >= 2:
                doublable.append(pair)
        assignments[pair] = (eligible[int(rng.integers(len(eligible)))],)
    n_double = round(fraction * len(doublable))
    if n_double:
        chosen = rng.choice(len(doublable), size=n_double, replace=False)
        for idx in sorted(int(i) for i in chosen):
            pair = doublable[idx]
            first = assignments[pair][0]
            rest = [a for a in annotators if a != first]
            second = rest[int(rng.integers(len(rest)))]
            assignments[pair] = (first, second)
    return assignments, skipped


def round1_sample(
    usages: Iterable[Usage],
    cfg: SamplingConfig,
    annotators: Sequence[str] = (),
) -> AnnotationBatch:
    """Sample the first round: a spanning random walk over a node subset.

    Selects ceil(node_fraction * n) usages (at least 2) and emits
    ceil(edge_fraction * m) distinct connected edges of their complete
    subgraph.  Deterministic per cfg.seed.
    """
    ids = sorted(u.identifier for u in usages)
    if len(ids) < 2:
        raise ValueError("round 1 needs at least 2 usages")
    rng = np.random.Generator(np.random.PCG64(
        np.random.SeedSequence(entropy=cfg.seed, spawn_key=(1,))))
    n_nodes = min(len(ids), max(2, math.ceil(cfg.node_fraction_round1 * len(ids))))
    picked = rng.choice(len(ids), size=n_nodes, replace=False)
    selected = sorted(ids[int(i)] for i in picked)
    pairs = _walk_pairs(selected, cfg.edge_fraction, rng)
    provenance = {p: "exploration" for p in pairs}
    assignments, _ = _assign_annotators(pairs, provenance, annotators,
                                        cfg.multi_annotation_fraction, rng)
    return AnnotationBatch(round=1, pairs=tuple(pairs), provenance=provenance,
                           assignments=assignments)


def combination_step(state: RoundState, rng: np.random.Generator) -> list[Pair]:
    """Pair every unassigned usage with one random member of each
    multi-cluster it has not been compared to yet."""
    members = state.multi_cluster_members()
    neighbor_map = _annotated_adjacency(state.graph)
    pairs: list[Pair] = []
    for uid in state.unassigned:
        neighbors = neighbor_map.get(uid, set())
        for cid in sorted(state.multi_clusters):
            ms = members[cid]
            if neighbors & set(ms):
                continue
            partner = ms[int(rng.integers(len(ms)))]
            pairs.append(canonical_pair(uid, partner))
    return pairs


def exploration_step(state: RoundState, cfg: SamplingConfig,
                     rng: np.random.Generator) -> list[Pair]:
    """Spanning random walk restricted to the non-assignable usages; empty
    when fewer than two exist."""
    if len(state.non_assignable) < 2:
        return []
    return _walk_pairs(state.non_assignable, cfg.edge_fraction, rng)


def corroboration_sample(state: RoundState, cfg: SamplingConfig,
                         rng: np.random.Generator) -> list[Pair]:
    """Random unannotated pairs plus one unannotated pair between every two
    multi-clusters; empty when the graph is fully annotated."""
    g = state.graph
    usage_ids = sorted(g.usages)
    unannotated = [p for p in combinations(usage_ids, 2) if p not in g.judgments]
    if not unannotated:
        return []
    chosen: set[Pair] = set()
    if cfg.corroboration_count:
        size = min(cfg.corroboration_count, len(unannotated))
        for idx in rng.choice(len(unannotated), size=size, replace=False):
            chosen.add(unannotated[int(idx)])
    members = state.multi_cluster_members()
    for c1, c2 in combinations(sorted(state.multi_clusters), 2):
        side1, side2 = set(members[c1]), set(members[c2])
        candidates = [p for p in unannotated
                      if (p[0] in side1 and p[1] in side2)
                      or (p[0] in side2 and p[1] in side1)]
        if candidates:
            chosen.add(candidates[int(rng.integers(len(candidates)))])
    return sorted(chosen)


def disagreement_edges(g: WUG) -> list[Pair]:
    """Edges whose non-zero scores differ by >= 2 or whose median sits at
    the 2.5 decision boundary (within 0.25)."""
    flagged = []
    for pair, js in g.judgments.items():
        scores = [j.score for j in js if j.score != 0]
        if not scores:
            continue
        spread = len(scores) >= 2 and max(scores) - min(scores) >= 2
        w = edge_weight(scores)
        boundary = w is not None and abs(w - 2.5) <= MEDIAN_BOUNDARY_EPSILON
        if spread or boundary:
            flagged.append(pair)
    return sorted(flagged)


def conflict_resample(state: RoundState, rng: np.random.Generator) -> list[Pair]:
    """One fresh unannotated pair per endpoint of every conflicting edge.

    Partners are drawn uniformly from the usages not yet annotated with the
    endpoint; duplicates collapse.  Usage-sense graphs are skipped (their
    edge set is fixed to the bipartite grid).
    """
    g = state.graph
    if g.senses:
        return []
    conflict_set = conflicts(g, state.clustering)
    edges = sorted(set(conflict_set.positive_across) | set(conflict_set.negative_within))
    if not edges:
        return []
    neighbor_map = _annotated_adjacency(g)
    usage_ids = sorted(g.usages)
    emitted: set[Pair] = set()
    for edge in edges:
        for endpoint in edge:
            taken = neighbor_map.get(endpoint, set())
            candidates = [u for u in usage_ids if u != endpoint and u not in taken]
            if not candidates:
                continue
            partner = candidates[int(rng.integers(len(candidates)))]
            emitted.add(canonical_pair(endpoint, partner))
    return sorted(emitted)


def multi_clusters_all_compared(state: RoundState) -> bool:
    """True when every pair of multi-clusters is linked by >= 1 annotated edge."""
    members = state.multi_cluster_members()
    neighbor_map = _annotated_adjacency(state.graph)
    for c1, c2 in combinations(sorted(state.multi_clusters), 2):
        side2 = set(members[c2])
        if not any(neighbor_map.get(u, set()) & side2 for u in members[c1]):
            return False
    return True


def next_round(state: RoundState, annotators: Sequence[str],
               cfg: SamplingConfig) -> AnnotationBatch:
    """Assemble the next round's batch from all sampling heuristics.

    Pairs proposed by several heuristics keep the first tag in the order
    combination, exploration, corroboration, disagreement, conflict.  Each
    pair gets one annotator; a ``multi_annotation_fraction`` share of the
    non-disagreement pairs gets a second.  Deterministic per (state.round,
    cfg.seed).
    """
    if state.round < 1:
        raise ValueError("next_round applies from round 2 on; run round1_sample first")
    rng = np.random.Generator(np.random.PCG64(
        np.random.SeedSequence(entropy=cfg.seed, spawn_key=(state.round + 1,))))
    parts = [
        ("combination", combination_step(state, rng)),
        ("exploration", exploration_step(state, cfg, rng)),
        ("corroboration", corroboration_sample(state, cfg, rng)),
        ("disagreement", disagreement_edges(state.graph)),
        ("conflict", conflict_resample(state, rng)),
    ]
    provenance: dict[Pair, str] = {}
    ordered: list[Pair] = []
    for tag, pairs in parts:
        for pair in pairs:
            if pair not in provenance:
                provenance[pair] = tag
                ordered.append(pair)
    prior = {
        pair: {j.annotator for j in state.graph.judgments.get(pair, ())}
        for pair in ordered
        if provenance[pair] == "disagreement"
    }
    assignments, skipped = _assign_annotators(
        ordered, provenance, annotators, cfg.multi_annotation_fraction, rng, prior)
    kept = tuple(p for p in ordered if p not in set(skipped))
    provenance = {p: provenance[p] for p in kept}
    return AnnotationBatch(round=state.round + 1, pairs=kept,
                           provenance=provenance, assignments=assignments)


def word_flags(g: WUG, next_batch: AnnotationBatch | None = None,
               zero_share_threshold: float = 0.2,
               pair_budget: int = 500) -> list[str]:
    """Report reasons a whole word may deserve removal from annotation.

    Flags a high share of 0 judgments and a next batch that blows past the
    pair budget.  Reports only; never deletes data.
    """
    reasons = []
    total = sum(len(js) for js in g.judgments.values())
    zeros = sum(1 for js in g.judgments.values() for j in js if j.score == 0)
    if total and zeros / total > zero_share_threshold:
        reasons.append(
            f"zero-judgment share {zeros / total:.0%} exceeds {zero_share_threshold:.0%}")
    if next_batch is not None and len(next_batch.pairs) > pair_budget:
        reasons.append(
            f"next batch ({len(next_batch.pairs)} pairs) exceeds budget {pair_budget}")
    return reasons
