"""Weighted usage graphs.

Nodes are word usages (plus optional sense descriptions for usage-sense
graphs); an edge aggregates the human relatedness judgments collected on a
node pair.  The edge weight is the median of the pair's non-zero judgments;
an edge whose judgments are all 0 ("cannot decide") is kept structurally but
carries no weight and is invisible to clustering.

Graphs are values: every operation returns a new graph and never mutates its
input, so instances can be shared freely across threads.
"""

from __future__ import annotations

import statistics
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Mapping

SCALE_LABELS: dict[int, str] = {
    4: "Identical",
    3: "Closely Related",
    2: "Distantly Related",
    1: "Unrelated",
    0: "Cannot decide",
}

# Weights >= 2.5 mean "same sense" (positive edge), < 2.5 "different sense".
WEIGHT_MIDPOINT = 2.5

# Graph identifiers of sense nodes carry this prefix; raw sense ids are what
# the senses.tsv schema stores.
SENSE_PREFIX = "sense:"


class GraphError(ValueError):
    """Ill-formed nodes, judgments, or graph queries."""


def canonical_pair(a: str, b: str) -> tuple[str, str]:
    """Order a node pair lexicographically; self-pairs are rejected."""
    if a == b:
        raise GraphError(f"self-pair not allowed: {a!r}")
    return (a, b) if a < b else (b, a)


def shift(weight: float) -> float:
    """Map an edge weight in [1, 4] to its signed offset from 2.5.

    4 maps to 1.5 and 1 to -1.5; the midpoint 2.5 maps to 0.0 and still
    counts as a positive edge.
    """
    if not 1.0 <= weight <= 4.0:
        raise GraphError(f"weight {weight} outside [1, 4]")
    return weight - WEIGHT_MIDPOINT


@dataclass(frozen=True)
class Usage:
    """One occurrence of a target word in context, tagged with a time period.

    ``target_span`` is a half-open character range [start, end) into
    ``context`` marking the target token.
    """

    identifier: str
    lemma: str
    pos: str
    grouping: int
    context: str
    target_span: tuple[int, int]
    date: int | None = None

    def __post_init__(self) -> None:
        if not self.identifier:
            raise GraphError("usage identifier must be non-empty")
        start, end = self.target_span
        if not (0 <= start < end <= len(self.context)):
            raise GraphError(
                f"usage {self.identifier!r}: target_span {self.target_span} "
                f"outside context bounds [0, {len(self.context)})"
            )


@dataclass(frozen=True)
class SenseDescription:
    """A dictionary sense a usage can be judged against."""

    sense_id: str
    lemma: str
    definition: str

    @property
    def identifier(self) -> str:
        """Graph node identifier (prefixed to stay disjoint from usage ids)."""
        return SENSE_PREFIX + self.sense_id


@dataclass(frozen=True)
class Judgment:
    """One annotator's relatedness score on a node pair.

    Scores follow the 0-4 relatedness scale (see ``SCALE_LABELS``); 0 means
    the annotator could not decide.  The pair is stored in canonical
    (lexicographic) order regardless of input order.
    """

    node1: str
    node2: str
    annotator: str
    score: int
    comment: str = ""
    round: int = 1

    def __post_init__(self) -> None:
        if self.score not in (0, 1, 2, 3, 4):
            raise GraphError(f"score {self.score!r} outside the 0-4 scale")
        if self.round < 1:
            raise GraphError(f"round must be >= 1, got {self.round}")
        a, b = canonical_pair(self.node1, self.node2)
        object.__setattr__(self, "node1", a)
        object.__setattr__(self, "node2", b)

    @property
    def pair(self) -> tuple[str, str]:
        return (self.node1, self.node2)


def edge_weight(scores: Iterable[int]) -> float | None:
    """Median of the non-zero scores, or None if all scores are 0.

    Medians of even-sized multisets take the midpoint of the two central
    values, so weights move in 0.5 steps.
    """
    nonzero = [s for s in scores if s != 0]
    if not nonzero:
        return None
    return float(statistics.median(nonzero))


@dataclass(frozen=True)
class WUG:
    """Weighted undirected graph over usages (and senses, for USGs).

    ``judgments`` maps each canonical annotated pair to its judgment tuple;
    ``weights`` holds the median weight for the subset of pairs with at
    least one non-zero judgment.  Treat instances as immutable.
    """

    usages: dict[str, Usage]
    senses: dict[str, SenseDescription] = field(default_factory=dict)
    judgments: dict[tuple[str, str], tuple[Judgment, ...]] = field(default_factory=dict)
    weights: dict[tuple[str, str], float] = field(default_factory=dict)

    @property
    def node_ids(self) -> list[str]:
        return sorted(self.usages) + sorted(self.senses)

    @property
    def groupings(self) -> set[int]:
        return {u.grouping for u in self.usages.values()}

    def is_sense(self, node_id: str) -> bool:
        return node_id in self.senses

    def weight(self, a: str, b: str) -> float | None:
        return self.weights.get(canonical_pair(a, b))

    def shifted_weight(self, a: str, b: str) -> float | None:
        w = self.weight(a, b)
        return None if w is None else shift(w)

    def weighted_edges(self) -> Iterator[tuple[tuple[str, str], float]]:
        """Iterate (canonical pair, median weight) in sorted pair order."""
        for pair in sorted(self.weights):
            yield pair, self.weights[pair]

    def annotated_neighbors(self, node_id: str) -> set[str]:
        """Nodes linked to ``node_id`` by any annotated edge (weighted or not)."""
        out = set()
        for a, b in self.judgments:
            if a == node_id:
                out.add(b)
            elif b == node_id:
                out.add(a)
        return out

    def scores_on(self, a: str, b: str) -> list[int]:
        return [j.score for j in self.judgments.get(canonical_pair(a, b), ())]

    def total_abs_shifted(self) -> float:
        """Sum of |shifted weight| over all weighted edges."""
        return sum(abs(shift(w)) for w in self.weights.values())


def build_wug(
    usages: Iterable[Usage],
    judgments: Iterable[Judgment],
    senses: Iterable[SenseDescription] = (),
) -> WUG:
    """Assemble a graph from usages, optional senses, and judgments.

    Rejects duplicate node identifiers, judgments on unknown nodes, and
    (when senses are present) usage-usage or sense-sense edges: a graph
    with senses is bipartite between usages and senses.
    """
    usage_map: dict[str, Usage] = {}
    for u in usages:
        if u.identifier in usage_map:
            raise GraphError(f"duplicated usage identifier {u.identifier!r}")
        usage_map[u.identifier] = u
    sense_map: dict[str, SenseDescription] = {}
    for s in senses:
        node_id = s.identifier
        if node_id in sense_map or node_id in usage_map:
            raise GraphError(f"duplicated node identifier {node_id!r}")
        sense_map[node_id] = s

    by_pair: dict[tuple[str, str], list[Judgment]] = {}
    for j in judgments:
        for node in (j.node1, j.node2):
            if node not in usage_map and node not in sense_map:
                raise GraphError(f"judgment references unknown node {node!r}")
        if sense_map:
            kinds = (j.node1 in sense_map) + (j.node2 in sense_map)
            if kinds != 1:
                raise GraphError(
                    f"edge ({j.node1!r}, {j.node2!r}) is not a usage-sense pair"
                )
        by_pair.setdefault(j.pair, []).append(j)

    judgment_map = {pair: tuple(js) for pair, js in by_pair.items()}
    weight_map: dict[tuple[str, str], float] = {}
    for pair, js in judgment_map.items():
        w = edge_weight(j.score for j in js)
        if w is not None:
            weight_map[pair] = w
    return WUG(usages=usage_map, senses=sense_map, judgments=judgment_map, weights=weight_map)


def _drop_nodes(g: WUG, doomed: set[str]) -> WUG:
    usages = {k: v for k, v in g.usages.items() if k not in doomed}
    senses = {k: v for k, v in g.senses.items() if k not in doomed}
    judgments = {
        pair: js
        for pair, js in g.judgments.items()
        if pair[0] not in doomed and pair[1] not in doomed
    }
    weights = {pair: w for pair, w in g.weights.items() if pair in judgments}
    return WUG(usages=usages, senses=senses, judgments=judgments, weights=weights)


def filter_zero_nodes(g: WUG) -> tuple[WUG, list[str]]:
    """Drop nodes whose 0-judgments form a strict majority of their judgments.

    A judgment counts toward both endpoints of its edge.  Removal repeats
    until no node qualifies (dropping a node changes its neighbors' counts),
    which makes the operation idempotent.  Returns the filtered graph and
    the removed identifiers in removal order.
    """
    current = g
    removed: list[str] = []
    while True:
        zero: dict[str, int] = {}
        total: dict[str, int] = {}
        for pair, js in current.judgments.items():
            for j in js:
                for node in pair:
                    total[node] = total.get(node, 0) + 1
                    if j.score == 0:
                        zero[node] = zero.get(node, 0) + 1
        doomed = sorted(
            node for node, t in total.items() if zero.get(node, 0) * 2 > t
        )
        if not doomed:
            return current, removed
        removed.extend(doomed)
        current = _drop_nodes(current, set(doomed))


def subgraph_by_period(g: WUG, grouping: int) -> WUG:
    """Restrict to usages of one time period (sense nodes are always kept)."""
    if grouping not in g.groupings:
        raise GraphError(f"unknown grouping {grouping!r}")
    keep = {uid for uid, u in g.usages.items() if u.grouping == grouping}
    keep |= set(g.senses)
    doomed = set(g.node_ids) - keep
    return _drop_nodes(g, doomed)


def build_usg_pairs(
    usages: Iterable[Usage], senses: Iterable[SenseDescription]
) -> list[tuple[str, str]]:
    """Full bipartite usage-sense pair set: n usages x k senses, no duplicates.

    Pairs are canonical and the list is sorted, so the output is a stable
    function of its inputs.
    """
    usage_ids = sorted({u.identifier for u in usages})
    sense_ids = sorted({s.identifier for s in senses})
    if not sense_ids:
        raise GraphError("at least one sense description is required")
    return sorted(canonical_pair(u, s) for u in usage_ids for s in sense_ids)
