"""Correlation clustering of weighted usage graphs by simulated annealing.

Edge weights are shifted by 2.5 so that "same sense" judgments become
positive and "different sense" judgments negative; a clustering is scored by
the sum of positive edge weights across clusters plus absolute negative edge
weights within clusters.  Annealing sweeps the allowed maximum cluster count
and restarts from random and heuristic initial states; the best state under
a deterministic tie-break is returned, so results depend only on the graph
and the seed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from .graph import WUG, shift

# Early-stop guard for one annealing restart: once the temperature is below
# _MIN_TEMPERATURE and the best state has not improved for _STALL_LIMIT
# proposed moves, further iterations cannot realistically help.
_MIN_TEMPERATURE = 1e-4
_STALL_LIMIT = 1000


class ClusteringError(ValueError):
    """Invalid clustering arguments (unassigned nodes, node-set mismatch)."""


@dataclass(frozen=True)
class Clustering:
    """A hard partition of graph nodes into dense integer cluster ids.

    Every node of the clustered graph is assigned: nodes connected by
    weighted edges get optimized cluster ids first, then isolated nodes
    (no weighted edge) are appended as singleton clusters and also listed
    in ``isolates``.
    """

    assignment: dict[str, int]
    loss: float
    normalized_loss: float
    isolates: tuple[str, ...] = ()

    @property
    def n_clusters(self) -> int:
        return len(set(self.assignment.values()))

    def clusters(self) -> dict[int, list[str]]:
        """Cluster id -> sorted member list."""
        out: dict[int, list[str]] = {}
        for node in sorted(self.assignment):
            out.setdefault(self.assignment[node], []).append(node)
        return out


@dataclass(frozen=True)
class AnnealConfig:
    """Annealing schedule and search-space bounds.

    ``max_clusters_range`` is an inclusive (low, high) interval for the
    maximum number of clusters; None sweeps 1..min(10, n).
    ``restarts_per_k`` counts the random restarts per interval value; one
    heuristically initialized restart is always added on top.
    """

    max_clusters_range: tuple[int, int] | None = None
    restarts_per_k: int = 5
    initial_temperature: float = 1.0
    cooling_factor: float = 0.99
    max_iterations: int = 10_000
    seed: int = 0

    def __post_init__(self) -> None:
        if self.restarts_per_k < 0:
            raise ClusteringError("restarts_per_k must be >= 0")
        if self.initial_temperature <= 0:
            raise ClusteringError("initial_temperature must be positive")
        if not 0.0 < self.cooling_factor < 1.0:
            raise ClusteringError("cooling_factor must be in (0, 1)")
        if self.max_iterations <= 0:
            raise ClusteringError("max_iterations must be positive")
        if self.max_clusters_range is not None:
            lo, hi = self.max_clusters_range
            if lo < 1 or hi < lo:
                raise ClusteringError(f"bad max_clusters_range {self.max_clusters_range}")


@dataclass(frozen=True)
class ConflictSet:
    """Edges that disagree with a clustering.

    ``positive_across``: weighted edges with shifted weight > 0 whose
    endpoints sit in different clusters; ``negative_within``: edges with
    shifted weight < 0 inside one cluster.  Edges with shifted weight 0
    contribute no loss and are never conflicts.
    """

    positive_across: tuple[tuple[str, str], ...]
    negative_within: tuple[tuple[str, str], ...]

    def __bool__(self) -> bool:
        return bool(self.positive_across or self.negative_within)


def loss(g: WUG, c: Clustering) -> float:
    """Sum of positive edge weights across clusters plus |negative| within."""
    assign = c.assignment
    total = 0.0
    for (a, b), w in g.weights.items():
        if a not in assign or b not in assign:
            missing = a if a not in assign else b
            raise ClusteringError(f"weighted node {missing!r} is not assigned")
        sw = shift(w)
        if sw > 0 and assign[a] != assign[b]:
            total += sw
        elif sw < 0 and assign[a] == assign[b]:
            total += -sw
    return total


def normalized_loss(g: WUG, c: Clustering) -> float:
    """Loss divided by the total absolute shifted weight; 0 on empty graphs."""
    denom = g.total_abs_shifted()
    if denom == 0:
        return 0.0
    return loss(g, c) / denom


def conflicts(g: WUG, c: Clustering) -> ConflictSet:
    """Enumerate positive-across and negative-within edges for a clustering."""
    assign = c.assignment
    across: list[tuple[str, str]] = []
    within: list[tuple[str, str]] = []
    for pair, w in sorted(g.weights.items()):
        a, b = pair
        if a not in assign or b not in assign:
            missing = a if a not in assign else b
            raise ClusteringError(f"weighted node {missing!r} is not assigned")
        sw = shift(w)
        if sw > 0 and assign[a] != assign[b]:
            across.append(pair)
        elif sw < 0 and assign[a] == assign[b]:
            within.append(pair)
    return ConflictSet(positive_across=tuple(across), negative_within=tuple(within))


# ---------------------------------------------------------------------------
# Annealing engine.  The inner loop consumes pregenerated random arrays, so
# results are a pure function of the numpy seed; numba only accelerates it.


def _anneal_core(indptr, indices, weights, assign, k, us, bs, ps, t0, cooling,
                 min_temp, stall_limit):
    n = assign.shape[0]
    # current loss from scratch (each edge appears twice in the CSR halves)
    cur = 0.0
    for i in range(n):
        for e in range(indptr[i], indptr[i + 1]):
            j = indices[e]
            if j <= i:
                continue
            w = weights[e]
            if w > 0.0:
                if assign[i] != assign[j]:
                    cur += w
            elif w < 0.0:
                if assign[i] == assign[j]:
                    cur -= w
    best = assign.copy()
    best_loss = cur
    t = t0
    stall = 0
    for it in range(us.shape[0]):
        u = us[it]
        b = bs[it]
        a = assign[u]
        if b != a:
            delta = 0.0
            for e in range(indptr[u], indptr[u + 1]):
                v = indices[e]
                w = weights[e]
                cv = assign[v]
                if w > 0.0:
                    if cv == a:
                        delta += w
                    elif cv == b:
                        delta -= w
                elif w < 0.0:
                    if cv == a:
                        delta += w
                    elif cv == b:
                        delta -= w
            if delta <= 0.0 or ps[it] < math.exp(-delta / t):
                assign[u] = b
                cur += delta
                if cur < best_loss - 1e-9:
                    best_loss = cur
                    best[:] = assign
                    stall = 0
                else:
                    stall += 1
            else:
                stall += 1
        else:
            stall += 1
        t *= cooling
        if t < min_temp and stall >= stall_limit:
            break
    return best


try:  # numba accelerates the loop; results are identical without it
    from numba import njit as _njit

    _anneal_core = _njit(cache=True)(_anneal_core)
except ImportError:  # pragma: no cover - exercised only without numba
    pass


def _edge_arrays(g: WUG, nodes: list[str]):
    index = {node: i for i, node in enumerate(nodes)}
    ei, ej, ew = [], [], []
    for (a, b), w in sorted(g.weights.items()):
        ei.append(index[a])
        ej.append(index[b])
        ew.append(shift(w))
    return np.array(ei, dtype=np.int64), np.array(ej, dtype=np.int64), np.array(ew)


def _csr(n: int, ei, ej, ew):
    degree = np.zeros(n, dtype=np.int64)
    for i, j in zip(ei, ej):
        degree[i] += 1
        degree[j] += 1
    indptr = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(degree, out=indptr[1:])
    indices = np.zeros(int(indptr[-1]), dtype=np.int64)
    weights = np.zeros(int(indptr[-1]))
    cursor = indptr[:-1].copy()
    for i, j, w in zip(ei, ej, ew):
        indices[cursor[i]] = j
        weights[cursor[i]] = w
        cursor[i] += 1
        indices[cursor[j]] = i
        weights[cursor[j]] = w
        cursor[j] += 1
    return indptr, indices, weights


def _loss_of(assign, ei, ej, ew) -> float:
    same = assign[ei] == assign[ej]
    pos = ew > 0
    neg = ew < 0
    return float(ew[pos & ~same].sum() - ew[neg & same].sum())


def _canonical_labels(assign: np.ndarray) -> tuple[int, ...]:
    mapping: dict[int, int] = {}
    out = []
    for c in assign.tolist():
        if c not in mapping:
            mapping[c] = len(mapping)
        out.append(mapping[c])
    return tuple(out)


def _positive_components(n: int, ei, ej, ew) -> list[int]:
    """Connected components of the subgraph of edges with shifted weight >= 0."""
    parent = list(range(n))

    def find(x: int) -> int:
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for i, j, w in zip(ei.tolist(), ej.tolist(), ew.tolist()):
        if w >= 0:
            ri, rj = find(i), find(j)
            if ri != rj:
                parent[max(ri, rj)] = min(ri, rj)
    roots = [find(i) for i in range(n)]
    labels: dict[int, int] = {}
    out = []
    for r in roots:
        if r not in labels:
            labels[r] = len(labels)
        out.append(labels[r])
    return out


def _heuristic_states(n: int, ei, ej, ew) -> list[np.ndarray]:
    """Merge positive components pairwise by strongest positive inter-weight.

    Returns one assignment per component count from the initial count down
    to 1; ``_heuristic_init`` picks the entry matching the cluster budget.
    """
    comp = _positive_components(n, ei, ej, ew)
    n_comp = max(comp) + 1
    inter = np.zeros((n_comp, n_comp))
    for i, j, w in zip(ei.tolist(), ej.tolist(), ew.tolist()):
        if w >= 0 and comp[i] != comp[j]:
            a, b = sorted((comp[i], comp[j]))
            inter[a, b] += w
    labels = list(range(n_comp))
    alive = set(labels)
    states = [np.array([comp[i] for i in range(n)], dtype=np.int64)]
    merged = {c: [c] for c in labels}
    while len(alive) > 1:
        best_pair = None
        best_w = -1.0
        for a in sorted(alive):
            for b in sorted(alive):
                if a < b and (inter[a, b] > best_w + 1e-12):
                    best_w = inter[a, b]
                    best_pair = (a, b)
        a, b = best_pair
        merged[a].extend(merged.pop(b))
        alive.remove(b)
        for c in alive:
            if c != a:
                lo, hi = sorted((a, c))
                lo_b, hi_b = sorted((b, c))
                inter[lo, hi] += inter[lo_b, hi_b]
        comp = [a if c == b else c for c in comp]
        states.append(np.array(comp, dtype=np.int64))
    return states


def _heuristic_init(states: list[np.ndarray], k: int) -> np.ndarray:
    n_comp_initial = len(states)
    target = min(k, n_comp_initial)
    state = states[n_comp_initial - target]
    # relabel into the dense range [0, k)
    mapping: dict[int, int] = {}
    out = np.zeros_like(state)
    for i, c in enumerate(state.tolist()):
        if c not in mapping:
            mapping[c] = len(mapping)
        out[i] = mapping[c]
    return out


def cluster(g: WUG, cfg: AnnealConfig | None = None) -> Clustering:
    """Cluster a graph by annealing the correlation objective.

    Deterministic per (graph, cfg.seed): restart seeds are split from the
    config seed, and ties across restarts break by lowest loss, then fewest
    clusters, then lexicographically smallest canonical label sequence, so
    the result does not depend on restart scheduling.  Graphs without any
    weighted edge get the trivial all-singletons clustering.
    """
    cfg = cfg or AnnealConfig()
    all_nodes = g.node_ids
    touched = set()
    for a, b in g.weights:
        touched.add(a)
        touched.add(b)
    nodes = sorted(touched)
    isolates = tuple(n for n in all_nodes if n not in touched)

    if not nodes:
        assignment = {node: i for i, node in enumerate(all_nodes)}
        return Clustering(assignment=assignment, loss=0.0, normalized_loss=0.0,
                          isolates=isolates)

    n = len(nodes)
    ei, ej, ew = _edge_arrays(g, nodes)
    indptr, indices, weights = _csr(n, ei, ej, ew)
    lo, hi = cfg.max_clusters_range or (1, min(10, n))
    hi = min(hi, n)
    lo = min(lo, hi)
    heuristic_states = _heuristic_states(n, ei, ej, ew)

    best: tuple[float, int, tuple[int, ...]] | None = None
    for k in range(lo, hi + 1):
        inits = [("heuristic", 0)] + [("random", r) for r in range(cfg.restarts_per_k)]
        for kind, r in inits:
            # spawn_key identifies (k, restart) uniquely: 0 = heuristic restart
            ss = np.random.SeedSequence(entropy=cfg.seed,
                                        spawn_key=(k, 0 if kind == "heuristic" else r + 1))
            rng = np.random.Generator(np.random.PCG64(ss))
            if kind == "heuristic":
                assign = _heuristic_init(heuristic_states, k)
            else:
                assign = rng.integers(0, k, size=n, dtype=np.int64)
            us = rng.integers(0, n, size=cfg.max_iterations, dtype=np.int64)
            bs = rng.integers(0, k, size=cfg.max_iterations, dtype=np.int64)
            ps = rng.random(cfg.max_iterations)
            out = _anneal_core(indptr, indices, weights, assign.copy(), k, us, bs, ps,
                               cfg.initial_temperature, cfg.cooling_factor,
                               _MIN_TEMPERATURE, _STALL_LIMIT)
            out_loss = _loss_of(out, ei, ej, ew)
            labels = _canonical_labels(out)
            candidate = (out_loss, len(set(labels)), labels)
            if best is None or candidate < best:
                best = candidate
    best_loss, _, labels = best
    assignment = {node: labels[i] for i, node in enumerate(nodes)}
    next_id = max(assignment.values()) + 1
    for node in isolates:
        assignment[node] = next_id
        next_id += 1
    c = Clustering(assignment=assignment, loss=best_loss,
                   normalized_loss=0.0, isolates=isolates)
    return Clustering(assignment=assignment, loss=best_loss,
                      normalized_loss=normalized_loss(g, c), isolates=isolates)


def cluster_accuracy(reference: Clustering, hypothesis: Clustering) -> float:
    """Fraction of nodes agreeing under the best one-to-one label matching.

    Labels of the two clusterings are matched by maximizing the matched node
    count on the contingency matrix (optimal assignment), so the measure is
    invariant under relabeling of either side.
    """
    return assignment_accuracy(reference.assignment, hypothesis.assignment)


def assignment_accuracy(reference: dict[str, int], hypothesis: dict[str, int]) -> float:
    """``cluster_accuracy`` on raw node->label maps over the same node set."""
    if reference.keys() != hypothesis.keys():
        raise ClusteringError("clusterings cover different node sets")
    if not reference:
        return 1.0
    ref_labels = sorted(set(reference.values()))
    hyp_labels = sorted(set(hypothesis.values()))
    ref_index = {c: i for i, c in enumerate(ref_labels)}
    hyp_index = {c: i for i, c in enumerate(hyp_labels)}
    table = np.zeros((len(ref_labels), len(hyp_labels)), dtype=np.int64)
    for node, rc in reference.items():
        table[ref_index[rc], hyp_index[hypothesis[node]]] += 1
    rows, cols = linear_sum_assignment(table, maximize=True)
    return float(table[rows, cols].sum()) / len(reference)
