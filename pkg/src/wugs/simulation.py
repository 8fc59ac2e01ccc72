"""Synthetic ground truth, noisy annotator models, whole-pipeline simulation,
and the perturbation-robustness experiment.

A planted graph fixes a true sense per usage and a true proximity per pair
(3-4 within a sense, 1-2 across senses, mirroring the proximity continuum
behind the judgment scale).  Simulated annotators report the true proximity
subject to a simple error model.  Everything is reproducible per seed, and
per-trial seeds are split from the experiment seed so results do not depend
on execution order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from itertools import combinations
from typing import Sequence

import numpy as np

from .clustering import AnnealConfig, Clustering, ClusteringError, assignment_accuracy, cluster
from .graph import WUG, Judgment, Usage, build_wug, canonical_pair, filter_zero_nodes
from .sampling import (
    AnnotationBatch,
    RoundState,
    SamplingConfig,
    multi_clusters_all_compared,
    next_round,
    round1_sample,
)


@dataclass(frozen=True)
class PlantedGraph:
    """Ground-truth fixture: usages with periods, senses, and proximities."""

    usages: tuple[Usage, ...]
    true_clusters: dict[str, int]
    true_proximity: dict[tuple[str, str], int]

    @property
    def usage_ids(self) -> list[str]:
        return sorted(u.identifier for u in self.usages)


@dataclass(frozen=True)
class NoiseModel:
    """Annotator error model: deviate by one scale point or bail out with 0."""

    p_deviate: float = 0.0
    p_zero: float = 0.0
    seed: int = 0

    def __post_init__(self) -> None:
        if not (0.0 <= self.p_deviate <= 1.0 and 0.0 <= self.p_zero <= 1.0):
            raise ValueError("noise probabilities must be in [0, 1]")
        if self.p_deviate + self.p_zero > 1.0:
            raise ValueError("p_deviate + p_zero must not exceed 1")


@dataclass(frozen=True)
class RoundRecord:
    round: int
    batch_pairs: int
    total_pairs: int
    total_judgments: int
    n_clusters: int
    n_multi_clusters: int
    accuracy: float
    loss: float
    normalized_loss: float
    removed_nodes: tuple[str, ...]


@dataclass(frozen=True)
class SimReport:
    """Round-by-round progression of a simulated annotation pipeline."""

    rounds: tuple[RoundRecord, ...]
    stopped_round: int | None
    possible_pairs: int

    @property
    def final_accuracy(self) -> float:
        return self.rounds[-1].accuracy if self.rounds else 0.0

    @property
    def total_pairs(self) -> int:
        return self.rounds[-1].total_pairs if self.rounds else 0


@dataclass(frozen=True)
class RobustnessCurve:
    """Mean cluster accuracy (with bootstrap CI) per perturbation fraction."""

    fractions: tuple[float, ...]
    mean_accuracy: tuple[float, ...]
    ci_low: tuple[float, ...]
    ci_high: tuple[float, ...]
    trials: int
    samples: tuple[tuple[float, ...], ...] = ()


def generate_planted_graph(
    n_usages: int,
    n_senses: int,
    period_split: float = 0.5,
    seed: int = 0,
    lemma: str = "target",
) -> PlantedGraph:
    """Generate usages with balanced senses and a two-period split.

    True proximities are drawn uniformly from {3, 4} within a sense and
    {1, 2} across senses.  Deterministic per seed.
    """
    if n_senses < 1:
        raise ValueError("need at least one sense")
    if n_usages < n_senses:
        raise ValueError(f"cannot place {n_senses} senses in {n_usages} usages")
    if not 0.0 <= period_split <= 1.0:
        raise ValueError("period_split must be in [0, 1]")
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))
    ids = [f"u{i:04d}" for i in range(n_usages)]
    sense_perm = rng.permutation(n_usages)
    true_clusters = {ids[int(sense_perm[i])]: i % n_senses for i in range(n_usages)}
    n_first = round(period_split * n_usages)
    period_perm = rng.permutation(n_usages)
    grouping = {ids[int(period_perm[i])]: (1 if i < n_first else 2) for i in range(n_usages)}
    prefix = "An example occurrence of "
    context = f"{prefix}{lemma} in running text."
    span = (len(prefix), len(prefix) + len(lemma))
    usages = tuple(
        Usage(identifier=uid, lemma=lemma, pos="NN", grouping=grouping[uid],
              context=context, target_span=span)
        for uid in ids
    )
    proximity: dict[tuple[str, str], int] = {}
    for a, b in combinations(ids, 2):
        if true_clusters[a] == true_clusters[b]:
            proximity[(a, b)] = 3 + int(rng.integers(2))
        else:
            proximity[(a, b)] = 1 + int(rng.integers(2))
    return PlantedGraph(usages=usages, true_clusters=true_clusters,
                        true_proximity=proximity)


def simulate_annotator(
    pair: tuple[str, str],
    planted: PlantedGraph,
    noise: NoiseModel,
    rng: np.random.Generator,
    annotator: str = "sim",
    round: int = 1,
) -> Judgment:
    """One noisy judgment: 0 with p_zero, true value +/-1 (clipped to 1..4)
    with p_deviate, the true value otherwise."""
    true = planted.true_proximity[canonical_pair(*pair)]
    r = rng.random()
    if r < noise.p_zero:
        score = 0
    elif r < noise.p_zero + noise.p_deviate:
        step = 1 if rng.random() < 0.5 else -1
        score = min(4, max(1, true + step))
    else:
        score = true
    return Judgment(node1=pair[0], node2=pair[1], annotator=annotator,
                    score=score, round=round)


def accuracy_vs_plant(planted: PlantedGraph, clustering: Clustering) -> float:
    """Cluster accuracy against the plant over all planted usages.

    Usages missing from the clustering (never annotated, or filtered out)
    enter as fresh singletons, so 1.0 means every usage was recovered.
    """
    reference = {uid: planted.true_clusters[uid] for uid in planted.usage_ids}
    hypothesis = {uid: cid for uid, cid in clustering.assignment.items()
                  if uid in reference}
    next_id = max(hypothesis.values(), default=-1) + 1
    for uid in reference:
        if uid not in hypothesis:
            hypothesis[uid] = next_id
            next_id += 1
    return assignment_accuracy(reference, hypothesis)


def run_pipeline_sim(
    planted: PlantedGraph,
    noise: NoiseModel,
    sampling_cfg: SamplingConfig,
    anneal_cfg: AnnealConfig,
    max_rounds: int = 10,
    annotators: Sequence[str] = ("ann1", "ann2", "ann3"),
) -> SimReport:
    """Drive the full annotation loop on a planted graph.

    Round 1 samples the spanning walk; each later round clusters the
    current graph and schedules the combination/exploration/heuristic batch.
    Stops once a batch holds nothing beyond corroboration pairs and all
    multi-clusters have been compared to each other, or after
    ``max_rounds``.
    """
    rng_noise = np.random.Generator(np.random.PCG64(np.random.SeedSequence(noise.seed)))
    judgments: list[Judgment] = []
    records: list[RoundRecord] = []
    stopped_round: int | None = None
    n = len(planted.usages)
    possible = n * (n - 1) // 2
    batch = round1_sample(planted.usages, sampling_cfg, annotators)
    for round_no in range(1, max_rounds + 1):
        for pair in batch.pairs:
            assigned = batch.assignments.get(pair, ()) or ("sim",)
            for annotator in assigned:
                judgments.append(simulate_annotator(pair, planted, noise, rng_noise,
                                                    annotator=annotator, round=round_no))
        graph = build_wug(planted.usages, judgments)
        graph, removed = filter_zero_nodes(graph)
        clustering = cluster(graph, anneal_cfg)
        state = RoundState.from_graph(round_no, graph, clustering)
        records.append(RoundRecord(
            round=round_no,
            batch_pairs=len(batch.pairs),
            total_pairs=len({j.pair for j in judgments}),
            total_judgments=len(judgments),
            n_clusters=clustering.n_clusters,
            n_multi_clusters=len(state.multi_clusters),
            accuracy=accuracy_vs_plant(planted, clustering),
            loss=clustering.loss,
            normalized_loss=clustering.normalized_loss,
            removed_nodes=tuple(removed),
        ))
        upcoming = next_round(state, annotators, sampling_cfg)
        only_corroboration = all(
            upcoming.provenance[p] == "corroboration" for p in upcoming.pairs)
        if only_corroboration and multi_clusters_all_compared(state):
            stopped_round = round_no
            break
        batch = upcoming
    return SimReport(rounds=tuple(records), stopped_round=stopped_round,
                     possible_pairs=possible)


def _tolerant_accuracy(reference: Clustering, hypothesis: Clustering) -> float:
    """Accuracy over the union of node sets, singleton-izing missing nodes."""
    ref = dict(reference.assignment)
    hyp = dict(hypothesis.assignment)
    for a, b in ((ref, hyp), (hyp, ref)):
        next_id = max(a.values(), default=-1) + 1
        for node in b:
            if node not in a:
                a[node] = next_id
                next_id += 1
    return assignment_accuracy(ref, hyp)


def perturb_judgments(
    g: WUG, fraction: float, rng: np.random.Generator
) -> list[Judgment]:
    """Replace a uniform ``fraction`` of the individual judgments with
    uniform scores in 1-4; the annotated pair set is left untouched."""
    flat: list[tuple[tuple[str, str], int]] = []
    for pair in sorted(g.judgments):
        for idx in range(len(g.judgments[pair])):
            flat.append((pair, idx))
    count = round(fraction * len(flat))
    selected: dict[tuple[tuple[str, str], int], int] = {}
    if count:
        chosen = rng.choice(len(flat), size=count, replace=False)
        scores = rng.integers(1, 5, size=count)
        for pos, score in zip(chosen, scores):
            selected[flat[int(pos)]] = int(score)
    out: list[Judgment] = []
    for pair in sorted(g.judgments):
        for idx, j in enumerate(g.judgments[pair]):
            new_score = selected.get((pair, idx))
            out.append(j if new_score is None else replace(j, score=new_score))
    return out


def robustness_experiment(
    g: WUG,
    clustering_ref: Clustering,
    fractions: Sequence[float],
    trials: int,
    anneal_cfg: AnnealConfig,
    seed: int = 0,
) -> RobustnessCurve:
    """Perturb judgments, recluster, and score against the reference.

    Per fraction and trial, a fresh perturbation seed and annealing seed are
    split from ``seed``; fraction 0 reuses ``anneal_cfg`` unchanged so the
    trial reproduces the reference clustering exactly.  The CI is a 95%
    bootstrap interval (1000 resamples) around the per-fraction mean.
    """
    fractions = tuple(float(f) for f in fractions)
    for f in fractions:
        if not 0.0 <= f <= 1.0:
            raise ValueError(f"fraction {f} outside [0, 1]")
    usages = list(g.usages.values())
    senses = list(g.senses.values())
    means, los, his, all_samples = [], [], [], []
    for fi, fraction in enumerate(fractions):
        accs = []
        for t in range(trials):
            rng = np.random.Generator(np.random.PCG64(
                np.random.SeedSequence(entropy=seed, spawn_key=(fi, t))))
            perturbed = perturb_judgments(g, fraction, rng)
            g2 = build_wug(usages, perturbed, senses)
            if round(fraction * sum(len(js) for js in g.judgments.values())) == 0:
                cfg = anneal_cfg
            else:
                anneal_seed = int(np.random.SeedSequence(
                    entropy=seed, spawn_key=(fi, t, 1)).generate_state(1, np.uint64)[0])
                cfg = replace(anneal_cfg, seed=anneal_seed)
            c2 = cluster(g2, cfg)
            try:
                accs.append(assignment_accuracy(clustering_ref.assignment, c2.assignment))
            except ClusteringError:
                accs.append(_tolerant_accuracy(clustering_ref, c2))
        arr = np.array(accs)
        boot_rng = np.random.Generator(np.random.PCG64(
            np.random.SeedSequence(entropy=seed, spawn_key=(fi, 1 << 20))))
        boot = np.array([
            arr[boot_rng.integers(0, len(arr), size=len(arr))].mean()
            for _ in range(1000)
        ])
        means.append(float(arr.mean()))
        lo, hi = np.percentile(boot, [2.5, 97.5])
        los.append(float(lo))
        his.append(float(hi))
        all_samples.append(tuple(float(a) for a in accs))
    return RobustnessCurve(
        fractions=fractions,
        mean_accuracy=tuple(means),
        ci_low=tuple(los),
        ci_high=tuple(his),
        trials=trials,
        samples=tuple(all_samples),
    )


def annotate_planted_walk(
    planted: PlantedGraph,
    edge_fraction: float = 0.2,
    seed: int = 0,
    annotator: str = "sim",
) -> WUG:
    """Noise-free graph fixture: one true judgment per edge of a spanning
    random walk covering ``edge_fraction`` of all possible pairs."""
    from .sampling import _walk_pairs  # shared walk construction

    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))
    pairs = _walk_pairs(planted.usage_ids, edge_fraction, rng)
    judgments = [
        Judgment(node1=a, node2=b, annotator=annotator,
                 score=planted.true_proximity[(a, b)])
        for a, b in pairs
    ]
    return build_wug(planted.usages, judgments)
