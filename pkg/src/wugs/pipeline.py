"""Round orchestration shared by the HTTP service and the CLI.

Advancing a round rebuilds each lemma's graph from the judgment log, drops
zero-majority nodes, clusters, samples the next batch, and commits the new
round atomically through the project store.  Round 0 -> 1 is special: there
is nothing to cluster yet, so usage-usage lemmas get the spanning-walk
sample and usage-sense lemmas get their full bipartite pair set.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

from .clustering import AnnealConfig, Clustering, cluster
from .graph import build_usg_pairs, filter_zero_nodes
from .metrics import (
    agreement_report,
    change_scores,
    disagreement_histogram,
    judgment_frequencies,
)
from .sampling import (
    AnnotationBatch,
    RoundState,
    SamplingConfig,
    _assign_annotators,
    multi_clusters_all_compared,
    next_round,
    round1_sample,
    word_flags,
)
from .storage import Project


@dataclass(frozen=True)
class LemmaRound:
    lemma: str
    loss: float | None
    normalized_loss: float | None
    n_clusters: int | None
    removed_nodes: tuple[str, ...]
    flags: tuple[str, ...]
    batch_pairs: int
    complete: bool


@dataclass(frozen=True)
class RoundReport:
    round: int
    lemmas: dict[str, LemmaRound] = field(default_factory=dict)

    @property
    def batch_pairs(self) -> int:
        return sum(entry.batch_pairs for entry in self.lemmas.values())


def _merge_batches(round_no: int, parts: list[AnnotationBatch]) -> AnnotationBatch:
    pairs: list = []
    provenance: dict = {}
    assignments: dict = {}
    for part in parts:
        for pair in part.pairs:
            if pair in provenance:
                continue
            pairs.append(pair)
            provenance[pair] = part.provenance.get(pair, "")
            assignments[pair] = part.assignments.get(pair, ())
    return AnnotationBatch(round=round_no, pairs=tuple(pairs),
                           provenance=provenance, assignments=assignments)


def _usg_round1(project: Project, lemma: str, cfg: SamplingConfig) -> AnnotationBatch:
    import numpy as np

    usages = [u for u in project.usages.values() if u.lemma == lemma]
    senses = [s for s in project.senses.values() if s.lemma == lemma]
    pairs = build_usg_pairs(usages, senses)
    provenance = {p: "exploration" for p in pairs}
    rng = np.random.Generator(np.random.PCG64(
        np.random.SeedSequence(entropy=cfg.seed, spawn_key=(1,))))
    assignments, _ = _assign_annotators(pairs, provenance, project.annotators,
                                        cfg.multi_annotation_fraction, rng)
    return AnnotationBatch(round=1, pairs=tuple(pairs), provenance=provenance,
                           assignments=assignments)


def advance_round(
    project: Project,
    anneal_cfg: AnnealConfig | None = None,
    sampling_cfg: SamplingConfig | None = None,
    pair_budget: int = 500,
) -> RoundReport:
    """Close the current round and open the next one.

    Requires every scheduled task to be judged or expired.  Per-lemma seeds
    are derived from the configured seeds and the lemma name, so adding a
    lemma never shifts another lemma's samples.
    """
    anneal_cfg = anneal_cfg or AnnealConfig(**project.config.get("anneal", {}))
    sampling_cfg = sampling_cfg or SamplingConfig(**project.config.get("sampling", {}))
    open_tasks = project.open_pairs()
    if open_tasks:
        raise RuntimeError(
            f"cannot advance: {len(open_tasks)} open tasks remain in round {project.round}")
    new_round = project.round + 1
    batches: list[AnnotationBatch] = []
    clusterings: dict[str, Clustering] = {}
    report_lemmas: dict[str, LemmaRound] = {}
    newly_complete: list[str] = []
    for lemma in project.lemmas:
        if lemma in project.complete:
            report_lemmas[lemma] = LemmaRound(
                lemma=lemma, loss=None, normalized_loss=None, n_clusters=None,
                removed_nodes=(), flags=(), batch_pairs=0, complete=True)
            continue
        lemma_sampling = replace(sampling_cfg,
                                 seed=_lemma_seed(sampling_cfg.seed, lemma))
        lemma_anneal = replace(anneal_cfg, seed=_lemma_seed(anneal_cfg.seed, lemma))
        graph = project.graph(lemma)
        if project.round == 0:
            if graph.senses:
                batch = _usg_round1(project, lemma, lemma_sampling)
            else:
                usages = [u for u in project.usages.values() if u.lemma == lemma]
                batch = round1_sample(usages, lemma_sampling, project.annotators)
            report_lemmas[lemma] = LemmaRound(
                lemma=lemma, loss=None, normalized_loss=None, n_clusters=None,
                removed_nodes=(), flags=(), batch_pairs=len(batch.pairs),
                complete=False)
            batches.append(batch)
            continue
        graph, removed = filter_zero_nodes(graph)
        clustering = cluster(graph, lemma_anneal)
        clusterings[lemma] = clustering
        state = RoundState.from_graph(project.round, graph, clustering)
        batch = next_round(state, project.annotators, lemma_sampling)
        only_corroboration = all(
            batch.provenance[p] == "corroboration" for p in batch.pairs)
        complete = only_corroboration and multi_clusters_all_compared(state)
        flags = word_flags(graph, batch, pair_budget=pair_budget)
        if complete:
            newly_complete.append(lemma)
            batch = AnnotationBatch(round=new_round, pairs=(), provenance={},
                                    assignments={})
        report_lemmas[lemma] = LemmaRound(
            lemma=lemma,
            loss=clustering.loss,
            normalized_loss=clustering.normalized_loss,
            n_clusters=clustering.n_clusters,
            removed_nodes=tuple(removed),
            flags=tuple(flags),
            batch_pairs=len(batch.pairs),
            complete=complete,
        )
        if batch.pairs:
            batches.append(batch)
    merged = _merge_batches(new_round, batches) if batches else None
    project.commit_round(new_round, merged, clusterings, newly_complete)
    return RoundReport(round=new_round, lemmas=report_lemmas)


def _lemma_seed(seed: int, lemma: str) -> int:
    import zlib

    return (seed * 1_000_003 + zlib.crc32(lemma.encode("utf-8"))) % (2**63)


def project_stats(project: Project) -> dict:
    """Aggregate statistics snapshot: totals, score distributions, agreement,
    and per-lemma change scores where a stored clustering exists."""
    judgments = project.judgments
    counts, proportions = judgment_frequencies(judgments)
    agreement = agreement_report(judgments)
    rounds_seen = sorted({j.round for j in judgments})
    per_round = {}
    for r in rounds_seen:
        subset = [j for j in judgments if j.round == r]
        rep = agreement_report(subset)
        per_round[str(r)] = {
            "judgments": len(subset),
            "weighted_mean_spearman": rep.weighted_mean_spearman,
            "krippendorff_alpha": rep.krippendorff_alpha,
        }
    lemmas = {}
    for lemma in project.lemmas:
        entry: dict = {"complete": lemma in project.complete}
        clustering = project.clusterings.get(lemma)
        if clustering is not None:
            graph = project.graph(lemma)
            entry["loss"] = clustering.loss
            entry["normalized_loss"] = clustering.normalized_loss
            entry["n_clusters"] = clustering.n_clusters
            if len(graph.groupings) == 2:
                scores = change_scores(graph, clustering,
                                       **project.config.get("change", {}))
                entry["change"] = {
                    "graded": scores.graded,
                    "binary": scores.binary,
                    "freq_dist": {str(p): list(v) for p, v in scores.freq_dist.items()},
                }
        lemmas[lemma] = entry
    return {
        "project_id": project.project_id,
        "round": project.round,
        "total_judgments": len(judgments),
        "judgment_counts": {str(s): c for s, c in counts.items()},
        "judgment_proportions": {str(s): p for s, p in proportions.items()},
        "disagreement_histogram": {str(d): p for d, p in
                                   disagreement_histogram(judgments).items()},
        "agreement": {
            "weighted_mean_spearman": agreement.weighted_mean_spearman,
            "krippendorff_alpha": agreement.krippendorff_alpha,
            "pairwise": {f"{a}|{b}": {"rho": rho, "n_shared": n}
                         for (a, b), (rho, n) in sorted(agreement.pairwise_spearman.items())},
        },
        "agreement_per_round": per_round,
        "lemmas": lemmas,
    }
