import numpy as np
import pytest

from wugs import (
    AnnealConfig,
    NoiseModel,
    SamplingConfig,
    cluster,
    run_pipeline_sim,
    simulate_annotator,
)
from wugs.simulation import (
    accuracy_vs_plant,
    annotate_planted_walk,
    generate_planted_graph,
    perturb_judgments,
    robustness_experiment,
)

FAST = AnnealConfig(max_iterations=4000, restarts_per_k=2, seed=0)


class TestPlantedGraph:
    def test_single_sense_all_high_proximity(self):
        p = generate_planted_graph(12, 1, seed=0)
        assert all(v in (3, 4) for v in p.true_proximity.values())

    def test_period_split_exact(self):
        p = generate_planted_graph(100, 2, period_split=0.5, seed=1)
        groupings = [u.grouping for u in p.usages]
        assert groupings.count(1) == 50
        assert groupings.count(2) == 50

    def test_every_sense_nonempty(self):
        for seed in range(5):
            p = generate_planted_graph(9, 4, seed=seed)
            assert set(p.true_clusters.values()) == {0, 1, 2, 3}

    def test_proximity_ranges_follow_plant(self):
        p = generate_planted_graph(20, 3, seed=2)
        for (a, b), v in p.true_proximity.items():
            if p.true_clusters[a] == p.true_clusters[b]:
                assert v in (3, 4)
            else:
                assert v in (1, 2)

    def test_deterministic_per_seed(self):
        a = generate_planted_graph(30, 2, seed=7)
        b = generate_planted_graph(30, 2, seed=7)
        assert a.true_clusters == b.true_clusters
        assert a.true_proximity == b.true_proximity

    def test_infeasible_sizes_rejected(self):
        with pytest.raises(ValueError):
            generate_planted_graph(2, 3)
        with pytest.raises(ValueError):
            generate_planted_graph(5, 0)

    def test_noise_free_complete_graph_recovers_plant(self):
        p = generate_planted_graph(30, 2, seed=3)
        g = annotate_planted_walk(p, edge_fraction=1.0, seed=3)
        c = cluster(g, FAST)
        assert c.loss == 0.0
        assert accuracy_vs_plant(p, c) == 1.0


class TestSimulateAnnotator:
    def test_no_noise_reports_truth(self):
        p = generate_planted_graph(10, 2, seed=0)
        rng = np.random.default_rng(0)
        for pair, true in list(p.true_proximity.items())[:20]:
            j = simulate_annotator(pair, p, NoiseModel(), rng)
            assert j.score == true

    def test_p_zero_one_always_zero(self):
        p = generate_planted_graph(10, 2, seed=0)
        rng = np.random.default_rng(0)
        pair = next(iter(p.true_proximity))
        for _ in range(20):
            assert simulate_annotator(pair, p, NoiseModel(p_zero=1.0), rng).score == 0

    def test_empirical_deviation_rate(self):
        # on true values 2 and 3 a +/-1 step is never clipped back onto the
        # truth, so the observed rate estimates p_deviate directly
        p = generate_planted_graph(6, 2, seed=1)
        noise = NoiseModel(p_deviate=0.3)
        rng = np.random.default_rng(42)
        pairs = [pr for pr, v in p.true_proximity.items() if v in (2, 3)]
        assert pairs
        deviated = 0
        n = 10_000
        for i in range(n):
            pair = pairs[i % len(pairs)]
            j = simulate_annotator(pair, p, noise, rng)
            if j.score != p.true_proximity[pair]:
                deviated += 1
        assert abs(deviated / n - 0.3) < 0.02

    def test_invalid_probabilities_rejected(self):
        with pytest.raises(ValueError):
            NoiseModel(p_deviate=0.8, p_zero=0.5)
        with pytest.raises(ValueError):
            NoiseModel(p_deviate=-0.1)


class TestPipelineSim:
    def test_noise_free_two_sense_recovery(self):
        p = generate_planted_graph(100, 2, seed=11)
        report = run_pipeline_sim(p, NoiseModel(seed=11), SamplingConfig(seed=11),
                                  FAST, max_rounds=5)
        assert report.final_accuracy == 1.0
        assert report.total_pairs < 0.2 * report.possible_pairs

    def test_max_rounds_one_annotates_round1_only(self):
        p = generate_planted_graph(60, 2, seed=4)
        report = run_pipeline_sim(p, NoiseModel(seed=4), SamplingConfig(seed=4),
                                  FAST, max_rounds=1)
        assert len(report.rounds) == 1
        # round-1 walk: 6 nodes -> ceil(0.3 * 15) edges
        assert report.rounds[0].total_pairs == 5
        assert report.rounds[0].accuracy < 0.2

    def test_pairs_strictly_increase_until_stopping_noise_free(self):
        p = generate_planted_graph(80, 3, seed=6)
        report = run_pipeline_sim(p, NoiseModel(seed=6), SamplingConfig(seed=6),
                                  FAST, max_rounds=8)
        totals = [r.total_pairs for r in report.rounds]
        assert all(b > a for a, b in zip(totals, totals[1:]))

    def test_reproducible_per_seed(self):
        p = generate_planted_graph(50, 2, seed=8)
        kwargs = dict(noise=NoiseModel(p_deviate=0.1, seed=8),
                      sampling_cfg=SamplingConfig(seed=8),
                      anneal_cfg=FAST, max_rounds=4)
        a = run_pipeline_sim(p, **kwargs)
        b = run_pipeline_sim(p, **kwargs)
        assert a == b


class TestPerturbation:
    def test_edge_set_invariant(self):
        p = generate_planted_graph(40, 2, seed=2)
        g = annotate_planted_walk(p, edge_fraction=0.3, seed=2)
        for fraction in (0.1, 0.5, 1.0):
            perturbed = perturb_judgments(g, fraction, np.random.default_rng(1))
            assert {j.pair for j in perturbed} == set(g.judgments)
            assert len(perturbed) == sum(len(js) for js in g.judgments.values())

    def test_replacement_scores_in_one_to_four(self):
        p = generate_planted_graph(30, 2, seed=3)
        g = annotate_planted_walk(p, edge_fraction=0.5, seed=3)
        perturbed = perturb_judgments(g, 1.0, np.random.default_rng(5))
        assert all(j.score in (1, 2, 3, 4) for j in perturbed)

    def test_fraction_zero_identity(self):
        p = generate_planted_graph(30, 2, seed=3)
        g = annotate_planted_walk(p, edge_fraction=0.5, seed=3)
        perturbed = perturb_judgments(g, 0.0, np.random.default_rng(5))
        originals = [j for pair in sorted(g.judgments) for j in g.judgments[pair]]
        assert perturbed == originals


class TestRobustness:
    def test_fraction_zero_accuracy_one(self):
        p = generate_planted_graph(60, 2, seed=1)
        g = annotate_planted_walk(p, edge_fraction=0.25, seed=1)
        ref = cluster(g, FAST)
        curve = robustness_experiment(g, ref, [0.0], trials=3, anneal_cfg=FAST, seed=2)
        assert curve.mean_accuracy == (1.0,)
        assert curve.ci_low == (1.0,) and curve.ci_high == (1.0,)

    def test_full_perturbation_near_chance(self):
        p = generate_planted_graph(60, 3, seed=5)
        g = annotate_planted_walk(p, edge_fraction=0.25, seed=5)
        ref = cluster(g, FAST)
        curve = robustness_experiment(g, ref, [1.0], trials=5, anneal_cfg=FAST, seed=6)
        assert curve.mean_accuracy[0] < 0.85

    def test_monotone_decline_within_tolerance(self):
        p = generate_planted_graph(60, 3, seed=7)
        g = annotate_planted_walk(p, edge_fraction=0.25, seed=7)
        ref = cluster(g, FAST)
        curve = robustness_experiment(g, ref, [0.0, 0.3, 0.8], trials=6,
                                      anneal_cfg=FAST, seed=8)
        means = curve.mean_accuracy
        assert means[1] <= means[0] + 0.05
        assert means[2] <= means[1] + 0.05

    def test_reproducible(self):
        p = generate_planted_graph(40, 2, seed=9)
        g = annotate_planted_walk(p, edge_fraction=0.3, seed=9)
        ref = cluster(g, FAST)
        a = robustness_experiment(g, ref, [0.2], trials=4, anneal_cfg=FAST, seed=10)
        b = robustness_experiment(g, ref, [0.2], trials=4, anneal_cfg=FAST, seed=10)
        assert a == b

    def test_curve_shapes(self):
        p = generate_planted_graph(40, 2, seed=12)
        g = annotate_planted_walk(p, edge_fraction=0.3, seed=12)
        ref = cluster(g, FAST)
        curve = robustness_experiment(g, ref, [0.0, 0.5], trials=4,
                                      anneal_cfg=FAST, seed=13)
        assert len(curve.fractions) == len(curve.mean_accuracy) == 2
        assert len(curve.ci_low) == len(curve.ci_high) == 2
        assert all(lo <= m <= hi for lo, m, hi in
                   zip(curve.ci_low, curve.mean_accuracy, curve.ci_high))
        assert all(0.0 <= a <= 1.0 for samples in curve.samples for a in samples)
