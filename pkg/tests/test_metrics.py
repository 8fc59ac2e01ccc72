import numpy as np
import pytest

from wugs import (
    Clustering,
    Judgment,
    build_wug,
    binary_change,
    change_scores,
    cluster_frequency_dist,
    disagreement_histogram,
    graded_change,
    judgment_frequencies,
    krippendorff_alpha,
    pairwise_spearman,
)
from wugs.graph import GraphError

from conftest import make_usage
from oracles import alpha_reference, jsd_distance_reference, spearman_reference


def judgments_from_table(table):
    """[(pair_index, annotator, score)] -> Judgment list over synthetic nodes."""
    return [Judgment(node1=f"e{i:03d}a", node2=f"e{i:03d}b", annotator=ann, score=s)
            for i, ann, s in table]


class TestPairwiseSpearman:
    def test_identical_rankings(self):
        table = [(i, "A", s) for i, s in enumerate([4, 3, 2, 1])]
        table += [(i, "B", s) for i, s in enumerate([4, 3, 2, 1])]
        pairs, mean = pairwise_spearman(judgments_from_table(table))
        assert pairs[("A", "B")][0] == pytest.approx(1.0)
        assert mean == pytest.approx(1.0)

    def test_reversed_rankings_exactly_minus_one(self):
        table = [(i, "A", s) for i, s in enumerate([4, 3, 2, 1])]
        table += [(i, "B", s) for i, s in enumerate([1, 2, 3, 4])]
        pairs, mean = pairwise_spearman(judgments_from_table(table))
        assert pairs[("A", "B")][0] == -1.0
        assert mean == -1.0

    def test_tie_case_matches_reference(self):
        xs, ys = [4, 3, 3, 2, 1], [4, 3, 2, 2, 1]
        table = [(i, "A", s) for i, s in enumerate(xs)]
        table += [(i, "B", s) for i, s in enumerate(ys)]
        pairs, _ = pairwise_spearman(judgments_from_table(table))
        assert pairs[("A", "B")][0] == pytest.approx(spearman_reference(xs, ys), abs=1e-12)
        assert pairs[("A", "B")][1] == 5

    def test_zero_scores_excluded(self):
        table = [(0, "A", 4), (0, "B", 0), (1, "A", 3), (1, "B", 3),
                 (2, "A", 1), (2, "B", 1)]
        pairs, _ = pairwise_spearman(judgments_from_table(table))
        assert pairs[("A", "B")][1] == 2  # edge 0 not shared

    def test_undefined_when_no_shared_pairs(self):
        table = [(0, "A", 4), (1, "B", 3)]
        pairs, mean = pairwise_spearman(judgments_from_table(table))
        assert pairs == {}
        assert mean is None

    def test_weighted_mean_uses_shared_counts(self):
        table = [(i, "A", s) for i, s in enumerate([4, 3, 2, 1])]
        table += [(i, "B", s) for i, s in enumerate([4, 3, 2, 1])]  # rho 1, n 4
        table += [(i, "C", s) for i, s in [(0, 1), (1, 2)]]
        # A-C and B-C share edges 0,1 with reversed order: rho -1, n 2
        pairs, mean = pairwise_spearman(judgments_from_table(table))
        expected = (1.0 * 4 + (-1.0) * 2 + (-1.0) * 2) / 8
        assert mean == pytest.approx(expected)

    def test_annotator_relabeling_invariant(self):
        table = [(0, "A", 4), (0, "B", 3), (1, "A", 2), (1, "B", 2),
                 (2, "A", 1), (2, "B", 2)]
        swapped = [(i, {"A": "B", "B": "A"}[a], s) for i, a, s in table]
        _, mean1 = pairwise_spearman(judgments_from_table(table))
        _, mean2 = pairwise_spearman(judgments_from_table(swapped))
        assert mean1 == pytest.approx(mean2)


class TestKrippendorffAlpha:
    def test_perfect_agreement(self):
        table = [(0, "A", 4), (0, "B", 4), (1, "A", 2), (1, "B", 2)]
        assert krippendorff_alpha(judgments_from_table(table)) == 1.0

    def test_hand_computed_coincidence_matrix_reference(self):
        # units and values: e0 [1,1]; e1 [2,3]; e2 [4,4,4]; e3 [1,2];
        # e4 [3,3]; e5 [4,2].  Coincidence matrix over categories 1..4:
        #   o[1,1]=2  o[1,2]=o[2,1]=1  o[2,3]=o[3,2]=1  o[2,4]=o[4,2]=1
        #   o[3,3]=2  o[4,4]=3;  n_c = (3,3,3,4), n = 13
        # D_o = 1+1+1+1+4+4 = 12; D_e = 2*(9+36+108+9+48+12)/12 = 37
        # alpha = 1 - 12/37 = 25/37
        units = [[1, 1], [2, 3], [4, 4, 4], [1, 2], [3, 3], [4, 2]]
        table = []
        for i, values in enumerate(units):
            for k, v in enumerate(values):
                table.append((i, f"ann{k}", v))
        alpha = krippendorff_alpha(judgments_from_table(table))
        assert alpha == pytest.approx(25 / 37, abs=1e-9)
        assert alpha == pytest.approx(alpha_reference(units), abs=1e-12)

    def test_checkerboard_near_zero(self):
        rng = np.random.default_rng(0)
        table = []
        for i in range(3000):
            table.append((i, "A", int(rng.integers(1, 5))))
            table.append((i, "B", int(rng.integers(1, 5))))
        alpha = krippendorff_alpha(judgments_from_table(table))
        assert abs(alpha) < 0.05

    def test_undefined_when_all_units_single(self):
        table = [(0, "A", 4), (1, "B", 3), (2, "A", 1)]
        assert krippendorff_alpha(judgments_from_table(table)) is None

    def test_zero_scores_dropped_before_pairing(self):
        table = [(0, "A", 4), (0, "B", 0), (1, "A", 3), (1, "B", 3)]
        # unit 0 keeps a single value -> only unit 1 is pairable, all equal
        assert krippendorff_alpha(judgments_from_table(table)) == 1.0

    def test_alpha_decreases_with_noise(self):
        def alpha_at(flip_p, seed):
            rng = np.random.default_rng(seed)
            table = []
            for i in range(400):
                true = int(rng.integers(1, 5))
                table.append((i, "A", true))
                other = true
                if rng.random() < flip_p:
                    other = int(rng.integers(1, 5))
                table.append((i, "B", other))
            return krippendorff_alpha(judgments_from_table(table))

        levels = [0.0, 0.3, 0.7]
        means = [np.mean([alpha_at(p, s) for s in range(30)]) for p in levels]
        assert means[0] > means[1] > means[2]
        assert means[0] == 1.0

    def test_matches_pairwise_reference_on_random_data(self):
        rng = np.random.default_rng(21)
        for _ in range(10):
            units = []
            table = []
            for i in range(int(rng.integers(3, 12))):
                values = [int(v) for v in rng.integers(1, 5, size=rng.integers(1, 4))]
                units.append(values)
                for k, v in enumerate(values):
                    table.append((i, f"ann{k}", v))
            if not [u for u in units if len(u) >= 2]:
                continue
            assert krippendorff_alpha(judgments_from_table(table)) == pytest.approx(
                alpha_reference(units), abs=1e-12)


class TestDisagreementHistogram:
    def test_all_equal_double_judgments(self):
        table = [(0, "A", 4), (0, "B", 4), (1, "A", 2), (1, "B", 2)]
        hist = disagreement_histogram(judgments_from_table(table))
        assert hist == {0: 1.0, 1: 0.0, 2: 0.0, 3: 0.0}

    def test_extreme_disagreement_in_bin_three(self):
        table = [(0, "A", 1), (0, "B", 4)]
        hist = disagreement_histogram(judgments_from_table(table))
        assert hist[3] == 1.0

    def test_single_and_triple_judged_edges_ignored(self):
        table = [(0, "A", 4), (1, "A", 4), (1, "B", 3), (1, "C", 2),
                 (2, "A", 4), (2, "B", 2)]
        hist = disagreement_histogram(judgments_from_table(table))
        assert hist == {0: 0.0, 1: 0.0, 2: 1.0, 3: 0.0}

    def test_noisy_annotators_mostly_agree(self):
        rng = np.random.default_rng(4)
        table = []
        for i in range(2000):
            true = int(rng.integers(1, 5))
            for ann in ("A", "B"):
                score = true
                if rng.random() < 0.3:
                    score = min(4, max(1, true + (1 if rng.random() < 0.5 else -1)))
                table.append((i, ann, score))
        hist = disagreement_histogram(judgments_from_table(table))
        assert 0.4 < hist[0] < 0.8
        assert hist[3] < 0.05


class TestJudgmentFrequencies:
    def test_empty(self):
        counts, props = judgment_frequencies([])
        assert counts == {0: 0, 1: 0, 2: 0, 3: 0, 4: 0}
        assert props == {0: 0.0, 1: 0.0, 2: 0.0, 3: 0.0, 4: 0.0}

    def test_mixed_counts(self):
        table = [(0, "A", 4), (1, "A", 4), (2, "A", 1), (3, "A", 0)]
        counts, props = judgment_frequencies(judgments_from_table(table))
        assert counts == {0: 1, 1: 1, 2: 0, 3: 0, 4: 2}
        assert props[4] == 0.5

    def test_conservation(self):
        rng = np.random.default_rng(3)
        table = [(i, "A", int(rng.integers(0, 5))) for i in range(137)]
        counts, _ = judgment_frequencies(judgments_from_table(table))
        assert sum(counts.values()) == 137


def period_fixture():
    """4 period-1 usages in cluster 0; 2+2 period-2 usages split 0/1."""
    usages = [make_usage(f"u{i}", grouping=1 if i < 4 else 2) for i in range(8)]
    judgments = []
    for i in range(4):
        for j in range(i + 1, 4):
            judgments.append(Judgment(node1=f"u{i}", node2=f"u{j}", annotator="a", score=4))
    judgments.append(Judgment(node1="u4", node2="u5", annotator="a", score=4))
    judgments.append(Judgment(node1="u6", node2="u7", annotator="a", score=4))
    judgments.append(Judgment(node1="u0", node2="u4", annotator="a", score=4))
    judgments.append(Judgment(node1="u0", node2="u6", annotator="a", score=1))
    g = build_wug(usages, judgments)
    assignment = {f"u{i}": 0 for i in range(6)} | {"u6": 1, "u7": 1}
    return g, Clustering(assignment=assignment, loss=0.0, normalized_loss=0.0)


class TestClusterFrequencyDist:
    def test_counts_per_cluster(self):
        g, c = period_fixture()
        assert cluster_frequency_dist(g, c, 1) == (4, 0)
        assert cluster_frequency_dist(g, c, 2) == (2, 2)

    def test_conservation_over_periods(self):
        g, c = period_fixture()
        total = sum(cluster_frequency_dist(g, c, 1)) + sum(cluster_frequency_dist(g, c, 2))
        assert total == 8

    def test_unknown_grouping_rejected(self):
        g, c = period_fixture()
        with pytest.raises(GraphError):
            cluster_frequency_dist(g, c, 7)

    def test_planted_ground_truth(self):
        from wugs.simulation import annotate_planted_walk, generate_planted_graph

        planted = generate_planted_graph(60, 2, period_split=0.5, seed=9)
        g = annotate_planted_walk(planted, edge_fraction=0.4, seed=9)
        assignment = {uid: planted.true_clusters[uid] for uid in planted.usage_ids}
        c = Clustering(assignment=assignment, loss=0.0, normalized_loss=0.0)
        for period in (1, 2):
            vec = cluster_frequency_dist(g, c, period)
            for cid, count in enumerate(vec):
                expected = sum(
                    1 for uid in planted.usage_ids
                    if planted.true_clusters[uid] == cid
                    and g.usages[uid].grouping == period)
                assert count == expected

    def test_isolates_not_counted(self):
        usages = [make_usage("a", 1), make_usage("b", 1), make_usage("c", 2)]
        judgments = [Judgment(node1="a", node2="b", annotator="x", score=4)]
        g = build_wug(usages, judgments)
        c = Clustering(assignment={"a": 0, "b": 0, "c": 1},
                       loss=0.0, normalized_loss=0.0, isolates=("c",))
        assert cluster_frequency_dist(g, c, 1) == (2,)
        assert cluster_frequency_dist(g, c, 2) == (0,)


class TestGradedChange:
    def test_identical_distributions_zero(self):
        usages = [make_usage(f"u{i}", grouping=1 + i % 2) for i in range(8)]
        g = build_wug(usages, [Judgment(node1="u0", node2="u1", annotator="a", score=4)])
        assignment = {f"u{i}": i // 4 for i in range(8)}
        c = Clustering(assignment=assignment, loss=0.0, normalized_loss=0.0)
        assert graded_change(g, c) == 0.0

    def test_disjoint_supports_one(self):
        g, _ = period_fixture()
        assignment = {f"u{i}": (0 if i < 4 else 1) for i in range(8)}
        c = Clustering(assignment=assignment, loss=0.0, normalized_loss=0.0)
        assert graded_change(g, c) == 1.0

    def test_matches_entropy_reference(self):
        g, c = period_fixture()
        value = graded_change(g, c)
        assert value == pytest.approx(
            jsd_distance_reference([1.0, 0.0], [0.5, 0.5]), abs=1e-12)

    def test_symmetric_in_periods(self):
        g, c = period_fixture()
        flipped_usages = [
            make_usage(uid, grouping=3 - u.grouping) for uid, u in g.usages.items()]
        g2 = build_wug(flipped_usages,
                       [j for js in g.judgments.values() for j in js])
        assert graded_change(g, c) == pytest.approx(graded_change(g2, c))

    def test_undefined_when_period_unclustered(self):
        usages = [make_usage("a", 1), make_usage("b", 1), make_usage("c", 2)]
        judgments = [Judgment(node1="a", node2="b", annotator="x", score=4)]
        g = build_wug(usages, judgments)
        c = Clustering(assignment={"a": 0, "b": 0, "c": 1},
                       loss=0.0, normalized_loss=0.0, isolates=("c",))
        assert graded_change(g, c) is None


class TestBinaryChange:
    def with_counts(self, counts1, counts2):
        """Build a graph + clustering with the given per-period cluster counts."""
        usages, judgments, assignment = [], [], {}
        uid = 0
        for cid, (a, b) in enumerate(zip(counts1, counts2)):
            members = []
            for _ in range(a):
                usages.append(make_usage(f"u{uid}", grouping=1))
                members.append(f"u{uid}")
                uid += 1
            for _ in range(b):
                usages.append(make_usage(f"u{uid}", grouping=2))
                members.append(f"u{uid}")
                uid += 1
            for m in members:
                assignment[m] = cid
            for x, y in zip(members, members[1:]):
                judgments.append(Judgment(node1=x, node2=y, annotator="a", score=4))
        g = build_wug(usages, judgments)
        c = Clustering(assignment=assignment, loss=0.0, normalized_loss=0.0)
        return g, c

    def test_lost_sense_detected(self):
        g, c = self.with_counts([5, 3], [0, 3])
        assert binary_change(g, c, k=2, n=0) is True

    def test_stable_senses_no_change(self):
        g, c = self.with_counts([5, 3], [4, 3])
        assert binary_change(g, c, k=2, n=0) is False

    def test_singleton_attestation_ignored(self):
        g, c = self.with_counts([1, 3], [0, 3])
        assert binary_change(g, c, k=2, n=0) is False

    def test_threshold_truth_table(self):
        cases = [
            ((2, 0), 2, 0, True),
            ((1, 0), 2, 0, False),
            ((2, 1), 2, 0, False),
            ((2, 1), 2, 1, True),
            ((0, 2), 2, 0, True),   # gained sense, symmetric
            ((3, 3), 2, 0, False),
        ]
        for (a, b), k, n, expected in cases:
            g, c = self.with_counts([a, 3], [b, 3])
            assert binary_change(g, c, k=k, n=n) is expected, (a, b, k, n)

    def test_k1_n0_means_sense_absent_from_one_period(self):
        g, c = self.with_counts([1, 3], [0, 3])
        assert binary_change(g, c, k=1, n=0) is True
        g, c = self.with_counts([1, 3], [1, 3])
        assert binary_change(g, c, k=1, n=0) is False


class TestChangeScores:
    def test_bundle(self):
        g, c = period_fixture()
        scores = change_scores(g, c)
        assert scores.freq_dist[1] == (4, 0)
        assert scores.freq_dist[2] == (2, 2)
        assert scores.graded == pytest.approx(
            jsd_distance_reference([1.0, 0.0], [0.5, 0.5]))
        assert scores.binary is True  # cluster 1: 0 in period 1, 2 in period 2
        assert (scores.k, scores.n) == (2, 0)
