import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from wugs import Judgment, Usage, build_wug


def make_usage(identifier: str, grouping: int = 1, lemma: str = "w") -> Usage:
    context = f"a sentence with {lemma} inside"
    start = context.index(lemma)
    return Usage(identifier=identifier, lemma=lemma, pos="NN", grouping=grouping,
                 context=context, target_span=(start, start + len(lemma)))


def make_graph(edge_scores: dict, groupings: dict | None = None):
    """Graph from {(a, b): [scores] | score} with optional {node: grouping}."""
    groupings = groupings or {}
    nodes = sorted({n for pair in edge_scores for n in pair})
    usages = [make_usage(n, groupings.get(n, 1)) for n in nodes]
    judgments = []
    for (a, b), scores in edge_scores.items():
        if isinstance(scores, int):
            scores = [scores]
        for i, s in enumerate(scores):
            judgments.append(Judgment(node1=a, node2=b, annotator=f"ann{i}", score=s))
    return build_wug(usages, judgments)


@pytest.fixture
def two_cliques():
    """Two 4-cliques of weight-4 edges joined by one weight-1 edge."""
    edges = {}
    left = [f"a{i}" for i in range(4)]
    right = [f"b{i}" for i in range(4)]
    for side in (left, right):
        for i in range(4):
            for j in range(i + 1, 4):
                edges[(side[i], side[j])] = 4
    edges[("a0", "b0")] = 1
    return make_graph(edges)
