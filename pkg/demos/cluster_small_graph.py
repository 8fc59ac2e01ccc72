"""Build a small usage graph by hand, cluster it, and read the results.

Two groups of usages are tied together by high relatedness judgments (3-4)
and separated by low ones (1-2); one deliberately contradictory judgment
shows up as a conflict and as positive loss.
"""

from wugs import (
    AnnealConfig,
    Judgment,
    Usage,
    build_wug,
    change_scores,
    cluster,
    conflicts,
)


def usage(identifier, grouping):
    context = f"an example sentence with bank in it ({identifier})"
    start = context.index("bank")
    return Usage(identifier=identifier, lemma="bank", pos="NN", grouping=grouping,
                 context=context, target_span=(start, start + 4))


def main():
    riverside = [usage(f"river{i}", grouping=1) for i in range(4)]
    financial = [usage(f"money{i}", grouping=2) for i in range(4)]
    usages = riverside + financial

    judgments = []
    for group in (riverside, financial):
        ids = [u.identifier for u in group]
        for i in range(len(ids)):
            for j in range(i + 1, len(ids)):
                judgments.append(Judgment(node1=ids[i], node2=ids[j],
                                          annotator="demo", score=4))
    judgments.append(Judgment(node1="river0", node2="money0", annotator="demo", score=1))
    judgments.append(Judgment(node1="river1", node2="money2", annotator="demo", score=2))
    # one contradictory judgment: a cross-group pair rated "closely related"
    judgments.append(Judgment(node1="river3", node2="money3", annotator="demo", score=3))

    graph = build_wug(usages, judgments)
    clustering = cluster(graph, AnnealConfig(seed=0))

    print(f"loss: {clustering.loss}  normalized: {clustering.normalized_loss:.4f}")
    for cid, members in clustering.clusters().items():
        print(f"cluster {cid}: {', '.join(members)}")

    conflict_set = conflicts(graph, clustering)
    print(f"positive edges across clusters: {conflict_set.positive_across}")
    print(f"negative edges within clusters: {conflict_set.negative_within}")

    scores = change_scores(graph, clustering)
    print(f"per-period cluster frequencies: {scores.freq_dist}")
    print(f"graded change: {scores.graded:.4f}  binary change: {scores.binary}")


if __name__ == "__main__":
    main()
