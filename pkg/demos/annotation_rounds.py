"""Drive a file-backed project round by round, the way the service does.

Creates a small project on disk, opens round 1, answers every scheduled
task with a scripted annotator (who judges by a hidden sense keyword in the
contexts), advances, and repeats until the word is marked complete.
"""

import tempfile
from pathlib import Path

from wugs import AnnealConfig, Judgment, SamplingConfig, Usage
from wugs.pipeline import advance_round, project_stats
from wugs.storage import Project


def build_project(path: Path) -> Project:
    usages = {}
    for i in range(16):
        keyword = "river" if i % 2 == 0 else "money"
        context = f"the bank by the {keyword} that day"
        start = context.index("bank")
        usages[f"u{i:02d}"] = Usage(
            identifier=f"u{i:02d}", lemma="bank", pos="NN",
            grouping=1 if i < 8 else 2,
            context=context, target_span=(start, start + 4))
    project = Project(project_id="demo", usages=usages,
                      annotators=("kim", "sam"), periods=(1, 2))
    project.save(path)
    return project


def scripted_score(project: Project, pair) -> int:
    sides = [project.usages[n].context for n in pair]
    same = ("river" in sides[0]) == ("river" in sides[1])
    return 4 if same else 1


def main():
    workdir = Path(tempfile.mkdtemp(prefix="wugs-demo-"))
    project = build_project(workdir / "project")
    anneal = AnnealConfig(seed=1)
    sampling = SamplingConfig(seed=1)

    for _ in range(8):
        report = advance_round(project, anneal, sampling)
        entry = report.lemmas["bank"]
        print(f"round {report.round}: {entry.batch_pairs} pairs scheduled"
              + (f", loss {entry.loss}" if entry.loss is not None else ""))
        if entry.complete:
            print("word complete: every cluster compared to every other")
            break
        for pair, annotator in project.open_pairs():
            project.append_judgments([Judgment(
                node1=pair[0], node2=pair[1], annotator=annotator,
                score=scripted_score(project, pair), round=project.round)])

    stats = project_stats(project)
    bank = stats["lemmas"]["bank"]
    print(f"\nfinal clusters: {bank['n_clusters']}, "
          f"graded change {bank['change']['graded']:.3f}, "
          f"binary change {bank['change']['binary']}")
    print(f"project stored under {project.path}")


if __name__ == "__main__":
    main()
