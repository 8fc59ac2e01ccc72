"""File-backed project store and the flat data formats.

A project directory holds TSV tables for usages, senses, and the append-only
judgment log, one batch file per round, the last clustering per lemma, and a
project.json with roster, periods, round counter, and config.  All files are
UTF-8, header-first, tab-separated; graph exports are deterministic JSON
(stable key order), so re-exporting unchanged state is byte-identical.
"""

from __future__ import annotations

import json
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from .clustering import Clustering
from .graph import (
    SENSE_PREFIX,
    WUG,
    GraphError,
    Judgment,
    SenseDescription,
    Usage,
    build_wug,
    canonical_pair,
    shift,
)
from .sampling import AnnotationBatch, Pair

USAGE_COLUMNS = ("lemma", "pos", "grouping", "identifier", "context",
                 "target_start", "target_end", "date")
JUDGMENT_COLUMNS = ("identifier1", "identifier2", "annotator", "judgment",
                    "comment", "round")
SENSE_COLUMNS = ("lemma", "sense_id", "definition")


class DataError(ValueError):
    """Malformed or inconsistent project data; messages carry file:line."""


def _clean_field(value: str, where: str) -> str:
    if "\t" in value or "\n" in value or "\r" in value:
        raise DataError(f"{where}: field contains tab or newline: {value!r}")
    return value


def _write_tsv(path: Path, columns: Sequence[str], rows: Iterable[Sequence[str]]) -> None:
    lines = ["\t".join(columns)]
    for row in rows:
        lines.append("\t".join(_clean_field(str(v), str(path)) for v in row))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def _read_tsv(path: Path, columns: Sequence[str]):
    """Yield (line_number, field dict); validates the header and row widths."""
    text = path.read_text(encoding="utf-8")
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines:
        raise DataError(f"{path.name}: empty file")
    header = lines[0].split("\t")
    if header != list(columns):
        raise DataError(
            f"{path.name}:1: header {header} does not match expected {list(columns)}")
    for number, line in enumerate(lines[1:], start=2):
        fields = line.split("\t")
        if len(fields) != len(columns):
            raise DataError(
                f"{path.name}:{number}: expected {len(columns)} columns, got {len(fields)}")
        yield number, dict(zip(columns, fields))


def _parse_int(value: str, where: str, column: str) -> int:
    try:
        return int(value)
    except ValueError:
        raise DataError(f"{where}: column {column!r}: not an integer: {value!r}") from None


@dataclass
class Project:
    """All state of one annotation project.

    The judgment log is append-only: ``append_judgments`` is the only way
    rows enter, rows never change, and replaying the log reconstructs every
    graph.  Round mutations go through ``commit_round`` which persists
    batch and clustering files first and the round counter last, so an
    interrupted commit leaves the stored project at its previous round.
    """

    project_id: str
    usages: dict[str, Usage]
    senses: dict[str, SenseDescription] = field(default_factory=dict)
    judgments: list[Judgment] = field(default_factory=list)
    periods: tuple[int, ...] = ()
    annotators: tuple[str, ...] = ()
    round: int = 0
    config: dict = field(default_factory=dict)
    complete: set[str] = field(default_factory=set)
    batches: dict[int, AnnotationBatch] = field(default_factory=dict)
    clusterings: dict[str, Clustering] = field(default_factory=dict)
    expired: dict[int, set[tuple[str, str, str]]] = field(default_factory=dict)
    path: Path | None = None
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    # -- derived views ------------------------------------------------------

    @property
    def lemmas(self) -> list[str]:
        return sorted({u.lemma for u in self.usages.values()}
                      | {s.lemma for s in self.senses.values()})

    def graph(self, lemma: str) -> WUG:
        """Build the lemma's graph from the current judgment log."""
        usages = [u for u in self.usages.values() if u.lemma == lemma]
        senses = [s for s in self.senses.values() if s.lemma == lemma]
        if not usages:
            raise DataError(f"unknown lemma {lemma!r}")
        ids = {u.identifier for u in usages} | {s.identifier for s in senses}
        judgments = [j for j in self.judgments if j.node1 in ids and j.node2 in ids]
        return build_wug(usages, judgments, senses)

    def lemma_of_pair(self, pair: Pair) -> str:
        node = pair[0] if not pair[0].startswith(SENSE_PREFIX) else pair[1]
        return self.usages[node].lemma

    # -- judgment log -------------------------------------------------------

    def append_judgments(
        self, rows: Sequence[Judgment], require_batch: bool = False
    ) -> list[tuple[int, str]]:
        """Append validated rows to the log; returns (index, reason) rejects.

        Rejection reasons: annotator off the roster, unknown node ids,
        duplicate (pair, annotator, round), or (with ``require_batch``) a
        pair that is not an assigned open-batch task for this round.
        """
        with self._lock:
            seen = {(j.pair, j.annotator, j.round) for j in self.judgments}
            batch = self.batches.get(self.round)
            rejected: list[tuple[int, str]] = []
            accepted: list[Judgment] = []
            for index, j in enumerate(rows):
                if j.annotator not in self.annotators:
                    rejected.append((index, f"annotator {j.annotator!r} not on roster"))
                    continue
                unknown = [n for n in j.pair
                           if n not in self.usages and n not in self.senses]
                if unknown:
                    rejected.append((index, f"unknown node {unknown[0]!r}"))
                    continue
                key = (j.pair, j.annotator, j.round)
                if key in seen:
                    rejected.append((index, f"duplicate judgment {key}"))
                    continue
                if require_batch:
                    if batch is None or j.round != self.round:
                        rejected.append((index, f"round {j.round} is not open"))
                        continue
                    if j.annotator not in batch.assignments.get(j.pair, ()):
                        rejected.append((index, f"pair {j.pair} not assigned to {j.annotator!r}"))
                        continue
                seen.add(key)
                accepted.append(j)
            self.judgments.extend(accepted)
            if self.path is not None and accepted:
                with (self.path / "judgments.tsv").open("a", encoding="utf-8") as fh:
                    for j in accepted:
                        fh.write("\t".join(_judgment_row(j)) + "\n")
                    fh.flush()
            return rejected

    # -- round lifecycle ----------------------------------------------------

    def open_pairs(self) -> list[tuple[Pair, str]]:
        """(pair, annotator) tasks of the current round still lacking a judgment."""
        batch = self.batches.get(self.round)
        if batch is None:
            return []
        done = {(j.pair, j.annotator) for j in self.judgments if j.round == self.round}
        gone = {((a, b), ann) for a, b, ann in self.expired.get(self.round, set())}
        out = []
        for pair in batch.pairs:
            for annotator in batch.assignments.get(pair, ()):
                if (pair, annotator) in done or (pair, annotator) in gone:
                    continue
                out.append((pair, annotator))
        return out

    def expire_open_tasks(self) -> int:
        """Mark every open task of the current round as expired (admin action)."""
        with self._lock:
            open_tasks = self.open_pairs()
            bucket = self.expired.setdefault(self.round, set())
            for pair, annotator in open_tasks:
                bucket.add((pair[0], pair[1], annotator))
            return len(open_tasks)

    def commit_round(
        self,
        new_round: int,
        batch: AnnotationBatch | None,
        clusterings: dict[str, Clustering],
        newly_complete: Iterable[str] = (),
    ) -> None:
        """Atomically advance to ``new_round``.

        In-memory state flips only after all side files are written; the
        stored round counter (project.json) is written last via a rename,
        so a crash mid-commit leaves the persisted project unchanged.
        """
        with self._lock:
            staged_batches = dict(self.batches)
            if batch is not None:
                staged_batches[new_round] = batch
            staged_clusterings = dict(self.clusterings)
            staged_clusterings.update(clusterings)
            staged_complete = set(self.complete) | set(newly_complete)
            if self.path is not None:
                if batch is not None:
                    _write_batch(self.path, new_round, batch)
                _write_clusterings(self.path, staged_clusterings)
                staged = {
                    "round": new_round,
                    "complete": sorted(staged_complete),
                }
                _write_project_json(self.path, self, override=staged)
            self.batches = staged_batches
            self.clusterings = staged_clusterings
            self.complete = staged_complete
            self.round = new_round

    # -- persistence --------------------------------------------------------

    def save(self, path: str | Path) -> None:
        """Write the whole project to a directory and bind to it."""
        path = Path(path)
        path.mkdir(parents=True, exist_ok=True)
        _write_tsv(path / "usages.tsv", USAGE_COLUMNS,
                   (_usage_row(u) for u in sorted(self.usages.values(),
                                                  key=lambda u: u.identifier)))
        _write_tsv(path / "senses.tsv", SENSE_COLUMNS,
                   (_sense_row(s) for s in sorted(self.senses.values(),
                                                  key=lambda s: s.sense_id)))
        _write_tsv(path / "judgments.tsv", JUDGMENT_COLUMNS,
                   (_judgment_row(j) for j in self.judgments))
        (path / "batches").mkdir(exist_ok=True)
        for round_no, batch in sorted(self.batches.items()):
            _write_batch(path, round_no, batch)
        _write_clusterings(path, self.clusterings)
        self.path = path
        _write_project_json(path, self)


def _usage_row(u: Usage) -> list[str]:
    return [u.lemma, u.pos, str(u.grouping), u.identifier, u.context,
            str(u.target_span[0]), str(u.target_span[1]),
            "" if u.date is None else str(u.date)]


def _sense_row(s: SenseDescription) -> list[str]:
    return [s.lemma, s.sense_id, s.definition]


def _judgment_row(j: Judgment) -> list[str]:
    first, second = j.pair
    if first.startswith(SENSE_PREFIX) and not second.startswith(SENSE_PREFIX):
        first, second = second, first
    return [first, second, j.annotator, str(j.score), j.comment, str(j.round)]


def _write_batch(path: Path, round_no: int, batch: AnnotationBatch) -> None:
    rows = []
    for pair in batch.pairs:
        assigned = batch.assignments.get(pair, ()) or ("",)
        for annotator in assigned:
            first, second = pair
            if first.startswith(SENSE_PREFIX) and not second.startswith(SENSE_PREFIX):
                first, second = second, first
            rows.append([first, second, annotator, "",
                         batch.provenance.get(pair, ""), str(round_no)])
    (path / "batches").mkdir(exist_ok=True)
    _write_tsv(path / "batches" / f"round_{round_no:03d}.tsv", JUDGMENT_COLUMNS, rows)


def _read_batch(path: Path, round_no: int) -> AnnotationBatch:
    pairs: list[Pair] = []
    provenance: dict[Pair, str] = {}
    assignments: dict[Pair, list[str]] = {}
    file = path / "batches" / f"round_{round_no:03d}.tsv"
    for number, row in _read_tsv(file, JUDGMENT_COLUMNS):
        try:
            pair = canonical_pair(row["identifier1"], row["identifier2"])
        except GraphError as exc:
            raise DataError(f"{file.name}:{number}: {exc}") from None
        if pair not in provenance:
            pairs.append(pair)
            provenance[pair] = row["comment"]
            assignments[pair] = []
        if row["annotator"]:
            assignments[pair].append(row["annotator"])
    return AnnotationBatch(
        round=round_no,
        pairs=tuple(pairs),
        provenance=provenance,
        assignments={p: tuple(a) for p, a in assignments.items()},
    )


def _clustering_to_doc(c: Clustering) -> dict:
    return {
        "assignment": dict(sorted(c.assignment.items())),
        "loss": c.loss,
        "normalized_loss": c.normalized_loss,
        "isolates": sorted(c.isolates),
    }


def _clustering_from_doc(doc: dict) -> Clustering:
    return Clustering(
        assignment={k: int(v) for k, v in doc["assignment"].items()},
        loss=float(doc["loss"]),
        normalized_loss=float(doc["normalized_loss"]),
        isolates=tuple(doc["isolates"]),
    )


def _write_clusterings(path: Path, clusterings: dict[str, Clustering]) -> None:
    doc = {lemma: _clustering_to_doc(c) for lemma, c in sorted(clusterings.items())}
    _atomic_write_json(path / "clusterings.json", doc)


def _write_project_json(path: Path, project: Project, override: dict | None = None) -> None:
    doc = {
        "project_id": project.project_id,
        "periods": list(project.periods),
        "annotators": list(project.annotators),
        "round": project.round,
        "config": project.config,
        "complete": sorted(project.complete),
        "expired": {str(r): sorted(list(t) for t in triples)
                    for r, triples in project.expired.items()},
    }
    if override:
        doc.update(override)
    _atomic_write_json(path / "project.json", doc)


def _atomic_write_json(path: Path, doc: dict) -> None:
    data = json.dumps(doc, sort_keys=True, indent=2, ensure_ascii=False) + "\n"
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text(data, encoding="utf-8")
    tmp.replace(path)


def ingest(
    usages_path: str | Path,
    senses_path: str | Path | None = None,
    judgments_path: str | Path | None = None,
    project_id: str = "project",
    periods: Sequence[int] | None = None,
    annotators: Sequence[str] | None = None,
    config: dict | None = None,
) -> Project:
    """Parse and validate the TSV tables into a fresh project.

    Duplicate identifiers, judgments on unknown nodes, bad scores, and
    malformed rows are rejected with file:line positions.  Periods and the
    annotator roster default to what the data mentions.
    """
    usages_path = Path(usages_path)
    usages: dict[str, Usage] = {}
    declared = set(periods) if periods is not None else None
    seen_periods: set[int] = set()
    for number, row in _read_tsv(usages_path, USAGE_COLUMNS):
        where = f"{usages_path.name}:{number}"
        grouping = _parse_int(row["grouping"], where, "grouping")
        if declared is not None and grouping not in declared:
            raise DataError(f"{where}: unknown period label {grouping!r}")
        seen_periods.add(grouping)
        identifier = row["identifier"]
        if identifier in usages:
            raise DataError(f"{where}: duplicated identifier {identifier!r}")
        if identifier.startswith(SENSE_PREFIX):
            raise DataError(f"{where}: usage identifier may not start with {SENSE_PREFIX!r}")
        date = row["date"].strip()
        try:
            usage = Usage(
                identifier=identifier,
                lemma=row["lemma"],
                pos=row["pos"],
                grouping=grouping,
                context=row["context"],
                target_span=(_parse_int(row["target_start"], where, "target_start"),
                             _parse_int(row["target_end"], where, "target_end")),
                date=int(date) if date else None,
            )
        except GraphError as exc:
            raise DataError(f"{where}: {exc}") from None
        usages[identifier] = usage

    senses: dict[str, SenseDescription] = {}
    if senses_path is not None:
        senses_path = Path(senses_path)
        for number, row in _read_tsv(senses_path, SENSE_COLUMNS):
            where = f"{senses_path.name}:{number}"
            sense = SenseDescription(sense_id=row["sense_id"], lemma=row["lemma"],
                                     definition=row["definition"])
            if sense.identifier in senses:
                raise DataError(f"{where}: duplicated sense_id {sense.sense_id!r}")
            senses[sense.identifier] = sense

    judgments: list[Judgment] = []
    seen_keys: set[tuple[Pair, str, int]] = set()
    max_round = 0
    seen_annotators: set[str] = set()
    sense_lemmas = {s.lemma for s in senses.values()}

    def node_lemma(node: str) -> str:
        return senses[node].lemma if node in senses else usages[node].lemma

    if judgments_path is not None:
        judgments_path = Path(judgments_path)
        for number, row in _read_tsv(judgments_path, JUDGMENT_COLUMNS):
            where = f"{judgments_path.name}:{number}"
            for column in ("identifier1", "identifier2"):
                node = row[column]
                if node not in usages and node not in senses:
                    raise DataError(f"{where}: unknown node {node!r}")
            n1, n2 = row["identifier1"], row["identifier2"]
            if node_lemma(n1) != node_lemma(n2):
                raise DataError(f"{where}: edge spans lemmas "
                                f"{node_lemma(n1)!r} and {node_lemma(n2)!r}")
            sense_sides = (n1 in senses) + (n2 in senses)
            if sense_sides == 2:
                raise DataError(f"{where}: sense-sense edges are not allowed")
            if sense_sides == 0 and node_lemma(n1) in sense_lemmas:
                raise DataError(
                    f"{where}: usage-usage edge in sense-annotated lemma "
                    f"{node_lemma(n1)!r}")
            score = _parse_int(row["judgment"], where, "judgment")
            round_no = _parse_int(row["round"], where, "round") if row["round"].strip() else 1
            try:
                j = Judgment(node1=row["identifier1"], node2=row["identifier2"],
                             annotator=row["annotator"], score=score,
                             comment=row["comment"], round=round_no)
            except GraphError as exc:
                raise DataError(f"{where}: {exc}") from None
            key = (j.pair, j.annotator, j.round)
            if key in seen_keys:
                raise DataError(f"{where}: duplicate judgment {key}")
            seen_keys.add(key)
            seen_annotators.add(j.annotator)
            max_round = max(max_round, j.round)
            judgments.append(j)

    roster = tuple(annotators) if annotators is not None else tuple(sorted(seen_annotators))
    return Project(
        project_id=project_id,
        usages=usages,
        senses=senses,
        judgments=judgments,
        periods=tuple(sorted(declared if declared is not None else seen_periods)),
        annotators=roster,
        round=max_round,
        config=dict(config or {}),
    )


def load(path: str | Path) -> Project:
    """Read a saved project directory back into memory."""
    path = Path(path)
    doc = json.loads((path / "project.json").read_text(encoding="utf-8"))
    senses = path / "senses.tsv"
    judgments = path / "judgments.tsv"
    project = ingest(
        path / "usages.tsv",
        senses if senses.exists() else None,
        judgments if judgments.exists() else None,
        project_id=doc["project_id"],
        periods=doc["periods"],
        annotators=doc["annotators"],
        config=doc.get("config", {}),
    )
    project.round = doc["round"]
    project.complete = set(doc.get("complete", ()))
    project.expired = {
        int(r): {tuple(t) for t in triples}
        for r, triples in doc.get("expired", {}).items()
    }
    batches_dir = path / "batches"
    if batches_dir.is_dir():
        for file in sorted(batches_dir.glob("round_*.tsv")):
            round_no = int(file.stem.split("_")[1])
            project.batches[round_no] = _read_batch(path, round_no)
    clusterings_file = path / "clusterings.json"
    if clusterings_file.exists():
        stored = json.loads(clusterings_file.read_text(encoding="utf-8"))
        project.clusterings = {lemma: _clustering_from_doc(d) for lemma, d in stored.items()}
    project.path = path
    return project


def export_graph(project: Project, lemma: str,
                 clustering: Clustering | None = None) -> dict:
    """Deterministic JSON document for one lemma's graph.

    Nodes carry grouping, cluster id (when a clustering is known), and a
    structural isolate flag; edges carry the raw judgments, the median
    weight, and its shifted value.
    """
    g = project.graph(lemma)
    clustering = clustering if clustering is not None else project.clusterings.get(lemma)
    assignment = clustering.assignment if clustering else {}
    weighted_nodes = {n for pair in g.weights for n in pair}
    nodes = []
    for uid in sorted(g.usages):
        nodes.append({
            "id": uid,
            "sense": False,
            "grouping": g.usages[uid].grouping,
            "cluster": assignment.get(uid),
            "isolate": uid not in weighted_nodes,
        })
    for sid in sorted(g.senses):
        nodes.append({
            "id": sid,
            "sense": True,
            "grouping": None,
            "cluster": assignment.get(sid),
            "isolate": sid not in weighted_nodes,
            "definition": g.senses[sid].definition,
        })
    edges = []
    for pair in sorted(g.judgments):
        weight = g.weights.get(pair)
        edges.append({
            "node1": pair[0],
            "node2": pair[1],
            "judgments": [
                {"annotator": j.annotator, "score": j.score,
                 "round": j.round, "comment": j.comment}
                for j in sorted(g.judgments[pair],
                                key=lambda j: (j.round, j.annotator, j.score))
            ],
            "weight": weight,
            "shifted": None if weight is None else shift(weight),
        })
    doc = {
        "project_id": project.project_id,
        "lemma": lemma,
        "nodes": nodes,
        "edges": edges,
        "clustering": None if clustering is None else {
            "loss": clustering.loss,
            "normalized_loss": clustering.normalized_loss,
            "n_clusters": clustering.n_clusters,
        },
    }
    return doc


def graph_json_bytes(doc: dict) -> bytes:
    """Canonical serialization of an export document."""
    return (json.dumps(doc, sort_keys=True, indent=2, ensure_ascii=False) + "\n").encode("utf-8")
