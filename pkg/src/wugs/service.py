"""HTTP annotation service.

Annotators pull their next pair, submit a score, and repeat; an admin
advances rounds (cluster + sample) and reads graph/statistics snapshots.
Task queues are precomputed per annotator when a round opens, and every
annotator-facing payload hides the time period of the presented usages.

Auth is optional static tokens: per-annotator tokens and an admin token,
checked against the ``X-Token`` header when configured.
"""

from __future__ import annotations

import zlib

import numpy as np
from fastapi import FastAPI, Header, HTTPException, Query
from fastapi.middleware.cors import CORSMiddleware
from pydantic import BaseModel, Field

from .clustering import AnnealConfig
from .graph import SCALE_LABELS, Judgment
from .pipeline import advance_round, project_stats
from .sampling import Pair, SamplingConfig
from .storage import DataError, Project, export_graph


class JudgmentSubmission(BaseModel):
    annotator: str
    task_id: str
    score: int = Field(ge=0, le=4)
    comment: str = ""


class AdvanceRequest(BaseModel):
    expire_open: bool = False


def _task_entries(project: Project) -> list[tuple[Pair, str]]:
    """Deterministic (pair, annotator) task list of the current round."""
    batch = project.batches.get(project.round)
    if batch is None:
        return []
    entries = []
    for pair in batch.pairs:
        for annotator in batch.assignments.get(pair, ()):
            entries.append((pair, annotator))
    entries.sort()
    return entries


def _queue_order(project: Project, annotator: str, indexes: list[int]) -> list[int]:
    """Shuffle one annotator's task indexes, stable per (round, annotator)."""
    ss = np.random.SeedSequence(
        entropy=int(project.config.get("queue_seed", 0)),
        spawn_key=(project.round, zlib.crc32(annotator.encode("utf-8"))))
    rng = np.random.Generator(np.random.PCG64(ss))
    return [indexes[int(i)] for i in rng.permutation(len(indexes))]


def _render_side(project: Project, node_id: str) -> dict:
    """Annotator-facing rendering of one pair side; never exposes the
    usage's period, date, or identifier."""
    if node_id in project.senses:
        sense = project.senses[node_id]
        return {"kind": "sense", "definition": sense.definition}
    usage = project.usages[node_id]
    return {
        "kind": "usage",
        "context": usage.context,
        "target_start": usage.target_span[0],
        "target_end": usage.target_span[1],
    }


def _scale_payload() -> list[dict]:
    return [{"score": s, "label": SCALE_LABELS[s]} for s in (4, 3, 2, 1, 0)]


def create_app(
    project: Project,
    anneal_cfg: AnnealConfig | None = None,
    sampling_cfg: SamplingConfig | None = None,
    tokens: dict[str, str] | None = None,
    admin_token: str | None = None,
) -> FastAPI:
    """Build the service around one project.

    ``tokens`` maps annotator name to their static token; when omitted the
    service runs open (no auth), which is intended for tests and local use.
    """
    app = FastAPI(title="usage graph annotation service")
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )
    tokens = tokens or {}

    def require_project(pid: str) -> Project:
        if pid != project.project_id:
            raise HTTPException(status_code=404, detail=f"unknown project {pid!r}")
        return project

    def require_annotator(annotator: str, token: str | None) -> None:
        if annotator not in project.annotators:
            raise HTTPException(status_code=404, detail=f"unknown annotator {annotator!r}")
        if tokens and tokens.get(annotator) != token:
            raise HTTPException(status_code=401, detail="bad annotator token")

    def require_admin(token: str | None) -> None:
        if admin_token is not None and token != admin_token:
            raise HTTPException(status_code=401, detail="bad admin token")

    @app.get("/projects/{pid}/tasks/next")
    def next_task(pid: str, annotator: str = Query(...),
                  x_token: str | None = Header(default=None)):
        p = require_project(pid)
        require_annotator(annotator, x_token)
        if p.round == 0 or p.round not in p.batches:
            raise HTTPException(status_code=409, detail="no round is open")
        entries = _task_entries(p)
        mine = [i for i, (_, ann) in enumerate(entries) if ann == annotator]
        open_tasks = set(p.open_pairs())
        order = _queue_order(p, annotator, mine)
        done = sum(1 for i in mine if entries[i] not in open_tasks)
        progress = {"done": done, "total": len(mine)}
        for index in order:
            pair, _ = entries[index]
            if (pair, annotator) not in open_tasks:
                continue
            first, second = pair
            if second in p.senses and first not in p.senses:
                sides = (first, second)
            elif first in p.senses:
                sides = (second, first)
            else:
                task_hash = zlib.crc32(f"{p.round}:{index}".encode("utf-8"))
                sides = pair if task_hash % 2 == 0 else (second, first)
            return {"task": {
                "task_id": f"{p.round}:{index}",
                "lemma": p.lemma_of_pair(pair),
                "first": _render_side(p, sides[0]),
                "second": _render_side(p, sides[1]),
                "scale": _scale_payload(),
                "progress": progress,
            }}
        return {"task": None, "progress": progress}

    @app.post("/projects/{pid}/judgments")
    def submit_judgment(pid: str, body: JudgmentSubmission,
                        x_token: str | None = Header(default=None)):
        p = require_project(pid)
        require_annotator(body.annotator, x_token)
        entries = _task_entries(p)
        try:
            round_part, index_part = body.task_id.split(":")
            round_no, index = int(round_part), int(index_part)
        except ValueError:
            raise HTTPException(status_code=422, detail=f"malformed task id {body.task_id!r}")
        if round_no != p.round or not 0 <= index < len(entries):
            raise HTTPException(status_code=404, detail=f"unknown task {body.task_id!r}")
        pair, owner = entries[index]
        if owner != body.annotator:
            raise HTTPException(status_code=403, detail="task belongs to another annotator")
        if (pair, body.annotator) not in set(p.open_pairs()):
            raise HTTPException(status_code=409, detail="task already resolved")
        judgment = Judgment(node1=pair[0], node2=pair[1], annotator=body.annotator,
                            score=body.score, comment=body.comment, round=p.round)
        rejected = p.append_judgments([judgment], require_batch=True)
        if rejected:
            raise HTTPException(status_code=409, detail=rejected[0][1])
        remaining = sum(1 for (_, ann) in p.open_pairs() if ann == body.annotator)
        return {"ok": True, "log_length": len(p.judgments), "remaining": remaining}

    @app.post("/projects/{pid}/rounds/advance")
    def advance(pid: str, body: AdvanceRequest | None = None,
                x_token: str | None = Header(default=None)):
        p = require_project(pid)
        require_admin(x_token)
        body = body or AdvanceRequest()
        open_tasks = p.open_pairs()
        if open_tasks and not body.expire_open:
            raise HTTPException(
                status_code=409,
                detail={"message": "open tasks remain", "open_tasks": len(open_tasks)})
        if open_tasks:
            p.expire_open_tasks()
        report = advance_round(p, anneal_cfg, sampling_cfg)
        batch = p.batches.get(p.round)
        provenance_counts: dict[str, int] = {}
        if batch is not None:
            for pair in batch.pairs:
                tag = batch.provenance.get(pair, "")
                provenance_counts[tag] = provenance_counts.get(tag, 0) + 1
        return {
            "round": report.round,
            "batch_pairs": report.batch_pairs,
            "batch_provenance": provenance_counts,
            "lemmas": {
                lemma: {
                    "loss": entry.loss,
                    "normalized_loss": entry.normalized_loss,
                    "n_clusters": entry.n_clusters,
                    "removed_nodes": list(entry.removed_nodes),
                    "flags": list(entry.flags),
                    "batch_pairs": entry.batch_pairs,
                    "complete": entry.complete,
                }
                for lemma, entry in report.lemmas.items()
            },
        }

    @app.get("/projects/{pid}/lemmas/{lemma}/graph")
    def lemma_graph(pid: str, lemma: str,
                    x_token: str | None = Header(default=None)):
        p = require_project(pid)
        require_admin(x_token)
        try:
            return export_graph(p, lemma)
        except DataError as exc:
            raise HTTPException(status_code=404, detail=str(exc))

    @app.get("/projects/{pid}/stats")
    def stats(pid: str, x_token: str | None = Header(default=None)):
        p = require_project(pid)
        require_admin(x_token)
        return project_stats(p)

    return app
