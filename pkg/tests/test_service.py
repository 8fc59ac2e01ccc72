import json

import pytest
from fastapi.testclient import TestClient

from wugs import AnnealConfig, SamplingConfig, Usage
from wugs.service import create_app
from wugs.storage import Project

ANNEAL = AnnealConfig(max_iterations=2000, restarts_per_k=2, seed=0)
SAMPLING = SamplingConfig(seed=0)


def make_project(n=12, senses=("alpha",), path=None):
    """One-lemma project; each usage's context names its sense keyword."""
    usages = {}
    for i in range(n):
        keyword = senses[i % len(senses)]
        context = f"the word appears near {keyword} here"
        start = context.index("word")
        usages[f"u{i:02d}"] = Usage(
            identifier=f"u{i:02d}", lemma="word", pos="NN",
            grouping=1 if i < n // 2 else 2,
            context=context, target_span=(start, start + 4))
    project = Project(project_id="demo", usages=usages,
                      annotators=("alice", "bob"), periods=(1, 2))
    if path is not None:
        project.save(path)
    return project


def score_task(task):
    """Blind scoring rule: same sense keyword in both contexts -> 4, else 1."""
    def keyword(side):
        if side["kind"] == "sense":
            return side["definition"]
        return side["context"].split("near ")[1].split()[0]

    return 4 if keyword(task["first"]) == keyword(task["second"]) else 1


def drain_annotator(client, annotator, limit=500):
    """Fetch-and-submit loop; returns the tasks seen."""
    seen = []
    for _ in range(limit):
        r = client.get("/projects/demo/tasks/next", params={"annotator": annotator})
        assert r.status_code == 200
        task = r.json()["task"]
        if task is None:
            return seen
        seen.append(task)
        r = client.post("/projects/demo/judgments", json={
            "annotator": annotator, "task_id": task["task_id"],
            "score": score_task(task)})
        assert r.status_code == 200, r.text
    raise AssertionError("annotator queue did not drain")


@pytest.fixture
def app_client():
    project = make_project()
    app = create_app(project, anneal_cfg=ANNEAL, sampling_cfg=SAMPLING)
    return project, TestClient(app)


def advance(client, expire=False):
    return client.post("/projects/demo/rounds/advance",
                       json={"expire_open": expire})


class TestTaskFlow:
    def test_no_round_open_is_conflict(self, app_client):
        _, client = app_client
        r = client.get("/projects/demo/tasks/next", params={"annotator": "alice"})
        assert r.status_code == 409

    def test_unknown_annotator_404(self, app_client):
        _, client = app_client
        advance(client)
        r = client.get("/projects/demo/tasks/next", params={"annotator": "mallory"})
        assert r.status_code == 404

    def test_fresh_batch_serves_contexts_and_scale(self, app_client):
        _, client = app_client
        assert advance(client).status_code == 200
        r = client.get("/projects/demo/tasks/next", params={"annotator": "alice"})
        task = r.json()["task"]
        if task is None:  # round-1 pair may have gone to bob only
            r = client.get("/projects/demo/tasks/next", params={"annotator": "bob"})
            task = r.json()["task"]
        assert task["first"]["kind"] == "usage"
        assert "context" in task["first"] and "context" in task["second"]
        labels = {entry["score"]: entry["label"] for entry in task["scale"]}
        assert labels == {4: "Identical", 3: "Closely Related",
                          2: "Distantly Related", 1: "Unrelated", 0: "Cannot decide"}
        assert task["lemma"] == "word"

    def test_no_period_information_in_any_task_payload(self, app_client):
        project, client = app_client
        advance(client)
        for round_no in (1, 2):
            for annotator in project.annotators:
                while True:
                    r = client.get("/projects/demo/tasks/next",
                                   params={"annotator": annotator})
                    payload = r.json()
                    raw = json.dumps(payload)
                    assert "grouping" not in raw
                    assert "period" not in raw
                    assert "date" not in raw
                    assert '"id"' not in raw and "identifier" not in raw
                    task = payload["task"]
                    if task is None:
                        break
                    client.post("/projects/demo/judgments", json={
                        "annotator": annotator, "task_id": task["task_id"],
                        "score": score_task(task)})
            if round_no == 1:
                advance(client)

    def test_annotator_never_sees_a_judged_pair_again(self, app_client):
        _, client = app_client
        advance(client)
        for annotator in ("alice", "bob"):
            tasks = drain_annotator(client, annotator)
            ids = [t["task_id"] for t in tasks]
            assert len(ids) == len(set(ids))
            r = client.get("/projects/demo/tasks/next", params={"annotator": annotator})
            assert r.json()["task"] is None

    def test_progress_counts(self, app_client):
        _, client = app_client
        advance(client)
        r = client.get("/projects/demo/tasks/next", params={"annotator": "alice"})
        payload = r.json()
        if payload["task"] is not None:
            total = payload["task"]["progress"]["total"]
            assert payload["task"]["progress"]["done"] == 0
            drain_annotator(client, "alice")
            r = client.get("/projects/demo/tasks/next", params={"annotator": "alice"})
            assert r.json()["progress"] == {"done": total, "total": total}


class TestSubmission:
    def submit(self, client, annotator, task_id, score=3):
        return client.post("/projects/demo/judgments", json={
            "annotator": annotator, "task_id": task_id, "score": score})

    def first_task(self, client, annotator):
        r = client.get("/projects/demo/tasks/next", params={"annotator": annotator})
        return r.json()["task"]

    def test_valid_submission_acks_and_grows_log(self, app_client):
        project, client = app_client
        advance(client)
        for annotator in ("alice", "bob"):
            task = self.first_task(client, annotator)
            if task is not None:
                break
        before = len(project.judgments)
        r = self.submit(client, annotator, task["task_id"], score=3)
        assert r.status_code == 200
        assert r.json()["log_length"] == before + 1

    def test_score_out_of_scale_rejected(self, app_client):
        _, client = app_client
        advance(client)
        for annotator in ("alice", "bob"):
            task = self.first_task(client, annotator)
            if task is not None:
                break
        r = self.submit(client, annotator, task["task_id"], score=7)
        assert r.status_code == 422

    def test_resubmission_rejected_original_preserved(self, app_client):
        project, client = app_client
        advance(client)
        for annotator in ("alice", "bob"):
            task = self.first_task(client, annotator)
            if task is not None:
                break
        assert self.submit(client, annotator, task["task_id"], score=4).status_code == 200
        r = self.submit(client, annotator, task["task_id"], score=1)
        assert r.status_code == 409
        stored = [j for j in project.judgments if j.round == 1]
        assert stored[-1].score == 4

    def test_foreign_task_rejected(self, app_client):
        _, client = app_client
        advance(client)
        for annotator, other in (("alice", "bob"), ("bob", "alice")):
            task = self.first_task(client, annotator)
            if task is not None:
                r = self.submit(client, other, task["task_id"])
                assert r.status_code in (403, 409)
                return
        raise AssertionError("no task served")


class TestAdvanceRound:
    def test_round2_is_pure_combination(self, app_client):
        project, client = app_client
        advance(client)
        drain_annotator(client, "alice")
        drain_annotator(client, "bob")
        r = advance(client)
        assert r.status_code == 200
        assert r.json()["round"] == 2
        batch = project.batches[2]
        assert batch.pairs
        assert all(batch.provenance[p] == "combination" for p in batch.pairs)
        counts = r.json()["batch_provenance"]
        assert set(counts) == {"combination"}
        assert counts["combination"] == len(batch.pairs)

    def test_advance_blocked_while_tasks_open(self, app_client):
        _, client = app_client
        advance(client)
        r = advance(client)
        assert r.status_code == 409
        assert r.json()["detail"]["open_tasks"] > 0

    def test_expire_open_unblocks(self, app_client):
        project, client = app_client
        advance(client)
        r = advance(client, expire=True)
        assert r.status_code == 200
        assert project.round == 2

    def test_single_sense_project_completes(self, app_client):
        project, client = app_client
        advance(client)
        for _ in range(6):
            drain_annotator(client, "alice")
            drain_annotator(client, "bob")
            r = advance(client)
            assert r.status_code == 200
            if "word" in project.complete:
                break
        assert "word" in project.complete
        report = r.json()["lemmas"]["word"]
        assert report["complete"] is True
        assert report["n_clusters"] == 1

    def test_failed_advance_leaves_state_unchanged(self, tmp_path, monkeypatch):
        project = make_project(path=tmp_path / "store")
        app = create_app(project, anneal_cfg=ANNEAL, sampling_cfg=SAMPLING)
        client = TestClient(app, raise_server_exceptions=False)

        import wugs.storage as storage_module

        def boom(path, clusterings):
            raise RuntimeError("disk full")

        monkeypatch.setattr(storage_module, "_write_clusterings", boom)
        r = advance(client)
        assert r.status_code == 500
        monkeypatch.undo()

        from wugs.storage import load

        stored = load(tmp_path / "store")
        assert stored.round == 0
        assert project.round == 0
        assert project.batches == {}
        # retry succeeds and opens round 1 exactly once
        r = advance(client)
        assert r.status_code == 200
        assert project.round == 1
        assert load(tmp_path / "store").round == 1


class TestSnapshots:
    def test_empty_graph_before_annotation(self, app_client):
        _, client = app_client
        r = client.get("/projects/demo/lemmas/word/graph")
        assert r.status_code == 200
        doc = r.json()
        assert doc["edges"] == []
        assert doc["clustering"] is None

    def test_unknown_lemma_404(self, app_client):
        _, client = app_client
        assert client.get("/projects/demo/lemmas/nope/graph").status_code == 404

    def test_post_round_snapshot_has_clusters_and_loss(self, app_client):
        project, client = app_client
        advance(client)
        drain_annotator(client, "alice")
        drain_annotator(client, "bob")
        advance(client)
        doc = client.get("/projects/demo/lemmas/word/graph").json()
        assert doc["clustering"]["normalized_loss"] is not None
        clustered = [n for n in doc["nodes"] if not n["isolate"]]
        assert clustered
        assert all(n["cluster"] is not None for n in clustered)

    def test_stats_totals_match_log(self, app_client):
        project, client = app_client
        advance(client)
        drain_annotator(client, "alice")
        drain_annotator(client, "bob")
        stats = client.get("/projects/demo/stats").json()
        assert stats["total_judgments"] == len(project.judgments)
        counts = {int(k): v for k, v in stats["judgment_counts"].items()}
        assert sum(counts.values()) == len(project.judgments)


class TestAuth:
    def test_annotator_token_enforced(self):
        project = make_project()
        app = create_app(project, anneal_cfg=ANNEAL, sampling_cfg=SAMPLING,
                         tokens={"alice": "s3cret", "bob": "hunter2"},
                         admin_token="root")
        client = TestClient(app)
        r = client.post("/projects/demo/rounds/advance", json={},
                        headers={"X-Token": "root"})
        assert r.status_code == 200
        r = client.get("/projects/demo/tasks/next", params={"annotator": "alice"})
        assert r.status_code == 401
        r = client.get("/projects/demo/tasks/next", params={"annotator": "alice"},
                       headers={"X-Token": "wrong"})
        assert r.status_code == 401
        r = client.get("/projects/demo/tasks/next", params={"annotator": "alice"},
                       headers={"X-Token": "s3cret"})
        assert r.status_code == 200

    def test_admin_token_enforced(self):
        project = make_project()
        app = create_app(project, anneal_cfg=ANNEAL, sampling_cfg=SAMPLING,
                         admin_token="root")
        client = TestClient(app)
        assert client.post("/projects/demo/rounds/advance", json={}).status_code == 401
        assert client.get("/projects/demo/stats").status_code == 401
        r = client.post("/projects/demo/rounds/advance", json={},
                        headers={"X-Token": "root"})
        assert r.status_code == 200

    def test_unknown_project_404(self, app_client):
        _, client = app_client
        assert client.get("/projects/other/stats").status_code == 404
