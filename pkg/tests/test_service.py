import json

import pytest
from fastapi.testclient import TestClient

from helpers import make_split, quick_train
from replyrank.checkpoint import save_checkpoint
from replyrank.evaluation import relevance_report, report_to_doc
from replyrank.kmeans import KMeansConfig
from replyrank.service import ServiceConfig, create_app, load_service_config
from replyrank.store import read_annotations
from replyrank.templates import build_pool, save_pool


@pytest.fixture(scope="module")
def artifacts(tmp_path_factory):
    root = tmp_path_factory.mktemp("svc")
    split = make_split(n_intents=6, n_transcripts=160, seed=61)
    model, _ = quick_train(split, dim=16, epochs=2, seed=62)
    answers = sorted({p.answer for p in split.train if p.label == 1})
    pool, _ = build_pool(answers, model, KMeansConfig(k=8, seed=63, batch_size=64))
    ckpt = root / "model.denc"
    pool_path = root / "pool.json"
    save_checkpoint(model, ckpt)
    save_pool(pool, pool_path)
    return root, str(ckpt), str(pool_path)


def make_client(artifacts, tmp_path, **kwargs):
    root, ckpt, pool_path = artifacts
    cfg = ServiceConfig(
        checkpoint_path=ckpt,
        pool_path=pool_path,
        store_path=str(tmp_path / "annotations.jsonl"),
        session_log_path=str(tmp_path / "sessions.jsonl"),
        **kwargs,
    )
    return TestClient(create_app(cfg)), cfg


def test_recommend_returns_sorted_top_k(artifacts, tmp_path):
    client, _ = make_client(artifacts, tmp_path)
    r = client.post("/v1/recommend",
                    json={"question": "can i cancel the order ?", "k": 3})
    assert r.status_code == 200
    body = r.json()
    assert set(body) == {"qid", "ranked"}
    assert len(body["ranked"]) == 3
    scores = [c["score"] for c in body["ranked"]]
    assert scores == sorted(scores, reverse=True)
    assert all(set(c) == {"id", "text", "score"} for c in body["ranked"])


def test_recommend_validation(artifacts, tmp_path):
    client, _ = make_client(artifacts, tmp_path)
    assert client.post("/v1/recommend", json={"question": "", "k": 3}).status_code == 400
    assert client.post("/v1/recommend", json={"question": "   ", "k": 3}).status_code == 400
    assert client.post("/v1/recommend", json={"question": "hi ?", "k": 0}).status_code == 400
    assert client.post("/v1/recommend", json={"question": "hi ?", "k": 51}).status_code == 400
    assert client.post(
        "/v1/recommend", json={"question": "hi ?", "scorer": "magic"}
    ).status_code == 400


def test_recommend_deterministic_with_fresh_qids(artifacts, tmp_path):
    client, _ = make_client(artifacts, tmp_path)
    payload = {"question": "where is my package ?", "k": 5}
    a = client.post("/v1/recommend", json=payload).json()
    b = client.post("/v1/recommend", json=payload).json()
    assert a["ranked"] == b["ranked"]
    assert a["qid"] != b["qid"]


def test_recommend_tfidf_scorer(artifacts, tmp_path):
    client, _ = make_client(artifacts, tmp_path)
    r = client.post(
        "/v1/recommend",
        json={"question": "is the refund done ?", "scorer": "tfidf", "k": 3},
    )
    assert r.status_code == 200
    assert len(r.json()["ranked"]) == 3


def test_degraded_mode_returns_503(tmp_path):
    cfg = ServiceConfig(store_path=str(tmp_path / "a.jsonl"))
    client = TestClient(create_app(cfg))
    r = client.post("/v1/recommend", json={"question": "hello ?"})
    assert r.status_code == 503
    assert client.get("/v1/templates").status_code == 503


def test_templates_listing(artifacts, tmp_path):
    client, _ = make_client(artifacts, tmp_path)
    r = client.get("/v1/templates")
    assert r.status_code == 200
    templates = r.json()["templates"]
    assert len(templates) == 8
    assert set(templates[0]) == {"id", "text", "cluster_size"}


def test_annotation_lifecycle(artifacts, tmp_path):
    client, cfg = make_client(artifacts, tmp_path)
    rec = client.post("/v1/recommend",
                      json={"question": "can i return the shoes ?", "k": 3}).json()
    qid = rec["qid"]
    tid = rec["ranked"][0]["id"]

    r = client.post("/v1/annotations",
                    json={"qid": qid, "tid": tid, "score": 3, "annotator": "agent7"})
    assert r.status_code == 201
    assert r.json()["rank"] == 1

    report = client.get("/v1/report").json()
    assert report["relevance"]["dual_encoder"]["n_annotations"] == 1
    assert report["relevance"]["dual_encoder"]["histogram"]["3"] == 1

    # Duplicate triple: rejected, store unchanged.
    dup = client.post("/v1/annotations",
                      json={"qid": qid, "tid": tid, "score": 1, "annotator": "agent7"})
    assert dup.status_code == 409
    assert client.get("/v1/report").json() == report

    # Same template, different annotator: fine.
    ok = client.post("/v1/annotations",
                     json={"qid": qid, "tid": tid, "score": 2, "annotator": "agent8"})
    assert ok.status_code == 201


def test_annotation_validation(artifacts, tmp_path):
    client, _ = make_client(artifacts, tmp_path)
    rec = client.post("/v1/recommend",
                      json={"question": "how do i track my order ?", "k": 3}).json()
    qid, ranked = rec["qid"], rec["ranked"]
    shown = {c["id"] for c in ranked}
    unshown = next(i for i in range(10_000) if i not in shown)

    assert client.post(
        "/v1/annotations",
        json={"qid": "nope", "tid": ranked[0]["id"], "score": 2, "annotator": "a"},
    ).status_code == 404
    assert client.post(
        "/v1/annotations",
        json={"qid": qid, "tid": 999999, "score": 2, "annotator": "a"},
    ).status_code == 404
    if unshown < 8:  # template exists in pool but was not recommended
        assert client.post(
            "/v1/annotations",
            json={"qid": qid, "tid": unshown, "score": 2, "annotator": "a"},
        ).status_code == 404
    assert client.post(
        "/v1/annotations",
        json={"qid": qid, "tid": ranked[0]["id"], "score": 4, "annotator": "a"},
    ).status_code == 422
    assert client.post(
        "/v1/annotations",
        json={"qid": qid, "tid": ranked[1]["id"], "score": 2, "annotator": "a",
              "rank": 1},
    ).status_code == 422
    assert client.post(
        "/v1/annotations",
        json={"qid": qid, "tid": ranked[0]["id"], "score": 2, "annotator": "  "},
    ).status_code == 422


def test_report_matches_offline_aggregation(artifacts, tmp_path):
    client, cfg = make_client(artifacts, tmp_path)
    for i, question in enumerate(
        ["is the refund done ?", "can you upgrade the shipping ?", "hi are you there ?"]
    ):
        rec = client.post("/v1/recommend", json={"question": question, "k": 3}).json()
        for j, cand in enumerate(rec["ranked"]):
            client.post(
                "/v1/annotations",
                json={"qid": rec["qid"], "tid": cand["id"],
                      "score": (i + j) % 3 + 1, "annotator": "agent1"},
            )
    served = client.get("/v1/report").json()
    offline = report_to_doc(
        relevance_report(list(read_annotations(cfg.store_path)))
    )
    assert served == offline


def test_eval_mode_interleaves_and_hides_scorer(artifacts, tmp_path):
    client, cfg = make_client(artifacts, tmp_path, eval_mode=True)
    scorers = []
    for i in range(4):
        rec = client.post(
            "/v1/recommend",
            json={"question": "why it has n't been shipped yet ?", "k": 3},
        )
        body = rec.json()
        assert "scorer" not in body
        assert all("scorer" not in c for c in body["ranked"])
        client.post(
            "/v1/annotations",
            json={"qid": body["qid"], "tid": body["ranked"][0]["id"],
                  "score": 3, "annotator": "agent1"},
        )
    stored = list(read_annotations(cfg.store_path))
    scorers = [a.scorer for a in stored]
    assert scorers == ["dual_encoder", "tfidf", "dual_encoder", "tfidf"]
    report = client.get("/v1/report").json()
    assert set(report["relevance"]) == {"dual_encoder", "tfidf"}


def test_sessions_and_store_survive_restart(artifacts, tmp_path):
    root, ckpt, pool_path = artifacts
    cfg = ServiceConfig(
        checkpoint_path=ckpt,
        pool_path=pool_path,
        store_path=str(tmp_path / "a.jsonl"),
        session_log_path=str(tmp_path / "s.jsonl"),
    )
    client = TestClient(create_app(cfg))
    rec = client.post("/v1/recommend", json={"question": "where is my book ?"}).json()
    client.post("/v1/annotations",
                json={"qid": rec["qid"], "tid": rec["ranked"][0]["id"],
                      "score": 2, "annotator": "agent9"})
    # Torn write then restart.
    with open(cfg.store_path, "a", encoding="utf-8") as fp:
        fp.write('{"qid": "torn-off')
    client2 = TestClient(create_app(cfg))
    report = client2.get("/v1/report").json()
    assert report["relevance"]["dual_encoder"]["n_annotations"] == 1
    # The annotated qid is still known after restart.
    dup = client2.post(
        "/v1/annotations",
        json={"qid": rec["qid"], "tid": rec["ranked"][0]["id"],
              "score": 2, "annotator": "agent9"},
    )
    assert dup.status_code == 409


def test_empty_store_report(artifacts, tmp_path):
    client, _ = make_client(artifacts, tmp_path)
    assert client.get("/v1/report").json() == {
        "ranking": {}, "mrr_p_value": None, "relevance": {}
    }


def test_eval_questions_endpoint(artifacts, tmp_path):
    questions = ["where is my order ?", "can i get a refund ?"]
    qpath = tmp_path / "eval-questions.json"
    qpath.write_text(json.dumps(questions))
    client, _ = make_client(artifacts, tmp_path, eval_questions_path=str(qpath))
    assert client.get("/eval-questions.json").json() == questions


def test_console_static_mount(artifacts, tmp_path):
    console = tmp_path / "console"
    console.mkdir()
    (console / "index.html").write_text("<!doctype html><title>console</title>")
    client, _ = make_client(artifacts, tmp_path, console_dir=str(console))
    r = client.get("/console/")
    assert r.status_code == 200
    assert "console" in r.text


def test_config_file_loading(tmp_path, artifacts):
    root, ckpt, pool_path = artifacts
    path = tmp_path / "service.json"
    path.write_text(json.dumps({
        "port": 9001,
        "checkpoint_path": ckpt,
        "pool_path": pool_path,
        "store_path": str(tmp_path / "a.jsonl"),
    }))
    cfg = load_service_config(path, port=9002)
    assert cfg.port == 9002  # override wins
    assert cfg.checkpoint_path == ckpt
    with pytest.raises(ValueError):
        bad = tmp_path / "bad.json"
        bad.write_text('{"nonsense_key": 1}')
        load_service_config(bad)
