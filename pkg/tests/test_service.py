import json

import pytest
from fastapi.testclient import TestClient

from divebench.service import create_app
from divebench.study import StudyConfig, StudyItem, aggregate, load_store

MODELS = ["m1", "m2", "m3", "m4"]


@pytest.fixture
def study(tmp_path):
    media_root = tmp_path / "media"
    media_root.mkdir()
    for m in MODELS:
        for item in ("v0", "v1"):
            d = media_root / m / item
            d.mkdir(parents=True)
            (d / "frame_00000.png").write_bytes(b"not-a-real-png")
            (d / "meta.json").write_text('{"count": 1, "fps": 8}')
    cfg = StudyConfig(
        study_id="s1",
        models=list(MODELS),
        items=[StudyItem(item_id=i, media={m: f"{m}/{i}" for m in MODELS})
               for i in ("v0", "v1")],
        dimensions=["dynamics", "overall"],
        n_volunteers_expected=4,
        media_root=str(media_root),
    )
    store = tmp_path / "study_s1.jsonl"
    return cfg, store, TestClient(create_app(cfg, store))


def _record(volunteer, item, dim, ranking):
    return {"volunteer_id": volunteer, "item_id": item, "dimension": dim,
            "ranking": ranking, "abstain": ranking is None, "timestamp": 0.0}


def test_unknown_study_404(study):
    _, _, client = study
    assert client.get("/api/study/other/assignment?volunteer=a").status_code == 404
    assert client.get("/api/study/other/results").status_code == 404


def test_assignment_policy(study):
    cfg, store, client = study
    body = client.get("/api/study/s1/assignment?volunteer=a").json()
    assert body["done"] is False
    assert body["item_id"] == "v0"  # tie on completion -> lowest item_id
    assert body["dimensions"] == ["dynamics", "overall"]
    assert set(body["media"]) == set(MODELS)
    assert body["media"]["m1"] == "/media/m1/v0"

    # volunteer a answers v0; next assignment is v1
    for dim in cfg.dimensions:
        r = client.post("/api/study/s1/response",
                        json=_record("a", "v0", dim, list(MODELS)))
        assert r.status_code == 201
    assert client.get("/api/study/s1/assignment?volunteer=a").json()["item_id"] == "v1"

    # volunteer b is steered to the lowest-completion item (v1)
    assert client.get("/api/study/s1/assignment?volunteer=b").json()["item_id"] == "v1"

    # a exhausts all items
    for dim in cfg.dimensions:
        assert client.post("/api/study/s1/response",
                           json=_record("a", "v1", dim, list(MODELS))).status_code == 201
    assert client.get("/api/study/s1/assignment?volunteer=a").json() == {"done": True}


def test_post_validation_and_duplicates(study):
    cfg, store, client = study
    ok = client.post("/api/study/s1/response",
                     json=_record("a", "v0", "overall", list(MODELS)))
    assert ok.status_code == 201
    assert len(store.read_text().splitlines()) == 1

    dup = client.post("/api/study/s1/response",
                      json=_record("a", "v0", "overall", list(reversed(MODELS))))
    assert dup.status_code == 409

    bad_perm = client.post("/api/study/s1/response",
                           json=_record("b", "v0", "overall", ["m1", "m1", "m2", "m3"]))
    assert bad_perm.status_code == 400
    assert "permutation" in bad_perm.json()["detail"]

    unknown_item = client.post("/api/study/s1/response",
                               json=_record("b", "vX", "overall", list(MODELS)))
    assert unknown_item.status_code == 400

    not_json = client.post("/api/study/s1/response", content=b"{{{",
                           headers={"content-type": "application/json"})
    assert not_json.status_code == 400

    abstain = client.post("/api/study/s1/response",
                          json=_record("b", "v0", "overall", None))
    assert abstain.status_code == 201

    # store only grew by the accepted records
    assert len(store.read_text().splitlines()) == 2


def test_results_round_trip_with_aggregator(study):
    cfg, store, client = study
    rankings = {
        "a": ["m2", "m1", "m3", "m4"],
        "b": ["m2", "m3", "m1", "m4"],
        "c": ["m1", "m2", "m4", "m3"],
    }
    for vol, ranking in rankings.items():
        for item in ("v0", "v1"):
            for dim in cfg.dimensions:
                r = client.post("/api/study/s1/response",
                                json=_record(vol, item, dim, ranking))
                assert r.status_code == 201
    via_http = client.get("/api/study/s1/results").json()
    records, problems = load_store(store, cfg)
    assert problems == []
    expected = aggregate(records, cfg)
    assert via_http["dimensions"] == json.loads(json.dumps(expected["dimensions"]))


def test_media_serving_and_traversal_guard(study):
    _, _, client = study
    ok = client.get("/media/m1/v0/frame_00000.png")
    assert ok.status_code == 200
    assert ok.content == b"not-a-real-png"
    assert client.get("/media/m1/v0/meta.json").status_code == 200
    assert client.get("/media/../study_s1.jsonl").status_code == 404
    assert client.get("/media/m1/v0/ghost.png").status_code == 404


def test_ui_mount(tmp_path):
    ui = tmp_path / "frontend"
    (ui / "dist").mkdir(parents=True)
    (ui / "index.html").write_text("<html>study</html>")
    (ui / "styles.css").write_text("body{}")
    (ui / "dist" / "app.js").write_text("export {}")
    cfg = StudyConfig(study_id="s1", models=["a", "b"],
                      items=[StudyItem(item_id="v0")],
                      dimensions=["overall"], n_volunteers_expected=2,
                      media_root=str(tmp_path))
    client = TestClient(create_app(cfg, tmp_path / "store.jsonl", ui_dir=ui))
    assert client.get("/").text == "<html>study</html>"
    assert client.get("/styles.css").status_code == 200
    assert client.get("/dist/app.js").status_code == 200
    assert client.get("/dist/../index.html").status_code == 404
