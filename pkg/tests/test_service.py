"""Interactive evolution session service, driven through the HTTP API."""

import numpy as np
import pytest
from fastapi.testclient import TestClient

from greengrid.service import create_app


@pytest.fixture(scope="module")
def client():
    return TestClient(create_app())


def start(client, **overrides):
    body = {"preset": "pestilence", "arch": "minimal", "mutator": "basic",
            "n_candidates": 3, "seed": 5, "n_petri_steps": 40}
    body.update(overrides)
    r = client.post("/sessions", json=body)
    assert r.status_code == 200, r.text
    return r.json()["session_id"]


def test_session_lifecycle(client):
    sid = start(client)
    summary = client.get(f"/sessions/{sid}").json()
    assert summary["generation"] == 0
    assert summary["n_candidates"] == 3
    assert len(summary["candidates"]) == 3
    for card in summary["candidates"]:
        assert card["n_repro"] >= 0
        assert card["n_frames"] > 0

    frames = client.get(f"/sessions/{sid}/candidates/1/frames").json()
    assert frames["version"] == 1
    assert frames["height"] > 0 and frames["width"] > 0
    assert len(frames["frames"][0]) == frames["height"] * frames["width"]
    assert len(frames["palette"]) >= 8

    r = client.post(f"/sessions/{sid}/choice", json={"index": 1})
    assert r.status_code == 200
    after = r.json()
    assert after["generation"] == 1
    assert after["history"] == [1]
    assert len(after["candidates"]) == 3


def test_sequential_choices_supported(client):
    sid = start(client, n_candidates=2, n_petri_steps=15)
    for i in range(13):
        r = client.post(f"/sessions/{sid}/choice", json={"index": i % 2})
        assert r.status_code == 200
    assert client.get(f"/sessions/{sid}").json()["generation"] == 13


def test_invalid_choice_rejected(client):
    sid = start(client)
    r = client.post(f"/sessions/{sid}/choice", json={"index": 99})
    assert r.status_code == 400
    body = r.json()
    assert body["code"] == "bad_choice" and "message" in body
    assert client.get(f"/sessions/{sid}").json()["generation"] == 0


def test_unknown_session_404(client):
    r = client.get("/sessions/doesnotexist")
    assert r.status_code == 404
    assert r.json()["code"] == "no_such_session"


def test_session_ids_unique(client):
    assert start(client) != start(client)


def test_sigma_zero_children_equal_parent(client):
    sid = start(client, sigma=0.0, n_candidates=3, n_petri_steps=10)
    app_session = client.app.state.manager.get(sid)
    parent = app_session.parent.logic
    for cand in app_session.candidates:
        assert (cand.entry.logic == parent).all()


def test_candidates_deterministic_for_seed(client):
    a = start(client, seed=77, n_petri_steps=10)
    b = start(client, seed=77, n_petri_steps=10)
    sa = client.app.state.manager.get(a)
    sb = client.app.state.manager.get(b)
    for ca, cb in zip(sa.candidates, sb.candidates):
        assert (ca.entry.logic == cb.entry.logic).all()
        assert ca.n_repro == cb.n_repro


def test_deploy_before_any_choice_and_terminal(client):
    sid = start(client, n_candidates=2, n_petri_steps=10)
    r = client.post(f"/sessions/{sid}/deploy",
                    json={"width": 24, "height": 16, "steps": 15, "reps": 2})
    assert r.status_code == 200, r.text
    report = r.json()["report"]
    assert "total_agents_mean" in report and "extinction_pct" in report
    assert len(report["replicas"]) == 2
    # the state machine is start -> choose* -> deploy: nothing after deploy
    r = client.post(f"/sessions/{sid}/choice", json={"index": 0})
    assert r.status_code == 409
    r = client.post(f"/sessions/{sid}/deploy",
                    json={"width": 24, "height": 16, "steps": 5, "reps": 1})
    assert r.status_code == 409


def test_deploy_writes_replayable_record(client, tmp_path):
    sid = start(client, n_candidates=2, n_petri_steps=10)
    r = client.post(f"/sessions/{sid}/deploy",
                    json={"width": 24, "height": 16, "steps": 20, "reps": 1,
                          "out_dir": str(tmp_path / "deploy")})
    assert r.status_code == 200, r.text
    record_path = r.json()["record_path"]
    from greengrid.record import load_record, replay
    ok, problems = replay(load_record(record_path))
    assert ok, problems


def test_create_rejects_bad_input(client):
    r = client.post("/sessions", json={"preset": "nonesuch"})
    assert r.status_code == 400
    assert r.json()["code"] == "unknown_preset"
    r = client.post("/sessions", json={"preset": "pestilence", "mutator": "x"})
    assert r.status_code == 400
    r = client.post("/sessions", json={"preset": "pestilence",
                                       "n_candidates": 99})
    assert r.status_code == 400