import threading

import pytest
from fastapi.testclient import TestClient

from tileguide.server import create_app

from conftest import corpus_source


@pytest.fixture()
def client():
    return TestClient(create_app())


@pytest.fixture()
def gaussian_src():
    return corpus_source("gaussian.pipe")


def make_session(client, src, machine=None):
    body = {"pipeline_source": src}
    if machine:
        body["machine"] = machine
    r = client.post("/sessions", json=body)
    assert r.status_code == 200, r.text
    return r.json()["session_id"], r.json()["state"]


def test_create_and_state_shape(client, gaussian_src):
    sid, state = make_session(client, gaussian_src)
    assert state["instruction"] == "Choose or type the tile range of Func blur."
    assert state["highlighted_func"] == "blur"
    assert state["phase"] == "tile_range"
    assert state["done"] is False
    assert {n["name"] for n in state["dependency_graph"]["nodes"]} == {
        "input", "kernel", "bounded", "blur_y", "blur",
    }
    flagged = [n for n in state["dependency_graph"]["nodes"] if n["highlighted"]]
    assert [n["name"] for n in flagged] == ["blur"]
    assert state["loop_nest"][0]["kind"] == "block"
    assert len(state["options"]) <= 5
    for o in state["options"]:
        assert set(o["cost"]) == {"total", "load", "store", "compute"}
    cost = state["current_cost"]
    assert cost["total"] == pytest.approx(
        cost["load"] + cost["store"] + cost["compute"]
    )


def test_get_after_mutation_is_pure_projection(client, gaussian_src):
    sid, _ = make_session(client, gaussian_src)
    r = client.post(
        f"/sessions/{sid}/choose",
        json={"option_id": client.get(f"/sessions/{sid}").json()["options"][0]["option_id"]},
    )
    assert r.status_code == 200
    assert client.get(f"/sessions/{sid}").json() == r.json()


def test_unknown_session_404(client):
    assert client.get("/sessions/nope").status_code == 404
    assert client.post("/sessions/nope/undo").status_code == 404


def test_stale_option_409(client, gaussian_src):
    sid, state = make_session(client, gaussian_src)
    old = state["options"][0]["option_id"]
    client.post(f"/sessions/{sid}/choose", json={"option_id": state["options"][1]["option_id"]})
    r = client.post(f"/sessions/{sid}/choose", json={"option_id": old})
    assert r.status_code == 409


def test_choose_after_undo_with_stale_id_409(client, gaussian_src):
    sid, state = make_session(client, gaussian_src)
    client.post(f"/sessions/{sid}/choose", json={"option_id": state["options"][0]["option_id"]})
    later = client.get(f"/sessions/{sid}").json()["options"][0]["option_id"]
    client.post(f"/sessions/{sid}/undo")
    r = client.post(f"/sessions/{sid}/choose", json={"option_id": later})
    assert r.status_code == 409


def test_invalid_tile_422(client, gaussian_src):
    sid, _ = make_session(client, gaussian_src)
    r = client.post(f"/sessions/{sid}/tile", json={"range_x": 0, "range_y": 4})
    assert r.status_code == 422
    assert "range" in r.json()["detail"]


def test_invalid_pipeline_422(client):
    r = client.post(
        "/sessions", json={"pipeline_source": "pipeline p\nfunc f(x,y) = f(x-1,y)\noutput f : 4x4\n"}
    )
    assert r.status_code == 422


def test_undo_empty_422(client, gaussian_src):
    sid, _ = make_session(client, gaussian_src)
    assert client.post(f"/sessions/{sid}/undo").status_code == 422


def test_machine_override(client, gaussian_src):
    sid, state = make_session(client, gaussian_src, machine={"cache_bytes": 64})
    assert state["current_cost"]["total"] > 0


def test_schedule_text_and_run(client, gaussian_src):
    sid, state = make_session(client, gaussian_src)
    client.post(f"/sessions/{sid}/tile", json={"range_x": 32, "range_y": 16})
    r = client.get(f"/sessions/{sid}/schedule")
    assert r.text == "compute blur at root\ntile blur 32 16\n"
    run = client.get(f"/sessions/{sid}/run", params={"size": "32x32"})
    assert run.status_code == 200
    doc = run.json()
    assert doc["size"] == [32, 32]
    assert doc["evaluations"]["blur"] == 1024
    assert client.get(f"/sessions/{sid}/run", params={"size": "banana"}).status_code == 422


def test_walkthrough_over_http(client, gaussian_src):
    sid, state = make_session(client, gaussian_src)
    seen = [state["instruction"]]

    def choose(oid):
        r = client.post(f"/sessions/{sid}/choose", json={"option_id": oid})
        assert r.status_code == 200
        seen.append(r.json()["instruction"])
        return r.json()

    state = choose(state["options"][1]["option_id"])  # blur tile
    per_tile = next(o for o in state["options"] if o["position"] and o["position"]["path"])
    state = choose(per_tile["option_id"])  # blur_y per tile
    deep = [o for o in state["options"] if o["position"] and o["position"]["path"]]
    state = choose(deep[0]["option_id"])  # bounded inside the tile
    root = next(o for o in state["options"] if o["position"] and not o["position"]["path"])
    state = choose(root["option_id"])  # kernel at root
    state = choose(state["options"][0]["option_id"])  # kernel tile
    assert state["done"] is True
    assert seen == [
        "Choose or type the tile range of Func blur.",
        "Choose the compute location of Func blur_y.",
        "Choose the compute location of Func bounded.",
        "Choose the compute location of Func kernel.",
        "Choose or type the tile range of Func kernel.",
        "Done!",
    ]


def test_persistence_round_trip(tmp_path, gaussian_src):
    state_dir = str(tmp_path / "state")
    app = create_app(state_dir=state_dir)
    c = TestClient(app)
    sid, state = make_session(c, gaussian_src)
    c.post(f"/sessions/{sid}/choose", json={"option_id": state["options"][0]["option_id"]})
    before = c.get(f"/sessions/{sid}").json()

    fresh = TestClient(create_app(state_dir=state_dir))
    after = fresh.get(f"/sessions/{sid}").json()
    assert after == before


def test_concurrent_sessions_do_not_interfere(client, gaussian_src):
    sids = [make_session(client, gaussian_src)[0] for _ in range(2)]
    errors = []

    def drive(sid):
        try:
            for _ in range(12):
                state = client.get(f"/sessions/{sid}").json()
                if state["done"]:
                    break
                oid = state["options"][0]["option_id"]
                r = client.post(f"/sessions/{sid}/choose", json={"option_id": oid})
                # 409/422 are fine: the twin thread may have advanced or
                # finished the session between our read and this write
                if r.status_code not in (200, 409, 422):
                    errors.append((sid, r.status_code, r.text))
        except Exception as exc:  # noqa: BLE001
            errors.append((sid, exc))

    threads = [threading.Thread(target=drive, args=(sid,)) for sid in sids for _ in range(2)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert not errors
    for sid in sids:
        state = client.get(f"/sessions/{sid}").json()
        cost = state["current_cost"]
        assert cost["total"] == pytest.approx(
            cost["load"] + cost["store"] + cost["compute"]
        )
