"""HTTP layer: enrolment, password issuing, verification, configuration."""

import json

import pytest
from fastapi.testclient import TestClient

from inkpass.evaluation import EvalReport, PasswordCell, ScoreSet, det_points
from inkpass.service import ServiceConfig, create_app, load_config
from inkpass.synth import synthetic_dataset


@pytest.fixture(scope="module")
def corpus():
    return synthetic_dataset(3, seed=21, dev_user_count=1)


def _points(sample):
    return [{"x": p.x, "y": p.y, "t": p.t} for p in sample.points]


def _client(tmp_path, **overrides):
    cfg = ServiceConfig(data_dir=str(tmp_path / "store"), **overrides)
    return TestClient(create_app(cfg))


def _enrol(client, ds, user, digits, per_digit=3):
    calls = 0
    for d in digits:
        for rep in range(1, per_digit + 1):
            r = client.post("/enroll", json={
                "user": user, "digit": d,
                "points": _points(ds.get(user, d, 1, rep)),
            })
            assert r.status_code == 200, r.text
            assert r.json()["count"] == rep
            calls += 1
    return calls


def test_health(tmp_path):
    client = _client(tmp_path, threshold=0.42)
    body = client.get("/health").json()
    assert body["status"] == "ok"
    assert body["scorer"] == "dtw-adapted"
    assert body["threshold"] == 0.42


def test_enrolment_flow_and_user_view(tmp_path, corpus):
    client = _client(tmp_path)
    user = corpus.users[0]
    calls = _enrol(client, corpus, user, range(10))
    assert calls == 30  # 10 digits x 3 samples

    body = client.get(f"/users/{user}").json()
    assert body["digits"] == list(range(10))
    assert set(body["enrolment_counts"].values()) == {3}
    assert client.get("/users/nobody").status_code == 404


def test_enrolment_cap_and_replace(tmp_path, corpus):
    client = _client(tmp_path)
    user = corpus.users[0]
    for rep in (1, 2, 3, 4):
        client.post("/enroll", json={
            "user": user, "digit": 4,
            "points": _points(corpus.get(user, 4, 1, rep))})
    fifth = client.post("/enroll", json={
        "user": user, "digit": 4,
        "points": _points(corpus.get(user, 4, 2, 1))})
    assert fifth.status_code == 409

    reset = client.post("/enroll", json={
        "user": user, "digit": 4, "replace": True,
        "points": _points(corpus.get(user, 4, 2, 1))})
    assert reset.status_code == 200
    assert reset.json()["count"] == 1


def test_enroll_rejects_out_of_range_digit(tmp_path, corpus):
    client = _client(tmp_path)
    sample = corpus.get(corpus.users[0], 0, 1, 1)
    r = client.post("/enroll", json={
        "user": "u1", "digit": 12, "points": _points(sample)})
    assert r.status_code == 422


def test_pin_issuing(tmp_path):
    client = _client(tmp_path)
    body = client.post("/password", json={"kind": "pin", "seed": 5}).json()
    assert len(body["digits"]) == 4
    assert body["candidates"] == 10_000
    again = client.post("/password", json={"kind": "pin", "seed": 5}).json()
    assert again["digits"] == body["digits"]


def test_user_chosen_pin_is_validated(tmp_path):
    client = _client(tmp_path)
    ok = client.post("/password", json={"kind": "pin", "digits": [1, 2, 3, 4]})
    assert ok.status_code == 200
    assert ok.json()["digits"] == [1, 2, 3, 4]
    bad = client.post("/password", json={"kind": "pin", "digits": [1, 2]})
    assert bad.status_code == 422
    otp = client.post("/password", json={"kind": "otp", "digits": [1, 2, 3, 4, 5, 8, 9]})
    assert otp.status_code == 422


def test_otp_issuing_uses_policy(tmp_path):
    otp_policy = load_config(None, env={}).otp
    assert otp_policy.length == 7
    assert otp_policy.allowed_digits == {1, 2, 3, 4, 5, 8, 9}
    client = _client(tmp_path)
    body = client.post("/password", json={"kind": "otp", "seed": 3}).json()
    assert len(body["digits"]) == 7
    assert set(body["digits"]) == {1, 2, 3, 4, 5, 8, 9}
    assert body["candidates"] == 5040


def test_verify_two_stage_decisions(tmp_path, corpus):
    owner, rival = corpus.users[0], corpus.users[1]
    password = [3, 5, 3]
    client = _client(tmp_path, threshold=0.0)
    _enrol(client, corpus, owner, {3, 5})

    def attempt(writer, labels=password):
        return [{"digit": d, "points": _points(corpus.get(writer, d, 2, k + 1))}
                for k, d in enumerate(labels)]

    scores = client.post("/verify", json={
        "user": owner, "expected": password,
        "attempts": [attempt(owner), attempt(rival)],
    }).json()["decisions"]
    genuine, impostor = scores[0]["stage2_score"], scores[1]["stage2_score"]
    assert genuine > impostor

    # restart against the same store with a separating threshold
    midpoint = (genuine + impostor) / 2
    strict = _client(tmp_path, threshold=midpoint)
    decisions = strict.post("/verify", json={
        "user": owner, "expected": password,
        "attempts": [attempt(owner), attempt(rival)],
    }).json()["decisions"]
    assert decisions[0]["accepted"]
    assert not decisions[1]["accepted"]
    assert all(d["threshold_used"] == midpoint for d in decisions)

    wrong = strict.post("/verify", json={
        "user": owner, "expected": password,
        "attempts": [attempt(owner, labels=[5, 3, 5])],
    }).json()["decisions"][0]
    assert not wrong["stage1_ok"]
    assert not wrong["accepted"]


def test_verify_error_statuses(tmp_path, corpus):
    client = _client(tmp_path)
    user = corpus.users[0]
    drawing = {"digit": 0, "points": _points(corpus.get(user, 0, 2, 1))}
    ghost = client.post("/verify", json={
        "user": "ghost", "expected": [0], "attempts": [[drawing]]})
    assert ghost.status_code == 404

    _enrol(client, corpus, user, (0,))
    missing = client.post("/verify", json={
        "user": user, "expected": [9], "attempts": [[drawing]]})
    assert missing.status_code == 404
    short = client.post("/verify", json={
        "user": user, "expected": [0, 0], "attempts": [[drawing]]})
    assert short.status_code == 422


def test_config_file_and_env_overrides(tmp_path):
    ini = tmp_path / "svc.ini"
    ini.write_text(
        "[service]\n"
        "data_dir = /tmp/x\n"
        "scorer = dtw-baseline\n"
        "threshold = 0.37\n"
        "[pin]\n"
        "length = 3\n"
        "digits = 123\n"
        "[otp]\n"
        "digits = 1,2,3,4,5,8,9\n"
    )
    cfg = load_config(str(ini), env={})
    assert cfg.data_dir == "/tmp/x"
    assert cfg.scorer == "dtw-baseline"
    assert cfg.threshold == 0.37
    assert cfg.pin.length == 3
    assert cfg.pin.allowed_digits == {1, 2, 3}
    assert cfg.otp.allowed_digits == {1, 2, 3, 4, 5, 8, 9}

    cfg2 = load_config(str(ini), env={
        "BTP_THRESHOLD": "0.9", "BTP_SCORER": "dtw-adapted",
        "BTP_DATA_DIR": "elsewhere"})
    assert cfg2.threshold == 0.9
    assert cfg2.scorer == "dtw-adapted"
    assert cfg2.data_dir == "elsewhere"

    with pytest.raises(ValueError):
        ServiceConfig(scorer="magic")


def test_report_drives_threshold_and_bands(tmp_path):
    pools = ScoreSet(genuine=(0.8, 0.9), impostor=(0.1, 0.2))
    report = EvalReport(
        system="dtw-adapted", n_enrol=3,
        per_digit_eer=(0.0,), per_digit_threshold=(0.8,),
        det=det_points(pools),
        password_results=(
            PasswordCell(n_enrol=3, length=2, eer=6.0, multiset=(0, 0)),
            PasswordCell(n_enrol=3, length=2, eer=8.0, multiset=(0, 1)),
            PasswordCell(n_enrol=3, length=2, eer=20.0, multiset=(1, 1)),
        ))
    path = tmp_path / "report.json"
    path.write_text(report.to_json())

    ini = tmp_path / "svc.ini"
    ini.write_text(
        "[service]\n"
        f"data_dir = {tmp_path / 'store'}\n"
        f"report = {path}\n"
        "[pin]\n"
        "length = 2\n"
        "digits = 01\n"
        "band_low = 5.0\n"
        "band_high = 10.0\n"
    )
    cfg = load_config(str(ini), env={})
    client = TestClient(create_app(cfg))
    # calibrated threshold: pools separate perfectly, so the gap midpoint
    assert client.get("/health").json()["threshold"] == 0.5

    body = client.post("/password", json={"kind": "pin", "seed": 1}).json()
    assert body["candidates"] == 3  # (0,0) once + (0,1) twice
    assert tuple(sorted(body["digits"])) in {(0, 0), (0, 1)}
