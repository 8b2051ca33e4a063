"""Wire API: session lifecycle, dial control, analysis, error classes.

The byte-identity tests here are the contract that lets the browser UI
trust the server: the same seeded run yields the same bytes whether it
goes through the CLI or the wire.
"""

import json
import math

import pytest
from fastapi.testclient import TestClient

from bellbench.apparatus import ApparatusConfig, CountRecord
from bellbench.cli import main
from bellbench.server import create_app
from bellbench.session_io import payload_to_record
from conftest import FROZEN_S, FROZEN_SIGMA_S, TABLE1_SHA256

IDEAL_EPR_BODY = {"apparatus": {
    "pair_rate": 2e5, "singles_rate_a": 0.0, "singles_rate_b": 0.0,
    "coincidence_window_tau": 0.0, "background_coinc_rate": 0.0,
    "rng_seed": 11}}

TUNED_BODY = {"apparatus": {
    "pair_rate": 556.0, "singles_rate_a": 0.0, "singles_rate_b": 0.0,
    "coincidence_window_tau": 0.0, "background_coinc_rate": 22.0,
    "rng_seed": 11}}


@pytest.fixture
def app():
    return create_app()


@pytest.fixture
def client(app):
    return TestClient(app)


def make_session(client, body=None):
    response = client.post("/v1/sessions", json=body or {})
    assert response.status_code == 201
    return response.json()["session_id"]


class TestSessionLifecycle:
    def test_create_echoes_the_effective_config(self, client):
        response = client.post("/v1/sessions", json={})
        assert response.status_code == 201
        payload = response.json()
        assert payload["kind"] == "session"
        assert payload["n_records"] == 0
        assert payload["config"]["apparatus"]["pair_rate"] == 37.0
        assert payload["config"]["angles"]["b_prime"] == 22.5
        assert payload["settings"] == {"theta_l": 45.0, "phi_l": 0.0,
                                       "alpha": 0.0, "beta": 0.0}

    def test_create_applies_overrides(self, client):
        response = client.post("/v1/sessions", json={
            "apparatus": {"pair_rate": 140.0, "rng_seed": 3},
            "source": {"theta_l": 40.0},
            "angles": {"b_prime": 30.0}})
        payload = response.json()
        assert payload["config"]["apparatus"]["pair_rate"] == 140.0
        assert payload["config"]["source"]["theta_l"] == 40.0
        assert payload["config"]["angles"]["b_prime"] == 30.0
        assert payload["settings"]["theta_l"] == 40.0

    def test_get_reflects_activity(self, client):
        sid = make_session(client)
        client.post(f"/v1/sessions/{sid}/acquire", json={"duration_s": 1.0})
        payload = client.get(f"/v1/sessions/{sid}").json()
        assert payload["n_records"] == 1
        assert payload["session_id"] == sid

    def test_bad_config_is_a_400_with_field_path(self, client):
        response = client.post("/v1/sessions",
                               json={"apparatus": {"pairrate": 37}})
        assert response.status_code == 400
        assert "apparatus.pairrate" in response.json()["detail"]

    def test_unknown_ids_are_404_everywhere(self, client):
        for method, path, body in [
                ("get", "/v1/sessions/deadbeef", None),
                ("get", "/v1/sessions/deadbeef/records", None),
                ("get", "/v1/sessions/deadbeef/diagnostics", None),
                ("post", "/v1/sessions/deadbeef/settings", {"alpha": 0}),
                ("post", "/v1/sessions/deadbeef/acquire",
                 {"duration_s": 1.0}),
                ("post", "/v1/sessions/deadbeef/chsh", {}),
                ("delete", "/v1/sessions/deadbeef", None)]:
            kwargs = {} if body is None else {"json": body}
            response = getattr(client, method)(path, **kwargs)
            assert response.status_code == 404, (method, path)
            assert "no such session" in response.json()["detail"]

    def test_acquire_on_deleted_session_is_404(self, client):
        sid = make_session(client)
        assert client.delete(f"/v1/sessions/{sid}").status_code == 204
        response = client.post(f"/v1/sessions/{sid}/acquire",
                               json={"duration_s": 1.0})
        assert response.status_code == 404

    def test_registries_are_per_app(self, app, client):
        sid = make_session(client)
        other = TestClient(create_app())
        assert other.get(f"/v1/sessions/{sid}").status_code == 404
        assert len(app.state.registry) == 1


class TestSettings:
    def test_partial_update_keeps_other_dials(self, client):
        sid = make_session(client)
        first = client.post(f"/v1/sessions/{sid}/settings",
                            json={"alpha": 45.0}).json()
        assert first == {"schema_version": 1, "kind": "settings",
                         "theta_l": 45.0, "phi_l": 0.0,
                         "alpha": 45.0, "beta": 0.0}
        second = client.post(f"/v1/sessions/{sid}/settings",
                             json={"phi_l": 10.0, "beta": 22.5}).json()
        assert second["alpha"] == 45.0
        assert second["phi_l"] == 10.0
        assert second["beta"] == 22.5

    def test_pump_dials_change_the_physics(self, client):
        sid = make_session(client, TUNED_BODY)
        client.post(f"/v1/sessions/{sid}/settings",
                    json={"theta_l": 90.0, "alpha": 0.0, "beta": 0.0})
        bright = client.post(f"/v1/sessions/{sid}/acquire",
                             json={"duration_s": 1.0}).json()["n_coinc"]
        client.post(f"/v1/sessions/{sid}/settings", json={"theta_l": 0.0})
        dark = client.post(f"/v1/sessions/{sid}/acquire",
                           json={"duration_s": 1.0}).json()["n_coinc"]
        assert bright - dark > 300  # ~A = 556 pairs vs background only

    def test_unknown_dial_is_a_400_with_path(self, client):
        sid = make_session(client)
        response = client.post(f"/v1/sessions/{sid}/settings",
                               json={"gamma": 1.0})
        assert response.status_code == 400
        assert "settings.gamma" in response.json()["detail"]

    def test_non_numeric_dial_is_a_400_with_path(self, client):
        sid = make_session(client)
        response = client.post(f"/v1/sessions/{sid}/settings",
                               json={"alpha": "up"})
        assert response.status_code == 400
        assert "settings.alpha" in response.json()["detail"]


class TestAcquire:
    def test_record_mirrors_the_count_schema(self, client):
        sid = make_session(client)
        client.post(f"/v1/sessions/{sid}/settings",
                    json={"alpha": 45.0, "beta": 45.0})
        payload = client.post(f"/v1/sessions/{sid}/acquire",
                              json={"duration_s": 15.0}).json()
        assert payload["kind"] == "count_record"
        assert payload["alpha"] == 45.0 and payload["beta"] == 45.0
        assert payload["duration_s"] == 15.0
        record = payload_to_record({k: v for k, v in payload.items()
                                    if k not in ("schema_version", "kind")})
        assert isinstance(record, CountRecord)

    def test_history_is_ordered_and_complete(self, client):
        sid = make_session(client)
        for beta in (0.0, 10.0, 20.0):
            client.post(f"/v1/sessions/{sid}/settings", json={"beta": beta})
            client.post(f"/v1/sessions/{sid}/acquire",
                        json={"duration_s": 1.0})
        payload = client.get(f"/v1/sessions/{sid}/records").json()
        assert payload["kind"] == "count_records"
        assert [r["beta"] for r in payload["records"]] == [0.0, 10.0, 20.0]

    def test_seeded_sessions_are_reproducible(self, client):
        blobs = []
        for _ in range(2):
            sid = make_session(client, {"apparatus": {"rng_seed": 21}})
            for _ in range(3):
                client.post(f"/v1/sessions/{sid}/acquire",
                            json={"duration_s": 5.0})
            blobs.append(client.get(f"/v1/sessions/{sid}/records").content)
        assert blobs[0] == blobs[1]

    @pytest.mark.parametrize("body, fragment", [
        ({}, "duration_s"),
        ({"duration_s": 0}, "must be > 0"),
        ({"duration_s": -1}, "must be > 0"),
        ({"duration_s": "long"}, "expected a number"),
        ({"duration_s": 1.0, "reps": 4}, "acquire.reps"),
    ])
    def test_bad_bodies_are_400(self, client, body, fragment):
        sid = make_session(client)
        response = client.post(f"/v1/sessions/{sid}/acquire", json=body)
        assert response.status_code == 400
        assert fragment in response.json()["detail"]


class TestConcurrency:
    def test_overlapping_acquire_is_409_not_queued(self, app, client):
        sid = make_session(client)
        entry = app.state.registry.get(sid)
        assert entry.lock.acquire(blocking=False)
        try:
            response = client.post(f"/v1/sessions/{sid}/acquire",
                                   json={"duration_s": 1.0})
            assert response.status_code == 409
            assert "in flight" in response.json()["detail"]
            wizard = client.post(f"/v1/sessions/{sid}/chsh", json={})
            assert wizard.status_code == 409
        finally:
            entry.lock.release()

    def test_other_sessions_stay_available(self, app, client):
        busy = make_session(client)
        free = make_session(client)
        entry = app.state.registry.get(busy)
        assert entry.lock.acquire(blocking=False)
        try:
            response = client.post(f"/v1/sessions/{free}/acquire",
                                   json={"duration_s": 1.0})
            assert response.status_code == 200
        finally:
            entry.lock.release()


class TestDiagnostics:
    def acquire_at(self, client, sid, alpha, beta, duration=1.0):
        client.post(f"/v1/sessions/{sid}/settings",
                    json={"alpha": alpha, "beta": beta})
        response = client.post(f"/v1/sessions/{sid}/acquire",
                               json={"duration_s": duration})
        assert response.status_code == 200

    def test_end_to_end_recovers_the_configured_state(self, client):
        sid = make_session(client, TUNED_BODY)
        for alpha, beta in ((0, 0), (90, 90), (0, 90), (45, 45)):
            self.acquire_at(client, sid, alpha, beta)
        response = client.get(f"/v1/sessions/{sid}/diagnostics")
        assert response.status_code == 200
        payload = response.json()
        assert payload["kind"] == "state_diagnostics"
        assert payload["theta_l"] == pytest.approx(45.0, abs=3.0)
        assert payload["cos_phi_m"] > 0.8
        assert payload["a_pairs"] == pytest.approx(556.0, abs=100.0)
        assert payload["c_offset"] == pytest.approx(22.0, abs=15.0)

    def test_dials_match_modulo_180(self, client):
        sid = make_session(client, TUNED_BODY)
        for alpha, beta in ((180, 0), (90, 270), (-180, 90), (225, 45)):
            self.acquire_at(client, sid, alpha, beta)
        assert client.get(f"/v1/sessions/{sid}/diagnostics").status_code == 200

    def test_missing_settings_are_listed(self, client):
        sid = make_session(client, TUNED_BODY)
        for alpha, beta in ((0, 0), (90, 90)):
            self.acquire_at(client, sid, alpha, beta)
        response = client.get(f"/v1/sessions/{sid}/diagnostics")
        assert response.status_code == 409
        detail = response.json()["detail"]
        assert "(0, 90)" in detail and "(45, 45)" in detail
        assert "(0, 0)" not in detail.split("missing:")[1]

    def test_latest_acquisition_wins(self, client):
        sid = make_session(client, TUNED_BODY)
        client.post(f"/v1/sessions/{sid}/settings", json={"theta_l": 10.0})
        for alpha, beta in ((0, 0), (90, 90), (0, 90), (45, 45)):
            self.acquire_at(client, sid, alpha, beta)
        stale = client.get(f"/v1/sessions/{sid}/diagnostics").json()
        client.post(f"/v1/sessions/{sid}/settings", json={"theta_l": 80.0})
        for alpha, beta in ((0, 0), (90, 90), (0, 90), (45, 45)):
            self.acquire_at(client, sid, alpha, beta)
        fresh = client.get(f"/v1/sessions/{sid}/diagnostics").json()
        # the diagnostic convention reads theta as the complement about 45
        assert stale["theta_l"] == pytest.approx(80.0, abs=3.0)
        assert fresh["theta_l"] == pytest.approx(10.0, abs=3.0)

    def test_inconsistent_history_is_a_409(self, app, client):
        sid = make_session(client, TUNED_BODY)
        entry = app.state.registry.get(sid)
        for (alpha, beta), n in zip(((0, 0), (90, 90), (0, 90), (45, 45)),
                                    (10, 300, 200, 150)):
            entry.session.history.append(CountRecord(
                alpha=float(alpha), beta=float(beta), duration_s=1.0,
                n_a=0, n_b=0, n_coinc=n))
        response = client.get(f"/v1/sessions/{sid}/diagnostics")
        assert response.status_code == 409
        assert "inconsistent" in response.json()["detail"]


class TestChshWizard:
    def test_fresh_seed_7_session_matches_the_cli_bytes(self, client,
                                                        tmp_path):
        out = tmp_path / "cli.json"
        assert main(["bell", "--seed", "7", "--out", str(out)]) == 0
        sid = make_session(client, {"apparatus": {"rng_seed": 7}})
        response = client.post(f"/v1/sessions/{sid}/chsh",
                               json={"duration_s": 15.0})
        assert response.status_code == 200
        assert response.content == out.read_bytes()

    def test_default_duration_matches_the_cli_default(self, client, tmp_path):
        out = tmp_path / "cli.json"
        assert main(["bell", "--seed", "7", "--out", str(out)]) == 0
        sid = make_session(client, {"apparatus": {"rng_seed": 7}})
        response = client.post(f"/v1/sessions/{sid}/chsh", json={})
        assert response.content == out.read_bytes()

    def test_ideal_epr_reaches_2root2(self, client):
        sid = make_session(client, IDEAL_EPR_BODY)
        payload = client.post(f"/v1/sessions/{sid}/chsh", json={}).json()
        assert abs(payload["s_value"] - 2 * math.sqrt(2)) \
            <= 3 * payload["sigma_s"]
        assert payload["sigma_s"] < 0.005

    def test_wizard_appends_sixteen_records(self, client):
        sid = make_session(client)
        client.post(f"/v1/sessions/{sid}/chsh", json={})
        payload = client.get(f"/v1/sessions/{sid}/records").json()
        assert len(payload["records"]) == 16
        assert payload["records"][0]["alpha"] == -45.0

    def test_arbitrary_quadruple_accepted(self, client):
        sid = make_session(client, IDEAL_EPR_BODY)
        response = client.post(f"/v1/sessions/{sid}/chsh", json={
            "angles": {"a": 0.0, "a_prime": 45.0, "b": 90.0, "b_prime": 45.0},
            "add_one_smoothing": True})
        assert response.status_code == 200
        assert abs(response.json()["s_value"]) < 1.0

    def test_degenerate_quadruple_is_a_400(self, client):
        sid = make_session(client, IDEAL_EPR_BODY)
        response = client.post(f"/v1/sessions/{sid}/chsh", json={
            "angles": {"a": 0.0, "a_prime": 90.0, "b": 45.0,
                       "b_prime": 135.0}})
        assert response.status_code == 400
        assert "records for setting" in response.json()["detail"]

    @pytest.mark.parametrize("body, fragment", [
        ({"duration_s": 0}, "must be > 0"),
        ({"reps": 2}, "chsh.reps"),
        ({"angles": {"aa": 1}}, "angles.aa"),
    ])
    def test_bad_bodies_are_400(self, client, body, fragment):
        sid = make_session(client)
        response = client.post(f"/v1/sessions/{sid}/chsh", json=body)
        assert response.status_code == 400
        assert fragment in response.json()["detail"]


class TestAnalysis:
    def test_posted_table1_matches_the_cli_bytes(self, client, tmp_path,
                                                 table1_path):
        out = tmp_path / "cli.json"
        assert main(["bell", "--counts", str(table1_path),
                     "--out", str(out)]) == 0
        response = client.post("/v1/analysis/chsh",
                               json={"counts_csv": table1_path.read_text()})
        assert response.status_code == 200
        assert response.content == out.read_bytes()
        payload = response.json()
        assert payload["s_value"] == FROZEN_S
        assert payload["sigma_s"] == pytest.approx(FROZEN_SIGMA_S, abs=1e-9)
        assert payload["inputs_digest"] == "sha256:" + TABLE1_SHA256

    def test_missing_counts_csv_is_a_400(self, client):
        response = client.post("/v1/analysis/chsh", json={})
        assert response.status_code == 400
        assert "counts_csv" in response.json()["detail"]

    def test_csv_parse_errors_carry_line_numbers(self, client):
        text = ("alpha_deg,beta_deg,duration_s,n_a,n_b,n_coinc\n"
                "-45,-22.5,15,84525,80356,oops\n")
        response = client.post("/v1/analysis/chsh",
                               json={"counts_csv": text})
        assert response.status_code == 400
        assert "counts_csv:2:" in response.json()["detail"]

    def test_missing_cells_are_listed(self, client, table1_path):
        lines = table1_path.read_text().splitlines()
        response = client.post("/v1/analysis/chsh", json={
            "counts_csv": "\n".join(lines[:-1]) + "\n"})
        assert response.status_code == 400
        assert "(90.0, 112.5)" in response.json()["detail"]

    def test_non_string_counts_is_a_400(self, client):
        response = client.post("/v1/analysis/chsh",
                               json={"counts_csv": [1, 2]})
        assert response.status_code == 400
        assert "counts_csv" in response.json()["detail"]

    def test_explicit_canonical_angles_match_default(self, client,
                                                     table1_path):
        text = table1_path.read_text()
        default = client.post("/v1/analysis/chsh",
                              json={"counts_csv": text})
        explicit = client.post("/v1/analysis/chsh", json={
            "counts_csv": text,
            "angles": {"a": -45.0, "a_prime": 0.0, "b": -22.5,
                       "b_prime": 22.5}})
        assert default.content == explicit.content
