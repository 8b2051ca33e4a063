"""Wire API for the browser bench: live sessions over JSON/HTTP under /v1.

A session is one virtual bench — apparatus config, pump dials, analyzer
dials, its own RNG stream and acquisition history.  The browser UI does no
physics of its own: every count, diagnostic and CHSH number it shows comes
from these endpoints.  Request and response bodies mirror the JSON schemas
in ``docs/formats.md``; responses are rendered by the same serializer the
CLI uses, so a result fetched over the wire is byte-identical to the file
the CLI writes for the same run.

Error classes: unknown session id → 404; a request that needs the bench
while another acquisition is in flight (or needs data the session does not
have yet) → 409; malformed or invalid bodies → 400 with the offending field
path in the detail.  Requests on different sessions run concurrently;
requests on one session are serialized, never queued.
"""

from __future__ import annotations

import threading
import uuid

from fastapi import FastAPI, Response
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse

from bellbench.apparatus import LiveSession, SessionBusyError
from bellbench.estimation import (ChshRun, DegenerateCountsError,
                                  chsh_settings, compute_S, diagnose_state)
from bellbench.qm import ChshAngles
from bellbench.session_io import (SCHEMA_VERSION, config_to_payload,
                                  content_digest, dumps, parse_angles,
                                  parse_config, parse_counts,
                                  record_to_payload, result_to_payload,
                                  simulation_digest)

__all__ = ["SessionRegistry", "create_app"]

# the four source-characterization settings, in diagnose_state order
DIAGNOSTIC_SETTINGS = ((0.0, 0.0), (90.0, 90.0), (0.0, 90.0), (45.0, 45.0))


def _same_polarizer(x: float, y: float) -> bool:
    folded = abs(x - y) % 180.0
    return min(folded, 180.0 - folded) < 1e-9


class ApiError(Exception):
    """An error with a wire status; detail goes to the response body."""

    def __init__(self, status_code: int, detail: str):
        super().__init__(detail)
        self.status_code = status_code
        self.detail = detail


class SessionEntry:
    """One live bench plus the wire-side state (analyzer dials, run lock)."""

    def __init__(self, session: LiveSession, angles: ChshAngles):
        self.session = session
        self.angles = angles
        self.alpha = 0.0
        self.beta = 0.0
        self.lock = threading.Lock()  # serializes bench use per session


class SessionRegistry:
    """All server state: session-id → entry.  A fresh registry is empty."""

    def __init__(self):
        self._entries: dict[str, SessionEntry] = {}
        self._lock = threading.Lock()

    def create(self, body: dict) -> tuple[str, SessionEntry]:
        apparatus, source, angles = parse_config(body)
        entry = SessionEntry(LiveSession(apparatus, source), angles)
        session_id = uuid.uuid4().hex
        with self._lock:
            self._entries[session_id] = entry
        return session_id, entry

    def get(self, session_id: str) -> SessionEntry:
        with self._lock:
            entry = self._entries.get(session_id)
        if entry is None:
            raise ApiError(404, f"no such session: {session_id}")
        return entry

    def delete(self, session_id: str) -> None:
        with self._lock:
            if self._entries.pop(session_id, None) is None:
                raise ApiError(404, f"no such session: {session_id}")

    def __len__(self) -> int:
        with self._lock:
            return len(self._entries)


def _json(payload: dict, status_code: int = 200) -> Response:
    return Response(content=dumps(payload), status_code=status_code,
                    media_type="application/json")


def _require_object(body, what: str) -> dict:
    if body is None:
        return {}
    if not isinstance(body, dict):
        raise ApiError(400, f"{what} must be a JSON object")
    return body


def _number(body: dict, key: str, where: str = ""):
    value = body[key]
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ApiError(400, f"{where}{key}: expected a number, got {value!r}")
    return float(value)


def _session_payload(session_id: str, entry: SessionEntry) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "kind": "session",
        "session_id": session_id,
        "config": config_to_payload(entry.session.config,
                                    entry.session.source, entry.angles),
        "settings": _settings_fields(entry),
        "n_records": len(entry.session.history),
    }


def _settings_fields(entry: SessionEntry) -> dict:
    return {
        "theta_l": entry.session.source.theta_l,
        "phi_l": entry.session.source.phi_l,
        "alpha": entry.alpha,
        "beta": entry.beta,
    }


def _record_payload(record) -> dict:
    payload = {"schema_version": SCHEMA_VERSION, "kind": "count_record"}
    payload.update(record_to_payload(record))
    return payload


def create_app() -> FastAPI:
    """Build the app; all state lives in its one SessionRegistry."""
    app = FastAPI(title="bellbench", docs_url=None, redoc_url=None)
    app.add_middleware(CORSMiddleware, allow_origins=["*"],
                       allow_methods=["*"], allow_headers=["*"])
    registry = SessionRegistry()
    app.state.registry = registry

    @app.exception_handler(ApiError)
    async def _api_error(request, exc: ApiError):
        return JSONResponse(status_code=exc.status_code,
                            content={"detail": exc.detail})

    @app.exception_handler(ValueError)
    async def _value_error(request, exc: ValueError):
        return JSONResponse(status_code=400, content={"detail": str(exc)})

    @app.exception_handler(SessionBusyError)
    async def _busy_error(request, exc: SessionBusyError):
        return JSONResponse(status_code=409, content={"detail": str(exc)})

    @app.post("/v1/sessions")
    def create_session(body: dict | None = None):
        body = _require_object(body, "session config")
        session_id, entry = registry.create(body)
        return _json(_session_payload(session_id, entry), status_code=201)

    @app.get("/v1/sessions/{session_id}")
    def get_session(session_id: str):
        entry = registry.get(session_id)
        return _json(_session_payload(session_id, entry))

    @app.delete("/v1/sessions/{session_id}", status_code=204)
    def delete_session(session_id: str):
        registry.delete(session_id)
        return Response(status_code=204)

    @app.post("/v1/sessions/{session_id}/settings")
    def update_settings(session_id: str, body: dict | None = None):
        entry = registry.get(session_id)
        body = _require_object(body, "settings")
        unknown = set(body) - {"theta_l", "phi_l", "alpha", "beta"}
        if unknown:
            names = ", ".join(f"settings.{k}" for k in sorted(unknown))
            raise ApiError(400, f"unknown fields: {names}")
        dials = {key: _number(body, key, "settings.") for key in body}
        with entry.lock:
            if "theta_l" in dials or "phi_l" in dials:
                entry.session.set_source(theta_l=dials.get("theta_l"),
                                         phi_l=dials.get("phi_l"))
            if "alpha" in dials:
                entry.alpha = dials["alpha"]
            if "beta" in dials:
                entry.beta = dials["beta"]
            payload = {"schema_version": SCHEMA_VERSION, "kind": "settings"}
            payload.update(_settings_fields(entry))
        return _json(payload)

    @app.post("/v1/sessions/{session_id}/acquire")
    def acquire(session_id: str, body: dict | None = None):
        entry = registry.get(session_id)
        body = _require_object(body, "acquire request")
        if "duration_s" not in body:
            raise ApiError(400, "acquire request: missing field 'duration_s'")
        unknown = set(body) - {"duration_s"}
        if unknown:
            names = ", ".join(f"acquire.{k}" for k in sorted(unknown))
            raise ApiError(400, f"unknown fields: {names}")
        duration_s = _number(body, "duration_s", "acquire.")
        if duration_s <= 0:
            raise ApiError(400, f"acquire.duration_s: must be > 0, "
                                f"got {duration_s:g}")
        if not entry.lock.acquire(blocking=False):
            raise SessionBusyError("an acquisition is already in flight")
        try:
            record = entry.session.step(entry.alpha, entry.beta, duration_s)
        finally:
            entry.lock.release()
        return _json(_record_payload(record))

    @app.get("/v1/sessions/{session_id}/records")
    def records(session_id: str):
        entry = registry.get(session_id)
        history = list(entry.session.history)
        return _json({
            "schema_version": SCHEMA_VERSION,
            "kind": "count_records",
            "records": [record_to_payload(r) for r in history],
        })

    @app.get("/v1/sessions/{session_id}/diagnostics")
    def diagnostics(session_id: str):
        entry = registry.get(session_id)
        history = list(entry.session.history)
        counts, missing = [], []
        for alpha, beta in DIAGNOSTIC_SETTINGS:
            for record in reversed(history):
                if _same_polarizer(record.alpha, alpha) and \
                        _same_polarizer(record.beta, beta):
                    counts.append(record.n_coinc)
                    break
            else:
                missing.append(f"({alpha:g}, {beta:g})")
        if missing:
            raise ApiError(
                409, "diagnostics need acquisitions at the four settings "
                     "(0, 0), (90, 90), (0, 90), (45, 45); missing: "
                     + ", ".join(missing))
        try:
            diag = diagnose_state(*counts)
        except DegenerateCountsError as err:
            raise ApiError(409, f"diagnostic counts are inconsistent: {err}")
        return _json(result_to_payload(diag))

    @app.post("/v1/sessions/{session_id}/chsh")
    def chsh_wizard(session_id: str, body: dict | None = None):
        entry = registry.get(session_id)
        body = _require_object(body, "chsh request")
        unknown = set(body) - {"duration_s", "angles", "add_one_smoothing"}
        if unknown:
            names = ", ".join(f"chsh.{k}" for k in sorted(unknown))
            raise ApiError(400, f"unknown fields: {names}")
        duration_s = 15.0
        if "duration_s" in body:
            duration_s = _number(body, "duration_s", "chsh.")
            if duration_s <= 0:
                raise ApiError(400, f"chsh.duration_s: must be > 0, "
                                    f"got {duration_s:g}")
        angles = entry.angles
        if "angles" in body:
            section = _require_object(body["angles"], "chsh.angles")
            angles = parse_angles(section, default=entry.angles)
        smoothing = bool(body.get("add_one_smoothing", False))

        if not entry.lock.acquire(blocking=False):
            raise SessionBusyError("an acquisition is already in flight")
        try:
            digest = simulation_digest(entry.session.config,
                                       entry.session.source, angles,
                                       duration_s)
            records = [entry.session.step(alpha, beta, duration_s)
                       for alpha, beta in chsh_settings(angles)]
        finally:
            entry.lock.release()
        run = ChshRun(tuple(records), angles)
        result = compute_S(run, add_one_smoothing=smoothing)
        return _json(result_to_payload(result, inputs_digest=digest))

    @app.post("/v1/analysis/chsh")
    def analyze_chsh(body: dict | None = None):
        body = _require_object(body, "analysis request")
        if "counts_csv" not in body:
            raise ApiError(400,
                           "analysis request: missing field 'counts_csv'")
        unknown = set(body) - {"counts_csv", "angles", "add_one_smoothing"}
        if unknown:
            names = ", ".join(f"analysis.{k}" for k in sorted(unknown))
            raise ApiError(400, f"unknown fields: {names}")
        text = body["counts_csv"]
        if not isinstance(text, str):
            raise ApiError(400, "analysis.counts_csv: expected CSV text")
        angles = parse_angles(_require_object(body.get("angles"),
                                              "analysis.angles"))
        smoothing = bool(body.get("add_one_smoothing", False))
        records = parse_counts(text, source="counts_csv")
        run = ChshRun.from_records(records, angles)
        result = compute_S(run, add_one_smoothing=smoothing)
        return _json(result_to_payload(
            result, inputs_digest=content_digest(text)))

    return app
