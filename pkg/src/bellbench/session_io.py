"""Persistence and interchange: count tables as CSV, everything else as JSON.

Count tables use the header ``alpha_deg,beta_deg,duration_s,n_a,n_b,n_coinc``
(UTF-8, LF).  Structured documents (bench configs, analysis results) are JSON
with a ``schema_version`` and a ``kind`` tag; unknown fields are rejected with
their full path so typos never pass silently.  All reals serialize at full
round-trip precision.  ``docs/formats.md`` documents every schema with
examples.

The one JSON serializer here (``dumps``) is shared by the CLI and the wire
server, so a result written to disk and the same result fetched over HTTP are
byte-identical.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
from typing import Any

from bellbench.apparatus import ApparatusConfig, CountRecord, SourceState
from bellbench.estimation import ChshResult, FitResult, StateDiagnostics
from bellbench.qm import CANONICAL_ANGLES, ChshAngles

__all__ = [
    "COUNTS_HEADER",
    "SCHEMA_VERSION",
    "config_to_payload",
    "content_digest",
    "dumps",
    "load_config",
    "load_counts",
    "load_result",
    "parse_angles",
    "parse_config",
    "parse_counts",
    "payload_to_record",
    "payload_to_result",
    "record_to_payload",
    "result_to_payload",
    "save_counts",
    "save_result",
    "simulation_digest",
]

SCHEMA_VERSION = 1
COUNTS_HEADER = ("alpha_deg", "beta_deg", "duration_s", "n_a", "n_b", "n_coinc")


def dumps(payload: dict) -> str:
    """The one canonical JSON rendering: 2-space indent, insertion order, LF."""
    return json.dumps(payload, indent=2, ensure_ascii=False) + "\n"


def content_digest(data: bytes | str) -> str:
    """Content digest used for result provenance, as ``sha256:<hex>``."""
    if isinstance(data, str):
        data = data.encode("utf-8")
    return "sha256:" + hashlib.sha256(data).hexdigest()


# --------------------------------------------------------------------------
# count tables


def parse_counts(text: str, source: str = "<counts>") -> list[CountRecord]:
    """Parse count-table CSV text; malformed rows fail with their line number.

    ``source`` names where the text came from (a path, "<request body>") and
    prefixes every error as ``source:line:``.
    """
    reader = csv.reader(io.StringIO(text))
    rows = list(reader)
    if not rows or tuple(rows[0]) != COUNTS_HEADER:
        got = ",".join(rows[0]) if rows else "(empty file)"
        raise ValueError(
            f"{source}:1: expected header {','.join(COUNTS_HEADER)}, got {got}")
    records = []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row:
            continue  # tolerate a trailing blank line
        if len(row) != len(COUNTS_HEADER):
            raise ValueError(
                f"{source}:{lineno}: expected {len(COUNTS_HEADER)} fields, "
                f"got {len(row)}")
        try:
            records.append(CountRecord(
                alpha=float(row[0]), beta=float(row[1]),
                duration_s=float(row[2]), n_a=int(row[3]), n_b=int(row[4]),
                n_coinc=int(row[5])))
        except ValueError as err:
            raise ValueError(f"{source}:{lineno}: {err}") from None
    return records


def load_counts(path: str) -> list[CountRecord]:
    """Read a count table from a file; errors carry ``path:line``."""
    try:
        with open(path, "r", encoding="utf-8", newline="") as handle:
            text = handle.read()
    except OSError as err:
        raise OSError(f"cannot read counts file {path}: {err}") from None
    return parse_counts(text, source=path)


def save_counts(records, path: str) -> None:
    """Write a count table; load_counts(save_counts(r)) == r."""
    try:
        with open(path, "w", encoding="utf-8", newline="") as handle:
            writer = csv.writer(handle, lineterminator="\n")
            writer.writerow(COUNTS_HEADER)
            for r in records:
                writer.writerow([r.alpha, r.beta, r.duration_s,
                                 r.n_a, r.n_b, r.n_coinc])
    except OSError as err:
        raise OSError(f"cannot write counts file {path}: {err}") from None


def record_to_payload(record: CountRecord) -> dict:
    return {
        "alpha": record.alpha,
        "beta": record.beta,
        "duration_s": record.duration_s,
        "n_a": record.n_a,
        "n_b": record.n_b,
        "n_coinc": record.n_coinc,
    }


def payload_to_record(payload: dict) -> CountRecord:
    fields = _take(dict(payload), "count record",
                   ("alpha", "beta", "duration_s", "n_a", "n_b", "n_coinc"))
    return CountRecord(
        alpha=float(fields["alpha"]), beta=float(fields["beta"]),
        duration_s=float(fields["duration_s"]), n_a=int(fields["n_a"]),
        n_b=int(fields["n_b"]), n_coinc=int(fields["n_coinc"]))


# --------------------------------------------------------------------------
# results


def result_to_payload(result: ChshResult | StateDiagnostics | FitResult,
                      inputs_digest: str | None = None) -> dict:
    """JSON payload for an analysis result, tagged with its kind."""
    if isinstance(result, ChshResult):
        body = {
            "kind": "chsh_result",
            "e_ab": result.e_ab,
            "e_abp": result.e_abp,
            "e_apb": result.e_apb,
            "e_apbp": result.e_apbp,
            "s_value": result.s_value,
            "sigma_s": result.sigma_s,
            "significance": result.significance,
        }
    elif isinstance(result, StateDiagnostics):
        body = {
            "kind": "state_diagnostics",
            "c_offset": result.c_offset,
            "a_pairs": result.a_pairs,
            "theta_l": result.theta_l,
            "cos_phi_m": result.cos_phi_m,
            "phi_m": result.phi_m,
            "clamped": result.clamped,
        }
    elif isinstance(result, FitResult):
        body = {
            "kind": "fit_result",
            "a_pairs": result.a_pairs,
            "c_offset": result.c_offset,
            "theta_l": result.theta_l,
            "cos_phi_m": result.cos_phi_m,
            "phi_m": result.phi_m,
            "beta_shift": result.beta_shift,
            "errors": dict(result.errors),
            "chi_square": result.chi_square,
            "dof": result.dof,
        }
    else:
        raise TypeError(f"cannot serialize a {type(result).__name__}")
    payload = {"schema_version": SCHEMA_VERSION}
    payload.update(body)
    payload["inputs_digest"] = inputs_digest
    return payload


def payload_to_result(payload: dict
                      ) -> ChshResult | StateDiagnostics | FitResult:
    """Rebuild a result object from its JSON payload (digest is dropped)."""
    data = dict(payload)
    version = data.pop("schema_version", None)
    if version != SCHEMA_VERSION:
        raise ValueError(f"unsupported schema_version: {version!r}")
    kind = data.pop("kind", None)
    data.pop("inputs_digest", None)
    if kind == "chsh_result":
        fields = _take(data, kind, ("e_ab", "e_abp", "e_apb", "e_apbp",
                                    "s_value", "sigma_s"),
                       optional=("significance",))
        return ChshResult(
            e_ab=fields["e_ab"], e_abp=fields["e_abp"],
            e_apb=fields["e_apb"], e_apbp=fields["e_apbp"],
            s_value=fields["s_value"], sigma_s=fields["sigma_s"])
    if kind == "state_diagnostics":
        fields = _take(data, kind, ("c_offset", "a_pairs", "theta_l",
                                    "cos_phi_m", "phi_m", "clamped"))
        return StateDiagnostics(**fields)
    if kind == "fit_result":
        fields = _take(data, kind, ("a_pairs", "c_offset", "theta_l",
                                    "cos_phi_m", "beta_shift", "errors",
                                    "chi_square", "dof"),
                       optional=("phi_m",))
        return FitResult(
            a_pairs=fields["a_pairs"], c_offset=fields["c_offset"],
            theta_l=fields["theta_l"], cos_phi_m=fields["cos_phi_m"],
            beta_shift=fields["beta_shift"], errors=dict(fields["errors"]),
            chi_square=fields["chi_square"], dof=int(fields["dof"]))
    raise ValueError(f"unknown result kind: {kind!r}")


def save_result(result, path: str, inputs_digest: str | None = None) -> None:
    try:
        with open(path, "w", encoding="utf-8", newline="") as handle:
            handle.write(dumps(result_to_payload(result, inputs_digest)))
    except OSError as err:
        raise OSError(f"cannot write result file {path}: {err}") from None


def load_result(path: str) -> ChshResult | StateDiagnostics | FitResult:
    try:
        with open(path, "r", encoding="utf-8") as handle:
            payload = json.load(handle)
    except OSError as err:
        raise OSError(f"cannot read result file {path}: {err}") from None
    return payload_to_result(payload)


# --------------------------------------------------------------------------
# bench configuration


def _take(data: dict, where: str, required: tuple[str, ...],
          optional: tuple[str, ...] = ()) -> dict:
    """Pop exactly the expected keys; anything left over is a typo."""
    out = {}
    for key in required:
        if key not in data:
            raise ValueError(f"{where}: missing field {key!r}")
        out[key] = data.pop(key)
    for key in optional:
        if key in data:
            out[key] = data.pop(key)
    if data:
        extras = ", ".join(f"{where}.{key}" for key in sorted(data))
        raise ValueError(f"unknown fields: {extras}")
    return out


def _floats(section: dict, where: str, defaults: dict[str, Any]) -> dict:
    if not isinstance(section, dict):
        raise ValueError(f"{where}: expected an object, got {section!r}")
    out = dict(defaults)
    for key, value in section.items():
        if key not in defaults:
            raise ValueError(f"unknown fields: {where}.{key}")
        if isinstance(defaults[key], float):
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise ValueError(f"{where}.{key}: expected a number, "
                                 f"got {value!r}")
            out[key] = float(value)
        else:
            out[key] = value
    return out


def parse_config(payload: dict
                 ) -> tuple[ApparatusConfig, SourceState, ChshAngles]:
    """Parse a bench-config document; every section and field is optional.

    The document mirrors the simulator's dataclasses: an ``apparatus``
    section (rates, window, offsets, sampling mode, seed), a ``source``
    section (pump dials) and an ``angles`` section (the CHSH quadruple).
    Unknown fields are rejected by path.
    """
    data = dict(payload)
    version = data.pop("schema_version", SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        raise ValueError(f"unsupported schema_version: {version!r}")
    kind = data.pop("kind", "bench_config")
    if kind != "bench_config":
        raise ValueError(f"expected kind 'bench_config', got {kind!r}")

    apparatus_section = data.pop("apparatus", {})
    source_section = data.pop("source", {})
    angles_section = data.pop("angles", {})
    if data:
        raise ValueError("unknown fields: "
                         + ", ".join(sorted(data)))

    defaults = ApparatusConfig()
    apparatus_fields = _floats(apparatus_section, "apparatus", {
        "pair_rate": defaults.pair_rate,
        "singles_rate_a": defaults.singles_rate_a,
        "singles_rate_b": defaults.singles_rate_b,
        "coincidence_window_tau": defaults.coincidence_window_tau,
        "background_coinc_rate": defaults.background_coinc_rate,
        "beta_offset": defaults.beta_offset,
        "phase_spread_mode": defaults.phase_spread_mode,
        "phase_halfwidth": defaults.phase_halfwidth,
        "rng_seed": defaults.rng_seed,
    })
    if not isinstance(apparatus_fields["rng_seed"], int) or isinstance(
            apparatus_fields["rng_seed"], bool):
        raise ValueError("apparatus.rng_seed: expected an integer, "
                         f"got {apparatus_fields['rng_seed']!r}")
    if not isinstance(apparatus_fields["phase_spread_mode"], str):
        raise ValueError("apparatus.phase_spread_mode: expected a string, "
                         f"got {apparatus_fields['phase_spread_mode']!r}")
    apparatus = ApparatusConfig(**apparatus_fields)

    source_fields = _floats(source_section, "source",
                            {"theta_l": 45.0, "phi_l": 0.0})
    source = SourceState(**source_fields)

    angles = parse_angles(angles_section)
    return apparatus, source, angles


def parse_angles(section: dict,
                 default: ChshAngles = CANONICAL_ANGLES) -> ChshAngles:
    """Parse an angles object (any subset of a/a_prime/b/b_prime)."""
    fields = _floats(section, "angles", {
        "a": default.a,
        "a_prime": default.a_prime,
        "b": default.b,
        "b_prime": default.b_prime,
    })
    return ChshAngles(**fields)


def load_config(path: str
                ) -> tuple[ApparatusConfig, SourceState, ChshAngles]:
    try:
        with open(path, "r", encoding="utf-8") as handle:
            payload = json.load(handle)
    except OSError as err:
        raise OSError(f"cannot read config file {path}: {err}") from None
    except json.JSONDecodeError as err:
        raise ValueError(f"{path}: not valid JSON: {err}") from None
    if not isinstance(payload, dict):
        raise ValueError(f"{path}: config document must be a JSON object")
    return parse_config(payload)


def config_to_payload(apparatus: ApparatusConfig, source: SourceState,
                      angles: ChshAngles = CANONICAL_ANGLES) -> dict:
    """Full, explicit bench-config document (inverse of parse_config)."""
    return {
        "schema_version": SCHEMA_VERSION,
        "kind": "bench_config",
        "apparatus": {
            "pair_rate": apparatus.pair_rate,
            "singles_rate_a": apparatus.singles_rate_a,
            "singles_rate_b": apparatus.singles_rate_b,
            "coincidence_window_tau": apparatus.coincidence_window_tau,
            "background_coinc_rate": apparatus.background_coinc_rate,
            "beta_offset": apparatus.beta_offset,
            "phase_spread_mode": apparatus.phase_spread_mode,
            "phase_halfwidth": apparatus.phase_halfwidth,
            "rng_seed": apparatus.rng_seed,
        },
        "source": {"theta_l": source.theta_l, "phi_l": source.phi_l},
        "angles": {"a": angles.a, "a_prime": angles.a_prime,
                   "b": angles.b, "b_prime": angles.b_prime},
    }


def simulation_digest(apparatus: ApparatusConfig, source: SourceState,
                      angles: ChshAngles, duration_s: float) -> str:
    """Provenance digest for a simulated run: hash of its full description.

    Used by both the CLI and the wire server so that the same simulated
    protocol yields byte-identical result documents everywhere.
    """
    payload = config_to_payload(apparatus, source, angles)
    payload["duration_s"] = duration_s
    return content_digest(dumps(payload))
