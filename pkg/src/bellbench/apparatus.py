"""Monte Carlo model of the coincidence-counting apparatus.

A pump at dial angles (theta_l, phi_l) feeds the two-crystal source; each
detector sees a steady singles rate, and coincidences arrive as true pairs,
an angle-independent background, and accidentals tau * N_A * N_B / T from the
finite coincidence window.  One acquisition of length T yields a CountRecord
with Poisson-fluctuating counts.

The quartz-plate dial sets the center of the pair phase; the crystal phase
spread over the collected bandwidth is a uniform half-width w
(``phase_halfwidth``), so the effective interference visibility is

    cos_phi_m = cos(phi_l) * sin(w)/w        (-> cos(phi_l) as w -> 0).

Two sampling modes produce identical means: "scalar" folds the visibility
into the coincidence mean directly; "per-pair" draws a phase for every pair
and thins, which stays exactly Poisson because independent thinning of a
Poisson stream is Poisson.

Sampling uses numpy's Generator (PCG64) with exact Poisson draws; every
acquisition consumes the stream in a fixed documented order (n_a, n_b, then
the coincidence parts), so equal seeds and call sequences reproduce bit-equal
records.
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass, replace

import numpy as np

from bellbench.qm import CountModelParams, expected_counts

__all__ = [
    "ApparatusConfig",
    "CountRecord",
    "LiveSession",
    "SessionBusyError",
    "SourceState",
    "accidental_mean",
    "acquire",
    "effective_cos_phi_m",
    "mean_coincidences",
    "phase_center_for",
    "run_protocol",
]

PHASE_SPREAD_MODES = ("scalar", "per-pair")


@dataclass(frozen=True)
class ApparatusConfig:
    """Fixed properties of the simulated bench.

    Rates are per second; tau in seconds; beta_offset is a hidden systematic
    miscalibration added to the idler polarizer dial, limited to a few degrees.
    """

    pair_rate: float = 37.0
    singles_rate_a: float = 5500.0
    singles_rate_b: float = 5400.0
    coincidence_window_tau: float = 25e-9
    background_coinc_rate: float = 0.7
    beta_offset: float = 0.0
    phase_spread_mode: str = "scalar"
    phase_halfwidth: float = 0.0
    rng_seed: int = 0

    def __post_init__(self) -> None:
        for name in ("pair_rate", "singles_rate_a", "singles_rate_b",
                     "background_coinc_rate", "coincidence_window_tau"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        if not -10.0 <= self.beta_offset <= 10.0:
            raise ValueError("beta_offset must lie in [-10, 10] degrees")
        if self.phase_spread_mode not in PHASE_SPREAD_MODES:
            raise ValueError(f"phase_spread_mode must be one of {PHASE_SPREAD_MODES}")
        if not 0.0 <= self.phase_halfwidth < 180.0:
            raise ValueError("phase_halfwidth must lie in [0, 180) degrees")


@dataclass(frozen=True)
class SourceState:
    """Pump preparation dials, degrees: polarizer theta_l and phase center phi_l."""

    theta_l: float = 45.0
    phi_l: float = 0.0


@dataclass(frozen=True)
class CountRecord:
    """One acquisition: polarizer setting, window, singles and coincidences."""

    alpha: float
    beta: float
    duration_s: float
    n_a: int
    n_b: int
    n_coinc: int

    def __post_init__(self) -> None:
        if self.duration_s <= 0:
            raise ValueError("duration_s must be > 0")
        for name in ("n_a", "n_b", "n_coinc"):
            value = getattr(self, name)
            if not isinstance(value, (int, np.integer)) or value < 0:
                raise ValueError(f"{name} must be a nonnegative integer")
            object.__setattr__(self, name, int(value))


def _sinc(w_deg: float) -> float:
    """Mean of cos over a uniform phase spread of half-width w (degrees)."""
    if w_deg == 0.0:
        return 1.0
    w = math.radians(w_deg)
    return math.sin(w) / w


def effective_cos_phi_m(config: ApparatusConfig, source: SourceState) -> float:
    """Ensemble-averaged visibility cos(phi_l) * sinc(halfwidth)."""
    return math.cos(math.radians(source.phi_l)) * _sinc(config.phase_halfwidth)


def phase_center_for(cos_phi_m: float, phase_halfwidth: float = 0.0) -> float:
    """Quartz dial value (degrees, in [0, 180]) that yields a target visibility.

    Inverts cos_phi_m = cos(phi_l) * sinc(w).  A spread of half-width w caps
    the reachable visibility at sinc(w); asking for more is an error.
    """
    cap = _sinc(phase_halfwidth)
    if abs(cos_phi_m) > cap:
        raise ValueError(
            f"|cos_phi_m| = {abs(cos_phi_m)!r} unreachable: a phase spread of "
            f"half-width {phase_halfwidth} deg caps visibility at {cap!r}")
    return math.degrees(math.acos(cos_phi_m / cap))


def accidental_mean(tau: float, n_a: float, n_b: float, duration_t: float) -> float:
    """Mean accidental coincidences tau * N_A * N_B / T for a window tau."""
    if duration_t <= 0:
        raise ValueError("duration_t must be > 0")
    return tau * n_a * n_b / duration_t


def _count_model(config: ApparatusConfig, source: SourceState,
                 duration_s: float) -> CountModelParams:
    return CountModelParams(
        a_pairs=config.pair_rate * duration_s,
        c_offset=config.background_coinc_rate * duration_s,
        theta_l=source.theta_l,
        cos_phi_m=effective_cos_phi_m(config, source),
    )


def mean_coincidences(config: ApparatusConfig, source: SourceState,
                      alpha: float, beta: float, duration_s: float) -> float:
    """Deterministic mean of n_coinc: pairs + background + accidentals.

    The idler polarizer physically sits at beta + beta_offset; accidentals use
    the expected singles, which is what the window actually multiplies.
    """
    if duration_s <= 0:
        raise ValueError("duration_s must be > 0")
    mu = expected_counts(_count_model(config, source, duration_s),
                         alpha, beta + config.beta_offset)
    return mu + accidental_mean(config.coincidence_window_tau,
                                config.singles_rate_a * duration_s,
                                config.singles_rate_b * duration_s, duration_s)


def acquire(config: ApparatusConfig, source: SourceState, alpha: float,
            beta: float, duration_s: float,
            rng: np.random.Generator | None = None) -> CountRecord:
    """Simulate one acquisition of length duration_s at polarizers (alpha, beta).

    Args:
        config: bench properties (rates, window, offsets, sampling mode).
        source: pump dials.
        alpha, beta: analyzer dial settings, degrees (beta_offset is applied
            internally; the record reports the dial values).
        duration_s: counting window in seconds, > 0.
        rng: generator to draw from; a fresh one seeded with config.rng_seed
            when omitted, so a lone call is reproducible by itself.

    Returns:
        CountRecord with independent Poisson singles and coincidences.
    """
    if duration_s <= 0:
        raise ValueError("duration_s must be > 0")
    if rng is None:
        rng = np.random.default_rng(config.rng_seed)

    n_a = int(rng.poisson(config.singles_rate_a * duration_s))
    n_b = int(rng.poisson(config.singles_rate_b * duration_s))

    if config.phase_spread_mode == "scalar":
        n_coinc = int(rng.poisson(
            mean_coincidences(config, source, alpha, beta, duration_s)))
    else:
        # per-pair: draw a phase per pair, thin by that pair's P_VV bracket
        n_pairs = int(rng.poisson(config.pair_rate * duration_s))
        phis = source.phi_l + rng.uniform(-config.phase_halfwidth,
                                          config.phase_halfwidth, size=n_pairs)
        unit = replace(_count_model(config, source, duration_s),
                       a_pairs=1.0, c_offset=0.0)
        base = expected_counts(replace(unit, cos_phi_m=0.0),
                               alpha, beta + config.beta_offset)
        slope = (expected_counts(replace(unit, cos_phi_m=1.0),
                                 alpha, beta + config.beta_offset) - base)
        p = np.clip(base + slope * np.cos(np.radians(phis)), 0.0, 1.0)
        detected = int(np.count_nonzero(rng.uniform(size=n_pairs) < p))
        floor = (config.background_coinc_rate * duration_s
                 + accidental_mean(config.coincidence_window_tau,
                                   config.singles_rate_a * duration_s,
                                   config.singles_rate_b * duration_s, duration_s))
        n_coinc = detected + int(rng.poisson(floor))

    return CountRecord(alpha=alpha, beta=beta, duration_s=duration_s,
                       n_a=n_a, n_b=n_b, n_coinc=n_coinc)


def run_protocol(config: ApparatusConfig, source: SourceState,
                 settings: list[tuple[float, float]],
                 duration_s: float) -> list[CountRecord]:
    """Acquire once per (alpha, beta) setting, in order, on one RNG stream."""
    if not settings:
        raise ValueError("settings must be nonempty")
    rng = np.random.default_rng(config.rng_seed)
    return [acquire(config, source, alpha, beta, duration_s, rng=rng)
            for alpha, beta in settings]


class SessionBusyError(RuntimeError):
    """A second step was attempted while one is already in flight."""


class LiveSession:
    """Sequential measurement session with its own RNG stream and history.

    Steps are strictly serialized: a step attempted while another is in
    flight raises SessionBusyError rather than queueing.  The session tracks
    every record and the cumulative expected pair budget pair_rate * sum(T).
    """

    def __init__(self, config: ApparatusConfig, source: SourceState | None = None):
        self.config = config
        self._source = source if source is not None else SourceState()
        self._rng = np.random.default_rng(config.rng_seed)
        self.history: list[CountRecord] = []
        self.pairs_budget = 0.0
        self.lock = threading.Lock()  # held for the span of each step

    @property
    def source(self) -> SourceState:
        return self._source

    def set_source(self, theta_l: float | None = None,
                   phi_l: float | None = None) -> SourceState:
        """Turn the pump dials; returns the new state."""
        with self.lock:
            self._source = SourceState(
                theta_l=self._source.theta_l if theta_l is None else float(theta_l),
                phi_l=self._source.phi_l if phi_l is None else float(phi_l),
            )
            return self._source

    def step(self, alpha: float, beta: float, duration_s: float) -> CountRecord:
        """One acquisition at the analyzer dials (alpha, beta)."""
        if not self.lock.acquire(blocking=False):
            raise SessionBusyError("an acquisition is already in flight")
        try:
            record = acquire(self.config, self._source, alpha, beta,
                             duration_s, rng=self._rng)
            self.history.append(record)
            self.pairs_budget += self.config.pair_rate * duration_s
            return record
        finally:
            self.lock.release()
