"""Polarization quantum model of a two-crystal downconversion photon-pair source.

A pump photon polarized at angle theta_l from vertical meets two thin nonlinear
crystals whose optic axes are crossed.  The vertical pump component downconverts
in one crystal to a horizontally polarized signal/idler pair, the horizontal
component in the other crystal to a vertical pair, so the pair emerges in

    |psi> = cos(theta_l) |HH> + e^(i*phi) sin(theta_l) |VV>,

where phi = phi_l + delta collects the quartz-plate phase phi_l and the phase
delta acquired inside the crystals.  Because delta varies across the collected
bandwidth, interference terms carry the ensemble average <cos phi> = cos(phi_m)
rather than a sharp cos(phi); the state object stores that average as the
scalar ``cos_phi_m`` (the density-matrix treatment reduces to exactly this
substitution for the quantities modeled here).

Each photon then meets a polarizer at angle alpha (signal) or beta (idler),
measured from vertical, with transmission basis

    |V_alpha> = cos(alpha) |V> - sin(alpha) |H>.

All angles at this interface are in degrees; conversion to radians happens
once, inside the trig helpers.  Every function here is pure, and all returned
probabilities obey the polarizer periodicity f(angle) = f(angle + 180).
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

__all__ = [
    "ChshAngles",
    "CANONICAL_ANGLES",
    "CountModelParams",
    "OutcomeProbabilities",
    "PumpConfig",
    "TwoPhotonState",
    "expected_counts",
    "marginal_prob_v",
    "normalize_angle",
    "outcome_probs",
    "prob_vv",
    "prob_vv_epr",
    "pump_state",
    "qm_E",
    "qm_S",
]

_NORM_TOL = 1e-12


def normalize_angle(angle: float) -> float:
    """Map an angle in degrees to the canonical interval [0, 360)."""
    return float(angle) % 360.0


def _sincos(angle_deg: float) -> tuple[float, float]:
    rad = math.radians(angle_deg)
    return math.sin(rad), math.cos(rad)


@dataclass(frozen=True)
class ChshAngles:
    """The four polarizer settings (a, a', b, b') of a CHSH measurement, degrees.

    The canonical choice maximizing the quantum value is a = -45, a' = 0,
    b = -22.5, b' = 22.5 (every pairing differs by 22.5 deg except a/b' at
    67.5 deg, which enters S with the minus sign).
    """

    a: float
    a_prime: float
    b: float
    b_prime: float


CANONICAL_ANGLES = ChshAngles(a=-45.0, a_prime=0.0, b=-22.5, b_prime=22.5)


@dataclass(frozen=True)
class PumpConfig:
    """Pump preparation dials: polarizer angle and phase plate, degrees.

    theta_l is the pump polarizer angle from vertical, phi_l the quartz-plate
    phase, delta the crystal phase; the state only sees phi = phi_l + delta.
    """

    theta_l: float
    phi_l: float = 0.0
    delta: float = 0.0

    @property
    def phi(self) -> float:
        return self.phi_l + self.delta

    def state(self) -> "TwoPhotonState":
        return pump_state(self.theta_l, self.phi_l, self.delta)


@dataclass(frozen=True)
class TwoPhotonState:
    """Two-amplitude polarization state  amp_hh |HH> + amp_vv |VV>.

    ``cos_phi_m`` is the ensemble-averaged interference visibility that
    replaces cos(phi) in coincidence probabilities.  For a pure state it
    defaults to cos(arg(amp_vv) - arg(amp_hh)); passing a smaller value models
    the phase-averaged mixed state.
    """

    amp_hh: complex
    amp_vv: complex
    cos_phi_m: float = None  # type: ignore[assignment]  # filled in __post_init__

    def __post_init__(self) -> None:
        norm = abs(self.amp_hh) ** 2 + abs(self.amp_vv) ** 2
        if abs(norm - 1.0) > _NORM_TOL:
            raise ValueError(f"state norm is {norm!r}, amplitudes must satisfy "
                             "|amp_hh|^2 + |amp_vv|^2 = 1")
        if self.cos_phi_m is None:
            pure = math.cos(cmath.phase(self.amp_vv) - cmath.phase(self.amp_hh))
            object.__setattr__(self, "cos_phi_m", pure)
        if not -1.0 - _NORM_TOL <= self.cos_phi_m <= 1.0 + _NORM_TOL:
            raise ValueError(f"cos_phi_m = {self.cos_phi_m!r} outside [-1, 1]")


EPR_STATE = TwoPhotonState(amp_hh=1.0 / math.sqrt(2.0), amp_vv=1.0 / math.sqrt(2.0))


@dataclass(frozen=True)
class OutcomeProbabilities:
    """The four joint polarizer outcomes at one (alpha, beta) setting."""

    p_vv: float
    p_vh: float
    p_hv: float
    p_hh: float

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.p_vv, self.p_vh, self.p_hv, self.p_hh)


@dataclass(frozen=True)
class CountModelParams:
    """Parameters of the coincidence count model N = A * P_VV-bracket + C.

    a_pairs is the total collected pair count A over the acquisition window,
    c_offset the angle-independent background C from polarizer and crystal
    imperfections; theta_l and cos_phi_m fix the bracket.
    """

    a_pairs: float
    c_offset: float
    theta_l: float
    cos_phi_m: float

    def __post_init__(self) -> None:
        if self.a_pairs < 0:
            raise ValueError("a_pairs must be >= 0")
        if self.c_offset < 0:
            raise ValueError("c_offset must be >= 0")
        if not -1.0 <= self.cos_phi_m <= 1.0:
            raise ValueError(f"cos_phi_m = {self.cos_phi_m!r} outside [-1, 1]")


def pump_state(theta_l: float, phi_l: float, delta: float = 0.0) -> TwoPhotonState:
    """Build the downconversion state for pump dials (degrees).

    Args:
        theta_l: pump polarizer angle from vertical.
        phi_l: quartz-plate phase.
        delta: additional crystal phase; the state depends on phi_l + delta only.

    Returns:
        TwoPhotonState with amp_hh = cos(theta_l), amp_vv = e^(i phi) sin(theta_l)
        and the pure-state visibility cos_phi_m = cos(phi_l + delta).
    """
    sin_t, cos_t = _sincos(theta_l)
    phi = math.radians(phi_l + delta)
    return TwoPhotonState(
        amp_hh=complex(cos_t, 0.0),
        amp_vv=cmath.exp(1j * phi) * sin_t,
        cos_phi_m=math.cos(phi),
    )


def _bracket(c2: float, s2: float, cross: float, alpha: float, beta: float) -> float:
    """P_VV bracket for weights c2 = cos^2, s2 = sin^2, cross = sin(2 theta_l) cos(phi_m).

    Shared by the state route (weights from amplitudes) and the count-model
    route (weights from theta_l); this is the single implementation of

        sin^2(a) sin^2(b) cos^2(t) + cos^2(a) cos^2(b) sin^2(t)
        + 1/4 sin(2a) sin(2b) sin(2t) cos(phi_m).
    """
    sa, ca = _sincos(alpha)
    sb, cb = _sincos(beta)
    p = (c2 * sa * sa * sb * sb
         + s2 * ca * ca * cb * cb
         + cross * sa * ca * sb * cb)
    if -_NORM_TOL < p < 0.0:  # float guard, the expression is nonnegative
        return 0.0
    return p


def _state_weights(state: TwoPhotonState) -> tuple[float, float, float]:
    c2 = abs(state.amp_hh) ** 2
    s2 = abs(state.amp_vv) ** 2
    cross = 2.0 * abs(state.amp_hh) * abs(state.amp_vv) * state.cos_phi_m
    return c2, s2, cross


def prob_vv(state: TwoPhotonState, alpha: float, beta: float) -> float:
    """Probability that both photons pass polarizers at alpha, beta (degrees)."""
    c2, s2, cross = _state_weights(state)
    return _bracket(c2, s2, cross, alpha, beta)


def prob_vv_epr(alpha: float, beta: float) -> float:
    """Closed form 1/2 cos^2(beta - alpha) for the maximally entangled state."""
    c = math.cos(math.radians(beta - alpha))
    return 0.5 * c * c


def outcome_probs(state: TwoPhotonState, alpha: float, beta: float) -> OutcomeProbabilities:
    """All four outcome probabilities at one setting; they sum to 1.

    V and H outcomes at each side are modeled by the polarizer angle itself and
    its perpendicular setting (angle + 90 deg).
    """
    return OutcomeProbabilities(
        p_vv=prob_vv(state, alpha, beta),
        p_vh=prob_vv(state, alpha, beta + 90.0),
        p_hv=prob_vv(state, alpha + 90.0, beta),
        p_hh=prob_vv(state, alpha + 90.0, beta + 90.0),
    )


def marginal_prob_v(beta: float) -> float:
    """Idler V_beta probability for the maximally entangled state: exactly 1/2.

    Whatever happens on the signal side and wherever beta points,
    p_vv + p_hv = 1/2 cos^2(beta - alpha) + 1/2 sin^2(beta - alpha) = 1/2,
    so one side alone carries no signal.  The closed form is returned exactly;
    the property tests verify the outcome_probs route agrees.
    """
    del beta  # the marginal is angle-independent
    return 0.5


def expected_counts(params: CountModelParams, alpha: float, beta: float) -> float:
    """Mean coincidence count A * bracket + C at a polarizer setting (degrees)."""
    sin_t, cos_t = _sincos(params.theta_l)
    bracket = _bracket(
        c2=cos_t * cos_t,
        s2=sin_t * sin_t,
        cross=2.0 * sin_t * cos_t * params.cos_phi_m,
        alpha=alpha,
        beta=beta,
    )
    return params.a_pairs * bracket + params.c_offset


def qm_E(state: TwoPhotonState, alpha: float, beta: float) -> float:
    """Correlation E = p_vv + p_hh - p_vh - p_hv in [-1, 1].

    For the maximally entangled state this equals cos(2 (beta - alpha)).
    """
    p = outcome_probs(state, alpha, beta)
    return p.p_vv + p.p_hh - p.p_vh - p.p_hv


def qm_S(state: TwoPhotonState, angles: ChshAngles) -> float:
    """CHSH statistic S = E(a,b) - E(a,b') + E(a',b) + E(a',b')."""
    return (qm_E(state, angles.a, angles.b)
            - qm_E(state, angles.a, angles.b_prime)
            + qm_E(state, angles.a_prime, angles.b)
            + qm_E(state, angles.a_prime, angles.b_prime))
