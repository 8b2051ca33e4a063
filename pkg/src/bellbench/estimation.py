"""Turning counts into physics.

Everything downstream of the counters lives here: the four-count state
diagnostics (C, A, theta_l, phi_m), correlation values E and the CHSH
statistic S with its propagated uncertainty, weighted least-squares fits of
the full count model to polarizer scans, and the two-phase controller that
tunes the pump dials from count feedback alone.

All analysis functions are pure; only ``tune`` has a side effect, namely
driving a live session through its sequential stepping interface.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import least_squares

from bellbench.qm import (
    CANONICAL_ANGLES,
    ChshAngles,
    CountModelParams,
    expected_counts,
)

__all__ = [
    "ChshResult",
    "ChshRun",
    "DegenerateCountsError",
    "FitConvergenceError",
    "FitResult",
    "StateDiagnostics",
    "TuneResult",
    "chsh_settings",
    "compute_E",
    "compute_S",
    "diagnose_state",
    "fit_nmodel",
    "s_partials",
    "sigma_S",
    "tune",
]


class DegenerateCountsError(ValueError):
    """Counts violate a precondition of the analysis (e.g. a zero total)."""


class FitConvergenceError(RuntimeError):
    """The optimizer failed to converge; carries the best point found."""

    def __init__(self, message: str, best: "FitResult"):
        super().__init__(message)
        self.best = best


# --------------------------------------------------------------------------
# state diagnostics from four counts


@dataclass(frozen=True)
class StateDiagnostics:
    """Source parameters read off four counts at (0,0), (90,90), (0,90), (45,45).

    ``clamped`` reports that the interference term landed outside [-1, 1]
    (possible with noisy counts) and was clamped before taking the arccos.
    """

    c_offset: float
    a_pairs: float
    theta_l: float
    cos_phi_m: float
    phi_m: float
    clamped: bool


def diagnose_state(n00: float, n9090: float, n090: float,
                   n4545: float) -> StateDiagnostics:
    """Invert the count model on four counts.

    With C = N(0,90) and A = N(0,0) + N(90,90) - 2C, the polarizer-basis
    counts fix tan^2(theta_l) = (N(90,90)-C)/(N(0,0)-C) and the diagonal
    count fixes cos(phi_m) = [4(N(45,45)-C)/A - 1]/sin(2 theta_l).

    Counts may be floats (e.g. model means); they are not rounded.

    Raises:
        DegenerateCountsError: if N(0,0) <= N(0,90) or N(90,90) <= N(0,90),
            where the model cannot be inverted.
    """
    if n00 <= n090:
        raise DegenerateCountsError(
            f"degenerate counts: N(0,0) = {n00} must exceed N(0,90) = {n090}")
    if n9090 <= n090:
        raise DegenerateCountsError(
            f"degenerate counts: N(90,90) = {n9090} must exceed N(0,90) = {n090}")
    c_offset = float(n090)
    a_pairs = float(n00 + n9090 - 2 * n090)
    tan_sq = (n9090 - n090) / (n00 - n090)
    theta_l = math.degrees(math.atan(math.sqrt(tan_sq)))
    raw = ((4.0 * (n4545 - n090) / a_pairs) - 1.0) / math.sin(
        math.radians(2.0 * theta_l))
    clamped = abs(raw) > 1.0
    cos_phi_m = max(-1.0, min(1.0, raw))
    phi_m = math.degrees(math.acos(cos_phi_m))
    return StateDiagnostics(c_offset=c_offset, a_pairs=a_pairs, theta_l=theta_l,
                            cos_phi_m=cos_phi_m, phi_m=phi_m, clamped=clamped)


# --------------------------------------------------------------------------
# CHSH statistic from sixteen counts


def chsh_settings(angles: ChshAngles = CANONICAL_ANGLES
                  ) -> list[tuple[float, float]]:
    """The sixteen (alpha, beta) settings of a full CHSH run.

    Enumerated signal-major over alpha in (a, a', a+90, a'+90) and beta in
    (b, b', b+90, b'+90); for the canonical angles this is the conventional
    tabulation order alpha in (-45, 0, 45, 90), beta in (-22.5, 22.5, 67.5,
    112.5).
    """
    alphas = (angles.a, angles.a_prime, angles.a + 90.0, angles.a_prime + 90.0)
    betas = (angles.b, angles.b_prime, angles.b + 90.0, angles.b_prime + 90.0)
    return [(alpha, beta) for alpha in alphas for beta in betas]


def _same_polarizer(x: float, y: float) -> bool:
    """Dial angles x and y select the same polarizer axis (mod 180)."""
    d = (x - y) % 180.0
    return min(d, 180.0 - d) < 1e-9


@dataclass(frozen=True)
class ChshRun:
    """Sixteen equal-duration acquisitions covering the full CHSH grid.

    Exactly one record per (alpha, beta) cell of chsh_settings(angles),
    matched modulo 180 degrees (a polarizer at -45 and at 135 is the same
    polarizer).
    """

    records: tuple
    angles: ChshAngles = CANONICAL_ANGLES

    def __post_init__(self) -> None:
        records = tuple(self.records)
        object.__setattr__(self, "records", records)
        grid = chsh_settings(self.angles)
        if len(records) != len(grid):
            raise ValueError(
                f"a CHSH run needs {len(grid)} records, got {len(records)}")
        by_cell = {}
        missing = []
        for cell in grid:
            matches = [r for r in records
                       if _same_polarizer(r.alpha, cell[0])
                       and _same_polarizer(r.beta, cell[1])]
            if len(matches) > 1:
                raise ValueError(f"{len(matches)} records for setting {cell}")
            if not matches:
                missing.append(cell)
            else:
                by_cell[cell] = matches[0]
        if missing:
            raise ValueError("no record for settings: "
                             + ", ".join(str(cell) for cell in missing))
        durations = {r.duration_s for r in records}
        if len(durations) > 1:
            raise ValueError(f"records mix durations: {sorted(durations)}")
        object.__setattr__(self, "_by_cell", by_cell)

    @classmethod
    def from_records(cls, records, angles: ChshAngles = CANONICAL_ANGLES
                     ) -> "ChshRun":
        """Select the sixteen grid records out of a larger pile.

        Records at settings outside the grid (e.g. tuning steps in a session
        history) are ignored; a missing or doubly-covered cell is an error.
        """
        picked = []
        missing = []
        for cell in chsh_settings(angles):
            matches = [r for r in records
                       if _same_polarizer(r.alpha, cell[0])
                       and _same_polarizer(r.beta, cell[1])]
            if len(matches) > 1:
                raise ValueError(f"{len(matches)} records for setting {cell}")
            if not matches:
                missing.append(cell)
            else:
                picked.append(matches[0])
        if missing:
            raise ValueError("no record for settings: "
                             + ", ".join(str(cell) for cell in missing))
        return cls(records=tuple(picked), angles=angles)

    def count(self, alpha: float, beta: float) -> float:
        """Coincidence count at a grid cell (grid coordinates, not mod-180)."""
        return self._by_cell[(alpha, beta)].n_coinc

    @property
    def duration_s(self) -> float:
        return self.records[0].duration_s


@dataclass(frozen=True)
class ChshResult:
    """The four correlation values, S, and its counting uncertainty."""

    e_ab: float
    e_abp: float
    e_apb: float
    e_apbp: float
    s_value: float
    sigma_s: float

    @property
    def significance(self) -> float:
        """How many sigma the run sits beyond the classical bound of 2."""
        return (abs(self.s_value) - 2.0) / self.sigma_s


def compute_E(n_ab: float, n_apbp: float, n_abp: float, n_apb: float) -> float:
    """Correlation value from the four counts of one analyzer pair.

    E = (N(a,b) + N(a+90,b+90) - N(a,b+90) - N(a+90,b)) / total, in [-1, 1].
    """
    total = n_ab + n_apbp + n_abp + n_apb
    if total <= 0:
        raise DegenerateCountsError(
            "correlation undefined: total coincidence count is zero")
    return (n_ab + n_apbp - n_abp - n_apb) / total


def _e_groups(angles: ChshAngles):
    """Cells of each correlation, ordered (ab, a+90 b+90, a b+90, a+90 b)."""
    groups = {}
    for e_name, alpha, beta in (("e_ab", angles.a, angles.b),
                                ("e_abp", angles.a, angles.b_prime),
                                ("e_apb", angles.a_prime, angles.b),
                                ("e_apbp", angles.a_prime, angles.b_prime)):
        groups[e_name] = ((alpha, beta), (alpha + 90.0, beta + 90.0),
                         (alpha, beta + 90.0), (alpha + 90.0, beta))
    return groups


def _grid_cell(run: ChshRun, alpha: float, beta: float) -> tuple[float, float]:
    """Map an analyzer pair onto the run's grid coordinates (mod 180)."""
    for cell in chsh_settings(run.angles):
        if _same_polarizer(cell[0], alpha) and _same_polarizer(cell[1], beta):
            return cell
    raise KeyError((alpha, beta))


def _group_counts(run: ChshRun) -> dict[str, tuple[float, float, float, float]]:
    groups = {}
    for e_name, cells in _e_groups(run.angles).items():
        groups[e_name] = tuple(run.count(*_grid_cell(run, a, b))
                               for a, b in cells)
    return groups


def compute_S(run: ChshRun, add_one_smoothing: bool = False) -> ChshResult:
    """Assemble S = E(a,b) - E(a,b') + E(a',b) + E(a',b') with its sigma.

    Args:
        run: the sixteen-cell acquisition.
        add_one_smoothing: forwarded to sigma_S; the E values themselves are
            always computed from the raw counts.
    """
    e = {}
    for e_name, counts in _group_counts(run).items():
        try:
            e[e_name] = compute_E(*counts)
        except DegenerateCountsError as err:
            raise DegenerateCountsError(f"{e_name}: {err}") from None
    s_value = e["e_ab"] - e["e_abp"] + e["e_apb"] + e["e_apbp"]
    return ChshResult(e_ab=e["e_ab"], e_abp=e["e_abp"], e_apb=e["e_apb"],
                      e_apbp=e["e_apbp"], s_value=s_value,
                      sigma_s=sigma_S(run, add_one_smoothing=add_one_smoothing))


# signs of the four cells inside each E numerator, and of each E inside S
_CELL_SIGNS = (1.0, 1.0, -1.0, -1.0)
_S_SIGNS = {"e_ab": 1.0, "e_abp": -1.0, "e_apb": 1.0, "e_apbp": 1.0}


def sigma_S(run: ChshRun, add_one_smoothing: bool = False) -> float:
    """Counting uncertainty of S: sqrt(sum_i N_i (dS/dN_i)^2).

    Each count enters exactly one E, so the partials follow from the quotient
    rule: dE/dN_i = (s_i - E)/N_total with s_i the numerator sign of cell i.
    The per-count variance is N_i (Poisson); a zero count makes that model
    meaningless and raises unless add_one_smoothing is set, which uses
    N_i + 1 as the variance (the partials still use the raw counts).
    """
    variance = 0.0
    for e_name, counts in _group_counts(run).items():
        total = sum(counts)
        if total <= 0:
            raise DegenerateCountsError(
                f"{e_name}: total coincidence count is zero")
        e_value = (counts[0] + counts[1] - counts[2] - counts[3]) / total
        for n, sign in zip(counts, _CELL_SIGNS):
            if n <= 0 and not add_one_smoothing:
                raise DegenerateCountsError(
                    f"{e_name}: zero count in a cell; sqrt(N) uncertainty "
                    "undefined (add_one_smoothing=True to override)")
            n_eff = n + 1.0 if add_one_smoothing else n
            variance += n_eff * ((sign - e_value) / total) ** 2
    return math.sqrt(variance)


def s_partials(run: ChshRun) -> tuple[float, ...]:
    """Analytic dS/dN_i for the sixteen cells, in chsh_settings order."""
    by_cell = {}
    for e_name, cells in _e_groups(run.angles).items():
        counts = _group_counts(run)[e_name]
        total = sum(counts)
        if total <= 0:
            raise DegenerateCountsError(
                f"{e_name}: total coincidence count is zero")
        e_value = (counts[0] + counts[1] - counts[2] - counts[3]) / total
        for (alpha, beta), sign in zip(cells, _CELL_SIGNS):
            cell = _grid_cell(run, alpha, beta)
            by_cell[cell] = _S_SIGNS[e_name] * (sign - e_value) / total
    return tuple(by_cell[cell] for cell in chsh_settings(run.angles))


# --------------------------------------------------------------------------
# count-model fits


@dataclass(frozen=True)
class FitResult:
    """Best-fit count-model parameters with standard errors.

    ``errors`` maps parameter names to one-sigma uncertainties from the
    local quadratic approximation at the optimum; ``beta_shift`` is None
    when the fit did not include the analyzer-offset parameter.
    """

    a_pairs: float
    c_offset: float
    theta_l: float
    cos_phi_m: float
    beta_shift: float | None
    errors: dict[str, float]
    chi_square: float
    dof: int

    @property
    def phi_m(self) -> float:
        return math.degrees(math.acos(max(-1.0, min(1.0, self.cos_phi_m))))


_FIT_STARTS_THETA = (20.0, 45.0, 70.0)


def fit_nmodel(scan, fit_beta_shift: bool = False) -> FitResult:
    """Weighted least-squares fit of N = A*P_VV(theta_l, phi_m; a, b) + C.

    Args:
        scan: records with .alpha, .beta and .n_coinc attributes; needs at
            least 6 points spanning >= 2 distinct alpha and >= 4 distinct
            beta, or the parameters are not identifiable.
        fit_beta_shift: also fit a common offset added to every beta dial
            (a polarizer miscalibrated by a few degrees).

    Minimizes sum (N - model(alpha, beta + shift))^2 / max(N, 1) under the
    bounds A, C >= 0, theta_l in [0, 90], cos_phi_m in [-1, 1], |shift| <=
    10, multi-starting theta_l to step over the tan^2 degeneracy.

    Raises:
        ValueError: insufficient span.
        FitConvergenceError: no start converged; .best holds the best point.
    """
    records = list(scan)
    alphas = {float(r.alpha) for r in records}
    betas = {float(r.beta) for r in records}
    if len(records) < 6 or len(alphas) < 2 or len(betas) < 4:
        raise ValueError(
            "scan cannot identify the model: need >= 6 records spanning "
            f">= 2 alpha and >= 4 beta values, got {len(records)} records, "
            f"{len(alphas)} alpha, {len(betas)} beta")

    counts = np.array([float(r.n_coinc) for r in records])
    weights = 1.0 / np.sqrt(np.maximum(counts, 1.0))

    def model(x: np.ndarray) -> np.ndarray:
        shift = x[4] if fit_beta_shift else 0.0
        params = CountModelParams(a_pairs=x[0], c_offset=x[1], theta_l=x[2],
                                  cos_phi_m=x[3])
        return np.array([expected_counts(params, r.alpha, r.beta + shift)
                         for r in records])

    def residuals(x: np.ndarray) -> np.ndarray:
        return (counts - model(x)) * weights

    c0 = float(counts.min())
    a0 = max(2.0 * float(counts.max() - counts.min()), 1.0)
    lower = [0.0, 0.0, 0.0, -1.0]
    upper = [np.inf, np.inf, 90.0, 1.0]
    if fit_beta_shift:
        lower.append(-10.0)
        upper.append(10.0)

    best = None
    for theta0 in _FIT_STARTS_THETA:
        x0 = [a0, c0, theta0, 0.5] + ([0.0] if fit_beta_shift else [])
        result = least_squares(residuals, x0, bounds=(lower, upper),
                               method="trf", xtol=1e-12, ftol=1e-12,
                               gtol=1e-12, max_nfev=4000)
        if best is None or result.cost < best.cost:
            best = result

    names = ["a_pairs", "c_offset", "theta_l", "cos_phi_m"]
    if fit_beta_shift:
        names.append("beta_shift")
    jac = best.jac
    covariance = np.linalg.pinv(jac.T @ jac)
    stderr = np.sqrt(np.maximum(np.diag(covariance), 0.0))
    fitted = FitResult(
        a_pairs=float(best.x[0]),
        c_offset=float(best.x[1]),
        theta_l=float(best.x[2]),
        cos_phi_m=float(best.x[3]),
        beta_shift=float(best.x[4]) if fit_beta_shift else None,
        errors={name: float(err) for name, err in zip(names, stderr)},
        chi_square=float(2.0 * best.cost),
        dof=len(records) - len(names),
    )
    if not best.success:
        raise FitConvergenceError(
            f"fit did not converge: {best.message}", fitted)
    return fitted


# --------------------------------------------------------------------------
# tuning controller

_PAIRS_PER_STEP = 300.0     # default acquisition length targets this many pairs
_THETA_REPS = 6             # acquisitions summed per side in the bisection
_THETA_FLOOR_DEG = 0.4      # stop splitting below this dial resolution
_PHASE_REPS = 4             # acquisitions summed per golden-section probe
_PHASE_ITERS = 8            # golden-section refinements after the 2 seed probes
_DIAG_REPS = 16             # acquisitions summed per final diagnostic setting
_INV_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class TuneResult:
    """Outcome of a tuning run: final dials, diagnostics, and bookkeeping.

    ``converged`` is False when the step budget ran out before both phases
    and the closing diagnostics completed; the settings are then best-so-far
    and ``diagnostics`` may be None.
    """

    theta_l_setting: float
    phi_l_setting: float
    diagnostics: StateDiagnostics | None
    converged: bool
    acquisitions_used: int


def tune(session, step_budget: int, duration_s: float | None = None) -> TuneResult:
    """Dial the source to the maximally entangled point from counts alone.

    Phase 1 bisects the pump-polarizer dial until the coincidence counts at
    (0,0) and (90,90) agree within 2*sqrt of their sum; phase 2 maximizes
    N(45,45) over the pump-phase dial by golden-section search.  A closing
    set of four summed acquisitions yields the returned diagnostics.

    Args:
        session: live bench handle providing .config, .source, .set_source
            and .step.
        step_budget: maximum number of acquisitions to spend.
        duration_s: length of each acquisition; defaults to the time that
            yields ~300 expected pairs at the session's pair rate.

    The controller never raises on exhaustion; it returns best-so-far with
    converged=False.
    """
    if step_budget < 0:
        raise ValueError("step_budget must be >= 0")
    if duration_s is None:
        rate = session.config.pair_rate
        duration_s = _PAIRS_PER_STEP / rate if rate > 0 else 1.0
    used = 0

    def left() -> int:
        return step_budget - used

    def measure(alpha: float, beta: float, reps: int) -> float:
        nonlocal used
        total = 0.0
        for _ in range(reps):
            total += session.step(alpha, beta, duration_s).n_coinc
            used += 1
        return total

    theta = session.source.theta_l
    phi = session.source.phi_l

    # phase 1: equalize N(0,0) and N(90,90) by bisection on the theta dial;
    # their difference grows monotonically with the dial
    theta_ok = False
    lo, hi = 1.0, 89.0
    while left() >= 2 * _THETA_REPS:
        theta = 0.5 * (lo + hi)
        session.set_source(theta_l=theta)
        n00 = measure(0.0, 0.0, _THETA_REPS)
        n9090 = measure(90.0, 90.0, _THETA_REPS)
        if (abs(n00 - n9090) <= 2.0 * math.sqrt(n00 + n9090)
                or hi - lo < _THETA_FLOOR_DEG):
            theta_ok = True
            break
        if n00 < n9090:
            lo = theta
        else:
            hi = theta

    # phase 2: golden-section maximization of N(45,45) over the phase dial
    phase_ok = False
    if theta_ok and left() >= (2 + _PHASE_ITERS) * _PHASE_REPS:
        a, b = -90.0, 90.0
        x1 = b - _INV_GOLDEN * (b - a)
        x2 = a + _INV_GOLDEN * (b - a)
        session.set_source(phi_l=x1)
        f1 = measure(45.0, 45.0, _PHASE_REPS)
        session.set_source(phi_l=x2)
        f2 = measure(45.0, 45.0, _PHASE_REPS)
        phase_ok = True
        for _ in range(_PHASE_ITERS):
            if f1 < f2:
                a, x1, f1 = x1, x2, f2
                x2 = a + _INV_GOLDEN * (b - a)
                session.set_source(phi_l=x2)
                f2 = measure(45.0, 45.0, _PHASE_REPS)
            else:
                b, x2, f2 = x2, x1, f1
                x1 = b - _INV_GOLDEN * (b - a)
                session.set_source(phi_l=x1)
                f1 = measure(45.0, 45.0, _PHASE_REPS)
        phi = 0.5 * (a + b)
        session.set_source(phi_l=phi)

    # closing diagnostics on fresh summed counts at the final dials
    diagnostics = None
    if theta_ok and phase_ok and left() >= 4 * _DIAG_REPS:
        n00 = measure(0.0, 0.0, _DIAG_REPS)
        n9090 = measure(90.0, 90.0, _DIAG_REPS)
        n090 = measure(0.0, 90.0, _DIAG_REPS)
        n4545 = measure(45.0, 45.0, _DIAG_REPS)
        try:
            diagnostics = diagnose_state(n00, n9090, n090, n4545)
        except DegenerateCountsError:
            diagnostics = None

    return TuneResult(theta_l_setting=theta, phi_l_setting=phi,
                      diagnostics=diagnostics,
                      converged=diagnostics is not None,
                      acquisitions_used=used)
