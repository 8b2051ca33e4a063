"""Local hidden-variable models and their CHSH values by quadrature.

A strategy assigns every photon pair a shared polarization angle lambda drawn
from a density rho(lambda) on [0, 180) deg, and deterministic outcome rules
A(lambda, alpha), B(lambda, beta) in {+1, -1} (+1 means the photon passes the
polarizer, V; -1 means H).  The correlation is

    E(alpha, beta) = integral of A(lambda, alpha) B(lambda, beta) rho(lambda)

and S is the usual four-setting combination.  Every such model satisfies
|S| <= 2; the property suite exercises that bound over seeded random
strategies.

Strategies are bin-tabulated rather than arbitrary callables: the density is
piecewise constant on K uniform bins and the outcome rules are sign step
functions of the folded angular distance between lambda and the polarizer
axis.  That keeps them serializable (JSON) and replayable, and makes the
midpoint quadrature exact whenever every discontinuity lands on a cell edge.
The default node count 100_080 is a multiple of 360 and of 36, so thresholds
and polarizer angles on the half-degree lattice, and 5-degree density bins,
all align with cell edges and the integrals come out exact to rounding.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from bellbench.qm import CANONICAL_ANGLES, ChshAngles  # noqa: F401  (re-export)

__all__ = [
    "CANONICAL_ANGLES",
    "ChshAngles",
    "DEFAULT_QUADRATURE_POINTS",
    "DensityNormalizationError",
    "HvtStrategy",
    "fold_distance",
    "hvt_E",
    "hvt_S",
    "hvt_S_batch",
    "hvt_prob_vv",
    "random_hvt",
    "sample_lambdas",
    "simple_hvt",
    "single_pair_s",
    "strategy_from_json",
    "strategy_to_json",
]

DEFAULT_QUADRATURE_POINTS = 100_080
DENSITY_BINS = 36  # 5-degree bins over [0, 180)


class DensityNormalizationError(ValueError):
    """The strategy's density does not integrate to 1 (or goes negative)."""


def fold_distance(x, y):
    """Angular distance between two axes, mod 180 and folded into [0, 90] deg."""
    d = np.abs(np.asarray(x, dtype=float) - np.asarray(y, dtype=float)) % 180.0
    return np.where(d > 90.0, 180.0 - d, d)


def _step_eval(thresholds: np.ndarray, signs: np.ndarray, distance):
    """Evaluate a sign step function of the folded distance.

    Segment j covers (t_{j-1}, t_j]; a distance exactly on a threshold takes
    the lower segment's sign, so the simple model's tie at 45 deg reads +1.
    """
    idx = np.searchsorted(thresholds, distance, side="left")
    return signs[np.minimum(idx, len(signs) - 1)]


@dataclass(frozen=True)
class HvtStrategy:
    """Bin-tabulated hidden-variable model.

    density_bins: rho values on DENSITY_BINS uniform bins over [0, 180).
    a_thresholds / b_thresholds: ascending fold-distance cut points ending at
    90; a_signs / b_signs give the outcome on each segment.
    """

    density_bins: tuple[float, ...]
    a_thresholds: tuple[float, ...]
    a_signs: tuple[int, ...]
    b_thresholds: tuple[float, ...]
    b_signs: tuple[int, ...]
    seed: int | None = None

    def __post_init__(self) -> None:
        for name in ("a", "b"):
            thresholds = getattr(self, f"{name}_thresholds")
            signs = getattr(self, f"{name}_signs")
            if len(thresholds) != len(signs):
                raise ValueError(f"{name}_thresholds and {name}_signs lengths differ")
            if list(thresholds) != sorted(thresholds) or thresholds[-1] != 90.0:
                raise ValueError(f"{name}_thresholds must ascend and end at 90")
            if any(s not in (-1, 1) for s in signs):
                raise ValueError(f"{name}_signs must be +1 or -1")

    def density(self, lam):
        """rho(lambda), vectorized; lambda is taken mod 180."""
        bins = np.asarray(self.density_bins, dtype=float)
        width = 180.0 / len(bins)
        idx = (np.asarray(lam, dtype=float) % 180.0 / width).astype(int)
        return bins[np.minimum(idx, len(bins) - 1)]

    def outcome_a(self, lam, alpha):
        """A(lambda, alpha) in {+1, -1}; accepts scalars or arrays."""
        out = _step_eval(np.asarray(self.a_thresholds), np.asarray(self.a_signs),
                         fold_distance(lam, alpha))
        return int(out) if np.isscalar(lam) and np.isscalar(alpha) else out

    def outcome_b(self, lam, beta):
        """B(lambda, beta) in {+1, -1}; accepts scalars or arrays."""
        out = _step_eval(np.asarray(self.b_thresholds), np.asarray(self.b_signs),
                         fold_distance(lam, beta))
        return int(out) if np.isscalar(lam) and np.isscalar(beta) else out

    def density_integral(self) -> float:
        """Exact integral of the bin-tabulated density over [0, 180)."""
        bins = np.asarray(self.density_bins, dtype=float)
        return float(bins.sum() * (180.0 / len(bins)))


def _check_density(strategy: HvtStrategy) -> None:
    bins = np.asarray(strategy.density_bins, dtype=float)
    if np.any(bins < 0.0):
        raise DensityNormalizationError("density has negative bins")
    integral = strategy.density_integral()
    if abs(integral - 1.0) > 1e-9:
        raise DensityNormalizationError(
            f"density integrates to {integral!r}, expected 1 within 1e-9")


def simple_hvt() -> HvtStrategy:
    """The step-function model: both photons carry the same polarization lambda.

    The density is uniform, and a photon registers V (+1) at a polarizer
    whenever its polarization lies within 45 deg of the polarizer axis
    (distances mod 180, folded).  This reproduces P_VV = 1/2 - d/180 and
    saturates |S| = 2 at the canonical angles without ever exceeding it.
    """
    return HvtStrategy(
        density_bins=(1.0 / 180.0,) * DENSITY_BINS,
        a_thresholds=(45.0, 90.0), a_signs=(1, -1),
        b_thresholds=(45.0, 90.0), b_signs=(1, -1),
    )


def hvt_prob_vv(alpha: float, beta: float) -> float:
    """Closed-form P_VV of the simple model: 1/2 - d/180, d the folded distance."""
    return 0.5 - float(fold_distance(alpha, beta)) / 180.0


def _midpoints(n: int) -> tuple[np.ndarray, float]:
    h = 180.0 / n
    return (np.arange(n) + 0.5) * h, h


def hvt_E(strategy: HvtStrategy, alpha: float, beta: float,
          quadrature_points: int = DEFAULT_QUADRATURE_POINTS) -> float:
    """Correlation E(alpha, beta) by composite midpoint quadrature.

    Args:
        strategy: the model; its density must integrate to 1.
        alpha, beta: polarizer angles, degrees.
        quadrature_points: midpoint nodes over [0, 180); at least 1000.

    Returns:
        E in [-1, 1] up to quadrature error (exact when all discontinuities
        sit on cell edges, see the module docstring).
    """
    if quadrature_points < 1000:
        raise ValueError("quadrature_points must be >= 1000")
    _check_density(strategy)
    lam, h = _midpoints(quadrature_points)
    integrand = (strategy.outcome_a(lam, alpha)
                 * strategy.outcome_b(lam, beta)
                 * strategy.density(lam))
    return float(integrand.sum() * h)


def hvt_S(strategy: HvtStrategy, angles: ChshAngles,
          quadrature_points: int = DEFAULT_QUADRATURE_POINTS) -> float:
    """S = E(a,b) - E(a,b') + E(a',b) + E(a',b') for a hidden-variable model."""
    return (hvt_E(strategy, angles.a, angles.b, quadrature_points)
            - hvt_E(strategy, angles.a, angles.b_prime, quadrature_points)
            + hvt_E(strategy, angles.a_prime, angles.b, quadrature_points)
            + hvt_E(strategy, angles.a_prime, angles.b_prime, quadrature_points))


def hvt_S_batch(strategy: HvtStrategy, quads: np.ndarray,
                quadrature_points: int = 1080) -> np.ndarray:
    """S for many angle quadruples at once (vectorized over one strategy).

    quads is an (M, 4) array of (a, a', b, b') rows in degrees.  The integrand
    pieces are shared across quadruples: outcome tables are evaluated once per
    unique angle and combined per row.  1080 nodes are exact for angles and
    thresholds on the half-degree lattice (multiple of 360); pass the scalar
    default for off-lattice work and compare with hvt_S.
    """
    _check_density(strategy)
    quads = np.asarray(quads, dtype=float)
    if quads.ndim != 2 or quads.shape[1] != 4:
        raise ValueError("quads must have shape (M, 4)")
    lam, h = _midpoints(quadrature_points)
    rho_w = strategy.density(lam) * h

    a_angles, a_inv = np.unique(quads[:, :2], return_inverse=True)
    b_angles, b_inv = np.unique(quads[:, 2:], return_inverse=True)
    a_inv = a_inv.reshape(quads[:, :2].shape)
    b_inv = b_inv.reshape(quads[:, 2:].shape)

    a_table = strategy.outcome_a(lam[None, :], a_angles[:, None]) * rho_w
    b_table = strategy.outcome_b(lam[None, :], b_angles[:, None])

    # E rows needed per quad: (a,b), (a,b'), (a',b), (a',b')
    ia = np.stack([a_inv[:, 0], a_inv[:, 0], a_inv[:, 1], a_inv[:, 1]], axis=1).ravel()
    ib = np.stack([b_inv[:, 0], b_inv[:, 1], b_inv[:, 0], b_inv[:, 1]], axis=1).ravel()
    e = np.einsum("ij,ij->i", a_table[ia], b_table[ib]).reshape(-1, 4)
    return e[:, 0] - e[:, 1] + e[:, 2] + e[:, 3]


def single_pair_s(strategy: HvtStrategy, lam: float, angles: ChshAngles) -> int:
    """Per-pair CHSH contribution; always +2 or -2.

    s = A(lam,a) [B(lam,b) - B(lam,b')] + A(lam,a') [B(lam,b) + B(lam,b')];
    one bracket is 0 and the other +-2, whatever the four outcomes are.
    """
    b1 = strategy.outcome_b(lam, angles.b)
    b2 = strategy.outcome_b(lam, angles.b_prime)
    return int(strategy.outcome_a(lam, angles.a) * (b1 - b2)
               + strategy.outcome_a(lam, angles.a_prime) * (b1 + b2))


def sample_lambdas(strategy: HvtStrategy, n: int, rng: np.random.Generator) -> np.ndarray:
    """Draw n hidden values from the strategy's density (bin index, then uniform)."""
    _check_density(strategy)
    bins = np.asarray(strategy.density_bins, dtype=float)
    width = 180.0 / len(bins)
    probs = bins * width
    idx = rng.choice(len(bins), size=n, p=probs / probs.sum())
    return (idx + rng.uniform(0.0, 1.0, size=n)) * width


_HALF_DEG_CUTS = np.arange(0.5, 90.0, 0.5)  # serializable threshold lattice


def random_hvt(seed: int) -> HvtStrategy:
    """Deterministic-in-seed random strategy for the CHSH-bound property suite.

    The density is DENSITY_BINS uniform random bins normalized to integrate to
    1; each outcome rule is a random sign step function with up to 3 interior
    thresholds drawn on the half-degree lattice (keeping quadrature on node
    counts that are multiples of 360 exact).
    """
    rng = np.random.default_rng(seed)
    bins = rng.uniform(0.0, 1.0, size=DENSITY_BINS)
    bins = bins / (bins.sum() * (180.0 / DENSITY_BINS))

    def draw_rule() -> tuple[tuple[float, ...], tuple[int, ...]]:
        n_cuts = int(rng.integers(0, 4))
        cuts = np.sort(rng.choice(_HALF_DEG_CUTS, size=n_cuts, replace=False))
        thresholds = tuple(float(c) for c in cuts) + (90.0,)
        signs = tuple(int(s) for s in rng.choice([-1, 1], size=n_cuts + 1))
        return thresholds, signs

    a_thresholds, a_signs = draw_rule()
    b_thresholds, b_signs = draw_rule()
    return HvtStrategy(
        density_bins=tuple(float(b) for b in bins),
        a_thresholds=a_thresholds, a_signs=a_signs,
        b_thresholds=b_thresholds, b_signs=b_signs,
        seed=int(seed),
    )


def strategy_to_json(strategy: HvtStrategy) -> str:
    """Serialize a strategy so property-test failures can be replayed."""
    doc = {
        "schema_version": 1,
        "kind": "hvt_strategy",
        "seed": strategy.seed,
        "density_bins": list(strategy.density_bins),
        "a_thresholds": list(strategy.a_thresholds),
        "a_signs": list(strategy.a_signs),
        "b_thresholds": list(strategy.b_thresholds),
        "b_signs": list(strategy.b_signs),
    }
    return json.dumps(doc, indent=2)


def strategy_from_json(text: str) -> HvtStrategy:
    doc = json.loads(text)
    if doc.get("kind") != "hvt_strategy":
        raise ValueError(f"not an hvt_strategy document: kind={doc.get('kind')!r}")
    return HvtStrategy(
        density_bins=tuple(doc["density_bins"]),
        a_thresholds=tuple(doc["a_thresholds"]),
        a_signs=tuple(int(s) for s in doc["a_signs"]),
        b_thresholds=tuple(doc["b_thresholds"]),
        b_signs=tuple(int(s) for s in doc["b_signs"]),
        seed=doc.get("seed"),
    )
