"""Shared fixtures: the pinned 16-row count table and values frozen from it.

The table constants here are an independent transcription; a test compares
them against fixtures/table1.csv so a typo in either copy is caught.  The
FROZEN_* values were computed once by a standalone oracle script (plain
arithmetic on the table, finite differences for the sigma) and are asserted
against the package at tight tolerances.
"""

from pathlib import Path

import pytest

REPO_ROOT = Path(__file__).resolve().parent.parent
TABLE1_PATH = REPO_ROOT / "fixtures" / "table1.csv"
TABLE1_SHA256 = "01ff1e351d940d9a361aea126d0ebdc3766d164f125519180561f8286120285a"

# (alpha, beta, duration_s, n_a, n_b, n_coinc), row order of the fixture file
TABLE1_ROWS = [
    (-45.0, -22.5, 15.0, 84525, 80356, 842),
    (-45.0, 22.5, 15.0, 84607, 82853, 212),
    (-45.0, 67.5, 15.0, 83874, 82179, 302),
    (-45.0, 112.5, 15.0, 83769, 77720, 836),
    (0.0, -22.5, 15.0, 87015, 80948, 891),
    (0.0, 22.5, 15.0, 86674, 83187, 869),
    (0.0, 67.5, 15.0, 87086, 81846, 173),
    (0.0, 112.5, 15.0, 86745, 77700, 261),
    (45.0, -22.5, 15.0, 87782, 80385, 255),
    (45.0, 22.5, 15.0, 87932, 83265, 830),
    (45.0, 67.5, 15.0, 87794, 81824, 814),
    (45.0, 112.5, 15.0, 88023, 77862, 221),
    (90.0, -22.5, 15.0, 88416, 80941, 170),
    (90.0, 22.5, 15.0, 88285, 82924, 259),
    (90.0, 67.5, 15.0, 88383, 81435, 969),
    (90.0, 112.5, 15.0, 88226, 77805, 846),
]

# Frozen oracle values for the full table at the canonical angles
FROZEN_E = (0.4966109353818346, -0.5874225821819914,
            0.6886064457557876, 0.5346756152125279)  # E(a,b), E(a,b'), E(a',b), E(a',b')
FROZEN_S = 2.3073155785321418
FROZEN_SIGMA_S = 0.03479449335759755
FROZEN_SIGNIFICANCE = 8.83230502521566

# Frozen diagnostics for the four tuning counts (293, 307, 22, 286)
FROZEN_THETA_L = 45.72142598947431
FROZEN_COS_PHI_M = 0.8995657944263856
FROZEN_PHI_M = 25.898948581802358


@pytest.fixture(scope="session")
def table1_path() -> Path:
    assert TABLE1_PATH.is_file(), f"missing fixture {TABLE1_PATH}"
    return TABLE1_PATH


@pytest.fixture(scope="session")
def table1_rows():
    return list(TABLE1_ROWS)
