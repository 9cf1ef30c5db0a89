import numpy as np
import pytest

from lmpqsc.ensemble import DegreeDistribution

# optimized rate-1/2 ensembles (lambda normalized where the printed
# coefficients do not sum to one)
OPTIMIZED = {
    "lmp1a": ({2: .12, 3: .35, 5: .04, 15: .49}, {9: 1.0}),
    "lmp1b": ({2: .1650, 3: .3145, 5: .0085, 15: .2111, 25: .0265, 35: .0070, 50: .2674},
              {3: .003, 11: .997}),
    "lmp8": ({2: .32, 3: .24, 9: .26, 15: .19}, {5: .02, 7: .82, 9: .16}),
    "lmp32": ({2: .40, 4: .20, 6: .13, 9: .04, 15: .23}, {5: .04, 7: .96}),
    "lmpinf": ({2: .34, 3: .16, 5: .21, 15: .29}, {8: 1.0}),
    "lm2mb": ({2: .2, 4: .3, 6: .05, 12: .45}, {9: 1.0}),
}


def optimized(name: str) -> DegreeDistribution:
    lam, rho = OPTIMIZED[name]
    return DegreeDistribution.from_pairs(lam, rho, normalize=True)


@pytest.fixture
def dd36() -> DegreeDistribution:
    return DegreeDistribution.regular(3, 6)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(12345)


# acceptance verdicts, collected by test_acceptance and echoed in the summary
ACCEPTANCE: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[k])
