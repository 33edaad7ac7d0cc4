import numpy as np
import pytest

from semiflow import TrigPolynomial


@pytest.fixture(scope="session")
def f_const():
    """f = 1, ell = 2: every branch slope is zero."""
    return TrigPolynomial(1.0, (), 2)


@pytest.fixture(scope="session")
def f_const3():
    """f = 1.3, ell = 3."""
    return TrigPolynomial(1.3, (), 3)


@pytest.fixture(scope="session")
def f_sin():
    """f = 1 + 0.2 sin(2 pi x): the weakly mixing workhorse."""
    return TrigPolynomial(1.0, ((1, 0.0, 0.2),), 2)


@pytest.fixture(scope="session")
def f_cob():
    """Coboundary ceiling: f = 1 + 0.05 (sin 4 pi x - sin 2 pi x), i.e.
    f = Psi o tau - Psi + 1 with Psi = 0.05 sin(2 pi x)."""
    return TrigPolynomial(1.0, ((1, 0.0, -0.05), (2, 0.0, 0.05)), 2)


@pytest.fixture(scope="session")
def f_cob2():
    """Second coboundary: Psi = 0.04 sin(4 pi x), so
    f = 1 + 0.04 (sin 8 pi x - sin 4 pi x)."""
    return TrigPolynomial(1.0, ((2, 0.0, -0.04), (4, 0.0, 0.04)), 2)


@pytest.fixture(scope="session")
def f_generic():
    """Two-harmonic generic ceiling."""
    return TrigPolynomial(1.0, ((1, 0.0, 0.3), (2, 0.1, 0.0)), 2)


def random_positive_ceiling(rng) -> TrigPolynomial:
    """A random strictly positive trig polynomial (sum of harmonic
    amplitudes kept below half the mean)."""
    ell = int(rng.choice([2, 3]))
    mean = float(rng.uniform(0.9, 1.4))
    n_harm = int(rng.integers(1, 3))
    ks = rng.choice(np.arange(1, 5), size=n_harm, replace=False)
    budget = 0.4 * mean
    harmonics = []
    for k in sorted(int(k) for k in ks):
        c = float(rng.uniform(-1, 1))
        s = float(rng.uniform(-1, 1))
        scale = budget / (n_harm * (abs(c) + abs(s) + 1e-9))
        harmonics.append((k, c * scale, s * scale))
    return TrigPolynomial(mean, tuple(harmonics), ell)
