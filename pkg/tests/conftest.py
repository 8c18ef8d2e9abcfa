"""Shared fixtures: grids, kernel specs, and symbols reused across the suite."""

import pytest

from levykit import (TorusGrid, stable_like, fullspace_diagnostic,
                     constant_coefficient, holder_coefficient, compute_symbol,
                     sector_and_ellipticity)


@pytest.fixture(scope="session")
def g256l4():
    return TorusGrid(1, 4.0, 256)


@pytest.fixture(scope="session")
def g256l1():
    return TorusGrid(1, 1.0, 256)


@pytest.fixture(scope="session")
def g64_2d():
    return TorusGrid(2, 1.0, 64)


@pytest.fixture(scope="session")
def spec_sym15():
    """x-independent symmetric stable-like kernel, order 1.5."""
    return stable_like(n=1, alpha=1.5)


@pytest.fixture(scope="session")
def spec_holder15():
    """Holder-coefficient kernel, order 1.5, tau = 0.6, no lower-order part."""
    return stable_like(n=1, alpha=1.5, coeff=holder_coefficient(0.6, seed=7), tau=0.6)


@pytest.fixture(scope="session")
def spec_full15():
    """Holder kernel with an exponential-tail lower-order part."""
    return stable_like(n=1, alpha=1.5, coeff=holder_coefficient(0.6, seed=7), tau=0.6,
                       alpha_prime=0.5, coeff2=constant_coefficient(0.05))


@pytest.fixture(scope="session")
def spec_asym12():
    return stable_like(n=1, alpha=1.2, asym=0.4, tau=0.5)


@pytest.fixture(scope="session")
def spec_capstone():
    """Symmetric Holder kernel of order 1.2 used by the Monte Carlo cross-checks."""
    return stable_like(n=1, alpha=1.2, coeff=holder_coefficient(0.6, seed=7), tau=0.6)


@pytest.fixture(scope="session")
def spec_diag_full1():
    return fullspace_diagnostic(n=1, alpha=1.0)


@pytest.fixture(scope="session")
def p_sym15(spec_sym15, g256l4):
    return compute_symbol(spec_sym15, g256l4, rel_tol=1e-9)


@pytest.fixture(scope="session")
def p_holder15(spec_holder15, g256l4):
    return compute_symbol(spec_holder15, g256l4, rel_tol=1e-9)


@pytest.fixture(scope="session")
def rep_holder15(p_holder15):
    return sector_and_ellipticity(p_holder15, alpha=1.5)


@pytest.fixture(scope="session")
def rep_sym15(p_sym15):
    return sector_and_ellipticity(p_sym15, alpha=1.5)
