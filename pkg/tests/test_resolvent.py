import numpy as np
import pytest

from levykit import (grid_function, solve_resolvent, positivity_of_resolvent,
                     ResolventOperator, DivergenceError, generator_bound_scan)
from levykit.grids import GridFunction
from levykit.probes import probe_basket


@pytest.fixture(scope="module")
def bump(g256l4):
    return grid_function(g256l4, lambda x: np.exp(-x ** 2 / 2))


def test_zero_source(p_holder15, spec_holder15, rep_holder15, g256l4):
    z = GridFunction(g256l4, np.zeros(256), "x")
    u, info = solve_resolvent(p_holder15, spec_holder15, 2 * rep_holder15.R, z,
                              report=rep_holder15)
    assert u.sup_norm() == 0.0 and info.converged


def test_x_independent_single_term(p_sym15, spec_sym15, rep_sym15, bump):
    u, info = solve_resolvent(p_sym15, spec_sym15, 2 * rep_sym15.R, bump,
                              report=rep_sym15, defect_check=True)
    assert info.iterations == 1
    assert info.defect <= 1e-10 * bump.sup_norm()


def test_holder_solve_defect_via_independent_path(p_full15_fixture, spec_full15,
                                                  bump):
    p, rep = p_full15_fixture
    u, info = solve_resolvent(p, spec_full15, 8 * rep.R, bump, tol=1e-9,
                              report=rep, defect_check=True)
    assert info.converged and info.iterations <= 15
    assert info.defect <= 1e-7 * bump.sup_norm()


@pytest.fixture(scope="module")
def p_full15_fixture(spec_full15, g256l4):
    from levykit import compute_symbol, sector_and_ellipticity
    p = compute_symbol(spec_full15, g256l4, rel_tol=1e-9)
    return p, sector_and_ellipticity(p, alpha=1.5)


def test_geometric_residual_decay(p_holder15, spec_holder15, rep_holder15, bump):
    op = ResolventOperator(p_holder15, spec_holder15, 2 * rep_holder15.R,
                           tol=1e-12, report=rep_holder15)
    op.apply(bump)
    r = op.last_info.residuals
    ratios = [b / a for a, b in zip(r, r[1:]) if a > 0]
    assert all(q < 1.0 for q in ratios)
    assert max(ratios) < 0.9


def test_divergence_reported_at_iteration_cap(p_holder15, spec_holder15,
                                              rep_holder15, bump):
    op = ResolventOperator(p_holder15, spec_holder15, 2 * rep_holder15.R,
                           tol=1e-14, report=rep_holder15, max_iter=2)
    with pytest.raises(DivergenceError):
        op.apply(bump)


def test_inadmissible_lambda_rejected(p_holder15, spec_holder15, rep_holder15, bump):
    with pytest.raises(ValueError):
        solve_resolvent(p_holder15, spec_holder15, 0.5 * rep_holder15.R, bump,
                        report=rep_holder15)


class TestPositivity:
    def test_zero_source(self, p_holder15, spec_holder15, rep_holder15, g256l4):
        z = GridFunction(g256l4, np.zeros(256), "x")
        ok, mn = positivity_of_resolvent(p_holder15, spec_holder15,
                                         2 * rep_holder15.R, z, report=rep_holder15)
        assert ok and mn == 0.0

    def test_nonneg_bump(self, p_holder15, spec_holder15, rep_holder15, bump):
        ok, mn = positivity_of_resolvent(p_holder15, spec_holder15,
                                         2 * rep_holder15.R, bump, report=rep_holder15)
        assert ok and mn >= -1e-10 * bump.sup_norm()

    def test_negative_dip_precondition(self, p_holder15, spec_holder15,
                                       rep_holder15, g256l4):
        f = grid_function(g256l4, lambda x: np.exp(-x ** 2) - 0.2 * np.exp(-(x - 2) ** 2))
        with pytest.raises(ValueError):
            positivity_of_resolvent(p_holder15, spec_holder15, 2 * rep_holder15.R,
                                    f, report=rep_holder15)

    def test_complex_lambda_rejected(self, p_holder15, spec_holder15,
                                     rep_holder15, bump):
        with pytest.raises(ValueError):
            positivity_of_resolvent(p_holder15, spec_holder15,
                                    2j * rep_holder15.R, bump, report=rep_holder15)


def test_first_resolvent_identity(p_holder15, spec_holder15, rep_holder15, bump):
    lam, mu = 4 * rep_holder15.R, 8 * rep_holder15.R
    kw = dict(report=rep_holder15, tol=1e-11)
    u1, _ = solve_resolvent(p_holder15, spec_holder15, lam, bump, **kw)
    u2, _ = solve_resolvent(p_holder15, spec_holder15, mu, bump, **kw)
    u12, _ = solve_resolvent(p_holder15, spec_holder15, lam, u2, **kw)
    resid = u1.values - u2.values - (mu - lam) * u12.values
    assert np.max(np.abs(resid)) <= 1e-8 * bump.sup_norm()


def test_sup_surrogate_bounded(p_holder15, spec_holder15, rep_holder15, g256l4):
    # |lam| * ||R(lam) f||_inf / ||f||_inf stays bounded along the scan
    probes = probe_basket(g256l4, s=0.3)[:4]
    lams = rep_holder15.R * np.array([1.0, 4.0, 16.0])
    rep = generator_bound_scan(p_holder15, spec_holder15, lams, probes,
                               alpha_primes=[0.0], s=0.3, report=rep_holder15)
    assert np.max(rep.sup_surrogate) <= 10.0 * np.min(rep.sup_surrogate)
    assert rep.slopes[0.0] == pytest.approx(-1.0, abs=0.15)
