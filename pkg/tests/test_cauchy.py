import numpy as np
import pytest
from scipy.integrate import quad, solve_ivp

from levykit import (TorusGrid, grid_function, compute_symbol,
                     sector_and_ellipticity, CauchyProblem, solve_cauchy,
                     solve_backward, regularity_report, stable_like)
from levykit.grids import GridFunction


@pytest.fixture(scope="module")
def diag_setup():
    g = TorusGrid(1, 1.0, 64)
    spec = stable_like(n=1, alpha=1.0)
    p = compute_symbol(spec, g, rel_tol=1e-10)
    rep = sector_and_ellipticity(p, alpha=1.0)
    return g, spec, p, rep


def test_zero_forcing_zero_solution(diag_setup):
    g, spec, p, rep = diag_setup
    prob = CauchyProblem(spec=spec, grid=g, forcing=None, horizon=1.0, dt=1.0 / 32)
    traj = solve_cauchy(prob, p=p, report=rep)
    assert max(traj.sup_series()) == 0.0
    assert traj.times[0] == 0.0 and traj.state(0).sup_norm() == 0.0


def test_duhamel_mode_oracle_first_order(diag_setup):
    g, spec, p, rep = diag_setup
    T = 1.0
    forcing = lambda t: grid_function(g, lambda x: np.sin(t) * np.cos(x))
    B1 = float(p._base[np.where(g.axis_wavenumbers() == 1)[0][0]].real)
    exact = quad(lambda s: np.exp(B1 * (T - s)) * np.sin(s), 0, T, epsabs=1e-14)[0]
    errs = []
    for M in (32, 64, 128):
        prob = CauchyProblem(spec=spec, grid=g, forcing=forcing, horizon=T,
                             dt=T / M, strict_contract=True)
        traj = solve_cauchy(prob, p=p, report=rep, defect_stride=8,
                            keep_states=False)
        errs.append(np.max(np.abs(traj.final.values.real
                                  - exact * np.cos(g.axis_points()))))
        assert max(traj.step_defects) < 1e-9
    order = np.polyfit(np.log([T / M for M in (32, 64, 128)]), np.log(errs), 1)[0]
    assert order == pytest.approx(1.0, abs=0.15)


def test_positivity_under_nonnegative_forcing(diag_setup):
    g, spec, p, rep = diag_setup
    forcing = lambda t: grid_function(g, lambda x: (1 - np.cos(t)) * np.exp(-4 * x ** 2))
    prob = CauchyProblem(spec=spec, grid=g, forcing=forcing, horizon=1.0,
                         dt=1.0 / 64, strict_contract=True)
    traj = solve_cauchy(prob, p=p, report=rep, defect_stride=0)
    assert traj.forcing_nonneg
    assert traj.min_value >= -1e-10 * max(f.sup_norm() for f in traj.states)


def test_linearity_in_forcing(diag_setup):
    g, spec, p, rep = diag_setup
    f1 = lambda t: grid_function(g, lambda x: np.sin(t) * np.cos(x))
    f2 = lambda t: grid_function(g, lambda x: (1 - np.cos(t)) * np.exp(-x ** 2))
    f12 = lambda t: GridFunction(g, 2 * f1(t).values - f2(t).values, "x")
    kw = dict(p=p, report=rep, defect_stride=0, keep_states=False)
    T, dt = 0.5, 0.5 / 32
    u1 = solve_cauchy(CauchyProblem(spec=spec, grid=g, forcing=f1, horizon=T, dt=dt), **kw).final
    u2 = solve_cauchy(CauchyProblem(spec=spec, grid=g, forcing=f2, horizon=T, dt=dt), **kw).final
    u12 = solve_cauchy(CauchyProblem(spec=spec, grid=g, forcing=f12, horizon=T, dt=dt), **kw).final
    assert np.max(np.abs(u12.values - 2 * u1.values + u2.values)) < 1e-10


def test_comparison_monotonicity(diag_setup):
    g, spec, p, rep = diag_setup
    f_lo = lambda t: grid_function(g, lambda x: (1 - np.cos(t)) * np.exp(-x ** 2))
    f_hi = lambda t: grid_function(g, lambda x: (1 - np.cos(t)) * (np.exp(-x ** 2) + 0.2))
    kw = dict(p=p, report=rep, defect_stride=0, keep_states=False)
    T, dt = 0.5, 0.5 / 32
    u_lo = solve_cauchy(CauchyProblem(spec=spec, grid=g, forcing=f_lo, horizon=T, dt=dt), **kw).final
    u_hi = solve_cauchy(CauchyProblem(spec=spec, grid=g, forcing=f_hi, horizon=T, dt=dt), **kw).final
    assert np.all(u_hi.values.real >= u_lo.values.real - 1e-10)


def test_strict_contract_enforced(diag_setup):
    g, spec, p, rep = diag_setup
    forcing = lambda t: grid_function(g, lambda x: (1.0 + t) * np.cos(x))
    with pytest.raises(ValueError, match="f\\(0\\) = 0"):
        CauchyProblem(spec=spec, grid=g, forcing=forcing, horizon=1.0,
                      dt=1.0 / 32, strict_contract=True)


class TestBackward:
    def test_zero_profile(self, diag_setup):
        g, spec, p, rep = diag_setup
        psi = grid_function(g, lambda x: np.cos(2 * x))
        traj = solve_backward(spec, g, lambda t: 0.0, psi, horizon=1.0,
                              dt=1.0 / 32, p=p, report=rep, defect_stride=0)
        assert max(traj.sup_series()) == 0.0

    def test_terminal_slice_exactly_zero(self, diag_setup):
        g, spec, p, rep = diag_setup
        psi = grid_function(g, lambda x: np.cos(2 * x))
        phi = lambda t: np.sin(np.pi * t) ** 2
        traj = solve_backward(spec, g, phi, psi, horizon=1.0, dt=1.0 / 64,
                              p=p, report=rep, defect_stride=0)
        assert traj.final.sup_norm() == 0.0

    def test_mode_oracle(self, diag_setup):
        g, spec, p, rep = diag_setup
        T = 1.0
        psi = grid_function(g, lambda x: np.cos(2 * x))
        phi = lambda t: np.sin(np.pi * t) ** 2
        B2 = float(p._base[np.where(g.axis_wavenumbers() == 2)[0][0]].real)
        traj = solve_backward(spec, g, phi, psi, horizon=T, dt=T / 256,
                              p=p, report=rep, defect_stride=0, tol=1e-10)
        sol = solve_ivp(lambda t, y: phi(t) - B2 * y, (T, 0), [0.0],
                        rtol=1e-11, atol=1e-13)
        v0_exact = sol.y[0, -1]
        i_peak = int(np.argmax(np.cos(2 * g.axis_points())))
        assert traj.state(0).values.real[i_peak] == pytest.approx(v0_exact, abs=5e-4)

    def test_forward_backward_duality(self, diag_setup):
        # self-adjoint (x-independent symmetric) case:
        # -<v(0), g> = int_0^T phi(t) <psi, w(t)> dt for the source-free forward w
        g, spec, p, rep = diag_setup
        T, M = 1.0, 128
        dt = T / M
        psi = grid_function(g, lambda x: np.cos(2 * x))
        phi = lambda t: np.sin(np.pi * t) ** 2
        g0 = grid_function(g, lambda x: np.exp(-2 * x ** 2))
        v = solve_backward(spec, g, phi, psi, horizon=T, dt=dt, p=p,
                           report=rep, defect_stride=0, tol=1e-11)
        prob = CauchyProblem(spec=spec, grid=g, forcing=None, horizon=T, dt=dt, u0=g0)
        w = solve_cauchy(prob, p=p, report=rep, defect_stride=0, tol=1e-11)
        h = g.cell_volume
        lhs = -h * np.sum(v.state(0).values.real * g0.values.real)
        rhs = sum(phi(m * dt) * h * np.sum(psi.values.real * w.state(m).values.real)
                  for m in range(1, M + 1)) * dt
        assert lhs == pytest.approx(rhs, abs=6e-3 * max(abs(lhs), 1.0))


def test_regularity_report(diag_setup):
    g, spec, p, rep = diag_setup
    forcing = lambda t: grid_function(g, lambda x: (1 - np.cos(t)) * np.exp(-x ** 2))
    prob = CauchyProblem(spec=spec, grid=g, forcing=forcing, horizon=0.5, dt=0.5 / 64)
    traj = solve_cauchy(prob, p=p, report=rep, defect_stride=0)
    rr = regularity_report(traj, 0.3, 1.0)
    assert np.isfinite(rr["max_cs_alpha"]) and rr["max_cs_alpha"] > 0
    assert np.isfinite(rr["time_holder_quotient"]) and rr["time_holder_quotient"] > 0
    zero_traj = solve_cauchy(CauchyProblem(spec=spec, grid=g, forcing=None,
                                           horizon=0.5, dt=0.5 / 32), p=p, report=rep)
    rr0 = regularity_report(zero_traj, 0.3, 1.0)
    assert rr0["max_cs_alpha"] == 0.0 and rr0["time_holder_quotient"] == 0.0


def test_rough_forcing_grows_with_shell(diag_setup):
    # forcing at a high dyadic mode inflates the C^{s+alpha} norm as the
    # single-mode scaling predicts
    g, spec, p, rep = diag_setup
    s, alpha = 0.3, 1.0
    maxes = {}
    for j in (1, 4):
        forcing = lambda t, j=j: grid_function(
            g, lambda x: (1 - np.cos(t)) * np.cos(2.0 ** j * x))
        prob = CauchyProblem(spec=spec, grid=g, forcing=forcing, horizon=0.5,
                             dt=0.5 / 64)
        traj = solve_cauchy(prob, p=p, report=rep, defect_stride=0,
                            keep_states=False)
        maxes[j] = regularity_report(traj, s, alpha)["max_cs_alpha"]
    assert maxes[4] > 2.0 * maxes[1]


def test_trajectory_slice_export(tmp_path, diag_setup):
    g, spec, p, rep = diag_setup
    forcing = lambda t: grid_function(g, lambda x: (1 - np.cos(t)) * np.exp(-x ** 2))
    prob = CauchyProblem(spec=spec, grid=g, forcing=forcing, horizon=0.25, dt=0.25 / 8)
    traj = solve_cauchy(prob, p=p, report=rep, defect_stride=0)
    manifest = traj.to_csv(str(tmp_path / "slice"))
    assert len(manifest) == 9
    import os
    assert all(os.path.exists(f) for _, f in manifest)
