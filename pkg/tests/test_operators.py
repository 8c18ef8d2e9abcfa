import numpy as np
import pytest

from levykit import (TorusGrid, grid_function, holder_zygmund_norm,
                     apply_xform, apply_yform, apply_L_direct, LDirectPlan,
                     schwartz_kernel_sum, remainder_operator_apply,
                     multiplier_symbol, resolvent_symbol, compute_symbol,
                     stable_like, ComputationError)
from levykit.grids import GridFunction
from levykit.symbols import SymbolField
from levykit.probes import probe_basket


@pytest.fixture(scope="module")
def bump(g256l4):
    return grid_function(g256l4, lambda x: np.exp(-x ** 2 / 2))


class TestSymbolApplication:
    def test_identity_multiplier(self, g256l4, bump):
        p = multiplier_symbol(g256l4, np.ones(256))
        ux = apply_xform(p, bump)
        uy = apply_yform(p, bump)
        assert np.max(np.abs(ux.values - bump.values)) < 1e-12
        assert np.max(np.abs(uy.values - bump.values)) < 1e-12

    def test_derivative_multiplier(self, g256l4):
        xi = g256l4.xi_mesh()[0]
        p = multiplier_symbol(g256l4, 1j * xi, order=1.0)
        f = grid_function(g256l4, np.sin)
        u = apply_xform(p, f)
        assert np.max(np.abs(u.values - np.cos(g256l4.axis_points()))) < 1e-11

    def test_fullspace_diagnostic_multiplier_on_mode(self, spec_diag_full1):
        # -pi|xi| acting on cos(x) gives -pi cos(x)
        g = TorusGrid(1, 1.0, 64)
        p = compute_symbol(spec_diag_full1, g, rel_tol=1e-9)
        f = grid_function(g, np.cos)
        u = apply_xform(p, f)
        assert np.max(np.abs(u.values + np.pi * np.cos(g.axis_points()))) < 1e-7

    def test_separable_vs_dense_paths(self, p_sym15, g256l4, bump):
        dense = SymbolField(g256l4, 1.5, 0.5, "dense", dense=p_sym15.dense())
        u1 = apply_xform(p_sym15, bump)
        u2 = apply_xform(dense, bump)
        assert np.max(np.abs(u1.values - u2.values)) < 1e-12

    def test_forms_agree_for_x_independent(self, p_sym15, g256l4, bump):
        dense = SymbolField(g256l4, 1.5, 0.5, "dense", dense=p_sym15.dense())
        ux = apply_xform(dense, bump)
        uy = apply_yform(dense, bump)
        assert np.max(np.abs(ux.values - uy.values)) < 1e-11

    def test_adjoint_identity(self, p_holder15, rep_holder15, g256l4, bump):
        # bilinear pairing: <q(D,x) f, g> = <f, q_refl(x,D) g>, q_refl(x,xi) = q(x,-xi)
        lam = 2 * rep_holder15.R
        q = resolvent_symbol(p_holder15, lam, report=rep_holder15)
        g_fun = grid_function(g256l4, lambda x: np.exp(-(x - 1.0) ** 2))
        lhs_field = apply_yform(q, bump)
        dense = q.dense()
        k = g256l4.axis_wavenumbers()
        pos = {int(kk): idx for idx, kk in enumerate(k)}
        refl = np.array([pos.get(-int(kk), i) for i, kk in enumerate(k)])
        q_refl = SymbolField(g256l4, q.order, q.tau, "dense", dense=dense[:, refl])
        rhs_field = apply_xform(q_refl, g_fun)
        h = g256l4.cell_volume
        lhs = h * np.sum(lhs_field.values * g_fun.values)
        rhs = h * np.sum(bump.values * rhs_field.values)
        assert abs(lhs - rhs) < 1e-10 * max(abs(lhs), 1.0)

    def test_linearity(self, p_holder15, g256l4):
        rng = np.random.default_rng(2)
        f1 = GridFunction(g256l4, rng.normal(size=256), "x")
        f2 = GridFunction(g256l4, rng.normal(size=256), "x")
        u12 = apply_xform(p_holder15, GridFunction(g256l4, 2.0 * f1.values - 3.0 * f2.values, "x"))
        u1 = apply_xform(p_holder15, f1)
        u2 = apply_xform(p_holder15, f2)
        assert np.max(np.abs(u12.values - 2 * u1.values + 3 * u2.values)) < 1e-11 * max(
            1.0, np.max(np.abs(u12.values)))

    def test_grid_mismatch_rejected(self, p_sym15):
        other = grid_function(TorusGrid(1, 4.0, 128), lambda x: np.exp(-x ** 2))
        with pytest.raises(ValueError):
            apply_xform(p_sym15, other)


class TestDirectApplication:
    def test_constant_function_annihilated(self, spec_holder15, g256l4):
        plan = LDirectPlan(spec_holder15, g256l4)
        fc = grid_function(g256l4, lambda x: 3.0 + 0.0 * x)
        assert plan.apply(fc).sup_norm() < 1e-13

    def test_two_oracle_agreement_symmetric(self, spec_sym15, p_sym15, g256l4, bump):
        Ld = apply_L_direct(spec_sym15, bump)
        Ls = apply_xform(p_sym15, bump)
        assert np.max(np.abs(Ld.values - Ls.values)) < 1e-6

    def test_two_oracle_agreement_asymmetric(self, spec_asym12, g256l4, bump):
        p = compute_symbol(spec_asym12, g256l4, rel_tol=1e-9)
        Ld = apply_L_direct(spec_asym12, bump)
        Ls = apply_xform(p, bump)
        assert np.max(np.abs(Ld.values - Ls.values)) < 1e-6

    def test_two_oracle_agreement_low_order(self, g256l4, bump):
        spec = stable_like(n=1, alpha=0.7, asym=0.3)
        p = compute_symbol(spec, g256l4, rel_tol=1e-9)
        diff = np.abs(apply_L_direct(spec, bump).values - apply_xform(p, bump).values)
        assert np.max(diff) < 1e-8

    def test_component_split(self, spec_full15, g256l4, bump):
        plan = LDirectPlan(spec_full15, g256l4)
        full = plan.apply(bump).values
        k1 = plan.apply(bump, parts=("k1",)).values
        k2 = plan.apply(bump, parts=("k2",)).values
        assert np.max(np.abs(full - k1 - k2)) < 1e-14

    def test_faraway_positivity(self, spec_holder15, g256l4):
        # only the mass-arrival term survives away from the support of f
        f = grid_function(g256l4, lambda x: np.exp(-((x - 0.0) / 0.2) ** 2))
        Lf = apply_L_direct(spec_holder15, f)
        x = g256l4.axis_points()
        far = (np.abs(x) > 0.8) & (np.abs(x) < 1.8)
        assert np.all(Lf.values.real[far] > 0)

    def test_maximum_principle_at_peak(self, spec_full15, g256l4, bump):
        Lf = apply_L_direct(spec_full15, bump)
        i_star = int(np.argmax(bump.values.real))
        assert Lf.values.real[i_star] <= 1e-10

    def test_2d_two_oracle(self, g64_2d):
        g = TorusGrid(2, 2.0, 32)
        spec = stable_like(n=2, alpha=1.2)
        p = compute_symbol(spec, g, rel_tol=1e-8)
        f = grid_function(g, lambda x, y: np.exp(-(x ** 2 + y ** 2) / 2))
        diff = np.abs(apply_L_direct(spec, f).values - apply_xform(p, f).values)
        assert np.max(diff) < 1e-6


class TestSchwartzKernel:
    def test_summed_kernel_recovers_jump_kernel(self, spec_sym15, g256l4):
        p = compute_symbol(spec_sym15, g256l4, rel_tol=1e-8)
        z = np.geomspace(0.05, 0.5, 12)
        tab = schwartz_kernel_sum(p, z)
        ratio = np.abs(tab.summed[0]) / spec_sym15.k1_profile(z)
        assert np.all(np.abs(ratio - 1.0) < 1e-3)
        assert tab.fitted_slope(0.05, 0.5) == pytest.approx(-2.5, abs=0.1)

    def test_identity_symbol_concentrates_at_origin(self, g256l1):
        p = multiplier_symbol(g256l1, np.ones(256))
        z = np.linspace(1.0, 2.8, 8)
        tab = schwartz_kernel_sum(p, z)
        assert np.max(np.abs(tab.summed)) < 1e-3

    def test_shell_bound_uniformity(self, spec_sym15, g256l4):
        p = compute_symbol(spec_sym15, g256l4, rel_tol=1e-8)
        z = np.geomspace(0.05, 0.5, 12)
        tab = schwartz_kernel_sum(p, z)
        for M in (0, 2):
            peaks = [np.max(tab.shell_bound_ratios(j, 1.5, 1, M))
                     for j in range(2, tab.j_used + 1)]
            # the estimate is an upper bound uniform in j: later shells may
            # decay but must never outgrow the leading ones
            assert max(peaks) <= 2.0 * max(peaks[:3])

    def test_zero_sample_rejected(self, p_sym15):
        with pytest.raises(ValueError):
            schwartz_kernel_sum(p_sym15, np.array([0.0, 0.5]))

    def test_noncauchy_detector(self, g256l1):
        xi = g256l1.xi_mesh()[0]
        # oscillatory first-order symbol: the kernel concentrates at z = +1,
        # where the shell sums cannot settle
        bad = multiplier_symbol(g256l1, np.exp(-1j * xi) * (1 + xi ** 2) ** 0.75)
        with pytest.raises(ComputationError):
            schwartz_kernel_sum(bad, np.array([0.98, 1.0, 1.02]))


class TestRemainder:
    def test_x_independent_collapse(self, p_sym15, spec_sym15, rep_sym15, g256l4, bump):
        lam = 2 * rep_sym15.R
        q = resolvent_symbol(p_sym15, lam, report=rep_sym15)
        rf, _ = remainder_operator_apply(p_sym15, q, lam, bump, spec=spec_sym15)
        assert rf.sup_norm() <= 1e-8 * bump.sup_norm()

    def test_zero_input(self, p_holder15, rep_holder15, g256l4, spec_holder15):
        lam = 2 * rep_holder15.R
        q = resolvent_symbol(p_holder15, lam, report=rep_holder15)
        z = GridFunction(g256l4, np.zeros(256), "x")
        rf, _ = remainder_operator_apply(p_holder15, q, lam, z, spec=spec_holder15)
        assert rf.sup_norm() == 0.0

    def test_norm_decays_with_lambda(self, p_holder15, rep_holder15, spec_holder15, g256l4, bump):
        vals = {}
        for fac in (1, 4):
            lam = fac * rep_holder15.R
            q = resolvent_symbol(p_holder15, lam, report=rep_holder15)
            rf, _ = remainder_operator_apply(p_holder15, q, lam, bump, spec=spec_holder15)
            vals[fac] = holder_zygmund_norm(rf, 0.3)
        assert vals[4] < vals[1]


def test_mapping_norm_surrogate_stable_under_refinement(spec_holder15):
    # ||p(x,D) f||_{C^s} / ||f||_{C^{s+alpha}} bounded uniformly in the grid
    s, alpha = 0.3, 1.5
    sups = {}
    for n_pts in (128, 256):
        g = TorusGrid(1, 4.0, n_pts)
        p = compute_symbol(spec_holder15, g, rel_tol=1e-8)
        worst = 0.0
        for f in probe_basket(g, s=s + alpha):
            u = apply_xform(p, f)
            worst = max(worst, holder_zygmund_norm(u, s))
        sups[n_pts] = worst       # probes are C^{s+alpha}-normalized
    assert sups[256] <= 1.25 * sups[128]
