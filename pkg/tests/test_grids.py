import numpy as np
import pytest

from levykit import (TorusGrid, grid_function, to_spectrum, from_spectrum,
                     build_dyadic_partition, holder_zygmund_norm, tail_decay_check)
from levykit.grids import spectral_derivative, spectral_shift, smoothstep, GridFunction


@pytest.mark.parametrize("n_pts", [16, 64, 256])
def test_transform_roundtrip(n_pts):
    g = TorusGrid(1, 2.0, n_pts)
    rng = np.random.default_rng(0)
    f = GridFunction(g, rng.normal(size=n_pts) + 1j * rng.normal(size=n_pts), "x")
    back = from_spectrum(to_spectrum(f))
    assert np.max(np.abs(back.values - f.values)) < 1e-12 * np.max(np.abs(f.values))


def test_transform_roundtrip_2d(g64_2d):
    rng = np.random.default_rng(1)
    f = GridFunction(g64_2d, rng.normal(size=(64, 64)), "x")
    back = from_spectrum(to_spectrum(f))
    assert np.max(np.abs(back.values - f.values)) < 1e-12


def test_real_function_has_conjugate_symmetric_spectrum():
    g = TorusGrid(1, 1.0, 64)
    F = to_spectrum(grid_function(g, lambda x: np.exp(-x ** 2) + np.sin(x)))
    k = g.axis_wavenumbers()
    for kk in (1, 5, 17):
        i, j = np.where(k == kk)[0][0], np.where(k == -kk)[0][0]
        assert abs(F.values[j] - np.conj(F.values[i])) < 1e-12


def test_grid_validation():
    with pytest.raises(ValueError):
        TorusGrid(1, 1.0, 100)      # not a power of two
    with pytest.raises(ValueError):
        TorusGrid(1, 1.0, 8)        # too small
    with pytest.raises(ValueError):
        TorusGrid(3, 1.0, 64)


def test_partition_of_unity_and_supports(g256l1):
    part = build_dyadic_partition(g256l1)
    assert part.j_max == 8
    total = part.bumps.sum(axis=0)
    assert np.max(np.abs(total - 1.0)) <= 1e-12
    assert np.all(part.bumps >= 0) and np.all(part.bumps <= 1)
    xi = np.abs(g256l1.axis_freqs())
    assert np.all(part.bumps[0][xi >= 2] == 0)
    for j in (1, 2, 3):
        outside = (xi < 2.0 ** (j - 1)) | (xi > 2.0 ** (j + 1))
        assert np.all(part.bumps[j][outside] == 0)


def test_partition_boundary_value_and_shell_split(g256l1):
    part = build_dyadic_partition(g256l1)
    xi = g256l1.axis_freqs()
    i4 = np.where(xi == 4)[0][0]
    assert part.bumps[1][i4] == 0.0          # phi_1 vanishes at |xi| = 4
    i3 = np.where(xi == 3)[0][0]
    # |xi| = 3 is split between shells 1 and 2 only, by the smoothstep profile
    assert part.bumps[0][i3] == 0.0
    expected_phi2 = smoothstep(0.5)          # chi_1 drops by S(1/2) at 3/2 of its ramp
    assert abs(part.bumps[2][i3] - expected_phi2) < 1e-12
    assert abs(part.bumps[1][i3] + part.bumps[2][i3] - 1.0) < 1e-12


def test_norm_zero_function(g256l1):
    z = grid_function(g256l1, lambda x: 0.0 * x)
    assert holder_zygmund_norm(z, 0.7) == 0.0


@pytest.mark.parametrize("j", [2, 3, 4])
def test_norm_single_mode_lands_in_its_shell(g256l1, j):
    f = grid_function(g256l1, lambda x: np.cos(2.0 ** j * x))
    nrm = holder_zygmund_norm(f, 1.0)
    assert 2.0 ** j <= nrm <= 2.0 ** (j + 1)


def test_norm_two_modes_against_bruteforce_filter(g256l1):
    s = 1.0
    f = grid_function(g256l1, lambda x: np.cos(x) + np.cos(8.0 * x))
    part = build_dyadic_partition(g256l1)
    fhat = np.fft.fft(f.values)
    expected = 0.0
    for k in range(part.j_max + 1):
        filt = np.fft.ifft(part.bumps[k] * fhat)
        expected = max(expected, 2.0 ** (k * s) * np.max(np.abs(filt)))
    assert np.isclose(holder_zygmund_norm(f, s, part), expected, rtol=1e-12)
    # mode 8 sits in shell 3, so the norm is near 2^3
    assert 8.0 <= expected <= 16.0


def test_norm_monotone_in_s(g256l1):
    rng = np.random.default_rng(3)
    vals = rng.normal(size=256)
    f = GridFunction(g256l1, vals, "x")
    norms = [holder_zygmund_norm(f, s) for s in (0.2, 0.5, 0.9, 1.4)]
    assert all(a <= b * (1 + 1e-12) for a, b in zip(norms, norms[1:]))


def test_norm_scaling_law(g256l1):
    s = 0.6
    vals = []
    for j in range(1, 7):
        f = grid_function(g256l1, lambda x, j=j: 2.0 ** (-j * s) * np.cos(2.0 ** j * x))
        vals.append(holder_zygmund_norm(f, s))
    assert max(vals) <= 2.0 * min(vals)      # j-independent up to the shell overlap


def test_norm_rejects_bad_input(g256l1):
    f = grid_function(g256l1, lambda x: np.exp(-x ** 2))
    with pytest.raises(ValueError):
        holder_zygmund_norm(f, -1.0)
    with pytest.raises(ValueError):
        holder_zygmund_norm(to_spectrum(f), 0.5)


def test_spectral_derivative_and_shift():
    g = TorusGrid(1, 2.0, 256)
    d = spectral_derivative(grid_function(g, np.sin))
    assert np.max(np.abs(d.values - np.cos(g.axis_points()))) < 1e-12
    f = grid_function(g, lambda x: np.exp(-x ** 2))
    sh = spectral_shift(f, 0.37)
    assert np.max(np.abs(sh.values - np.exp(-(g.axis_points() + 0.37) ** 2))) < 1e-10


class TestTailDecay:
    def test_compact_bump_vanishes_beyond_support(self, g256l4):
        f = grid_function(g256l4, lambda x: np.where(np.abs(x) < 1.5,
                                                     np.exp(-1.0 / np.maximum(1e-12, 1 - (x / 1.5) ** 2)), 0.0))
        vals = tail_decay_check(f, 0.5, [2.0, 4.0])
        assert vals[0][1] == 0.0 and vals[1][1] == 0.0

    def test_gaussian_decreasing(self, g256l4):
        f = grid_function(g256l4, lambda x: np.exp(-x ** 2))
        vals = [v for _, v in tail_decay_check(f, 0.5, [2.0, 4.0, 6.0])]
        assert vals[0] > vals[1] > vals[2]

    def test_constant_has_zero_seminorm(self, g256l4):
        f = grid_function(g256l4, lambda x: 1.0 + 0.0 * x)
        vals = tail_decay_check(f, 0.5, [3.0])
        assert np.isclose(vals[0][1], 1.0)   # sup part only

    def test_radius_beyond_torus_rejected(self, g256l4):
        f = grid_function(g256l4, lambda x: np.exp(-x ** 2))
        with pytest.raises(ValueError):
            tail_decay_check(f, 0.5, [100.0])


def test_filter_idempotence_on_pure_mode(g256l1):
    # a single lattice mode is reproduced exactly by its (at most two) shells
    from levykit.grids import shell_filter
    part = build_dyadic_partition(g256l1)
    f = grid_function(g256l1, lambda x: np.cos(3.0 * x))
    covered = [j for j in range(part.j_max + 1)
               if part.bumps[j][np.abs(g256l1.axis_freqs()) == 3].max() > 0]
    assert len(covered) <= 2
    total = sum(shell_filter(f, part, j).values for j in covered)
    assert np.max(np.abs(total - f.values)) < 1e-12


def test_gridfunction_csv_roundtrip(tmp_path, g256l1):
    from levykit.grids import gridfunction_to_csv, gridfunction_from_csv
    f = grid_function(g256l1, lambda x: np.exp(-x ** 2) + 1j * np.sin(x))
    path = str(tmp_path / "f.csv")
    gridfunction_to_csv(f, path)
    back = gridfunction_from_csv(g256l1, path)
    assert np.array_equal(back.values, f.values)
