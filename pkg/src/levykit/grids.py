"""Periodic torus grids, discrete Fourier analysis, and Holder-Zygmund norms.

The torus [-l*pi, l*pi)^n with 2^k points per axis carries all field data.
Frequencies live on the lattice (1/l)*Z^n truncated at Nyquist; the dyadic
Littlewood-Paley partition and the C^s norms are built on that lattice.
"""

from dataclasses import dataclass
from functools import lru_cache
from math import comb

import numpy as np


# ---------------------------------------------------------------------------
# smoothstep profile shared by the dyadic bumps and the kernel cutoffs


def smoothstep(t, order=7):
    """Polynomial ramp: 0 for t<=0, 1 for t>=1, C^order at both seams."""
    t = np.asarray(t, dtype=float)
    tc = np.clip(t, 0.0, 1.0)
    k = int(order)
    acc = np.zeros_like(tc)
    for i in range(k + 1):
        acc += comb(k + i, i) * comb(2 * k + 1, k - i) * (-tc) ** i
    return tc ** (k + 1) * acc


def ramp_down(r, r0, r1, order=7):
    """1 for r<=r0, 0 for r>=r1, smooth monotone in between."""
    return 1.0 - smoothstep((np.asarray(r, dtype=float) - r0) / (r1 - r0), order=order)


def shell_profile(s, j, order=7):
    """Dyadic bump phi_j(|xi|) as a lattice-free radial profile.

    phi_0 is supported in |xi| < 2, phi_j in [2^(j-1), 2^(j+1)], and the
    profiles telescope: sum_{j<=J} phi_j = ramp_down(s, 2^J, 2^(J+1)).
    """
    s = np.asarray(s, dtype=float)
    if j == 0:
        return ramp_down(s, 1.0, 2.0, order=order)
    return ramp_down(s / 2.0 ** j, 1.0, 2.0, order=order) - \
        ramp_down(s / 2.0 ** (j - 1), 1.0, 2.0, order=order)


# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TorusGrid:
    """Uniform periodic grid on [-half_period*pi, half_period*pi)^dim.

    points_per_axis must be a power of two >= 16.  The induced frequency
    lattice is (1/half_period)*Z^dim truncated at Nyquist; it is symmetric
    about 0 except for the unpaired Nyquist row, which is kept so that the
    transforms round-trip exactly and is zeroed in odd-order multipliers.
    """

    dim: int
    half_period: float
    points_per_axis: int

    def __post_init__(self):
        if self.dim not in (1, 2):
            raise ValueError(f"dim must be 1 or 2, got {self.dim}")
        n = self.points_per_axis
        if n < 16 or (n & (n - 1)) != 0:
            raise ValueError(f"points_per_axis must be a power of two >= 16, got {n}")
        if not self.half_period > 0:
            raise ValueError("half_period must be positive")

    @property
    def spacing(self):
        return 2.0 * np.pi * self.half_period / self.points_per_axis

    @property
    def cell_volume(self):
        return self.spacing ** self.dim

    @property
    def size(self):
        return self.points_per_axis ** self.dim

    def axis_points(self):
        n = self.points_per_axis
        return -np.pi * self.half_period + self.spacing * np.arange(n)

    def axis_wavenumbers(self):
        """Integer FFT-ordered wavenumbers k; the frequency is k/half_period."""
        n = self.points_per_axis
        k = np.fft.fftfreq(n, d=1.0 / n)
        return k.astype(np.int64)

    def axis_freqs(self):
        return self.axis_wavenumbers() / self.half_period

    def x_mesh(self):
        ax = self.axis_points()
        if self.dim == 1:
            return (ax,)
        return tuple(np.meshgrid(ax, ax, indexing="ij"))

    def xi_mesh(self):
        ax = self.axis_freqs()
        if self.dim == 1:
            return (ax,)
        return tuple(np.meshgrid(ax, ax, indexing="ij"))

    def xi_modulus(self):
        mesh = self.xi_mesh()
        return np.sqrt(sum(m ** 2 for m in mesh))

    def max_freq(self):
        return float(np.max(self.xi_modulus()))

    def _phase_signs(self):
        # e^{-i x_0 xi_k} = (-1)^k per axis for x_0 = -l*pi, xi_k = k/l
        k = self.axis_wavenumbers()
        s = np.where(k % 2 == 0, 1.0, -1.0)
        if self.dim == 1:
            return s
        return np.multiply.outer(s, s)


@dataclass(frozen=True)
class GridFunction:
    """Complex field sampled on a TorusGrid, in physical or frequency space."""

    grid: TorusGrid
    values: np.ndarray
    space: str = "x"

    def __post_init__(self):
        v = np.asarray(self.values, dtype=complex)
        object.__setattr__(self, "values", v)
        expect = (self.grid.points_per_axis,) * self.grid.dim
        if v.shape != expect:
            raise ValueError(f"values shape {v.shape} does not match grid {expect}")
        if self.space not in ("x", "xi"):
            raise ValueError("space must be 'x' or 'xi'")

    def sup_norm(self):
        return float(np.max(np.abs(self.values)))

    def is_real(self, tol=1e-10):
        return float(np.max(np.abs(self.values.imag))) <= tol * max(1.0, self.sup_norm())


def grid_function(grid, fn):
    """Sample a callable f(x) (or f(x1, x2)) on the grid."""
    return GridFunction(grid, np.asarray(fn(*grid.x_mesh()), dtype=complex), "x")


# ---------------------------------------------------------------------------
# transforms, continuum normalization:  F(xi) = int e^{-i x xi} f(x) dx


def to_spectrum(f):
    if f.space != "x":
        raise ValueError("to_spectrum expects a physical-space function")
    g = f.grid
    vals = g.cell_volume * g._phase_signs() * np.fft.fftn(f.values)
    return GridFunction(g, vals, "xi")


def from_spectrum(F):
    if F.space != "xi":
        raise ValueError("from_spectrum expects a frequency-space function")
    g = F.grid
    scale = g.size / ((2.0 * np.pi * g.half_period) ** g.dim)
    vals = scale * np.fft.ifftn(F.values * g._phase_signs())
    return GridFunction(g, vals, "x")


def multiplier_apply(multiplier, f):
    """Apply an x-independent Fourier multiplier m(xi) given on the lattice."""
    out = np.fft.ifftn(np.asarray(multiplier) * np.fft.fftn(f.values))
    return GridFunction(f.grid, out, "x")


def spectral_shift(f, y):
    """Trigonometric interpolation of f(. + y) for an arbitrary shift y."""
    g = f.grid
    y = np.atleast_1d(np.asarray(y, dtype=float))
    mesh = g.xi_mesh()
    phase = np.exp(1j * sum(y[d] * mesh[d] for d in range(g.dim)))
    return multiplier_apply(phase, f)


def spectral_derivative(f, axis=0, order=1):
    """d^order/dx_axis^order by the (i*xi)^order multiplier, Nyquist zeroed for odd orders."""
    g = f.grid
    xi = g.xi_mesh()[axis]
    mult = (1j * xi) ** order
    if order % 2 == 1:
        nyq = g.axis_wavenumbers() == -(g.points_per_axis // 2)
        mask = nyq if g.dim == 1 else (nyq[:, None] if axis == 0 else nyq[None, :])
        mult = np.where(mask, 0.0, mult)
    return multiplier_apply(mult, f)


# ---------------------------------------------------------------------------
# dyadic Littlewood-Paley partition


@dataclass(frozen=True)
class DyadicPartition:
    """Smooth dyadic partition of unity on the frequency lattice.

    bumps[j] is phi_j sampled on the lattice; sum_j phi_j == 1 exactly by
    telescoping, supp phi_0 in {|xi| < 2}, supp phi_j in {2^(j-1) <= |xi| <= 2^(j+1)}.
    """

    grid: TorusGrid
    bumps: np.ndarray

    @property
    def j_max(self):
        return self.bumps.shape[0] - 1

    def shell(self, j):
        return self.bumps[j]


def build_dyadic_partition(grid, order=7):
    ximod = grid.xi_modulus()
    ximax = float(np.max(ximod))
    j_max = int(np.ceil(np.log2(ximax))) + 1 if ximax > 1 else 1
    chi_prev = None
    bumps = []
    for j in range(j_max + 1):
        chi_j = ramp_down(ximod, 2.0 ** j, 2.0 ** (j + 1), order=order)
        if j == 0:
            bumps.append(chi_j)
        else:
            bumps.append(chi_j - chi_prev)
        chi_prev = chi_j
    # telescoping makes the sum equal chi_{j_max}, which is 1 on the lattice
    return DyadicPartition(grid, np.array(bumps))


@lru_cache(maxsize=32)
def _cached_partition(grid):
    return build_dyadic_partition(grid)


def shell_filter(f, partition, j):
    """phi_j(D) f."""
    return multiplier_apply(partition.bumps[j], f)


def holder_zygmund_norm(f, s, partition=None):
    """Discrete C^s norm: max_k 2^{ks} ||phi_k(D) f||_inf on the grid.

    Parameters
    ----------
    f : GridFunction in physical space
    s : positive Holder-Zygmund exponent
    partition : optional DyadicPartition; built (and cached) if omitted
    """
    if s <= 0:
        raise ValueError("s must be positive")
    if f.space != "x":
        raise ValueError("holder_zygmund_norm expects a physical-space function")
    part = partition if partition is not None else _cached_partition(f.grid)
    fhat = np.fft.fftn(f.values)
    best = 0.0
    for j in range(part.j_max + 1):
        filt = np.fft.ifftn(part.bumps[j] * fhat)
        best = max(best, 2.0 ** (j * s) * float(np.max(np.abs(filt))))
    return best


def restricted_holder_norm(f, s, radius):
    """sup + Holder-quotient norm of f restricted to {|x| > radius}.

    Quotients are scanned over dyadic grid separations between point pairs
    that both lie outside the ball.
    """
    g = f.grid
    if radius >= np.pi * g.half_period:
        raise ValueError("radius must be below the torus half-width")
    mesh = g.x_mesh()
    rad = np.sqrt(sum(m ** 2 for m in mesh))
    outside = rad > radius
    if not np.any(outside):
        return 0.0
    vals = f.values
    norm = float(np.max(np.abs(vals[outside])))
    n = g.points_per_axis
    steps = [2 ** j for j in range(int(np.log2(n)) - 1)]
    for axis in range(g.dim):
        for m in steps:
            h = m * g.spacing
            if h > radius:
                break
            shifted = np.roll(vals, -m, axis=axis)
            mask = outside & np.roll(outside, -m, axis=axis)
            # exclude pairs that wrap around the torus edge
            idx = [slice(None)] * g.dim
            idx[axis] = slice(0, n - m)
            keep = np.zeros_like(outside)
            keep[tuple(idx)] = True
            mask &= keep
            if np.any(mask):
                q = float(np.max(np.abs(shifted[mask] - vals[mask]))) / h ** s
                norm = max(norm, q)
    return norm


def tail_decay_check(f, s, radii):
    """Restricted C^s norms outside balls of the given radii, for decay inspection."""
    out = []
    for r in sorted(radii):
        out.append((float(r), restricted_holder_norm(f, s, r)))
    return out


# ---------------------------------------------------------------------------
# CSV serialization (index coordinates + real + imag columns)


def gridfunction_to_csv(f, path):
    g = f.grid
    idx = np.indices((g.points_per_axis,) * g.dim).reshape(g.dim, -1)
    flat = f.values.reshape(-1)
    cols = [idx[d] for d in range(g.dim)]
    header = ",".join([f"i{d}" for d in range(g.dim)] + ["re", "im"])
    with open(path, "w") as fh:
        fh.write(header + "\n")
        for row in range(flat.size):
            coords = ",".join(str(int(c[row])) for c in cols)
            fh.write(f"{coords},{float(flat[row].real)!r},{float(flat[row].imag)!r}\n")


def gridfunction_from_csv(grid, path):
    data = np.genfromtxt(path, delimiter=",", names=True)
    vals = (data["re"] + 1j * data["im"]).reshape((grid.points_per_axis,) * grid.dim)
    return GridFunction(grid, vals, "x")
