"""Jump-process simulation by envelope thinning and its statistical verification.

The simulator draws proposals from a closed-form dominating envelope (power
head, optional lower-order power head, exponential tail), accepts with the
exact kernel ratio, and integrates the compensator drift between jumps when
the order demands it.  Path generation is compiled; every path's randomness
is a fixed-draw-count stream seeded from a documented splitmix ladder, so
ensembles are bit-reproducible path by path.
"""

from dataclasses import dataclass
from math import comb

import numpy as np
from numba import njit
from scipy.integrate import quad


# ---------------------------------------------------------------------------
# seed ladder: splitmix64 of (master, path index), folded to 32 bits


def seed_ladder(master, n_paths):
    idx = np.arange(1, n_paths + 1, dtype=np.uint64)
    z = np.uint64(master & 0xFFFFFFFFFFFFFFFF) + np.uint64(0x9E3779B97F4A7C15) * idx
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    z = z ^ (z >> np.uint64(31))
    return (z & np.uint64(0x7FFFFFFF)).astype(np.int64)


_W_COEFS = np.array([comb(7 + i, i) * comb(15, 7 - i) * (-1.0) ** i for i in range(8)])


@njit(cache=True, inline="always")
def _cutoff_w(r, wc):
    t = r - 1.0
    if t <= 0.0:
        return 1.0
    if t >= 1.0:
        return 0.0
    acc = 0.0
    tp = 1.0
    for i in range(8):
        acc += wc[i] * tp
        tp *= t
    return 1.0 - t ** 8 * acc


@njit(cache=True, inline="always")
def _coef_1d(x, base, amps, freqs, phases):
    v = base
    for i in range(amps.size):
        v += amps[i] * np.cos(freqs[i] * x + phases[i])
    return v


# ---------------------------------------------------------------------------
# scheme: envelope decomposition and drift constants


@dataclass
class SimScheme:
    """Thinning scheme: cutoff eps, envelope decomposition, drift substepping.

    masses and inverse-CDF parameters describe the mixture envelope; the
    compensator drift is active exactly when the kernel order demands it.
    """

    eps: float
    dt_drift: float = 1e-3
    max_jumps: int = 2_000_000
    compensated: bool = None
    # filled by build_scheme
    masses: np.ndarray = None
    A1: float = None
    A2: float = None
    total_rate: float = None
    drift_scale: float = None     # b(x) = -coeff1(x) * drift_scale
    certified: bool = False

    def __post_init__(self):
        if not 0.0 < self.eps < 1.0:
            raise ValueError("eps must lie in (0, 1)")


def build_scheme(spec, eps, dt_drift=1e-3, max_jumps=2_000_000, n_cert=64):
    """Construct and certify the dominating-envelope scheme for a kernel."""
    if spec.coeff1.kind != "trig" or (spec.has_k2 and spec.coeff2.kind != "trig"):
        raise ValueError("simulation requires trigonometric coefficient families")
    if not spec.cutoff:
        raise ValueError("full-space diagnostic kernels have no integrable envelope")
    sch = SimScheme(eps=eps, dt_drift=dt_drift, max_jumps=max_jumps)
    sch.compensated = spec.compensated
    n, al, alp = spec.n, spec.alpha, spec.alpha_prime
    surf = 2.0 if n == 1 else 2.0 * np.pi
    A1 = spec.coeff1.sup_bound() * (1.0 + abs(spec.asym))
    A2 = spec.coeff2.sup_bound() if spec.has_k2 else 0.0
    m1 = surf * A1 * (eps ** -al - 2.0 ** -al) / al
    if spec.has_k2:
        if alp > 0:
            m2 = surf * A2 * (eps ** -alp - 2.0 ** -alp) / alp
        else:
            m2 = surf * A2 * np.log(2.0 / eps)
        m3 = surf * A2 * 2.0 ** (-1.0 - alp) * np.exp(-2.0)
    else:
        m2 = m3 = 0.0
    sch.masses = np.array([m1, m2, m3])
    sch.A1, sch.A2 = A1, A2
    sch.total_rate = float(m1 + m2 + m3)

    if spec.compensated and spec.asym != 0.0:
        # b(x) = -a(x) * asym * 2 * int_eps^2 r k1_profile(r) dr  (1-D only)
        j1 = quad(lambda r: r * spec.k1_profile(r), eps, 2.0,
                  points=[1.0, 1.5], limit=200)[0]
        sch.drift_scale = spec.asym * 2.0 * j1
    else:
        sch.drift_scale = 0.0

    # certification scan: envelope must dominate the kernel on samples
    xs = np.linspace(-np.pi, np.pi, n_cert)
    mesh = [xs] + [np.zeros_like(xs)] * (n - 1)
    a1_vals = spec.coeff1(*mesh) * (1.0 + abs(spec.asym))
    a2_vals = spec.coeff2(*mesh) if spec.has_k2 else np.zeros_like(xs)
    worst = 0.0
    for r in np.geomspace(eps * 1.0001, 30.0, 256):
        env = 0.0
        if eps < r <= 2.0:
            env += A1 * r ** (-n - al)
            env += A2 * r ** (-n - alp)
        if r > 2.0:
            env += A2 * 2.0 ** (-1.0 - alp) * np.exp(-r) * r ** (1.0 - n)
        if env == 0.0:
            continue
        kv = a1_vals * float(spec.k1_profile(r))
        if spec.has_k2:
            kv = kv + a2_vals * float(spec.k2_profile(r))
        worst = max(worst, float(np.max(kv)) / env)
    if worst > 1.0 + 1e-9:
        raise ValueError(f"envelope fails to dominate the kernel (ratio {worst:.6f})")
    sch.certified = True
    return sch


# ---------------------------------------------------------------------------
# compiled path engine (1-D; the 2-D variant records checkpoint states only)


@njit(cache=True)
def _engine_1d(seeds, x0s, T, eps, alpha, alpha_prime, has_k2, compensated,
               asym, masses, A1, A2, total_rate,
               b1, amps1, freqs1, phases1, b2, amps2, freqs2, phases2,
               wc, drift_scale, dt_drift, cps, use_tables,
               tab_x0, tab_dx, phi_tab, lphi_tab, max_jumps,
               store_cap, store_times, store_sizes,
               X_cp, I_cp, phi0_out, XT, n_jumps, n_props, n_acc,
               sum_a_prop, excluded, ratio_max):
    n_paths = seeds.size
    m_cp = cps.size
    c_pow1 = eps ** (-alpha) - 2.0 ** (-alpha)
    if alpha_prime > 0.0:
        c_pow2 = eps ** (-alpha_prime) - 2.0 ** (-alpha_prime)
    else:
        c_pow2 = np.log(2.0 / eps)
    for ip in range(n_paths):
        np.random.seed(seeds[ip])
        x = x0s[ip]
        t = 0.0
        t_mark = 0.0
        acc_I = 0.0
        ci = 0
        jumps = 0
        props = 0
        acc = 0
        sum_a = 0.0
        bad = False
        if use_tables:
            ix = (x - tab_x0) / tab_dx
            if 0.0 <= ix < phi_tab.size - 1.0:
                i0 = int(ix)
                fr = ix - i0
                phi0_out[ip] = phi_tab[i0] * (1.0 - fr) + phi_tab[i0 + 1] * fr
            else:
                phi0_out[ip] = 0.0
        while True:
            u1 = np.random.random()
            u2 = np.random.random()
            u3 = np.random.random()
            u4 = np.random.random()
            u5 = np.random.random()
            dt = -np.log(1.0 - u1) / total_rate
            t_next = t + dt
            seg_end = t_next if t_next < T else T
            # advance state through [t, seg_end] (drift + observable integral)
            while t < seg_end:
                if drift_scale != 0.0:
                    h = dt_drift if t + dt_drift < seg_end else seg_end - t
                else:
                    h = seg_end - t
                lphi_x = 0.0
                if use_tables:
                    ix = (x - tab_x0) / tab_dx
                    if 0.0 <= ix < lphi_tab.size - 1.0:
                        i0 = int(ix)
                        fr = ix - i0
                        lphi_x = lphi_tab[i0] * (1.0 - fr) + lphi_tab[i0 + 1] * fr
                t_seg_end = t + h
                while ci < m_cp and cps[ci] <= t_seg_end + 1e-15:
                    acc_I += lphi_x * (cps[ci] - t_mark)
                    t_mark = cps[ci]
                    X_cp[ip, ci] = x
                    I_cp[ip, ci] = acc_I
                    ci += 1
                acc_I += lphi_x * (t_seg_end - t_mark)
                t_mark = t_seg_end
                if drift_scale != 0.0:
                    a1x = _coef_1d(x, b1, amps1, freqs1, phases1)
                    x = x - a1x * drift_scale * h
                t = t_seg_end
            if t_next >= T:
                break
            # propose a displacement from the envelope mixture
            props += 1
            sel = u2 * total_rate
            if sel < masses[0]:
                r = (eps ** (-alpha) - u3 * c_pow1) ** (-1.0 / alpha)
                env = A1 * r ** (-1.0 - alpha)
            elif sel < masses[0] + masses[1]:
                if alpha_prime > 0.0:
                    r = (eps ** (-alpha_prime) - u3 * c_pow2) ** (-1.0 / alpha_prime)
                else:
                    r = eps * (2.0 / eps) ** u3
                env = A2 * r ** (-1.0 - alpha_prime)
            else:
                r = 2.0 - np.log(1.0 - u3)
                env = A2 * 2.0 ** (-1.0 - alpha_prime) * np.exp(-r)
            # total envelope density at radius r (components overlap on (eps, 2])
            env_tot = 0.0
            if r <= 2.0:
                env_tot += A1 * r ** (-1.0 - alpha)
                if has_k2:
                    env_tot += A2 * r ** (-1.0 - alpha_prime)
            if r > 2.0 and has_k2:
                env_tot += A2 * 2.0 ** (-1.0 - alpha_prime) * np.exp(-r)
            sgn = 1.0 if u4 < 0.5 else -1.0
            y = sgn * r
            a1x = _coef_1d(x, b1, amps1, freqs1, phases1)
            sum_a += a1x
            kval = a1x * (1.0 + asym * sgn) * _cutoff_w(r, wc) * r ** (-1.0 - alpha)
            if has_k2:
                kval += _coef_1d(x, b2, amps2, freqs2, phases2) \
                    * r ** (-1.0 - alpha_prime) * np.exp(-r)
            ratio = kval / env_tot
            if ratio > ratio_max[0]:
                ratio_max[0] = ratio
            if u5 <= ratio:
                x = x + y
                jumps += 1
                if jumps <= store_cap:
                    store_times[ip, jumps - 1] = t_next
                    store_sizes[ip, jumps - 1] = y
                if jumps >= max_jumps:
                    excluded[ip] = True
                    break
        XT[ip] = x
        n_jumps[ip] = jumps
        n_props[ip] = props
        n_acc[ip] = jumps
        sum_a_prop[ip] = sum_a


@njit(cache=True)
def _engine_2d(seeds, x0s, T, eps, alpha, alpha_prime, has_k2,
               masses, A1, A2, total_rate,
               b1, amps1, freqs1x, freqs1y, phases1,
               b2, amps2, freqs2x, freqs2y, phases2,
               wc, cps, max_jumps, X_cp, Y_cp, XT, YT,
               n_jumps, n_props, excluded, ratio_max):
    n_paths = seeds.size
    m_cp = cps.size
    c_pow1 = eps ** (-alpha) - 2.0 ** (-alpha)
    if alpha_prime > 0.0:
        c_pow2 = eps ** (-alpha_prime) - 2.0 ** (-alpha_prime)
    else:
        c_pow2 = np.log(2.0 / eps)
    for ip in range(n_paths):
        np.random.seed(seeds[ip])
        x = x0s[ip, 0]
        y2 = x0s[ip, 1]
        t = 0.0
        ci = 0
        jumps = 0
        props = 0
        while True:
            u1 = np.random.random()
            u2 = np.random.random()
            u3 = np.random.random()
            u4 = np.random.random()
            u5 = np.random.random()
            dt = -np.log(1.0 - u1) / total_rate
            t_next = t + dt
            seg_end = t_next if t_next < T else T
            while ci < m_cp and cps[ci] <= seg_end + 1e-15:
                X_cp[ip, ci] = x
                Y_cp[ip, ci] = y2
                ci += 1
            t = seg_end
            if t_next >= T:
                break
            props += 1
            sel = u2 * total_rate
            if sel < masses[0]:
                r = (eps ** (-alpha) - u3 * c_pow1) ** (-1.0 / alpha)
            elif sel < masses[0] + masses[1]:
                if alpha_prime > 0.0:
                    r = (eps ** (-alpha_prime) - u3 * c_pow2) ** (-1.0 / alpha_prime)
                else:
                    r = eps * (2.0 / eps) ** u3
            else:
                r = 2.0 - np.log(1.0 - u3)
            env_tot = 0.0
            if r <= 2.0:
                env_tot += A1 * r ** (-2.0 - alpha)
                if has_k2:
                    env_tot += A2 * r ** (-2.0 - alpha_prime)
            if r > 2.0 and has_k2:
                env_tot += A2 * 2.0 ** (-1.0 - alpha_prime) * np.exp(-r) / r
            theta = 2.0 * np.pi * u4
            a1x = b1
            for i in range(amps1.size):
                a1x += amps1[i] * np.cos(freqs1x[i] * x + freqs1y[i] * y2 + phases1[i])
            kval = a1x * _cutoff_w(r, wc) * r ** (-2.0 - alpha)
            if has_k2:
                a2x = b2
                for i in range(amps2.size):
                    a2x += amps2[i] * np.cos(freqs2x[i] * x + freqs2y[i] * y2 + phases2[i])
                kval += a2x * r ** (-2.0 - alpha_prime) * np.exp(-r)
            ratio = kval / env_tot
            if ratio > ratio_max[0]:
                ratio_max[0] = ratio
            if u5 <= ratio:
                x += r * np.cos(theta)
                y2 += r * np.sin(theta)
                jumps += 1
                if jumps >= max_jumps:
                    excluded[ip] = True
                    break
        XT[ip] = x
        YT[ip] = y2
        n_jumps[ip] = jumps
        n_props[ip] = props


# ---------------------------------------------------------------------------


@dataclass
class PathEnsemble:
    """Simulated ensemble: checkpoint states, observable integrals, jump stats."""

    spec: object
    scheme: SimScheme
    horizon: float
    seed: int
    checkpoints: np.ndarray
    states: np.ndarray           # (n_paths, n_cp) or (n_paths, n_cp, 2)
    terminal: np.ndarray
    integrals: np.ndarray = None  # int_0^cp Lphi(X_s) ds when tables were attached
    phi_at_start: np.ndarray = None
    n_jumps: np.ndarray = None
    n_proposals: np.ndarray = None
    sum_coeff_at_proposals: np.ndarray = None
    excluded: np.ndarray = None
    max_accept_ratio: float = 0.0
    starts: np.ndarray = None
    jump_times: np.ndarray = None
    jump_sizes: np.ndarray = None

    @property
    def n_paths(self):
        return self.states.shape[0]

    @property
    def delivered(self):
        return int(np.sum(~self.excluded))

    def checkpoint_index(self, t):
        i = int(np.argmin(np.abs(self.checkpoints - t)))
        if abs(self.checkpoints[i] - t) > 1e-12:
            raise KeyError(f"time {t} is not a recorded checkpoint")
        return i

    def summary_to_csv(self, path):
        with open(path, "w") as fh:
            fh.write("path,n_jumps,n_proposals,terminal,excluded\n")
            term = np.atleast_2d(self.terminal.T).T
            for i in range(self.n_paths):
                tv = ";".join(repr(float(v)) for v in np.atleast_1d(term[i]))
                fh.write(f"{i},{self.n_jumps[i]},{self.n_proposals[i]},{tv},{int(self.excluded[i])}\n")

    def jumps_to_text(self, path):
        """Opt-in raw-path export: one line per jump event (needs path storage)."""
        if self.jump_times is None:
            raise ValueError("ensemble was simulated without path storage")
        with open(path, "w") as fh:
            fh.write("path,time,displacement\n")
            for i in range(self.n_paths):
                nj = min(int(self.n_jumps[i]), self.jump_times.shape[1])
                for j in range(nj):
                    fh.write(f"{i},{float(self.jump_times[i, j])!r},{float(self.jump_sizes[i, j])!r}\n")


def _coef_arrays(coef):
    amps = np.array(coef.amps, dtype=float) if coef.amps else np.zeros(0)
    freqs = np.array([f[0] for f in coef.freqs], dtype=float) if coef.freqs else np.zeros(0)
    phases = np.array(coef.phases, dtype=float) if coef.phases else np.zeros(0)
    return float(coef.base), amps, freqs, phases


def simulate_paths(spec, initial, horizon, scheme, n_paths, seed,
                   checkpoints=None, observable=None, store_paths=0):
    """Run the thinning engine; returns a PathEnsemble.

    initial: scalar/point or an (n_paths,) / (n_paths, 2) array of starts.
    observable: optional (table_x0, table_dx, phi_table, lphi_table) for
    accumulating phi and its generator integral along paths (1-D only).
    store_paths: per-path jump storage cap (0 disables; memory-guarded).
    """
    if not scheme.certified:
        raise ValueError("scheme must be built and certified by build_scheme")
    if n_paths < 1:
        raise ValueError("n_paths must be >= 1")
    cps = np.asarray(checkpoints if checkpoints is not None else [horizon], dtype=float)
    if np.any(cps < 0) or np.any(cps > horizon + 1e-12):
        raise ValueError("checkpoints must lie within [0, horizon]")
    cps = np.sort(cps)
    seeds = seed_ladder(seed, n_paths)
    if store_paths and store_paths * n_paths > 2 ** 24:
        raise ValueError("path storage cap exceeds the memory guard; "
                         "reduce n_paths or the cap")

    if spec.n == 1:
        x0s = np.broadcast_to(np.asarray(initial, dtype=float).reshape(-1),
                              (n_paths,)).astype(float).copy() \
            if np.ndim(initial) > 0 else np.full(n_paths, float(initial))
        if x0s.size != n_paths:
            raise ValueError("initial array must match n_paths")
        b1, amps1, freqs1, phases1 = _coef_arrays(spec.coeff1)
        if spec.has_k2:
            b2, amps2, freqs2, phases2 = _coef_arrays(spec.coeff2)
        else:
            b2, amps2, freqs2, phases2 = 0.0, np.zeros(0), np.zeros(0), np.zeros(0)
        use_tables = observable is not None
        if use_tables:
            tab_x0, tab_dx, phi_tab, lphi_tab = observable
        else:
            tab_x0, tab_dx = 0.0, 1.0
            phi_tab = np.zeros(2)
            lphi_tab = np.zeros(2)
        m = cps.size
        X_cp = np.zeros((n_paths, m))
        I_cp = np.zeros((n_paths, m))
        phi0 = np.zeros(n_paths)
        XT = np.zeros(n_paths)
        n_jumps = np.zeros(n_paths, dtype=np.int64)
        n_props = np.zeros(n_paths, dtype=np.int64)
        n_acc = np.zeros(n_paths, dtype=np.int64)
        sum_a = np.zeros(n_paths)
        excluded = np.zeros(n_paths, dtype=np.bool_)
        ratio_max = np.zeros(1)
        cap = int(store_paths)
        st = np.zeros((n_paths, cap)) if cap else np.zeros((n_paths, 0))
        ss = np.zeros((n_paths, cap)) if cap else np.zeros((n_paths, 0))
        _engine_1d(seeds, x0s, float(horizon), scheme.eps, spec.alpha,
                   spec.alpha_prime, spec.has_k2, scheme.compensated,
                   spec.asym, scheme.masses, scheme.A1, scheme.A2,
                   scheme.total_rate, b1, amps1, freqs1, phases1,
                   b2, amps2, freqs2, phases2, _W_COEFS,
                   scheme.drift_scale, scheme.dt_drift, cps, use_tables,
                   tab_x0, tab_dx, phi_tab, lphi_tab,
                   scheme.max_jumps if not cap else min(scheme.max_jumps, 10 ** 9),
                   cap, st, ss, X_cp, I_cp, phi0, XT, n_jumps, n_props, n_acc,
                   sum_a, excluded, ratio_max)
        if ratio_max[0] > 1.0 + 1e-9:
            raise RuntimeError(f"envelope violated at runtime (ratio {ratio_max[0]:.8f})")
        return PathEnsemble(spec=spec, scheme=scheme, horizon=horizon, seed=seed,
                            checkpoints=cps, states=X_cp, terminal=XT,
                            integrals=I_cp if use_tables else None,
                            phi_at_start=phi0 if use_tables else None,
                            n_jumps=n_jumps, n_proposals=n_props,
                            sum_coeff_at_proposals=sum_a, excluded=excluded,
                            max_accept_ratio=float(ratio_max[0]), starts=x0s,
                            jump_times=st if cap else None,
                            jump_sizes=ss if cap else None)

    # n = 2
    x0arr = np.asarray(initial, dtype=float)
    if x0arr.ndim == 1:
        x0s = np.tile(x0arr.reshape(1, 2), (n_paths, 1))
    else:
        x0s = x0arr.astype(float)
    b1, amps1, freqs1, phases1 = _coef_arrays(spec.coeff1)
    f1x = np.array([f[0] for f in spec.coeff1.freqs], dtype=float) if spec.coeff1.freqs else np.zeros(0)
    f1y = np.array([f[1] for f in spec.coeff1.freqs], dtype=float) if spec.coeff1.freqs else np.zeros(0)
    if spec.has_k2:
        b2 = spec.coeff2.base
        amps2 = np.array(spec.coeff2.amps, dtype=float)
        f2x = np.array([f[0] for f in spec.coeff2.freqs], dtype=float)
        f2y = np.array([f[1] for f in spec.coeff2.freqs], dtype=float)
        ph2 = np.array(spec.coeff2.phases, dtype=float)
    else:
        b2, amps2, f2x, f2y, ph2 = 0.0, np.zeros(0), np.zeros(0), np.zeros(0), np.zeros(0)
    m = cps.size
    X_cp = np.zeros((n_paths, m))
    Y_cp = np.zeros((n_paths, m))
    XT = np.zeros(n_paths)
    YT = np.zeros(n_paths)
    n_jumps = np.zeros(n_paths, dtype=np.int64)
    n_props = np.zeros(n_paths, dtype=np.int64)
    excluded = np.zeros(n_paths, dtype=np.bool_)
    ratio_max = np.zeros(1)
    ph1 = np.array(spec.coeff1.phases, dtype=float) if spec.coeff1.phases else np.zeros(0)
    _engine_2d(seeds, x0s, float(horizon), scheme.eps, spec.alpha,
               spec.alpha_prime, spec.has_k2, scheme.masses, scheme.A1,
               scheme.A2, scheme.total_rate,
               b1, np.array(spec.coeff1.amps, dtype=float) if spec.coeff1.amps else np.zeros(0),
               f1x, f1y, ph1, b2, amps2, f2x, f2y, ph2, _W_COEFS, cps,
               scheme.max_jumps, X_cp, Y_cp, XT, YT, n_jumps, n_props,
               excluded, ratio_max)
    if ratio_max[0] > 1.0 + 1e-9:
        raise RuntimeError(f"envelope violated at runtime (ratio {ratio_max[0]:.8f})")
    states = np.stack([X_cp, Y_cp], axis=2)
    return PathEnsemble(spec=spec, scheme=scheme, horizon=horizon, seed=seed,
                        checkpoints=cps, states=states,
                        terminal=np.stack([XT, YT], axis=1),
                        n_jumps=n_jumps, n_proposals=n_props,
                        excluded=excluded, max_accept_ratio=float(ratio_max[0]),
                        starts=x0s)


# ---------------------------------------------------------------------------
# observable tables


def observable_tables(grid_fine, phi_fn, spec, plan=None):
    """phi and L phi on a fine 1-D table for in-engine accumulation."""
    from .grids import grid_function
    from .operators import LDirectPlan
    f = grid_function(grid_fine, phi_fn)
    if plan is None:
        plan = LDirectPlan(spec, grid_fine)
    lphi = plan.apply(f)
    x = grid_fine.axis_points()
    return (float(x[0]), float(x[1] - x[0]),
            np.ascontiguousarray(f.values.real),
            np.ascontiguousarray(lphi.values.real))


# ---------------------------------------------------------------------------
# martingale residual report


@dataclass
class MartingaleReport:
    checkpoints: np.ndarray
    means: np.ndarray
    ses: np.ndarray
    orth_stats: list
    passed: bool
    n_paths: int
    bias_estimate: np.ndarray = None

    def summary_lines(self):
        out = []
        for t, m, s in zip(self.checkpoints, self.means, self.ses):
            out.append(f"E[M_{t:g}] = {m:+.3e} (SE {s:.2e}) "
                       f"{'ok' if abs(m) <= 3 * s else 'FAIL'}")
        for name, v, s in self.orth_stats:
            out.append(f"orth {name}: {v:+.3e} (SE {s:.2e}) "
                       f"{'ok' if abs(v) <= 3 * s else 'FAIL'}")
        return out


def martingale_values(ens, table):
    """Per-path M at each checkpoint: phi(X_t) - phi(X_0) - int_0^t Lphi ds."""
    tab_x0, tab_dx, phi_tab, _ = table
    xs = np.arange(phi_tab.size) * tab_dx + tab_x0
    phi_cp = np.interp(ens.states, xs, phi_tab, left=0.0, right=0.0)
    return phi_cp - ens.phi_at_start[:, None] - ens.integrals


def martingale_residual(ens, table, lphi_scale=1.0, aux_ens=None, aux_table=None):
    """Checkpoint means of M with SEs, plus increment-orthogonality statistics.

    lphi_scale deliberately perturbs the generator term (power checks);
    aux_ens at a finer cutoff turns into a reported bias estimate.
    """
    keep = ~ens.excluded
    M = martingale_values(ens, table)[keep]
    if lphi_scale != 1.0:
        # M_scaled = phi - phi0 - scale * I = M + (1 - scale) * I
        M = M + (1.0 - lphi_scale) * ens.integrals[keep]
    n = M.shape[0]
    if n < 100:
        raise ValueError(f"too few delivered paths ({n}) for stable standard errors; "
                         f"need >= 100")
    means = M.mean(axis=0)
    ses = M.std(axis=0, ddof=1) / np.sqrt(n)

    # increment orthogonality against a documented family of earlier-time
    # functionals: constants, phi at the earlier checkpoint, a half-line
    # indicator, and a bounded coordinate
    tab_x0, tab_dx, phi_tab, _ = table
    xs = np.arange(phi_tab.size) * tab_dx + tab_x0
    states = ens.states[keep]
    orth = []
    for i_s in range(len(ens.checkpoints) - 1):
        for i_t in range(i_s + 1, len(ens.checkpoints)):
            inc = M[:, i_t] - M[:, i_s]
            xs_s = states[:, i_s]
            fams = {
                "one": np.ones(n),
                "phi(X_s)": np.interp(xs_s, xs, phi_tab, left=0.0, right=0.0),
                "ind(X_s<=med)": (xs_s <= np.median(xs_s)).astype(float),
                "tanh(X_s)": np.tanh(xs_s),
            }
            for name, gv in fams.items():
                prod = inc * gv
                v = prod.mean()
                se = prod.std(ddof=1) / np.sqrt(n)
                orth.append((f"(M_{ens.checkpoints[i_t]:g}-M_{ens.checkpoints[i_s]:g})*{name}",
                             float(v), float(se)))
    ok = bool(np.all(np.abs(means) <= 3.0 * ses)
              and all(abs(v) <= 3.0 * se for _, v, se in orth))
    rep = MartingaleReport(checkpoints=ens.checkpoints, means=means, ses=ses,
                           orth_stats=orth, passed=ok, n_paths=n)
    if aux_ens is not None:
        keep2 = ~aux_ens.excluded
        M2 = martingale_values(aux_ens, aux_table if aux_table is not None else table)[keep2]
        rep.bias_estimate = M2.mean(axis=0) - means
    return rep


# ---------------------------------------------------------------------------
# law comparison and MC/PDE cross-check


def one_dim_law_compare(ens_a, ens_b, t, n_boot=200, boot_seed=1234):
    """KS distance between the laws of the state at time t under two schemes.

    The null quantile comes from pooled-permutation resampling; the caller
    adds any measured scheme-bias allowance before judging agreement.
    """
    ia, ib = ens_a.checkpoint_index(t), ens_b.checkpoint_index(t)
    if ens_a.spec.n != 1 or ens_b.spec.n != 1:
        return _moment_law_compare(ens_a, ens_b, t, n_boot, boot_seed)
    a = ens_a.states[~ens_a.excluded, ia]
    b = ens_b.states[~ens_b.excluded, ib]
    from scipy.stats import ks_2samp
    d_obs = float(ks_2samp(a, b).statistic)
    rng = np.random.default_rng(boot_seed)
    pooled = np.concatenate([a, b])
    na = a.size
    null = np.empty(n_boot)
    for i in range(n_boot):
        perm = rng.permutation(pooled.size)
        null[i] = ks_2samp(pooled[perm[:na]], pooled[perm[na:]]).statistic
    q99 = float(np.quantile(null, 0.99))
    return {"distance": d_obs, "null_q99": q99, "n_a": int(na), "n_b": int(b.size),
            "significant": d_obs > q99}


def _moment_law_compare(ens_a, ens_b, t, n_boot, boot_seed):
    ia, ib = ens_a.checkpoint_index(t), ens_b.checkpoint_index(t)
    a = ens_a.states[~ens_a.excluded, ia]
    b = ens_b.states[~ens_b.excluded, ib]

    def smooth_moments(v):
        feats = [np.tanh(v[:, 0]), np.tanh(v[:, 1]),
                 np.tanh(v[:, 0]) * np.tanh(v[:, 1]),
                 np.exp(-np.sum(v ** 2, axis=1) / 4.0)]
        return np.stack(feats, axis=1)

    fa, fb = smooth_moments(a), smooth_moments(b)
    d_obs = float(np.linalg.norm(fa.mean(axis=0) - fb.mean(axis=0)))
    rng = np.random.default_rng(boot_seed)
    pooled = np.concatenate([fa, fb])
    na = fa.shape[0]
    null = np.empty(n_boot)
    for i in range(n_boot):
        perm = rng.permutation(pooled.shape[0])
        null[i] = np.linalg.norm(pooled[perm[:na]].mean(axis=0)
                                 - pooled[perm[na:]].mean(axis=0))
    q99 = float(np.quantile(null, 0.99))
    return {"distance": d_obs, "null_q99": q99, "n_a": int(na), "n_b": int(fb.shape[0]),
            "significant": d_obs > q99}


def scheme_bias_allowance(spec, initial, horizon, t, eps_pair, n_paths, seed,
                          dt_drift=1e-3, n_replicates=2):
    """Empirical scheme-bias term of the two-cutoff KS distance.

    Replicate pairs at independent seeds measure the mean distance between the
    cutoff levels; its excess over the mean of the permutation null isolates
    the systematic displacement from sampling noise.  Returns the allowance
    to add on top of the null quantile.
    """
    from scipy.stats import ks_2samp
    sch_hi = build_scheme(spec, eps_pair[0], dt_drift)
    sch_lo = build_scheme(spec, eps_pair[1], dt_drift)
    dists = []
    null_means = []
    for r in range(n_replicates):
        e_hi = simulate_paths(spec, initial, horizon, sch_hi, n_paths,
                              seed + 101 + 1000 * r, checkpoints=[t])
        e_lo = simulate_paths(spec, initial, horizon, sch_lo, n_paths,
                              seed + 202 + 1000 * r, checkpoints=[t])
        a = e_hi.states[~e_hi.excluded, 0]
        b = e_lo.states[~e_lo.excluded, 0]
        dists.append(float(ks_2samp(a, b).statistic))
        rng = np.random.default_rng(seed + 77 + r)
        pooled = np.concatenate([a, b])
        na = a.size
        null = []
        for _ in range(60):
            perm = rng.permutation(pooled.size)
            null.append(ks_2samp(pooled[perm[:na]], pooled[perm[na:]]).statistic)
        null_means.append(float(np.mean(null)))
    return max(0.0, float(np.mean(dists)) - float(np.mean(null_means)))


def mc_vs_pde(ens_by_start, psi, t, traj, bias_allowance=0.0):
    """|E^x[psi(X_t)] - u(t, x)| per probe start, with SE-based tolerances.

    ens_by_start: list of (x_start, PathEnsemble); traj solves the
    homogeneous evolution with initial data psi on the ensemble's kernel.
    """
    grid = psi.grid
    m = int(round(t / (traj.times[1] - traj.times[0]))) if len(traj.times) > 1 else 0
    if abs(traj.times[m] - t) > 1e-10:
        raise ValueError(f"time {t} does not lie on the trajectory grid")
    u_t = traj.state(m)
    xs_grid = grid.axis_points()
    psi_x = np.arange(xs_grid.size) * grid.spacing + xs_grid[0]
    rows = []
    for x0, ens in ens_by_start:
        i = ens.checkpoint_index(t)
        vals = np.interp(ens.states[~ens.excluded, i], psi_x,
                         psi.values.real, left=0.0, right=0.0)
        est = float(vals.mean())
        se = float(vals.std(ddof=1) / np.sqrt(vals.size))
        u_val = float(np.interp(x0, psi_x, u_t.values.real))
        rows.append({"x": float(x0), "mc": est, "pde": u_val,
                     "abs_err": abs(est - u_val), "se": se,
                     "tol": 3.0 * se + bias_allowance})
    return rows


# ---------------------------------------------------------------------------
# path-space diagnostics: d_uc metric and the generalized modulus


def step_path(jump_times, jump_values, x0=0.0):
    """Piecewise-constant cadlag path record (times sorted, post-jump values)."""
    t = np.asarray(jump_times, dtype=float)
    if np.any(np.diff(t) < 0):
        raise ValueError("jump times must be sorted")
    vals = x0 + np.cumsum(np.asarray(jump_values, dtype=float))
    return t, np.concatenate([[x0], vals])


def _path_value(times, values, t):
    return values[np.searchsorted(times, t, side="right")]


def d_uc(path_a, path_b):
    """Uniform-on-compacts metric sum_k 2^{-k} min(1, sup_{t<=k}|a-b|).

    Step paths are constant after their last jump, so once every jump lies
    inside the first K windows the remaining terms repeat the saturated
    supremum and the tail sums in closed form.
    """
    ta, va = path_a
    tb, vb = path_b
    events = np.unique(np.concatenate([[0.0], ta, tb]))
    k_last = int(np.ceil(max(1.0, float(events.max()) + 1e-9)))
    total = 0.0
    sup = 0.0
    for k in range(1, k_last + 1):
        win = events[(events >= k - 1) & (events < k)]
        cand = np.concatenate([win, [k - 1e-12]])
        diffs = np.abs(_path_value(ta, va, cand) - _path_value(tb, vb, cand))
        sup = max(sup, float(np.max(diffs)))
        total += 2.0 ** (-k) * min(1.0, sup)
    total += 2.0 ** (-k_last) * min(1.0, sup)
    return total


def gamma_modulus(path, k, rho):
    """Generalized modulus: partitions of [0, k) with every interval >= rho.

    The search is restricted to jump times plus endpoints, which is exact for
    piecewise-constant paths; the oscillation of an interval is the spread of
    the path values attained on it.
    """
    if rho >= k:
        raise ValueError("rho must be smaller than the window k")
    times, values = path
    cuts = np.concatenate([[0.0], times[(times > 0) & (times < k)], [k]])
    cuts = np.unique(cuts)
    n = cuts.size

    def osc(i, j):
        # oscillation on [cuts[i], cuts[j]): values at indices i..j-1 segments
        lo = np.searchsorted(times, cuts[i], side="right")
        hi = np.searchsorted(times, cuts[j] - 1e-15, side="right")
        seg = values[lo:hi + 1]
        return float(np.max(seg) - np.min(seg))

    INF = np.inf
    best = np.full(n, INF)
    best[0] = 0.0
    for j in range(1, n):
        for i in range(j):
            if cuts[j] - cuts[i] < rho - 1e-15:
                continue
            cand = max(best[i], osc(i, j))
            if cand < best[j]:
                best[j] = cand
    return float(best[-1])


def path_diagnostics(ens, k, rho_list, max_paths=64, pair_count=8):
    """gamma_k moduli over the ensemble and d_uc distances between path pairs."""
    if ens.jump_times is None:
        raise ValueError("ensemble was simulated without path storage")
    out = {"gamma": {}, "d_uc": []}
    n_use = min(max_paths, ens.n_paths)
    paths = []
    for i in range(n_use):
        nj = min(int(ens.n_jumps[i]), ens.jump_times.shape[1])
        paths.append(step_path(ens.jump_times[i, :nj], ens.jump_sizes[i, :nj],
                               x0=float(ens.starts[i])))
    for rho in rho_list:
        out["gamma"][rho] = np.array([gamma_modulus(p, k, rho) for p in paths])
    for i in range(min(pair_count, n_use - 1)):
        out["d_uc"].append(d_uc(paths[i], paths[i + 1]))
    return out
