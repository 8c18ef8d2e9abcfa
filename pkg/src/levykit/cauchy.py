"""Forced evolution problems solved by implicit stepping through the resolvent.

Backward Euler reuses the parametrix resolvent at lambda = 1/dt, which is
admissible exactly when the step is small enough, and is unconditionally
stable for the sectorial generator.  The terminal-value problem needed by the
path-space uniqueness argument is the same solver after time reversal.
"""

from dataclasses import dataclass, field

import numpy as np

from .grids import GridFunction, holder_zygmund_norm
from .symbols import compute_symbol, sector_and_ellipticity
from .operators import LDirectPlan
from .resolvent import ResolventOperator


@dataclass
class CauchyProblem:
    """Time-dependent source problem du/dt - L u = f on [0, T], u(0) = u0.

    forcing maps a time to a GridFunction (None means homogeneous); the
    strict-contract mode additionally requires a vanishing initial source,
    matching the Holder-in-time solvability class.
    """

    spec: object
    grid: object
    forcing: object
    horizon: float
    dt: float
    s: float = 0.3
    theta: float = 0.5
    u0: GridFunction = None
    strict_contract: bool = False

    def __post_init__(self):
        if self.horizon <= 0 or self.dt <= 0:
            raise ValueError("horizon and dt must be positive")
        if self.strict_contract:
            if self.u0 is not None and self.u0.sup_norm() > 0:
                raise ValueError("the strict solvability contract covers zero initial data")
            f0 = self.force_at(0.0)
            if f0 is not None and f0.sup_norm() > 1e-12:
                raise ValueError("the strict solvability contract requires f(0) = 0")

    def force_at(self, t):
        if self.forcing is None:
            return None
        return self.forcing(t)

    @property
    def n_steps(self):
        return int(round(self.horizon / self.dt))


@dataclass
class Trajectory:
    times: np.ndarray
    states: list
    step_defects: list = field(default_factory=list)
    min_value: float = np.inf
    forcing_nonneg: bool = None
    lam: float = None
    solver_iterations: list = field(default_factory=list)

    def state(self, m):
        return self.states[m]

    @property
    def final(self):
        return self.states[-1]

    def sup_series(self):
        return np.array([s.sup_norm() for s in self.states])

    def to_csv(self, path_prefix):
        from .grids import gridfunction_to_csv
        manifest = []
        for m, (t, s) in enumerate(zip(self.times, self.states)):
            fname = f"{path_prefix}_t{m:04d}.csv"
            gridfunction_to_csv(s, fname)
            manifest.append((t, fname))
        return manifest


def solve_cauchy(prob, p=None, report=None, plan=None, tol=1e-9,
                 defect_stride=1, keep_states=True):
    """Backward-Euler march u^{m+1} = R(1/dt)[u^m/dt + f(t_{m+1})].

    Per-step defects are measured against the independent quadrature path.
    A resolvent divergence at lambda = 1/dt signals kernel or sector
    misconfiguration; shrinking dt only raises lambda and cannot be the fix.
    """
    spec, grid = prob.spec, prob.grid
    if p is None:
        p = compute_symbol(spec, grid)
    if report is None:
        report = sector_and_ellipticity(p, alpha=spec.alpha)
    lam = 1.0 / prob.dt
    if plan is None:
        plan = LDirectPlan(spec, grid)
    op = ResolventOperator(p, spec, lam, tol=tol, report=report, plan=plan)

    zero = GridFunction(grid, np.zeros((grid.points_per_axis,) * grid.dim, dtype=complex), "x")
    u = prob.u0 if prob.u0 is not None else zero
    times = [0.0]
    states = [u]
    traj = Trajectory(times=None, states=states, lam=lam)
    fmax = 0.0
    nonneg = True
    for m in range(1, prob.n_steps + 1):
        t = m * prob.dt
        fm = prob.force_at(t)
        rhs_vals = u.values / prob.dt
        if fm is not None:
            rhs_vals = rhs_vals + fm.values
            fmax = max(fmax, fm.sup_norm())
            if nonneg and (not fm.is_real() or float(np.min(fm.values.real)) < -1e-14):
                nonneg = False
        u_new = op.apply(GridFunction(grid, rhs_vals, "x"))
        traj.solver_iterations.append(op.last_info.iterations)
        if defect_stride and m % defect_stride == 0:
            Lu = plan.apply(u_new)
            d = (u_new.values - u.values) / prob.dt - Lu.values
            if fm is not None:
                d = d - fm.values
            traj.step_defects.append(float(np.max(np.abs(d))))
        u = u_new
        traj.min_value = min(traj.min_value, float(np.min(u.values.real)))
        times.append(t)
        if keep_states:
            states.append(u)
        else:
            states[-1] = u
    traj.times = np.asarray(times if keep_states else [0.0, prob.horizon])
    traj.forcing_nonneg = nonneg and (prob.u0 is None or float(np.min((prob.u0.values.real))) >= 0)
    return traj


def solve_backward(spec, grid, phi, psi, horizon, dt, **kw):
    """Terminal-value problem dv/dt + L v = phi(t) psi(x), v(T) = 0.

    Solved through w(t) = v(T - t), which satisfies dw/dt - L w = -phi(T-t) psi
    with w(0) = 0; the returned trajectory is re-indexed to run forward in v's
    own time, so state(m) approximates v(m dt) and the last state is zero.
    """
    psi_vals = psi.values

    def forcing(t):
        return GridFunction(grid, -phi(horizon - t) * psi_vals, "x")

    prob = CauchyProblem(spec=spec, grid=grid, forcing=forcing,
                         horizon=horizon, dt=dt)
    w = solve_cauchy(prob, **kw)
    states = list(reversed(w.states))
    traj = Trajectory(times=w.times, states=states,
                      step_defects=w.step_defects, min_value=w.min_value,
                      lam=w.lam, solver_iterations=w.solver_iterations)
    return traj


def regularity_report(traj, s, alpha, theta=0.5, max_pairs=64):
    """Norm time series and the theta-Holder quotient of t -> u(t) in C^s."""
    cs = np.array([holder_zygmund_norm(u, s) if u.sup_norm() > 0 else 0.0
                   for u in traj.states])
    csa = np.array([holder_zygmund_norm(u, s + alpha) if u.sup_norm() > 0 else 0.0
                    for u in traj.states])
    n = len(traj.states)
    quot = 0.0
    if n >= 2:
        idx = np.unique(np.linspace(0, n - 1, min(n, max_pairs)).astype(int))
        for a in range(len(idx)):
            for b in range(a + 1, len(idx)):
                i, j = idx[a], idx[b]
                dt_ab = traj.times[j] - traj.times[i]
                if dt_ab <= 0:
                    continue
                diff = GridFunction(traj.states[i].grid,
                                    traj.states[j].values - traj.states[i].values, "x")
                if diff.sup_norm() == 0:
                    continue
                quot = max(quot, holder_zygmund_norm(diff, s) / dt_ab ** theta)
    return {
        "cs_series": cs,
        "cs_alpha_series": csa,
        "max_cs_alpha": float(np.max(csa)) if csa.size else 0.0,
        "time_holder_quotient": float(quot),
        "theta": theta,
    }
