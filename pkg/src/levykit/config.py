"""INI experiment configuration: parsing, validation, and object construction.

Sections: [run], [kernel], [grid], [symbol], [resolvent], [cauchy],
[simulate], [checks].  Every referenced module precondition is validated
before any computation starts; the first violated one is named.
"""

import configparser
import hashlib
from dataclasses import dataclass, field

import numpy as np

from .grids import TorusGrid, grid_function
from .kernels import (KernelSpec, constant_coefficient, holder_coefficient,
                      trig_coefficient, stable_like, fullspace_diagnostic)


class ConfigError(ValueError):
    pass


PIPELINE_STAGES = ("validate", "symbol", "resolvent", "cauchy", "simulate",
                   "verify", "crosscheck", "bench")


@dataclass
class ExperimentConfig:
    raw_text: str
    pipeline: list
    out_dir: str
    spec: KernelSpec
    grid: TorusGrid
    symbol_tol: float
    lam_factors: list
    alpha_primes: list
    s: float
    theta: float
    resolvent_tol: float
    horizon: float
    dt: float
    forcing_kind: str
    eps: float
    n_paths: int
    sim_horizon: float
    checkpoints: list
    seed: int
    initial: float
    dt_drift: float
    checks: dict = field(default_factory=dict)
    threads: int = 1
    make_plots: bool = False

    @property
    def config_hash(self):
        return hashlib.sha256(self.raw_text.encode()).hexdigest()

    def forcing(self):
        if self.forcing_kind == "none":
            return None
        g = self.grid
        if self.forcing_kind == "ramp_bump":
            return lambda t: grid_function(
                g, lambda *m: min(t / (0.25 * self.horizon + 1e-300), 1.0)
                * np.exp(-sum(x ** 2 for x in m)))
        if self.forcing_kind == "sin_cos":
            return lambda t: grid_function(
                g, lambda *m: np.sin(t) * np.cos(m[0]))
        raise ConfigError(f"unknown forcing kind {self.forcing_kind!r}")


def _build_coefficient(sect, dim):
    kind = sect.get("coeff", "const")
    base = sect.getfloat("coeff_base", 1.0)
    if kind == "const":
        return constant_coefficient(base, dim=dim)
    if kind == "holder":
        return holder_coefficient(sect.getfloat("tau", 0.5),
                                  amplitude=sect.getfloat("coeff_amplitude", 0.25),
                                  n_scales=sect.getint("coeff_scales", 4),
                                  base=base, dim=dim,
                                  seed=sect.getint("coeff_seed", 7))
    if kind == "trig":
        amp = sect.getfloat("coeff_amplitude", 0.25)
        wav = sect.getint("coeff_wavenumber", 1)
        kvec = [0] * dim
        kvec[0] = wav
        return trig_coefficient(base, [(amp, kvec, 0.0)], dim=dim)
    raise ConfigError(f"unknown coefficient kind {kind!r}")


def load_config(path, seed_override=None, out_override=None, threads=1,
                make_plots=False):
    cp = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    with open(path) as fh:
        raw = fh.read()
    cp.read_string(raw)

    run = cp["run"] if cp.has_section("run") else {}
    pipeline = (run.get("pipeline", "") or "").split()
    for st in pipeline:
        if st not in PIPELINE_STAGES:
            raise ConfigError(f"unknown pipeline stage {st!r} "
                              f"(known: {', '.join(PIPELINE_STAGES)})")
    out_dir = out_override or (run.get("out", "results") if run else "results")

    k = cp["kernel"] if cp.has_section("kernel") else None
    if k is None:
        raise ConfigError("missing [kernel] section")
    n = k.getint("n", 1)
    if n not in (1, 2):
        raise ConfigError(f"kernel n must be 1 or 2, got {n}")
    alpha = k.getfloat("alpha", 1.5)
    if not 0.0 < alpha < 2.0:
        raise ConfigError(f"alpha out of (0,2): {alpha}")
    alpha_prime = k.getfloat("alpha_prime", 0.0)
    tau = k.getfloat("tau", 0.5)
    coeff = _build_coefficient(k, n)
    asym = k.getfloat("asym", 0.0)
    family = k.get("family", "stable")
    k2_kind = k.get("k2", "none")
    coeff2 = None
    if k2_kind == "exp":
        coeff2 = constant_coefficient(k.getfloat("k2_base", 0.05), dim=n)
    elif k2_kind != "none":
        raise ConfigError(f"unknown k2 kind {k2_kind!r}")
    try:
        if family == "stable":
            spec = stable_like(n=n, alpha=alpha, coeff=coeff, alpha_prime=alpha_prime,
                               tau=tau, asym=asym, coeff2=coeff2)
        elif family == "fullspace":
            spec = fullspace_diagnostic(n=n, alpha=alpha, coeff=coeff)
        else:
            raise ConfigError(f"unknown kernel family {family!r}")
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc

    gsec = cp["grid"] if cp.has_section("grid") else {}
    grid = TorusGrid(n, float(gsec.get("half_period", 4.0)),
                     int(gsec.get("points", 256)))

    ssec = cp["symbol"] if cp.has_section("symbol") else {}
    rsec = cp["resolvent"] if cp.has_section("resolvent") else {}
    csec = cp["cauchy"] if cp.has_section("cauchy") else {}
    msec = cp["simulate"] if cp.has_section("simulate") else {}
    checks = dict(cp["checks"]) if cp.has_section("checks") else {}

    horizon = float(csec.get("horizon", 0.5))
    dt = float(csec.get("dt", horizon / 128))
    eps = float(msec.get("eps", 0.02))
    if not 0.0 < eps < 1.0:
        raise ConfigError(f"eps out of (0,1): {eps}")
    sim_T = float(msec.get("horizon", horizon))
    cps = [float(v) for v in msec.get("checkpoints", f"{sim_T}").split()]
    if any(c < 0 or c > sim_T for c in cps):
        raise ConfigError("checkpoints must lie within [0, horizon]")

    seed = seed_override if seed_override is not None else int(msec.get("seed", 1234))
    return ExperimentConfig(
        raw_text=raw,
        pipeline=pipeline,
        out_dir=out_dir,
        spec=spec,
        grid=grid,
        symbol_tol=float(ssec.get("tol", 1e-8)),
        lam_factors=[float(v) for v in rsec.get("lam_factors", "1 2 4 8 16 32 64").split()],
        alpha_primes=[float(v) for v in rsec.get("alpha_primes", f"0.0 {alpha}").split()],
        s=float(rsec.get("s", 0.3)),
        theta=float(csec.get("theta", 0.5)),
        resolvent_tol=float(rsec.get("tol", 1e-9)),
        horizon=horizon,
        dt=dt,
        forcing_kind=csec.get("forcing", "ramp_bump"),
        eps=eps,
        n_paths=int(msec.get("n_paths", 20000)),
        sim_horizon=sim_T,
        checkpoints=cps,
        seed=seed,
        initial=float(msec.get("initial", 0.0)),
        dt_drift=float(msec.get("dt_drift", 1e-3)),
        checks=checks,
        threads=threads,
        make_plots=make_plots,
    )
