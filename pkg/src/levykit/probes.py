"""The fixed probe basket used for operator-norm surrogates (basket v1).

True operator norms are not computable on a grid; all resolvent and mapping
bounds are certified against this documented 12-function basket of bumps,
modulated bumps, and dyadic wave packets, normalized in the requested C^s norm.
"""

import numpy as np

from .grids import GridFunction, grid_function, holder_zygmund_norm


def _bump(width):
    return lambda *mesh: np.exp(-sum(m ** 2 for m in mesh) / (2.0 * width ** 2))


def _compact_bump(width):
    def fn(*mesh):
        r2 = sum(m ** 2 for m in mesh) / width ** 2
        out = np.zeros_like(r2)
        inside = r2 < 1.0
        out[inside] = np.exp(1.0 - 1.0 / (1.0 - r2[inside]))
        return out
    return fn


def probe_basket(grid, s=0.3, partition=None):
    """Twelve C^s-normalized probes: bumps, modulated bumps, wave packets."""
    raw = []
    raw.append(_bump(0.4))
    raw.append(_bump(0.8))
    raw.append(_bump(1.6))
    raw.append(_compact_bump(2.0))
    raw.append(lambda *m: np.cos(4.0 * m[0]) * _bump(1.0)(*m))
    raw.append(lambda *m: np.sin(8.0 * m[0]) * _bump(1.0)(*m))
    for j in (3, 4, 5, 6, 7):
        raw.append(lambda *m, j=j: 2.0 ** (-j * s) * np.cos(2.0 ** j * m[0]) * _bump(1.2)(*m))
    raw.append(lambda *m: _bump(0.5)(*m) - 0.7 * _bump(1.0)(*m))
    probes = []
    for fn in raw:
        f = grid_function(grid, fn)
        nrm = holder_zygmund_norm(f, s, partition)
        probes.append(GridFunction(grid, f.values / nrm, "x"))
    return probes
