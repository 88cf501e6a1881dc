"""NumPy implementations of the hot kernels (fallback when the extension is absent)."""

import numpy as np


def deviation_values(grid, tau_own, mu, others_load, target, slope, d0_max, weight):
    """Expected utility of playing each grid action against fixed opponents.

    For every others-profile ``c`` (weighted by ``weight[c]``) the deviator's
    rate ``x`` triggers intervention ``clip(slope[c] * (x - target[c]), 0,
    d0_max[c])`` on top of the opponents' load ``others_load[c]``.
    """
    x = np.asarray(grid, dtype=float)[None, :]
    others_load = np.asarray(others_load, dtype=float)[:, None]
    target = np.asarray(target, dtype=float)[:, None]
    slope = np.asarray(slope, dtype=float)[:, None]
    d0_max = np.asarray(d0_max, dtype=float)[:, None]
    d0 = np.clip(slope * (x - target), 0.0, d0_max)
    util = np.power(x, tau_own) * (mu - others_load - x - d0)
    return np.asarray(weight, dtype=float) @ util


def misreport_matrix(tau, mu, own_rate, load, weight):
    """``W[s, l]``: expected utility of a type-s user reporting l and obeying.

    ``own_rate[l, c]`` and ``load[l, c]`` are the reporter's suggested rate
    and the total load in the profile formed by the report and others ``c``.
    """
    tau = np.asarray(tau, dtype=float)
    own_rate = np.asarray(own_rate, dtype=float)
    residual = mu - np.asarray(load, dtype=float)
    powered = np.power(own_rate[None, :, :], tau[:, None, None])
    return np.einsum("slc,lc,c->sl", powered, residual, np.asarray(weight, dtype=float))
