"""Compiled heat-bath sweeps.  Uniform variates are supplied by the caller so
runs are reproducible from a numpy seed alone."""
import numpy as np
from numba import njit


@njit(cache=True)
def local_fields(J, tau):
    n = tau.shape[0]
    loc = np.zeros(n)
    for x in range(n):
        acc = 0.0
        for y in range(n):
            acc += J[x, y] * tau[y]
        loc[x] = acc
    return loc


@njit(cache=True)
def _update(J, g, tau, loc, x, u):
    h = loc[x] + g[x]
    p = 1.0 / (1.0 + np.exp(-2.0 * h))
    new = 1 if u < p else -1
    if new != tau[x]:
        delta = new - tau[x]
        row = J[x]
        for y in range(tau.shape[0]):
            loc[y] += row[y] * delta
        tau[x] = new


@njit(cache=True)
def heatbath_block(J, g, tau, uniforms, acc, record, thin):
    """Sequential-sweep heat bath over ``uniforms.shape[0]`` sweeps.

    ``acc`` accumulates tau after every sweep; if ``thin > 0`` every thin-th
    sweep is copied into ``record``.
    """
    n = tau.shape[0]
    loc = local_fields(J, tau)
    k = 0
    for t in range(uniforms.shape[0]):
        for x in range(n):
            _update(J, g, tau, loc, x, uniforms[t, x])
        for x in range(n):
            acc[x] += tau[x]
        if thin > 0 and (t + 1) % thin == 0 and k < record.shape[0]:
            for x in range(n):
                record[k, x] = tau[x]
            k += 1
    return k


@njit(cache=True)
def coupled_block(J, g_hi, g_lo, tau_hi, tau_lo, uniforms, acc_hi, acc_lo):
    """Two heat-bath chains driven by the same uniforms; returns the number
    of (sweep, site) pairs with tau_hi < tau_lo."""
    n = tau_hi.shape[0]
    loc_hi = local_fields(J, tau_hi)
    loc_lo = local_fields(J, tau_lo)
    violations = 0
    for t in range(uniforms.shape[0]):
        for x in range(n):
            u = uniforms[t, x]
            _update(J, g_hi, tau_hi, loc_hi, x, u)
            _update(J, g_lo, tau_lo, loc_lo, x, u)
        for x in range(n):
            acc_hi[x] += tau_hi[x]
            acc_lo[x] += tau_lo[x]
            if tau_hi[x] < tau_lo[x]:
                violations += 1
    return violations
