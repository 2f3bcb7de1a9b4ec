"""Fused pairwise reductions for the built-in tanh kernel family.

The empirical means behind the tanh kernels are O(P*M) hot loops.  Instead
of a tanh call per pair, these routines precompute tanh once per point and
combine pairs through the addition identities

    tanh(c - x) = (tanh c - tanh x) / (1 - tanh x * tanh c)
    tanh(c + x) = (tanh c + tanh x) / (1 + tanh x * tanh c)

which are exact in real arithmetic.  The identities lose precision only
when the denominator cancels, i.e. when both arguments are large; the
wrappers therefore fall back to direct evaluation unless all inputs lie in
[-SAFE_RANGE, SAFE_RANGE], inside which the worst per-term relative error
is ~1e-9.

All jitted loops are single-threaded with a fixed summation order, so
results are bit-identical regardless of how many worker threads drive
them; parallelism belongs one level up (replicas, row chunks).
"""

from __future__ import annotations

import numpy as np
from numba import njit

SAFE_RANGE = 8.0


@njit(cache=True, nogil=True, fastmath=True)
def _diff_cross(xt, ct):
    P, M = xt.shape[0], ct.shape[0]
    out = np.empty(P)
    for i in range(P):
        a = xt[i]
        acc = 0.0
        for j in range(M):
            t = ct[j]
            acc += (t - a) / (1.0 - a * t)
        out[i] = acc / M
    return out


@njit(cache=True, nogil=True, fastmath=True)
def _sum_cross(xt, ct):
    P, M = xt.shape[0], ct.shape[0]
    out = np.empty(P)
    for i in range(P):
        a = xt[i]
        acc = 0.0
        for j in range(M):
            t = ct[j]
            acc += (a + t) / (1.0 + a * t)
        out[i] = acc / M
    return out


@njit(cache=True, nogil=True, fastmath=True)
def _diff_self(st):
    # antisymmetric pair matrix: one triangular sweep, zero diagonal
    N = st.shape[0]
    s = np.zeros(N)
    for i in range(N):
        a = st[i]
        acc = 0.0
        for j in range(i + 1, N):
            t = st[j]
            v = (t - a) / (1.0 - a * t)
            acc += v
            s[j] -= v
        s[i] += acc
    return s / N


@njit(cache=True, nogil=True, fastmath=True)
def _sum_self(st):
    # symmetric pair matrix; diagonal is tanh(2x) = 2 t / (1 + t^2)
    N = st.shape[0]
    s = np.empty(N)
    for i in range(N):
        t = st[i]
        s[i] = 2.0 * t / (1.0 + t * t)
    for i in range(N):
        a = st[i]
        acc = 0.0
        for j in range(i + 1, N):
            t = st[j]
            v = (a + t) / (1.0 + a * t)
            acc += v
            s[j] += v
        s[i] += acc
    return s / N


def _in_safe_range(*arrays) -> bool:
    return all(abs(float(a[0])) <= SAFE_RANGE if a.size == 1 else
               float(np.max(np.abs(a))) <= SAFE_RANGE for a in arrays)


def tanh_diff_mean(x, x_tanh, cloud, cloud_tanh):
    """mean_j tanh(cloud_j - x_i) for 1-d points."""
    if _in_safe_range(x, cloud):
        return _diff_cross(x_tanh, cloud_tanh)
    return np.tanh(cloud[None, :] - x[:, None]).mean(axis=1)


def tanh_sum_mean(x, x_tanh, cloud, cloud_tanh):
    """mean_j tanh(cloud_j + x_i) for 1-d points."""
    if _in_safe_range(x, cloud):
        return _sum_cross(x_tanh, cloud_tanh)
    return np.tanh(cloud[None, :] + x[:, None]).mean(axis=1)


def tanh_diff_mean_self(states, states_tanh):
    """mean_j tanh(s_j - s_i) over the ensemble itself (self term included)."""
    if _in_safe_range(states):
        return _diff_self(states_tanh)
    return np.tanh(states[None, :] - states[:, None]).mean(axis=1)


def tanh_sum_mean_self(states, states_tanh):
    """mean_j tanh(s_j + s_i) over the ensemble itself (self term included)."""
    if _in_safe_range(states):
        return _sum_self(states_tanh)
    return np.tanh(states[None, :] + states[:, None]).mean(axis=1)
