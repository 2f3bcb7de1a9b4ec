"""Model specifications for mean-field particle systems.

A model bundles user-declared kernels (drift split into a single-particle
part plus a pair-interaction part, and a pair diffusion kernel) together
with the regularity/dissipativity constants the long-time theory needs.
Constants are declared by the model author; validators only spot-check them
on random samples and evaluate the closed-form admissibility thresholds.

Three families are supported: plain state-space models, path-dependent
(delay) models whose kernels act on history segments, and kinetic models
with a deterministic position block driven by a dissipative momentum block.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

__all__ = [
    "LinearMap",
    "ZeroInteraction",
    "LinearInteraction",
    "TanhInteraction",
    "CallableInteraction",
    "ConstantDiffusion",
    "TanhDiffusion",
    "CallableDiffusion",
    "LaggedLinearSegment",
    "CallableSegmentKernel",
    "DriftSpec",
    "DiffusionKernelSpec",
    "MeanFieldModel",
    "DelayModel",
    "HamiltonianModel",
    "sup_rate",
    "kalman_rank",
    "spectral_norm",
    "validate_dissipative",
    "validate_delay",
    "validate_hamiltonian",
    "spot_check",
    "build_model",
    "model_hash",
]

# Spot-check tolerance: relative slack plus absolute floor on every
# declared inequality, to absorb floating-point noise.
REL_SLACK = 1e-8
ABS_SLACK = 1e-12


# ---------------------------------------------------------------------------
# single-particle drift


@dataclass(frozen=True)
class LinearMap:
    """Affine map x -> A x + c, usable as a single-particle drift."""

    A: np.ndarray
    c: np.ndarray

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return x @ self.A.T + self.c

    def describe(self) -> dict:
        return {"kind": "linear_map", "A": self.A.tolist(), "c": self.c.tolist()}


def linear_restoring(a: float, d: int) -> LinearMap:
    """Drift x -> -a x (gradient of the quadratic well a|x|^2/2)."""
    return LinearMap(A=-a * np.eye(d), c=np.zeros(d))


# ---------------------------------------------------------------------------
# pair interaction kernels (drift)
#
# A kernel evaluates f(x, y) for a query point x and a measure point y and
# exposes empirical means over a point cloud.  ``pairs`` evaluates aligned
# pairs (for spot checks), ``mean_over`` averages the second argument over a
# cloud, including any query point that happens to be in the cloud (the
# empirical measure keeps the self term).  Kernels with linear structure
# additionally average in closed form against a Gaussian law through its
# mean; everything else is measure-generic.


class ZeroInteraction:
    """No pair interaction."""

    law_free = True

    def pairs(self, x, y):
        return np.zeros_like(np.asarray(x, dtype=float))

    def mean_over(self, x, cloud):
        return np.zeros_like(np.asarray(x, dtype=float))

    def mean_under_mean(self, x, law_mean):
        return np.zeros_like(np.asarray(x, dtype=float))

    def lipschitz(self) -> float:
        return 0.0

    def describe(self) -> dict:
        return {"kind": "zero"}


@dataclass(frozen=True)
class LinearInteraction:
    """Pair drift f(x, y) = B1 x + B2 y + c1."""

    B1: np.ndarray
    B2: np.ndarray
    c1: np.ndarray

    law_free = False

    def pairs(self, x, y):
        return x @ self.B1.T + y @ self.B2.T + self.c1

    def mean_over(self, x, cloud):
        # exact: the empirical average only enters through the cloud mean
        return x @ self.B1.T + np.mean(cloud, axis=0) @ self.B2.T + self.c1

    def mean_under_mean(self, x, law_mean):
        return x @ self.B1.T + law_mean @ self.B2.T + self.c1

    def lipschitz(self) -> float:
        return max(spectral_norm(self.B1), spectral_norm(self.B2))

    def describe(self) -> dict:
        return {
            "kind": "linear",
            "B1": self.B1.tolist(),
            "B2": self.B2.tolist(),
            "c1": self.c1.tolist(),
        }


@dataclass(frozen=True)
class TanhInteraction:
    """Pair drift f(x, y) = kappa * tanh(y - x), componentwise (1-d kernels).

    The empirical mean uses the tanh addition identity on precomputed
    tanh tables, which is exact in closed form and an order of magnitude
    cheaper than per-pair tanh calls; see ``_fast``.
    """

    kappa: float

    law_free = False

    def pairs(self, x, y):
        return self.kappa * np.tanh(np.asarray(y, dtype=float) - x)

    def mean_over(self, x, cloud, x_tanh=None, cloud_tanh=None):
        from . import _fast

        x = np.asarray(x, dtype=float)
        cloud = np.asarray(cloud, dtype=float)
        if x.shape[-1] != 1:
            out = np.tanh(cloud[None, :, :] - x[:, None, :]).mean(axis=1)
            return self.kappa * out
        xt = np.tanh(x[:, 0]) if x_tanh is None else x_tanh
        ct = np.tanh(cloud[:, 0]) if cloud_tanh is None else cloud_tanh
        return self.kappa * _fast.tanh_diff_mean(x[:, 0], xt, cloud[:, 0], ct)[:, None]

    def mean_over_self(self, states, states_tanh=None):
        """Empirical mean with cloud == states, via one triangular sweep."""
        from . import _fast

        states = np.asarray(states, dtype=float)
        if states.shape[-1] != 1:
            return self.mean_over(states, states)
        st = np.tanh(states[:, 0]) if states_tanh is None else states_tanh
        return self.kappa * _fast.tanh_diff_mean_self(states[:, 0], st)[:, None]

    def lipschitz(self) -> float:
        return abs(self.kappa)

    def describe(self) -> dict:
        return {"kind": "attractive_quadratic_tanh_pair", "kappa": self.kappa}


@dataclass(frozen=True)
class CallableInteraction:
    """Custom pair drift given as a broadcast-vectorized callable.

    ``func(x, y)`` must accept arrays shaped (..., d) and broadcast; it is
    evaluated pairwise in memory-bounded chunks when averaging over clouds.
    """

    func: Callable[[np.ndarray, np.ndarray], np.ndarray]
    name: str = "custom"

    law_free = False

    def pairs(self, x, y):
        return self.func(np.asarray(x, dtype=float), np.asarray(y, dtype=float))

    def mean_over(self, x, cloud):
        return _chunked_pair_mean(self.func, x, cloud)

    def lipschitz(self) -> float:
        raise NotImplementedError("custom kernels carry declared constants only")

    def describe(self) -> dict:
        return {"kind": "custom", "name": self.name}


# ---------------------------------------------------------------------------
# pair diffusion kernels


@dataclass(frozen=True)
class ConstantDiffusion:
    """Constant diffusion matrix, independent of both state and measure."""

    sigma: np.ndarray  # (d, n)

    law_free = True

    def pairs(self, x, y):
        x = np.asarray(x, dtype=float)
        shape = x.shape[:-1] + self.sigma.shape
        return np.broadcast_to(self.sigma, shape)

    def mean_over(self, x, cloud):
        x = np.asarray(x, dtype=float)
        return np.broadcast_to(self.sigma, (x.shape[0],) + self.sigma.shape)

    def mean_under_mean(self, x, law_mean):
        x = np.asarray(x, dtype=float)
        return np.broadcast_to(self.sigma, (x.shape[0],) + self.sigma.shape)

    def describe(self) -> dict:
        return {"kind": "constant_sigma", "sigma": self.sigma.tolist()}


@dataclass(frozen=True)
class TanhDiffusion:
    """Scalar diffusion kernel base + amp * tanh(x + y), for d = n = 1."""

    base: float
    amp: float

    law_free = False

    def pairs(self, x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        vals = self.base + self.amp * np.tanh(x[..., 0] + y[..., 0])
        return vals[..., None, None]

    def mean_over(self, x, cloud, x_tanh=None, cloud_tanh=None):
        from . import _fast

        x = np.asarray(x, dtype=float)
        cloud = np.asarray(cloud, dtype=float)
        xt = np.tanh(x[:, 0]) if x_tanh is None else x_tanh
        ct = np.tanh(cloud[:, 0]) if cloud_tanh is None else cloud_tanh
        vals = self.base + self.amp * _fast.tanh_sum_mean(x[:, 0], xt, cloud[:, 0], ct)
        return vals[:, None, None]

    def mean_over_self(self, states, states_tanh=None):
        from . import _fast

        states = np.asarray(states, dtype=float)
        st = np.tanh(states[:, 0]) if states_tanh is None else states_tanh
        vals = self.base + self.amp * _fast.tanh_sum_mean_self(states[:, 0], st)
        return vals[:, None, None]

    def describe(self) -> dict:
        return {"kind": "kernel_sigma", "base": self.base, "amp": self.amp}


@dataclass(frozen=True)
class CallableDiffusion:
    """Custom pair diffusion callable, (..., d) x (..., d) -> (..., d, n)."""

    func: Callable[[np.ndarray, np.ndarray], np.ndarray]
    name: str = "custom"

    law_free = False

    def pairs(self, x, y):
        return self.func(np.asarray(x, dtype=float), np.asarray(y, dtype=float))

    def mean_over(self, x, cloud):
        return _chunked_pair_mean(self.func, x, cloud)

    def describe(self) -> dict:
        return {"kind": "custom", "name": self.name}


def _chunked_pair_mean(func, x, cloud, max_elems: int = 4_000_000):
    """mean_j func(x_i, cloud_j) with pairwise chunks of bounded size."""
    x = np.asarray(x, dtype=float)
    cloud = np.asarray(cloud, dtype=float)
    P, M = x.shape[0], cloud.shape[0]
    block = max(1, max_elems // max(M, 1))
    outs = []
    for lo in range(0, P, block):
        xb = x[lo : lo + block]
        vals = func(xb[:, None, :], cloud[None, :, :])
        outs.append(vals.mean(axis=1))
    return np.concatenate(outs, axis=0)


# ---------------------------------------------------------------------------
# segment kernels (delay and kinetic models)


@dataclass(frozen=True)
class LaggedLinearSegment:
    """Segment pair kernel beta * (eta_comp(-lag_other) - xi_comp(-lag_query)).

    ``components`` selects a coordinate block (kinetic models interact
    through the momentum block); lags are in time units and must sit on the
    integration grid.  The kernel is mean-field reducible: the empirical
    average over a segment cloud only needs the cloud mean of the lagged
    tap, which is what makes long-horizon frozen-law runs affordable.
    """

    beta: float
    lag_query: float = 0.0
    lag_other: float = 0.0
    components: Optional[slice] = None

    law_free = False
    reducible = True

    def _comp(self, tap):
        return tap if self.components is None else tap[..., self.components]

    def tap_lags(self):
        return (self.lag_query, self.lag_other)

    def cloud_stats(self, other_taps: np.ndarray) -> np.ndarray:
        """Sufficient statistic of a segment cloud: mean lagged tap."""
        return self._comp(other_taps).mean(axis=0)

    def mean_from_stats(self, query_taps: np.ndarray, stats: np.ndarray) -> np.ndarray:
        return self.beta * (stats - self._comp(query_taps))

    def pairs(self, segs_x: np.ndarray, segs_y: np.ndarray, grid_lag_x: int, grid_lag_y: int):
        """Aligned evaluation on time-ordered segments (..., L+1, d)."""
        qx = self._comp(segs_x[..., segs_x.shape[-2] - 1 - grid_lag_x, :])
        qy = self._comp(segs_y[..., segs_y.shape[-2] - 1 - grid_lag_y, :])
        return self.beta * (qy - qx)

    def lipschitz(self) -> float:
        return abs(self.beta)

    def describe(self) -> dict:
        comp = None
        if self.components is not None:
            comp = [self.components.start, self.components.stop]
        return {
            "kind": "lagged_linear",
            "beta": self.beta,
            "lag_query": self.lag_query,
            "lag_other": self.lag_other,
            "components": comp,
        }


@dataclass(frozen=True)
class CallableSegmentKernel:
    """Custom segment pair kernel on time-ordered segments (..., L+1, d)."""

    func: Callable[[np.ndarray, np.ndarray], np.ndarray]
    name: str = "custom"

    law_free = False
    reducible = False

    def pairs(self, segs_x, segs_y):
        return self.func(segs_x, segs_y)

    def mean_over(self, segs_x, cloud_segs, max_elems: int = 4_000_000):
        P = segs_x.shape[0]
        M = cloud_segs.shape[0]
        per = cloud_segs.shape[-2] * cloud_segs.shape[-1]
        block = max(1, max_elems // max(M * per, 1))
        outs = []
        for lo in range(0, P, block):
            xb = segs_x[lo : lo + block]
            vals = self.func(xb[:, None], cloud_segs[None, :])
            outs.append(vals.mean(axis=1))
        return np.concatenate(outs, axis=0)

    def describe(self) -> dict:
        return {"kind": "custom_segment", "name": self.name}


# ---------------------------------------------------------------------------
# model containers


@dataclass(frozen=True)
class DriftSpec:
    """Drift split b(x, mu) = b0(x) + mean_mu b1(x, .) with declared constants.

    K_b bounds the Lipschitz behaviour of both parts on the finite horizon;
    K1 is the dissipativity rate of b0 (2<b0(x)-b0(y), x-y> <= -K1 |x-y|^2)
    and K2 the interaction Lipschitz bound used by the long-time theory.
    """

    b0: Callable[[np.ndarray], np.ndarray]
    b1: object
    K_b: float
    K1: float = 0.0
    K2: float = 0.0
    b0_modulus: str = "lipschitz"  # metadata only; built-ins are Lipschitz


@dataclass(frozen=True)
class DiffusionKernelSpec:
    """Pair diffusion kernel with Lipschitz constant and ellipticity band.

    K_sigma bounds ||sigma~(x,y) - sigma~(x',y')||_HS by K_sigma(|x-x'|+|y-y'|);
    when ``delta`` is finite the assembled sigma sigma* must have eigenvalues
    in [1/delta, delta].  ``distribution_free`` marks kernels that ignore y,
    which is what the entropy-route results require.
    """

    sigma_tilde: object
    K_sigma: float
    delta: float = math.inf
    distribution_free: bool = False


@dataclass(frozen=True)
class MeanFieldModel:
    """State-space mean-field model on R^d driven by n-dimensional noise."""

    d: int
    n: int
    drift: DriftSpec
    diffusion: DiffusionKernelSpec
    regime: str = "finite_time"  # "finite_time" | "dissipative"
    config: Optional[dict] = None

    def __post_init__(self):
        if self.regime not in ("finite_time", "dissipative"):
            raise ValueError(f"unknown regime {self.regime!r}")

    def describe(self) -> dict:
        b0 = self.drift.b0
        b0d = b0.describe() if hasattr(b0, "describe") else {"kind": "custom"}
        return {
            "family": "meanfield",
            "d": self.d,
            "n": self.n,
            "regime": self.regime,
            "b0": b0d,
            "b1": self.drift.b1.describe(),
            "sigma": self.diffusion.sigma_tilde.describe(),
            "K_b": self.drift.K_b,
            "K1": self.drift.K1,
            "K2": self.drift.K2,
            "K_sigma": self.diffusion.K_sigma,
            "delta": self.diffusion.delta,
        }


@dataclass(frozen=True)
class DelayModel:
    """Path-dependent model: state drift plus segment-kernel interaction.

    K_b is the dissipativity rate of the state drift b; K_B bounds the
    segment interaction in sup-norm; K_sigma bounds the squared HS modulus
    of the segment diffusion kernel.  r0 must be an exact multiple of dt at
    run time (grid_lag = r0/dt is enforced by the integrator).
    """

    d: int
    n: int
    r0: float
    b: Callable[[np.ndarray], np.ndarray]
    B_tilde: object
    sigma_tilde: object
    K_b: float
    K_B: float
    K_sigma: float
    config: Optional[dict] = None

    def describe(self) -> dict:
        bd = self.b.describe() if hasattr(self.b, "describe") else {"kind": "custom"}
        return {
            "family": "delay",
            "d": self.d,
            "n": self.n,
            "r0": self.r0,
            "b": bd,
            "B": self.B_tilde.describe(),
            "sigma": self.sigma_tilde.describe(),
            "K_b": self.K_b,
            "K_B": self.K_B,
            "K_sigma": self.K_sigma,
        }


@dataclass(frozen=True)
class HamiltonianModel:
    """Kinetic model: positions driven by A x1 + M x2, momenta by b + B + noise.

    K_A and K1 are the dissipativity rates of the position matrix A and the
    momentum drift b, K2 the Lipschitz bound of b, K_B the segment
    interaction bound.  sigma is a constant d x d matrix with sigma sigma*
    invertible.
    """

    m: int
    d: int
    A: np.ndarray
    M: np.ndarray
    b: Callable[[np.ndarray], np.ndarray]
    B_tilde: object
    sigma: np.ndarray
    r0: float = 0.0
    K_A: float = 0.0
    K1: float = 0.0
    K2: float = 0.0
    K_B: float = 0.0
    config: Optional[dict] = None

    def describe(self) -> dict:
        bd = self.b.describe() if hasattr(self.b, "describe") else {"kind": "custom"}
        return {
            "family": "hamiltonian",
            "m": self.m,
            "d": self.d,
            "A": self.A.tolist(),
            "M": self.M.tolist(),
            "b": bd,
            "B": self.B_tilde.describe(),
            "sigma": self.sigma.tolist(),
            "r0": self.r0,
            "K_A": self.K_A,
            "K1": self.K1,
            "K2": self.K2,
            "K_B": self.K_B,
        }


# ---------------------------------------------------------------------------
# closed-form rate helpers


def sup_rate(K: float, r0: float) -> float:
    """Maximum of v * exp(-v r0) over v in [0, K].

    The maximizer of v e^{-v r0} is v = 1/r0, so the supremum is attained
    at the interior point when K exceeds it and at the endpoint otherwise:

    - r0 == 0 or K <= 1/r0:  K * exp(-K r0)
    - otherwise:             1 / (e * r0)

    Parameters
    ----------
    K : float
        Upper end of the admissible rate interval, >= 0.
    r0 : float
        Delay horizon, >= 0.
    """
    if K < 0 or r0 < 0:
        raise ValueError("sup_rate requires K >= 0 and r0 >= 0")
    if r0 == 0.0 or K <= 1.0 / r0:
        return K * math.exp(-K * r0)
    return 1.0 / (math.e * r0)


def kalman_rank(A: np.ndarray, M: np.ndarray) -> int:
    """Rank of the controllability matrix [M, AM, ..., A^{m-1} M].

    Powers beyond m-1 add nothing by Cayley-Hamilton.  The rank is the
    numerical rank (singular values above numpy's default tolerance).

    Parameters
    ----------
    A : (m, m) array
    M : (m, d) array
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    M = np.asarray(M, dtype=float)
    if M.ndim == 1:
        M = M[:, None]
    m = A.shape[0]
    if A.shape != (m, m) or M.shape[0] != m:
        raise ValueError(f"dimension mismatch: A {A.shape}, M {M.shape}")
    blocks = [M]
    for _ in range(m - 1):
        blocks.append(A @ blocks[-1])
    ctrb = np.hstack(blocks)
    return int(np.linalg.matrix_rank(ctrb))


def spectral_norm(M: np.ndarray, tol: float = 1e-10, max_iter: int = 20000) -> float:
    """Largest singular value of M by power iteration on M* M.

    Deterministic start vector; iterates until the Rayleigh quotient is
    stable to relative ``tol``.
    """
    M = np.atleast_2d(np.asarray(M, dtype=float))
    if not np.any(M):
        return 0.0
    k = M.shape[1]
    v = np.ones(k) + np.arange(k) / max(k, 1)  # breaks symmetric-start stalls
    v /= np.linalg.norm(v)
    lam = 0.0
    for _ in range(max_iter):
        w = M.T @ (M @ v)
        nw = np.linalg.norm(w)
        if nw == 0.0:
            return 0.0
        v_new = w / nw
        lam_new = float(v_new @ (M.T @ (M @ v_new)))
        if abs(lam_new - lam) <= tol * max(abs(lam_new), 1.0):
            return math.sqrt(max(lam_new, 0.0))
        lam, v = lam_new, v_new
    return math.sqrt(max(lam, 0.0))


# ---------------------------------------------------------------------------
# validators


@dataclass(frozen=True)
class DissipativeValidation:
    passed: bool
    margin: float  # K1 - 8 K2
    rate: float  # (K1 - 8 K2) / 2, the coupling contraction rate
    K1: float
    K2: float

    def as_dict(self) -> dict:
        return {
            "passed": self.passed,
            "margin": self.margin,
            "rate": self.rate,
            "K1": self.K1,
            "K2": self.K2,
        }


def validate_dissipative(model: MeanFieldModel) -> DissipativeValidation:
    """Check the dissipativity threshold K1 > 8 K2 and report the rate.

    A failing threshold is a reported outcome, not an error.  The
    comparison is exact on the declared constants: no tolerance applies.
    """
    K1, K2 = model.drift.K1, model.drift.K2
    margin = K1 - 8.0 * K2
    return DissipativeValidation(
        passed=margin > 0.0, margin=margin, rate=margin / 2.0, K1=K1, K2=K2
    )


@dataclass(frozen=True)
class DelayValidation:
    passed: bool
    rate_sup: float  # sup_{v in [0, K_b]} v e^{-v r0}
    load: float  # 72 K_sigma + 8 K_B
    contraction_margin: float  # half of (rate_sup - load); drives the coupling decay
    self_contraction_margin: float  # rate_sup - (36 K_sigma + 8 K_B)
    decay_rate: float  # e^{K_b r0} * contraction_margin

    def as_dict(self) -> dict:
        return {
            "passed": self.passed,
            "rate_sup": self.rate_sup,
            "load": self.load,
            "contraction_margin": self.contraction_margin,
            "self_contraction_margin": self.self_contraction_margin,
            "decay_rate": self.decay_rate,
        }


def validate_delay(model: DelayModel) -> DelayValidation:
    """Evaluate the delay admissibility threshold and both decay margins."""
    rate = sup_rate(model.K_b, model.r0)
    load = 72.0 * model.K_sigma + 8.0 * model.K_B
    lam = 0.5 * (rate - load)
    lam_self = rate - (36.0 * model.K_sigma + 8.0 * model.K_B)
    return DelayValidation(
        passed=load < rate,
        rate_sup=rate,
        load=load,
        contraction_margin=lam,
        self_contraction_margin=lam_self,
        decay_rate=math.exp(model.K_b * model.r0) * lam,
    )


@dataclass(frozen=True)
class HamiltonianValidation:
    passed: bool  # threshold and rank both hold
    threshold_ok: bool
    rate_sup: float  # sup over [0, min(K1, K_A)]
    load: float  # 4 K_B + 2 ||M||
    contraction_margin: float
    m_norm: float
    rank: int
    rank_ok: bool

    def as_dict(self) -> dict:
        return {
            "passed": self.passed,
            "threshold_ok": self.threshold_ok,
            "rate_sup": self.rate_sup,
            "load": self.load,
            "contraction_margin": self.contraction_margin,
            "m_norm": self.m_norm,
            "rank": self.rank,
            "rank_ok": self.rank_ok,
        }


def validate_hamiltonian(model: HamiltonianModel) -> HamiltonianValidation:
    """Evaluate the kinetic admissibility threshold and the rank condition."""
    m_norm = spectral_norm(model.M)
    rate = sup_rate(min(model.K1, model.K_A), model.r0)
    load = 4.0 * model.K_B + 2.0 * m_norm
    rank = kalman_rank(model.A, model.M)
    rank_ok = rank == model.m
    threshold_ok = load < rate
    return HamiltonianValidation(
        passed=threshold_ok and rank_ok,
        threshold_ok=threshold_ok,
        rate_sup=rate,
        load=load,
        contraction_margin=0.5 * (rate - load),
        m_norm=m_norm,
        rank=rank,
        rank_ok=rank_ok,
    )


# ---------------------------------------------------------------------------
# random spot checks of the declared constants


@dataclass
class SpotCheckReport:
    ok: bool
    checks: dict = field(default_factory=dict)  # name -> worst slack-adjusted violation

    def as_dict(self) -> dict:
        return {"ok": self.ok, "checks": self.checks}


def _violation(lhs: np.ndarray, rhs: np.ndarray) -> float:
    """Worst violation of lhs <= rhs after slack; <= 0 means satisfied."""
    slack = REL_SLACK * np.abs(rhs) + ABS_SLACK
    return float(np.max(lhs - rhs - slack, initial=-np.inf))

def _norm(v):
    return np.sqrt(np.sum(np.asarray(v) ** 2, axis=-1))


def spot_check(model, n_samples: int = 10_000, box: float = 3.0, seed: int = 0) -> SpotCheckReport:
    """Spot-check the declared constants on random samples from a box.

    Declared constants are trusted globally; this only guards against
    obviously inconsistent declarations.  All inequalities carry the
    standard relative-plus-absolute slack.
    """
    if isinstance(model, MeanFieldModel):
        return _spot_check_mean_field(model, n_samples, box, seed)
    if isinstance(model, DelayModel):
        return _spot_check_delay(model, n_samples, box, seed)
    if isinstance(model, HamiltonianModel):
        return _spot_check_hamiltonian(model, n_samples, box, seed)
    raise TypeError(f"unsupported model type {type(model)!r}")


def _spot_check_mean_field(model, n_samples, box, seed) -> SpotCheckReport:
    rng = np.random.default_rng(seed)
    d = model.d
    x, xt, y, yt = (rng.uniform(-box, box, size=(n_samples, d)) for _ in range(4))
    checks = {}

    drift = model.drift
    b0x, b0xt = drift.b0(x), drift.b0(xt)
    checks["b0_lipschitz"] = _violation(_norm(b0x - b0xt), drift.K_b * _norm(x - xt))
    if drift.K1 > 0.0:
        lhs = 2.0 * np.sum((b0x - b0xt) * (x - xt), axis=-1)
        checks["b0_dissipative"] = _violation(lhs, -drift.K1 * _norm(x - xt) ** 2)

    b1 = drift.b1
    db1 = _norm(b1.pairs(x, y) - b1.pairs(xt, yt))
    pair_dist = _norm(x - xt) + _norm(y - yt)
    k_pair = max(drift.K_b, drift.K2) if model.regime == "dissipative" else drift.K_b
    checks["b1_lipschitz"] = _violation(db1, k_pair * pair_dist)

    sig = model.diffusion.sigma_tilde
    ds = sig.pairs(x, y) - sig.pairs(xt, yt)
    hs = np.sqrt(np.sum(ds**2, axis=(-2, -1)))
    if model.regime == "dissipative":
        if drift.K2 > 0.0 or not np.any(hs):
            checks["sigma_sq_lipschitz"] = _violation(
                hs**2, drift.K2 * (_norm(x - xt) ** 2 + _norm(y - yt) ** 2)
            )
    checks["sigma_lipschitz"] = _violation(hs, model.diffusion.K_sigma * pair_dist)

    if np.isfinite(model.diffusion.delta):
        checks["ellipticity"] = _ellipticity_violation(model, rng, box)

    ok = all(v <= 0.0 for v in checks.values())
    return SpotCheckReport(ok=ok, checks=checks)


def _ellipticity_violation(model, rng, box, n_clouds: int = 64, cloud_size: int = 16) -> float:
    # sigma sigma* assembled at sampled empirical measures; eigenvalues must
    # stay inside [1/delta, delta]
    delta = model.diffusion.delta
    worst = -np.inf
    for _ in range(n_clouds):
        xq = rng.uniform(-box, box, size=(8, model.d))
        cloud = rng.uniform(-box, box, size=(cloud_size, model.d))
        sig = model.diffusion.sigma_tilde.mean_over(xq, cloud)  # (8, d, n)
        gram = np.einsum("pij,pkj->pik", sig, sig)
        eigs = np.linalg.eigvalsh(gram)
        worst = max(worst, _violation(eigs.max(), delta))
        worst = max(worst, _violation(1.0 / delta, eigs.min()))
    return float(worst)


def _random_segments(rng, count, steps, d, box):
    # piecewise-random segments on the grid, plus the constant segments that
    # exercise the degenerate case
    segs = rng.uniform(-box, box, size=(count, steps + 1, d))
    segs[: count // 4] = segs[: count // 4, :1, :]
    return segs


def _seg_sup_dist(a, b):
    return np.max(_norm(a - b), axis=-1)


def _spot_check_delay(model, n_samples, box, seed) -> SpotCheckReport:
    rng = np.random.default_rng(seed)
    d = model.d
    n_samples = min(n_samples, 4000)  # segment evaluation is heavier per sample
    steps = 8  # representation grid for the check; kernels must be grid-free
    x, xt = (rng.uniform(-box, box, size=(n_samples, d)) for _ in range(2))
    checks = {}

    bx, bxt = model.b(x), model.b(xt)
    lhs = 2.0 * np.sum((bx - bxt) * (x - xt), axis=-1)
    checks["b_dissipative"] = _violation(lhs, -model.K_b * _norm(x - xt) ** 2)

    sx, sxt, sy, syt = (_random_segments(rng, n_samples, steps, d, box) for _ in range(4))
    sup_x, sup_y = _seg_sup_dist(sx, sxt), _seg_sup_dist(sy, syt)

    dB = _norm(_eval_segment_pairs(model.B_tilde, sx, sy, model.r0, steps)
               - _eval_segment_pairs(model.B_tilde, sxt, syt, model.r0, steps))
    checks["B_lipschitz"] = _violation(dB, model.K_B * (sup_x + sup_y))

    dS = (_eval_segment_pairs(model.sigma_tilde, sx, sy, model.r0, steps)
          - _eval_segment_pairs(model.sigma_tilde, sxt, syt, model.r0, steps))
    hs_sq = np.sum(dS**2, axis=(-2, -1))
    if model.K_sigma > 0.0 or not np.any(hs_sq):
        checks["sigma_sq_lipschitz"] = _violation(hs_sq, model.K_sigma * (sup_x**2 + sup_y**2))

    ok = all(v <= 0.0 for v in checks.values())
    return SpotCheckReport(ok=ok, checks=checks)


def _eval_segment_pairs(kernel, segs_x, segs_y, r0, steps):
    if isinstance(kernel, ConstantDiffusion):
        return kernel.pairs(segs_x[:, -1, :], segs_y[:, -1, :])
    if isinstance(kernel, LaggedLinearSegment):
        lag_q, lag_o = kernel.tap_lags()
        gx = int(round(lag_q / r0 * steps)) if r0 > 0 else 0
        gy = int(round(lag_o / r0 * steps)) if r0 > 0 else 0
        return kernel.pairs(segs_x, segs_y, gx, gy)
    return kernel.pairs(segs_x, segs_y)


def _spot_check_hamiltonian(model, n_samples, box, seed) -> SpotCheckReport:
    rng = np.random.default_rng(seed)
    checks = {}

    x, xt = (rng.uniform(-box, box, size=(n_samples, model.m)) for _ in range(2))
    lhs = 2.0 * np.sum(((x - xt) @ model.A.T) * (x - xt), axis=-1)
    checks["A_dissipative"] = _violation(lhs, -model.K_A * _norm(x - xt) ** 2)

    y, yt = (rng.uniform(-box, box, size=(n_samples, model.d)) for _ in range(2))
    by, byt = model.b(y), model.b(yt)
    lhs = 2.0 * np.sum((by - byt) * (y - yt), axis=-1)
    checks["b_dissipative"] = _violation(lhs, -model.K1 * _norm(y - yt) ** 2)
    checks["b_lipschitz"] = _violation(_norm(by - byt), model.K2 * _norm(y - yt))

    # sigma sigma* invertibility: smallest singular value bounded away from 0
    smin = float(np.linalg.svd(model.sigma, compute_uv=False).min())
    checks["sigma_invertible"] = 0.0 if smin > 1e-12 else 1.0

    steps = 8
    sx, sxt, sy, syt = (
        _random_segments(rng, min(n_samples, 4000), steps, model.m + model.d, box)
        for _ in range(4)
    )
    dB = _norm(_eval_segment_pairs(model.B_tilde, sx, sy, max(model.r0, 1.0), steps)
               - _eval_segment_pairs(model.B_tilde, sxt, syt, max(model.r0, 1.0), steps))
    checks["B_lipschitz"] = _violation(dB, model.K_B * (_seg_sup_dist(sx, sxt) + _seg_sup_dist(sy, syt)))

    ok = all(v <= 0.0 for v in checks.values())
    return SpotCheckReport(ok=ok, checks=checks)


# ---------------------------------------------------------------------------
# config-driven construction


def _as_matrix(val, rows, cols, name):
    arr = np.asarray(val, dtype=float)
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
    if arr.ndim == 1:
        arr = arr.reshape(rows, cols) if arr.size == rows * cols else arr[:, None]
    if arr.shape != (rows, cols):
        raise ValueError(f"{name} must be {rows}x{cols}, got {arr.shape}")
    return arr


def _as_vector(val, size, name):
    arr = np.asarray(val, dtype=float).reshape(-1)
    if arr.size == 1 and size > 1:
        arr = np.full(size, arr[0])
    if arr.size != size:
        raise ValueError(f"{name} must have length {size}, got {arr.size}")
    return arr


_REQUIRED = object()


def _take(cfg: dict, section: str, keys: dict):
    """Extract keys with defaults; unknown keys are a hard error."""
    unknown = set(cfg) - set(keys)
    if unknown:
        raise ValueError(f"unknown keys in [{section}]: {sorted(unknown)}")
    out = {}
    for key, default in keys.items():
        if key in cfg:
            out[key] = cfg[key]
        elif default is _REQUIRED:
            raise ValueError(f"missing required key '{key}' in [{section}]")
        else:
            out[key] = default
    return out


def _build_drift_kernel(cfg: dict, d: int):
    kind = cfg.get("kind")
    if kind == "linear":
        c = _take(cfg, "model.drift", {
            "kind": _REQUIRED, "A0": _REQUIRED, "c0": 0.0,
            "B1": 0.0, "B2": 0.0, "c1": 0.0,
            "K_b": _REQUIRED, "K1": 0.0, "K2": 0.0,
        })
        b0 = LinearMap(_as_matrix(c["A0"], d, d, "A0"), _as_vector(c["c0"], d, "c0"))
        B1 = _as_matrix(c["B1"], d, d, "B1")
        B2 = _as_matrix(c["B2"], d, d, "B2")
        c1 = _as_vector(c["c1"], d, "c1")
        if not (np.any(B1) or np.any(B2) or np.any(c1)):
            b1 = ZeroInteraction()
        else:
            b1 = LinearInteraction(B1, B2, c1)
        return DriftSpec(b0=b0, b1=b1, K_b=c["K_b"], K1=c["K1"], K2=c["K2"])
    if kind == "attractive_quadratic_tanh":
        c = _take(cfg, "model.drift", {
            "kind": _REQUIRED, "a": _REQUIRED, "kappa": _REQUIRED,
            "K_b": _REQUIRED, "K1": 0.0, "K2": 0.0,
        })
        return DriftSpec(
            b0=linear_restoring(c["a"], d),
            b1=TanhInteraction(c["kappa"]),
            K_b=c["K_b"], K1=c["K1"], K2=c["K2"],
        )
    raise ValueError(f"unknown drift kind {kind!r}")


def _build_diffusion_kernel(cfg: dict, d: int, n: int):
    kind = cfg.get("kind")
    if kind == "constant_sigma":
        c = _take(cfg, "model.diffusion", {
            "kind": _REQUIRED, "sigma": _REQUIRED, "K_sigma": 0.0, "delta": math.inf,
        })
        sig = ConstantDiffusion(_as_matrix(c["sigma"], d, n, "sigma"))
        return DiffusionKernelSpec(sig, K_sigma=c["K_sigma"], delta=c["delta"],
                                   distribution_free=True)
    if kind == "kernel_sigma":
        c = _take(cfg, "model.diffusion", {
            "kind": _REQUIRED, "base": _REQUIRED, "amp": _REQUIRED,
            "K_sigma": _REQUIRED, "delta": math.inf,
        })
        if d != 1 or n != 1:
            raise ValueError("kernel_sigma supports d = n = 1 only")
        return DiffusionKernelSpec(TanhDiffusion(c["base"], c["amp"]),
                                   K_sigma=c["K_sigma"], delta=c["delta"],
                                   distribution_free=False)
    raise ValueError(f"unknown diffusion kind {kind!r}")


def build_model(cfg: dict):
    """Build a model from a parsed config mapping (the [model] table)."""
    family = cfg.get("family")
    if family == "meanfield":
        c = _take(cfg, "model", {
            "family": _REQUIRED, "d": _REQUIRED, "n": _REQUIRED,
            "regime": "finite_time", "drift": _REQUIRED, "diffusion": _REQUIRED,
        })
        drift = _build_drift_kernel(dict(c["drift"]), c["d"])
        diffusion = _build_diffusion_kernel(dict(c["diffusion"]), c["d"], c["n"])
        return MeanFieldModel(d=c["d"], n=c["n"], drift=drift,
                              diffusion=diffusion, regime=c["regime"], config=cfg)
    if family == "delay":
        c = _take(cfg, "model", {
            "family": _REQUIRED, "d": _REQUIRED, "n": _REQUIRED, "r0": _REQUIRED,
            "b": _REQUIRED, "B": _REQUIRED, "sigma": _REQUIRED,
            "K_b": _REQUIRED, "K_B": _REQUIRED, "K_sigma": _REQUIRED,
        })
        b_cfg = _take(dict(c["b"]), "model.b", {"kind": _REQUIRED, "a": _REQUIRED})
        if b_cfg["kind"] != "linear":
            raise ValueError("delay state drift supports kind = 'linear'")
        b = linear_restoring(b_cfg["a"], c["d"])
        B_cfg = _take(dict(c["B"]), "model.B", {
            "kind": _REQUIRED, "beta": _REQUIRED, "lag_query": 0.0, "lag_other": 0.0,
        })
        if B_cfg["kind"] != "lagged_linear":
            raise ValueError("delay interaction supports kind = 'lagged_linear'")
        B = LaggedLinearSegment(B_cfg["beta"], B_cfg["lag_query"], B_cfg["lag_other"])
        s_cfg = _take(dict(c["sigma"]), "model.sigma", {"kind": _REQUIRED, "sigma": _REQUIRED})
        if s_cfg["kind"] != "constant_sigma":
            raise ValueError("delay diffusion supports kind = 'constant_sigma'")
        sigma = ConstantDiffusion(_as_matrix(s_cfg["sigma"], c["d"], c["n"], "sigma"))
        return DelayModel(d=c["d"], n=c["n"], r0=c["r0"], b=b, B_tilde=B,
                          sigma_tilde=sigma, K_b=c["K_b"], K_B=c["K_B"],
                          K_sigma=c["K_sigma"], config=cfg)
    if family == "hamiltonian":
        c = _take(cfg, "model", {
            "family": _REQUIRED, "m": _REQUIRED, "d": _REQUIRED,
            "A": _REQUIRED, "M": _REQUIRED, "b": _REQUIRED, "B": _REQUIRED,
            "sigma": _REQUIRED, "r0": 0.0,
            "K_A": _REQUIRED, "K1": _REQUIRED, "K2": _REQUIRED, "K_B": _REQUIRED,
        })
        m, d = c["m"], c["d"]
        b_cfg = _take(dict(c["b"]), "model.b", {"kind": _REQUIRED, "a": _REQUIRED})
        if b_cfg["kind"] != "linear":
            raise ValueError("kinetic momentum drift supports kind = 'linear'")
        b = linear_restoring(b_cfg["a"], d)
        B_cfg = _take(dict(c["B"]), "model.B", {
            "kind": _REQUIRED, "beta": _REQUIRED, "lag_query": 0.0, "lag_other": 0.0,
        })
        if B_cfg["kind"] != "lagged_linear":
            raise ValueError("kinetic interaction supports kind = 'lagged_linear'")
        B = LaggedLinearSegment(B_cfg["beta"], B_cfg["lag_query"], B_cfg["lag_other"],
                                components=slice(m, m + d))
        return HamiltonianModel(
            m=m, d=d,
            A=_as_matrix(c["A"], m, m, "A"),
            M=_as_matrix(c["M"], m, d, "M"),
            b=b, B_tilde=B,
            sigma=_as_matrix(c["sigma"], d, d, "sigma"),
            r0=c["r0"], K_A=c["K_A"], K1=c["K1"], K2=c["K2"], K_B=c["K_B"],
            config=cfg,
        )
    raise ValueError(f"unknown model family {family!r}")


def model_hash(model) -> str:
    """Stable hash of the model's declared structure and constants."""
    payload = json.dumps(model.describe(), sort_keys=True).encode()
    return hashlib.sha256(payload).hexdigest()[:16]
