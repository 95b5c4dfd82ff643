"""Forward diffusion: covariance propagation, factorization, and sampling.

Initial covariances are block-scalar, so the time-t covariance keeps the
form (n x n matrix) x I_h for all t.  Everything is therefore computed and
factored at n x n scale and Kronecker-lifted; the full n*h x n*h covariance
is never materialized.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import HoldParams, LiftedState, expm_at, kron_apply
from .errors import NotPositiveSemidefiniteError


@dataclass(frozen=True)
class BlockCovariance:
    """Symmetric n x n covariance at block scale, stamped with its time."""

    order: int
    small: np.ndarray
    t: float

    def __post_init__(self):
        m = np.asarray(self.small, dtype=float)
        if m.shape != (self.order, self.order):
            raise ValueError(f"small must be {self.order}x{self.order}")
        if not np.allclose(m, m.T, atol=1e-12, rtol=0.0):
            raise ValueError("covariance block must be symmetric to 1e-12")
        object.__setattr__(self, "small", m)


@dataclass(frozen=True)
class FixedPerSample:
    """Auxiliaries drawn once per training sample from a seeded stream.

    Each training point keeps the same auxiliary draw for its whole life, so
    the lifted dataset is a deterministic function of (seed, sample index).
    """

    seed: int = 0


@dataclass(frozen=True)
class Marginalized:
    """Auxiliaries folded into the initial covariance; centers carry zeros."""


AuxPolicy = FixedPerSample | Marginalized


def initial_covariance(params: HoldParams, policy: AuxPolicy) -> BlockCovariance:
    """Block-scale covariance of the lifted data distribution at t = 0.

    FixedPerSample treats every lifted sample as a point mass (zero
    covariance); Marginalized keeps the position deterministic and gives each
    auxiliary block variance alpha * l_inv.
    """
    n = params.order
    small = np.zeros((n, n))
    if isinstance(policy, Marginalized):
        for i in range(1, n):
            small[i, i] = params.alpha * params.l_inv
    return BlockCovariance(order=n, small=small, t=0.0)


def covariance_at(params: HoldParams, sigma0: BlockCovariance, t: float) -> BlockCovariance:
    """Propagate the block covariance to time t in closed form.

    Sigma_t = exp(Ft) Sigma_0 exp(Ft)^T + l_inv (I - exp(Ft) exp(Ft)^T),
    the solution of dSigma/dt = F Sigma + (F Sigma)^T + G G^T.
    """
    if t < 0:
        raise ValueError(f"time must be nonnegative, got {t}")
    if sigma0.order != params.order:
        raise ValueError("covariance order does not match params order")
    n = params.order
    e = expm_at(params, t)
    small = e @ sigma0.small @ e.T + params.l_inv * (np.eye(n) - e @ e.T)
    small = 0.5 * (small + small.T)
    return BlockCovariance(order=n, small=small, t=t)


def cholesky_block(
    cov: BlockCovariance, floor: float | None = None
) -> tuple[np.ndarray, float]:
    """Lower-triangular factor of the covariance block, flooring if needed.

    Returns ``(L, delta)`` with L L^T = Sigma + delta I, where delta is 0
    when the plain factorization succeeds and otherwise the floor actually
    added.  The default floor is 1e-12 times the largest diagonal entry,
    with an absolute fallback of 1e-12 so the all-zero covariance (t = 0,
    point-mass initialization) still factors.
    """
    small = cov.small
    if floor is None:
        floor = 1e-12 * max(float(np.max(np.diag(small))), 1.0)
    try:
        return np.linalg.cholesky(small), 0.0
    except np.linalg.LinAlgError:
        pass
    try:
        shifted = small + floor * np.eye(cov.order)
        return np.linalg.cholesky(shifted), floor
    except np.linalg.LinAlgError:
        raise NotPositiveSemidefiniteError(
            f"covariance at t={cov.t} is not positive semidefinite "
            f"(flooring by {floor} did not help)"
        ) from None


def sample_forward(
    u0: LiftedState,
    params: HoldParams,
    sigma0: BlockCovariance,
    t: float,
    rng_seed,
) -> LiftedState:
    """Draw u_t = exp(Ft) u_0 + (L_t x I_h) eps with eps ~ N(0, I_{nh}).

    Deterministic for a fixed ``rng_seed``.  A covariance that is exactly
    zero yields the mean with no noise consumed.
    """
    if t < 0:
        raise ValueError(f"time must be nonnegative, got {t}")
    n, h = params.order, u0.block_dim
    if u0.order != n:
        raise ValueError("state order does not match params order")
    e = expm_at(params, t)
    mean = kron_apply(e, u0.data, h)
    cov = covariance_at(params, sigma0, t)
    if not cov.small.any():
        return LiftedState(n, h, mean)
    factor, _ = cholesky_block(cov)
    eps = np.random.default_rng(rng_seed).standard_normal(n * h)
    return LiftedState(n, h, mean + kron_apply(factor, eps, h))


def lift_data(
    x0: np.ndarray,
    params: HoldParams,
    policy: AuxPolicy,
    rng_seed: int | None = None,
    index: int = 0,
) -> LiftedState:
    """Lift a data point into R^{n*h} according to the auxiliary policy.

    Marginalized sets the auxiliaries to their mean 0 (their variance lives
    in the initial covariance).  FixedPerSample draws them once from
    N(0, alpha * l_inv I) with a stream derived from (seed, index), so the
    same sample always receives the same auxiliaries; ``rng_seed`` defaults
    to the policy's own seed.
    """
    x0 = np.asarray(x0, dtype=float).reshape(-1)
    n, h = params.order, x0.shape[0]
    data = np.zeros(n * h)
    data[:h] = x0
    if isinstance(policy, FixedPerSample) and n > 1:
        seed = policy.seed if rng_seed is None else rng_seed
        rng = np.random.default_rng([seed, index])
        scale = math.sqrt(params.alpha * params.l_inv)
        data[h:] = scale * rng.standard_normal((n - 1) * h)
    return LiftedState(n, h, data)
