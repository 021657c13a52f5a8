"""High-probability recovery error bound and its sparse specialization.

The per-sample squared-error bound for the codebook-constrained ML recovery
is rho1 * sqrt((1+eps) n r / m) + rho2 * x_max^2 * delta, with constants
determined by the aspect ratio m/n and the dynamic range x_max/x_min.  The
constants are astronomically loose at desk scale; the point of the empirical
check is that observed errors must never exceed the bound on conforming runs.
"""

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class BoundInputs:
    """Inputs to the recovery bound; requires the m < n/4 hypothesis."""

    m: int
    n: int
    x_min: float
    x_max: float
    rate: float  # bits per sample
    distortion: float  # per-sample squared error of the code
    epsilon: float

    def __post_init__(self):
        if not self.m < self.n / 4:
            raise ValueError(f"bound hypothesis violated: m={self.m} >= n/4={self.n / 4}")
        if not 0 < self.x_min <= self.x_max:
            raise ValueError("need 0 < x_min <= x_max")
        if self.rate < 0 or self.distortion < 0:
            raise ValueError("rate and distortion must be nonnegative")
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")


@dataclass(frozen=True)
class BoundOutputs:
    """Constants and both probability forms of the recovery bound.

    The probability expression can go negative at small sizes; the raw value
    is kept alongside the clamped one so vacuity is visible.
    """

    gamma: float
    alpha: float
    rho1: float
    rho2: float
    mse_bound: float
    failure_probability_bound: float  # raw sum of the four failure terms
    success_probability_raw: float
    success_probability: float  # clamped into [0, 1]

    @property
    def clamped(self):
        return self.success_probability != self.success_probability_raw


def _log1p_prod(alpha, gamma):
    """log(1 + 2 alpha^2 gamma), robust to overflow of the product."""
    log_term = math.log(2.0) + 2.0 * math.log(alpha) + math.log(gamma)
    if log_term > 700.0:
        return log_term
    return math.log1p(math.exp(log_term))


def bound_constants(m, n, x_min, x_max):
    """(gamma, alpha, rho1, rho2) for the recovery bound.

    gamma = ((1 + 2 sqrt(m/n)) / (1 - 2 sqrt(m/n)))^2 and alpha is the
    dynamic range; rho1 and rho2 fall back to log-space evaluation when the
    plain products overflow.
    """
    ratio = math.sqrt(m / n)
    if 1.0 - 2.0 * ratio <= 0:
        raise ValueError(f"bound hypothesis violated: m={m} >= n/4={n / 4}")
    gamma = ((1.0 + 2.0 * ratio) / (1.0 - 2.0 * ratio)) ** 2
    alpha = x_max / x_min

    bracket = 1.0 + 2.0 * alpha**2 * gamma
    rho1 = 4.0 * math.sqrt(2.0) * alpha**8 * gamma**5 * bracket**2 * (1.0 + 2.0 * ratio) ** 2
    rho2 = bracket**2 * gamma**7 * alpha**14
    if not math.isfinite(rho1):
        log_rho1 = (
            math.log(4.0 * math.sqrt(2.0))
            + 8.0 * math.log(alpha)
            + 5.0 * math.log(gamma)
            + 2.0 * _log1p_prod(alpha, gamma)
            + 2.0 * math.log(1.0 + 2.0 * ratio)
        )
        rho1 = math.exp(log_rho1) if log_rho1 < 709.0 else math.inf
    if not math.isfinite(rho2):
        log_rho2 = 2.0 * _log1p_prod(alpha, gamma) + 7.0 * math.log(gamma) + 14.0 * math.log(alpha)
        rho2 = math.exp(log_rho2) if log_rho2 < 709.0 else math.inf
    return gamma, alpha, rho1, rho2


def _failure_terms(m, n, rate, epsilon):
    return (
        n * math.exp(-0.09 * m)
        + n * math.exp(-0.84 * m)
        + 2.0 ** (-n * rate * epsilon + 1.0)
        + 2.0 * math.exp(-m / 2.0)
    )


def recovery_bound(inputs):
    """Evaluate the per-sample MSE bound and its probability expression."""
    gamma, alpha, rho1, rho2 = bound_constants(inputs.m, inputs.n, inputs.x_min, inputs.x_max)
    mse_bound = (
        rho1 * math.sqrt((1.0 + inputs.epsilon) * inputs.n * inputs.rate / inputs.m)
        + rho2 * inputs.x_max**2 * inputs.distortion
    )
    failure = _failure_terms(inputs.m, inputs.n, inputs.rate, inputs.epsilon)
    raw = 1.0 - failure
    return BoundOutputs(
        gamma=gamma,
        alpha=alpha,
        rho1=rho1,
        rho2=rho2,
        mse_bound=mse_bound,
        failure_probability_bound=failure,
        success_probability_raw=raw,
        success_probability=min(max(raw, 0.0), 1.0),
    )


def sparse_recovery_bound(k, n, m, epsilon, x_min, x_max):
    """Specialization for codes with r(delta) <= (k/n) log2(1/delta) + (k/n) log2 n.

    Uses distortion 1/n, giving rho1 sqrt(2 (1+eps) k log2 n / m)
    + rho2 x_max^2 / n.  Equals recovery_bound at r = (2k/n) log2 n.
    """
    if k < 0:
        raise ValueError("k must be nonnegative")
    gamma, alpha, rho1, rho2 = bound_constants(m, n, x_min, x_max)
    mse_bound = (
        rho1 * math.sqrt(2.0 * (1.0 + epsilon) * k * math.log2(n) / m) + rho2 * x_max**2 / n
    )
    rate = 2.0 * k * math.log2(n) / n
    failure = _failure_terms(m, n, rate, epsilon)
    raw = 1.0 - failure
    return BoundOutputs(
        gamma=gamma,
        alpha=alpha,
        rho1=rho1,
        rho2=rho2,
        mse_bound=mse_bound,
        failure_probability_bound=failure,
        success_probability_raw=raw,
        success_probability=min(max(raw, 0.0), 1.0),
    )


@dataclass(frozen=True)
class BoundCheck:
    """Result of comparing observed per-sample errors against the bound."""

    mse_bound: float
    worst_mse: float
    slack_ratio: float  # bound / worst observed error
    all_within: bool
    trials: int


def check_empirical_bound(per_sample_errors, inputs):
    """Assert observed (1/n)||x - xhat||^2 values against the bound.

    Raises on a hypothesis violation (no check performed in that case); a
    returned all_within=False flags an implementation bug somewhere, since
    the constants dwarf any achievable error at small sizes.
    """
    errors = np.asarray(per_sample_errors, dtype=float)
    if errors.size == 0:
        raise ValueError("no trials to check")
    outputs = recovery_bound(inputs)  # validates m < n/4 via BoundInputs
    worst = float(errors.max())
    return BoundCheck(
        mse_bound=outputs.mse_bound,
        worst_mse=worst,
        slack_ratio=outputs.mse_bound / worst if worst > 0 else math.inf,
        all_within=bool(np.all(errors <= outputs.mse_bound)),
        trials=int(errors.size),
    )
