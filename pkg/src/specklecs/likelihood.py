"""Negative log-likelihood of measurements under multiplicative noise.

Three regimes are covered: the vanishing-additive-noise limit for m < n
(the objective every solver minimizes), the finite additive-noise form, and
the overdetermined m > n reduction.  All matrix inverses are replaced by
SPD factorizations and solves; log-determinants come off the factor diagonal.

Additive constants that do not depend on x are dropped consistently within
each objective, so values from different objectives must never be compared
against each other -- only differences across x within one objective are
meaningful.
"""

import numpy as np
import scipy.linalg as sla

from .measurement import Signal

# Relative pivot floor: a factorization whose smallest pivot falls below
# this fraction of the largest is treated as singular so solvers backtrack
# instead of consuming garbage.
PIVOT_RTOL = 1e-12


class SingularObjectiveError(Exception):
    """The objective's SPD matrix is singular (or nearly so) at this x."""


class ObjectiveContext:
    """Immutable bundle (A, y, sigma_w) for repeated objective evaluation."""

    def __init__(self, A, y, sigma_w):
        A = np.asarray(A, dtype=float)
        y = np.asarray(y, dtype=float)
        if A.ndim != 2 or y.shape != (A.shape[0],):
            raise ValueError("A must be m x n with y of length m")
        if sigma_w <= 0:
            raise ValueError("sigma_w must be positive")
        self.A = A
        self.y = y
        self.sigma_w = float(sigma_w)
        self.m, self.n = A.shape

    @classmethod
    def from_instance(cls, instance):
        return cls(instance.A, instance.y, instance.sigma_w)


def _as_vector(x, n):
    x = x.values if isinstance(x, Signal) else np.asarray(x, dtype=float)
    if x.shape != (n,):
        raise ValueError(f"x has shape {x.shape}, expected ({n},)")
    return x


def _weighted_gram(A, x):
    """B = A diag(x)^2 A^T without forming the diagonal matrix."""
    return (A * (x * x)) @ A.T


def _spd_factor(B):
    """Cholesky factor of B with a relative pivot check.

    Raises SingularObjectiveError when B is not positive definite within
    tolerance instead of letting LinAlgError escape.
    """
    try:
        factor = sla.cho_factor(B, lower=True, check_finite=False)
    except sla.LinAlgError as exc:
        raise SingularObjectiveError(str(exc)) from exc
    diag = np.diag(factor[0])
    pivots = diag * diag
    if pivots.min() <= PIVOT_RTOL * pivots.max():
        raise SingularObjectiveError("pivot below relative tolerance")
    return factor


def _logdet_from_factor(factor):
    return 2.0 * np.log(np.diag(factor[0])).sum()


def nll_limit(x, ctx):
    """log det(A X^2 A^T) + sigma_w^-2 y^T (A X^2 A^T)^-1 y, for m < n.

    This is the limiting negative log-likelihood (doubled, constants
    dropped) as the additive noise vanishes.
    """
    x = _as_vector(x, ctx.n)
    B = _weighted_gram(ctx.A, x)
    factor = _spd_factor(B)
    quad = ctx.y @ sla.cho_solve(factor, ctx.y, check_finite=False)
    return _logdet_from_factor(factor) + quad / ctx.sigma_w**2


def nll_gradient(x, ctx):
    """Analytic gradient of nll_limit.

    g_i = 2 x_i (a_i^T B^-1 a_i - sigma_w^-2 (a_i^T B^-1 y)^2) with
    B = A X^2 A^T; one factorization of B is shared by a block solve against
    A and a solve against y.
    """
    x = _as_vector(x, ctx.n)
    B = _weighted_gram(ctx.A, x)
    factor = _spd_factor(B)
    S = sla.cho_solve(factor, ctx.A, check_finite=False)
    quad_diag = np.einsum("ij,ij->j", ctx.A, S)
    proj = ctx.A.T @ sla.cho_solve(factor, ctx.y, check_finite=False)
    return 2.0 * x * (quad_diag - (proj * proj) / ctx.sigma_w**2)


def nll_finite_sigma_z(x, ctx, sigma_z):
    """Negative log-likelihood (doubled) at a finite additive-noise level.

    Up to an x-independent constant this is
    log det(sigma_w^-2 I_n + sigma_z^-2 X A^T A X)
    - sigma_z^-4 y^T A X (sigma_w^-2 I_n + sigma_z^-2 X A^T A X)^-1 X A^T y.
    The dropped constant is ||y||^2 / sigma_z^2, which belongs to the
    quadratic term but carries no information about x; keeping it would
    swamp differences across x in rounding noise as sigma_z -> 0.

    Evaluated through exact reductions: the log-det runs over the singular
    values of A X (padded with sigma_w^-2 eigenvalues), and the remaining
    quadratic piece is + y^T (sigma_z^2 I_m + sigma_w^2 A X^2 A^T)^-1 y.
    """
    if sigma_z <= 0:
        raise ValueError("sigma_z must be positive; use nll_limit for the limit")
    x = _as_vector(x, ctx.n)
    sv = sla.svdvals(ctx.A * x, check_finite=False)
    if sv[0] <= 0 or sv[-1] ** 2 <= PIVOT_RTOL * sv[0] ** 2:
        raise SingularObjectiveError("A X is rank deficient")
    sw2, sz2 = ctx.sigma_w**2, float(sigma_z) ** 2
    padding = ctx.n - sv.size  # zero eigenvalues of X A^T A X when m < n
    logdet = -2.0 * padding * np.log(ctx.sigma_w) + np.log(1.0 / sw2 + sv * sv / sz2).sum()
    G = sz2 * np.eye(ctx.m) + sw2 * _weighted_gram(ctx.A, x)
    factor = _spd_factor(G)
    quad = ctx.y @ sla.cho_solve(factor, ctx.y, check_finite=False)
    return logdet + quad


def nll_overdetermined(x, A, y, sigma_w):
    """Negative log-likelihood for m > n via b = (A^T A)^-1 A^T y.

    Returns sum_i (0.5 log x_i^2 + b_i^2 / (2 sigma_w^2 x_i^2)); requires
    A^T A invertible and x free of zeros.
    """
    A = np.asarray(A, dtype=float)
    y = np.asarray(y, dtype=float)
    x = _as_vector(x, A.shape[1])
    if np.any(x == 0.0):
        raise ValueError("x must have no zero entries")
    gram = A.T @ A
    factor = _spd_factor(gram)  # rank deficiency surfaces here
    b = sla.cho_solve(factor, A.T @ y, check_finite=False)
    return float(np.sum(0.5 * np.log(x * x) + b * b / (2.0 * sigma_w**2 * x * x)))


def pseudo_inverse_coefficients(A, y):
    """b = (A^T A)^-1 A^T y, the denoised pixel values in the m > n regime."""
    A = np.asarray(A, dtype=float)
    factor = _spd_factor(A.T @ A)
    return sla.cho_solve(factor, A.T @ np.asarray(y, dtype=float), check_finite=False)


def denoise_ml(y):
    """Per-coordinate maximum-likelihood denoiser |y| for y = x o w."""
    return np.abs(np.asarray(y, dtype=float))


def denoise_constant_ml(y):
    """ML amplitude for a constant signal: the root mean square of y."""
    y = np.asarray(y, dtype=float)
    if y.size < 1:
        raise ValueError("y must be nonempty")
    return float(np.sqrt(np.mean(y * y)))
