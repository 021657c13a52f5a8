"""Recovery solvers: projected gradient descent and multilevel search.

Four method families: plain PGD with backtracking line search, PGD restarted
from a grid of constant initializations, a multilevel solver (outer discrete
search over breakpoints, inner continuous minimization over segment values),
and the hybrid that warm-starts the break search from PGD's estimate.
"""

import time
from dataclasses import dataclass, field

import numpy as np
import scipy.optimize as sopt
from threadpoolctl import threadpool_limits

from . import likelihood
from .compression import project_approx, project_viterbi
from .likelihood import SingularObjectiveError
from .measurement import Signal, segments_of, stream

# Sentinel objective for barrier rejections; large but finite so bounded
# quasi-Newton line searches back off instead of aborting.
BARRIER_VALUE = 1e25


@dataclass
class PgdConfig:
    """Projected gradient descent knobs.

    The step is halved from step0 until the projected candidate strictly
    decreases the objective; an iteration that exhausts its halvings counts
    as no-descent and a few of those in a row terminate the run.
    """

    max_iters: int = 500
    step0: float = 1.0
    backtrack: float = 0.5
    max_halvings: int = 30
    tol: float = 1e-9
    max_no_descent: int = 3
    init_magnitudes: tuple = ()  # empty -> geometric midpoint of the code bounds
    projection: str = "exact"  # "exact" (dynamic programming) or "approx" (encode/decode)

    def __post_init__(self):
        if self.step0 <= 0:
            raise ValueError("step0 must be positive")
        if not 0 < self.backtrack < 1:
            raise ValueError("backtrack factor must lie in (0, 1)")
        if self.tol < 0:
            raise ValueError("tol must be nonnegative")
        if self.projection not in ("exact", "approx"):
            raise ValueError("projection must be 'exact' or 'approx'")


@dataclass
class MultilevelConfig:
    """Multilevel solver knobs: outer break search and inner value solve.

    radius is the local-move scale (how far one break shifts per proposal);
    window_radius only matters for the PGD-seeded hybrid, where it clamps
    every proposal to +- window_radius around the PGD break estimates
    (None leaves the search unconstrained, 0 pins it to PGD's breaks).
    """

    pieces: int
    bounds: tuple
    budget: int = 30
    radius: int = 8
    window_radius: int = None
    inner_tol: float = 1e-8
    inner_max_iters: int = 60
    seed: int = 0

    def __post_init__(self):
        if self.pieces < 1:
            raise ValueError("pieces must be at least 1")
        if self.budget < 1:
            raise ValueError("budget must be at least 1")


@dataclass
class SolverReport:
    """Outcome of one solver run."""

    estimate: Signal
    trace: list
    nll_evals: int
    grad_evals: int
    wall_time: float
    termination: str
    start_results: list = field(default_factory=list)  # (magnitude, objective, reason) per start

    @property
    def objective(self):
        return self.trace[-1]

    @property
    def evals(self):
        return self.nll_evals + self.grad_evals

    def to_lines(self):
        lines = [
            "objective %r" % float(self.objective),
            f"nll_evals {self.nll_evals}",
            f"grad_evals {self.grad_evals}",
            "time_s %.6f" % self.wall_time,
            f"termination {self.termination}",
            "trace " + " ".join("%.10g" % v for v in self.trace),
            "estimate " + " ".join(repr(float(v)) for v in self.estimate.values),
        ]
        for magnitude, objective, reason in self.start_results:
            lines.append("start %r %r %s" % (float(magnitude), float(objective), reason))
        return lines


class CountingObjective:
    """Objective/gradient access with evaluation counters.

    Tests inject their own value_fn/grad_fn wrappers to verify that the
    reported counters match the true number of calls exactly.
    """

    def __init__(self, ctx, value_fn=None, grad_fn=None):
        self.ctx = ctx
        self._value_fn = value_fn or likelihood.nll_limit
        self._grad_fn = grad_fn or likelihood.nll_gradient
        self.nll_evals = 0
        self.grad_evals = 0

    def value(self, x):
        self.nll_evals += 1
        return self._value_fn(x, self.ctx)

    def gradient(self, x):
        self.grad_evals += 1
        return self._grad_fn(x, self.ctx)

    def value_or_barrier(self, x):
        try:
            return self.value(x)
        except SingularObjectiveError:
            return BARRIER_VALUE


def _resolve_magnitudes(cfg, code, multi):
    if cfg.init_magnitudes:
        return tuple(float(c) for c in cfg.init_magnitudes)
    x_min, x_max = code.x_min, code.x_max
    if multi:
        return tuple(np.geomspace(x_min, x_max, 8))
    return (float(np.sqrt(x_min * x_max)),)


def pgd(ctx, code, cfg, value_fn=None, grad_fn=None):
    """Algorithm: x_t = project(x_{t-1} - mu_t * grad), mu_t by line search.

    Starts from a constant vector, keeps only strictly improving steps, and
    treats singular objective evaluations as failed line-search candidates.
    """
    if ctx.m >= ctx.n:
        raise ValueError("PGD recovery expects the underdetermined regime m < n")
    with threadpool_limits(limits=1):  # many small factorizations; threads only thrash
        return _pgd_single_threaded(ctx, code, cfg, value_fn, grad_fn)


def _pgd_single_threaded(ctx, code, cfg, value_fn, grad_fn):
    start = time.perf_counter()
    obj = CountingObjective(ctx, value_fn, grad_fn)
    project = project_viterbi if cfg.projection == "exact" else project_approx

    magnitude = _resolve_magnitudes(cfg, code, multi=False)[0]
    x = np.full(ctx.n, magnitude)
    f = obj.value_or_barrier(x)
    trace = [f]
    termination = "max-iters"
    no_descent = 0
    for _ in range(cfg.max_iters):
        try:
            g = obj.gradient(x)
        except SingularObjectiveError:
            termination = "singular-start"
            break
        mu = cfg.step0
        accepted = None
        for _ in range(cfg.max_halvings + 1):
            candidate = project(x - mu * g, code).values
            f_cand = obj.value_or_barrier(candidate)
            if f_cand < f:
                accepted = (candidate, f_cand)
                break
            mu *= cfg.backtrack
        if accepted is None:
            no_descent += 1
            if no_descent >= cfg.max_no_descent:
                termination = "no-descent"
                break
            continue
        no_descent = 0
        decrease = f - accepted[1]
        x, f = accepted
        trace.append(f)
        if decrease < cfg.tol:
            termination = "tol"
            break

    bounds = code.signal_bounds
    estimate = Signal(values=np.clip(x, bounds[0], bounds[1]), bounds=bounds)
    return SolverReport(
        estimate=estimate,
        trace=trace,
        nll_evals=obj.nll_evals,
        grad_evals=obj.grad_evals,
        wall_time=time.perf_counter() - start,
        termination=termination,
        start_results=[(magnitude, f, termination)],
    )


def pgd_multi_init(ctx, code, cfg, value_fn=None, grad_fn=None):
    """Run pgd once per initialization magnitude and keep the best objective.

    Evaluation counters aggregate across all starts; per-start outcomes are
    recorded in the report.
    """
    magnitudes = _resolve_magnitudes(cfg, code, multi=True)
    if not magnitudes:
        raise ValueError("need at least one initialization magnitude")
    start = time.perf_counter()
    best = None
    nll_evals = grad_evals = 0
    start_results = []
    for magnitude in magnitudes:
        sub = PgdConfig(
            max_iters=cfg.max_iters,
            step0=cfg.step0,
            backtrack=cfg.backtrack,
            max_halvings=cfg.max_halvings,
            tol=cfg.tol,
            max_no_descent=cfg.max_no_descent,
            init_magnitudes=(magnitude,),
            projection=cfg.projection,
        )
        report = pgd(ctx, code, sub, value_fn, grad_fn)
        nll_evals += report.nll_evals
        grad_evals += report.grad_evals
        start_results.extend(report.start_results)
        if best is None or report.objective < best.objective:
            best = report
    return SolverReport(
        estimate=best.estimate,
        trace=best.trace,
        nll_evals=nll_evals,
        grad_evals=grad_evals,
        wall_time=time.perf_counter() - start,
        termination=best.termination,
        start_results=start_results,
    )


def _expand_breaks(theta, breaks, n):
    """x(theta, breaks): theta[l] on indices breaks[l] <= i < breaks[l+1] (1-based)."""
    lengths = np.diff(breaks)
    return np.repeat(theta, lengths)


def inner_continuous(breaks, ctx, bounds, theta0=None, tol=1e-8, max_iters=60, objective=None):
    """Minimize the limit objective over segment values at fixed breakpoints.

    breaks is the full 1-based boundary vector (1, ..., n+1).  Box-constrained
    quasi-Newton (L-BFGS-B) on theta; the gradient per segment value is the
    sum of the signal-space gradient over that segment.  Returns
    (theta, value).
    """
    breaks = np.asarray(breaks, dtype=int)
    if breaks[0] != 1 or breaks[-1] != ctx.n + 1 or np.any(np.diff(breaks) < 1):
        raise ValueError("breaks must be strictly increasing from 1 to n+1")
    with threadpool_limits(limits=1):
        return _inner_continuous_impl(breaks, ctx, bounds, theta0, tol, max_iters, objective)


def _inner_continuous_impl(breaks, ctx, bounds, theta0, tol, max_iters, objective):
    k = breaks.size - 1
    x_min, x_max = bounds
    obj = objective or CountingObjective(ctx)
    starts = breaks[:-1] - 1

    def fun(theta):
        x = _expand_breaks(theta, breaks, ctx.n)
        try:
            value = obj.value(x)
            grad = obj.gradient(x)
        except SingularObjectiveError:
            return BARRIER_VALUE, np.zeros(k)
        return value, np.add.reduceat(grad, starts)

    if theta0 is None:
        theta0 = np.full(k, np.sqrt(x_min * x_max))
    theta0 = np.clip(np.asarray(theta0, dtype=float), x_min, x_max)
    result = sopt.minimize(
        fun,
        theta0,
        jac=True,
        method="L-BFGS-B",
        bounds=[(x_min, x_max)] * k,
        options={"maxiter": max_iters, "ftol": tol, "gtol": 1e-10},
    )
    theta = np.clip(result.x, x_min, x_max)
    return theta, float(result.fun)


def _propose_uniform(rng, n, interior, windows):
    """One random interior-break vector, honoring per-break windows."""
    for _ in range(64):
        if windows is None:
            if n - 1 < interior:
                raise ValueError("more breaks than available positions")
            picks = rng.choice(np.arange(2, n + 1), size=interior, replace=False)
        else:
            picks = np.array([rng.integers(lo, hi + 1) for lo, hi in windows])
        picks = np.sort(picks)
        if np.all(np.diff(picks) >= 1) and np.unique(picks).size == interior:
            return tuple(int(p) for p in picks)
    return None


def _propose_shift(rng, n, current, radius, windows):
    """Shift one break of the current best by up to +-radius."""
    interior = len(current)
    for _ in range(64):
        slot = int(rng.integers(0, interior))
        delta = int(rng.integers(1, max(radius, 1) + 1)) * int(rng.choice([-1, 1]))
        candidate = list(current)
        candidate[slot] += delta
        lo, hi = (2, n) if windows is None else windows[slot]
        candidate[slot] = min(max(candidate[slot], lo), hi)
        candidate.sort()
        if len(set(candidate)) == interior:  # sorted + distinct = strictly increasing
            return tuple(candidate)
    return None


def _search_breaks(h, n, pieces, budget, radius, rng, windows=None, first=None):
    """Seeded random search over interior break vectors, best-kept.

    Uniform proposals first (exhaustive when a single break has fewer
    candidates than the budget), then local one-break shifts around the
    incumbent.  h is called at most budget times; duplicates are skipped.
    """
    interior = pieces - 1
    if interior == 0:
        value = h(())
        return (), value, [value]

    seen = {}
    trace = []
    best_d, best_val = None, np.inf

    def evaluate(d):
        nonlocal best_d, best_val
        if d in seen:
            return False
        value = h(d)
        seen[d] = value
        if value < best_val:
            best_d, best_val = d, value
        trace.append(best_val)
        return True

    if first is not None:
        evaluate(tuple(int(b) for b in first))

    n_init = max(1, budget // 3)
    if interior == 1:
        positions = range(2, n + 1) if windows is None else range(windows[0][0], windows[0][1] + 1)
        if len(positions) <= budget - len(seen):
            for p in positions:  # cheap enough to sweep every position
                evaluate((p,))
            return best_d, best_val, trace
    attempts = 0
    while len(seen) < min(n_init, budget) and attempts < 64 * budget:
        attempts += 1
        d = _propose_uniform(rng, n, interior, windows)
        if d is not None:
            evaluate(d)
    attempts = 0
    while len(seen) < budget and attempts < 64 * budget:
        attempts += 1
        if best_d is None:
            d = _propose_uniform(rng, n, interior, windows)
        else:
            d = _propose_shift(rng, n, best_d, radius, windows)
        if d is not None:
            evaluate(d)
    return best_d, best_val, trace


def multilevel(ctx, cfg, value_fn=None, grad_fn=None, _windows=None, _first=None, _theta_hint=None):
    """Outer gradient-free search over breakpoints, inner continuous solve.

    Proposals are evaluated through h(d) = min_theta objective(x(theta, d));
    the budget caps the number of inner solves.
    """
    if ctx.m >= ctx.n:
        raise ValueError("multilevel recovery expects the underdetermined regime m < n")
    start = time.perf_counter()
    obj = CountingObjective(ctx, value_fn, grad_fn)
    rng = stream(cfg.seed, 7)
    solutions = {}

    def h(d):
        breaks = np.concatenate([[1], np.asarray(d, dtype=int), [ctx.n + 1]])
        theta0 = None if _theta_hint is None else _theta_hint(breaks)
        theta, value = inner_continuous(
            breaks,
            ctx,
            cfg.bounds,
            theta0=theta0,
            tol=cfg.inner_tol,
            max_iters=cfg.inner_max_iters,
            objective=obj,
        )
        solutions[tuple(d)] = theta
        return value

    best_d, best_val, trace = _search_breaks(
        h, ctx.n, cfg.pieces, cfg.budget, cfg.radius, rng, windows=_windows, first=_first
    )
    breaks = np.concatenate([[1], np.asarray(best_d, dtype=int), [ctx.n + 1]])
    values = _expand_breaks(solutions[best_d], breaks, ctx.n)
    estimate = Signal(values=values, bounds=cfg.bounds)
    return SolverReport(
        estimate=estimate,
        trace=trace,
        nll_evals=obj.nll_evals,
        grad_evals=obj.grad_evals,
        wall_time=time.perf_counter() - start,
        termination="budget",
    )


def _estimate_breaks(values, pieces, n, rng):
    """Interior breaks of a piecewise-constant estimate, padded uniformly
    with random distinct positions when the estimate has too few jumps."""
    breaks, _ = segments_of(values)
    interior = [b for b in breaks[1:-1]]
    if len(interior) > pieces - 1:
        # keep the largest-magnitude jumps
        x = np.asarray(values, dtype=float)
        sizes = [abs(x[b - 1] - x[b - 2]) for b in interior]
        order = np.argsort(sizes)[::-1][: pieces - 1]
        interior = sorted(interior[i] for i in order)
    attempts = 0
    while len(interior) < pieces - 1 and attempts < 64 * n:
        attempts += 1
        p = int(rng.integers(2, n + 1))
        if p not in interior:
            interior.append(p)
            interior.sort()
    return interior


def pgd_then_multilevel(ctx, code, pgd_cfg, ml_cfg, value_fn=None, grad_fn=None):
    """PGD first, then a multilevel search restricted to windows of radius
    ml_cfg.radius around the PGD estimate's break locations.

    The PGD phase only locates the windows (and warm-starts the inner segment
    values); the returned estimate is the windowed search's optimum, so
    radius = n reproduces plain multilevel behavior and radius = 0 reduces to
    the inner solve at PGD's breaks.  Counters aggregate both phases.
    """
    start = time.perf_counter()
    pgd_report = pgd(ctx, code, pgd_cfg, value_fn, grad_fn)
    rng = stream(ml_cfg.seed, 11)
    interior = _estimate_breaks(pgd_report.estimate.values, ml_cfg.pieces, ctx.n, rng)
    w = ctx.n if ml_cfg.window_radius is None else ml_cfg.window_radius
    windows = [(max(2, b - w), min(ctx.n, b + w)) for b in interior]
    pgd_values = pgd_report.estimate.values

    def theta_hint(breaks):
        means = [float(np.mean(pgd_values[lo - 1 : hi - 1])) for lo, hi in zip(breaks, breaks[1:])]
        return np.array(means)

    ml_report = multilevel(
        ctx,
        ml_cfg,
        value_fn,
        grad_fn,
        _windows=windows,
        _first=tuple(interior),
        _theta_hint=theta_hint,
    )
    return SolverReport(
        estimate=ml_report.estimate,
        trace=pgd_report.trace + ml_report.trace,
        nll_evals=pgd_report.nll_evals + ml_report.nll_evals,
        grad_evals=pgd_report.grad_evals + ml_report.grad_evals,
        wall_time=time.perf_counter() - start,
        termination=ml_report.termination,
        start_results=pgd_report.start_results,
    )
