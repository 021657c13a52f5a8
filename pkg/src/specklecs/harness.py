"""Experiment orchestration: seeded trial grids, PSNR/NLL bookkeeping, CSV output.

For each (m, trial) cell one instance is sampled and every method runs on
that same instance, so method comparisons are paired.  Rows are written in a
canonical (method, m, trial) order with a fixed header; wall-clock columns
are the only nondeterministic bytes and are excluded from determinism
comparisons via canonical_rows_bytes.
"""

import csv
import io
import json
import math
import os
from dataclasses import dataclass, field

import numpy as np

from .compression import PiecewiseConstantCode
from .likelihood import ObjectiveContext, nll_limit
from .measurement import Signal, make_instance, make_piecewise_signal
from .solvers import (
    MultilevelConfig,
    PgdConfig,
    multilevel,
    pgd,
    pgd_multi_init,
    pgd_then_multilevel,
)

ROWS_HEADER = "method,m,trial,seed,psnr_db,nll_estimate,nll_truth,time_s,evals"
SUMMARY_HEADER = (
    "method,m,trials,psnr_mean_db,psnr_ci90_db,nll_estimate_mean,nll_truth_mean,"
    "time_mean_s,time_std_s,evals_mean,evals_std"
)
METHODS = ("pgd", "pgd+init", "multilevel", "pgd+multilevel")


@dataclass
class ExperimentConfig:
    """Grid definition for one experiment run."""

    n: int
    pieces: int
    m_list: tuple
    trials: int
    sigma_w: float = 1.0
    sigma_z: float = 0.0
    methods: tuple = METHODS
    bounds: tuple = (0.5, 2.0)
    code_bits: int = 8
    code_jumps: int = -1  # -1 -> pieces - 1
    seed: int = 0
    out_dir: str = "results"
    signal: dict = None  # None -> zigzag preset; or {"breaks": [...], "values": [...]}
    pgd_options: dict = field(default_factory=dict)
    multilevel_options: dict = field(default_factory=dict)

    def __post_init__(self):
        self.m_list = tuple(int(m) for m in self.m_list)
        self.methods = tuple(self.methods)
        if self.trials < 1:
            raise ValueError("trials must be at least 1")
        if not self.methods:
            raise ValueError("methods must be nonempty")
        unknown = [m for m in self.methods if m not in METHODS]
        if unknown:
            raise ValueError(f"unknown methods {unknown}; choose from {METHODS}")
        if any(m >= self.n for m in self.m_list):
            raise ValueError("all m must be smaller than n")
        if self.code_jumps < 0:
            self.code_jumps = self.pieces - 1

    @classmethod
    def from_dict(cls, data):
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)

    @classmethod
    def from_json(cls, path):
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def make_code(self):
        return PiecewiseConstantCode(
            n=self.n, max_jumps=self.code_jumps, bits=self.code_bits, bounds=self.bounds
        )


@dataclass(frozen=True)
class ExperimentRow:
    """One (method, m, trial) outcome."""

    method: str
    m: int
    trial: int
    seed: int
    psnr_db: float
    nll_estimate: float
    nll_truth: float
    time_s: float
    evals: int


@dataclass(frozen=True)
class SummaryRow:
    method: str
    m: int
    trials: int
    psnr_mean_db: float
    psnr_ci90_db: float
    nll_estimate_mean: float
    nll_truth_mean: float
    time_mean_s: float
    time_std_s: float
    evals_mean: float
    evals_std: float


def psnr(x_true, x_hat):
    """10 log10(||x||_inf^2 / ||xhat - x||_2^2) in decibels.

    The numerator is the squared sup-norm of the true signal and the
    denominator the total (not per-sample) squared error; exact recovery
    returns +inf.
    """
    x = x_true.values if isinstance(x_true, Signal) else np.asarray(x_true, dtype=float)
    x_hat = np.asarray(x_hat, dtype=float)
    err = x_hat - x
    sq = float(err @ err)
    peak = float(np.max(np.abs(x)))
    if peak == 0:
        raise ValueError("true signal must be nonzero")
    if sq == 0.0:
        return math.inf
    return 10.0 * math.log10(peak * peak / sq)


def per_sample_mse(x_true, x_hat):
    x = x_true.values if isinstance(x_true, Signal) else np.asarray(x_true, dtype=float)
    err = np.asarray(x_hat, dtype=float) - x
    return float(err @ err) / x.size


def mse_from_psnr(psnr_db, x_true):
    """Invert the PSNR formula to the per-sample squared error."""
    x = x_true.values if isinstance(x_true, Signal) else np.asarray(x_true, dtype=float)
    peak = float(np.max(np.abs(x)))
    if math.isinf(psnr_db):
        return 0.0
    return peak * peak * 10.0 ** (-psnr_db / 10.0) / x.size


def _zigzag_permutation(k):
    """0, k-1, 1, k-2, ...: adjacent entries always differ."""
    lo, hi = 0, k - 1
    out = []
    while lo <= hi:
        out.append(lo)
        if hi != lo:
            out.append(hi)
        lo += 1
        hi -= 1
    return out


def preset_signal(n, pieces, code):
    """Deterministic piecewise-constant truth with uneven breaks and spread values.

    Values zigzag across the middle 80% of the code's range and are snapped
    onto the quantizer grid, so the truth is itself a codeword.
    """
    if pieces < 1 or pieces > n:
        raise ValueError("pieces must lie in [1, n]")
    breaks = [1]
    for l in range(1, pieces):
        frac = (l + 0.35 * (-1.0) ** l) / pieces
        breaks.append(1 + int(round(n * frac)))
    breaks.append(n + 1)
    if any(b2 <= b1 for b1, b2 in zip(breaks, breaks[1:])):
        raise ValueError(f"too many pieces ({pieces}) for n={n}")
    lo = code.x_min + 0.10 * (code.x_max - code.x_min)
    hi = code.x_min + 0.90 * (code.x_max - code.x_min)
    if pieces == 1:
        raw = [0.5 * (lo + hi)]
    else:
        perm = _zigzag_permutation(pieces)
        raw = [lo + (hi - lo) * p / (pieces - 1) for p in perm]
    values = [float(code.grid[code.grid_index(v)]) for v in raw]
    return make_piecewise_signal(breaks, values, n, bounds=code.signal_bounds)


def resolve_signal(cfg, code):
    if cfg.signal is None or cfg.signal.get("preset", None) is not None:
        return preset_signal(cfg.n, cfg.pieces, code)
    return make_piecewise_signal(
        cfg.signal["breaks"], cfg.signal["values"], cfg.n, bounds=code.signal_bounds
    )


def _cell_seed(master, m, trial):
    # keyed on the m value itself so a cell reproduces regardless of grid shape
    ss = np.random.SeedSequence(master, spawn_key=(m, trial))
    return int(ss.generate_state(1, np.uint64)[0])


def _run_method(method, ctx, code, cfg, seed):
    pgd_cfg = PgdConfig(**{"max_iters": 150, "tol": 1e-6, **cfg.pgd_options})
    ml_defaults = {
        "pieces": cfg.pieces,
        "bounds": code.signal_bounds,
        "budget": 100,
        "radius": max(8, cfg.n // 8),
        "inner_max_iters": 50,
        "seed": seed,
    }
    if method == "pgd":
        return pgd(ctx, code, pgd_cfg)
    if method == "pgd+init":
        return pgd_multi_init(ctx, code, pgd_cfg)
    ml_cfg = MultilevelConfig(**{**ml_defaults, **cfg.multilevel_options})
    if method == "multilevel":
        return multilevel(ctx, ml_cfg)
    if method == "pgd+multilevel":
        return pgd_then_multilevel(ctx, code, pgd_cfg, ml_cfg)
    raise ValueError(f"unknown method {method!r}")


def run_experiment(cfg, progress=None):
    """Run the full (method, m, trial) grid; returns (rows, summary).

    Every method within a cell sees the identical instance; rows come back
    sorted by (method, m, trial).
    """
    code = cfg.make_code()
    signal = resolve_signal(cfg, code)
    rows = []
    for m in cfg.m_list:
        for trial in range(cfg.trials):
            seed = _cell_seed(cfg.seed, m, trial)
            instance = make_instance(signal, m, cfg.sigma_w, cfg.sigma_z, seed)
            ctx = ObjectiveContext.from_instance(instance)
            nll_truth = nll_limit(signal.values, ctx)
            for method in cfg.methods:
                report = _run_method(method, ctx, code, cfg, seed)
                estimate = report.estimate.values
                rows.append(
                    ExperimentRow(
                        method=method,
                        m=m,
                        trial=trial,
                        seed=seed,
                        psnr_db=psnr(signal, estimate),
                        nll_estimate=nll_limit(estimate, ctx),
                        nll_truth=nll_truth,
                        time_s=report.wall_time,
                        evals=report.evals,
                    )
                )
                if progress is not None:
                    progress(rows[-1])
    rows.sort(key=lambda r: (r.method, r.m, r.trial))
    return rows, summarize(rows)


def summarize(rows):
    """Per-(method, m) means with 90% normal-approximation intervals."""
    cells = {}
    for row in rows:
        cells.setdefault((row.method, row.m), []).append(row)
    summary = []
    for (method, m), cell in sorted(cells.items()):
        psnrs = np.array([r.psnr_db for r in cell])
        times = np.array([r.time_s for r in cell])
        evals = np.array([float(r.evals) for r in cell])
        k = len(cell)
        std = float(np.std(psnrs, ddof=1)) if k > 1 else 0.0
        summary.append(
            SummaryRow(
                method=method,
                m=m,
                trials=k,
                psnr_mean_db=float(np.mean(psnrs)),
                psnr_ci90_db=1.645 * std / math.sqrt(k),
                nll_estimate_mean=float(np.mean([r.nll_estimate for r in cell])),
                nll_truth_mean=float(np.mean([r.nll_truth for r in cell])),
                time_mean_s=float(np.mean(times)),
                time_std_s=float(np.std(times, ddof=1)) if k > 1 else 0.0,
                evals_mean=float(np.mean(evals)),
                evals_std=float(np.std(evals, ddof=1)) if k > 1 else 0.0,
            )
        )
    return summary


def _fmt(value):
    if isinstance(value, float):
        return format(value, ".6f")
    return str(value)


def write_rows_csv(rows, path):
    with open(path, "w", newline="") as fh:
        fh.write(ROWS_HEADER + "\n")
        for r in rows:
            fh.write(
                ",".join(
                    _fmt(v)
                    for v in (
                        r.method,
                        r.m,
                        r.trial,
                        r.seed,
                        r.psnr_db,
                        r.nll_estimate,
                        r.nll_truth,
                        r.time_s,
                        r.evals,
                    )
                )
                + "\n"
            )


def write_summary_csv(summary, path):
    with open(path, "w", newline="") as fh:
        fh.write(SUMMARY_HEADER + "\n")
        for s in summary:
            fh.write(
                ",".join(
                    _fmt(v)
                    for v in (
                        s.method,
                        s.m,
                        s.trials,
                        s.psnr_mean_db,
                        s.psnr_ci90_db,
                        s.nll_estimate_mean,
                        s.nll_truth_mean,
                        s.time_mean_s,
                        s.time_std_s,
                        s.evals_mean,
                        s.evals_std,
                    )
                )
                + "\n"
            )


def canonical_rows_bytes(path):
    """rows.csv bytes with the wall-clock column zeroed.

    Timing is the single nondeterministic column; determinism checks compare
    these canonical bytes.
    """
    out = io.StringIO()
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        time_idx = header.index("time_s")
        out.write(",".join(header) + "\n")
        for record in reader:
            record[time_idx] = "0"
            out.write(",".join(record) + "\n")
    return out.getvalue().encode()


def emit_outputs(rows, summary, out_dir, render=True):
    """Write rows.csv, summary.csv, the plot script, and (optionally) figures.

    Returns the list of paths written.
    """
    if not rows:
        raise ValueError("no rows to emit")
    os.makedirs(out_dir, exist_ok=True)
    paths = []
    rows_path = os.path.join(out_dir, "rows.csv")
    write_rows_csv(rows, rows_path)
    paths.append(rows_path)
    summary_path = os.path.join(out_dir, "summary.csv")
    write_summary_csv(summary, summary_path)
    paths.append(summary_path)

    from . import plotting

    paths.append(plotting.write_plot_script(out_dir))
    if render:
        paths.extend(plotting.render_summary_figures(summary, out_dir))
    return paths
