"""Problem-instance generation: signals, measurement matrices, speckle noise.

The acquisition model is y = A X w + z with X = diag(x), where the
multiplicative noise w hits every signal coordinate (length n) and the
additive noise z hits every measurement (length m).
"""

from dataclasses import dataclass

import numpy as np


def stream(seed, *key):
    """Independent generator derived from a master seed and a spawn path.

    Distinct key tuples give statistically independent streams, so parallel
    trials never share RNG state.
    """
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=key))


@dataclass(frozen=True, eq=False)
class Signal:
    """Positive real vector with box bounds.

    Every entry must lie in [x_min, x_max] with x_min > 0; positivity is what
    removes the per-coordinate sign ambiguity of the multiplicative model.
    """

    values: np.ndarray
    bounds: tuple

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "bounds", (float(self.bounds[0]), float(self.bounds[1])))
        x_min, x_max = self.bounds
        if values.ndim != 1 or values.size < 1:
            raise ValueError("signal must be a nonempty 1-D vector")
        if not (0.0 < x_min <= x_max):
            raise ValueError(f"invalid bounds ({x_min}, {x_max}): need 0 < x_min <= x_max")
        if values.min() < x_min or values.max() > x_max:
            raise ValueError("signal entries outside [x_min, x_max]")

    @property
    def n(self):
        return self.values.size

    @property
    def x_min(self):
        return self.bounds[0]

    @property
    def x_max(self):
        return self.bounds[1]


@dataclass(frozen=True, eq=False)
class MeasurementInstance:
    """One realized sensing problem: matrix, noise scales, measurement."""

    A: np.ndarray
    sigma_w: float
    sigma_z: float
    y: np.ndarray
    seed: int

    def __post_init__(self):
        if self.A.ndim != 2:
            raise ValueError("A must be a matrix")
        if self.y.shape != (self.A.shape[0],):
            raise ValueError("y length must equal the number of rows of A")
        if self.sigma_w <= 0:
            raise ValueError("sigma_w must be positive")
        if self.sigma_z < 0:
            raise ValueError("sigma_z must be nonnegative")

    @property
    def m(self):
        return self.A.shape[0]

    @property
    def n(self):
        return self.A.shape[1]


def sample_matrix(m, n, rng):
    """Sample an m x n matrix with i.i.d. standard normal entries."""
    if m < 1 or n < 1:
        raise ValueError("matrix dimensions must be at least 1")
    return rng.standard_normal((m, n))


def measure(signal, A, sigma_w, sigma_z, rng, w=None, z=None):
    """Realize y = A diag(x) w + z and return (y, w, z).

    w and z may be forced (test hook); when omitted they are drawn fresh from
    the given generator.  The noise realizations are returned so tests can
    build exact oracles against them.
    """
    x = signal.values if isinstance(signal, Signal) else np.asarray(signal, dtype=float)
    m, n = A.shape
    if x.shape != (n,):
        raise ValueError(f"signal length {x.shape} does not match A columns {n}")
    if sigma_w <= 0:
        raise ValueError("sigma_w must be positive")
    if w is None:
        w = sigma_w * rng.standard_normal(n)
    else:
        w = np.asarray(w, dtype=float)
        if w.shape != (n,):
            raise ValueError("forced w has wrong length")
    if z is None:
        z = sigma_z * rng.standard_normal(m) if sigma_z > 0 else np.zeros(m)
    else:
        z = np.asarray(z, dtype=float)
        if z.shape != (m,):
            raise ValueError("forced z has wrong length")
    y = A @ (x * w) + z
    return y, w, z


def make_instance(signal, m, sigma_w, sigma_z, seed):
    """Sample a full instance (A, y) for a signal with deterministic seeding.

    Asserts that A has full row rank, which holds with probability 1 for
    Gaussian matrices with m <= n.
    """
    rng = stream(seed)
    A = sample_matrix(m, signal.n, rng)
    if np.linalg.matrix_rank(A) < min(m, signal.n):
        raise ValueError("sampled matrix is rank deficient")  # pragma: no cover
    y, _, _ = measure(signal, A, sigma_w, sigma_z, rng)
    return MeasurementInstance(A=A, sigma_w=sigma_w, sigma_z=sigma_z, y=y, seed=seed)


def make_piecewise_signal(breaks, values, n, bounds=None):
    """Build a piecewise-constant signal from segment boundaries.

    breaks is the 1-based boundary vector (d_1, ..., d_{k+1}) with d_1 = 1 and
    d_{k+1} = n + 1; segment l takes values[l] on indices d_l <= i < d_{l+1}.
    """
    breaks = [int(b) for b in breaks]
    values = [float(v) for v in values]
    if len(breaks) != len(values) + 1:
        raise ValueError("need exactly one more break than segment values")
    if breaks[0] != 1 or breaks[-1] != n + 1:
        raise ValueError(f"breaks must start at 1 and end at n+1={n + 1}")
    if any(b2 <= b1 for b1, b2 in zip(breaks, breaks[1:])):
        raise ValueError("breaks must be strictly increasing")
    if bounds is None:
        bounds = (min(values), max(values))
    x_min, x_max = bounds
    if any(v < x_min or v > x_max for v in values):
        raise ValueError("segment values outside bounds")
    out = np.empty(n)
    for lo, hi, v in zip(breaks, breaks[1:], values):
        out[lo - 1 : hi - 1] = v
    return Signal(values=out, bounds=bounds)


def segments_of(x, atol=0.0):
    """Recover (breaks, values) of a piecewise-constant vector.

    Inverse of make_piecewise_signal; adjacent entries differing by more than
    atol start a new segment.
    """
    x = x.values if isinstance(x, Signal) else np.asarray(x, dtype=float)
    n = x.size
    change = np.flatnonzero(np.abs(np.diff(x)) > atol)
    breaks = [1] + [int(i) + 2 for i in change] + [n + 1]
    values = [float(x[b - 1]) for b in breaks[:-1]]
    return breaks, values


def save_instance(instance, path, signal=None):
    """Write an instance to a plain text file (header, y, then A row-major).

    The true signal is optional; when present, recovery tools can report
    reconstruction error against it.
    """
    with open(path, "w") as fh:
        fh.write(f"m {instance.m}\n")
        fh.write(f"n {instance.n}\n")
        fh.write(f"seed {instance.seed}\n")
        fh.write(f"sigma_w {instance.sigma_w!r}\n")
        fh.write(f"sigma_z {instance.sigma_z!r}\n")
        if signal is not None:
            fh.write("x_min %r\n" % signal.x_min)
            fh.write("x_max %r\n" % signal.x_max)
            fh.write("signal " + " ".join(repr(float(v)) for v in signal.values) + "\n")
        fh.write("y " + " ".join(repr(float(v)) for v in instance.y) + "\n")
        fh.write("A\n")
        for row in instance.A:
            fh.write(" ".join(repr(float(v)) for v in row) + "\n")


def load_instance(path):
    """Read an instance written by save_instance; returns (instance, signal)."""
    header = {}
    signal_values = None
    y = None
    rows = []
    with open(path) as fh:
        lines = iter(fh.read().splitlines())
    in_matrix = False
    for line in lines:
        if not line.strip():
            continue
        if in_matrix:
            rows.append([float(v) for v in line.split()])
            continue
        key, _, rest = line.partition(" ")
        if key == "A":
            in_matrix = True
        elif key == "signal":
            signal_values = np.array([float(v) for v in rest.split()])
        elif key == "y":
            y = np.array([float(v) for v in rest.split()])
        else:
            header[key] = rest
    m, n = int(header["m"]), int(header["n"])
    A = np.array(rows)
    if A.shape != (m, n) or y is None or y.shape != (m,):
        raise ValueError(f"malformed instance file {path}")
    instance = MeasurementInstance(
        A=A,
        sigma_w=float(header["sigma_w"]),
        sigma_z=float(header["sigma_z"]),
        y=y,
        seed=int(header["seed"]),
    )
    signal = None
    if signal_values is not None:
        signal = Signal(values=signal_values, bounds=(float(header["x_min"]), float(header["x_max"])))
    return instance, signal
