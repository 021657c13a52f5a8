"""Piecewise-constant compression code and codebook projections.

A codeword has at most J jumps and segment values on the b-bit quantizer
grid intersected with the open interval (x_min, x_max).  The exact Euclidean
projection onto the codebook is computed by dynamic programming over jump
placements with O(1) per-segment costs via prefix sums; the approximate
projection is the compose of a greedy encoder and the decoder.
"""

import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .measurement import Signal


def quantize(x, bits):
    """b-bit floor quantizer: 2^-b * floor(2^b * x)."""
    scale = 2.0**bits
    return np.floor(np.asarray(x, dtype=float) * scale) / scale if np.ndim(x) else math.floor(x * scale) / scale


@dataclass
class PiecewiseConstantCode:
    """Code parameters plus the derived quantizer value grid.

    The grid is every b-bit quantizer output reachable from the open interval
    (x_min, x_max); it is uniform with spacing 2^-b and may start slightly
    below x_min because the quantizer floors.  Construction fails if the grid
    is empty or contains non-positive values (every codeword must be a valid
    positive signal).
    """

    n: int
    max_jumps: int
    bits: int
    bounds: tuple
    grid: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        x_min, x_max = float(self.bounds[0]), float(self.bounds[1])
        self.bounds = (x_min, x_max)
        if self.n < 1:
            raise ValueError("n must be at least 1")
        if not 0 <= self.max_jumps <= self.n - 1:
            raise ValueError("max_jumps must lie in [0, n-1]")
        if self.bits < 0:
            raise ValueError("bits must be nonnegative")
        if not x_min < x_max:
            raise ValueError("need x_min < x_max")
        scale = 2.0**self.bits
        k_min = math.floor(x_min * scale)
        k_max = math.ceil(x_max * scale) - 1
        if k_max < k_min:
            raise ValueError("empty quantizer grid for these bounds")
        self.grid = (np.arange(k_min, k_max + 1)) / scale
        if self.grid[0] <= 0:
            raise ValueError("quantizer grid reaches non-positive values; raise x_min or bits")

    @property
    def x_min(self):
        return self.bounds[0]

    @property
    def x_max(self):
        return self.bounds[1]

    @property
    def spacing(self):
        return 2.0**-self.bits

    @property
    def signal_bounds(self):
        """Box containing every codeword (grid may dip below x_min)."""
        return (min(self.x_min, float(self.grid[0])), self.x_max)

    def grid_index(self, value):
        """Index of the floor-quantized value, clamped into the grid."""
        k = math.floor(value * 2.0**self.bits) - round(self.grid[0] * 2.0**self.bits)
        return min(max(k, 0), self.grid.size - 1)

    def nearest_index(self, value):
        """Index of the nearest grid value, ties toward the smaller one."""
        k = int(math.ceil((value - self.grid[0]) / self.spacing - 0.5))
        return min(max(k, 0), self.grid.size - 1)


@dataclass(frozen=True)
class CodewordDescription:
    """Compressed representation: jump positions plus grid value indices.

    jumps are 1-based positions i with x_i != x_{i+1}; value_indices index the
    code grid, one per segment (len(jumps) + 1 of them).
    """

    jumps: tuple
    value_indices: tuple
    bit_length: int

    @property
    def jump_count(self):
        return len(self.jumps)

    def to_text(self):
        jumps = ",".join(str(j) for j in self.jumps) or "-"
        values = ",".join(str(v) for v in self.value_indices)
        return f"jumps={jumps} values={values} bits={self.bit_length}"

    @classmethod
    def from_text(cls, text):
        fields = dict(part.split("=", 1) for part in text.split())
        jumps = () if fields["jumps"] == "-" else tuple(int(v) for v in fields["jumps"].split(","))
        values = tuple(int(v) for v in fields["values"].split(","))
        return cls(jumps=jumps, value_indices=values, bit_length=int(fields["bits"]))


@dataclass(frozen=True)
class CodeStats:
    """Rate and distortion accounting for one code."""

    rate: float  # bits per sample, worst case over codewords
    distortion: float  # per-sample squared-error bound
    jump_rate_bound: float  # (J/n)(log2(1/distortion) + log2 n)
    jump_rate_bound_holds: bool


def description_bits(jump_count, code):
    """Bits to describe a codeword with the given number of jumps.

    Accounting: ceil(log2(J+1)) bits for the jump count, ceil(log2 n) per
    jump location, and ceil(log2(x_max - x_min)) + b per segment value.
    """
    count_bits = math.ceil(math.log2(code.max_jumps + 1)) if code.max_jumps > 0 else 0
    loc_bits = jump_count * math.ceil(math.log2(code.n)) if code.n > 1 else 0
    value_bits = max(0, math.ceil(math.log2(code.x_max - code.x_min)) + code.bits)
    return count_bits + loc_bits + (jump_count + 1) * value_bits


def code_stats(code):
    """Worst-case rate, quantizer distortion bound, and the jump-coded
    rate-function check (k/n)(log2(1/delta) + log2 n) with k = max_jumps."""
    rate = description_bits(code.max_jumps, code) / code.n
    distortion = 2.0 ** (-2 * code.bits)
    bound = (code.max_jumps / code.n) * (math.log2(1.0 / distortion) + math.log2(code.n))
    return CodeStats(
        rate=rate,
        distortion=distortion,
        jump_rate_bound=bound,
        jump_rate_bound_holds=rate <= bound,
    )


def elementwise_quantizer_rate(delta):
    """Rate of plain per-coordinate quantization of [0,1]^n at distortion delta."""
    return 0.5 * math.log2(1.0 / delta)


def sparse_signal_rate(k, n, delta):
    """Rate of the same quantizer restricted to k-sparse signals in [0,1]^n."""
    return (k / (2.0 * n)) * math.log2(k / (n * delta))


def encode(x, code):
    """Describe an exactly piecewise-constant signal with at most J jumps.

    Jump locations are read off the change points; segment values are floor
    quantized onto the grid (clamped at the top so x_max maps to the largest
    grid point).
    """
    values = x.values if isinstance(x, Signal) else np.asarray(x, dtype=float)
    if values.shape != (code.n,):
        raise ValueError(f"signal length {values.shape} does not match code n={code.n}")
    if values.min() < code.signal_bounds[0] or values.max() > code.x_max:
        raise ValueError("signal values outside code bounds")
    change = np.flatnonzero(np.diff(values) != 0)
    if change.size > code.max_jumps:
        raise ValueError(f"signal has {change.size} jumps, code allows {code.max_jumps}")
    jumps = tuple(int(i) + 1 for i in change)
    starts = [0] + [j for j in jumps]
    idx = tuple(code.grid_index(values[s]) for s in starts)
    return CodewordDescription(jumps=jumps, value_indices=idx, bit_length=description_bits(len(jumps), code))


def decode(desc, code):
    """Reconstruct the piecewise-constant signal of a description."""
    if len(desc.value_indices) != desc.jump_count + 1:
        raise ValueError("description needs one value per segment")
    boundaries = (0,) + desc.jumps + (code.n,)
    if any(b2 <= b1 for b1, b2 in zip(boundaries, boundaries[1:])):
        raise ValueError("jump positions must be strictly increasing in [1, n-1]")
    if any(i < 0 or i >= code.grid.size for i in desc.value_indices):
        raise ValueError("value index outside grid")
    out = np.empty(code.n)
    for lo, hi, idx in zip(boundaries, boundaries[1:], desc.value_indices):
        out[lo:hi] = code.grid[idx]
    return Signal(values=out, bounds=code.signal_bounds)


@njit(cache=True, inline="always")
def _best_segment(s1, s2, t, i, g0, h, grid_size):
    """Cost and grid index of the best constant fit to u[t:i].

    The unconstrained minimizer is the segment mean; the grid optimum is the
    nearest grid point with ties toward the smaller value (via
    ceil(frac - 0.5)), clamped into the grid.
    """
    cnt = i - t
    seg1 = s1[i] - s1[t]
    seg2 = s2[i] - s2[t]
    mean = seg1 / cnt
    k = int(math.ceil((mean - g0) / h - 0.5))
    if k < 0:
        k = 0
    elif k >= grid_size:
        k = grid_size - 1
    v = g0 + h * k
    return seg2 + v * (v * cnt - 2.0 * seg1), k


@njit(cache=True)
def _viterbi_kernel(u, g0, h, grid_size, max_jumps):
    """Trellis sweep: layer j holds the best cost of each prefix with
    exactly j jumps.  Returns (best_j, parents) for Python-side backtracking.
    O(J n^2) segment evaluations, O(1) each via prefix sums."""
    n = u.size
    s1 = np.empty(n + 1)
    s2 = np.empty(n + 1)
    s1[0] = 0.0
    s2[0] = 0.0
    for i in range(n):
        s1[i + 1] = s1[i] + u[i]
        s2[i + 1] = s2[i] + u[i] * u[i]

    prev = np.empty(n + 1)
    cur = np.empty(n + 1)
    parents = np.zeros((max_jumps, n + 1), dtype=np.int64)
    prev[0] = np.inf
    for i in range(1, n + 1):
        cost, _ = _best_segment(s1, s2, 0, i, g0, h, grid_size)
        prev[i] = cost
    best_cost = prev[n]
    best_j = 0
    for j in range(1, max_jumps + 1):
        for i in range(n + 1):
            bc = np.inf
            bt = -1
            for t in range(j, i):
                if prev[t] == np.inf:
                    continue
                cost, _ = _best_segment(s1, s2, t, i, g0, h, grid_size)
                c = prev[t] + cost
                if c < bc:
                    bc = c
                    bt = t
            cur[i] = bc
            parents[j - 1, i] = bt
        prev[:] = cur
        if prev[n] < best_cost:
            best_cost = prev[n]
            best_j = j
    return best_j, parents


def _best_segment_py(u_prefixes, t, i, code):
    """Python mirror of _best_segment (identical arithmetic)."""
    s1, s2 = u_prefixes
    cnt = i - t
    mean = (s1[i] - s1[t]) / cnt
    k = int(math.ceil((mean - code.grid[0]) / code.spacing - 0.5))
    return min(max(k, 0), code.grid.size - 1)


def project_viterbi(u, code):
    """Exact Euclidean projection of u onto the codebook.

    Dynamic programming over jump placements; ties break toward smaller
    values and earlier jumps.  Out-of-range entries of u clamp naturally
    through the grid search.
    """
    u = u.values if isinstance(u, Signal) else np.asarray(u, dtype=float)
    if u.shape != (code.n,):
        raise ValueError(f"input length {u.shape} does not match code n={code.n}")
    n = code.n
    best_j, parents = _viterbi_kernel(
        u, float(code.grid[0]), code.spacing, code.grid.size, code.max_jumps
    )

    boundaries = [n]
    pos = n
    for j in range(best_j, 0, -1):
        pos = int(parents[j - 1][pos])
        boundaries.append(pos)
    boundaries.append(0)
    boundaries.reverse()

    s1 = np.concatenate([[0.0], np.cumsum(u)])
    s2 = np.concatenate([[0.0], np.cumsum(u * u)])
    jumps = tuple(boundaries[1:-1])
    idx = tuple(
        _best_segment_py((s1, s2), lo, hi, code) for lo, hi in zip(boundaries, boundaries[1:])
    )
    desc = CodewordDescription(jumps=jumps, value_indices=idx, bit_length=description_bits(len(jumps), code))
    return decode(desc, code)


def _split_gain(u, a, b):
    """Best split of u[a:b]: (gain, position); gain is the SSE reduction."""
    seg = u[a:b]
    cnt = seg.size
    if cnt < 2 or np.all(seg == seg[0]):  # constant segments gain nothing but rounding noise
        return 0.0, -1
    c1 = np.cumsum(seg)[:-1]
    c2 = np.cumsum(seg * seg)[:-1]
    left = np.arange(1, cnt)
    right = cnt - left
    total1, total2 = c1[-1] + seg[-1], c2[-1] + seg[-1] ** 2
    sse_left = c2 - c1 * c1 / left
    sse_right = (total2 - c2) - (total1 - c1) ** 2 / right
    sse_full = total2 - total1 * total1 / cnt
    gains = sse_full - sse_left - sse_right
    t = int(np.argmax(gains))
    return float(gains[t]), a + t + 1


def greedy_encode(u, code):
    """Encoder front end for arbitrary inputs: greedy top-down segmentation.

    Splits the segment with the largest squared-error reduction until the
    jump budget is spent or no split helps, then snaps the segment means to
    the nearest grid values.  On exact codewords this recovers the true
    jumps and values.
    """
    u = u.values if isinstance(u, Signal) else np.asarray(u, dtype=float)
    if u.shape != (code.n,):
        raise ValueError(f"input length {u.shape} does not match code n={code.n}")
    boundaries = [0, code.n]
    for _ in range(code.max_jumps):
        best_gain, best_pos = 0.0, -1
        for a, b in zip(boundaries, boundaries[1:]):
            gain, pos = _split_gain(u, a, b)
            if gain > best_gain:
                best_gain, best_pos = gain, pos
        if best_pos < 0:
            break
        boundaries.append(best_pos)
        boundaries.sort()
    jumps = tuple(boundaries[1:-1])
    idx = tuple(
        code.nearest_index(float(np.mean(u[lo:hi]))) for lo, hi in zip(boundaries, boundaries[1:])
    )
    return CodewordDescription(jumps=jumps, value_indices=idx, bit_length=description_bits(len(jumps), code))


def project_approx(u, code):
    """Approximate projection decode(greedy_encode(u)).

    Never beats the exact projection but costs O(J n) instead of O(J n^2).
    """
    return decode(greedy_encode(u, code), code)


def enumerate_codebook(code):
    """Yield every codeword signal; intended for small test instances only."""
    from itertools import combinations, product

    for j in range(code.max_jumps + 1):
        for jumps in combinations(range(1, code.n), j):
            for idx in product(range(code.grid.size), repeat=j + 1):
                desc = CodewordDescription(
                    jumps=jumps, value_indices=idx, bit_length=description_bits(j, code)
                )
                yield decode(desc, code)
