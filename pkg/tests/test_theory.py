"""Bound constants against arbitrary-precision re-evaluation."""

import math

import mpmath
import pytest

from specklecs.theory import (
    BoundInputs,
    bound_constants,
    check_empirical_bound,
    recovery_bound,
    sparse_recovery_bound,
)

mpmath.mp.dps = 60


def mp_constants(m, n, x_min, x_max):
    ratio = mpmath.sqrt(mpmath.mpf(m) / n)
    gamma = ((1 + 2 * ratio) / (1 - 2 * ratio)) ** 2
    alpha = mpmath.mpf(x_max) / x_min
    bracket = 1 + 2 * alpha**2 * gamma
    rho1 = 4 * mpmath.sqrt(2) * alpha**8 * gamma**5 * bracket**2 * (1 + 2 * ratio) ** 2
    rho2 = bracket**2 * gamma**7 * alpha**14
    return gamma, alpha, rho1, rho2


def mp_bound(m, n, x_min, x_max, rate, distortion, epsilon):
    gamma, alpha, rho1, rho2 = mp_constants(m, n, x_min, x_max)
    return rho1 * mpmath.sqrt((1 + mpmath.mpf(epsilon)) * n * rate / m) + rho2 * x_max**2 * mpmath.mpf(distortion)


class TestConstants:
    def test_gamma_exact_at_one_sixteenth(self):
        # m/n = 1/16: gamma = (1.5 / 0.5)^2 = 9 exactly
        gamma, alpha, _, _ = bound_constants(16, 256, 1.0, 1.0)
        assert gamma == 9.0
        assert alpha == 1.0

    def test_rho1_against_arbitrary_precision(self):
        # alpha = 1, m/n = 1/16: rho1 = 4 sqrt(2) 9^5 (1 + 2*9)^2 (1.5)^2
        _, _, rho1, _ = bound_constants(16, 256, 1.0, 1.0)
        expected = 4 * mpmath.sqrt(2) * mpmath.mpf(9) ** 5 * 19**2 * mpmath.mpf("2.25")
        assert abs(rho1 - float(expected)) / float(expected) < 1e-12

    def test_constants_grid_to_twelve_digits(self):
        for m, n in ((16, 256), (25, 200), (40, 161)):
            for alpha in (1.0, 2.0, 10.0, 100.0):
                got = bound_constants(m, n, 1.0, alpha)
                want = mp_constants(m, n, 1.0, alpha)
                for g, w in zip(got, want):
                    assert abs(g - float(w)) / float(w) < 1e-12

    def test_extreme_inputs_overflow_honestly(self):
        # alpha = 1e20: rho1 ~ alpha^12 still fits a double, rho2 ~ alpha^18
        # exceeds its range; every factor is >= 1 so inf means the value
        # itself is unrepresentable, never an intermediate artifact
        _, _, rho1, rho2 = bound_constants(16, 256, 1e-12, 1e8)
        want = mp_constants(16, 256, 1e-12, 1e8)
        assert abs(rho1 - float(want[2])) / float(want[2]) < 1e-11
        assert rho2 == math.inf

    def test_near_boundary_gamma_stays_accurate(self):
        # m/n just under 1/4 blows gamma up to ~4e5 without overflowing
        got = bound_constants(63, 253, 1.0, 2.0)
        want = mp_constants(63, 253, 1.0, 2.0)
        for g, w in zip(got, want):
            assert math.isfinite(g)
            assert abs(g - float(w)) / float(w) < 1e-11

    def test_hypothesis_violation(self):
        with pytest.raises(ValueError):
            BoundInputs(m=64, n=256, x_min=0.5, x_max=2.0, rate=0.2, distortion=1e-4, epsilon=0.1)
        with pytest.raises(ValueError):
            bound_constants(64, 256, 0.5, 2.0)


class TestRecoveryBound:
    def inputs(self, **kw):
        base = dict(m=16, n=256, x_min=0.5, x_max=2.0, rate=0.2, distortion=1e-4, epsilon=0.1)
        base.update(kw)
        return BoundInputs(**base)

    def test_matches_arbitrary_precision_grid(self):
        for m, n in ((16, 256), (48, 256), (30, 400)):
            for alpha in (1.5, 4.0):
                for rate in (0.05, 0.5):
                    for distortion in (1e-6, 1e-2):
                        for epsilon in (0.1, 1.0):
                            out = recovery_bound(
                                BoundInputs(m=m, n=n, x_min=0.5, x_max=0.5 * alpha, rate=rate, distortion=distortion, epsilon=epsilon)
                            )
                            want = mp_bound(m, n, 0.5, 0.5 * alpha, rate, distortion, epsilon)
                            assert abs(out.mse_bound - float(want)) / float(want) < 1e-12

    def test_monotone_increasing_in_rate(self):
        values = [recovery_bound(self.inputs(rate=r)).mse_bound for r in (0.05, 0.1, 0.2, 0.4)]
        assert all(a < b for a, b in zip(values, values[1:]))

    def test_sqrt_factor_decreases_in_m(self):
        # only the sqrt((1+eps) n r / m) factor falls with m; the constants
        # gamma, rho1, rho2 grow as m approaches n/4 and dominate the total
        factors = []
        for m in (8, 16, 32, 60):
            out = recovery_bound(self.inputs(m=m))
            first_term = out.mse_bound - out.rho2 * 4.0 * 1e-4
            factors.append(first_term / out.rho1)
        assert all(a > b for a, b in zip(factors, factors[1:]))

    def test_failure_probability_terms(self):
        out = recovery_bound(self.inputs())
        m, n, rate, eps = 16, 256, 0.2, 0.1
        want = (
            n * math.exp(-0.09 * m)
            + n * math.exp(-0.84 * m)
            + 2.0 ** (-n * rate * eps + 1)
            + 2 * math.exp(-m / 2)
        )
        assert out.failure_probability_bound == pytest.approx(want, rel=1e-12)
        assert out.success_probability_raw == 1.0 - out.failure_probability_bound

    def test_probability_clamping_reported(self):
        # small m makes the raw expression negative; clamped must hit 0
        out = recovery_bound(self.inputs(m=5, n=64, rate=0.01))
        assert out.success_probability_raw < 0
        assert out.success_probability == 0.0
        assert out.clamped

    def test_probability_in_unit_interval_at_scale(self):
        out = recovery_bound(BoundInputs(m=2000, n=100_000, x_min=0.5, x_max=2.0, rate=0.05, distortion=1e-6, epsilon=0.5))
        assert 0.0 < out.success_probability <= 1.0
        assert not out.clamped


class TestSparseForm:
    def test_reduces_to_substituted_rate(self):
        k, n, m, eps = 4, 256, 32, 0.25
        sparse = sparse_recovery_bound(k, n, m, eps, 0.5, 2.0)
        substituted = recovery_bound(
            BoundInputs(m=m, n=n, x_min=0.5, x_max=2.0, rate=2.0 * k * math.log2(n) / n, distortion=1.0 / n, epsilon=eps)
        )
        assert sparse.mse_bound == pytest.approx(substituted.mse_bound, rel=1e-12)
        assert sparse.failure_probability_bound == pytest.approx(substituted.failure_probability_bound, rel=1e-12)

    def test_zero_jumps_leaves_only_distortion_term(self):
        out = sparse_recovery_bound(0, 256, 32, 0.25, 0.5, 2.0)
        assert out.mse_bound == pytest.approx(out.rho2 * 4.0 / 256, rel=1e-12)

    def test_doubling_n_scales_sqrt_term(self):
        k, m, eps = 4, 32, 0.25
        for n in (256, 1024):
            a = sparse_recovery_bound(k, n, m, eps, 0.5, 2.0)
            b = sparse_recovery_bound(k, 2 * n, m, eps, 0.5, 2.0)
            term_a = (a.mse_bound - a.rho2 * 4.0 / n) / a.rho1
            term_b = (b.mse_bound - b.rho2 * 4.0 / (2 * n)) / b.rho1
            assert term_b / term_a == pytest.approx(math.sqrt(math.log2(2 * n) / math.log2(n)), rel=1e-9)


class TestEmpiricalCheck:
    def inputs(self):
        return BoundInputs(m=48, n=256, x_min=0.5, x_max=2.0, rate=0.18, distortion=2.0**-16, epsilon=0.2)

    def test_errors_below_bound_pass(self):
        report = check_empirical_bound([0.5, 1.2, 2.0], self.inputs())
        assert report.all_within
        assert report.worst_mse == 2.0
        assert report.slack_ratio == report.mse_bound / 2.0
        assert report.slack_ratio > 1e10  # constants are astronomically loose

    def test_errors_above_bound_flagged(self):
        bound = recovery_bound(self.inputs()).mse_bound
        report = check_empirical_bound([bound * 2], self.inputs())
        assert not report.all_within

    def test_hypothesis_violation_blocks_check(self):
        with pytest.raises(ValueError):
            check_empirical_bound([0.1], BoundInputs(m=64, n=256, x_min=0.5, x_max=2.0, rate=0.18, distortion=1e-4, epsilon=0.2))

    def test_empty_errors_rejected(self):
        with pytest.raises(ValueError):
            check_empirical_bound([], self.inputs())
