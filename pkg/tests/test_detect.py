import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from byzdetect import detect
from byzdetect.detect import (
    QOutOfMDetector,
    SecureDetector,
    bayes_decision,
    make_detector,
    qom_error_probs,
    qom_exact_error,
    qom_optimize,
    qom_schedule,
    secure_decision,
    secure_sensors_decision,
    smallest_sum,
    trimmed_decision,
    unknown_n_decision,
)
from byzdetect.errors import ConfigError, OutOfSupport, UnsupportedPair
from byzdetect.limits import NetworkShape
from byzdetect.measures import BernoulliPair, substream
from byzdetect.rates import build_profile


def ebal(rates, z, n):
    """Union over (m-n)-subsets of {sum of rates on the subset < z}, by enumeration."""
    m = rates.shape[-1]
    hit = np.zeros(rates.shape[:-1], dtype=bool)
    for subset in itertools.combinations(range(m), m - n):
        hit |= rates[..., list(subset)].sum(axis=-1) < z
    return hit


def region_decision(profile, lam_bar, z, n):
    """0 on eBal(0) or (negative half-space minus eBal(1)), 1 elsewhere."""
    r0 = profile.rate(0, lam_bar, clamp=True)
    r1 = profile.rate(1, lam_bar, clamp=True)
    negative = lam_bar.sum(axis=-1) < 0
    lam_minus = ebal(r0, z, n) | (negative & ~ebal(r1, z, n))
    return np.where(lam_minus, 0.0, 1.0)


def random_stats(profile, rng, size, m):
    lo, hi = profile.lambda_range
    return rng.uniform(lo, hi, size=(size, m))


@settings(max_examples=80)
@given(
    values=arrays(np.float64, st.integers(1, 10), elements=st.floats(-50, 50)),
    data=st.data(),
)
def test_smallest_sum_equals_subset_search(values, data):
    count = data.draw(st.integers(0, len(values)))
    brute = min((sum(values[list(s)]) for s in itertools.combinations(range(len(values)), count)), default=0.0)
    assert smallest_sum(values, count) == pytest.approx(brute, abs=1e-9)


class TestSecure:
    @pytest.mark.parametrize("z", [0.2, 1.0, 1.4282, 1.5987])
    def test_region_membership(self, ref_profile, z):
        lb = random_stats(ref_profile, substream(5, int(z * 1e4)), 2000, 9)
        np.testing.assert_array_equal(secure_decision(ref_profile, lb, z, 2), region_decision(ref_profile, lb, z, 2))

    def test_zero_level_is_bayes(self, ref_profile):
        lb = random_stats(ref_profile, substream(6), 5000, 9)
        np.testing.assert_array_equal(secure_decision(ref_profile, lb, 0.0, 2), bayes_decision(lb))

    def test_gaussian_region_membership(self, gauss_profile):
        lb = substream(8).normal(0, 1.0, size=(2000, 7))
        np.testing.assert_array_equal(
            secure_decision(gauss_profile, lb, 0.3, 2), region_decision(gauss_profile, lb, 0.3, 2)
        )

    def test_one_sort_per_statistic(self, ref_profile, monkeypatch):
        calls = []
        real = np.sort

        def counting_sort(*a, **kw):
            calls.append(1)
            return real(*a, **kw)

        monkeypatch.setattr(detect.np, "sort", counting_sort)
        monkeypatch.setattr(itertools, "combinations", None)
        secure_decision(ref_profile, np.zeros((3, 9)), 1.0, 2)
        assert len(calls) == 2  # one per hypothesis

    def test_rejects_inadmissible_level(self, ref_profile, ref_shape):
        with pytest.raises(ConfigError):
            SecureDetector(ref_profile, ref_shape, 1.7)

    def test_tie_decides_one(self, ref_profile):
        assert bayes_decision(np.zeros(9)) == 1.0


class TestDisjointness:
    def test_extended_balls_do_not_meet(self, ref_profile):
        # admissible pair: (h_e(z), z)
        z = 1.4282
        rng = substream(9)
        r = rng.uniform(-0.9, 1.7, size=(200_000, 9))
        in0 = ebal(ref_profile.rate0(r), z, 2)
        in1 = ebal(ref_profile.rate1(r), z, 2)
        assert in0.any() and in1.any()
        assert not (in0 & in1).any()


def test_secure_sensors_reduces_to_secure(ref_profile):
    lb = random_stats(ref_profile, substream(10), 2000, 9)
    np.testing.assert_array_equal(
        secure_sensors_decision(ref_profile, lb, 1.2, 2, 0), secure_decision(ref_profile, lb, 1.2, 2)
    )


def test_secure_sensors_against_enumeration(ref_profile):
    m, n, m_s, z = 8, 2, 2, 1.1
    lb = random_stats(ref_profile, substream(11), 1000, m)
    got = secure_sensors_decision(ref_profile, lb, z, n, m_s)
    r0, r1 = ref_profile.rate(0, lb, clamp=True), ref_profile.rate(1, lb, clamp=True)
    expected = np.empty(len(lb))
    for t in range(len(lb)):
        def delta(r):
            best = min(r[t, list(s)].sum() for s in itertools.combinations(range(m - m_s), m - m_s - n))
            return best + r[t, m - m_s:].sum()
        if delta(r0) < z:
            expected[t] = 0.0
        elif delta(r1) < z:
            expected[t] = 1.0
        else:
            expected[t] = float(lb[t].sum() >= 0)
    np.testing.assert_array_equal(got, expected)


class TestUnknownN:
    def test_single_level_is_secure(self, ref_profile):
        lb = random_stats(ref_profile, substream(12), 2000, 9)
        np.testing.assert_array_equal(
            unknown_n_decision(ref_profile, lb, [0.0, 0.0, 1.4282]), secure_decision(ref_profile, lb, 1.4282, 2)
        )

    def test_first_firing_level_wins(self, ref_profile):
        # n_a = 2 fires on delta_1, n_a = 1 would fire on delta_0
        lb = np.array([[1.6] * 7 + [-0.85] * 2])
        r0 = ref_profile.rate0(lb)
        assert smallest_sum(r0, 7) >= 1.0
        assert unknown_n_decision(ref_profile, lb, [0.0, 3.0, 1.0])[0] == 1.0

    def test_detector_validates_tuple(self, ref_profile, ref_shape):
        with pytest.raises(ConfigError):
            make_detector({"kind": "unknown_n", "z_tuple": [0.0, 0.0, 2.0]}, ref_profile, ref_shape)


class TestTrimmed:
    def test_middle_sum(self):
        assert trimmed_decision(np.array([5.0, 5.0, -0.3, -0.1, 0.2, -9.0, -9.0]), 2) == 0.0
        assert trimmed_decision(np.array([-5.0, -5.0, 0.3, 0.1, -0.2, 9.0, 9.0]), 2) == 1.0

    def test_needs_redundancy(self, ref_profile):
        with pytest.raises(ConfigError):
            make_detector({"kind": "trimmed"}, ref_profile, NetworkShape(4, 2))


class TestRecursion:
    @pytest.mark.parametrize("kind", ["bayes", "secure", "trimmed"])
    def test_running_mean(self, ref_profile, ref_shape, kind):
        spec = {"kind": kind, "z_s": 1.0} if kind == "secure" else {"kind": kind}
        det = make_detector(spec, ref_profile, ref_shape)
        rng = substream(13)
        ys = ref_profile.pair.sample(1, rng, (50, 4, 9))
        det.reset((4,))
        for y in ys:
            det.step(y)
        np.testing.assert_allclose(det.lam_bar, ref_profile.pair.llr(ys).mean(axis=0), atol=1e-10)
        assert det.k == 50

    def test_out_of_support_propagates(self, ref_profile, ref_shape):
        det = make_detector({"kind": "bayes"}, ref_profile, ref_shape)
        with pytest.raises(OutOfSupport):
            det.step(np.full(9, 0.5))

    def test_unknown_kind(self, ref_profile, ref_shape):
        with pytest.raises(ConfigError):
            make_detector({"kind": "oracle"}, ref_profile, ref_shape)

    def test_decisions_are_binary(self, ref_profile, ref_shape):
        det = make_detector({"kind": "secure", "z_s": 1.4282}, ref_profile, ref_shape)
        det.reset((1000,))
        rng = substream(14)
        for _ in range(5):
            d = det.step(ref_profile.pair.sample(0, rng, (1000, 9)))
            assert set(np.unique(d)) <= {0.0, 1.0}

    def test_secure_close_to_bayes_without_attack(self, ref_profile, ref_shape):
        rng = substream(15)
        errs = {}
        for kind in ("bayes", "secure"):
            det = make_detector({"kind": kind, "z_s": 1.4282}, ref_profile, ref_shape)
            det.reset((20000,))
            for _ in range(3):
                d = det.step(ref_profile.pair.sample(1, substream(15, _), (20000, 9)))
            errs[kind] = 1.0 - d.mean()
        assert errs["secure"] <= errs["bayes"] + 0.01


class TestQOutOfM:
    def test_count_rule(self, ref_profile):
        det = QOutOfMDetector(ref_profile, NetworkShape(3, 1), [2, 3])
        det.reset(())
        assert det.step(np.array([1.0, 1.0, 0.0])) == 1.0
        assert det.step(np.array([0.0, 0.0, 0.0])) == 0.0

    def test_binary_only(self, gauss_profile, ref_shape):
        with pytest.raises(UnsupportedPair):
            QOutOfMDetector(gauss_profile, ref_shape, [1])
        with pytest.raises(UnsupportedPair):
            qom_exact_error(gauss_profile, ref_shape, 3, 1)

    def test_exact_against_detector_simulation(self, ref_profile, ref_shape):
        # worst attack: compromised sensors report 1 under theta=0 and 0 under theta=1
        trials, q = 1_000_000, 4
        err = qom_exact_error(ref_profile, ref_shape, q, 1)
        rng = substream(16)
        for theta, p_exact in ((0, err.p_fa), (1, err.p_miss)):
            honest = ref_profile.pair.sample(theta, rng, (trials, 7))
            attacked = np.full((trials, 2), 1.0 - theta)
            det = QOutOfMDetector(ref_profile, ref_shape, [q])
            det.reset((trials,))
            d = det.step(np.concatenate([attacked, honest], axis=1))
            p_mc = np.mean(d if theta == 0 else 1.0 - d)
            se = math.sqrt(max(p_exact * (1 - p_exact), 1e-12) / trials)
            assert abs(p_mc - p_exact) <= 3 * se

    @pytest.mark.parametrize("k", [1, 3, 10])
    def test_degenerate_thresholds(self, ref_profile, ref_shape, k):
        for q in (0, 2 * k, 7 * k + 1, 9 * k):
            assert qom_exact_error(ref_profile, ref_shape, q, k).worst == pytest.approx(1.0, abs=1e-12)

    @given(q=st.integers(0, 30), k=st.integers(1, 4))
    def test_indistinguishable_hypotheses(self, q, k):
        err = qom_error_probs(0.3, 0.3, 9, 2, q, k)
        assert err.p_miss + err.p_fa >= 1.0 - 1e-12

    def test_single_feasible_threshold(self, ref_profile):
        assert qom_optimize(ref_profile, NetworkShape(3, 1), 1).q_star == 2

    def test_optimum_by_exhaustive_search(self, ref_profile, ref_shape):
        for k in (1, 4, 9):
            worst = [qom_exact_error(ref_profile, ref_shape, q, k).worst for q in range(2 * k + 1, 7 * k + 1)]
            best = qom_optimize(ref_profile, ref_shape, k)
            assert best.worst_error == pytest.approx(min(worst), rel=1e-12)
            assert best.q_star == 2 * k + 1 + int(np.argmin(worst))

    def test_symmetric_threshold_is_central(self):
        profile = build_profile(BernoulliPair(0.2, 0.8))
        shape = NetworkShape(9, 2)
        for k in (1, 5, 12):
            assert abs(qom_optimize(profile, shape, k).q_star - 9 * k / 2) <= 1.0

    def test_security_exponent(self, ref_profile, ref_shape):
        worst = np.array([o.worst_error for o in qom_schedule(ref_profile, ref_shape, 40)])
        k = np.arange(1, 41)
        slope = -np.polyfit(k[19:], np.log(worst[19:]), 1)[0]
        assert slope == pytest.approx(0.69, abs=0.1)

    def test_schedule_exhausted(self, ref_profile, ref_shape):
        det = QOutOfMDetector(ref_profile, ref_shape, [3])
        det.reset(())
        det.step(np.zeros(9))
        with pytest.raises(ConfigError):
            det.step(np.zeros(9))
