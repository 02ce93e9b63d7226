import numpy as np
import pytest
from scipy import stats

from byzdetect.attack import (
    AttackContext,
    FlipAttack,
    RateTargetAttack,
    attack_target,
    flip_attack,
    flip_compromised_set,
    make_attack,
    rate_target_attack,
    validate_admissible,
)
from byzdetect.errors import ConfigError
from byzdetect.limits import NetworkShape
from byzdetect.measures import substream


def ctx(compromised=(0, 1), theta=0, k=1, m=9, size=4, budget=2):
    y = np.zeros((size, len(compromised)))
    return AttackContext(tuple(compromised), theta, k, m, y, budget=budget)


class TestAdmissible:
    def test_zero_bias(self):
        assert validate_admissible(ctx(), np.zeros((4, 9)))

    def test_outside_support(self):
        bias = np.zeros((4, 9))
        bias[2, 5] = 1.0
        assert not validate_admissible(ctx(), bias)

    def test_full_budget(self):
        bias = np.zeros((4, 9))
        bias[:, [0, 1]] = 1.0
        assert validate_admissible(ctx(), bias)

    def test_set_too_large(self):
        assert not validate_admissible(ctx(compromised=(0, 1, 2)), np.zeros((4, 9)))


class TestFlip:
    def test_sets(self):
        assert flip_compromised_set(9, 2, 0) == (0, 1)
        assert flip_compromised_set(9, 2, 1) == (7, 8)
        assert flip_compromised_set(3, 2, 1) == (2,)
        assert flip_compromised_set(9, 0, 1) == ()

    def test_no_attacker(self, ref_pair):
        c = AttackContext((), 0, 1, 9, np.zeros((4, 0)))
        assert not flip_attack(c, ref_pair, substream(1)).any()

    @pytest.mark.parametrize("theta", [0, 1])
    def test_reports_follow_the_other_law(self, ref_pair, theta):
        size = 100_000
        rng = substream(2, theta)
        y = ref_pair.sample(theta, rng, (size, 2))
        c = AttackContext((0, 1), theta, 1, 9, y)
        reported = y + flip_attack(c, ref_pair, rng)[:, :2]
        ones = reported.sum()
        p = ref_pair.p1 if theta == 0 else ref_pair.p0
        chi2 = stats.chisquare([2 * size - ones, ones], [2 * size * (1 - p), 2 * size * p])
        assert chi2.pvalue > 0.01

    def test_gaussian_ks(self, gauss_profile):
        pair = gauss_profile.pair
        rng = substream(3)
        y = pair.sample(0, rng, (100_000, 1))
        reported = y + flip_attack(AttackContext((0,), 0, 1, 3, y), pair, rng)[:, :1]
        assert stats.kstest(reported.ravel(), "norm", args=(pair.a, pair.sigma)).pvalue > 0.01

    def test_llr_mean_independent_of_theta(self, ref_profile, ref_shape):
        attack = FlipAttack(ref_profile, ref_shape)
        for theta in (0, 1):
            attack.reset(theta, (20_000,))
            rng = substream(4, theta)
            y = ref_profile.pair.sample(theta, rng, (20_000, 9))
            y_prime = y + attack.bias(y, 1, rng)
            mean_first = ref_profile.pair.llr(y_prime[:, :2]).mean()
            assert mean_first == pytest.approx(ref_profile.d10, abs=0.05)


class TestRateTarget:
    def test_targets(self, ref_profile):
        x0, ok0 = attack_target(ref_profile, 0, 1.4282)
        assert ok0 and ref_profile.rate0(x0) == pytest.approx(1.4282, abs=1e-9)
        x1, ok1 = attack_target(ref_profile, 1, 1.4282)
        assert not ok1 and x1 == ref_profile.lambda_range[0]
        assert attack_target(ref_profile, 0, 0.0) == (pytest.approx(-ref_profile.d01), True)

    def test_constraint_holds_after_burn_in(self, ref_profile, ref_shape):
        attack = RateTargetAttack(ref_profile, ref_shape, 1.4282)
        attack.reset(0, (200,))
        rng = substream(5)
        for k in range(1, 41):
            y = ref_profile.pair.sample(0, rng, (200, 9))
            bias = attack.bias(y, k, rng)
            assert validate_admissible(attack.context(y, k), bias)
            reported = (y + bias)[:, :2]
            assert set(np.unique(reported)) <= {0.0, 1.0}
            assert np.all(ref_profile.rate0(attack._lam_bar, clamp=True) >= 1.4282 - 1e-9)
        assert attack.trace["feasible"] and attack.trace["unmet"] == {}

    def test_infeasible_target_recorded(self, ref_profile, ref_shape):
        attack = RateTargetAttack(ref_profile, ref_shape, 1.4282)
        attack.reset(1, (10,))
        rng = substream(6)
        for k in range(1, 4):
            y = ref_profile.pair.sample(1, rng, (10, 9))
            reported = y + attack.bias(y, k, rng)
            assert np.all(reported[:, :2] == 0.0)
        assert not attack.trace["feasible"]
        assert attack.trace["unmet"] == {1: 20, 2: 20, 3: 20}

    def test_zero_level_mimics_benign_mean(self, ref_profile, ref_shape):
        attack = RateTargetAttack(ref_profile, ref_shape, 0.0)
        attack.reset(0, (1,))
        rng = substream(7)
        for k in range(1, 501):
            y = ref_profile.pair.sample(0, rng, (1, 9))
            attack.bias(y, k, rng)
        np.testing.assert_allclose(attack._lam_bar, -ref_profile.d01, atol=0.02)

    def test_extreme_mode(self, ref_profile, ref_shape):
        attack = RateTargetAttack(ref_profile, ref_shape, 0.5, target="extreme")
        for theta, value in ((0, 1.0), (1, 0.0)):
            attack.reset(theta, (3,))
            y = ref_profile.pair.sample(theta, substream(8), (3, 9))
            assert np.all((y + attack.bias(y, 1, substream(8)))[:, :2] == value)

    def test_gaussian_exact_placement(self, gauss_profile, ref_shape):
        attack = RateTargetAttack(gauss_profile, ref_shape, 0.2)
        for theta in (0, 1):
            attack.reset(theta, (5,))
            rng = substream(9, theta)
            for k in range(1, 6):
                y = gauss_profile.pair.sample(theta, rng, (5, 9))
                attack.bias(y, k, rng)
                np.testing.assert_allclose(attack._lam_bar, gauss_profile.inv_rate(theta, 0.2), atol=1e-10)

    def test_pure_function(self, ref_profile):
        c = AttackContext((0, 1), 0, 2, 9, np.zeros((1, 2)), prev_lam_bar=np.array([[3.4, 3.4]]))
        bias, unmet = rate_target_attack(c, ref_profile, 1.4282)
        # (3.4 + l0)/2 = 1.25 has I0 below 1.4282, so the attacker must send 1 again
        assert np.all(bias[0, :2] == 1.0) and not unmet.any()


class TestFactory:
    def test_kinds(self, ref_profile, ref_shape):
        assert make_attack({"kind": "none"}, ref_profile, ref_shape).compromised_set(0) == ()
        assert make_attack({"kind": "flip"}, ref_profile, ref_shape).kind == "flip"
        a = make_attack({"kind": "rate_target", "z_s": 1.0}, ref_profile, ref_shape)
        assert a.to_dict() == {"kind": "rate_target", "z_s": 1.0, "target": "nearest"}

    @pytest.mark.parametrize(
        "spec", [{"kind": "rate_target"}, {"kind": "jam"}, {"kind": "rate_target", "z_s": 1.0, "target": "far"}]
    )
    def test_bad_specs(self, ref_profile, ref_shape, spec):
        with pytest.raises(ConfigError):
            make_attack(spec, ref_profile, ref_shape)

    def test_extreme_needs_discrete(self, gauss_profile):
        with pytest.raises(ConfigError):
            RateTargetAttack(gauss_profile, NetworkShape(9, 2), 0.1, target="extreme")
