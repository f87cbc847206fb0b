"""Tests for region construction: the loss minimizer and level regions.

The brute-force grid minimizer is the oracle for the closed-form rule; level
regions are certified by independent mass recomputation.
"""

import math

import numpy as np
import pytest
from scipy import stats

from fcrkit.model import Posterior, normal_quantile, posterior_region_mass
from fcrkit.regions import (
    CredibleRegion,
    LossParams,
    bayes_region,
    credible_region_at_level,
    expected_loss,
    oracle_region,
)


def random_posterior(rng) -> Posterior:
    return Posterior(
        w0=float(rng.uniform(0.0, 1.0)),
        center=float(rng.normal(0.0, 2.0)),
        spread2=float(rng.uniform(0.09, 6.25)),
    )


def random_loss(rng) -> LossParams:
    return LossParams(k1=float(rng.uniform(0.5, 30.0)), k2=float(rng.uniform(0.0, 5.0)))


class TestCredibleRegion:
    def test_interval_validation(self):
        with pytest.raises(ValueError):
            CredibleRegion(includes_zero=False, intervals=((1.0, 0.5),))
        with pytest.raises(ValueError):
            CredibleRegion(includes_zero=False, intervals=((0.0, 2.0), (1.0, 3.0)))

    def test_membership_semantics(self):
        region = CredibleRegion(includes_zero=True, intervals=((1.0, 2.0),))
        assert region.contains(0.0)
        assert region.contains(1.5)
        assert region.contains(2.0)  # closed endpoints
        assert not region.contains(0.5)

    def test_flag_canonicalized_from_interval_membership(self):
        region = CredibleRegion(includes_zero=False, intervals=((-1.0, 1.0),))
        assert region.includes_zero  # 0 sits inside the interval

    def test_length(self):
        region = CredibleRegion(includes_zero=True, intervals=((0.5, 2.0), (3.0, 3.5)))
        assert region.length == pytest.approx(2.0)
        assert CredibleRegion(includes_zero=True).length == 0.0


class TestLossParams:
    def test_validation(self):
        with pytest.raises(ValueError):
            LossParams(k1=-1.0, k2=0.0)
        with pytest.raises(ValueError):
            LossParams(k1=0.0, k2=0.0)
        with pytest.raises(ValueError):
            LossParams(k1=math.inf, k2=0.0)


class TestBayesRegionDegenerate:
    def test_pure_point_mass_posterior(self):
        post = Posterior(w0=1.0, center=0.0, spread2=0.5)
        region = bayes_region(post, LossParams(k1=5.0, k2=1.0))
        assert region.includes_zero
        assert region.intervals == ()

    def test_no_spike_gives_plain_interval(self):
        post = Posterior(w0=0.0, center=3.0, spread2=0.5)
        region = bayes_region(post, LossParams(k1=10.0, k2=1.0))
        assert len(region.intervals) == 1
        lo, hi = region.intervals[0]
        assert (lo + hi) / 2.0 == pytest.approx(post.center, abs=1e-12)
        assert not region.includes_zero

    def test_tiny_k1_gives_empty_continuous_part(self):
        post = Posterior(w0=0.5, center=1.0, spread2=1.0)
        region = bayes_region(post, LossParams(k1=1e-6, k2=1e-9))
        assert region.intervals == ()


class TestOracleEquivalence:
    def test_oracle_is_argmin_over_its_grid(self):
        post = Posterior(w0=0.4, center=1.2, spread2=0.8)
        loss = LossParams(k1=6.0, k2=1.5)
        best = oracle_region(post, loss, 1e-3)
        best_loss = expected_loss(best, post, loss)
        s = post.spread
        for h in np.arange(0.0, 10.0 * s, 1e-3)[::37]:
            for add_zero in (False, True):
                cand = CredibleRegion(
                    includes_zero=add_zero,
                    intervals=((post.center - h, post.center + h),),
                )
                assert best_loss <= expected_loss(cand, post, loss) + 1e-12

    def test_oracle_w0_one(self):
        post = Posterior(w0=1.0, center=0.7, spread2=0.4)
        region = oracle_region(post, LossParams(k1=4.0, k2=0.5), 1e-3)
        assert region.includes_zero and region.intervals == ()

    def test_matches_bayes_region_on_random_posteriors(self, rng):
        for _ in range(100):
            post = random_posterior(rng)
            loss = random_loss(rng)
            fast = bayes_region(post, loss)
            slow = oracle_region(post, loss, 1e-4)
            lf = expected_loss(fast, post, loss)
            ls = expected_loss(slow, post, loss)
            # closed form can only be better than the grid, up to roundoff
            assert lf <= ls + 1e-9
            assert abs(lf - ls) <= 1e-6
            if fast.intervals and slow.intervals:
                for a, b in zip(fast.intervals[0], slow.intervals[0]):
                    assert a == pytest.approx(b, abs=1e-3)
            else:
                assert bool(fast.intervals) == bool(slow.intervals)

    def test_zero_inclusion_rule(self):
        # The singleton stays exactly when its posterior gain k2 * w0 is
        # positive; at k2 = 0 the region is a plain interval.
        post = Posterior(w0=0.6, center=2.5, spread2=0.5)
        post_nospike = Posterior(w0=0.0, center=2.5, spread2=0.5)
        with_null = LossParams(k1=4.0, k2=3.0)
        no_null = LossParams(k1=4.0, k2=0.0)
        assert bayes_region(post, with_null).includes_zero
        assert not bayes_region(post, no_null).includes_zero
        assert not bayes_region(post_nospike, with_null).includes_zero
        assert oracle_region(post, with_null, 1e-3).includes_zero
        assert not oracle_region(post, no_null, 1e-3).includes_zero

    def test_degenerate_slab_matches_oracle(self, rng):
        for _ in range(25):
            post = Posterior(
                w0=float(rng.uniform(0, 1)),
                center=float(rng.normal(0, 2)),
                spread2=0.0,
            )
            loss = random_loss(rng)
            fast = bayes_region(post, loss)
            slow = oracle_region(post, loss, 1e-3)
            assert expected_loss(fast, post, loss) <= expected_loss(slow, post, loss) + 1e-12


class TestCredibleRegionAtLevel:
    def test_atom_suffices(self):
        post = Posterior(w0=0.97, center=1.0, spread2=0.5)
        region = credible_region_at_level(post, 0.95)
        assert region.includes_zero
        assert region.intervals == ()
        assert region.length == 0.0

    def test_no_spike_is_plain_credible_interval(self):
        post = Posterior(w0=0.0, center=0.8, spread2=1.0)
        region = credible_region_at_level(post, 0.95)
        lo, hi = region.intervals[0]
        z = 1.959963985
        assert lo == pytest.approx(0.8 - z, abs=1e-8)
        assert hi == pytest.approx(0.8 + z, abs=1e-8)

    def test_partial_atom_case(self):
        # Slab conditional mass (0.95 - 0.4) / 0.6, verified independently.
        post = Posterior(w0=0.4, center=1.0, spread2=0.5)
        region = credible_region_at_level(post, 0.95)
        g = (0.95 - 0.4) / 0.6
        z = normal_quantile(0.5 * (1.0 + g))
        lo, hi = region.intervals[0]
        assert lo == pytest.approx(1.0 - z * post.spread, abs=1e-12)
        assert hi == pytest.approx(1.0 + z * post.spread, abs=1e-12)
        mass = posterior_region_mass(region, post)
        assert mass >= 0.95 - 1e-10
        scipy_mass = 0.4 + 0.6 * (
            stats.norm.cdf((hi - 1.0) / post.spread) - stats.norm.cdf((lo - 1.0) / post.spread)
        )
        assert scipy_mass == pytest.approx(0.95, abs=1e-12)

    def test_mass_at_least_level_randomized(self, rng):
        for _ in range(10_000):
            post = random_posterior(rng)
            level = float(rng.uniform(0.05, 0.995))
            region = credible_region_at_level(post, level)
            assert region.achieved_mass >= level - 1e-10
            assert posterior_region_mass(region, post) >= level - 1e-10

    def test_monotone_in_level(self, rng):
        for _ in range(200):
            post = random_posterior(rng)
            l1, l2 = sorted(rng.uniform(0.05, 0.995, size=2))
            r1 = credible_region_at_level(post, float(l1))
            r2 = credible_region_at_level(post, float(l2))
            if r1.intervals:
                assert r2.intervals
                assert r2.intervals[0][0] <= r1.intervals[0][0] + 1e-12
                assert r2.intervals[0][1] >= r1.intervals[0][1] - 1e-12
            if r1.includes_zero:
                assert r2.includes_zero

    def test_length_nonincreasing_in_w0(self):
        lengths = [
            credible_region_at_level(Posterior(w0=w, center=1.0, spread2=0.7), 0.9).length
            for w in np.linspace(0.0, 0.999, 50)
        ]
        for a, b in zip(lengths, lengths[1:]):
            assert b <= a + 1e-12

    def test_rejects_bad_level(self):
        post = Posterior(w0=0.5, center=0.0, spread2=1.0)
        for bad in (0.0, 1.0, -0.3, 2.0):
            with pytest.raises(ValueError):
                credible_region_at_level(post, bad)

    def test_degenerate_slab(self):
        post = Posterior(w0=0.5, center=0.0, spread2=0.0)
        region = credible_region_at_level(post, 0.95)
        assert posterior_region_mass(region, post) == pytest.approx(1.0)
        assert region.length == 0.0
