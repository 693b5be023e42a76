"""Thresholds, the equilibrium-cycle box, and the sampled property checks."""
import math

import numpy as np
import pytest

from menugame import (
    ECBox,
    MarketInstance,
    canonical_subset_candidates,
    check_stability,
    check_unrest,
    ec_box,
    eta,
    falsify_subset,
    gamma_tilde,
    search_external_tail,
    thresholds_eta_tilde,
    verify_eps_nash,
    verify_nash,
)
from menugame.equilibria import (
    _has_internal_move,
    box_shape_warnings,
    eta_hypothesis_warnings,
    threshold_reading_divergence,
)
from menugame.sellers import unified_utility_candidates


@pytest.fixture
def fig3(fig3_instance):
    return fig3_instance


class TestThresholds:
    def test_hand_computed_m3(self, fig3):
        tl = thresholds_eta_tilde(fig3)
        gt = gamma_tilde(fig3)
        assert tl[3] == pytest.approx(0.6, abs=1e-15)
        assert tl[2] == pytest.approx(0.7 - 0.1 * gt**2, abs=1e-12)
        assert tl[2] == pytest.approx(0.699600, abs=1e-6)
        expected_2 = max(0.8 - (0.8 - tl[2]) * gt, 0.8 - (0.8 - 0.6) * gt**2)
        assert tl[1] == pytest.approx(expected_2, abs=1e-12)
        assert tl[1] == pytest.approx(0.799201, abs=1e-6)
        assert tl[0] == tl[1]

    def test_zero_gamma_thresholds_equal_eta(self):
        # the first threshold stays pinned to the second even at gamma zero
        inst = MarketInstance(4, 3, 0.0, (1.0,) * 4, (0.1, 0.2, 0.3, 0.4))
        tl = thresholds_eta_tilde(inst)
        et = eta(inst)
        assert tl[1:] == pytest.approx(et[1:], abs=1e-15)
        assert tl[0] == tl[1]

    def test_continuity_at_vanishing_gaps(self):
        base_eta = 0.6
        for t in (1e-2, 1e-4, 1e-6):
            cost = tuple(1.0 - (base_eta + t * (4 - k)) for k in range(1, 5))
            inst = MarketInstance(4, 2, 0.3, (1.0,) * 4, cost)
            tl = thresholds_eta_tilde(inst)
            assert tl[1] == pytest.approx(eta(inst)[1], abs=10 * t)

    def test_ordering_invariants(self, fig3):
        tl = thresholds_eta_tilde(fig3)
        et = eta(fig3)
        m = fig3.menu_size
        assert tl[m] == et[m]
        assert tl[0] == tl[1]
        for k in range(m):
            assert et[m] <= tl[k] <= et[k]

    def test_requires_m_at_least_two(self):
        inst = MarketInstance(3, 1, 0.1, (1.0,) * 3, (0.1, 0.2, 0.3))
        with pytest.raises(ValueError):
            thresholds_eta_tilde(inst)

    def test_reading_divergence_absent_for_m3(self, fig3):
        assert threshold_reading_divergence(fig3) == []

    def test_reading_divergence_possible_for_m4(self):
        # wide gap above the excluded seller makes the recursive anchor differ
        inst = MarketInstance(6, 4, 0.8, (1.0,) * 6, (0.02, 0.04, 0.06, 0.08, 0.6, 0.7))
        assert 2 in threshold_reading_divergence(inst)

    def test_hypothesis_warnings(self):
        inst = MarketInstance(3, 2, 0.1, (1.0,) * 3, (0.3, 0.3, 0.3))
        warnings = eta_hypothesis_warnings(inst)
        assert any("strictly decreasing" in w for w in warnings)


class TestECBox:
    def test_fig3_box(self, fig3):
        box = ec_box(fig3)
        assert box.lo == pytest.approx((0.6, 0.6, 0.6, 0.6, 0.5))
        assert box.hi[0] == box.hi[1] == pytest.approx(0.799201, abs=1e-6)
        assert box.hi[2] == pytest.approx(0.699600, abs=1e-6)
        assert box.hi[3] == 0.6 and box.hi[4] == 0.5
        assert box.interval_indices() == [0, 1, 2]

    def test_minimal_shape(self):
        inst = MarketInstance(3, 2, 0.2, (1.0,) * 3, (0.1, 0.2, 0.3))
        box = ec_box(inst)
        et = eta(inst)
        tl = thresholds_eta_tilde(inst)
        assert box.lo[:2] == pytest.approx((et[2], et[2]))
        assert box.hi[0] == box.hi[1] == pytest.approx(tl[1])
        assert box.lo[2] == box.hi[2] == pytest.approx(et[2])

    def test_gamma_zero_degenerates_to_eta_intervals(self):
        inst = MarketInstance(3, 2, 0.0, (1.0,) * 3, (0.1, 0.2, 0.3))
        box = ec_box(inst)
        et = eta(inst)
        assert box.hi[1] == pytest.approx(et[1], abs=1e-15)
        assert box.lo[1] == pytest.approx(et[2], abs=1e-15)

    def test_contains_and_subset(self, fig3):
        box = ec_box(fig3)
        assert box.contains([0.7, 0.7, 0.65, 0.6, 0.5])
        assert not box.contains([0.7, 0.7, 0.65, 0.61, 0.5])
        cands = canonical_subset_candidates(fig3)
        for _, cand in cands:
            assert cand.is_strict_subset_of(box)
        assert not box.is_strict_subset_of(box)


class TestVerifyNash:
    @pytest.fixture
    def equal(self, equal_sellers_instance):
        return equal_sellers_instance

    def test_equal_sellers_equilibrium_passes(self, equal):
        report = verify_nash(equal, [0.7, 0.7, 0.7])
        assert report.passed
        from menugame import unified_utility

        assert list(unified_utility(equal, [0.7, 0.7, 0.7])) == [0.0, 0.0, 0.0]

    def test_broken_profile_fails_with_witness(self, equal):
        report = verify_nash(equal, [0.7, 0.7, 0.6])
        assert not report.passed
        witness = report.violations[0]
        assert witness["gain"] > 1e-9

    def test_arbitrary_improving_profile_fails(self, fig3):
        report = verify_nash(fig3, [0.3, 0.3, 0.3, 0.3, 0.3])
        assert not report.passed


class TestVerifyEpsNash:
    @staticmethod
    def _instance(etas, m=2):
        cost = tuple(1.0 - e for e in etas)
        return MarketInstance(len(etas), m, 0.1, (1.0,) * len(etas), cost)

    @staticmethod
    def _profile(etas, m=2):
        # seller k posts eta_{k+1}; the excluded sellers sit at their strength
        prof = [etas[k + 1] for k in range(m)] + [etas[m]]
        prof += [etas[k] for k in range(m + 1, len(etas))]
        return prof

    def test_passes_at_hypothesis_bound(self):
        etas = (0.9, 0.89, 0.88, 0.87)
        inst = self._instance(etas)
        eps = (etas[0] - etas[2]) / min(math.e * 1.0, 1.0) + 1e-9
        report = verify_eps_nash(inst, self._profile(etas), eps)
        assert report.passed

    def test_fails_at_tenth_of_bound_when_spread(self):
        etas = (0.9, 0.7, 0.5, 0.3)
        inst = self._instance(etas)
        eps = (etas[0] - etas[2]) / min(math.e * 1.0, 1.0) / 10.0
        report = verify_eps_nash(inst, self._profile(etas), eps)
        assert not report.passed
        assert report.violations[0]["gain"] > eps

    def test_unit_epsilon_accepts_anything(self, fig3):
        report = verify_eps_nash(fig3, [0.9, 0.1, 0.5, 0.2, 0.7], 1.0)
        assert report.passed


class TestStability:
    def test_fig3_box_passes(self, fig3):
        box = ec_box(fig3)
        report = check_stability(fig3, box, 300, rng_seed=101)
        assert report.passed

    def test_lifted_floor_fails_by_escape_below(self, fig3):
        box = ec_box(fig3)
        lifted = ECBox(
            tuple(lo + 0.02 if box.is_interval(i) else lo for i, lo in enumerate(box.lo)),
            box.hi,
        )
        report = check_stability(fig3, lifted, 300, rng_seed=103)
        assert not report.passed
        witness = report.violations[0]
        assert witness["witness"] < lifted.lo[witness["seller"] - 1]

    def test_widened_box_not_rejected_by_sampling_but_flagged(self, fig3):
        # widening a component keeps the exists-an-inside-response property
        # satisfiable, so definition-faithful sampling cannot refute it; the
        # shape validator and the minimality evidence carry the rejection.
        box = ec_box(fig3)
        widened = ECBox(box.lo, (box.hi[0] + 0.05,) + box.hi[1:])
        report = check_stability(fig3, widened, 150, rng_seed=107)
        assert report.passed
        assert box_shape_warnings(fig3, widened)
        assert box.is_strict_subset_of(widened)
        assert check_stability(fig3, box, 150, rng_seed=107).passed
        assert check_unrest(fig3, box, 150, rng_seed=107).passed


class TestUnrest:
    def test_fig3_box_passes(self, fig3):
        box = ec_box(fig3)
        report = check_unrest(fig3, box, 300, rng_seed=109)
        assert report.passed

    def test_nash_point_box_fails(self, equal_sellers_instance):
        point = ECBox((0.7, 0.7, 0.7), (0.7, 0.7, 0.7))
        report = check_unrest(equal_sellers_instance, point, 10, rng_seed=3)
        assert not report.passed

    def test_all_thresholds_corner_admits_move(self, fig3):
        box = ec_box(fig3)
        corner = np.array([box.hi[0], box.hi[1], box.hi[2], 0.6, 0.5])
        assert _has_internal_move(fig3, box, corner, 1e-3, 1e-3)


class TestExternalTail:
    def test_exception_start_has_no_deep_tail(self, fig3):
        box = ec_box(fig3)
        start = np.array([box.hi[0], box.hi[1], 0.65, 0.6, 0.5])
        for eps in (1e-4, 1e-3):
            chain = search_external_tail(fig3, box, start, eps, max_depth=2)
            assert chain is None or len(chain) <= 1

    def test_interior_start_has_no_hop(self, fig3):
        box = ec_box(fig3)
        start = np.array([0.7, 0.65, 0.62, 0.6, 0.5])
        assert search_external_tail(fig3, box, start, 1e-4, 2) is None

    def test_zero_depth_finds_nothing(self, fig3):
        box = ec_box(fig3)
        start = np.array([box.hi[0], box.hi[1], 0.65, 0.6, 0.5])
        assert search_external_tail(fig3, box, start, 1e-3, 0) is None


class TestFalsifySubset:
    def test_canonical_candidates_produce_violations(self, fig3):
        for name, cand in canonical_subset_candidates(fig3):
            report = falsify_subset(fig3, cand, 200, rng_seed=113)
            assert report.details["first_violated"] is not None, name
            assert len(report.violations) > 0

    def test_full_box_rejected(self, fig3):
        box = ec_box(fig3)
        with pytest.raises(ValueError):
            falsify_subset(fig3, box, 10, rng_seed=1)


class TestThresholdProperty:
    def test_better_inside_than_above(self, fig3):
        # commissions above a seller's threshold are dominated by a point of
        # [threat, threshold] against any in-box opponent profile
        rng = np.random.default_rng(127)
        box = ec_box(fig3)
        tl = thresholds_eta_tilde(fig3)
        threat = eta(fig3)[fig3.menu_size]
        lo = np.asarray(box.lo)
        hi = np.asarray(box.hi)
        for _ in range(50):
            k = int(rng.integers(fig3.menu_size))
            profile = lo + rng.random(5) * (hi - lo)
            delta_above = float(rng.uniform(tl[k] + 1e-9, 1.0))
            u_above = unified_utility_candidates(fig3, profile, k, [delta_above])[0]
            grid = np.linspace(threat, tl[k], 2001)
            matches = np.array([profile[j] for j in range(5) if j != k])
            extras = np.concatenate([matches + 1e-3, matches - 1e-3])
            extras = extras[(extras >= threat) & (extras <= tl[k])]
            cands = np.unique(np.concatenate([grid, extras]))
            u_inside = unified_utility_candidates(fig3, profile, k, cands)
            assert u_inside.max() > u_above
