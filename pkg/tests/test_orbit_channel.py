import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from leorach.orbit_channel import (
    ConstellationConfig,
    GroundUser,
    LinkBudget,
    distance_matrix,
    link_rate,
    satellite_positions,
    user_satellite_distance,
    wrapped_offset,
)


def lane(offsets, step, L=100.0, altitude=1.0):
    return ConstellationConfig(len(offsets), lane_length=L, altitude=altitude,
                               orbit_velocity=step, slot_duration=1.0,
                               initial_offsets=tuple(offsets))


def reference_rate(d, interferers, W, P, alpha, noise):
    # written out by hand, independent of link_rate
    signal = 1.0 / d ** alpha
    interference = sum(1.0 / x ** alpha for x in interferers)
    return (W / P) * math.log(1.0 + signal / (interference + noise)) / math.log(2.0)


class TestConfig:
    def test_default_offsets_equally_spaced(self):
        cc = ConstellationConfig(4, lane_length=2000.0)
        assert cc.initial_offsets == (0.0, 500.0, 1000.0, 1500.0)

    def test_default_step_is_lane_over_200(self):
        cc = ConstellationConfig(4)
        assert cc.step_length == pytest.approx(cc.lane_length / 200)
        assert cc.revolution_slots == 200

    @pytest.mark.parametrize("kwargs", [
        dict(num_satellites=0),
        dict(num_satellites=2, lane_length=0.0),
        dict(num_satellites=2, altitude=-1.0),
        dict(num_satellites=2, orbit_velocity=0.0),
        dict(num_satellites=2, initial_offsets=(0.0, 0.0)),
        dict(num_satellites=2, initial_offsets=(0.0, 2000.0)),
        dict(num_satellites=2, initial_offsets=(0.0,)),
    ])
    def test_rejects_invalid(self, kwargs):
        with pytest.raises(ValueError):
            ConstellationConfig(**kwargs)

    @pytest.mark.parametrize("kwargs", [
        dict(bandwidth=0.0), dict(num_pilots=0), dict(pathloss_exponent=1.5),
        dict(noise_over_power=-1e-9)])
    def test_budget_rejects_invalid(self, kwargs):
        with pytest.raises(ValueError):
            LinkBudget(**kwargs)


class TestSatellitePositions:
    def test_zero_step_identity(self):
        assert satellite_positions(lane([0.0], 10.0), 0).tolist() == [0.0]

    def test_twelve_steps(self):
        assert satellite_positions(lane([0.0], 10.0), 12).tolist() == [20.0]

    def test_wraparound(self):
        assert satellite_positions(lane([0.0, 50.0], 25.0), 2).tolist() == [50.0, 0.0]

    def test_negative_slot_rejected(self):
        with pytest.raises(ValueError):
            satellite_positions(lane([0.0], 10.0), -1)

    @given(st.integers(0, 10_000))
    def test_period(self, n):
        cc = lane([0.0, 12.5, 60.0], 4.0)  # 100 / 4 = 25 slots per revolution
        np.testing.assert_allclose(satellite_positions(cc, n),
                                   satellite_positions(cc, n + 25), atol=1e-9)


class TestDistance:
    def test_overhead(self):
        cc = lane([0.0], 1.0, L=2000.0, altitude=500.0)
        assert user_satellite_distance(GroundUser(0, 300.0), 300.0, cc) == 500.0

    def test_wraparound_shortest_path(self):
        # altitude must be positive; 1e-9 km vanishes against a 10 km offset
        cc = lane([0.0], 1.0, L=100.0, altitude=1e-9)
        assert user_satellite_distance(GroundUser(0, 0.0), 90.0, cc) == 10.0

    def test_three_four_five(self):
        cc = lane([0.0], 1.0, L=100.0, altitude=40.0)
        assert user_satellite_distance(GroundUser(0, 0.0), 30.0, cc) == 50.0

    @given(st.floats(0, 99.999), st.floats(0, 99.999), st.floats(0.1, 500))
    def test_symmetry_and_lower_bound(self, a, b, h):
        cc = lane([0.0], 1.0, L=100.0, altitude=h)
        d1 = user_satellite_distance(a, b, cc)
        d2 = user_satellite_distance(b, a, cc)
        assert d1 == d2
        assert d1 >= h

    def test_matrix_matches_scalar(self):
        cc = ConstellationConfig(4)
        users = [GroundUser(0, 10.0), GroundUser(1, 1900.0)]
        D = distance_matrix(users, cc, 37)
        sats = satellite_positions(cc, 37)
        for j, u in enumerate(users):
            for k, x in enumerate(sats):
                assert D[j, k] == pytest.approx(user_satellite_distance(u, x, cc), rel=1e-15)

    @given(st.floats(0, 99.999), st.floats(0, 99.999))
    def test_wrapped_offset_range(self, a, b):
        off = float(wrapped_offset(a, b, 100.0))
        assert -50.0 <= off < 50.0
        assert abs(off) == pytest.approx(min(abs(a - b), 100 - abs(a - b)), abs=1e-9)


class TestLinkRate:
    def test_noise_only(self):
        assert link_rate(1.0, [], LinkBudget(1.0, 1, 2.0, 1.0)) == 1.0

    def test_interference_only(self):
        assert link_rate(1.0, [1.0], LinkBudget(2.0, 2, 2.0, 0.0)) == 1.0

    def test_low_snr(self):
        assert link_rate(1.0, [], LinkBudget(1.0, 1, 2.0, 3.0)) == pytest.approx(
            math.log2(4 / 3), rel=1e-15)

    @pytest.mark.parametrize("d, intf", [(0.0, []), (-1.0, []), (1.0, [0.0])])
    def test_rejects_nonpositive(self, d, intf):
        with pytest.raises(ValueError):
            link_rate(d, intf, LinkBudget(1.0, 1, 2.0, 1.0))

    def test_cross_check_random(self):
        rng = np.random.default_rng(7)
        for _ in range(1000):
            W = rng.uniform(1e3, 1e8)
            P = int(rng.integers(1, 9))
            alpha = rng.uniform(2.0, 4.0)
            noise = rng.uniform(0.0, 1e-3)
            d = rng.uniform(1.0, 3000.0)
            intf = list(rng.uniform(1.0, 3000.0, size=rng.integers(0, 5)))
            if noise == 0.0 and not intf:
                continue
            budget = LinkBudget(W, P, alpha, noise)
            got = link_rate(d, intf, budget)
            want = reference_rate(d, intf, W, P, alpha, noise)
            assert abs(got - want) <= 1e-12 * abs(want)

    @given(st.floats(1.0, 1000.0), st.floats(1.0, 1000.0), st.floats(1.0, 1000.0))
    @settings(max_examples=200)
    def test_monotone(self, d, extra, intf):
        b = LinkBudget(1e6, 2, 2.0, 1e-6)
        assert link_rate(d + extra, [intf], b) < link_rate(d, [intf], b)
        assert link_rate(d, [intf], b) < link_rate(d, [], b)

    def test_scaling(self):
        b1 = LinkBudget(1e6, 2, 2.0, 1e-6)
        b2 = LinkBudget(2e6, 2, 2.0, 1e-6)
        b3 = LinkBudget(1e6, 4, 2.0, 1e-6)
        r = link_rate(700.0, [900.0], b1)
        assert link_rate(700.0, [900.0], b2) == 2 * r
        assert link_rate(700.0, [900.0], b3) == r / 2
