import itertools
import math

import numpy as np
import pytest

from luxlink.config import Scenario, ScenarioConfig
from luxlink.scene import BaseStation, WindowLayout
from luxlink.wireless import (ChannelParams, LinkGeometry, array_factor,
                              array_phase, bs_window_geometry, expected_rate,
                              los_probability_set, los_probability_single,
                              mc_subset_probabilities, rate_map, received_power)

TWO_PI = 2 * math.pi


def channel(units=900, **kw):
    defaults = dict(wavelength=0.01, d_x=0.005, d_y=0.005, units=units,
                    omega_db=5.0, bandwidth_hz=1e8, noise_power_w=10 ** -12.4,
                    tx_power_w=1.0, n_antennas=32)
    defaults.update(kw)
    return ChannelParams(**defaults)


def geom(theta_deg, psi_deg, distance=10.0):
    return LinkGeometry(distance=distance, theta=math.radians(theta_deg),
                        psi=math.radians(psi_deg))


class TestChannelParams:
    def test_non_square_units_rejected(self):
        with pytest.raises(ValueError):
            channel(units=500)

    def test_omega_amplitude_vs_power(self):
        ch = channel()
        assert ch.omega_amp ** 2 == pytest.approx(10 ** -0.5, rel=1e-12)


class TestGeometry:
    def test_distance_by_hand(self, scenario):
        # transmitter (0,0,10), window centre (25,30,1.5)
        g = bs_window_geometry(scenario.bs, scenario.udw, scenario.room, 0)
        assert g.distance == pytest.approx(math.sqrt(25**2 + 30**2 + 8.5**2),
                                           rel=1e-12)

    def test_normal_incidence(self, scenario):
        bs = BaseStation(x=25.0, y=0.0, height=1.5, n_antennas=32, tx_power_w=1.0)
        g = bs_window_geometry(bs, scenario.udw, scenario.room, 0)
        assert g.theta == pytest.approx(0.0, abs=1e-12)

    def test_out_of_range_window(self, scenario):
        with pytest.raises(IndexError):
            bs_window_geometry(scenario.bs, scenario.udw, scenario.room, 7)

    def test_degenerate_facade_plane(self, scenario):
        bs = BaseStation(x=0.0, y=30.0, height=10.0, n_antennas=1, tx_power_w=1.0)
        with pytest.raises(ValueError):
            bs_window_geometry(bs, scenario.udw, scenario.room, 0)


class TestArrayPhase:
    def test_perfect_steering_zero_everywhere(self):
        ch = channel(units=16)
        inc = geom(35, 10)
        dep = geom(25, 290, distance=6.0)
        for i, j in itertools.product(range(1, 5), range(1, 5)):
            phi = array_phase(i, j, inc, dep, dep, ch)
            assert min(phi, TWO_PI - phi) < 1e-9

    def test_direct_substitution_value(self):
        # unit (1,1), normal incidence, departure 30 deg in the facade plane,
        # boresight steering: phase = mod(-2*pi/0.01 * sin(30deg) * 0.0025, 2*pi)
        ch = channel()
        inc = geom(0, 0)
        dep = geom(30, 0)
        steer = geom(0, 0)
        expected = (-TWO_PI / 0.01 * math.sin(math.radians(30)) * 0.0025) % TWO_PI
        assert array_phase(1, 1, inc, dep, steer, ch) == pytest.approx(expected,
                                                                       rel=1e-12)
        assert expected == pytest.approx(7 * math.pi / 4, rel=1e-12)

    def test_output_range(self):
        ch = channel()
        rng = np.random.default_rng(0)
        for _ in range(50):
            inc = geom(rng.uniform(0, 89), rng.uniform(0, 360))
            dep = geom(rng.uniform(0, 89), rng.uniform(0, 360))
            st = geom(rng.uniform(0, 89), rng.uniform(0, 360))
            i, j = rng.integers(1, 31, size=2)
            phi = array_phase(int(i), int(j), inc, dep, st, ch)
            assert 0.0 <= phi < TWO_PI

    def test_index_out_of_range(self):
        with pytest.raises(ValueError):
            array_phase(0, 1, geom(0, 0), geom(0, 0), geom(0, 0), channel())


class TestArrayFactor:
    def test_closed_equals_sum(self):
        ch = channel(units=64)
        rng = np.random.default_rng(1)
        for _ in range(10):
            inc = geom(rng.uniform(0, 80), rng.uniform(0, 360))
            dep = geom(rng.uniform(0, 80), rng.uniform(0, 360))
            st = geom(rng.uniform(0, 70), rng.uniform(0, 360))
            a = array_factor(inc, dep, st, ch, method="closed")
            b = array_factor(inc, dep, st, ch, method="sum")
            assert abs(a - b) <= 1e-9 * max(1.0, abs(b))

    @pytest.mark.parametrize("units", [4, 100, 900])
    def test_coherent_maximum(self, units):
        ch = channel(units=units)
        dep = geom(22, 130)
        af = abs(array_factor(geom(40, 10), dep, dep, ch))
        assert af == pytest.approx(units, rel=1e-9)

    def test_any_offset_beyond_beamwidth_decreases(self):
        ch = channel()
        steer = geom(0, 0)
        # half-power beamwidth of the 30-element half-wavelength aperture
        # is ~3.4 deg; anything from 4 deg on must lie strictly below peak
        for off in (4, 6, 8, 10, 20, 40):
            af = abs(array_factor(geom(0, 0), geom(off, 45), steer, ch))
            assert af < 0.5 * 900


class TestReceivedPower:
    GOLDEN = 9.662773590032152e-13   # frozen from two independent evaluations

    def test_zero_tx_power(self, scenario):
        ch = channel(tx_power_w=0.0)
        p = received_power(ch, scenario.bs, scenario.udw, scenario.room, 0,
                           np.array([30.0, 35.0, 0.8]))
        assert p == 0.0

    def test_perfect_steering_closed_form(self, scenario):
        # P = Pt Nt^2 dx^2 dy^2 lam^2 cos(theta_t) omega^2 U^2/(16 pi^2 d1^2 d2^2)
        point = np.array([30.0, 35.0, 0.8])
        center = np.array([25.0, 30.0, 1.5])
        dep = LinkGeometry.from_vector(point - center)
        lay = WindowLayout(xs=[25.0, 35.0], thetas=[dep.theta, 0.0],
                           psis=[dep.psi, 0.0])
        p = received_power(scenario.channel, scenario.bs, lay, scenario.room,
                           0, point)
        assert p == pytest.approx(self.GOLDEN, rel=1e-9)

    def test_explicit_sum_matches_golden(self, scenario):
        point = np.array([30.0, 35.0, 0.8])
        center = np.array([25.0, 30.0, 1.5])
        dep = LinkGeometry.from_vector(point - center)
        lay = WindowLayout(xs=[25.0, 35.0], thetas=[dep.theta, 0.0],
                           psis=[dep.psi, 0.0])
        p = received_power(scenario.channel, scenario.bs, lay, scenario.room,
                           0, point, method="sum")
        assert p == pytest.approx(self.GOLDEN, rel=1e-9)

    def test_inverse_fourth_power_in_distances(self):
        # fixed angles, both hops scaled by k: power drops by k^-4
        ch = channel(units=100)
        inc = geom(30, 0, distance=40.0)
        dep = geom(10, 90, distance=5.0)
        st = geom(12, 80)

        def power(inc, dep):
            af = abs(array_factor(inc, dep, st, ch))
            c = (ch.tx_power_w * ch.n_antennas**2 * ch.d_x**2 * ch.d_y**2
                 * ch.wavelength**2 * ch.omega_amp**2 / (16 * math.pi**2))
            return (c * math.cos(inc.theta) * af**2
                    / (inc.distance**2 * dep.distance**2))

        p1 = power(inc, dep)
        k = 3.0
        inc2 = LinkGeometry(inc.distance * k, inc.theta, inc.psi)
        dep2 = LinkGeometry(dep.distance * k, dep.theta, dep.psi)
        assert power(inc2, dep2) == pytest.approx(p1 / k**4, rel=1e-12)


class TestLosProbability:
    def test_zero_density(self):
        assert los_probability_single(10.0, 0.0, 0.2) == 1.0

    def test_zero_distance_residual_disk(self):
        rho, r = 0.05, 0.2
        assert los_probability_single(0.0, rho, r) == pytest.approx(
            math.exp(-rho * math.pi * r * r), rel=1e-12)

    def test_derived_value(self):
        # exp(-0.01 * (2*0.2*10 + pi*0.04)) = exp(-0.0412566...)
        assert los_probability_single(10.0, 0.01, 0.2) == pytest.approx(
            0.9595828338261168, rel=1e-12)

    def test_analytic_matches_mc_oracle(self):
        for rho, d in itertools.product((0.01, 0.05), (2.0, 10.0, 18.0)):
            analytic = los_probability_single(d, rho, 0.2)
            segs = [(np.array([0.0, 0.0]), np.array([d, 0.0]))]
            freq = mc_subset_probabilities(segs, rho, 0.2, 100_000, seed=42)
            mc = freq[1]
            se = math.sqrt(max(mc * (1 - mc), 1e-12) / 100_000)
            assert abs(analytic - mc) < 3 * se


class TestLosSubsets:
    def test_single_window_both_modes_agree(self, scenario):
        lay = WindowLayout(xs=[30.0], thetas=[0.0], psis=[0.0])
        import dataclasses
        room1 = dataclasses.replace(scenario.room, n_windows=1)
        pt = np.array([32.0, 36.0])
        p_ind = los_probability_set([0], lay, room1, pt, 0.05, 0.2,
                                    mode="independence")
        p_mc = los_probability_set([0], lay, room1, pt, 0.05, 0.2,
                                   mode="monte-carlo", n_realizations=200_000,
                                   seed=3)
        d = math.hypot(32.0 - 30.0, 36.0 - 30.0)
        assert p_ind == pytest.approx(los_probability_single(d, 0.05, 0.2))
        se = math.sqrt(p_ind * (1 - p_ind) / 200_000)
        assert abs(p_mc - p_ind) < 3 * se

    @pytest.mark.parametrize("n", [1, 2, 3, 4])
    def test_total_probability_closure(self, scenario, n):
        # all 2^n exact-subset events plus all-blocked partition the space
        rng = np.random.default_rng(n)
        p = rng.uniform(0.1, 0.95, size=n)
        total = 0.0
        for mask in range(2 ** n):
            prob = 1.0
            for b in range(n):
                prob *= p[b] if mask >> b & 1 else 1 - p[b]
            total += prob
        assert total == pytest.approx(1.0, abs=1e-12)

    def test_mc_subset_frequencies_sum_to_one(self):
        segs = [(np.array([0.0, 0.0]), np.array([8.0, 1.0])),
                (np.array([2.0, -1.0]), np.array([8.0, 1.0]))]
        freq = mc_subset_probabilities(segs, 0.05, 0.2, 50_000, seed=9)
        assert freq.sum() == pytest.approx(1.0, abs=1e-12)

    def test_collinear_links_positively_correlated(self, scenario):
        # two nearly collinear segments share blockers, so the joint clear
        # probability exceeds the independence product
        lay = WindowLayout(xs=[29.8, 30.7], thetas=[0, 0], psis=[0, 0])
        pt = np.array([30.25, 39.0])
        p_joint = los_probability_set([0, 1], lay, scenario.room, pt, 0.05, 0.2,
                                      mode="monte-carlo",
                                      n_realizations=200_000, seed=17)
        p_ind = los_probability_set([0, 1], lay, scenario.room, pt, 0.05, 0.2,
                                    mode="independence")
        se = math.sqrt(p_joint * (1 - p_joint) / 200_000)
        assert p_joint > p_ind + 3 * se


class TestExpectedRate:
    def test_single_certain_window(self, scenario):
        # one window, no blockage: gamma = B log2(1 + P / sigma^2)
        cfg = ScenarioConfig(n_windows=1, rho=0.0)
        sc1 = Scenario(cfg)
        lay = sc1.udw
        point_index = 105
        point = np.array([sc1.grid.xs[point_index], sc1.grid.ys[point_index],
                          sc1.grid.workplane_z])
        p = received_power(sc1.channel, sc1.bs, lay, sc1.room, 0, point)
        expected = 1e8 * math.log2(1 + p / sc1.channel.noise_power_w)
        assert expected_rate(point_index, lay, sc1) == pytest.approx(expected,
                                                                     rel=1e-12)

    def test_two_window_subset_enumeration(self, scenario):
        # independent oracle: enumerate the three nonempty subsets by hand
        lay = scenario.udw
        m = 117
        point = np.array([scenario.grid.xs[m], scenario.grid.ys[m],
                          scenario.grid.workplane_z])
        p = [received_power(scenario.channel, scenario.bs, lay, scenario.room,
                            n, point) for n in range(2)]
        q = [los_probability_single(
            math.hypot(scenario.grid.xs[m] - lay.xs[n],
                       scenario.grid.ys[m] - 30.0), 0.01, 0.2)
            for n in range(2)]
        b, s2 = 1e8, scenario.channel.noise_power_w

        def rate(amp):
            return b * math.log2(1 + amp ** 2 / s2)

        oracle = (q[0] * (1 - q[1]) * rate(math.sqrt(p[0]))
                  + (1 - q[0]) * q[1] * rate(math.sqrt(p[1]))
                  + q[0] * q[1] * rate(math.sqrt(p[0]) + math.sqrt(p[1])))
        assert expected_rate(m, lay, scenario) == pytest.approx(oracle, rel=1e-9)

    def test_vanishing_snr(self, scenario):
        cfg = ScenarioConfig(noise_power_w=1e6)
        sc = Scenario(cfg)
        assert expected_rate(50, sc.udw, sc) < 1e-3

    def test_mc_converges_to_independence_when_separated(self, scenario):
        # windows far apart, wide angle at the shared endpoint: the residual
        # correlation is far below the Monte-Carlo error
        lay = WindowLayout(xs=[22.0, 38.0], thetas=[0, 0], psis=[0, 0])
        m = 150   # deep point between the windows
        n_real = 100_000
        analytic = expected_rate(m, lay, scenario, mode="analytic")
        mc = expected_rate(m, lay, scenario, mode="monte-carlo",
                           n_realizations=n_real, seed=5)
        # rate variance over subset outcomes, for a 3-sigma band
        point = np.array([scenario.grid.xs[m], scenario.grid.ys[m],
                          scenario.grid.workplane_z])
        p = [received_power(scenario.channel, scenario.bs, lay, scenario.room,
                            n, point) for n in range(2)]
        q = [los_probability_single(
            math.hypot(scenario.grid.xs[m] - lay.xs[n],
                       scenario.grid.ys[m] - 30.0), 0.01, 0.2)
            for n in range(2)]
        b, s2 = 1e8, scenario.channel.noise_power_w

        def rate(amp):
            return b * math.log2(1 + amp ** 2 / s2)

        probs = [q[0] * (1 - q[1]), (1 - q[0]) * q[1], q[0] * q[1],
                 (1 - q[0]) * (1 - q[1])]
        vals = [rate(math.sqrt(p[0])), rate(math.sqrt(p[1])),
                rate(math.sqrt(p[0]) + math.sqrt(p[1])), 0.0]
        mean = sum(pr * v for pr, v in zip(probs, vals))
        var = sum(pr * (v - mean) ** 2 for pr, v in zip(probs, vals))
        se = math.sqrt(var / n_real)
        assert abs(mc - analytic) < 3 * se


class TestRateMap:
    def test_length_and_positivity(self, scenario):
        rm = rate_map(scenario.udw, scenario)
        assert rm.gamma.shape == (200,)
        assert (rm.gamma >= 0).all()

    def test_mirror_symmetry(self):
        # transmitter on the mirror plane, symmetric layout: the map must be
        # symmetric under reflection about the room centre line
        cfg = ScenarioConfig(bs_x=30.0)
        sc = Scenario(cfg)
        rm = rate_map(sc.udw, sc).gamma.reshape(10, 20)
        assert np.allclose(rm, rm[:, ::-1], rtol=1e-9)

    def test_adding_window_never_decreases(self):
        sc1 = Scenario(ScenarioConfig(n_windows=1))
        sc2 = Scenario(ScenarioConfig(n_windows=2))
        lay1 = WindowLayout(xs=[25.0], thetas=[0.0], psis=[0.0])
        lay2 = WindowLayout(xs=[25.0, 35.0], thetas=[0.0, 0.0], psis=[0.0, 0.0])
        g1 = rate_map(lay1, sc1).gamma
        g2 = rate_map(lay2, sc2).gamma
        assert (g2 >= g1 - 1e-12).all()

    def test_mc_mode_seed_reproducibility(self, scenario):
        a = rate_map(scenario.udw, scenario, mode="monte-carlo",
                     n_realizations=2000, seed=8).gamma
        b = rate_map(scenario.udw, scenario, mode="monte-carlo",
                     n_realizations=2000, seed=8).gamma
        assert np.array_equal(a, b)
