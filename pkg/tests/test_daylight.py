import math

import numpy as np
import pytest
from scipy.integrate import dblquad

from luxlink.config import Scenario, ScenarioConfig
from luxlink.daylight import (DaylightParams, direct_sky, direct_sun,
                              illuminance_map, indirect_two_bounce,
                              sun_vector, vf_corner_parallel,
                              vf_point_to_wall_rect)
from luxlink.scene import WindowLayout


def params(**kw):
    defaults = dict(theta_d_deg=86.0, psi_d_deg=220.0, e_dn_lux=5000.0,
                    e_sky_lux=8000.0, glazing_beta=0.70, f_wall=0.6,
                    f_floor=0.4, f_ceil=0.7)
    defaults.update(kw)
    return DaylightParams(**defaults)


class TestSunVector:
    def test_zenith_sun_points_down(self):
        assert np.allclose(sun_vector(0.0, 0.0), [0, 0, -1])

    def test_horizon_sun_is_horizontal(self):
        v = sun_vector(90.0, 0.0)
        assert v[2] == pytest.approx(0.0, abs=1e-12)
        assert np.linalg.norm(v) == pytest.approx(1.0)

    def test_elevation_and_azimuth_reading(self):
        # zenith 86 deg = elevation 4 deg; azimuth 220 deg clockwise from +y
        v = sun_vector(86.0, 220.0)
        assert math.degrees(math.asin(-v[2])) == pytest.approx(4.0, abs=1e-9)
        toward = -v
        azi = math.degrees(math.atan2(toward[0], toward[1])) % 360
        assert azi == pytest.approx(220.0, abs=1e-9)


class TestDirectSun:
    def test_zero_transmittance(self, scenario):
        p = params(glazing_beta=0.0)
        v = direct_sun(np.array([30.0, 35.0, 0.8]), scenario.udw,
                       scenario.room, p)
        assert v == 0.0

    def test_point_without_aperture_on_ray(self, scenario):
        # deep corner far from any sun line through a window
        v = direct_sun(np.array([39.5, 39.5, 0.8]), scenario.udw,
                       scenario.room, params())
        assert v == 0.0

    def test_lit_point_value(self, scenario):
        # construct the point by walking 1 m of wall-normal depth back along
        # the sun ray from a window-centre-height crossing
        p = params()
        s = -sun_vector(p.theta_d_deg, p.psi_d_deg)     # toward the sun
        t = 1.0 / -s[1]                                  # 1 m of depth
        aperture = np.array([25.0, 30.0, 1.5])
        point = aperture - t * np.array(s)
        got = direct_sun(point, scenario.udw, scenario.room, p)
        assert got == pytest.approx(5000 * math.sin(math.radians(4)) * 0.7,
                                    rel=1e-9)
        assert got == pytest.approx(244.1476581, rel=1e-6)

    def test_sun_below_horizon(self, scenario):
        v = direct_sun(np.array([30.0, 35.0, 0.8]), scenario.udw,
                       scenario.room, params(theta_d_deg=95.0))
        assert v == 0.0


class TestViewFactors:
    def test_parallel_unit_square_on_normal_vs_quadrature(self):
        # element at origin, unit square centred on the normal at distance 1
        vf = 4 * vf_corner_parallel(0.5, 0.5, 1.0)

        def integrand(y, x):
            r2 = x * x + y * y + 1.0
            return 1.0 / (math.pi * r2 * r2)

        oracle, _ = dblquad(integrand, -0.5, 0.5, -0.5, 0.5, epsabs=1e-10)
        assert vf == pytest.approx(oracle, abs=1e-6)

    def test_wall_rect_vs_quadrature_randomised(self):
        rng = np.random.default_rng(12)
        for _ in range(10):
            depth = rng.uniform(0.5, 8.0)
            u1 = rng.uniform(-6.0, 2.0)
            u2 = u1 + rng.uniform(0.3, 5.0)
            v1 = rng.uniform(-1.5, 1.0)
            v2 = v1 + rng.uniform(0.3, 2.5)
            vf = float(vf_point_to_wall_rect(u1, u2, v1, v2, depth))

            def integrand(z, x, d=depth):
                if z <= 0:
                    return 0.0   # below the element plane: no contribution
                r2 = x * x + d * d + z * z
                return z * d / (math.pi * r2 * r2)

            oracle, _ = dblquad(integrand, u1, u2, v1, v2,
                                epsabs=1e-10, epsrel=1e-10)
            assert vf == pytest.approx(oracle, abs=1e-6)

    def test_monotone_decreasing_in_depth(self):
        vals = [float(vf_point_to_wall_rect(-0.5, 0.5, 0.2, 1.4, d))
                for d in (0.5, 1.0, 2.0, 4.0, 8.0)]
        assert all(a > b for a, b in zip(vals, vals[1:]))

    def test_bounds_half_space(self, scenario):
        # any window rectangle seen by an up-facing interior point subtends
        # at most half the sky
        rng = np.random.default_rng(3)
        for _ in range(50):
            depth = rng.uniform(0.05, 9.0)
            u1 = rng.uniform(-10, 9.0)
            u2 = u1 + rng.uniform(0.1, 10.0)
            v1 = rng.uniform(-2, 2.0)
            v2 = v1 + rng.uniform(0.1, 3.0)
            vf = float(vf_point_to_wall_rect(u1, u2, v1, v2, depth))
            assert 0.0 <= vf <= 0.5


class TestDirectSky:
    def test_zero_transmittance(self, scenario):
        v = direct_sky(np.array([30.0, 35.0, 0.8]), scenario.udw,
                       scenario.room, params(glazing_beta=0.0))
        assert v == 0.0

    def test_sum_over_windows(self, scenario):
        p = params()
        pt = np.array([28.0, 33.0, 0.8])
        both = direct_sky(pt, scenario.udw, scenario.room, p)
        lay1 = WindowLayout(xs=[25.0], thetas=[0.0], psis=[0.0])
        lay2 = WindowLayout(xs=[35.0], thetas=[0.0], psis=[0.0])
        single = (direct_sky(pt, lay1, scenario.room, p)
                  + direct_sky(pt, lay2, scenario.room, p))
        assert both == pytest.approx(single, rel=1e-12)


class TestIndirect:
    def test_zero_transmittance(self, scenario):
        sky, sun = indirect_two_bounce(scenario.udw, scenario.room,
                                       params(glazing_beta=0.0))
        assert sky == 0.0 and sun == 0.0

    def test_zero_reflectance(self, scenario):
        sky, sun = indirect_two_bounce(scenario.udw, scenario.room,
                                       params(f_wall=0, f_floor=0, f_ceil=0))
        assert sky == 0.0 and sun == 0.0

    def test_golden_value(self, scenario):
        # frozen from a hand evaluation of the closed form: mean reflectance
        # 328/580, gain (F+F^2)/580, flux through two 1.08 m^2 apertures
        sky, sun = indirect_two_bounce(scenario.udw, scenario.room, params())
        assert sky == pytest.approx(9.231823526999879, rel=1e-12)
        assert sun == pytest.approx(8.818450134429451, rel=1e-12)


class TestIlluminanceMap:
    def test_zero_transmittance_is_dark(self):
        sc = Scenario(ScenarioConfig(glazing_beta=0.0))
        im = illuminance_map(sc.udw, sc)
        assert np.all(im.total == 0.0)

    def test_component_additivity_exact(self, scenario):
        im = illuminance_map(scenario.udw, scenario)
        total = im.sky_direct + im.sky_indirect + im.sun_direct + im.sun_indirect
        assert np.array_equal(im.total, total)

    def test_sky_only_symmetry(self):
        sc = Scenario(ScenarioConfig(e_dn_lux=0.0))
        im = illuminance_map(sc.udw, sc).total.reshape(10, 20)
        assert np.allclose(im, im[:, ::-1], atol=1e-9)

    def test_more_windows_strictly_brighter(self):
        sc2 = Scenario(ScenarioConfig(n_windows=2, e_dn_lux=0.0))
        sc3 = Scenario(ScenarioConfig(n_windows=3, e_dn_lux=0.0))
        lay2 = WindowLayout(xs=[25.0, 35.0], thetas=[0, 0], psis=[0, 0])
        lay3 = WindowLayout(xs=[25.0, 30.0, 35.0], thetas=[0, 0, 0],
                            psis=[0, 0, 0])
        i2 = illuminance_map(lay2, sc2).total
        i3 = illuminance_map(lay3, sc3).total
        assert (i3 > i2).all()

    def test_linear_in_transmittance(self):
        a = illuminance_map(Scenario(ScenarioConfig(glazing_beta=0.35)).udw,
                            Scenario(ScenarioConfig(glazing_beta=0.35)))
        b = illuminance_map(Scenario(ScenarioConfig(glazing_beta=0.70)).udw,
                            Scenario(ScenarioConfig(glazing_beta=0.70)))
        assert np.allclose(2 * a.total, b.total, rtol=1e-12)

    def test_monotone_in_sky_and_sun(self, scenario):
        base = illuminance_map(scenario.udw, scenario).total
        brighter = Scenario(ScenarioConfig(e_sky_lux=9000.0, e_dn_lux=6000.0))
        up = illuminance_map(brighter.udw, brighter).total
        assert (up >= base - 1e-12).all()

    def test_monotone_in_reflectances(self, scenario):
        base = illuminance_map(scenario.udw, scenario).total
        shinier = Scenario(ScenarioConfig(f_w=0.7, f_f=0.5, f_c=0.8))
        up = illuminance_map(shinier.udw, shinier).total
        assert (up >= base).all()
