"""Array geometry: element layout, exact distances, steering vectors."""

import numpy as np
import pytest

from nearbeam.geometry import (
    SPEED_OF_LIGHT,
    ArrayConfig,
    PolarLocation,
    element_positions,
    element_target_distance,
    farfield_steering,
    nearfield_steering,
    rayleigh_distance,
)


def cfg_30ghz(n: int = 256) -> ArrayConfig:
    return ArrayConfig(num_elements=n, carrier_frequency_hz=30e9)


class TestArrayConfig:
    def test_rejects_bad_inputs(self):
        with pytest.raises(ValueError):
            ArrayConfig(num_elements=1, carrier_frequency_hz=30e9)
        with pytest.raises(ValueError):
            ArrayConfig(num_elements=8, carrier_frequency_hz=0.0)
        with pytest.raises(ValueError):
            ArrayConfig(num_elements=8, carrier_frequency_hz=30e9, element_spacing_m=-0.01)
        with pytest.raises(ValueError):
            ArrayConfig(num_elements=7.5, carrier_frequency_hz=30e9)

    def test_default_spacing_is_half_wavelength(self):
        cfg = cfg_30ghz(16)
        assert cfg.element_spacing_m == pytest.approx(SPEED_OF_LIGHT / 30e9 / 2.0, rel=1e-15)

    @pytest.mark.parametrize("n", [2, 3, 8, 17, 256])
    def test_indices_centered_and_zero_sum(self, n):
        cfg = cfg_30ghz(n)
        xs = cfg.element_x()
        assert xs.shape == (n,)
        assert abs(xs.sum()) < 1e-12 * max(1.0, np.abs(xs).max())
        assert np.allclose(xs, -xs[::-1])

    def test_element_positions_odd(self):
        cfg = ArrayConfig(3, 30e9, element_spacing_m=0.005)
        pts = element_positions(cfg)
        assert np.allclose(pts, [[-0.005, 0.0], [0.0, 0.0], [0.005, 0.0]])

    def test_element_positions_even_half_integer(self):
        cfg = ArrayConfig(2, 30e9, element_spacing_m=0.005)
        pts = element_positions(cfg)
        assert np.allclose(pts, [[-0.0025, 0.0], [0.0025, 0.0]])

    def test_max_extent_case_study(self):
        # (N-1)*d/2 with d = lambda/2 at 30 GHz
        cfg = cfg_30ghz(256)
        lam = SPEED_OF_LIGHT / 30e9
        expect = 127.5 * lam / 2.0
        assert expect == pytest.approx(0.63706, abs=5e-6)
        assert np.abs(cfg.element_x()).max() == pytest.approx(expect, rel=1e-12)


class TestPolarLocation:
    def test_front_half_plane_only(self):
        with pytest.raises(ValueError):
            PolarLocation(0.0, 5.0)
        with pytest.raises(ValueError):
            PolarLocation(np.pi, 5.0)
        with pytest.raises(ValueError):
            PolarLocation(1.0, 0.0)
        with pytest.raises(ValueError):
            PolarLocation(-0.3, 5.0)

    def test_xy(self):
        loc = PolarLocation(np.pi / 2, 20.0)
        assert np.allclose(loc.xy(), [0.0, 20.0], atol=1e-12)


class TestElementTargetDistance:
    def test_boresight_closed_form(self):
        # cos(pi/2) = 0 so r_n = sqrt(r^2 + (n d)^2)
        cfg = ArrayConfig(9, 30e9, element_spacing_m=0.004)
        loc = PolarLocation(np.pi / 2, 3.0)
        rn = element_target_distance(cfg, loc)
        expect = np.sqrt(3.0**2 + (cfg.element_x()) ** 2)
        assert np.allclose(rn, expect, rtol=1e-14)

    def test_center_element_is_reference(self):
        cfg = ArrayConfig(5, 30e9, element_spacing_m=0.006)
        loc = PolarLocation(1.1, 7.3)
        assert element_target_distance(cfg, loc, 0) == pytest.approx(7.3, rel=1e-14)

    def test_three_element_example(self):
        cfg = ArrayConfig(3, 30e9, element_spacing_m=0.005)
        loc = PolarLocation(np.pi / 2, 1.0)
        r1 = element_target_distance(cfg, loc, 1)
        assert r1 == pytest.approx(1.0000125, abs=5e-8)
        assert element_target_distance(cfg, loc, -1) == pytest.approx(r1, rel=1e-15)

    def test_law_of_cosines_oracle(self):
        # independent evaluation of sqrt(r^2 + (nd)^2 - 2 r n d cos(theta))
        rng = np.random.default_rng(7)
        cfg = ArrayConfig(32, 28e9, element_spacing_m=0.0053)
        for _ in range(25):
            loc = PolarLocation(rng.uniform(0.2, np.pi - 0.2), rng.uniform(0.5, 400.0))
            n = rng.integers(-15, 16)
            xd = float(n) * cfg.element_spacing_m
            expect = np.sqrt(
                loc.distance**2 + xd**2 - 2.0 * loc.distance * xd * np.cos(loc.angle)
            )
            got = element_target_distance(cfg, loc, float(n))
            assert got == pytest.approx(expect, rel=1e-12)

    def test_triangle_bound(self):
        rng = np.random.default_rng(12)
        cfg = cfg_30ghz(64)
        for _ in range(20):
            loc = PolarLocation(rng.uniform(0.1, np.pi - 0.1), rng.uniform(0.2, 50.0))
            rn = element_target_distance(cfg, loc)
            bound = np.abs(cfg.element_x()) + 1e-12
            assert np.all(np.abs(rn - loc.distance) <= bound)


class TestSteering:
    @pytest.mark.parametrize("n,theta,r", [(2, 0.7, 3.0), (64, np.pi / 2, 20.0), (33, 2.4, 0.8)])
    def test_unit_modulus(self, n, theta, r):
        cfg = cfg_30ghz(n)
        a = nearfield_steering(cfg, PolarLocation(theta, r))
        assert np.max(np.abs(np.abs(a) - 1.0)) < 1e-12
        b = farfield_steering(cfg, theta)
        assert np.max(np.abs(np.abs(b) - 1.0)) < 1e-12

    def test_phase_reference_at_center(self):
        cfg = ArrayConfig(5, 30e9)
        a = nearfield_steering(cfg, PolarLocation(0.9, 12.0))
        assert a[2] == pytest.approx(1.0 + 0.0j, abs=1e-12)

    def test_three_element_phase_example(self):
        # excess path 1.25e-5 m at lambda = 0.01 m gives -7.854e-3 rad
        cfg = ArrayConfig(3, SPEED_OF_LIGHT / 0.01, element_spacing_m=0.005)
        a = nearfield_steering(cfg, PolarLocation(np.pi / 2, 1.0))
        assert np.angle(a[0]) == pytest.approx(-7.854e-3, abs=1e-6)
        assert np.angle(a[2]) == pytest.approx(-7.854e-3, abs=1e-6)

    def test_farfield_formula(self):
        cfg = ArrayConfig(8, 30e9)
        assert np.allclose(farfield_steering(cfg, np.pi / 2), np.ones(8), atol=1e-12)
        # cos(theta) = 1 and d = lambda/2 puts element n at phase pi*n
        b = farfield_steering(cfg, 1e-9)
        expect = np.exp(1j * np.pi * cfg.element_indices())
        assert np.allclose(b, expect, atol=1e-6)

    def test_large_r_matches_farfield(self):
        cfg = ArrayConfig(16, 30e9)
        a = nearfield_steering(cfg, PolarLocation(np.pi / 3, 1e6))
        b = farfield_steering(cfg, np.pi / 3)
        gap = np.abs(np.angle(a * np.conj(b)))
        assert gap.max() < 1e-3

    def test_farfield_agreement_at_100_rayleigh(self):
        cfg = ArrayConfig(64, 30e9)
        r = 100.0 * rayleigh_distance(cfg)
        a = nearfield_steering(cfg, PolarLocation(1.0, r))
        b = farfield_steering(cfg, 1.0)
        gap = np.abs(np.angle(a * np.conj(b)))
        assert gap.max() < 1e-2

    def test_near_far_gap_monotone_in_range(self):
        cfg = ArrayConfig(32, 28e9)
        theta = 1.2
        dr = rayleigh_distance(cfg)
        gaps = []
        for r in np.geomspace(0.1 * dr, 100.0 * dr, 12):
            a = nearfield_steering(cfg, PolarLocation(theta, r))
            b = farfield_steering(cfg, theta)
            gaps.append(np.abs(np.angle(a * np.conj(b))).max())
        assert all(g1 > g2 for g1, g2 in zip(gaps, gaps[1:]))

    def test_mirror_angle_reverses_elements(self):
        cfg = ArrayConfig(17, 30e9)
        loc = PolarLocation(0.8, 9.0)
        mirrored = PolarLocation(np.pi - 0.8, 9.0)
        a = nearfield_steering(cfg, loc)
        am = nearfield_steering(cfg, mirrored)
        assert np.allclose(am[::-1], a, atol=1e-12)
        bm = farfield_steering(cfg, np.pi - 0.8)
        assert np.allclose(bm[::-1], farfield_steering(cfg, 0.8), atol=1e-12)


class TestRayleighDistance:
    def test_smallest_aperture(self):
        cfg = ArrayConfig(2, 30e9)
        lam = SPEED_OF_LIGHT / 30e9
        assert rayleigh_distance(cfg) == pytest.approx(lam / 2.0, rel=1e-12)

    def test_case_study_value(self):
        # with d = lambda/2 the boundary reduces to (N-1)^2 * lambda / 2
        cfg = cfg_30ghz(256)
        lam = SPEED_OF_LIGHT / 30e9
        assert rayleigh_distance(cfg) == pytest.approx(255**2 * lam / 2.0, rel=1e-12)
        assert rayleigh_distance(cfg) == pytest.approx(324.9, abs=0.05)

    def test_quadratic_in_aperture(self):
        c1 = ArrayConfig(9, 30e9, element_spacing_m=0.005)
        c2 = ArrayConfig(17, 30e9, element_spacing_m=0.005)
        assert rayleigh_distance(c2) == pytest.approx(4.0 * rayleigh_distance(c1), rel=1e-12)
