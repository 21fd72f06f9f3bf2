import cmath
import math

import numpy as np
import pytest

from dfrcopt import ArrayGeometry, response_matrix, rx_beampattern, rx_steering, tx_steering
from dfrcopt.errors import ConfigValidationError

from _oracles import toeplitz_deviation


def geom(n_tx=4, n_rx=4, spacing=0.5):
    return ArrayGeometry(n_tx=n_tx, n_rx=n_rx, spacing=spacing)


class TestSteering:
    def test_broadside_is_all_ones(self):
        np.testing.assert_allclose(tx_steering(geom(n_tx=4), 0.0), np.ones(4), atol=1e-15)
        np.testing.assert_allclose(rx_steering(geom(n_rx=8), 0.0), np.ones(8), atol=1e-15)

    def test_endfire_two_elements(self):
        # sin(pi/2) = 1 forces a half-turn phase on the second element
        np.testing.assert_allclose(tx_steering(geom(n_tx=2), math.pi / 2),
                                   [1.0, -1.0], atol=1e-12)
        np.testing.assert_allclose(rx_steering(geom(n_rx=2), -math.pi / 2),
                                   [1.0, cmath.exp(-1j * math.pi)], atol=1e-12)

    def test_quarter_turn_phases(self):
        # sin(pi/6) = 1/2 gives phase increments of pi/2
        np.testing.assert_allclose(tx_steering(geom(n_tx=4), math.pi / 6),
                                   [1.0, 1.0j, -1.0, -1.0j], atol=1e-12)

    def test_rx_steering_matches_direct_formula(self):
        # independent elementwise evaluation of the phase law
        theta = math.pi / 4
        expected = [cmath.exp(1j * 2.0 * math.pi * n * 0.5 * math.sin(theta))
                    for n in range(3)]
        np.testing.assert_allclose(rx_steering(geom(n_rx=3), theta), expected, atol=1e-14)

    def test_unit_modulus_everywhere(self, rng):
        for _ in range(50):
            g = geom(n_tx=int(rng.integers(1, 9)), n_rx=int(rng.integers(1, 9)),
                     spacing=float(rng.uniform(0.1, 1.0)))
            theta = float(rng.uniform(-math.pi / 2, math.pi / 2))
            np.testing.assert_allclose(np.abs(tx_steering(g, theta)), 1.0, atol=1e-14)
            np.testing.assert_allclose(np.abs(rx_steering(g, theta)), 1.0, atol=1e-14)

    def test_out_of_range_angle_rejected(self):
        with pytest.raises(ConfigValidationError):
            tx_steering(geom(), 2.0)
        with pytest.raises(ConfigValidationError):
            rx_steering(geom(), float("nan"))


class TestResponseMatrix:
    def test_broadside_all_ones(self):
        a = response_matrix(geom(n_tx=3, n_rx=5), 0.0)
        np.testing.assert_allclose(a, np.ones((5, 3)), atol=1e-14)

    def test_rank_one_and_frobenius(self, rng):
        for _ in range(20):
            g = geom(n_tx=int(rng.integers(2, 8)), n_rx=int(rng.integers(2, 8)))
            theta = float(rng.uniform(-math.pi / 2, math.pi / 2))
            a = response_matrix(g, theta)
            s = np.linalg.svd(a, compute_uv=False)
            assert s[1] < 1e-12 * s[0]
            assert abs(np.linalg.norm(a) ** 2 - g.n_tx * g.n_rx) < 1e-10

    def test_outer_product_identity(self, rng):
        for _ in range(20):
            g = geom(n_tx=int(rng.integers(1, 7)), n_rx=int(rng.integers(1, 7)))
            theta = float(rng.uniform(-math.pi / 2, math.pi / 2))
            expected = np.outer(rx_steering(g, theta), tx_steering(g, theta).conj())
            np.testing.assert_allclose(response_matrix(g, theta), expected, atol=1e-14)

    def test_rx_outer_product_is_hermitian_toeplitz(self, rng):
        for _ in range(25):
            g = geom(n_rx=int(rng.integers(2, 10)))
            theta = float(rng.uniform(-math.pi / 2, math.pi / 2))
            a_r = rx_steering(g, theta)
            outer = np.outer(a_r, a_r.conj())
            assert np.max(np.abs(outer - outer.conj().T)) < 1e-12
            assert toeplitz_deviation(outer) < 1e-12


class TestBeampattern:
    def test_single_element_combiner_is_flat(self):
        g = geom(n_rx=6)
        w = np.zeros(6, dtype=complex)
        w[0] = 1.0
        gains = rx_beampattern(w, g, np.linspace(-1.5, 1.5, 41))
        np.testing.assert_allclose(gains, 1.0, atol=1e-12)

    def test_matched_combiner_peaks_at_target(self):
        g = geom(n_rx=8)
        theta0 = 0.5
        w = rx_steering(g, theta0) / math.sqrt(8)
        grid = np.linspace(-math.pi / 2, math.pi / 2, 181)
        gains = rx_beampattern(w, g, grid)
        assert abs(rx_beampattern(w, g, [theta0])[0] - 8.0) < 1e-10
        assert np.max(gains) <= 8.0 + 1e-10

    def test_cauchy_schwarz_bound(self, rng):
        g = geom(n_rx=7)
        w = rng.standard_normal(7) + 1j * rng.standard_normal(7)
        w /= np.linalg.norm(w)
        gains = rx_beampattern(w, g, np.linspace(-1.5, 1.5, 301))
        assert np.max(gains) <= 7.0 + 1e-10

    def test_empty_grid(self):
        assert rx_beampattern(np.array([1.0 + 0j]), geom(n_rx=1), []).size == 0
