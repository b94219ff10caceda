"""Conditional statistics and the four accuracy metrics."""

import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fiberfrp.metrics import (
    EPSILON_PRECISE,
    RingStructure,
    conditional_stats,
    delta_phi,
    delta_r,
    mean_phase_rotation,
    relative_error,
    snr,
)
from fiberfrp.signal import DualPolSymbolSeq, make_constellation

from conftest import random_seq


def noisy(seq, sigma, rng):
    def n(size):
        return sigma / np.sqrt(2) * (rng.standard_normal(size) + 1j * rng.standard_normal(size))

    return DualPolSymbolSeq(x=seq.x + n(len(seq)), y=seq.y + n(len(seq)))


class TestConditionalStats:
    def test_identity_stream(self, qam16, rng):
        a = random_seq(qam16, 2000, rng)
        stats = conditional_stats(a, a, qam16)
        occupied = ~stats.missing
        np.testing.assert_allclose(
            stats.mu[occupied], np.broadcast_to(stats.points, (2, 16))[occupied]
        )
        assert np.max(stats.sigma2) < 1e-24

    def test_counts_sum(self, qam16, rng):
        a = random_seq(qam16, 777, rng)
        stats = conditional_stats(a, a, qam16)
        assert stats.counts[0].sum() == 777
        assert stats.counts[1].sum() == 777

    def test_variance_concentration(self, qam16, rng):
        a = random_seq(qam16, 64_000, rng)
        sigma2 = 0.01
        r = noisy(a, np.sqrt(sigma2), rng)
        stats = conditional_stats(a, r, qam16)
        for pol in range(2):
            for p in range(16):
                count = stats.counts[pol, p]
                bound = 3 * sigma2 * np.sqrt(2 / count)
                assert abs(stats.sigma2[pol, p] - sigma2) < bound

    def test_common_rotation(self, qam16, rng):
        a = random_seq(qam16, 4000, rng)
        theta = 0.3
        r = DualPolSymbolSeq(x=np.exp(1j * theta) * a.x, y=np.exp(1j * theta) * a.y)
        stats = conditional_stats(a, r, qam16)
        occupied = ~stats.missing[0]
        np.testing.assert_allclose(
            stats.mu[0][occupied], np.exp(1j * theta) * stats.points[occupied], rtol=1e-12
        )

    def test_empty_point_warns(self, qam16):
        a = DualPolSymbolSeq(
            x=np.full(10, qam16.points[0]), y=np.full(10, qam16.points[0])
        )
        with pytest.warns(UserWarning):
            stats = conditional_stats(a, a, qam16)
        assert stats.missing.sum() == 2 * 15

    def test_off_constellation_symbol_rejected(self, qam16):
        a = DualPolSymbolSeq(x=np.array([0.123 + 0.9j]), y=np.array([qam16.points[0]]))
        with pytest.raises(ValueError):
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                conditional_stats(a, a, qam16)


class TestRings:
    def test_16qam_ring_count(self, qam16):
        rings = RingStructure.from_constellation(qam16)
        assert len(set(rings.ring_of)) == 3

    def test_16qam_phase_gaps(self, qam16):
        # 4-point inner/outer rings: 90 degrees; 8-point middle ring: the
        # minimum same-ring rotation is atan2 geometry = 36.87 degrees
        rings = RingStructure.from_constellation(qam16)
        radii = np.abs(qam16.points)
        inner = radii < radii.min() + 1e-9
        outer = radii > radii.max() - 1e-9
        middle = ~(inner | outer)
        np.testing.assert_allclose(np.degrees(rings.phi[inner]), 90.0, atol=1e-9)
        np.testing.assert_allclose(np.degrees(rings.phi[outer]), 90.0, atol=1e-9)
        # closest same-ring mate of (3+1j) is its reflection (3-1j):
        # a rotation by 2*atan2(1,3)
        np.testing.assert_allclose(
            np.degrees(rings.phi[middle]), np.degrees(2 * np.arctan2(1, 3)), atol=1e-6
        )
        assert np.degrees(rings.phi[middle][0]) == pytest.approx(36.8699, abs=1e-3)


class TestSnr:
    def test_additive_noise_oracle(self, qam16, rng):
        a = random_seq(qam16, 100_000, rng)
        sigma2 = 1e-2
        stats = conditional_stats(a, noisy(a, np.sqrt(sigma2), rng), qam16)
        expected_db = 10 * np.log10(1.0 / sigma2)
        assert snr(stats) == pytest.approx(expected_db, abs=0.1)

    def test_scale_invariance(self, qam16, rng):
        a = random_seq(qam16, 20_000, rng)
        r = noisy(a, 0.05, rng)
        r2 = DualPolSymbolSeq(x=3.0 * r.x, y=3.0 * r.y)
        s1 = snr(conditional_stats(a, r, qam16))
        s2 = snr(conditional_stats(a, r2, qam16))
        assert s2 == pytest.approx(s1, abs=1e-9)

    def test_noiseless_is_infinite(self, qam16, rng):
        a = random_seq(qam16, 2000, rng)
        assert snr(conditional_stats(a, a, qam16)) == np.inf


class TestDeltaR:
    def test_perfect(self, qam16, rng):
        a = random_seq(qam16, 2000, rng)
        assert delta_r(conditional_stats(a, a, qam16)) == pytest.approx(0.0, abs=1e-12)

    def test_uniform_expansion(self, qam16, rng):
        a = random_seq(qam16, 2000, rng)
        r = DualPolSymbolSeq(x=1.1 * a.x, y=1.1 * a.y)
        assert delta_r(conditional_stats(a, r, qam16)) == pytest.approx(0.1, rel=1e-9)


class TestDeltaPhi:
    def test_perfect(self, qam16, rng):
        a = random_seq(qam16, 2000, rng)
        rings = RingStructure.from_constellation(qam16)
        assert delta_phi(conditional_stats(a, a, qam16), rings) == pytest.approx(
            0.0, abs=1e-12
        )

    def test_full_gap_rotation_is_one(self, qam16, rng):
        a = random_seq(qam16, 2000, rng)
        rings = RingStructure.from_constellation(qam16)
        phi_of = {complex(p): phi for p, phi in zip(rings.points, rings.phi)}
        rx = np.array([s * np.exp(1j * phi_of[complex(s)]) for s in a.x])
        ry = np.array([s * np.exp(1j * phi_of[complex(s)]) for s in a.y])
        stats = conditional_stats(a, DualPolSymbolSeq(x=rx, y=ry), qam16)
        assert delta_phi(stats, rings) == pytest.approx(1.0, rel=1e-9)

    def test_mean_phase_rotation(self, qam16, rng):
        a = random_seq(qam16, 2000, rng)
        theta = 0.2
        r = DualPolSymbolSeq(x=np.exp(1j * theta) * a.x, y=np.exp(1j * theta) * a.y)
        stats = conditional_stats(a, r, qam16)
        assert mean_phase_rotation(stats) == pytest.approx(theta, rel=1e-9)


class TestRelativeError:
    def test_zero_for_equal(self, qam16, rng):
        a = random_seq(qam16, 500, rng)
        assert relative_error(a, a) == 0.0

    def test_one_for_zero_model(self, qam16, rng):
        a = random_seq(qam16, 500, rng)
        zero = DualPolSymbolSeq(x=np.zeros(500, complex), y=np.zeros(500, complex))
        assert relative_error(a, zero) == pytest.approx(1.0, rel=1e-12)

    def test_rotation_invariance(self, qam16, rng):
        a = random_seq(qam16, 500, rng)
        b = noisy(a, 0.1, rng)
        base = relative_error(a, b)
        rot = np.exp(0.77j)
        ar = DualPolSymbolSeq(x=rot * a.x, y=rot * a.y)
        br = DualPolSymbolSeq(x=rot * b.x, y=rot * b.y)
        assert relative_error(ar, br) == pytest.approx(base, rel=1e-12)

    @given(st.floats(min_value=1e-6, max_value=10.0))
    @settings(max_examples=25, deadline=None)
    def test_zero_iff_equal(self, scale):
        rng = np.random.default_rng(99)
        x = scale * (rng.standard_normal(64) + 1j * rng.standard_normal(64))
        a = DualPolSymbolSeq(x=x, y=x[::-1].copy())
        b = DualPolSymbolSeq(x=x + 1e-3, y=a.y)
        assert relative_error(a, a) == 0.0
        assert relative_error(a, b) > 0.0

    def test_zero_energy_reference(self):
        z = DualPolSymbolSeq(x=np.zeros(4, complex), y=np.zeros(4, complex))
        with pytest.raises(ValueError):
            relative_error(z, z)

    def test_precision_threshold_constant(self):
        assert EPSILON_PRECISE == 0.11


class TestCommonPhaseInvariance:
    def test_all_metrics(self, qam16, rng):
        a = random_seq(qam16, 8000, rng)
        r = noisy(a, 0.05, rng)
        rings = RingStructure.from_constellation(qam16)
        base = conditional_stats(a, r, qam16)
        # a common rotation applied to BOTH sequences: transmit symbols are
        # snapped, so rotate the received stream relative to the rotated
        # transmit grid, i.e. compare against identical relative geometry
        vals = (snr(base), delta_r(base), delta_phi(base, rings))
        rot = 1j  # 90-degree rotation maps the square grid onto itself
        a2 = DualPolSymbolSeq(x=rot * a.x, y=rot * a.y)
        r2 = DualPolSymbolSeq(x=rot * r.x, y=rot * r.y)
        stats2 = conditional_stats(a2, r2, qam16)
        vals2 = (snr(stats2), delta_r(stats2), delta_phi(stats2, rings))
        np.testing.assert_allclose(vals2, vals, rtol=1e-9)
