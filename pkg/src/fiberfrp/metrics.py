"""Accuracy metrics: SNR, radii/phase differences, and relative error.

All four metrics compare received symbol streams against the
transmitted constellation through empirical conditional statistics per
constellation point and polarization. They are invariant under a common
phase rotation applied to both polarizations of both streams.
"""

import warnings
from dataclasses import dataclass

import numpy as np

__all__ = [
    "ConditionalStats",
    "RingStructure",
    "conditional_stats",
    "snr",
    "delta_r",
    "delta_phi",
    "relative_error",
    "EPSILON_PRECISE",
]

# a model is called precise when its relative error stays at or below this
EPSILON_PRECISE = 0.11

_SNAP_TOL = 1e-9


@dataclass(frozen=True)
class ConditionalStats:
    """Per-point, per-polarization conditional means/variances and counts.

    Arrays are shaped (2, n_points): row 0 is x, row 1 is y. Points with
    zero occurrences are flagged in `missing` and excluded from every
    expectation.
    """

    points: np.ndarray
    mu: np.ndarray
    sigma2: np.ndarray
    counts: np.ndarray

    @property
    def missing(self):
        return self.counts == 0

    def weights(self, pol):
        c = self.counts[pol].astype(float)
        total = c.sum()
        if total == 0:
            raise ValueError("no occupied constellation points")
        return c / total


@dataclass(frozen=True)
class RingStructure:
    """Amplitude rings of a constellation and the per-symbol phase gap.

    phi[i] is the minimum phase rotation mapping point i onto another
    point of the same ring (well defined: every ring has >= 2 members).
    """

    points: np.ndarray
    ring_of: np.ndarray
    phi: np.ndarray

    @classmethod
    def from_constellation(cls, constellation):
        pts = constellation.points
        radii = np.abs(pts)
        ring_of = np.full(pts.size, -1, dtype=int)
        next_ring = 0
        for i in range(pts.size):
            if ring_of[i] >= 0:
                continue
            same = np.abs(radii - radii[i]) < _SNAP_TOL
            ring_of[same] = next_ring
            next_ring += 1
        phi = np.empty(pts.size)
        angles = np.angle(pts)
        for i in range(pts.size):
            mates = np.flatnonzero((ring_of == ring_of[i]) & (np.arange(pts.size) != i))
            if mates.size == 0:
                raise ValueError("ring with a single member; phase gap undefined")
            gaps = np.angle(np.exp(1j * (angles[mates] - angles[i])))
            phi[i] = np.min(np.abs(gaps))
        return cls(points=pts, ring_of=ring_of, phi=phi)


def _snap(symbols, points):
    """Nearest-point indices; errors if any symbol is off-constellation."""
    dist = np.abs(symbols[:, None] - points[None, :])
    idx = np.argmin(dist, axis=1)
    errs = dist[np.arange(symbols.size), idx]
    if np.any(errs > max(_SNAP_TOL, 1e-9)):
        bad = int(np.argmax(errs))
        raise ValueError(
            f"transmitted symbol {symbols[bad]} is not a constellation point"
        )
    return idx


def conditional_stats(a, r, constellation):
    """Empirical conditional mean/variance per point per polarization."""
    if len(a) != len(r):
        raise ValueError("sequences have different lengths")
    pts = constellation.points
    n_pts = pts.size
    mu = np.zeros((2, n_pts), dtype=np.complex128)
    sigma2 = np.zeros((2, n_pts))
    counts = np.zeros((2, n_pts), dtype=int)

    for pol, (tx, rx) in enumerate(((a.x, r.x), (a.y, r.y))):
        idx = _snap(tx, pts)
        for p in range(n_pts):
            sel = rx[idx == p]
            counts[pol, p] = sel.size
            if sel.size == 0:
                continue
            m = np.mean(sel)
            mu[pol, p] = m
            sigma2[pol, p] = float(np.mean(np.abs(sel - m) ** 2))
    if np.any(counts == 0):
        warnings.warn(
            "constellation points with zero occurrences are excluded from expectations",
            stacklevel=2,
        )
    return ConditionalStats(points=pts, mu=mu, sigma2=sigma2, counts=counts)


# conditional variances below this fraction of the signal power are
# floating-point residue of the mean subtraction, not noise
_NOISELESS_REL = 1e-24


def snr(stats):
    """Average SNR across polarizations in dB; inf for a noiseless stream."""
    ratios = []
    for pol in range(2):
        w = stats.weights(pol)
        num = float(np.sum(w * np.abs(stats.mu[pol]) ** 2))
        den = float(np.sum(w * stats.sigma2[pol]))
        ratios.append((num, den))
    if any(den <= _NOISELESS_REL * num for num, den in ratios):
        return float("inf")
    linear = 0.5 * sum(num / den for num, den in ratios)
    return 10.0 * np.log10(linear)


def delta_r(stats):
    """Normalized radii difference of the conditional means; 0 = perfect match."""
    total = 0.0
    for pol in range(2):
        w = stats.weights(pol)
        rel = (np.abs(stats.mu[pol]) - np.abs(stats.points)) / np.abs(stats.points)
        total += float(np.sum(w * rel))
    return 0.5 * total


def delta_phi(stats, rings):
    """Phase difference of the conditional means in units of the ring gap.

    Angle differences are wrapped to (-pi, pi] before dividing by the
    per-symbol minimum same-ring rotation.
    """
    total = 0.0
    for pol in range(2):
        w = stats.weights(pol)
        raw = np.angle(stats.mu[pol] * np.conj(stats.points))
        total += float(np.sum(w * raw / rings.phi))
    return 0.5 * total


def mean_phase_rotation(stats):
    """Occupancy-weighted mean angle of mu relative to the sent point (radians)."""
    total = 0.0
    for pol in range(2):
        w = stats.weights(pol)
        total += float(np.sum(w * np.angle(stats.mu[pol] * np.conj(stats.points))))
    return 0.5 * total


def relative_error(r_ref, r_model):
    """Symbol-wise relative error between a reference and a model stream."""
    if len(r_ref) != len(r_model):
        raise ValueError("sequences have different lengths")
    total = 0.0
    for ref, mod in ((r_ref.x, r_model.x), (r_ref.y, r_model.y)):
        den = float(np.mean(np.abs(ref) ** 2))
        if den == 0.0:
            raise ValueError("zero-energy reference stream")
        total += float(np.mean(np.abs(ref - mod) ** 2)) / den
    return float(np.sqrt(0.5 * total))
