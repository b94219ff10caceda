"""Constellations, RRC pulse shaping, and linear modulation.

Transmitter side of the simulated link: symbol sequences are mapped onto
an energy-normalized real pulse and scaled to the requested launch power.
All sequences are treated as cyclically extended, so the generated
waveform is periodic and FFT wraparound downstream is benign.
"""

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "Constellation",
    "PulseShape",
    "DualPolSymbolSeq",
    "LinkPower",
    "SampledField",
    "make_constellation",
    "rrc_taps",
    "modulate",
]


class ConfigurationError(ValueError):
    """Invalid user-supplied parameter (unknown label, bad roll-off, ...)."""


@dataclass(frozen=True)
class Constellation:
    """Zero-mean, unit-energy complex constellation.

    Points never include the origin and every amplitude ring holds at
    least two points (required by the ring-based phase metric).
    """

    points: np.ndarray
    label: str

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.complex128)
        object.__setattr__(self, "points", pts)
        if abs(np.mean(pts)) > 1e-12:
            raise ConfigurationError(f"{self.label}: constellation is not zero-mean")
        if abs(np.mean(np.abs(pts) ** 2) - 1.0) > 1e-12:
            raise ConfigurationError(f"{self.label}: constellation is not unit-energy")
        if np.any(np.abs(pts) < 1e-12):
            raise ConfigurationError(f"{self.label}: constellation contains the origin")

    @property
    def second_moment(self):
        """E{A^2} of the constituent constellation (0 for square QAM)."""
        return complex(np.mean(self.points**2))


@dataclass(frozen=True)
class PulseShape:
    """Root-raised-cosine pulse description.

    span is the truncation half-width in symbols; the discrete taps run
    over t in [-span*T, span*T].
    """

    rolloff: float
    symbol_period: float
    span: int = 64
    samples_per_symbol: int = 4
    kind: str = "RRC"

    def __post_init__(self):
        if not 0.0 <= self.rolloff <= 1.0:
            raise ConfigurationError(f"roll-off {self.rolloff} outside [0, 1]")
        if self.samples_per_symbol < 2:
            raise ConfigurationError("samples_per_symbol must be >= 2")
        if self.span < 1:
            raise ConfigurationError("span must be >= 1")
        if self.symbol_period <= 0:
            raise ConfigurationError("symbol_period must be positive")

    @property
    def sample_interval(self):
        return self.symbol_period / self.samples_per_symbol


@dataclass(frozen=True)
class DualPolSymbolSeq:
    """Sequence of 2-component complex symbols (x and y polarizations)."""

    x: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        x = np.asarray(self.x, dtype=np.complex128)
        y = np.asarray(self.y, dtype=np.complex128)
        if x.shape != y.shape or x.ndim != 1:
            raise ValueError("x and y must be 1-D arrays of identical length")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)

    def __len__(self):
        return self.x.size

    @property
    def energy(self):
        return float(np.sum(np.abs(self.x) ** 2 + np.abs(self.y) ** 2))


@dataclass(frozen=True)
class LinkPower:
    """Launch power bookkeeping: P [dBm], symbol rate [baud], E_s [J].

    E_s = P_lin / (2 R_s): with a unit-energy constellation per
    polarization the total launched optical power equals P_lin.
    """

    power_dbm: float
    symbol_rate: float
    symbol_energy: float = field(init=False)

    def __post_init__(self):
        if self.symbol_rate <= 0:
            raise ConfigurationError("symbol rate must be positive")
        p_lin = 1e-3 * 10.0 ** (self.power_dbm / 10.0)
        object.__setattr__(self, "symbol_energy", p_lin / (2.0 * self.symbol_rate))

    @property
    def power_watts(self):
        return 1e-3 * 10.0 ** (self.power_dbm / 10.0)


@dataclass(frozen=True)
class SampledField:
    """Two-polarization complex baseband waveform (attenuation-normalized)."""

    x: np.ndarray
    y: np.ndarray
    sample_rate: float

    def __post_init__(self):
        x = np.asarray(self.x, dtype=np.complex128)
        y = np.asarray(self.y, dtype=np.complex128)
        if x.shape != y.shape or x.ndim != 1:
            raise ValueError("x and y must be 1-D arrays of identical length")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)

    def __len__(self):
        return self.x.size

    @property
    def energy(self):
        dt = 1.0 / self.sample_rate
        return float(np.sum(np.abs(self.x) ** 2 + np.abs(self.y) ** 2) * dt)


_QAM_SIZES = {"QPSK": 2, "16QAM": 4, "64QAM": 8}


def _gray(n):
    return n ^ (n >> 1)


def make_constellation(label):
    """Return the normalized Gray-labeled square QAM named by `label`.

    Supported labels: QPSK, 16QAM, 64QAM. Points are ordered by Gray
    code over the I/Q lattice; the ordering is fixed but irrelevant to
    the channel math (symbols are drawn uniformly i.i.d.).
    """
    try:
        side = _QAM_SIZES[label.upper()]
    except KeyError:
        raise ConfigurationError(f"unknown constellation label {label!r}") from None
    levels = np.arange(-(side - 1), side, 2, dtype=float)
    order = np.argsort([_gray(i) for i in range(side)])
    pts = np.array(
        [levels[i] + 1j * levels[q] for i in order for q in order],
        dtype=np.complex128,
    )
    pts /= np.sqrt(np.mean(np.abs(pts) ** 2))
    return Constellation(points=pts, label=label.upper())


def rrc_taps(pulse):
    """Discrete root-raised-cosine impulse response.

    Evaluates the closed-form RRC expression on the pulse grid, handling
    the t = 0 and t = +-T/(4*rolloff) singularities analytically, then
    renormalizes so that sum(h^2) * dt = 1.
    """
    beta = pulse.rolloff
    T = pulse.symbol_period
    sps = pulse.samples_per_symbol
    n = pulse.span * sps
    t = np.arange(-n, n + 1) / sps  # in units of T
    h = np.empty(t.size)

    for i, tt in enumerate(t):
        if abs(tt) < 1e-12:
            h[i] = 1.0 + beta * (4.0 / np.pi - 1.0)
        elif beta > 0 and abs(abs(tt) - 1.0 / (4.0 * beta)) < 1e-9:
            h[i] = (beta / np.sqrt(2.0)) * (
                (1.0 + 2.0 / np.pi) * np.sin(np.pi / (4.0 * beta))
                + (1.0 - 2.0 / np.pi) * np.cos(np.pi / (4.0 * beta))
            )
        else:
            num = np.sin(np.pi * tt * (1.0 - beta)) + 4.0 * beta * tt * np.cos(
                np.pi * tt * (1.0 + beta)
            )
            den = np.pi * tt * (1.0 - (4.0 * beta * tt) ** 2)
            h[i] = num / den
    h /= np.sqrt(T)

    dt = T / sps
    h /= np.sqrt(np.sum(h**2) * dt)
    return h


def cyclic_rrc_spectrum(n_samples, pulse):
    """RRC frequency response on the n-point cyclic grid, energy-normalized.

    The cyclic pipeline uses the exact root-raised-cosine spectrum
    sqrt(RC(f)) instead of the truncated time-domain taps: the
    raised-cosine Nyquist folding is then exact on the discrete grid,
    so a modulator/matched-filter pair is ISI-free to machine
    precision. Normalized so the equivalent time kernel h satisfies
    sum(h^2) * dt = 1.
    """
    T = pulse.symbol_period
    beta = pulse.rolloff
    dt = pulse.sample_interval
    f = np.fft.fftfreq(n_samples, d=dt)
    af = np.abs(f) * T  # frequency in units of the symbol rate
    rc = np.zeros(n_samples)
    flat = af <= (1.0 - beta) / 2.0
    rc[flat] = 1.0
    if beta > 0:
        edge = (~flat) & (af <= (1.0 + beta) / 2.0)
        rc[edge] = 0.5 * (1.0 + np.cos(np.pi / beta * (af[edge] - (1.0 - beta) / 2.0)))
    h_spec = np.sqrt(rc)
    h_spec *= np.sqrt(n_samples / (dt * np.sum(h_spec**2)))
    return h_spec


def modulate(seq, pulse, power):
    """Linear modulation: Q(t, 0) = sqrt(E_s) * sum_n a_n h(t - n T).

    The symbol sequence is cyclically extended, producing a periodic
    waveform of length N_sym * samples_per_symbol per polarization.
    """
    n_sym = len(seq)
    if n_sym == 0:
        raise ValueError("symbol sequence is empty")
    sps = pulse.samples_per_symbol
    n_samp = n_sym * sps
    h_spec = cyclic_rrc_spectrum(n_samp, pulse)
    scale = np.sqrt(power.symbol_energy)

    out = []
    for sym in (seq.x, seq.y):
        impulses = np.zeros(n_samp, dtype=np.complex128)
        impulses[::sps] = sym
        out.append(scale * np.fft.ifft(np.fft.fft(impulses) * h_spec))
    return SampledField(x=out[0], y=out[1], sample_rate=sps / pulse.symbol_period)
