"""Numerical evaluation of the analytical SPM perturbation kernels.

A kernel S_klm is the double integral over the span and over time of
e^{-alpha z} h*(z,t) h*(z,t-kT) h(z,t-lT) h(z,t-mT), where h(z,t) is the
pulse dispersed to distance z. Kernels are stored as a flat vector in
canonical row-major (k, l, m) order with m fastest; the same index map
is shared by the perturbation model and the optimizer.
"""

import csv
import struct
from dataclasses import dataclass, field, replace

import numpy as np

__all__ = [
    "KernelTensor",
    "IntegrationGrid",
    "kernel_index",
    "default_grid",
    "dispersed_pulse",
    "compute_kernel",
    "compute_tensor",
    "save_tensor",
    "load_tensor",
    "export_csv",
]


def kernel_index(k, l, m, memory):
    """Linear index of (k, l, m) in the canonical row-major order."""
    w = 2 * memory + 1
    for idx in (k, l, m):
        if abs(idx) > memory:
            raise IndexError(f"index ({k},{l},{m}) out of range for memory {memory}")
    return (k + memory) * w * w + (l + memory) * w + (m + memory)


@dataclass(frozen=True)
class KernelTensor:
    """Flat vector of (2M+1)^3 complex kernels in canonical order.

    provenance is "analytical" or "nbgd"; training_power_dbm and seed are
    only meaningful for optimized tensors.
    """

    memory: int
    values: np.ndarray
    provenance: str = "analytical"
    training_power_dbm: float = float("nan")
    seed: int = 0

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=np.complex128)
        expected = (2 * self.memory + 1) ** 3
        if vals.shape != (expected,):
            raise ValueError(
                f"kernel vector has length {vals.size}, expected {expected} for M={self.memory}"
            )
        object.__setattr__(self, "values", vals)

    def __len__(self):
        return self.values.size

    def get(self, k, l, m):
        return self.values[kernel_index(k, l, m, self.memory)]

    def as_cube(self):
        w = 2 * self.memory + 1
        return self.values.reshape(w, w, w)

    def restrict(self, memory):
        """Sub-tensor for a smaller memory (kernels are index-local)."""
        if memory > self.memory:
            raise ValueError("cannot restrict to a larger memory")
        w = 2 * self.memory + 1
        cube = self.values.reshape(w, w, w)
        lo, hi = self.memory - memory, self.memory + memory + 1
        return replace(self, memory=memory, values=cube[lo:hi, lo:hi, lo:hi].ravel())


@dataclass(frozen=True)
class IntegrationGrid:
    """Riemann grids for the kernel double integral.

    The time grid spacing must divide the symbol period so that shifts
    by kT land on integer sample offsets.
    """

    t_min: float
    t_max: float
    n_t: int
    n_z: int

    def __post_init__(self):
        if self.n_t < 2 or self.n_z < 2:
            raise ValueError("n_t and n_z must both be >= 2")
        if self.t_max <= self.t_min:
            raise ValueError("t_max must exceed t_min")

    @property
    def dt(self):
        return (self.t_max - self.t_min) / self.n_t

    def times(self):
        return self.t_min + self.dt * np.arange(self.n_t)

    def refined(self, factor=2):
        return replace(self, n_t=self.n_t * factor, n_z=self.n_z * factor)


def default_grid(pulse, fiber, memory, samples_per_symbol=8, n_z=1024):
    """Grid covering the pulse span, the shift window, and dispersion broadening.

    The time extent is the RRC span plus M symbol slots plus
    2*pi*|beta2|*L*B_pulse of broadening on each side; n_t follows from
    the grid sampling rate so the spacing divides T exactly.
    """
    T = pulse.symbol_period
    bandwidth = (1.0 + pulse.rolloff) / (2.0 * T)
    broadening = 2.0 * np.pi * abs(fiber.beta2) * fiber.length * bandwidth
    half_syms = pulse.span + memory + int(np.ceil(broadening / T)) + 2
    n_t = 2 * half_syms * samples_per_symbol
    return IntegrationGrid(
        t_min=-half_syms * T, t_max=half_syms * T, n_t=n_t, n_z=n_z
    )


def _pulse_on_grid(pulse, grid):
    """Sample the closed-form RRC on the grid (analytic singular limits)."""
    from .signal import PulseShape, rrc_taps

    # evaluate via rrc_taps on a matching grid: grid spacing divides T
    ratio = pulse.symbol_period / grid.dt
    sps = int(round(ratio))
    if abs(ratio - sps) > 1e-9 or sps < 2:
        raise ValueError("grid spacing must divide the symbol period")
    dense = PulseShape(
        rolloff=pulse.rolloff,
        symbol_period=pulse.symbol_period,
        span=pulse.span,
        samples_per_symbol=sps,
    )
    taps = rrc_taps(dense)
    t = grid.times()
    h = np.zeros(grid.n_t)
    center = int(round(-grid.t_min / grid.dt))
    half = taps.size // 2
    lo = center - half
    hi = lo + taps.size
    if lo < 0 or hi > grid.n_t:
        raise ValueError("grid too short to hold the pulse span")
    h[lo:hi] = taps
    # Nyquist check: grid must resolve the pulse bandwidth
    if 1.0 / grid.dt < 2.0 * (1.0 + pulse.rolloff) / (2.0 * pulse.symbol_period):
        raise ValueError("grid too coarse to resolve the pulse bandwidth")
    return h, t


def dispersed_pulse(pulse, fiber, z, grid):
    """h(z, t): dispersion phase applied to the pulse spectrum at distance z."""
    if not 0.0 <= z <= fiber.length:
        raise ValueError("z must lie within [0, L]")
    h0, _ = _pulse_on_grid(pulse, grid)
    w2 = (2.0 * np.pi * np.fft.fftfreq(grid.n_t, d=grid.dt)) ** 2
    phase = np.exp(1j * (fiber.beta2 / 2.0) * w2 * z)
    return np.fft.ifft(np.fft.fft(h0.astype(np.complex128)) * phase)


def _z_slices(pulse, fiber, grid):
    """Yield (weight, shifted-pulse matrix) per midpoint z slice.

    The shift matrix holds h(z, t - kT) for k = -M..M as rows, reused by
    every kernel at that slice.
    """
    h0, _ = _pulse_on_grid(pulse, grid)
    spectrum = np.fft.fft(h0.astype(np.complex128))
    w2 = (2.0 * np.pi * np.fft.fftfreq(grid.n_t, d=grid.dt)) ** 2
    dz = fiber.length / grid.n_z
    for i in range(grid.n_z):
        z = (i + 0.5) * dz
        hz = np.fft.ifft(spectrum * np.exp(1j * (fiber.beta2 / 2.0) * w2 * z))
        yield np.exp(-fiber.alpha * z) * dz, hz


def _shift_matrix(hz, memory, shift_samples):
    w = 2 * memory + 1
    out = np.empty((w, hz.size), dtype=np.complex128)
    for j, k in enumerate(range(-memory, memory + 1)):
        out[j] = np.roll(hz, k * shift_samples)
    return out


def compute_tensor(memory, pulse, fiber, grid=None):
    """All (2M+1)^3 kernels via Riemann summation of the double integral.

    The l<->m symmetry of the integrand halves the work: per z slice the
    time integrals are a matrix product between the conjugated (0, k)
    factors and the upper-triangle (l, m) products.
    """
    if memory < 0:
        raise ValueError("memory must be >= 0")
    if grid is None:
        grid = default_grid(pulse, fiber, memory)
    shift_samples = int(round(pulse.symbol_period / grid.dt))
    w = 2 * memory + 1

    # unique unordered (l, m) pairs with l <= m
    pairs = [(l, m) for l in range(w) for m in range(l, w)]
    pair_l = np.array([p[0] for p in pairs])
    pair_m = np.array([p[1] for p in pairs])

    acc = np.zeros((w, len(pairs)), dtype=np.complex128)
    for weight, hz in _z_slices(pulse, fiber, grid):
        shifts = _shift_matrix(hz, memory, shift_samples)
        conj0 = np.conj(hz)
        lead = np.conj(shifts) * conj0  # rows: conj(h0) * conj(h_k)
        prod = shifts[pair_l] * shifts[pair_m]  # rows: h_l * h_m
        acc += weight * (lead @ prod.T)
    acc *= grid.dt

    cube = np.empty((w, w, w), dtype=np.complex128)
    for p, (l, m) in enumerate(pairs):
        cube[:, l, m] = acc[:, p]
        cube[:, m, l] = acc[:, p]
    return KernelTensor(memory=memory, values=cube.ravel())


def compute_kernel(k, l, m, pulse, fiber, grid=None):
    """Single kernel S_klm (same Riemann scheme as compute_tensor)."""
    if grid is None:
        grid = default_grid(pulse, fiber, max(abs(k), abs(l), abs(m)))
    shift_samples = int(round(pulse.symbol_period / grid.dt))
    total = 0.0 + 0.0j
    for weight, hz in _z_slices(pulse, fiber, grid):
        hk = np.roll(hz, k * shift_samples)
        hl = np.roll(hz, l * shift_samples)
        hm = np.roll(hz, m * shift_samples)
        total += weight * np.sum(np.conj(hz) * np.conj(hk) * hl * hm)
    return total * grid.dt


_TENSOR_MAGIC = b"FRPK"
_TENSOR_VERSION = 2


def save_tensor(tensor, path, grid=None):
    """Self-describing binary kernel file (lossless complex128 payload)."""
    g = grid or IntegrationGrid(t_min=0.0, t_max=1.0, n_t=2, n_z=2)
    has_grid = 1 if grid is not None else 0
    prov = {"analytical": 0, "nbgd": 1}[tensor.provenance]
    with open(path, "wb") as f:
        f.write(_TENSOR_MAGIC)
        f.write(
            struct.pack(
                "<IiBBdqddii",
                _TENSOR_VERSION,
                tensor.memory,
                prov,
                has_grid,
                tensor.training_power_dbm,
                tensor.seed,
                g.t_min,
                g.t_max,
                g.n_t,
                g.n_z,
            )
        )
        tensor.values.astype(np.complex128).tofile(f)


def load_tensor(path):
    """Load a kernel file; returns (KernelTensor, grid-or-None)."""
    with open(path, "rb") as f:
        if f.read(4) != _TENSOR_MAGIC:
            raise ValueError(f"{path}: not a kernel tensor file")
        header = f.read(struct.calcsize("<IiBBdqddii"))
        version, memory, prov, has_grid, power, seed, t_min, t_max, n_t, n_z = struct.unpack(
            "<IiBBdqddii", header
        )
        if version != _TENSOR_VERSION:
            raise ValueError(f"{path}: unsupported kernel file version {version}")
        n = (2 * memory + 1) ** 3
        values = np.fromfile(f, dtype=np.complex128, count=n)
        if values.size != n:
            raise ValueError(f"{path}: truncated kernel file")
    tensor = KernelTensor(
        memory=memory,
        values=values,
        provenance={0: "analytical", 1: "nbgd"}[prov],
        training_power_dbm=power,
        seed=seed,
    )
    grid = IntegrationGrid(t_min=t_min, t_max=t_max, n_t=n_t, n_z=n_z) if has_grid else None
    return tensor, grid


def export_csv(tensor, path):
    """Human-readable (k, l, m, Re, Im) dump for inspection."""
    M = tensor.memory
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["k", "l", "m", "real", "imag"])
        for k in range(-M, M + 1):
            for l in range(-M, M + 1):
                for m in range(-M, M + 1):
                    s = tensor.get(k, l, m)
                    writer.writerow([k, l, m, repr(float(s.real)), repr(float(s.imag))])
