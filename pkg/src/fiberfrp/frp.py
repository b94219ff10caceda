"""Finite-memory first-order perturbation channel model.

Predicts received symbols as r_n = a_n + j(8/9) gamma E_s * sum over the
(2M+1)^3 symbol triplets weighted by the SPM kernels. Windows are taken
cyclically from the symbol stream, matching the modulator's cyclic
extension.
"""

import csv
from dataclasses import dataclass

import numpy as np

from .signal import DualPolSymbolSeq
from .ssfm import MANAKOV_FACTOR

__all__ = [
    "TripletBatch",
    "triplets",
    "predict",
    "predict_batch",
    "predict_sequence",
    "build_batch",
    "conditional_mean_theorem1",
    "coupling",
]


def coupling(gamma, symbol_energy):
    """The scalar (8/9) * gamma * E_s multiplying every kernel term."""
    return MANAKOV_FACTOR * gamma * symbol_energy


@dataclass(frozen=True)
class TripletBatch:
    """B transmission pairs plus their B x L triplet matrix.

    Row n holds the canonical-order triplets built from the 2M+1 window
    centered on the symbol that produced (inputs[n], outputs[n]).
    """

    inputs: np.ndarray
    outputs: np.ndarray
    matrix: np.ndarray
    memory: int
    polarization: str = "x"

    def __post_init__(self):
        b = self.inputs.size
        l = (2 * self.memory + 1) ** 3
        if self.outputs.size != b or self.matrix.shape != (b, l):
            raise ValueError("inconsistent batch dimensions")
        if self.polarization not in ("x", "y"):
            raise ValueError("polarization must be 'x' or 'y'")

    @property
    def size(self):
        return self.inputs.size

    def dump_csv(self, path, max_columns=8):
        """Debug dump: row index, a, r, first few triplet columns."""
        ncol = min(max_columns, self.matrix.shape[1])
        with open(path, "w", newline="") as f:
            writer = csv.writer(f)
            writer.writerow(
                ["row", "a", "r"] + [f"t{j}" for j in range(ncol)]
            )
            for n in range(self.size):
                writer.writerow(
                    [n, self.inputs[n], self.outputs[n]]
                    + list(self.matrix[n, :ncol])
                )


def _window_matrices(window):
    x = np.asarray(window.x, dtype=np.complex128)
    y = np.asarray(window.y, dtype=np.complex128)
    if x.size % 2 != 1:
        raise ValueError("window length must be odd (2M+1)")
    return x, y


def triplets(window, pol="x"):
    """Canonical-order triplet vector for one 2M+1 dual-polarization window.

    For the x polarization: T_klm = (ax_k* ax_l + ay_k* ay_l) ax_m with
    indices relative to the window center; the y polarization swaps the
    roles of x and y.
    """
    x, y = _window_matrices(window)
    if pol == "y":
        x, y = y, x
    elif pol != "x":
        raise ValueError("pol must be 'x' or 'y'")
    c = np.outer(np.conj(x), x) + np.outer(np.conj(y), y)  # (k, l)
    return np.einsum("kl,m->klm", c, x).ravel()


def predict(window, tensor, gamma, symbol_energy):
    """FRP output for the window's center symbol, both polarizations."""
    x, y = _window_matrices(window)
    m = tensor.memory
    if x.size != 2 * m + 1:
        raise ValueError(
            f"window length {x.size} does not match tensor memory {m}"
        )
    eta = 1j * coupling(gamma, symbol_energy)
    rx = x[m] + eta * np.dot(triplets(window, "x"), tensor.values)
    ry = y[m] + eta * np.dot(triplets(window, "y"), tensor.values)
    return rx, ry


def predict_batch(batch, tensor, gamma, symbol_energy):
    """Batch FRP prediction r_hat = a + j(8/9) gamma E_s T s."""
    if batch.memory != tensor.memory:
        raise ValueError("batch memory does not match tensor memory")
    eta = 1j * coupling(gamma, symbol_energy)
    return batch.inputs + eta * (batch.matrix @ tensor.values)


def _cyclic_windows(values, memory):
    """N x (2M+1) matrix of cyclic windows centered on each symbol."""
    n = values.size
    offsets = np.arange(-memory, memory + 1)
    idx = (np.arange(n)[:, None] + offsets[None, :]) % n
    return values[idx]


def predict_sequence(seq, tensor, gamma, symbol_energy):
    """FRP prediction for every symbol of a cyclic stream (both pols).

    Contracts the kernel cube against the window products without
    materializing the full N x (2M+1)^3 triplet matrix.
    """
    m = tensor.memory
    w = 2 * m + 1
    wx = _cyclic_windows(seq.x, m)
    wy = _cyclic_windows(seq.y, m)
    eta = 1j * coupling(gamma, symbol_energy)
    s2 = tensor.values.reshape(w * w, w)

    out = []
    for wa, wb in ((wx, wy), (wy, wx)):
        c = np.einsum("nk,nl->nkl", np.conj(wa), wa) + np.einsum(
            "nk,nl->nkl", np.conj(wb), wb
        )
        d = c.reshape(len(seq), w * w) @ s2  # (n, m)
        out.append(wa[:, m] + eta * np.einsum("nm,nm->n", d, wa))
    return DualPolSymbolSeq(x=out[0], y=out[1])


def build_batch(seq_in, seq_out, memory, positions, pol="x"):
    """TripletBatch from aligned transmitted/received streams.

    positions are symbol indices into the cyclic streams; each one
    contributes a row built from its 2M+1 cyclic window.
    """
    positions = np.asarray(positions, dtype=int)
    n = len(seq_in)
    offsets = np.arange(-memory, memory + 1)
    idx = (positions[:, None] + offsets[None, :]) % n
    wx, wy = seq_in.x[idx], seq_in.y[idx]
    if pol == "y":
        wx, wy = wy, wx
    c = np.einsum("nk,nl->nkl", np.conj(wx), wx) + np.einsum(
        "nk,nl->nkl", np.conj(wy), wy
    )
    matrix = np.einsum("nkl,nm->nklm", c, wx).reshape(positions.size, -1)
    outputs = (seq_out.x if pol == "x" else seq_out.y)[positions]
    return TripletBatch(
        inputs=wx[:, memory],
        outputs=outputs,
        matrix=matrix,
        memory=memory,
        polarization=pol,
    )


def conditional_mean_theorem1(s_m, tensor, gamma, symbol_energy, second_moment=0.0):
    """Closed-form FRP conditional mean of the received symbol given s_m.

    second_moment is E{A^2} of the constituent constellation (zero for
    square QAM, kept for constellations with correlated I/Q).
    """
    M = tensor.memory
    eta = 1j * coupling(gamma, symbol_energy)
    s000 = tensor.get(0, 0, 0)
    bracket = s_m * (1.0 + abs(s_m) ** 2) * s000
    for k in range(-M, M + 1):
        if k == 0:
            continue
        bracket += s_m * (2.0 * tensor.get(k, k, 0) + tensor.get(k, 0, k))
        bracket += np.conj(s_m) * second_moment * tensor.get(0, k, k)
    return s_m + eta * bracket
