"""Normalized batch gradient descent estimation of perturbation kernels.

The optimizer works on the linear batch model r_hat = a + j T w, where
w is the vector of *effective* kernels (physical kernels scaled by
(8/9) gamma E_s, hence dimensionless). In this parameterization the
step size, the MSE, and the Table-of-defaults threshold 0.1*alpha all
live on comparable scales; physical kernels are recovered at the end by
dividing out the coupling constant.

The component-wise normalized update is s^(l+1) = s^(l) +
j alpha g / |g| with g = T^H (r_hat - r): the full Wirtinger gradient of
the MSE is -(j/B) g, and normalization discards every real positive
prefactor, so only the direction of g matters.
"""

import time
from dataclasses import dataclass, field, replace

import numpy as np

from .frp import coupling
from .kernels import KernelTensor

__all__ = [
    "OptimizerConfig",
    "OptimizerState",
    "mse",
    "wirtinger_gradient",
    "mse_gradient",
    "nbgd_step",
    "run",
]

# components with |g| below this receive no update (Eq. divides by |g|)
ZERO_GRADIENT_GUARD = 1e-300


@dataclass(frozen=True)
class OptimizerConfig:
    alpha0: float | None = None  # None -> auto from the first gradient
    schedule_decay: float = 0.9
    schedule_period: int = 15
    mse_threshold_factor: float = 0.1
    max_iterations: int = 100_000
    validation_factor: float = 10.0
    validation_retries: int = 5
    alpha_retry_shrink: float = 0.75
    batch_size: int = 2048
    convergence_mode: str = "mse"  # or "param"
    # consecutive iterations the threshold test must hit before stopping;
    # guards against chance crossings of the oscillating MSE sequence
    convergence_patience: int = 3

    def __post_init__(self):
        if not 0.0 < self.schedule_decay < 1.0:
            raise ValueError("schedule_decay must lie in (0, 1)")
        for name in (
            "schedule_period",
            "mse_threshold_factor",
            "max_iterations",
            "validation_factor",
            "validation_retries",
            "alpha_retry_shrink",
            "batch_size",
            "convergence_patience",
        ):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.convergence_mode not in ("mse", "param"):
            raise ValueError("convergence_mode must be 'mse' or 'param'")


@dataclass
class OptimizerState:
    """Mutable optimizer snapshot (effective-kernel space)."""

    s_hat: np.ndarray
    alpha: float
    alpha0: float = None
    iteration: int = 0
    mse_trace: list = field(default_factory=list)
    status: str = "running"
    converge_hits: int = 0

    def __post_init__(self):
        if self.alpha0 is None:
            self.alpha0 = self.alpha

    def copy(self):
        return OptimizerState(
            s_hat=self.s_hat.copy(),
            alpha=self.alpha,
            alpha0=self.alpha0,
            iteration=self.iteration,
            mse_trace=list(self.mse_trace),
            status=self.status,
            converge_hits=self.converge_hits,
        )


def mse(r_hat, r):
    """Objective: (1/2B) || r_hat - r ||^2."""
    r_hat = np.asarray(r_hat)
    r = np.asarray(r)
    if r_hat.shape != r.shape:
        raise ValueError("prediction and reference lengths differ")
    diff = r_hat - r
    return float(np.real(np.vdot(diff, diff))) / (2.0 * r.size)


def wirtinger_gradient(matrix, r_hat, r):
    """Gradient direction g = T^H (r_hat - r) and its scalar prefactor.

    The full gradient of the MSE with respect to the effective kernels
    is eta * g with eta = -j/B; eta is returned separately because the
    normalized update only uses the direction.
    """
    g = matrix.conj().T @ (r_hat - r)
    eta = -1j / r.size
    return g, eta


def mse_gradient(matrix, r_hat, r):
    """Full Wirtinger gradient (2 d MSE / d s*) of the batch objective."""
    g, eta = wirtinger_gradient(matrix, r_hat, r)
    return eta * g


def _predict(matrix, a, s_hat):
    return a + 1j * (matrix @ s_hat)


def nbgd_step(state, matrix, a, r, config):
    """One normalized descent step; returns the updated state.

    Every component with non-negligible gradient moves by exactly
    alpha in modulus; the step counter drives the staircase learning
    rate (decay at every positive multiple of schedule_period).
    """
    if state.status != "running":
        return state
    new = state.copy()
    r_hat = _predict(matrix, a, new.s_hat)
    if not new.mse_trace:
        new.mse_trace.append(mse(r_hat, r))

    g, _ = wirtinger_gradient(matrix, r_hat, r)
    mags = np.abs(g)
    live = mags > ZERO_GRADIENT_GUARD
    if not np.any(live):
        new.status = "converged"
        return new
    direction = np.zeros_like(g)
    direction[live] = 1j * g[live] / mags[live]
    new.s_hat = new.s_hat + new.alpha * direction

    new.iteration += 1
    if new.iteration % config.schedule_period == 0:
        new.alpha *= config.schedule_decay

    current = mse(_predict(matrix, a, new.s_hat), r)
    previous = new.mse_trace[-1]
    new.mse_trace.append(current)

    if config.convergence_mode == "param":
        # update norm is alpha*sqrt(#live); compare against the initial scale
        hit = (
            new.alpha * np.sqrt(np.count_nonzero(live))
            < config.mse_threshold_factor * new.alpha0
        )
    else:
        hit = abs(current - previous) < config.mse_threshold_factor * new.alpha
    new.converge_hits = new.converge_hits + 1 if hit else 0
    if new.converge_hits >= config.convergence_patience:
        new.status = "converged"
    return new


def _auto_alpha0(matrix, a, r, s0):
    """Order of magnitude of the first gradient: median component of grad MSE."""
    r_hat = _predict(matrix, a, s0)
    grad = mse_gradient(matrix, r_hat, r)
    scale = float(np.median(np.abs(grad)))
    if scale <= 0.0:
        scale = float(np.max(np.abs(grad)))
    return scale


def run(data_source, config, gamma, symbol_energy, memory, kernels_init=None, seed=0):
    """Full optimization: descent to convergence, then fresh-batch validation.

    data_source(i) must yield independent TripletBatch objects at the
    training power; batch 0 trains, batches 1.. validate (one per
    retry). Returns (KernelTensor, report). A failed validation shrinks
    the restart step size by alpha_retry_shrink and resumes from the
    converged kernels, at most validation_retries times.
    """
    kappa = coupling(gamma, symbol_energy)
    train = data_source(0)
    matrix, a, r = train.matrix, train.inputs, train.outputs
    length = (2 * memory + 1) ** 3
    if matrix.shape[1] != length:
        raise ValueError("batch memory does not match requested memory")

    if kernels_init is None:
        s0 = np.zeros(length, dtype=np.complex128)
    else:
        s0 = kappa * np.asarray(kernels_init.values, dtype=np.complex128)

    alpha0 = config.alpha0 if config.alpha0 is not None else _auto_alpha0(matrix, a, r, s0)
    t_start = time.perf_counter()
    validation_mses = []
    total_iterations = 0
    status = "failed"
    converged_mse = float("nan")
    state = OptimizerState(s_hat=s0, alpha=alpha0)

    for attempt in range(config.validation_retries):
        while state.status == "running" and state.iteration < config.max_iterations:
            state = nbgd_step(state, matrix, a, r, config)
        if state.status == "running":
            state.status = "converged"  # iteration budget exhausted
        total_iterations += state.iteration
        converged_mse = state.mse_trace[-1] if state.mse_trace else mse(
            _predict(matrix, a, state.s_hat), r
        )

        val = data_source(attempt + 1)
        val_mse = mse(_predict(val.matrix, val.inputs, state.s_hat), val.outputs)
        validation_mses.append(val_mse)
        if val_mse <= config.validation_factor * converged_mse:
            status = "validated"
            break
        alpha0 *= config.alpha_retry_shrink
        state = OptimizerState(s_hat=state.s_hat.copy(), alpha=alpha0)

    if status != "validated":
        status = "failed"

    tensor = KernelTensor(
        memory=memory,
        values=state.s_hat / kappa,
        provenance="nbgd",
        seed=seed,
    )
    report = {
        "status": status,
        "iterations": total_iterations,
        "alpha_initial": alpha0,
        "alpha_final": state.alpha,
        "alpha_final_kernel_units": state.alpha / kappa,
        "converged_mse": converged_mse,
        "validation_mses": validation_mses,
        "mse_trace": state.mse_trace,
        "batch_size": train.size,
        "memory": memory,
        "wall_time_s": time.perf_counter() - t_start,
        # the Wirtinger prefactor's magnitude is irrelevant after the
        # component-wise normalization; only its +j phase survives
        "gradient_prefactor_note": "update uses +j*T^H(r_hat-r)/|.|",
    }
    return tensor, report
