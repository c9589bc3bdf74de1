"""
Likelihood-based density-matrix reconstruction baselines.

- ``maxlik``: diluted RrhoR fixed-point iteration for the log-likelihood
  sum_j f_j log Tr(rho Pi_j) over the measured projectors.
- ``mlme``: maximum-entropy maximum likelihood, ascending
  log L(rho) + lambda S(rho) by matrix-exponentiated gradient steps.

Both start from the maximally mixed state, accept only non-decreasing
steps (halving the step on a decrease), and return the best iterate with
a convergence flag when the iteration cap is reached.
"""

import logging
from dataclasses import dataclass
from typing import Callable, Tuple, Union

import numpy as np

from config.settings import (
    MAXLIK_DILUTION,
    MLME_ENTROPY_WEIGHT,
    MLME_STEP,
    PROBABILITY_FLOOR,
    TOMO_CONV_TOL,
    TOMO_MAX_HALVINGS,
    TOMO_MAX_ITER,
)
from utils.errors import InvalidInputError
from utils.measurement import MeasurementRecord, ProjectorFrame
from utils.qcore import DensityMatrix, as_matrix, project_to_density

logger = logging.getLogger("eqpbench.tomography")

MONOTONE_SLACK = 1e-12


@dataclass(frozen=True)
class TomoOptions:
    """
    Iteration controls shared by both estimators.

    Attributes:
        max_iter: Iteration cap.
        conv_tol: Stop when the HS-norm change of an accepted step falls below this.
        dilution: MaxLik dilution eps in [0, 1]; R_eps = (1 - eps) R + eps I.
        entropy_weight: MLME entropy weight lambda >= 0.
        step: Initial MLME step eta > 0.
    """

    max_iter: int = TOMO_MAX_ITER
    conv_tol: float = TOMO_CONV_TOL
    dilution: float = MAXLIK_DILUTION
    entropy_weight: float = MLME_ENTROPY_WEIGHT
    step: float = MLME_STEP

    def __post_init__(self):
        if self.max_iter < 1:
            raise InvalidInputError("max_iter must be at least 1")
        if self.conv_tol <= 0:
            raise InvalidInputError("conv_tol must be positive")
        if not 0.0 <= self.dilution <= 1.0:
            raise InvalidInputError("dilution must lie in [0, 1]")
        if self.entropy_weight < 0:
            raise InvalidInputError("entropy_weight must be non-negative")
        if self.step <= 0:
            raise InvalidInputError("step must be positive")


@dataclass(frozen=True, eq=False)
class TomoResult:
    """
    Output of a reconstruction.

    Attributes:
        density: Best iterate.
        method: 'maxlik' or 'mlme'.
        iterations: Accepted iterations.
        converged: False when the iteration cap was reached.
        objective: Final objective value.
        history: Objective after every accepted iteration (starting point first).
    """

    density: DensityMatrix
    method: str
    iterations: int
    converged: bool
    objective: float
    history: Tuple[float, ...]

    def report(self) -> dict:
        return {
            "method": self.method,
            "iterations": self.iterations,
            "converged": self.converged,
            "objective": self.objective,
        }


def _record_operators(record: MeasurementRecord, frame: ProjectorFrame) -> Tuple[np.ndarray, np.ndarray]:
    indices = list(record.indices)
    if any(not 0 <= i < len(frame) for i in indices):
        raise InvalidInputError("Record refers to projectors outside the frame")
    return frame.projectors[indices], np.asarray(record.values, dtype=float)


def _probabilities(projectors: np.ndarray, rho: np.ndarray) -> np.ndarray:
    probs = np.real(np.einsum("kij,ji->k", projectors, rho))
    return np.maximum(probs, PROBABILITY_FLOOR)


def _normalize(m: np.ndarray) -> np.ndarray:
    m = 0.5 * (m + m.conj().T)
    return m / np.real(np.trace(m))


def _entropy(rho: np.ndarray) -> float:
    eigenvalues = np.clip(np.linalg.eigvalsh(rho), PROBABILITY_FLOOR, None)
    return float(-np.sum(eigenvalues * np.log(eigenvalues)))


def _log_hermitian(rho: np.ndarray) -> np.ndarray:
    eigenvalues, eigenvectors = np.linalg.eigh(0.5 * (rho + rho.conj().T))
    logs = np.log(np.clip(eigenvalues, PROBABILITY_FLOOR, None))
    return (eigenvectors * logs) @ eigenvectors.conj().T


def _exp_normalized(h: np.ndarray) -> np.ndarray:
    eigenvalues, eigenvectors = np.linalg.eigh(0.5 * (h + h.conj().T))
    weights = np.exp(eigenvalues - eigenvalues.max())
    m = (eigenvectors * (weights / weights.sum())) @ eigenvectors.conj().T
    return 0.5 * (m + m.conj().T)


def log_likelihood(
    rho: Union[DensityMatrix, np.ndarray], record: MeasurementRecord, frame: ProjectorFrame
) -> float:
    """sum_j f_j log max(Tr(rho Pi_j), PROBABILITY_FLOOR)."""
    projectors, freqs = _record_operators(record, frame)
    if freqs.size == 0:
        return 0.0
    return float(freqs @ np.log(_probabilities(projectors, as_matrix(rho))))


def mlme_objective(
    rho: Union[DensityMatrix, np.ndarray],
    record: MeasurementRecord,
    frame: ProjectorFrame,
    entropy_weight: float = MLME_ENTROPY_WEIGHT,
) -> float:
    """log L(rho) + lambda S(rho)."""
    return log_likelihood(rho, record, frame) + entropy_weight * _entropy(as_matrix(rho))


def _ascend(
    start: np.ndarray,
    objective: Callable[[np.ndarray], float],
    propose: Callable[[np.ndarray, float], np.ndarray],
    initial_step: float,
    options: TomoOptions,
    method: str,
    recover_step: bool,
) -> TomoResult:
    rho = start
    value = objective(rho)
    history = [value]
    step = initial_step
    converged = False
    iterations = 0

    for _ in range(options.max_iter):
        accepted = False
        trial_step = step
        for _ in range(TOMO_MAX_HALVINGS + 1):
            candidate = propose(rho, trial_step)
            candidate_value = objective(candidate)
            if np.isfinite(candidate_value) and candidate_value >= value - MONOTONE_SLACK:
                accepted = True
                break
            trial_step *= 0.5

        if not accepted:
            # No ascent direction left at any step size
            converged = True
            break

        change = float(np.linalg.norm(candidate - rho))
        rho, value = candidate, candidate_value
        history.append(value)
        iterations += 1
        step = min(initial_step, trial_step * 2) if recover_step else step

        if change < options.conv_tol:
            converged = True
            break

    if not converged:
        logger.warning(
            f"{method} reached the iteration cap without converging",
            extra={"iterations": iterations, "objective": value},
        )

    return TomoResult(project_to_density(rho), method, iterations, converged, value, tuple(history))


def maxlik(
    record: MeasurementRecord, frame: ProjectorFrame, options: TomoOptions = TomoOptions()
) -> TomoResult:
    """
    Diluted RrhoR maximum likelihood.

    rho <- N[R_t rho R_t] with R = sum_j (f_j / Tr(rho Pi_j)) Pi_j and
    R_t = I + t (R - I), t = 1 - dilution. On a likelihood decrease t is
    halved (stronger dilution). Incomplete records iterate over the measured
    projectors only.

    Raises:
        InvalidInputError: If the record is empty or refers to unknown projectors.
    """
    if len(record) == 0:
        raise InvalidInputError("MaxLik needs at least one measured projector")
    projectors, freqs = _record_operators(record, frame)
    dim = projectors.shape[1]
    identity = np.eye(dim, dtype=complex)

    def objective(rho: np.ndarray) -> float:
        return float(freqs @ np.log(_probabilities(projectors, rho)))

    def propose(rho: np.ndarray, t: float) -> np.ndarray:
        ratios = freqs / _probabilities(projectors, rho)
        r = np.einsum("k,kij->ij", ratios, projectors)
        r_t = identity + t * (r - identity)
        return _normalize(r_t @ rho @ r_t.conj().T)

    return _ascend(identity / dim, objective, propose, 1.0 - options.dilution, options, "maxlik", False)


def mlme(
    record: MeasurementRecord, frame: ProjectorFrame, options: TomoOptions = TomoOptions()
) -> TomoResult:
    """
    Maximum-entropy maximum likelihood.

    rho <- N[exp(log rho + eta grad)], grad = sum_j (f_j / p_j) Pi_j - lambda (log rho + I),
    with eigenvalues floored before the logarithm. An empty record yields the
    maximally mixed state.
    """
    projectors, freqs = _record_operators(record, frame)
    dim = frame.projectors.shape[1]
    identity = np.eye(dim, dtype=complex)
    lam = options.entropy_weight

    def objective(rho: np.ndarray) -> float:
        likelihood = float(freqs @ np.log(_probabilities(projectors, rho))) if freqs.size else 0.0
        return likelihood + lam * _entropy(rho)

    def propose(rho: np.ndarray, eta: float) -> np.ndarray:
        log_rho = _log_hermitian(rho)
        gradient = -lam * (log_rho + identity)
        if freqs.size:
            ratios = freqs / _probabilities(projectors, rho)
            gradient = gradient + np.einsum("k,kij->ij", ratios, projectors)
        return _exp_normalized(log_rho + eta * gradient)

    return _ascend(identity / dim, objective, propose, options.step, options, "mlme", True)
