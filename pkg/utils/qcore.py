"""
Complex linear algebra and quantum-state primitives.

This module provides the immutable state containers (density matrices, pure
states, single-qubit Bloch parametrizations) and the pure functions every
other module builds on: Pauli strings, Hermitian eigendecomposition,
fidelity, purity, Hilbert-Schmidt products, partial transposition, and
partial projection onto product bras. Registers are always N-qubit
(dimension 2^N); storage is dense complex NumPy arrays.
"""

import itertools
import logging
from dataclasses import dataclass, field
from functools import lru_cache, reduce
from typing import Sequence, Tuple, Union

import numpy as np

from config.settings import (
    EIG_HERMITIAN_TOL,
    HERMITIAN_TOL,
    NORM_TOL,
    PROBABILITY_FLOOR,
    PSD_TOL,
    TRACE_TOL,
)
from utils.constants import PAULI_AXES
from utils.errors import InvalidInputError

logger = logging.getLogger("eqpbench.qcore")

PAULI_MATRICES = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}
for _matrix in PAULI_MATRICES.values():
    _matrix.setflags(write=False)


def qubits_for_dim(dim: int) -> int:
    """
    Number of qubits of a register of the given Hilbert-space dimension.

    Raises:
        InvalidInputError: If ``dim`` is not a power of two >= 2.
    """
    n = int(dim).bit_length() - 1
    if dim < 2 or 2**n != dim:
        raise InvalidInputError(f"Dimension {dim} is not a 2^N qubit register")
    return n


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    """
    A validated N-qubit density operator.

    The constructor copies ``entries`` and rejects matrices that are not
    Hermitian, unit-trace, and positive semidefinite within the configured
    tolerances. The stored array is read-only.

    Attributes:
        entries: Complex matrix of shape (2^N, 2^N).
        n_qubits: Number of qubits N (derived from the shape).
    """

    entries: np.ndarray
    n_qubits: int = field(init=False)

    def __post_init__(self):
        entries = np.array(self.entries, dtype=complex)
        if entries.ndim != 2 or entries.shape[0] != entries.shape[1]:
            raise InvalidInputError(f"Density matrix must be square, got {entries.shape}")

        n_qubits = qubits_for_dim(entries.shape[0])

        hermitian_error = float(np.max(np.abs(entries - entries.conj().T)))
        if hermitian_error > HERMITIAN_TOL:
            raise InvalidInputError(f"Matrix is not Hermitian (error {hermitian_error:.3e})")

        trace_error = abs(np.trace(entries) - 1.0)
        if trace_error > TRACE_TOL:
            raise InvalidInputError(f"Matrix trace deviates from one by {trace_error:.3e}")

        min_eig = float(np.linalg.eigvalsh(0.5 * (entries + entries.conj().T))[0])
        if min_eig < -PSD_TOL:
            raise InvalidInputError(f"Matrix is not positive semidefinite (min eigenvalue {min_eig:.3e})")

        entries.setflags(write=False)
        object.__setattr__(self, "entries", entries)
        object.__setattr__(self, "n_qubits", n_qubits)

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    def __repr__(self) -> str:
        return f"<DensityMatrix n_qubits={self.n_qubits} purity={purity(self):.4f}>"


@dataclass(frozen=True, eq=False)
class PureState:
    """
    A normalized N-qubit state vector.

    Attributes:
        amplitudes: Complex vector of length 2^N with unit norm.
        n_qubits: Number of qubits N (derived).
    """

    amplitudes: np.ndarray
    n_qubits: int = field(init=False)

    def __post_init__(self):
        amplitudes = np.array(self.amplitudes, dtype=complex).reshape(-1)
        n_qubits = qubits_for_dim(amplitudes.shape[0])

        norm_error = abs(np.linalg.norm(amplitudes) - 1.0)
        if norm_error > NORM_TOL:
            raise InvalidInputError(f"State vector is not normalized (error {norm_error:.3e})")

        amplitudes.setflags(write=False)
        object.__setattr__(self, "amplitudes", amplitudes)
        object.__setattr__(self, "n_qubits", n_qubits)

    @classmethod
    def normalized(cls, vector: Sequence[complex]) -> "PureState":
        """Build a PureState from an unnormalized, nonzero vector."""
        vector = np.asarray(vector, dtype=complex).reshape(-1)
        norm = np.linalg.norm(vector)
        if norm == 0:
            raise InvalidInputError("Cannot normalize the zero vector")
        return cls(vector / norm)


@dataclass(frozen=True)
class BlochQubit:
    """
    Single-qubit pure state on the Bloch sphere.

    Maps to amplitudes (cos(theta/2), e^{i phi} sin(theta/2)).

    Attributes:
        theta: Polar angle in [0, pi].
        phi: Azimuthal angle in [0, 2 pi).
    """

    theta: float
    phi: float

    def __post_init__(self):
        if not 0.0 <= self.theta <= np.pi:
            raise InvalidInputError(f"theta must lie in [0, pi], got {self.theta}")
        if not 0.0 <= self.phi < 2 * np.pi:
            raise InvalidInputError(f"phi must lie in [0, 2pi), got {self.phi}")

    def ket(self) -> np.ndarray:
        return np.array(
            [np.cos(self.theta / 2), np.exp(1j * self.phi) * np.sin(self.theta / 2)],
            dtype=complex,
        )

    @classmethod
    def from_ket(cls, ket: Sequence[complex]) -> "BlochQubit":
        """
        Bloch angles of a single-qubit ket, discarding its global phase.

        Raises:
            InvalidInputError: If the ket is not two-dimensional or is zero.
        """
        ket = np.asarray(ket, dtype=complex).reshape(-1)
        if ket.shape[0] != 2:
            raise InvalidInputError("A Bloch qubit needs a two-component ket")
        norm = np.linalg.norm(ket)
        if norm == 0:
            raise InvalidInputError("Cannot convert the zero vector")
        a, b = ket / norm

        theta = 2.0 * float(np.arccos(np.clip(abs(a), 0.0, 1.0)))
        if abs(b) < 1e-15 or abs(a) < 1e-15:
            # Poles: the azimuth is irrelevant, or absorbed by the global phase
            phi = 0.0
        else:
            phi = float((np.angle(b) - np.angle(a)) % (2 * np.pi))
            if phi >= 2 * np.pi:
                phi = 0.0
        return cls(theta=min(theta, np.pi), phi=phi)


def as_matrix(m: Union[DensityMatrix, np.ndarray]) -> np.ndarray:
    """
    Return the raw square complex array behind a matrix-like argument.

    Raises:
        InvalidInputError: If the argument is not a square matrix.
    """
    if isinstance(m, DensityMatrix):
        return m.entries
    arr = np.asarray(m, dtype=complex)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise InvalidInputError(f"Expected a square matrix, got shape {arr.shape}")
    return arr


def _check_same_dim(a: np.ndarray, b: np.ndarray) -> None:
    if a.shape != b.shape:
        raise InvalidInputError(f"Dimension mismatch: {a.shape} vs {b.shape}")


def density_from_pure(psi: Union[PureState, Sequence[complex]]) -> DensityMatrix:
    """
    Rank-1 density matrix |psi><psi|.

    Args:
        psi: A PureState, or a raw vector that must already be normalized.

    Raises:
        InvalidInputError: If the vector is not normalized.
    """
    if not isinstance(psi, PureState):
        psi = PureState(np.asarray(psi, dtype=complex))
    amps = psi.amplitudes
    return DensityMatrix(np.outer(amps, amps.conj()))


def maximally_mixed(n_qubits: int) -> DensityMatrix:
    dim = 2**n_qubits
    return DensityMatrix(np.eye(dim, dtype=complex) / dim)


def bell_state(name: str) -> PureState:
    """
    One of the four Bell states: 'phi+', 'phi-', 'psi+', 'psi-'.

    |phi-> = (|00> - |11>)/sqrt(2) and |psi-> = (|01> - |10>)/sqrt(2).
    """
    s = 1 / np.sqrt(2)
    vectors = {
        "phi+": [s, 0, 0, s],
        "phi-": [s, 0, 0, -s],
        "psi+": [0, s, s, 0],
        "psi-": [0, s, -s, 0],
    }
    key = name.lower()
    if key not in vectors:
        raise InvalidInputError(f"Unknown Bell state {name!r}")
    return PureState(np.array(vectors[key], dtype=complex))


def product_ket(kets: Sequence[np.ndarray]) -> np.ndarray:
    """Tensor product of single-qubit kets, qubit 0 most significant."""
    return reduce(np.kron, [np.asarray(k, dtype=complex) for k in kets])


def pauli_string(axes: Union[str, Sequence[str]]) -> np.ndarray:
    """
    Tensor product of single-qubit Pauli matrices in the given order.

    Args:
        axes: Sequence (or string) over {'I', 'X', 'Y', 'Z'}, length N >= 1.

    Raises:
        InvalidInputError: On an empty sequence or an unknown axis.
    """
    axes = list(axes)
    if not axes:
        raise InvalidInputError("A Pauli string needs at least one axis")
    try:
        factors = [PAULI_MATRICES[a.upper()] for a in axes]
    except KeyError as e:
        raise InvalidInputError(f"Unknown Pauli axis {e.args[0]!r}")
    return reduce(np.kron, factors)


@lru_cache(maxsize=8)
def _pauli_basis(n_qubits: int) -> np.ndarray:
    stack = np.array(
        [pauli_string(axes) for axes in itertools.product(PAULI_AXES, repeat=n_qubits)]
    )
    stack.setflags(write=False)
    return stack


def pauli_labels(n_qubits: int) -> Tuple[str, ...]:
    return tuple("".join(axes) for axes in itertools.product(PAULI_AXES, repeat=n_qubits))


def pauli_expectations(rho: Union[DensityMatrix, np.ndarray]) -> np.ndarray:
    """
    Expectation values Tr(rho P) of all 4^N Pauli strings.

    Ordering is lexicographic over (I, X, Y, Z) with qubit 0 most significant,
    matching ``pauli_labels``.
    """
    arr = as_matrix(rho)
    basis = _pauli_basis(qubits_for_dim(arr.shape[0]))
    return np.real(np.einsum("kij,ji->k", basis, arr))


def hermitian_eig(m: Union[DensityMatrix, np.ndarray]) -> Tuple[np.ndarray, np.ndarray]:
    """
    Eigendecomposition of a Hermitian matrix.

    Args:
        m: Complex Hermitian matrix (within 1e-8).

    Returns:
        Tuple (eigenvalues in descending order, orthonormal eigenvectors as columns).

    Raises:
        InvalidInputError: If the input is not Hermitian.
    """
    arr = as_matrix(m)
    error = float(np.max(np.abs(arr - arr.conj().T))) if arr.size else 0.0
    if error > EIG_HERMITIAN_TOL:
        raise InvalidInputError(f"Matrix is not Hermitian (error {error:.3e})")

    eigenvalues, eigenvectors = np.linalg.eigh(0.5 * (arr + arr.conj().T))
    return eigenvalues[::-1].copy(), eigenvectors[:, ::-1].copy()


def _psd_sqrt(arr: np.ndarray) -> np.ndarray:
    eigenvalues, eigenvectors = np.linalg.eigh(0.5 * (arr + arr.conj().T))
    root = np.sqrt(np.clip(eigenvalues, 0.0, None))
    return (eigenvectors * root) @ eigenvectors.conj().T


def fidelity(rho: Union[DensityMatrix, np.ndarray], sigma: Union[DensityMatrix, np.ndarray]) -> float:
    """
    Uhlmann fidelity F = (Tr sqrt(sqrt(rho) sigma sqrt(rho)))^2.

    Square roots are taken through eigendecompositions with negative
    eigenvalues clamped to zero, so small PSD violations never produce
    complex values.

    Raises:
        InvalidInputError: On a dimension mismatch.
    """
    a, b = as_matrix(rho), as_matrix(sigma)
    _check_same_dim(a, b)

    root = _psd_sqrt(a)
    inner = root @ b @ root
    eigenvalues = np.linalg.eigvalsh(0.5 * (inner + inner.conj().T))
    value = float(np.sum(np.sqrt(np.clip(eigenvalues, 0.0, None))) ** 2)
    return float(np.clip(value, 0.0, 1.0))


def purity(rho: Union[DensityMatrix, np.ndarray]) -> float:
    """Tr(rho^2)."""
    arr = as_matrix(rho)
    return float(np.real(np.sum(arr * arr.T)))


def hs_inner(a: Union[DensityMatrix, np.ndarray], b: Union[DensityMatrix, np.ndarray]) -> float:
    """
    Hilbert-Schmidt scalar product Tr(a b) of two Hermitian matrices.

    Raises:
        InvalidInputError: On a dimension mismatch.
    """
    x, y = as_matrix(a), as_matrix(b)
    _check_same_dim(x, y)
    return float(np.real(np.sum(x * y.T)))


def hs_distance(a: Union[DensityMatrix, np.ndarray], b: Union[DensityMatrix, np.ndarray]) -> float:
    x, y = as_matrix(a), as_matrix(b)
    _check_same_dim(x, y)
    return float(np.linalg.norm(x - y))


def trace_distance(a: Union[DensityMatrix, np.ndarray], b: Union[DensityMatrix, np.ndarray]) -> float:
    x, y = as_matrix(a), as_matrix(b)
    _check_same_dim(x, y)
    diff = x - y
    return 0.5 * float(np.sum(np.abs(np.linalg.eigvalsh(0.5 * (diff + diff.conj().T)))))


def von_neumann_entropy(rho: Union[DensityMatrix, np.ndarray]) -> float:
    """Entropy -Tr(rho ln rho); eigenvalues below the probability floor contribute zero."""
    arr = as_matrix(rho)
    eigenvalues = np.linalg.eigvalsh(0.5 * (arr + arr.conj().T))
    eigenvalues = eigenvalues[eigenvalues > PROBABILITY_FLOOR]
    return float(-np.sum(eigenvalues * np.log(eigenvalues)))


def partial_transpose(rho: Union[DensityMatrix, np.ndarray], subsystem: int) -> np.ndarray:
    """
    Transpose the given tensor factor of an N-qubit operator.

    Args:
        rho: Density matrix or Hermitian operator on 2^N dimensions.
        subsystem: Qubit index in [0, N).

    Returns:
        The partially transposed matrix (Hermitian, same trace).

    Raises:
        InvalidInputError: If ``subsystem`` is out of range.
    """
    arr = as_matrix(rho)
    n = qubits_for_dim(arr.shape[0])
    if not 0 <= subsystem < n:
        raise InvalidInputError(f"Subsystem {subsystem} out of range for {n} qubits")

    tensor = arr.reshape((2,) * (2 * n))
    axes = list(range(2 * n))
    axes[subsystem], axes[n + subsystem] = axes[n + subsystem], axes[subsystem]
    return tensor.transpose(axes).reshape(arr.shape)


def min_pt_eigenvalue(rho: Union[DensityMatrix, np.ndarray], subsystem: int = 0) -> float:
    """Smallest eigenvalue of the partial transpose on ``subsystem`` (PPT test)."""
    pt = partial_transpose(rho, subsystem)
    return float(np.linalg.eigvalsh(0.5 * (pt + pt.conj().T))[0])


def is_npt(rho: Union[DensityMatrix, np.ndarray], tol: float = 0.0) -> bool:
    """True if the partial transpose across any single-qubit cut has an eigenvalue below -tol."""
    n = qubits_for_dim(as_matrix(rho).shape[0])
    return any(min_pt_eigenvalue(rho, q) < -tol for q in range(n))


def partial_projection(
    rho: Union[DensityMatrix, np.ndarray],
    keep: int,
    bras: Union[PureState, np.ndarray, Sequence[np.ndarray]],
) -> np.ndarray:
    """
    Reduced operator <b| rho |b> on one qubit.

    Args:
        rho: Operator on N qubits.
        keep: Index of the qubit that is kept.
        bras: State on the N-1 complementary qubits (ascending qubit order),
            either as a vector of length 2^(N-1) or as a sequence of N-1
            single-qubit kets.

    Returns:
        2x2 Hermitian matrix acting on qubit ``keep``.

    Raises:
        InvalidInputError: If ``keep`` is out of range, the complement state
            has the wrong dimension, or it is not normalized.
    """
    arr = as_matrix(rho)
    n = qubits_for_dim(arr.shape[0])
    if not 0 <= keep < n:
        raise InvalidInputError(f"Qubit {keep} out of range for {n} qubits")

    if isinstance(bras, PureState):
        b = bras.amplitudes
    elif isinstance(bras, (list, tuple)):
        if len(bras) != n - 1:
            raise InvalidInputError(f"Expected {n - 1} complement kets, got {len(bras)}")
        b = product_ket(bras) if bras else np.ones(1, dtype=complex)
    else:
        b = np.asarray(bras, dtype=complex).reshape(-1)

    if b.shape[0] != 2 ** (n - 1):
        raise InvalidInputError(
            f"Complement state has dimension {b.shape[0]}, expected {2 ** (n - 1)}"
        )
    if abs(np.linalg.norm(b) - 1.0) > 1e-8:
        raise InvalidInputError("Complement state must be normalized")

    order = [keep] + [q for q in range(n) if q != keep]
    tensor = arr.reshape((2,) * (2 * n)).transpose(order + [n + q for q in order])
    tensor = tensor.reshape(2, 2 ** (n - 1), 2, 2 ** (n - 1))
    return np.einsum("iajb,a,b->ij", tensor, b.conj(), b)


def is_valid_density(m: Union[DensityMatrix, np.ndarray]) -> bool:
    """True if ``m`` passes all DensityMatrix invariants."""
    try:
        DensityMatrix(as_matrix(m))
    except InvalidInputError:
        return False
    return True


def project_to_density(m: np.ndarray) -> DensityMatrix:
    """
    Nearest-by-spectrum density matrix: Hermitize, clip negative eigenvalues, renormalize.

    A matrix whose clipped spectrum is all zero maps to the maximally mixed state.
    """
    arr = as_matrix(m)
    eigenvalues, eigenvectors = np.linalg.eigh(0.5 * (arr + arr.conj().T))
    eigenvalues = np.clip(eigenvalues, 0.0, None)
    total = eigenvalues.sum()
    if total <= 0:
        logger.warning("Projection of a negative operator; returning the maximally mixed state")
        return maximally_mixed(qubits_for_dim(arr.shape[0]))

    projected = (eigenvectors * (eigenvalues / total)) @ eigenvectors.conj().T
    return DensityMatrix(0.5 * (projected + projected.conj().T))
