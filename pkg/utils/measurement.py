"""
Product-projector frames, nested measurement subsets, and measurement simulation.

The universal frame for N qubits is the ordered set of 6^N product projectors
built from the X, Y and Z single-qubit eigenbases. Index i of the frame
corresponds to per-qubit basis indices (b_0, ..., b_{N-1}) in base 6, qubit 0
most significant, with per-qubit order Z+, Z-, X+, X-, Y+, Y-.
"""

import itertools
import logging
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Dict, Optional, Sequence, Tuple, Union

import numpy as np

from config.settings import SUPPORTED_QUBITS
from utils.constants import BASIS_LABELS, ERROR_UNSUPPORTED_QUBITS
from utils.errors import InvalidInputError
from utils.qcore import DensityMatrix, as_matrix, product_ket

logger = logging.getLogger("eqpbench.measurement")

_S = 1 / np.sqrt(2)
SINGLE_QUBIT_KETS = np.array(
    [
        [1, 0],  # Z+
        [0, 1],  # Z-
        [_S, _S],  # X+
        [_S, -_S],  # X-
        [_S, 1j * _S],  # Y+
        [_S, -1j * _S],  # Y-
    ],
    dtype=complex,
)
SINGLE_QUBIT_KETS.setflags(write=False)

VALUE_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class ProjectorFrame:
    """
    Ordered universal set of 6^N rank-1 product projectors.

    Attributes:
        n_qubits: Register size N.
        basis_indices: Integer array (6^N, N) of per-qubit basis indices into
            ``BASIS_LABELS``.
        kets: Complex array (6^N, 2^N) of the product kets.
        projectors: Complex array (6^N, 2^N, 2^N) of |k><k|.
    """

    n_qubits: int
    basis_indices: np.ndarray
    kets: np.ndarray
    projectors: np.ndarray = field(repr=False)

    def __len__(self) -> int:
        return self.kets.shape[0]

    def label(self, index: int) -> str:
        """Human-readable label such as 'Z+X-'."""
        return "".join(BASIS_LABELS[b] for b in self.basis_indices[index])

    def labels(self) -> Tuple[str, ...]:
        return tuple(self.label(i) for i in range(len(self)))

    def index_of(self, label: str) -> int:
        """
        Frame index of a label written as concatenated per-qubit labels ('Z+X-').

        Raises:
            InvalidInputError: If the label does not name a frame atom.
        """
        text = label.strip().upper()
        if len(text) != 2 * self.n_qubits:
            raise InvalidInputError(f"Label {label!r} does not name a {self.n_qubits}-qubit projector")
        index = 0
        for q in range(self.n_qubits):
            part = text[2 * q: 2 * q + 2]
            if part not in BASIS_LABELS:
                raise InvalidInputError(f"Unknown single-qubit label {part!r} in {label!r}")
            index = index * 6 + BASIS_LABELS.index(part)
        return index

    def factor_kets(self, index: int) -> Tuple[np.ndarray, ...]:
        """Single-qubit factors of atom ``index``."""
        return tuple(SINGLE_QUBIT_KETS[b] for b in self.basis_indices[index])

    def setting(self, index: int) -> Tuple[int, ...]:
        """Per-qubit measurement axis (0 = Z, 1 = X, 2 = Y) of atom ``index``."""
        return tuple(int(b) // 2 for b in self.basis_indices[index])

    def setting_members(self, setting: Sequence[int]) -> Tuple[int, ...]:
        """All 2^N frame indices sharing one measurement setting, in frame order."""
        members = []
        for outcomes in itertools.product((0, 1), repeat=self.n_qubits):
            index = 0
            for axis, outcome in zip(setting, outcomes):
                index = index * 6 + 2 * axis + outcome
            members.append(index)
        return tuple(members)


@lru_cache(maxsize=8)
def build_frame(n_qubits: int) -> ProjectorFrame:
    """Product frame for any register size; ``universal_frame`` restricts to supported sizes."""
    basis_indices = np.array(list(itertools.product(range(6), repeat=n_qubits)), dtype=int)
    kets = np.array([product_ket(SINGLE_QUBIT_KETS[row]) for row in basis_indices])
    projectors = np.einsum("ki,kj->kij", kets, kets.conj())
    for arr in (basis_indices, kets, projectors):
        arr.setflags(write=False)
    return ProjectorFrame(n_qubits, basis_indices, kets, projectors)


def universal_frame(n_qubits: int) -> ProjectorFrame:
    """
    The 6^N-atom product frame for a supported register size.

    Raises:
        InvalidInputError: If ``n_qubits`` is not 2 or 3.
    """
    if n_qubits not in SUPPORTED_QUBITS:
        raise InvalidInputError(ERROR_UNSUPPORTED_QUBITS)
    return build_frame(n_qubits)


@dataclass(frozen=True)
class SubsetChain:
    """
    Strictly nested projector subsets S_1 < S_2 < ... of a frame.

    The chain is stored as a draw order; S_k is the first ``sizes[k]``
    entries of ``order``.

    Attributes:
        n_qubits: Register size of the frame.
        frame_size: Number of atoms in the frame.
        sizes: Strictly increasing subset cardinalities.
        order: Frame indices in draw order, of length ``sizes[-1]``.
    """

    n_qubits: int
    frame_size: int
    sizes: Tuple[int, ...]
    order: Tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "sizes", tuple(int(s) for s in self.sizes))
        object.__setattr__(self, "order", tuple(int(i) for i in self.order))
        _check_sizes(self.sizes, self.frame_size)
        if len(self.order) != self.sizes[-1]:
            raise InvalidInputError("Chain order length must equal the largest subset size")
        if len(set(self.order)) != len(self.order):
            raise InvalidInputError("Chain order contains repeated indices")
        if any(not 0 <= i < self.frame_size for i in self.order):
            raise InvalidInputError("Chain order contains indices outside the frame")

    def __len__(self) -> int:
        return len(self.sizes)

    def subset(self, k: int) -> Tuple[int, ...]:
        return self.order[: self.sizes[k]]

    @property
    def subsets(self) -> Tuple[Tuple[int, ...], ...]:
        return tuple(self.subset(k) for k in range(len(self.sizes)))

    def to_dict(self) -> Dict[str, list]:
        return {"n_qubits": self.n_qubits, "frame_size": self.frame_size,
                "sizes": list(self.sizes), "order": list(self.order)}

    @classmethod
    def from_dict(cls, data: dict) -> "SubsetChain":
        try:
            return cls(int(data["n_qubits"]), int(data["frame_size"]),
                       tuple(data["sizes"]), tuple(data["order"]))
        except (KeyError, TypeError, ValueError) as e:
            raise InvalidInputError(f"Malformed subset chain: {e}")


def _check_sizes(sizes: Sequence[int], frame_size: int) -> None:
    if not sizes:
        raise InvalidInputError("At least one subset size is required")
    if any(b <= a for a, b in zip(sizes, sizes[1:])):
        raise InvalidInputError(f"Subset sizes must be strictly increasing, got {list(sizes)}")
    if sizes[0] < 1 or sizes[-1] > frame_size:
        raise InvalidInputError(f"Subset sizes must lie within 1..{frame_size}")


def nested_chain(frame: ProjectorFrame, sizes: Sequence[int], rng: np.random.Generator) -> SubsetChain:
    """
    Draw a nested chain by sequential sampling without replacement.

    S_1 is a uniform random subset of size ``sizes[0]``; each later subset
    extends the previous one with uniform draws from the remaining pool.

    Raises:
        InvalidInputError: If sizes are not strictly increasing within 1..|frame|.
    """
    sizes = tuple(int(s) for s in sizes)
    _check_sizes(sizes, len(frame))
    order = rng.permutation(len(frame))[: sizes[-1]]
    return SubsetChain(frame.n_qubits, len(frame), sizes, tuple(order))


@dataclass(frozen=True, eq=False)
class MeasurementRecord:
    """
    Outcome data for a subset of frame projectors.

    Attributes:
        indices: Frame indices that were measured (no repeats).
        values: Born probabilities (exact) or empirical frequencies, in [0, 1].
        shots: Shots per projector, or None for exact probabilities.
    """

    indices: Tuple[int, ...]
    values: np.ndarray
    shots: Optional[int] = None

    def __post_init__(self):
        indices = tuple(int(i) for i in self.indices)
        values = np.array(self.values, dtype=float).reshape(-1)
        if len(indices) != values.shape[0]:
            raise InvalidInputError(
                f"Record has {len(indices)} indices but {values.shape[0]} values"
            )
        if len(set(indices)) != len(indices):
            raise InvalidInputError("Record indices must be distinct")
        if values.size and (values.min() < -VALUE_TOL or values.max() > 1 + VALUE_TOL):
            raise InvalidInputError("Measurement values must lie in [0, 1]")
        values = np.clip(values, 0.0, 1.0)

        if self.shots is not None:
            if int(self.shots) < 1:
                raise InvalidInputError("shots must be at least 1")
            scaled = values * int(self.shots)
            if np.any(np.abs(scaled - np.round(scaled)) > 1e-9 * max(1, int(self.shots))):
                raise InvalidInputError("Finite-shot values must be multiples of 1/shots")
            object.__setattr__(self, "shots", int(self.shots))

        values.setflags(write=False)
        object.__setattr__(self, "indices", indices)
        object.__setattr__(self, "values", values)

    def __len__(self) -> int:
        return len(self.indices)

    @property
    def is_exact(self) -> bool:
        return self.shots is None

    def to_dict(self) -> dict:
        return {"indices": list(self.indices), "values": [float(v) for v in self.values],
                "shots": self.shots}

    @classmethod
    def from_dict(cls, data: dict) -> "MeasurementRecord":
        try:
            return cls(tuple(data["indices"]), np.asarray(data["values"], dtype=float), data.get("shots"))
        except (KeyError, TypeError, ValueError) as e:
            if isinstance(e, InvalidInputError):
                raise
            raise InvalidInputError(f"Malformed measurement record: {e}")


def _check_subset(frame: ProjectorFrame, subset: Sequence[int]) -> Tuple[int, ...]:
    subset = tuple(int(i) for i in subset)
    if any(not 0 <= i < len(frame) for i in subset):
        raise InvalidInputError(f"Subset contains indices outside the {len(frame)}-atom frame")
    return subset


def born_probs(
    rho: Union[DensityMatrix, np.ndarray], frame: ProjectorFrame, subset: Optional[Sequence[int]] = None
) -> np.ndarray:
    """
    Born probabilities Tr(rho Pi_j) for j in ``subset`` (the whole frame if omitted).

    Raises:
        InvalidInputError: On a dimension mismatch or invalid indices.
    """
    arr = as_matrix(rho)
    if arr.shape[0] != 2**frame.n_qubits:
        raise InvalidInputError(
            f"State dimension {arr.shape[0]} does not match a {frame.n_qubits}-qubit frame"
        )
    subset = tuple(range(len(frame))) if subset is None else _check_subset(frame, subset)
    kets = frame.kets[list(subset)]
    probs = np.real(np.einsum("ki,ij,kj->k", kets.conj(), arr, kets))
    return np.clip(probs, 0.0, 1.0)


def simulate_counts(
    probs: Sequence[float],
    shots: int,
    rng: np.random.Generator,
    indices: Optional[Sequence[int]] = None,
) -> MeasurementRecord:
    """
    Independent binomial shot noise per projector.

    Args:
        probs: Outcome probabilities.
        shots: Shots per projector (>= 1).
        rng: Generator for the draws.
        indices: Frame indices the probabilities belong to (defaults to 0..k-1).

    Raises:
        InvalidInputError: If shots < 1.
    """
    if shots < 1:
        raise InvalidInputError("shots must be at least 1")
    probs = np.clip(np.asarray(probs, dtype=float), 0.0, 1.0)
    indices = tuple(range(probs.shape[0])) if indices is None else tuple(indices)
    counts = rng.binomial(int(shots), probs)
    return MeasurementRecord(indices, counts / shots, int(shots))


def simulate_setting_counts(
    rho: Union[DensityMatrix, np.ndarray],
    frame: ProjectorFrame,
    subset: Sequence[int],
    shots: int,
    rng: np.random.Generator,
) -> np.ndarray:
    """
    Counts for ``subset`` with one multinomial draw per measurement setting.

    Settings are visited in sorted order so the generator is consumed
    deterministically.
    """
    subset = _check_subset(frame, subset)
    counts: Dict[int, int] = {}
    for setting in sorted({frame.setting(i) for i in subset}):
        members = frame.setting_members(setting)
        probs = born_probs(rho, frame, members)
        probs = probs / probs.sum()
        for index, k in zip(members, rng.multinomial(int(shots), probs)):
            counts[index] = int(k)
    return np.array([counts[i] for i in subset], dtype=int)


def simulate_record(
    rho: Union[DensityMatrix, np.ndarray],
    frame: ProjectorFrame,
    subset: Sequence[int],
    shots: Optional[int] = None,
    rng: Optional[np.random.Generator] = None,
    multinomial: bool = False,
) -> MeasurementRecord:
    """
    Measure ``rho`` on a subset of the frame.

    Args:
        rho: State to measure.
        frame: Projector frame.
        subset: Frame indices to measure.
        shots: Shots per projector; None yields exact probabilities.
        rng: Generator for shot noise (required when shots is finite).
        multinomial: Draw one multinomial per measurement setting instead of
            independent binomials per projector.
    """
    subset = _check_subset(frame, subset)
    if shots is None:
        return MeasurementRecord(subset, born_probs(rho, frame, subset), None)
    if rng is None:
        raise InvalidInputError("A generator is required for finite-shot simulation")
    if shots < 1:
        raise InvalidInputError("shots must be at least 1")
    if multinomial:
        counts = simulate_setting_counts(rho, frame, subset, shots, rng)
        return MeasurementRecord(subset, counts / shots, int(shots))
    return simulate_counts(born_probs(rho, frame, subset), shots, rng, subset)


def encode_input(record: MeasurementRecord, frame: ProjectorFrame) -> np.ndarray:
    """
    Two-channel network input of length 2|frame|.

    Channel 1 holds the measured values at their frame positions (zeros
    elsewhere); channel 2 is the measurement mask.

    Raises:
        InvalidInputError: If the record refers to indices outside the frame.
    """
    indices = list(_check_subset(frame, record.indices))
    size = len(frame)
    vector = np.zeros(2 * size, dtype=float)
    vector[indices] = record.values
    vector[[size + i for i in indices]] = 1.0
    return vector
