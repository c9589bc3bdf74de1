"""
Seeded generation of the training and evaluation state families.

Families:
- Bures-distributed mixed states (Ginibre matrix + Haar unitary).
- Haar-random pure states admixed with white noise.
- Two-qubit Werner states with a truncated-normal mixing parameter.
- The N-qubit Pauli family (identity plus the three N-fold Pauli correlators),
  explored on a grid with unphysical points rejected.
- The two-qubit training mixture (exact Bures fraction, remainder Haar-noisy).

Every sample draws from its own ``SeedSequence`` substream keyed by
(seed, stream, index), so a dataset is a pure function of its spec and
can be generated in any order or in parallel.
"""

import itertools
import logging
from dataclasses import dataclass, field
from enum import Enum
from functools import lru_cache
from typing import Dict, List, Optional, Tuple

import numpy as np
from scipy.special import ndtr

from config.settings import (
    BURES_FRACTION,
    HAAR_NOISE_MAX,
    HAAR_NOISE_MIN,
    PAULI_GRID_RESOLUTION,
    PSD_TOL,
    WERNER_EPS,
    WERNER_MAX_REJECTIONS,
    WERNER_MU,
    WERNER_SIGMA,
)
from utils.errors import InvalidInputError
from utils.qcore import (
    DensityMatrix,
    PureState,
    bell_state,
    density_from_pure,
    hermitian_eig,
    pauli_string,
)

logger = logging.getLogger("eqpbench.ensembles")

# Substream identifiers
STREAM_TRAIN = 0
STREAM_TEST = 1
STREAM_CHAIN = 2
STREAM_SPLIT = 3
STREAM_ASSIGN = 4
STREAM_MEASURE = 5
STREAM_SWEEP = 6
STREAM_TRAINING = 7


class EnsembleKind(Enum):
    """Enumeration of state families."""

    BURES = "bures"
    HAAR_NOISY = "haar_noisy"
    WERNER = "werner"
    PAULI_FAMILY = "pauli_family"
    MIXTURE = "mixture"  # Bures fraction + Haar-noisy remainder


DEFAULT_PARAMS: Dict[EnsembleKind, Dict[str, float]] = {
    EnsembleKind.BURES: {},
    EnsembleKind.HAAR_NOISY: {"noise_min": HAAR_NOISE_MIN, "noise_max": HAAR_NOISE_MAX},
    EnsembleKind.WERNER: {"mu": WERNER_MU, "sigma": WERNER_SIGMA, "eps": WERNER_EPS},
    EnsembleKind.PAULI_FAMILY: {"resolution": float(PAULI_GRID_RESOLUTION)},
    EnsembleKind.MIXTURE: {
        "bures_fraction": BURES_FRACTION,
        "noise_min": HAAR_NOISE_MIN,
        "noise_max": HAAR_NOISE_MAX,
    },
}


@dataclass(frozen=True)
class EnsembleSpec:
    """
    Full description of a state stream.

    Attributes:
        kind: State family.
        n_qubits: Register size.
        seed: 64-bit seed; together with the other fields it fixes every sample.
        params: Kind-specific overrides of ``DEFAULT_PARAMS`` (noise interval,
            Werner mu/sigma/eps, grid resolution, Bures fraction).
    """

    kind: EnsembleKind
    n_qubits: int
    seed: int
    params: Dict[str, float] = field(default_factory=dict)

    def __post_init__(self):
        if not isinstance(self.kind, EnsembleKind):
            object.__setattr__(self, "kind", EnsembleKind(self.kind))
        if self.n_qubits < 1:
            raise InvalidInputError("n_qubits must be at least 1")
        if not 0 <= int(self.seed) < 2**64:
            raise InvalidInputError("seed must be a 64-bit unsigned integer")

        unknown = set(self.params) - set(DEFAULT_PARAMS[self.kind])
        if unknown:
            raise InvalidInputError(f"Unknown parameters for {self.kind.value}: {sorted(unknown)}")

        if self.kind == EnsembleKind.WERNER and self.n_qubits != 2:
            raise InvalidInputError("Werner states are defined for two qubits")

        if self.kind in (EnsembleKind.HAAR_NOISY, EnsembleKind.MIXTURE):
            lo, hi = self.param("noise_min"), self.param("noise_max")
            if not 0.0 <= lo <= hi <= 1.0:
                raise InvalidInputError("Noise interval must satisfy 0 <= min <= max <= 1")

        if self.kind == EnsembleKind.MIXTURE and not 0.0 <= self.param("bures_fraction") <= 1.0:
            raise InvalidInputError("bures_fraction must lie in [0, 1]")

        if self.kind == EnsembleKind.WERNER:
            if self.param("sigma") <= 0 or not 0.0 < self.param("eps") < 1.0:
                raise InvalidInputError("Werner parameters need sigma > 0 and eps in (0, 1)")

        if self.kind == EnsembleKind.PAULI_FAMILY and self.param("resolution") < 2:
            raise InvalidInputError("Grid resolution must be at least 2")

    def param(self, name: str) -> float:
        """Value of a kind-specific parameter, falling back to the default."""
        return float(self.params.get(name, DEFAULT_PARAMS[self.kind][name]))

    def to_text(self) -> str:
        """
        Serialize as a ``key = value`` configuration block.

        Parameters are written with their effective values, sorted by name.
        """
        lines = [
            f"kind = {self.kind.value}",
            f"n_qubits = {self.n_qubits}",
            f"seed = {int(self.seed)}",
        ]
        for name in sorted(DEFAULT_PARAMS[self.kind]):
            lines.append(f"param.{name} = {self.param(name)!r}")
        return "\n".join(lines)

    @classmethod
    def from_text(cls, text: str) -> "EnsembleSpec":
        """
        Parse a block written by ``to_text``.

        Raises:
            InvalidInputError: On malformed lines or missing keys.
        """
        values: Dict[str, str] = {}
        params: Dict[str, float] = {}
        for raw in text.splitlines():
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise InvalidInputError(f"Malformed spec line: {raw!r}")
            key, value = (part.strip() for part in line.split("=", 1))
            if key.startswith("param."):
                try:
                    params[key[len("param."):]] = float(value)
                except ValueError:
                    raise InvalidInputError(f"Parameter {key} is not a number: {value!r}")
            else:
                values[key] = value

        missing = {"kind", "n_qubits", "seed"} - set(values)
        if missing:
            raise InvalidInputError(f"Spec block is missing {sorted(missing)}")
        try:
            return cls(
                kind=EnsembleKind(values["kind"]),
                n_qubits=int(values["n_qubits"]),
                seed=int(values["seed"]),
                params=params,
            )
        except ValueError as e:
            raise InvalidInputError(f"Invalid spec block: {e}")


@dataclass(frozen=True, eq=False)
class GeneratedState:
    """
    One generated sample.

    Attributes:
        density: The state.
        reference: Ideal pure reference state used for fidelity labels.
        kind: Family the sample was actually drawn from (differs from the
            spec kind for mixtures).
        params: Sample-level parameters (noise fraction, Werner p, grid point).
    """

    density: DensityMatrix
    reference: PureState
    kind: EnsembleKind
    params: Dict[str, float]


def sample_rng(seed: int, *keys: int) -> np.random.Generator:
    """
    Independent generator for the substream addressed by ``keys``.

    Args:
        seed: Root seed.
        *keys: Stream identifier followed by sample indices.
    """
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in keys)))


def ginibre(dim: int, rng: np.random.Generator) -> np.ndarray:
    """Complex Ginibre matrix with i.i.d. N(0,1) + i N(0,1) entries."""
    if dim < 1:
        raise InvalidInputError("dim must be at least 1")
    return rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))


def haar_unitary(dim: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-random unitary from the QR decomposition of a Ginibre matrix, R diagonal phase-fixed."""
    q, r = np.linalg.qr(ginibre(dim, rng))
    diagonal = np.diagonal(r)
    return q * (diagonal / np.abs(diagonal))


def haar_pure_state(n_qubits: int, rng: np.random.Generator) -> PureState:
    dim = 2**n_qubits
    vector = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
    return PureState.normalized(vector)


def bures_state(n_qubits: int, rng: np.random.Generator) -> DensityMatrix:
    """
    Bures-distributed density matrix (1 + U^dag) G G^dag (1 + U) / Tr[...].

    G is Ginibre and U Haar, both of dimension 2^N and drawn independently.
    """
    if n_qubits < 1:
        raise InvalidInputError("n_qubits must be at least 1")
    dim = 2**n_qubits
    g = ginibre(dim, rng)
    u = haar_unitary(dim, rng)
    a = (np.eye(dim) + u.conj().T) @ g
    m = a @ a.conj().T
    m = m / np.trace(m).real
    return DensityMatrix(0.5 * (m + m.conj().T))


def mix_with_white_noise(psi: PureState, noise: float) -> DensityMatrix:
    """(1 - noise)|psi><psi| + noise I / 2^N."""
    if not 0.0 <= noise <= 1.0:
        raise InvalidInputError(f"noise must lie in [0, 1], got {noise}")
    dim = psi.amplitudes.shape[0]
    pure = density_from_pure(psi).entries
    return DensityMatrix((1.0 - noise) * pure + noise * np.eye(dim) / dim)


def haar_pure_noisy(n_qubits: int, noise: float, rng: np.random.Generator) -> DensityMatrix:
    """Haar-random pure state admixed with a white-noise fraction ``noise``."""
    if not 0.0 <= noise <= 1.0:
        raise InvalidInputError(f"noise must lie in [0, 1], got {noise}")
    return mix_with_white_noise(haar_pure_state(n_qubits, rng), noise)


def werner(p: float) -> DensityMatrix:
    """
    Two-qubit Werner state p |psi-><psi-| + (1 - p) I/4.

    Raises:
        InvalidInputError: If p is outside [0, 1].
    """
    if not 0.0 <= p <= 1.0:
        raise InvalidInputError(f"Werner p must lie in [0, 1], got {p}")
    singlet = density_from_pure(bell_state("psi-")).entries
    return DensityMatrix(p * singlet + (1.0 - p) * np.eye(4) / 4)


def sample_werner_p(
    mu: float,
    sigma: float,
    eps: float,
    rng: np.random.Generator,
    max_draws: int = WERNER_MAX_REJECTIONS,
) -> float:
    """
    Rejection-sample N(mu, sigma^2) restricted to [0, 1 - eps].

    Raises:
        InvalidInputError: If sigma <= 0, eps is outside (0, 1), or the
            acceptance region carries negligible probability mass.
    """
    if sigma <= 0:
        raise InvalidInputError("sigma must be positive")
    if not 0.0 < eps < 1.0:
        raise InvalidInputError("eps must lie in (0, 1)")

    upper = 1.0 - eps
    mass = ndtr((upper - mu) / sigma) - ndtr((0.0 - mu) / sigma)
    if mass < 1e-12:
        raise InvalidInputError(
            f"Truncation region [0, {upper}] has negligible mass for mu={mu}, sigma={sigma}"
        )

    drawn = 0
    while drawn < max_draws:
        batch = rng.normal(mu, sigma, size=64)
        drawn += batch.size
        accepted = batch[(batch >= 0.0) & (batch <= upper)]
        if accepted.size:
            return float(accepted[0])

    raise InvalidInputError(f"No Werner parameter accepted after {max_draws} draws")


def pauli_family(n_qubits: int, rx: float, ry: float, rz: float) -> Optional[DensityMatrix]:
    """
    (1/2^N)(I + rz Z^N + rx X^N + ry Y^N), or None when the point is unphysical.

    Raises:
        InvalidInputError: If a coefficient lies outside [-1, 1].
    """
    for name, value in (("rx", rx), ("ry", ry), ("rz", rz)):
        if not -1.0 <= value <= 1.0:
            raise InvalidInputError(f"{name} must lie in [-1, 1], got {value}")

    dim = 2**n_qubits
    m = (
        np.eye(dim, dtype=complex)
        + rz * pauli_string("Z" * n_qubits)
        + rx * pauli_string("X" * n_qubits)
        + ry * pauli_string("Y" * n_qubits)
    ) / dim

    if np.linalg.eigvalsh(m)[0] < -PSD_TOL:
        return None
    return DensityMatrix(m)


@lru_cache(maxsize=16)
def pauli_family_grid(n_qubits: int, resolution: int) -> Tuple[Tuple[float, float, float], ...]:
    """
    Physically valid grid points (rx, ry, rz) on a resolution^3 grid over [-1, 1]^3.

    Points are returned in lexicographic grid order.
    """
    axis = np.linspace(-1.0, 1.0, int(resolution))
    accepted = []
    for rx, ry, rz in itertools.product(axis, repeat=3):
        if pauli_family(n_qubits, float(rx), float(ry), float(rz)) is not None:
            accepted.append((float(rx), float(ry), float(rz)))

    logger.debug(
        "Pauli family grid built",
        extra={"n_qubits": n_qubits, "resolution": resolution, "accepted": len(accepted)},
    )
    return tuple(accepted)


def principal_state(rho: DensityMatrix) -> PureState:
    """Eigenvector of the largest eigenvalue, with its first nonzero amplitude made real."""
    _, vectors = hermitian_eig(rho)
    v = vectors[:, 0]
    pivot = v[np.argmax(np.abs(v) > 1e-12)]
    return PureState.normalized(v * np.exp(-1j * np.angle(pivot)))


@lru_cache(maxsize=32)
def _mixture_assignment(spec_text: str, count: int, stream: int) -> Tuple[bool, ...]:
    spec = EnsembleSpec.from_text(spec_text)
    n_bures = int(round(spec.param("bures_fraction") * count))
    flags = np.zeros(count, dtype=bool)
    flags[:n_bures] = True
    sample_rng(spec.seed, STREAM_ASSIGN, stream).shuffle(flags)
    return tuple(bool(f) for f in flags)


@lru_cache(maxsize=32)
def _grid_selection(spec_text: str, count: int, stream: int) -> Tuple[int, ...]:
    spec = EnsembleSpec.from_text(spec_text)
    points = pauli_family_grid(spec.n_qubits, int(spec.param("resolution")))
    rng = sample_rng(spec.seed, STREAM_ASSIGN, stream)
    chosen = rng.choice(len(points), size=count, replace=count > len(points))
    return tuple(int(i) for i in chosen)


def _noise_level(spec: EnsembleSpec, rng: np.random.Generator) -> float:
    return float(rng.uniform(spec.param("noise_min"), spec.param("noise_max")))


def generate_state(
    spec: EnsembleSpec, index: int, count: int, stream: int = STREAM_TRAIN
) -> GeneratedState:
    """
    Sample ``index`` of a stream of ``count`` states.

    ``count`` matters only for stream-level plans: the exact Bures count of a
    mixture and the uniform subsample of the Pauli-family grid.

    Reference states: Haar-noisy -> the pure state; Werner -> |psi->;
    Bures and Pauli family -> the principal eigenvector.
    """
    if not 0 <= index < count:
        raise InvalidInputError(f"index {index} outside stream of {count} states")

    rng = sample_rng(spec.seed, stream, index)
    n = spec.n_qubits
    kind = spec.kind

    if kind == EnsembleKind.MIXTURE:
        kind = (
            EnsembleKind.BURES
            if _mixture_assignment(spec.to_text(), count, stream)[index]
            else EnsembleKind.HAAR_NOISY
        )

    if kind == EnsembleKind.BURES:
        rho = bures_state(n, rng)
        return GeneratedState(rho, principal_state(rho), kind, {})

    if kind == EnsembleKind.HAAR_NOISY:
        noise = _noise_level(spec, rng)
        psi = haar_pure_state(n, rng)
        return GeneratedState(mix_with_white_noise(psi, noise), psi, kind, {"noise": noise})

    if kind == EnsembleKind.WERNER:
        p = sample_werner_p(spec.param("mu"), spec.param("sigma"), spec.param("eps"), rng)
        return GeneratedState(werner(p), bell_state("psi-"), kind, {"p": p})

    point_index = _grid_selection(spec.to_text(), count, stream)[index]
    rx, ry, rz = pauli_family_grid(n, int(spec.param("resolution")))[point_index]
    rho = pauli_family(n, rx, ry, rz)
    return GeneratedState(rho, principal_state(rho), kind, {"rx": rx, "ry": ry, "rz": rz})


def generate_states(spec: EnsembleSpec, count: int, stream: int = STREAM_TRAIN) -> List[GeneratedState]:
    """All ``count`` samples of a stream, in index order."""
    return [generate_state(spec, i, count, stream) for i in range(count)]
