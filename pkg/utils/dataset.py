"""
Dataset construction, persistence, and experimental-counts import.

A dataset is a directory with one JSON-lines file per split (train,
validation, test). The first line of each file is a header (format tag,
version, generating spec, subset chain, shots); every following line is one
record. Complex matrices are stored row-major as [re, im] pairs.

Training/validation records carry a measurement on one randomly chosen
subset of the chain; test records carry the exact probabilities of the whole
frame so sweeps can cut any subset from them.
"""

import json
import logging
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from config.settings import THREE_QUBIT_SWEEP_SIZES, TRAIN_VALIDATION_RATIO, TWO_QUBIT_SWEEP_SIZES, scaled_test_size
from utils.constants import (
    COUNTS_COLUMNS,
    DATASET_FORMAT,
    DATASET_FORMAT_VERSION,
    DATASET_SPLITS,
    DATASET_SUFFIX,
    ERROR_EMPTY_DATASET,
)
from utils.ensembles import (
    STREAM_CHAIN,
    STREAM_MEASURE,
    STREAM_SPLIT,
    STREAM_TEST,
    STREAM_TRAIN,
    EnsembleSpec,
    generate_state,
    sample_rng,
)
from utils.eqp import canonical_qp, negativity
from utils.errors import CountsParseError, DatasetIOError, InvalidInputError
from utils.measurement import (
    MeasurementRecord,
    ProjectorFrame,
    SubsetChain,
    born_probs,
    encode_input,
    nested_chain,
    simulate_record,
    simulate_setting_counts,
    universal_frame,
)
from utils.models import DatasetHeader, DatasetSummary
from utils.parallel import gather_in_threads
from utils.qcore import (
    DensityMatrix,
    PureState,
    density_from_pure,
    fidelity,
    min_pt_eigenvalue,
    purity,
)

logger = logging.getLogger("eqpbench.dataset")


def default_sizes(n_qubits: int) -> Tuple[int, ...]:
    """Sweep sizes for a register size."""
    return TWO_QUBIT_SWEEP_SIZES if n_qubits == 2 else THREE_QUBIT_SWEEP_SIZES


def matrix_to_pairs(m: np.ndarray) -> list:
    return [[[float(z.real), float(z.imag)] for z in row] for row in np.asarray(m, dtype=complex)]


def pairs_to_matrix(pairs: list) -> np.ndarray:
    arr = np.asarray(pairs, dtype=float)
    if arr.ndim != 3 or arr.shape[2] != 2:
        raise InvalidInputError("Matrix must be stored as rows of [re, im] pairs")
    return arr[..., 0] + 1j * arr[..., 1]


@dataclass(frozen=True)
class RecordLabels:
    """Quantities derived from a record's density matrix."""

    target: np.ndarray = field(repr=False)
    negativity: float
    entangled: Optional[bool]
    fidelity: float
    purity: float


def compute_labels(density: DensityMatrix, reference: PureState, frame: ProjectorFrame) -> RecordLabels:
    """
    Canonical EQP target and labels of a state.

    ``negativity`` is that of the canonical frame vector; ``entangled`` is
    the PPT verdict for two qubits and None otherwise.
    """
    target = canonical_qp(density, frame)
    entangled = bool(min_pt_eigenvalue(density, 0) < 0) if density.n_qubits == 2 else None
    return RecordLabels(
        target=target,
        negativity=negativity(target),
        entangled=entangled,
        fidelity=fidelity(density, density_from_pure(reference)),
        purity=purity(density),
    )


@dataclass(frozen=True, eq=False)
class DatasetRecord:
    """
    One stored state with its measurement and labels.

    Attributes:
        record_id: Sample index within its generation stream.
        split: Split the record belongs to.
        kind: Family the state was drawn from.
        params: Sample-level generator parameters.
        density: The state.
        reference: Ideal pure reference state.
        measurement: Measured subset and values.
        labels: Canonical EQP target and derived labels.
    """

    record_id: int
    split: str
    kind: str
    params: Dict[str, float]
    density: DensityMatrix
    reference: PureState
    measurement: MeasurementRecord
    labels: RecordLabels

    @property
    def target(self) -> np.ndarray:
        return self.labels.target

    def to_json(self) -> dict:
        amps = self.reference.amplitudes
        return {
            "id": self.record_id,
            "split": self.split,
            "kind": self.kind,
            "params": {k: float(v) for k, v in sorted(self.params.items())},
            "rho": matrix_to_pairs(self.density.entries),
            "reference": [[float(z.real), float(z.imag)] for z in amps],
            "measurement": self.measurement.to_dict(),
            "target": [float(v) for v in self.labels.target],
            "labels": {
                "negativity": self.labels.negativity,
                "entangled": self.labels.entangled,
                "fidelity": self.labels.fidelity,
                "purity": self.labels.purity,
            },
        }

    @classmethod
    def from_json(cls, data: dict) -> "DatasetRecord":
        try:
            reference = np.asarray(data["reference"], dtype=float)
            labels = data["labels"]
            return cls(
                record_id=int(data["id"]),
                split=str(data["split"]),
                kind=str(data["kind"]),
                params={k: float(v) for k, v in data.get("params", {}).items()},
                density=DensityMatrix(pairs_to_matrix(data["rho"])),
                reference=PureState(reference[:, 0] + 1j * reference[:, 1]),
                measurement=MeasurementRecord.from_dict(data["measurement"]),
                labels=RecordLabels(
                    target=np.asarray(data["target"], dtype=float),
                    negativity=float(labels["negativity"]),
                    entangled=labels["entangled"],
                    fidelity=float(labels["fidelity"]),
                    purity=float(labels["purity"]),
                ),
            )
        except (KeyError, TypeError, ValueError, IndexError) as e:
            if isinstance(e, InvalidInputError):
                raise
            raise InvalidInputError(f"Malformed dataset record: {e}")


@dataclass(frozen=True, eq=False)
class Dataset:
    """A loaded split: header plus records."""

    header: DatasetHeader
    records: List[DatasetRecord]

    @property
    def spec(self) -> EnsembleSpec:
        return EnsembleSpec.from_text(self.header["spec"])

    @property
    def chain(self) -> SubsetChain:
        return SubsetChain.from_dict(self.header["chain"])

    @property
    def n_qubits(self) -> int:
        return int(self.header["n_qubits"])


def make_record(
    spec: EnsembleSpec,
    index: int,
    count: int,
    stream: int,
    split: str,
    frame: ProjectorFrame,
    chain: SubsetChain,
    shots: Optional[int] = None,
) -> DatasetRecord:
    """
    Generate, measure and label sample ``index`` of a stream.

    Test records are measured on the whole frame with exact probabilities;
    other splits on a random subset of the chain, with optional shot noise.
    """
    generated = generate_state(spec, index, count, stream)
    if split == "test":
        subset = tuple(range(len(frame)))
        measurement = MeasurementRecord(subset, born_probs(generated.density, frame, subset), None)
    else:
        rng = sample_rng(spec.seed, STREAM_MEASURE, stream, index)
        subset = chain.subset(int(rng.integers(len(chain))))
        measurement = simulate_record(generated.density, frame, subset, shots, rng)

    return DatasetRecord(
        record_id=index,
        split=split,
        kind=generated.kind.value,
        params=dict(generated.params),
        density=generated.density,
        reference=generated.reference,
        measurement=measurement,
        labels=compute_labels(generated.density, generated.reference, frame),
    )


def verify_record(record: DatasetRecord, frame: ProjectorFrame, tol: float = 1e-8) -> bool:
    """True if the stored target reconstructs rho and the labels recompute exactly."""
    kets = frame.kets
    rebuilt = (kets.T * record.target) @ kets.conj()
    if np.linalg.norm(rebuilt - record.density.entries) > tol:
        return False
    labels = compute_labels(record.density, record.reference, frame)
    return (
        np.array_equal(labels.target, record.target)
        and labels.negativity == record.labels.negativity
        and labels.entangled == record.labels.entangled
        and labels.fidelity == record.labels.fidelity
        and labels.purity == record.labels.purity
    )


def split_path(directory: Union[str, Path], split: str) -> Path:
    if split not in DATASET_SPLITS:
        raise InvalidInputError(f"Unknown split {split!r}")
    return Path(directory) / f"{split}{DATASET_SUFFIX}"


def write_split(path: Union[str, Path], header: DatasetHeader, records: Sequence[DatasetRecord]) -> None:
    """
    Write one split file.

    Raises:
        DatasetIOError: If the file cannot be written.
    """
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", encoding="utf-8") as fh:
            fh.write(json.dumps(header, sort_keys=True) + "\n")
            for record in records:
                fh.write(json.dumps(record.to_json(), sort_keys=True) + "\n")
    except OSError as e:
        raise DatasetIOError(f"Cannot write {path}: {e}")


def load_split(path: Union[str, Path]) -> Dataset:
    """
    Read one split file.

    Raises:
        DatasetIOError: If the file is missing or malformed (with line numbers).
    """
    path = Path(path)
    try:
        lines = path.read_text(encoding="utf-8").splitlines()
    except OSError as e:
        raise DatasetIOError(f"Cannot read {path}: {e}")
    if not lines:
        raise DatasetIOError(f"{path} is empty")

    try:
        header = json.loads(lines[0])
    except json.JSONDecodeError as e:
        raise DatasetIOError(f"{path}:1: invalid header: {e}")
    if header.get("format") != DATASET_FORMAT:
        raise DatasetIOError(f"{path} is not an {DATASET_FORMAT} file")
    if header.get("version") != DATASET_FORMAT_VERSION:
        raise DatasetIOError(f"{path} has unsupported dataset version {header.get('version')}")

    records = []
    for number, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        try:
            records.append(DatasetRecord.from_json(json.loads(line)))
        except (json.JSONDecodeError, InvalidInputError) as e:
            raise DatasetIOError(f"{path}:{number}: {e}")

    if len(records) != header.get("count", len(records)):
        raise DatasetIOError(f"{path} declares {header.get('count')} records but holds {len(records)}")
    return Dataset(header, records)


def load_dataset(directory: Union[str, Path], split: str) -> Dataset:
    return load_split(split_path(directory, split))


def records_to_arrays(records: Sequence[DatasetRecord], frame: ProjectorFrame) -> Tuple[np.ndarray, np.ndarray]:
    """
    Network inputs (encoded measurements) and canonical targets, one row per record.

    Raises:
        InvalidInputError: If there are no records.
    """
    if not records:
        raise InvalidInputError(ERROR_EMPTY_DATASET)
    inputs = np.array([encode_input(r.measurement, frame) for r in records])
    targets = np.array([r.target for r in records])
    return inputs, targets


def _split_assignment(spec: EnsembleSpec, count: int) -> List[str]:
    parts = TRAIN_VALIDATION_RATIO
    n_train = int(round(count * parts[0] / (parts[0] + parts[1])))
    order = sample_rng(spec.seed, STREAM_SPLIT, 0).permutation(count)
    splits = ["validation"] * count
    for index in order[:n_train]:
        splits[int(index)] = "train"
    return splits


async def build_dataset(
    spec: EnsembleSpec,
    count: int,
    out_dir: Union[str, Path],
    sizes: Optional[Sequence[int]] = None,
    test_count: Optional[int] = None,
    shots: Optional[int] = None,
) -> DatasetSummary:
    """
    Generate and store train/validation/test splits.

    ``count`` states from the training stream are split 4:1 into train and
    validation; ``test_count`` states (default: scaled from the reference
    test/train ratio) come from an independent stream. Output is a pure
    function of the arguments.

    Raises:
        InvalidInputError: On negative counts or unsupported register sizes.
        DatasetIOError: If a split file cannot be written.
    """
    frame = universal_frame(spec.n_qubits)
    sizes = tuple(sizes) if sizes is not None else default_sizes(spec.n_qubits)
    test_count = scaled_test_size(spec.n_qubits, count) if test_count is None else test_count
    if count < 0 or test_count < 0 or count + test_count == 0:
        raise InvalidInputError("At least one state must be generated")
    if shots is not None and shots < 1:
        raise InvalidInputError("shots must be at least 1")

    chain = nested_chain(frame, sizes, sample_rng(spec.seed, STREAM_CHAIN, 0))
    assignment = _split_assignment(spec, count)

    train_like = await gather_in_threads(
        lambda i: make_record(spec, i, count, STREAM_TRAIN, assignment[i], frame, chain, shots),
        range(count),
    )
    test = await gather_in_threads(
        lambda i: make_record(spec, i, test_count, STREAM_TEST, "test", frame, chain, None),
        range(test_count),
    )

    by_split: Dict[str, List[DatasetRecord]] = {
        "train": [r for r in train_like if r.split == "train"],
        "validation": [r for r in train_like if r.split == "validation"],
        "test": list(test),
    }

    files = {}
    for split, records in by_split.items():
        header: DatasetHeader = {
            "format": DATASET_FORMAT,
            "version": DATASET_FORMAT_VERSION,
            "split": split,
            "spec": spec.to_text(),
            "n_qubits": spec.n_qubits,
            "chain": chain.to_dict(),
            "shots": shots if split != "test" else None,
            "count": len(records),
        }
        path = split_path(out_dir, split)
        write_split(path, header, records)
        files[split] = str(path)

    kinds: Dict[str, int] = {}
    for record in train_like:
        kinds[record.kind] = kinds.get(record.kind, 0) + 1

    logger.info(
        f"✅ Dataset written to {out_dir}",
        extra={"counts": {k: len(v) for k, v in by_split.items()}, "kinds": kinds},
    )
    return {
        "out_dir": str(out_dir),
        "counts": {k: len(v) for k, v in by_split.items()},
        "kinds": kinds,
        "files": files,
    }


def simulate_experiment(
    rho: Union[DensityMatrix, np.ndarray],
    frame: ProjectorFrame,
    shots: int,
    rng: np.random.Generator,
    multinomial: bool = False,
) -> Tuple[Tuple[int, ...], np.ndarray]:
    """
    Coincidence counts for every frame projector.

    Args:
        rho: State to measure.
        frame: Projector frame; every projector gets a row.
        shots: Shots per projector, or per measurement setting with ``multinomial``.
        rng: Generator for the draws.
        multinomial: Draw one multinomial per measurement setting, so the counts
            of a setting's outcomes sum to ``shots``. Otherwise each projector
            gets an independent binomial.

    Returns:
        Tuple (frame indices, counts).
    """
    subset = tuple(range(len(frame)))
    if multinomial:
        return subset, simulate_setting_counts(rho, frame, subset, shots, rng)
    record = simulate_record(rho, frame, subset, shots, rng)
    return subset, np.rint(np.asarray(record.values) * shots).astype(int)


def export_counts(
    path: Union[str, Path],
    indices: Sequence[Union[int, str]],
    counts: Sequence[int],
    shots: Union[int, Sequence[int]],
) -> None:
    """
    Write a counts file with columns (projector_id, counts, shots).

    Raises:
        DatasetIOError: If the file cannot be written.
    """
    shots_column = [shots] * len(indices) if isinstance(shots, (int, np.integer)) else list(shots)
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", encoding="utf-8") as fh:
            fh.write(",".join(COUNTS_COLUMNS) + "\n")
            for index, k, n in zip(indices, counts, shots_column):
                ident = index if isinstance(index, str) else int(index)
                fh.write(f"{ident},{int(k)},{int(n)}\n")
    except OSError as e:
        raise DatasetIOError(f"Cannot write {path}: {e}")


def _parse_projector_id(token: str, frame: ProjectorFrame, line: int) -> int:
    try:
        index = int(token)
    except ValueError:
        try:
            return frame.index_of(token)
        except InvalidInputError as e:
            raise CountsParseError(str(e), line)
    if not 0 <= index < len(frame):
        raise CountsParseError(f"projector_id {index} is outside the {len(frame)}-atom frame", line)
    return index


def import_counts(path: Union[str, Path], n_qubits: int = 2) -> MeasurementRecord:
    """
    Read delimited (projector_id, counts, shots) rows into a measurement record.

    Ids are frame indices or labels such as 'Z+X-'. Comma, semicolon, tab and
    space delimiters are accepted; '#' starts a comment; an optional header
    row is skipped. Rows are sorted into frame order. When every row has the
    same shot count the record carries it; otherwise the record is marked
    exact and a warning is logged.

    Raises:
        DatasetIOError: If the file cannot be read.
        CountsParseError: On malformed rows, unknown or duplicate ids (with line numbers).
    """
    frame = universal_frame(n_qubits)
    path = Path(path)
    try:
        lines = path.read_text(encoding="utf-8").splitlines()
    except OSError as e:
        raise DatasetIOError(f"Cannot read {path}: {e}")

    rows: Dict[int, Tuple[int, int]] = {}
    seen_data = False
    for number, raw in enumerate(lines, start=1):
        text = raw.split("#", 1)[0].strip()
        if not text:
            continue
        fields = [f for f in re.split(r"[,;\s]+", text) if f]
        if not seen_data and fields and fields[0].lower() == COUNTS_COLUMNS[0]:
            continue
        seen_data = True

        if len(fields) != 3:
            raise CountsParseError(f"expected 3 columns {COUNTS_COLUMNS}, got {len(fields)}", number)
        index = _parse_projector_id(fields[0], frame, number)
        try:
            k, n = int(fields[1]), int(fields[2])
        except ValueError:
            raise CountsParseError("counts and shots must be integers", number)
        if n < 1 or not 0 <= k <= n:
            raise CountsParseError(f"need 0 <= counts <= shots and shots >= 1, got {k}/{n}", number)
        if index in rows:
            raise CountsParseError(f"duplicate projector_id {fields[0]}", number)
        rows[index] = (k, n)

    if not rows:
        raise CountsParseError(f"{path} contains no data rows")

    indices = tuple(sorted(rows))
    values = np.array([rows[i][0] / rows[i][1] for i in indices])
    shot_values = {rows[i][1] for i in indices}
    shots = shot_values.pop() if len(shot_values) == 1 else None
    if shots is None:
        logger.warning(f"{path}: rows have different shot counts; record marked as exact frequencies")

    logger.info(f"Imported {len(indices)} projectors from {path}")
    return MeasurementRecord(indices, values, shots)
