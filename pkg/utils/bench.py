"""
Measurement-budget sweeps and their statistics.

A sweep reconstructs every test record from each subset of a nested chain,
scores the reconstruction against the record's stored canonical EQP (or its
Pauli expectations), and aggregates per subset size. Records are processed
in worker threads; aggregation walks results in record order so the numbers
never depend on scheduling.
"""

import logging
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.stats import linregress

from config.settings import FAILURE_BUDGET, MAX_CONCURRENT_WORKERS
from utils.constants import ERROR_EMPTY_DATASET, ERROR_FRAME_MISMATCH, ERROR_MODEL_REQUIRED
from utils.dataset import DatasetRecord
from utils.ensembles import STREAM_SWEEP, sample_rng
from utils.eqp import canonical_qp
from utils.errors import InvalidInputError, NumericalFailureError
from utils.failure_budget import FailureBudget
from utils.measurement import MeasurementRecord, ProjectorFrame, SubsetChain, simulate_counts
from utils.neuralnet import ResidualModel, predict_eqp
from utils.parallel import gather_in_threads
from utils.qcore import DensityMatrix, density_from_pure, fidelity, pauli_expectations, purity
from utils.tomography import TomoOptions, maxlik, mlme

logger = logging.getLogger("eqpbench.bench")

SWEEP_METHODS = ("net", "maxlik", "mlme", "oracle")
SWEEP_METRICS = ("eqp", "pauli")


def rmse(x: Sequence[float], y: Sequence[float]) -> float:
    """
    Root-mean-square difference of two equal-length vectors.

    Raises:
        InvalidInputError: On empty or mismatched inputs.
    """
    x = np.asarray(x, dtype=float).reshape(-1)
    y = np.asarray(y, dtype=float).reshape(-1)
    if x.shape != y.shape:
        raise InvalidInputError(f"Vectors have different lengths ({x.size} and {y.size})")
    if x.size == 0:
        raise InvalidInputError("RMSE needs at least one component")
    return float(np.sqrt(np.mean((x - y) ** 2)))


@dataclass(frozen=True)
class TrendFit:
    """Least-squares line through (size, mean RMSE)."""

    slope: float
    intercept: float
    r2: float


def trend_fit(sizes: Sequence[float], values: Sequence[float]) -> TrendFit:
    """
    Ordinary least-squares fit ``values ~ slope * sizes + intercept``.

    A perfectly flat profile has R^2 = 0.

    Raises:
        InvalidInputError: With fewer than two distinct sizes.
    """
    x = np.asarray(sizes, dtype=float)
    y = np.asarray(values, dtype=float)
    if x.shape != y.shape:
        raise InvalidInputError("sizes and values must have equal length")
    if np.unique(x).size < 2:
        raise InvalidInputError("A trend needs at least two distinct sizes")
    fit = linregress(x, y)
    return TrendFit(float(fit.slope), float(fit.intercept), float(fit.rvalue**2))


def coefficient_of_variation(values: Sequence[float]) -> float:
    """
    Population standard deviation over mean.

    Raises:
        InvalidInputError: If ``values`` is empty or has zero mean.
    """
    arr = np.asarray(values, dtype=float)
    if arr.size == 0:
        raise InvalidInputError("Coefficient of variation needs at least one value")
    mean = float(np.mean(arr))
    if mean == 0.0:
        raise InvalidInputError("Coefficient of variation is undefined for a zero mean")
    return float(np.std(arr) / mean)


@dataclass(frozen=True)
class RecordOutcome:
    """
    Score of one reconstruction.

    Attributes:
        record_id: Test record id.
        size: Subset size it was reconstructed from.
        rmse: Metric RMSE against the stored ground truth.
        fidelity: Fidelity of the reconstruction to the record's reference state.
        purity: Purity of the reconstruction.
        converged: Iterative estimator convergence flag (always True for net/oracle).
    """

    record_id: int
    size: int
    rmse: float
    fidelity: float
    purity: float
    converged: bool


@dataclass(frozen=True, eq=False)
class SweepResult:
    """
    Per-size aggregates of a sweep.

    ``mean``/``std`` are None for a size where every reconstruction failed
    (only possible with a budget of at least one failure).
    """

    method: str
    metric: str
    n_qubits: int
    shots: Optional[int]
    sizes: Tuple[int, ...]
    mean: Tuple[Optional[float], ...]
    std: Tuple[Optional[float], ...]
    count: Tuple[int, ...]
    failures: Tuple[int, ...]
    trend: TrendFit
    outcomes: Tuple[RecordOutcome, ...]

    def _means(self) -> np.ndarray:
        return np.array([m for m in self.mean if m is not None], dtype=float)

    @property
    def overall_mean(self) -> Optional[float]:
        means = self._means()
        return float(np.mean(means)) if means.size else None

    @property
    def std_over_sizes(self) -> Optional[float]:
        means = self._means()
        return float(np.std(means)) if means.size else None

    @property
    def cov(self) -> Optional[float]:
        means = self._means()
        if not means.size or float(np.mean(means)) == 0.0:
            return None
        return coefficient_of_variation(means)

    def rows(self) -> List[dict]:
        """One dict per size, keyed like the sweep CSV."""
        return [
            {
                "method": self.method,
                "metric": self.metric,
                "size": size,
                "mean_rmse": mean,
                "std_rmse": std,
                "count": count,
                "failures": failures,
            }
            for size, mean, std, count, failures in zip(
                self.sizes, self.mean, self.std, self.count, self.failures
            )
        ]

    def record_rows(self) -> List[dict]:
        """Per-record dump, in (size, record id) order."""
        return [
            {
                "record_id": o.record_id,
                "size": o.size,
                "rmse": o.rmse,
                "fidelity": o.fidelity,
                "purity": o.purity,
                "converged": o.converged,
            }
            for o in self.outcomes
        ]


@dataclass(frozen=True)
class DownstreamRow:
    """Fidelity/purity RMSE of one method at one subset size."""

    method: str
    size: int
    fidelity_rmse: float
    purity_rmse: float
    count: int


def cut_measurement(
    record: DatasetRecord,
    subset: Sequence[int],
    shots: Optional[int] = None,
    rng: Optional[np.random.Generator] = None,
) -> MeasurementRecord:
    """
    Values of ``subset`` taken from a full-frame record, with optional binomial shot noise.

    Raises:
        InvalidInputError: If the record does not cover the subset.
    """
    position = {index: i for i, index in enumerate(record.measurement.indices)}
    missing = [i for i in subset if i not in position]
    if missing:
        raise InvalidInputError(f"Record {record.record_id} does not cover projectors {missing[:5]}")
    values = record.measurement.values[[position[i] for i in subset]]
    if shots is None:
        return MeasurementRecord(tuple(subset), values, None)
    return simulate_counts(values, shots, rng, subset)


def _estimate(
    method: str,
    record: DatasetRecord,
    measurement: MeasurementRecord,
    frame: ProjectorFrame,
    model: Optional[ResidualModel],
    options: TomoOptions,
) -> Tuple[DensityMatrix, bool]:
    if method == "net":
        return predict_eqp(model, measurement, frame).density, True
    if method == "maxlik":
        result = maxlik(measurement, frame, options)
        return result.density, result.converged
    if method == "mlme":
        result = mlme(measurement, frame, options)
        return result.density, result.converged
    return record.density, True


def score(estimate: DensityMatrix, record: DatasetRecord, frame: ProjectorFrame, metric: str) -> float:
    """Metric RMSE of an estimate against a record's ground truth."""
    if metric == "pauli":
        return rmse(pauli_expectations(estimate), pauli_expectations(record.density))
    return rmse(canonical_qp(estimate, frame), record.target)


def evaluate_record(
    method: str,
    record: DatasetRecord,
    subset: Sequence[int],
    frame: ProjectorFrame,
    model: Optional[ResidualModel] = None,
    options: TomoOptions = TomoOptions(),
    shots: Optional[int] = None,
    seed: int = 0,
    metric: str = "eqp",
) -> RecordOutcome:
    """
    Reconstruct one record from one subset and score it.

    Shot noise for (record, size) comes from its own substream so the outcome
    does not depend on which other records are evaluated.

    Raises:
        NumericalFailureError: If the metric is not finite.
    """
    rng = sample_rng(seed, STREAM_SWEEP, record.record_id, len(subset)) if shots is not None else None
    measurement = cut_measurement(record, subset, shots, rng)
    estimate, converged = _estimate(method, record, measurement, frame, model, options)

    value = score(estimate, record, frame, metric)
    if not np.isfinite(value):
        raise NumericalFailureError(f"Non-finite {metric} RMSE for record {record.record_id}")
    return RecordOutcome(
        record_id=record.record_id,
        size=len(subset),
        rmse=value,
        fidelity=fidelity(estimate, density_from_pure(record.reference)),
        purity=purity(estimate),
        converged=converged,
    )


def _check_sweep_inputs(
    method: str,
    metric: str,
    chain: SubsetChain,
    records: Sequence[DatasetRecord],
    frame: ProjectorFrame,
    model: Optional[ResidualModel],
) -> None:
    if method not in SWEEP_METHODS:
        raise InvalidInputError(f"Unknown method {method!r}; expected one of {SWEEP_METHODS}")
    if metric not in SWEEP_METRICS:
        raise InvalidInputError(f"Unknown metric {metric!r}; expected one of {SWEEP_METRICS}")
    if not records:
        raise InvalidInputError(ERROR_EMPTY_DATASET)
    if chain.frame_size != len(frame) or chain.n_qubits != frame.n_qubits:
        raise InvalidInputError("Subset chain was drawn for a different frame")
    if method == "net":
        if model is None:
            raise InvalidInputError(ERROR_MODEL_REQUIRED)
        if model.config.input_dim != 2 * len(frame) or model.config.output_dim != len(frame):
            raise InvalidInputError(ERROR_FRAME_MISMATCH)


async def run_sweep(
    method: str,
    chain: SubsetChain,
    records: Sequence[DatasetRecord],
    frame: ProjectorFrame,
    model: Optional[ResidualModel] = None,
    options: Optional[TomoOptions] = None,
    shots: Optional[int] = None,
    seed: int = 0,
    metric: str = "eqp",
    budget: float = FAILURE_BUDGET,
    sizes: Optional[Sequence[int]] = None,
    limit: int = MAX_CONCURRENT_WORKERS,
) -> SweepResult:
    """
    Reconstruct every record at every chain size and aggregate the RMSE.

    Args:
        method: 'net', 'maxlik', 'mlme', or 'oracle' (the stored state itself).
        chain: Nested subsets to sweep.
        records: Full-frame test records.
        frame: Measurement frame.
        model: Trained network (required for 'net').
        options: Tomography iteration controls.
        shots: Finite shot budget per projector; None uses exact values.
        seed: Root seed for shot noise.
        metric: 'eqp' (canonical EQP RMSE) or 'pauli' (Pauli-expectation RMSE).
        budget: Tolerated failure fraction per size.
        sizes: Restrict the sweep to these chain sizes.
        limit: Concurrent worker threads.

    Raises:
        InvalidInputError: On unknown methods, missing models or mismatched frames.
        FailureBudgetExceededError: If failures at any size exceed ``budget``.
    """
    _check_sweep_inputs(method, metric, chain, records, frame, model)
    options = options or TomoOptions()
    if sizes is None:
        positions = list(range(len(chain)))
    else:
        unknown = [s for s in sizes if s not in chain.sizes]
        if unknown:
            raise InvalidInputError(f"Sizes {unknown} are not in the chain {list(chain.sizes)}")
        positions = sorted(chain.sizes.index(s) for s in sizes)

    logger.info(
        f"Sweeping {method} over {len(positions)} sizes and {len(records)} records",
        extra={"metric": metric, "shots": shots},
    )

    swept_sizes, means, stds, counts, failures = [], [], [], [], []
    outcomes: List[RecordOutcome] = []
    for k in positions:
        subset = chain.subset(k)
        failure_budget = FailureBudget(budget, name=f"{method}@{len(subset)}")
        results = await gather_in_threads(
            lambda record: evaluate_record(method, record, subset, frame, model, options, shots, seed, metric),
            records,
            limit=limit,
            wrap=failure_budget.call,
        )
        failure_budget.check()

        done = [r for r in results if r is not None]
        values = np.array([r.rmse for r in done], dtype=float)
        swept_sizes.append(len(subset))
        means.append(float(np.mean(values)) if values.size else None)
        stds.append(float(np.std(values)) if values.size else None)
        counts.append(len(done))
        failures.append(failure_budget.failure_count)
        outcomes.extend(done)

        logger.debug(f"{method} size {len(subset)}: mean RMSE {means[-1]}", extra={"failures": failures[-1]})

    fitted = [(s, m) for s, m in zip(swept_sizes, means) if m is not None]
    if len({s for s, _ in fitted}) >= 2:
        trend = trend_fit([s for s, _ in fitted], [m for _, m in fitted])
    else:
        trend = TrendFit(float("nan"), float("nan"), float("nan"))

    return SweepResult(
        method=method,
        metric=metric,
        n_qubits=frame.n_qubits,
        shots=shots,
        sizes=tuple(swept_sizes),
        mean=tuple(means),
        std=tuple(stds),
        count=tuple(counts),
        failures=tuple(failures),
        trend=trend,
        outcomes=tuple(outcomes),
    )


def eval_downstream(result: SweepResult, records: Sequence[DatasetRecord]) -> List[DownstreamRow]:
    """
    Per-size RMSE of reconstructed fidelity and purity against the record labels.

    Fidelity is measured against each record's reference state, the same
    reference its ``fidelity`` label was computed with.
    """
    labels: Dict[int, DatasetRecord] = {r.record_id: r for r in records}
    rows = []
    for size in result.sizes:
        at_size = [o for o in result.outcomes if o.size == size and o.record_id in labels]
        if not at_size:
            continue
        rows.append(
            DownstreamRow(
                method=result.method,
                size=size,
                fidelity_rmse=rmse([o.fidelity for o in at_size], [labels[o.record_id].labels.fidelity for o in at_size]),
                purity_rmse=rmse([o.purity for o in at_size], [labels[o.record_id].labels.purity for o in at_size]),
                count=len(at_size),
            )
        )
    return rows
