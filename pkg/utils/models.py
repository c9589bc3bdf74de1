"""
Type definitions for persisted and reported structures (dataset headers,
result-store rows, CLI reports) to keep JSON and SQLite payloads strictly typed.
"""

from typing import Dict, List, Optional, TypedDict


class DatasetHeader(TypedDict):
    """
    First line of every dataset split file.

    Attributes:
        format: Always ``DATASET_FORMAT``.
        version: ``DATASET_FORMAT_VERSION``.
        split: 'train', 'validation' or 'test'.
        spec: ``EnsembleSpec.to_text()`` of the generating spec.
        n_qubits: Register size.
        chain: Serialized ``SubsetChain`` shared by all splits.
        shots: Shots per projector, or None for exact probabilities.
        count: Number of records that follow.
    """

    format: str
    version: int
    split: str
    spec: str
    n_qubits: int
    chain: Dict[str, List[int]]
    shots: Optional[int]
    count: int


class DatasetSummary(TypedDict):
    """Outcome of ``build_dataset``."""

    out_dir: str
    counts: Dict[str, int]
    kinds: Dict[str, int]
    files: Dict[str, str]


class SweepRunEntry(TypedDict):
    """Row of the ``sweep_runs`` table."""

    run_id: int
    dataset: str
    method: str
    metric: str
    n_qubits: int
    shots: Optional[int]
    slope: Optional[float]
    intercept: Optional[float]
    r2: Optional[float]
    cov: Optional[float]
    mean_rmse: Optional[float]
    created_at: float


class SweepRowEntry(TypedDict):
    """Row of the ``sweep_rows`` table."""

    run_id: int
    size: int
    mean_rmse: Optional[float]
    std_rmse: Optional[float]
    count: int
    failures: int


class CertificationSummary(TypedDict):
    """Report printed by the ``certify`` command."""

    verdict: str
    residual_norm: float
    feas_tol: float
    witness: Optional[float]
    rounds: int
    dictionary_size: int
    eqp_negativity: float
    eqp_residual: float
    ppt_min_eigenvalues: List[float]
    ppt_verdict: str


class TrainingReport(TypedDict):
    """Summary written next to a trained model."""

    records: int
    epochs_run: int
    best_epoch: int
    best_val_rmse: float
    stopped_early: bool
