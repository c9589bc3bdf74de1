import logging
import os
from pathlib import Path

from dotenv import load_dotenv

"""
Configuration settings for EQPBench.

This module loads environment variables, defines the numerical tolerances and
algorithm defaults used by every stage of the pipeline (state generation,
measurement simulation, quasiprobability solving, tomography baselines,
network training, and benchmark sweeps), and validates them at startup.
Every value can be overridden through an ``EQP_*`` environment variable or a
``.env`` file in the project root.
"""

load_dotenv()

logger = logging.getLogger("eqpbench.config")


def _env_float(name: str, default: float) -> float:
    raw = os.getenv(name)
    if raw is None or raw == "":
        return default
    try:
        return float(raw)
    except (ValueError, TypeError):
        raise ValueError(f"❌ {name} must be a number, got {raw!r}")


def _env_int(name: str, default: int) -> int:
    raw = os.getenv(name)
    if raw is None or raw == "":
        return default
    try:
        return int(raw)
    except (ValueError, TypeError):
        raise ValueError(f"❌ {name} must be an integer, got {raw!r}")


def _env_int_list(name: str, default: tuple) -> tuple:
    raw = os.getenv(name)
    if raw is None or raw.strip() == "":
        return default
    try:
        return tuple(int(part) for part in raw.replace(";", ",").split(",") if part.strip())
    except (ValueError, TypeError):
        raise ValueError(
            f"❌ {name} must be a comma-separated list of integers, got {raw!r}"
        )


# Data Storage
DATA_DIR = Path(os.getenv("EQP_DATA_DIR", "data"))
RESULTS_DB_PATH = Path(os.getenv("EQP_RESULTS_DB", str(DATA_DIR / "results.db")))
DB_RETRY_ATTEMPTS = _env_int("EQP_DB_RETRY_ATTEMPTS", 3)
DB_RETRY_BASE_DELAY = 0.2
DB_RETRY_MAX_DELAY = 2.0

# Logging Configuration
LOG_LEVEL = os.getenv("LOG_LEVEL", "INFO")
LOG_FILE = os.getenv("EQP_LOG_FILE", "eqpbench.log")

# Density-matrix tolerances
HERMITIAN_TOL = _env_float("EQP_HERMITIAN_TOL", 1e-10)
TRACE_TOL = _env_float("EQP_TRACE_TOL", 1e-10)
PSD_TOL = _env_float("EQP_PSD_TOL", 1e-9)
NORM_TOL = _env_float("EQP_NORM_TOL", 1e-12)
EIG_HERMITIAN_TOL = _env_float("EQP_EIG_HERMITIAN_TOL", 1e-8)

# Reconstruction flags
RECONSTRUCT_TRACE_TOL = 1e-8  # Renormalize (and flag) beyond this trace error
RECONSTRUCT_CLIP_TOL = 1e-6  # Flag eigenvalue clipping beyond this negativity
PROBABILITY_FLOOR = 1e-12

# Ensembles
WERNER_MU = _env_float("EQP_WERNER_MU", 0.5)
WERNER_SIGMA = _env_float("EQP_WERNER_SIGMA", 0.25)
WERNER_EPS = _env_float("EQP_WERNER_EPS", 1e-3)
WERNER_MAX_REJECTIONS = 100_000
HAAR_NOISE_MIN = _env_float("EQP_HAAR_NOISE_MIN", 0.0)
HAAR_NOISE_MAX = _env_float("EQP_HAAR_NOISE_MAX", 0.5)
BURES_FRACTION = _env_float("EQP_BURES_FRACTION", 0.8)
PAULI_GRID_RESOLUTION = _env_int("EQP_PAULI_GRID_RESOLUTION", 21)

# Measurement sweeps
SUPPORTED_QUBITS = (2, 3)
TWO_QUBIT_SWEEP_SIZES = _env_int_list("EQP_SWEEP_SIZES_2Q", tuple(range(2, 37, 2)))
THREE_QUBIT_SWEEP_SIZES = _env_int_list(
    "EQP_SWEEP_SIZES_3Q", (30, 60, 90, 120, 150, 180, 216)
)

# Stationary-point search
STATIONARY_RESTARTS = {2: 200, 3: 1000}
STATIONARY_MAX_ITER = _env_int("EQP_STATIONARY_MAX_ITER", 500)
STATIONARY_CONV_TOL = _env_float("EQP_STATIONARY_CONV_TOL", 1e-10)
STATIONARY_DEDUP_TOL = _env_float("EQP_STATIONARY_DEDUP_TOL", 1e-8)
STATIONARY_BRANCH_CAP = _env_int("EQP_STATIONARY_BRANCH_CAP", 64)
GRAM_RCOND = 1e-10  # Singular values below sigma_max * GRAM_RCOND are discarded

# Certification
FEASIBILITY_TOL = _env_float("EQP_FEASIBILITY_TOL", 1e-6)
SHOT_TOL_SCALE = 3.0  # feas_tol = SHOT_TOL_SCALE / sqrt(shots) for finite shots
CERTIFY_REFINE_ROUNDS = _env_int("EQP_CERTIFY_REFINE_ROUNDS", 200)
CERTIFY_DIRECTION_RESTARTS = _env_int("EQP_CERTIFY_DIRECTION_RESTARTS", 12)
NNLS_MAX_ITER = _env_int("EQP_NNLS_MAX_ITER", 5000)

# Tomography baselines
MAXLIK_DILUTION = _env_float("EQP_MAXLIK_DILUTION", 0.01)
MLME_ENTROPY_WEIGHT = _env_float("EQP_MLME_ENTROPY_WEIGHT", 1e-3)
MLME_STEP = _env_float("EQP_MLME_STEP", 0.1)
TOMO_MAX_ITER = _env_int("EQP_TOMO_MAX_ITER", 5000)
TOMO_CONV_TOL = _env_float("EQP_TOMO_CONV_TOL", 1e-10)
TOMO_MAX_HALVINGS = 30

# Network architecture (per qubit count)
NETWORK_WIDTH = {2: 512, 3: 1024}
NETWORK_BLOCKS = {2: 4, 3: 6}
NETWORK_ACTIVATION = os.getenv("EQP_NETWORK_ACTIVATION", "softplus")

# Optimizer / training
LEARNING_RATE = _env_float("EQP_LEARNING_RATE", 1e-3)
ADAM_BETAS = (0.9, 0.999)
ADAM_EPS = 1e-8
BATCH_SIZE = _env_int("EQP_BATCH_SIZE", 256)
EPOCHS = _env_int("EQP_EPOCHS", 200)
EARLY_STOP_PATIENCE = _env_int("EQP_EARLY_STOP_PATIENCE", 20)
SIGN_WEIGHT = _env_float("EQP_SIGN_WEIGHT", 2.0)
TRAIN_VALIDATION_RATIO = (4, 1)

# Dataset sizes
REFERENCE_TRAIN_STATES = {2: 305_000, 3: 94_000}
REFERENCE_TEST_STATES = {2: 5_000, 3: 4_000}

# Sweep execution
FAILURE_BUDGET = _env_float("EQP_FAILURE_BUDGET", 0.01)
MAX_CONCURRENT_WORKERS = _env_int("EQP_MAX_WORKERS", 4)


def scaled_test_size(n_qubits: int, train_states: int) -> int:
    """
    Test-set size scaled from the reference test/train ratio to a given training size.

    Args:
        n_qubits: Number of qubits (2 or 3).
        train_states: Number of states generated for training + validation.

    Returns:
        Test-set size, at least one state.
    """
    ratio = REFERENCE_TEST_STATES[n_qubits] / REFERENCE_TRAIN_STATES[n_qubits]
    return max(1, round(train_states * ratio))


def validate_settings():
    """
    Validate all configuration settings to catch errors at startup.

    Raises:
        ValueError: If any configuration value is out of range (e.g., negative
            tolerances, non-increasing sweep sizes, an empty noise interval).
    """
    for name, value in (
        ("EQP_HERMITIAN_TOL", HERMITIAN_TOL),
        ("EQP_TRACE_TOL", TRACE_TOL),
        ("EQP_PSD_TOL", PSD_TOL),
        ("EQP_NORM_TOL", NORM_TOL),
        ("EQP_STATIONARY_CONV_TOL", STATIONARY_CONV_TOL),
        ("EQP_STATIONARY_DEDUP_TOL", STATIONARY_DEDUP_TOL),
        ("EQP_FEASIBILITY_TOL", FEASIBILITY_TOL),
        ("EQP_TOMO_CONV_TOL", TOMO_CONV_TOL),
    ):
        if value <= 0:
            raise ValueError(f"{name} must be positive")

    # Ensembles
    if not 0.0 < WERNER_EPS < 1.0:
        raise ValueError("EQP_WERNER_EPS must lie in (0, 1)")

    if WERNER_SIGMA <= 0:
        raise ValueError("EQP_WERNER_SIGMA must be positive")

    if not 0.0 <= HAAR_NOISE_MIN <= HAAR_NOISE_MAX <= 1.0:
        raise ValueError("Haar noise interval must satisfy 0 <= min <= max <= 1")

    if not 0.0 <= BURES_FRACTION <= 1.0:
        raise ValueError("EQP_BURES_FRACTION must lie in [0, 1]")

    if PAULI_GRID_RESOLUTION < 2:
        raise ValueError("EQP_PAULI_GRID_RESOLUTION must be at least 2")

    # Sweeps
    for name, sizes, full in (
        ("EQP_SWEEP_SIZES_2Q", TWO_QUBIT_SWEEP_SIZES, 36),
        ("EQP_SWEEP_SIZES_3Q", THREE_QUBIT_SWEEP_SIZES, 216),
    ):
        if not sizes or any(b <= a for a, b in zip(sizes, sizes[1:])):
            raise ValueError(f"{name} must be strictly increasing")
        if sizes[0] < 1 or sizes[-1] > full:
            raise ValueError(f"{name} must lie within 1..{full}")

    # Stationary search
    if STATIONARY_MAX_ITER < 1:
        raise ValueError("EQP_STATIONARY_MAX_ITER must be at least 1")

    if STATIONARY_BRANCH_CAP < 1:
        raise ValueError("EQP_STATIONARY_BRANCH_CAP must be at least 1")

    # Tomography
    if not 0.0 <= MAXLIK_DILUTION <= 1.0:
        raise ValueError("EQP_MAXLIK_DILUTION must lie in [0, 1]")

    if MLME_ENTROPY_WEIGHT < 0:
        raise ValueError("EQP_MLME_ENTROPY_WEIGHT must be non-negative")

    if MLME_STEP <= 0:
        raise ValueError("EQP_MLME_STEP must be positive")

    if TOMO_MAX_ITER < 1:
        raise ValueError("EQP_TOMO_MAX_ITER must be at least 1")

    # Training
    if NETWORK_ACTIVATION not in ("softplus", "silu"):
        raise ValueError("EQP_NETWORK_ACTIVATION must be 'softplus' or 'silu'")

    if LEARNING_RATE <= 0:
        raise ValueError("EQP_LEARNING_RATE must be positive")

    if BATCH_SIZE < 1:
        raise ValueError("EQP_BATCH_SIZE must be at least 1")

    if EARLY_STOP_PATIENCE < 1:
        raise ValueError("EQP_EARLY_STOP_PATIENCE must be at least 1")

    # Execution
    if not 0.0 <= FAILURE_BUDGET < 1.0:
        raise ValueError("EQP_FAILURE_BUDGET must lie in [0, 1)")

    if MAX_CONCURRENT_WORKERS < 1:
        raise ValueError("EQP_MAX_WORKERS must be at least 1")

    if DB_RETRY_ATTEMPTS < 1:
        raise ValueError("EQP_DB_RETRY_ATTEMPTS must be at least 1")

    logger.info("✅ Configuration validation completed successfully")

