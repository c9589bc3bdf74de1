"""
This module contains static constant definitions used throughout the application,
including:
- File format tags and versions (datasets, models, counts files)
- Single-qubit measurement basis ordering
- CLI exit codes
- User-facing messages (errors, status updates)
"""

import re

# File Formats
DATASET_FORMAT = "eqpbench-dataset"
DATASET_FORMAT_VERSION = 1
MODEL_FORMAT = "eqpbench-model"
MODEL_FORMAT_VERSION = 1
DATASET_SPLITS = ("train", "validation", "test")
DATASET_SUFFIX = ".jsonl"
COUNTS_COLUMNS = ("projector_id", "counts", "shots")

# Measurement bases
# Per-qubit ordering of the universal frame: eigenstates of Z, X, Y in that order.
BASIS_LABELS = ("Z+", "Z-", "X+", "X-", "Y+", "Y-")
PAULI_AXES = ("I", "X", "Y", "Z")

# Sweep / table columns
SWEEP_CSV_COLUMNS = ("method", "metric", "size", "mean_rmse", "std_rmse", "count", "failures")
DOWNSTREAM_CSV_COLUMNS = ("method", "size", "fidelity_rmse", "purity_rmse", "count")
RECORD_DUMP_COLUMNS = ("record_id", "size", "rmse", "fidelity", "purity", "converged")
REPORT_COLUMNS = ("method", "metric", "mean_rmse", "std_over_sizes", "cov", "slope", "intercept", "r2")

# CLI Exit Codes
EXIT_SUCCESS = 0
EXIT_USAGE = 1
EXIT_NUMERICAL = 2
EXIT_IO = 3

# Error Messages
ERROR_UNSUPPORTED_QUBITS = "Only 2- and 3-qubit registers are supported."
ERROR_MODEL_REQUIRED = "The 'net' method needs a trained model (--model)."
ERROR_FRAME_MISMATCH = "Model dimensions do not match the measurement frame."
ERROR_EMPTY_DATASET = "Dataset contains no records."

# Info Messages
INFO_GENERATING = "⏳ Generating states..."
INFO_TRAINING = "🧠 Training residual network..."
INFO_SWEEPING = "📈 Running measurement-budget sweep..."

# State selectors accepted by `eqp` and `certify` (after lower-casing)
STATE_SELECTOR_PATTERN = re.compile(
    r"^(?P<name>phi\+|phi-|psi\+|psi-|werner|bures|pauli|product|ghz|mixed)(?::(?P<arg>.+))?$"
)
