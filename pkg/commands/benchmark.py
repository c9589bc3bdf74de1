"""
Benchmark commands.

- sweep: Measurement-budget sweep of one method over a dataset's test split.
- report: Comparison table of the latest stored sweep of every method.
"""

import logging
from argparse import Namespace
from pathlib import Path

import numpy as np

from utils.bench import SWEEP_METHODS, SWEEP_METRICS, run_sweep
from utils.constants import INFO_SWEEPING, RECORD_DUMP_COLUMNS, REPORT_COLUMNS, SWEEP_CSV_COLUMNS
from utils.dataset import load_dataset
from utils.database import get_database
from utils.decorators import log_command_usage, timed
from utils.helpers import format_key_values, format_table, write_csv, write_text
from utils.measurement import universal_frame
from utils.neuralnet import load_model
from utils.tomography import TomoOptions
from utils.validators import require_valid, validate_shots, validate_sizes

logger = logging.getLogger("eqpbench.commands.benchmark")


def dataset_key(directory: str) -> str:
    """Results-store key of a dataset directory."""
    return str(Path(directory).resolve())


@log_command_usage
@timed
async def handle_sweep(args: Namespace) -> int:
    """Run a sweep, write its CSV, and record it in the results store."""
    require_valid(validate_shots(args.shots))
    test = load_dataset(args.dataset, "test")
    frame = universal_frame(test.n_qubits)
    sizes = require_valid(validate_sizes(args.sizes, len(frame)))
    model = load_model(args.model) if args.model else None
    options = TomoOptions(max_iter=args.max_iter) if args.max_iter else TomoOptions()

    print(INFO_SWEEPING)
    result = await run_sweep(
        args.method,
        test.chain,
        test.records,
        frame,
        model=model,
        options=options,
        shots=args.shots,
        seed=args.seed,
        metric=args.metric,
        sizes=sizes,
    )

    write_csv(args.out, SWEEP_CSV_COLUMNS, result.rows())
    if args.dump:
        write_csv(args.dump, RECORD_DUMP_COLUMNS, result.record_rows())

    print(format_table(SWEEP_CSV_COLUMNS, result.rows(), title=f"{args.method} / {args.metric}"))
    print(format_key_values({
        "mean RMSE": result.overall_mean,
        "coefficient of variation": result.cov,
        "slope": result.trend.slope,
        "intercept": result.trend.intercept,
        "R^2": result.trend.r2,
    }))

    if not args.no_store:
        db = await get_database()
        run_id = await db.save_sweep(dataset_key(args.dataset), result)
        if run_id is None:
            logger.warning("Sweep finished but could not be stored in the results database")
        else:
            logger.info(f"Stored sweep as run {run_id}")
    return 0


@log_command_usage
async def handle_report(args: Namespace) -> int:
    """Print (and optionally write) the per-method comparison table."""
    db = await get_database()
    if args.clear:
        if await db.delete_dataset_runs(dataset_key(args.dataset)):
            print(f"Cleared stored sweeps for {args.dataset}")
        return 0

    runs = await db.load_latest_runs(dataset_key(args.dataset))
    if not runs:
        print(f"No stored sweeps for {args.dataset}")
        return 0

    rows = []
    for run in runs:
        per_size = await db.load_rows(run["run_id"])
        means = [r["mean_rmse"] for r in per_size if r["mean_rmse"] is not None]
        spread = float(np.std(means)) if means else None
        rows.append({
            "method": run["method"],
            "metric": run["metric"],
            "mean_rmse": run["mean_rmse"],
            "std_over_sizes": spread,
            "cov": run["cov"],
            "slope": run["slope"],
            "intercept": run["intercept"],
            "r2": run["r2"],
        })

    text = format_table(REPORT_COLUMNS, rows, title=f"Sweep report for {args.dataset}")
    print(text)
    if args.out:
        write_text(args.out, text)
    return 0


def register(subparsers) -> None:
    """Add the benchmark commands to the CLI."""
    sw = subparsers.add_parser("sweep", help="Measurement-budget sweep")
    sw.add_argument("--method", choices=SWEEP_METHODS, required=True)
    sw.add_argument("--dataset", required=True)
    sw.add_argument("--model", default=None)
    sw.add_argument("--metric", choices=SWEEP_METRICS, default="eqp")
    sw.add_argument("--shots", type=int, default=None)
    sw.add_argument("--sizes", default=None, help="Comma-separated chain sizes to sweep")
    sw.add_argument("--seed", type=int, default=0)
    sw.add_argument("--max-iter", type=int, default=None, help="Tomography iteration cap")
    sw.add_argument("--out", required=True, help="CSV output")
    sw.add_argument("--dump", default=None, help="Optional per-record CSV")
    sw.add_argument("--no-store", action="store_true", help="Do not record the run in the results database")
    sw.set_defaults(handler=handle_sweep)

    rep = subparsers.add_parser("report", help="Compare stored sweeps of a dataset")
    rep.add_argument("--dataset", required=True)
    rep.add_argument("--out", default=None, help="Optional text output")
    rep.add_argument("--clear", action="store_true", help="Delete the stored sweeps of the dataset instead")
    rep.set_defaults(handler=handle_report)
