"""
Learning commands.

- train: Fit the residual network on a dataset's train/validation splits.
- eval: Downstream fidelity/purity RMSE of a method on the test split.
"""

import logging
from argparse import Namespace
from dataclasses import asdict
from pathlib import Path

from config.settings import NETWORK_ACTIVATION, NETWORK_BLOCKS, NETWORK_WIDTH
from utils.bench import SWEEP_METHODS, eval_downstream, run_sweep
from utils.constants import DOWNSTREAM_CSV_COLUMNS, INFO_TRAINING, RECORD_DUMP_COLUMNS
from utils.dataset import load_dataset, records_to_arrays
from utils.decorators import log_command_usage, timed
from utils.ensembles import STREAM_TRAINING, sample_rng
from utils.helpers import format_key_values, format_table, write_csv, write_json
from utils.measurement import universal_frame
from utils.models import TrainingReport
from utils.neuralnet import LOSS_KINDS, ModelConfig, TrainConfig, load_model, save_model, train
from utils.parallel import run_in_thread
from utils.validators import require_valid, validate_shots, validate_sizes

logger = logging.getLogger("eqpbench.commands.learning")


@log_command_usage
@timed
async def handle_train(args: Namespace) -> int:
    """Train a model and save it with a JSON training report next to it."""
    train_split = load_dataset(args.dataset, "train")
    validation_split = load_dataset(args.dataset, "validation")
    n_qubits = train_split.n_qubits
    frame = universal_frame(n_qubits)

    inputs, targets = records_to_arrays(train_split.records, frame)
    validation = records_to_arrays(validation_split.records, frame) if validation_split.records else None

    model_config = ModelConfig.for_frame(
        frame,
        width=args.width or NETWORK_WIDTH[n_qubits],
        n_blocks=args.blocks if args.blocks is not None else NETWORK_BLOCKS[n_qubits],
        activation=args.activation,
        seed=args.seed,
    )
    overrides = {
        "epochs": args.epochs,
        "batch_size": args.batch_size,
        "learning_rate": args.lr,
        "patience": args.patience,
        "loss": args.loss,
    }
    train_config = TrainConfig(**{k: v for k, v in overrides.items() if v is not None})

    print(INFO_TRAINING)
    rng = sample_rng(args.seed, STREAM_TRAINING, 0)
    model, history = await run_in_thread(train, (inputs, targets), model_config, train_config, rng, validation)

    save_model(model, args.out, history)
    report: TrainingReport = {
        "records": int(inputs.shape[0]),
        "epochs_run": len(history.train_loss),
        "best_epoch": history.best_epoch,
        "best_val_rmse": history.best_val_rmse,
        "stopped_early": history.stopped_early,
    }
    write_json(Path(f"{args.out}.json"), dict(report))
    print(format_key_values(dict(report)))
    return 0


@log_command_usage
@timed
async def handle_eval(args: Namespace) -> int:
    """Per-size fidelity and purity RMSE on the test split."""
    require_valid(validate_shots(args.shots))
    test = load_dataset(args.dataset, "test")
    frame = universal_frame(test.n_qubits)
    sizes = require_valid(validate_sizes(args.sizes, len(frame)))
    model = load_model(args.model) if args.model else None

    result = await run_sweep(
        args.method, test.chain, test.records, frame, model=model, shots=args.shots, seed=args.seed, sizes=sizes
    )
    rows = [asdict(row) for row in eval_downstream(result, test.records)]

    write_csv(args.out, DOWNSTREAM_CSV_COLUMNS, rows)
    if args.dump:
        write_csv(args.dump, RECORD_DUMP_COLUMNS, result.record_rows())
    print(format_table(DOWNSTREAM_CSV_COLUMNS, rows, title=f"Downstream RMSE ({args.method})"))
    return 0


def register(subparsers) -> None:
    """Add the learning commands to the CLI."""
    tr = subparsers.add_parser("train", help="Train the residual network")
    tr.add_argument("--dataset", required=True)
    tr.add_argument("--out", required=True, help="Model archive path")
    tr.add_argument("--epochs", type=int, default=None)
    tr.add_argument("--width", type=int, default=None)
    tr.add_argument("--blocks", type=int, default=None)
    tr.add_argument("--activation", choices=("softplus", "silu"), default=NETWORK_ACTIVATION)
    tr.add_argument("--batch-size", type=int, default=None)
    tr.add_argument("--lr", type=float, default=None)
    tr.add_argument("--patience", type=int, default=None)
    tr.add_argument("--loss", choices=LOSS_KINDS, default=None)
    tr.add_argument("--seed", type=int, default=0)
    tr.set_defaults(handler=handle_train)

    ev = subparsers.add_parser("eval", help="Downstream fidelity/purity evaluation")
    ev.add_argument("--dataset", required=True)
    ev.add_argument("--model", default=None)
    ev.add_argument("--method", choices=SWEEP_METHODS, default="net")
    ev.add_argument("--shots", type=int, default=None)
    ev.add_argument("--sizes", default=None, help="Comma-separated chain sizes to evaluate")
    ev.add_argument("--seed", type=int, default=0)
    ev.add_argument("--out", required=True, help="CSV output")
    ev.add_argument("--dump", default=None, help="Optional per-record CSV")
    ev.set_defaults(handler=handle_eval)
