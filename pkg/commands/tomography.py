"""
Tomography commands.

- tomo: Reconstruct a state from a stored measurement record.
- import: Reconstruct a state from an experimental counts file.
- simulate: Write a counts file sampled from a known state.
"""

import logging
from argparse import Namespace
from pathlib import Path
from typing import Optional

import numpy as np

from utils.dataset import export_counts, import_counts, matrix_to_pairs, simulate_experiment
from utils.decorators import log_command_usage, timed
from utils.eqp import canonical_qp, negativity, sign_agreement
from utils.errors import InvalidInputError
from utils.helpers import format_eqp, format_key_values, format_matrix, read_json, write_json
from utils.measurement import MeasurementRecord, ProjectorFrame, universal_frame
from utils.parallel import run_in_thread
from utils.qcore import DensityMatrix, fidelity, purity
from utils.tomography import TomoOptions, TomoResult, maxlik, mlme
from utils.validators import parse_state, require_valid, validate_qubits, validate_shots

logger = logging.getLogger("eqpbench.commands.tomography")

ESTIMATORS = {"maxlik": maxlik, "mlme": mlme}


def _options(args: Namespace) -> TomoOptions:
    overrides = {
        "max_iter": args.max_iter,
        "dilution": args.dilution,
        "entropy_weight": args.entropy_weight,
    }
    return TomoOptions(**{k: v for k, v in overrides.items() if v is not None})


async def _reconstruct_and_report(
    record: MeasurementRecord, frame: ProjectorFrame, args: Namespace, source: str
) -> TomoResult:
    result = await run_in_thread(ESTIMATORS[args.method], record, frame, _options(args))
    estimate = result.density
    coeffs = canonical_qp(estimate, frame)

    print(format_matrix(estimate.entries))
    print()
    summary = {**result.report(), "projectors": len(record), "purity": purity(estimate),
               "eqp negativity": negativity(coeffs)}

    reference = _reference(args, frame.n_qubits)
    if reference is not None:
        exact = canonical_qp(reference, frame)
        summary["fidelity to reference"] = fidelity(estimate, reference)
        summary["sign agreement"] = sign_agreement(coeffs, exact)
    print(format_key_values(summary))

    if args.show_eqp:
        print()
        print(format_eqp(coeffs, frame.labels()))

    if not result.converged:
        logger.warning(f"{args.method} stopped at the iteration cap", extra={"iterations": result.iterations})

    if args.out:
        write_json(
            args.out,
            {
                "source": source,
                "n_qubits": frame.n_qubits,
                "rho": matrix_to_pairs(estimate.entries),
                "eqp": [float(c) for c in coeffs],
                "report": {k: (float(v) if isinstance(v, (float, np.floating)) else v) for k, v in summary.items()},
            },
        )
    return result


def _reference(args: Namespace, n_qubits: int) -> Optional[DensityMatrix]:
    if not getattr(args, "reference", None):
        return None
    rho, _ = require_valid(parse_state(args.reference, n_qubits))
    return rho


@log_command_usage
@timed
async def handle_tomo(args: Namespace) -> int:
    """Reconstruct from a JSON measurement record ({indices, values, shots})."""
    require_valid(validate_qubits(args.qubits))
    frame = universal_frame(args.qubits)
    try:
        record = MeasurementRecord.from_dict(read_json(args.record))
    except InvalidInputError as e:
        raise InvalidInputError(f"{args.record}: {e}")
    await _reconstruct_and_report(record, frame, args, str(args.record))
    return 0


@log_command_usage
@timed
async def handle_import(args: Namespace) -> int:
    """Reconstruct from an experimental counts file."""
    require_valid(validate_qubits(args.qubits))
    frame = universal_frame(args.qubits)
    record = import_counts(args.counts, args.qubits)
    await _reconstruct_and_report(record, frame, args, str(args.counts))
    return 0


@log_command_usage
async def handle_simulate(args: Namespace) -> int:
    """Sample coincidence counts for every frame projector of a known state."""
    rho, _ = require_valid(parse_state(args.state, args.qubits))
    require_valid(validate_shots(args.shots))
    frame = universal_frame(args.qubits)

    indices, counts = simulate_experiment(
        rho, frame, args.shots, np.random.default_rng(args.seed), multinomial=args.multinomial
    )
    ids = [frame.label(i) for i in indices] if args.labels else list(indices)
    export_counts(Path(args.out), ids, counts, args.shots)
    print(f"Wrote {len(indices)} rows to {args.out}")
    return 0


def _add_estimator_options(parser) -> None:
    parser.add_argument("--qubits", type=int, default=2)
    parser.add_argument("--method", choices=sorted(ESTIMATORS), default="maxlik")
    parser.add_argument("--max-iter", type=int, default=None)
    parser.add_argument("--dilution", type=float, default=None, help="MaxLik dilution in [0, 1]")
    parser.add_argument("--entropy-weight", type=float, default=None, help="MLME entropy weight")
    parser.add_argument("--reference", default=None, help="State selector to compare against")
    parser.add_argument("--show-eqp", action="store_true", help="Print the canonical EQP of the estimate")
    parser.add_argument("--out", default=None, help="JSON output with the estimate")


def register(subparsers) -> None:
    """Add the tomography commands to the CLI."""
    tomo = subparsers.add_parser("tomo", help="Reconstruct from a measurement record")
    tomo.add_argument("--record", required=True, help="JSON file with indices, values, shots")
    _add_estimator_options(tomo)
    tomo.set_defaults(handler=handle_tomo)

    imp = subparsers.add_parser("import", help="Reconstruct from experimental counts")
    imp.add_argument("--counts", required=True, help="Delimited file: projector_id, counts, shots")
    _add_estimator_options(imp)
    imp.set_defaults(handler=handle_import)

    sim = subparsers.add_parser("simulate", help="Write synthetic counts for a known state")
    sim.add_argument("--state", required=True)
    sim.add_argument("--qubits", type=int, default=2)
    sim.add_argument("--shots", type=int, default=10_000)
    sim.add_argument("--seed", type=int, default=0)
    sim.add_argument("--labels", action="store_true", help="Write projector labels instead of indices")
    sim.add_argument(
        "--multinomial", action="store_true",
        help="One multinomial draw per measurement setting instead of a binomial per projector",
    )
    sim.add_argument("--out", required=True)
    sim.set_defaults(handler=handle_simulate)
