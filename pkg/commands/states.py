"""
State commands: dataset generation, single-state EQP, certification.

- gen: Generate train/validation/test splits for an ensemble.
- eqp: Canonical frame EQP and stationary-dictionary EQP of one state.
- certify: Nonnegative-feasibility verdict with the PPT cross-check.
"""

import logging
from argparse import Namespace
from typing import Dict

import numpy as np

from config.settings import PAULI_GRID_RESOLUTION
from utils.constants import INFO_GENERATING
from utils.dataset import build_dataset, default_sizes
from utils.decorators import log_command_usage, timed
from utils.ensembles import EnsembleKind, EnsembleSpec
from utils.eqp import Verdict, canonical_qp, certify_state, eqp_dictionary, negativity, solve_gram
from utils.errors import CertificationUndecidedError, InvalidInputError
from utils.helpers import format_eqp, format_key_values, format_matrix, write_json
from utils.measurement import universal_frame
from utils.models import CertificationSummary
from utils.parallel import run_in_thread
from utils.qcore import density_from_pure, fidelity, purity
from utils.validators import (
    parse_state,
    require_valid,
    validate_count,
    validate_qubits,
    validate_shots,
    validate_sizes,
)

logger = logging.getLogger("eqpbench.commands.states")


def _parse_params(items) -> Dict[str, float]:
    params = {}
    for item in items or []:
        if "=" not in item:
            raise InvalidInputError(f"Parameters must look like name=value, got {item!r}")
        name, value = item.split("=", 1)
        try:
            params[name.strip()] = float(value)
        except ValueError:
            raise InvalidInputError(f"Parameter {name.strip()} is not a number: {value!r}")
    return params


@log_command_usage
@timed
async def handle_gen(args: Namespace) -> int:
    """Generate and store a dataset."""
    require_valid(validate_qubits(args.qubits))
    require_valid(validate_count(args.count, "--count", minimum=0))
    require_valid(validate_shots(args.shots))
    if args.test_count is not None:
        require_valid(validate_count(args.test_count, "--test-count", minimum=0))

    frame = universal_frame(args.qubits)
    sizes = require_valid(validate_sizes(args.sizes, len(frame))) or default_sizes(args.qubits)
    spec = EnsembleSpec(EnsembleKind(args.kind), args.qubits, args.seed, _parse_params(args.param))

    print(INFO_GENERATING)
    summary = await build_dataset(spec, args.count, args.out, sizes=sizes, test_count=args.test_count, shots=args.shots)

    print(format_key_values({f"{split} records": n for split, n in summary["counts"].items()}))
    print(format_key_values({f"kind {kind}": n for kind, n in sorted(summary["kinds"].items())}))
    print(f"Written to {summary['out_dir']}")
    return 0


@log_command_usage
async def handle_eqp(args: Namespace) -> int:
    """Print the canonical and stationary-dictionary EQPs of one state."""
    rho, reference = require_valid(parse_state(args.state, args.qubits))
    frame = universal_frame(args.qubits)
    rng = np.random.default_rng(args.seed)

    canonical = canonical_qp(rho, frame)
    atoms = await run_in_thread(
        lambda: eqp_dictionary(rho, restarts=args.restarts, rng=rng, include_frame=not args.stationary_only)
    )
    qp = solve_gram(atoms, rho)

    print(format_matrix(rho.entries))
    print()
    print(f"Canonical frame EQP ({len(frame)} components), negativity {negativity(canonical):.6f}")
    print(format_eqp(canonical, frame.labels()))
    print()
    print(f"Dictionary EQP ({len(atoms)} atoms), negativity {qp.negativity:.6f}, residual {qp.residual_norm:.3e}")
    print(format_eqp(qp.coeffs, [f"d{i} g={a.overlap:.4f}" for i, a in enumerate(atoms)]))
    print()
    print(format_key_values({"purity": purity(rho), "fidelity to reference": fidelity(rho, density_from_pure(reference))}))

    if args.out:
        write_json(
            args.out,
            {
                "state": args.state,
                "n_qubits": args.qubits,
                "canonical": {"labels": list(frame.labels()), "coeffs": [float(c) for c in canonical],
                              "negativity": negativity(canonical)},
                "dictionary": qp.to_dict(),
            },
        )
    return 0


@log_command_usage
@timed
async def handle_certify(args: Namespace) -> int:
    """Certify classical feasibility or entanglement of one state."""
    rho, _ = require_valid(parse_state(args.state, args.qubits))
    require_valid(validate_shots(args.shots))
    rng = np.random.default_rng(args.seed)

    report = await run_in_thread(
        lambda: certify_state(rho, restarts=args.restarts, rng=rng, shots=args.shots)
    )
    cert = report.certification
    summary: CertificationSummary = {
        "verdict": cert.verdict.value,
        "residual_norm": cert.residual_norm,
        "feas_tol": cert.feas_tol,
        "witness": None if cert.verdict == Verdict.CLASSICAL_FEASIBLE else cert.witness,
        "rounds": cert.rounds,
        "dictionary_size": len(cert.atoms),
        "eqp_negativity": report.qp.negativity,
        "eqp_residual": report.qp.residual_norm,
        "ppt_min_eigenvalues": [float(v) for v in report.ppt_min_eigenvalues],
        "ppt_verdict": "npt" if report.ppt_entangled else "ppt",
    }
    print(format_key_values(dict(summary)))

    if rho.n_qubits == 2 and not cert.is_undecided and cert.is_entangled != report.ppt_entangled:
        logger.warning(
            "Certification disagrees with the PPT criterion",
            extra={"verdict": cert.verdict.value, "ppt": summary["ppt_verdict"]},
        )
    if args.out:
        write_json(args.out, dict(summary))
    if cert.is_undecided:
        raise CertificationUndecidedError(
            f"No verdict after {cert.rounds} refinement rounds (residual {cert.residual_norm:.3e}, "
            f"witness {cert.witness:.3e}, tolerance {cert.feas_tol:.3e})"
        )
    return 0


def register(subparsers) -> None:
    """Add the state commands to the CLI."""
    gen = subparsers.add_parser("gen", help="Generate a dataset")
    gen.add_argument("--qubits", type=int, required=True)
    gen.add_argument("--kind", choices=[k.value for k in EnsembleKind], default=EnsembleKind.MIXTURE.value)
    gen.add_argument("--count", type=int, required=True, help="States for train + validation")
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--out", required=True, help="Output directory")
    gen.add_argument("--test-count", type=int, default=None)
    gen.add_argument("--shots", type=int, default=None, help="Shots per projector for training records")
    gen.add_argument("--sizes", default=None, help="Comma-separated subset sizes of the chain")
    gen.add_argument(
        "--param", action="append", metavar="NAME=VALUE",
        help=f"Ensemble parameter override, e.g. noise_max=0.3 or resolution={PAULI_GRID_RESOLUTION}",
    )
    gen.set_defaults(handler=handle_gen)

    for name, handler, text in (
        ("eqp", handle_eqp, "EQP of a single state"),
        ("certify", handle_certify, "Certify a single state"),
    ):
        sub = subparsers.add_parser(name, help=text)
        sub.add_argument("--state", required=True, help="phi+, phi-, psi+, psi-, werner:P, bures:SEED, "
                                                         "pauli:RX,RY,RZ, product:LABEL, ghz, mixed")
        sub.add_argument("--qubits", type=int, default=2)
        sub.add_argument("--restarts", type=int, default=None)
        sub.add_argument("--seed", type=int, default=0)
        sub.add_argument("--out", default=None, help="Optional JSON output")
        sub.set_defaults(handler=handler)

    subparsers.choices["eqp"].add_argument(
        "--stationary-only", action="store_true", help="Do not extend the dictionary by frame atoms"
    )
    subparsers.choices["certify"].add_argument(
        "--shots", type=int, default=None, help="Shot budget behind the state (widens the tolerance)"
    )
