"""
Input validation and normalization for command-line arguments.

Validators return ``(is_valid, error_message, ...)`` tuples so handlers can
report every problem through one usage-error path. ``parse_state`` turns a
state selector such as ``werner:0.4`` or ``bures:7`` into a density matrix
and its reference state.
"""

from typing import Optional, Tuple

import numpy as np

from config.settings import SUPPORTED_QUBITS
from utils.constants import ERROR_UNSUPPORTED_QUBITS, STATE_SELECTOR_PATTERN
from utils.ensembles import bures_state, pauli_family, principal_state, sample_rng, werner
from utils.errors import InvalidInputError
from utils.measurement import build_frame
from utils.qcore import DensityMatrix, PureState, bell_state, density_from_pure, maximally_mixed, product_ket

StateSelection = Tuple[DensityMatrix, PureState]

BELL_NAMES = ("phi+", "phi-", "psi+", "psi-")


def sanitize_selector(text: str) -> str:
    """Lower-case a selector and drop whitespace."""
    if not text:
        return ""
    return "".join(text.split()).lower()


def validate_qubits(n_qubits: int) -> Tuple[bool, Optional[str]]:
    if n_qubits not in SUPPORTED_QUBITS:
        return False, ERROR_UNSUPPORTED_QUBITS
    return True, None


def validate_shots(shots: Optional[int]) -> Tuple[bool, Optional[str]]:
    """None (exact probabilities) or a positive integer."""
    if shots is not None and shots < 1:
        return False, f"Shots must be at least 1. You provided: {shots}"
    return True, None


def validate_count(count: int, name: str = "count", minimum: int = 1) -> Tuple[bool, Optional[str]]:
    if count < minimum:
        return False, f"{name} must be at least {minimum}. You provided: {count}"
    return True, None


def validate_sizes(
    text: Optional[str], frame_size: int
) -> Tuple[bool, Optional[str], Optional[Tuple[int, ...]]]:
    """
    Parse a comma-separated list of subset sizes.

    Returns:
        Tuple (is_valid, error_message, sizes). Empty input means "use the
        default chain" and yields (True, None, None).
    """
    if not text:
        return True, None, None
    try:
        sizes = tuple(int(part) for part in text.replace(";", ",").split(",") if part.strip())
    except ValueError:
        return False, f"Sizes must be comma-separated integers, got {text!r}", None

    if not sizes:
        return False, "At least one subset size is required.", None
    if any(b <= a for a, b in zip(sizes, sizes[1:])):
        return False, "Subset sizes must be strictly increasing.", None
    if sizes[0] < 1 or sizes[-1] > frame_size:
        return False, f"Subset sizes must lie within 1..{frame_size}.", None
    return True, None, sizes


def _ghz(n_qubits: int) -> PureState:
    amps = np.zeros(2**n_qubits, dtype=complex)
    amps[0] = amps[-1] = 1.0
    return PureState.normalized(amps)


def _parse_floats(text: str, count: int) -> Tuple[float, ...]:
    values = tuple(float(part) for part in text.split(","))
    if len(values) != count:
        raise ValueError(f"expected {count} numbers")
    return values


def parse_state(
    selector: str, n_qubits: int
) -> Tuple[bool, Optional[str], Optional[StateSelection]]:
    """
    Resolve a state selector for a register size.

    Supported selectors:
        phi+, phi-, psi+, psi-   Bell states (2 qubits)
        werner:P                 Werner state (2 qubits), reference |psi->
        bures:SEED               Bures-random state, reference = principal eigenvector
        pauli:RX,RY,RZ           Pauli-diagonal family member
        product:LABEL            Frame product state, e.g. product:Z+X-
        ghz                      GHZ state
        mixed                    Maximally mixed state

    Returns:
        Tuple (is_valid, error_message, (density, reference)).
    """
    ok, error = validate_qubits(n_qubits)
    if not ok:
        return False, error, None

    text = sanitize_selector(selector)
    match = STATE_SELECTOR_PATTERN.match(text)
    if not match:
        return False, f"Unknown state selector {selector!r}.", None
    name, argument = match.group("name"), match.group("arg")

    try:
        if name in BELL_NAMES:
            if n_qubits != 2:
                return False, "Bell states need --qubits 2.", None
            psi = bell_state(name)
            return True, None, (density_from_pure(psi), psi)

        if name == "werner":
            if n_qubits != 2:
                return False, "Werner states need --qubits 2.", None
            return True, None, (werner(float(argument)), bell_state("psi-"))

        if name == "bures":
            rho = bures_state(n_qubits, sample_rng(int(argument)))
            return True, None, (rho, principal_state(rho))

        if name == "pauli":
            rho = pauli_family(n_qubits, *_parse_floats(argument, 3))
            if rho is None:
                return False, f"Pauli coefficients {argument} do not give a valid state.", None
            return True, None, (rho, principal_state(rho))

        if name == "product":
            frame = build_frame(n_qubits)
            factors = frame.factor_kets(frame.index_of(argument))
            psi = PureState.normalized(product_ket(factors))
            return True, None, (density_from_pure(psi), psi)

        if name == "ghz":
            psi = _ghz(n_qubits)
            return True, None, (density_from_pure(psi), psi)

        if name == "mixed":
            rho = maximally_mixed(n_qubits)
            return True, None, (rho, principal_state(rho))

    except (TypeError, ValueError) as e:
        if isinstance(e, InvalidInputError):
            return False, str(e), None
        return False, f"Invalid argument for {name!r}: {e}", None

    return False, f"Unknown state selector {selector!r}.", None


def require_valid(result: tuple):
    """
    Unpack a validator result, raising on failure.

    Returns:
        The payload after (is_valid, error_message): None, a single value, or a tuple.

    Raises:
        InvalidInputError: With the validator's message.
    """
    ok, error, *payload = result
    if not ok:
        raise InvalidInputError(error)
    if not payload:
        return None
    return payload[0] if len(payload) == 1 else tuple(payload)
