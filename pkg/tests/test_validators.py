import numpy as np
import pytest

from utils.constants import ERROR_UNSUPPORTED_QUBITS
from utils.errors import InvalidInputError
from utils.qcore import density_from_pure, fidelity, purity
from utils.validators import (
    parse_state,
    require_valid,
    sanitize_selector,
    validate_count,
    validate_qubits,
    validate_shots,
    validate_sizes,
)


class TestSimpleValidators:
    def test_sanitize_selector(self):
        assert sanitize_selector("  Werner : 0.4 ") == "werner:0.4"
        assert sanitize_selector("") == ""

    def test_qubits(self):
        assert validate_qubits(2) == (True, None)
        assert validate_qubits(3) == (True, None)
        assert validate_qubits(4) == (False, ERROR_UNSUPPORTED_QUBITS)

    def test_shots(self):
        assert validate_shots(None) == (True, None)
        assert validate_shots(1)[0]
        ok, error = validate_shots(0)
        assert not ok
        assert "at least 1" in error

    def test_count(self):
        assert validate_count(0, "test-count", minimum=0)[0]
        ok, error = validate_count(0, "count")
        assert not ok
        assert error.startswith("count")


class TestSizes:
    def test_parses_list(self):
        assert validate_sizes("4,9", 36) == (True, None, (4, 9))
        assert validate_sizes("4; 9 ;36", 36) == (True, None, (4, 9, 36))

    def test_empty_means_default(self):
        assert validate_sizes(None, 36) == (True, None, None)
        assert validate_sizes("", 36) == (True, None, None)

    @pytest.mark.parametrize("text", ["4,x", ",", "9,4", "4,4", "0,9", "9,37"])
    def test_rejects(self, text):
        ok, error, sizes = validate_sizes(text, 36)
        assert not ok
        assert error
        assert sizes is None


class TestParseState:
    def test_bell_state(self):
        ok, error, (rho, reference) = parse_state("phi-", 2)
        assert ok and error is None
        assert fidelity(rho, density_from_pure(reference)) == pytest.approx(1.0)

    def test_bell_state_needs_two_qubits(self):
        ok, error, payload = parse_state("psi-", 3)
        assert not ok
        assert "--qubits 2" in error
        assert payload is None

    def test_werner(self):
        ok, _, (rho, _) = parse_state("Werner:0.4", 2)
        assert ok
        assert purity(rho) == pytest.approx((1 + 3 * 0.4**2) / 4)

    def test_werner_without_argument(self):
        ok, error, _ = parse_state("werner", 2)
        assert not ok
        assert "werner" in error

    def test_bures_is_seeded(self):
        _, _, (first, _) = parse_state("bures:7", 3)
        _, _, (second, _) = parse_state("bures:7", 3)
        np.testing.assert_array_equal(first.entries, second.entries)
        assert first.n_qubits == 3

    def test_pauli_family(self):
        ok, _, (rho, _) = parse_state("pauli:0.1,0.2,0.3", 2)
        assert ok
        assert np.trace(rho.entries).real == pytest.approx(1.0)

    @pytest.mark.parametrize("selector", ["pauli:1,1,1", "pauli:0.1,0.2", "pauli:2,0,0"])
    def test_pauli_family_rejections(self, selector):
        ok, error, _ = parse_state(selector, 2)
        assert not ok
        assert error

    def test_product_label(self):
        ok, _, (rho, reference) = parse_state("product:Z+X-", 2)
        assert ok
        assert purity(rho) == pytest.approx(1.0)
        expected = np.kron([1, 0], np.array([1, -1]) / np.sqrt(2))
        assert abs(np.vdot(expected, reference.amplitudes)) == pytest.approx(1.0)

    def test_ghz_and_mixed(self):
        _, _, (ghz, _) = parse_state("ghz", 3)
        assert ghz.entries[0, -1] == pytest.approx(0.5)
        _, _, (mixed, _) = parse_state("mixed", 2)
        np.testing.assert_allclose(mixed.entries, np.eye(4) / 4)

    @pytest.mark.parametrize("selector", ["", "bell", "werner-0.4"])
    def test_unknown_selector(self, selector):
        ok, error, _ = parse_state(selector, 2)
        assert not ok

    def test_unsupported_register(self):
        assert parse_state("ghz", 5) == (False, ERROR_UNSUPPORTED_QUBITS, None)


class TestRequireValid:
    def test_unpacks_payload(self):
        assert require_valid((True, None)) is None
        assert require_valid((True, None, (4, 9))) == (4, 9)
        assert require_valid((True, None, 1, 2)) == (1, 2)

    def test_raises_with_message(self):
        with pytest.raises(InvalidInputError, match="at least 1"):
            require_valid(validate_shots(-5))
