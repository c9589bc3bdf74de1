import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from utils.errors import InvalidInputError
from utils.qcore import (
    BlochQubit,
    DensityMatrix,
    PureState,
    bell_state,
    density_from_pure,
    fidelity,
    hermitian_eig,
    hs_distance,
    hs_inner,
    is_npt,
    is_valid_density,
    maximally_mixed,
    min_pt_eigenvalue,
    partial_projection,
    partial_transpose,
    pauli_expectations,
    pauli_labels,
    pauli_string,
    product_ket,
    project_to_density,
    purity,
    trace_distance,
    von_neumann_entropy,
)

KET_0 = np.array([1, 0], dtype=complex)
KET_1 = np.array([0, 1], dtype=complex)


class TestDensityMatrix:
    def test_accepts_valid_state(self, phi_minus):
        assert phi_minus.n_qubits == 2
        assert phi_minus.dim == 4

    def test_entries_are_read_only(self, phi_minus):
        with pytest.raises(ValueError):
            phi_minus.entries[0, 0] = 0.0

    def test_rejects_non_hermitian(self):
        m = np.array([[0.5, 0.1], [0.0, 0.5]], dtype=complex)
        with pytest.raises(InvalidInputError, match="Hermitian"):
            DensityMatrix(m)

    def test_rejects_wrong_trace(self):
        with pytest.raises(InvalidInputError, match="trace"):
            DensityMatrix(np.eye(2) * 0.6)

    def test_rejects_negative_spectrum(self):
        with pytest.raises(InvalidInputError, match="positive"):
            DensityMatrix(np.diag([1.2, -0.2]).astype(complex))

    def test_rejects_non_qubit_dimension(self):
        with pytest.raises(InvalidInputError):
            DensityMatrix(np.eye(3) / 3)

    def test_is_valid_density(self, psi_minus):
        assert is_valid_density(psi_minus) is True
        assert is_valid_density(np.diag([1.5, -0.5])) is False


class TestPureState:
    def test_rejects_unnormalized(self):
        with pytest.raises(InvalidInputError):
            PureState(np.array([1.0, 1.0]))

    def test_normalized_constructor(self):
        psi = PureState.normalized([3.0, 4.0])
        np.testing.assert_allclose(psi.amplitudes, [0.6, 0.8])

    def test_zero_vector(self):
        with pytest.raises(InvalidInputError):
            PureState.normalized([0.0, 0.0])

    def test_bell_states(self):
        s = 1 / np.sqrt(2)
        np.testing.assert_allclose(bell_state("phi-").amplitudes, [s, 0, 0, -s])
        np.testing.assert_allclose(bell_state("psi-").amplitudes, [0, s, -s, 0])
        with pytest.raises(InvalidInputError):
            bell_state("chi+")


class TestBlochQubit:
    def test_poles(self):
        np.testing.assert_allclose(BlochQubit(0.0, 0.0).ket(), KET_0)
        np.testing.assert_allclose(BlochQubit(np.pi, 0.0).ket(), KET_1, atol=1e-15)

    def test_range_checks(self):
        with pytest.raises(InvalidInputError):
            BlochQubit(-0.1, 0.0)
        with pytest.raises(InvalidInputError):
            BlochQubit(1.0, 2 * np.pi)

    @settings(max_examples=50, deadline=None)
    @given(
        theta=st.floats(min_value=0.01, max_value=np.pi - 0.01),
        phi=st.floats(min_value=0.0, max_value=2 * np.pi - 0.01),
        phase=st.floats(min_value=0.0, max_value=2 * np.pi),
    )
    def test_from_ket_discards_global_phase(self, theta, phi, phase):
        ket = np.exp(1j * phase) * BlochQubit(theta, phi).ket()
        back = BlochQubit.from_ket(ket)
        assert back.theta == pytest.approx(theta, abs=1e-9)
        overlap = abs(np.vdot(back.ket(), BlochQubit(theta, phi).ket()))
        assert overlap == pytest.approx(1.0, abs=1e-9)


class TestPauli:
    def test_pauli_string_shape(self):
        assert pauli_string("XZ").shape == (4, 4)
        np.testing.assert_allclose(pauli_string("ZZ"), np.diag([1, -1, -1, 1]))

    def test_unknown_axis(self):
        with pytest.raises(InvalidInputError):
            pauli_string("XQ")
        with pytest.raises(InvalidInputError):
            pauli_string("")

    def test_labels_order(self):
        labels = pauli_labels(2)
        assert len(labels) == 16
        assert labels[0] == "II"
        assert labels[-1] == "ZZ"

    def test_expectations_of_singlet(self, psi_minus):
        values = dict(zip(pauli_labels(2), pauli_expectations(psi_minus)))
        assert values["II"] == pytest.approx(1.0)
        for axis in ("XX", "YY", "ZZ"):
            assert values[axis] == pytest.approx(-1.0)
        assert values["XZ"] == pytest.approx(0.0, abs=1e-12)


class TestMetrics:
    def test_fidelity_of_identical_states(self, phi_minus):
        assert fidelity(phi_minus, phi_minus) == pytest.approx(1.0, abs=1e-10)

    def test_fidelity_of_orthogonal_states(self, phi_minus, psi_minus):
        assert fidelity(phi_minus, psi_minus) == pytest.approx(0.0, abs=1e-10)

    def test_fidelity_with_mixed_state(self, phi_minus):
        assert fidelity(phi_minus, maximally_mixed(2)) == pytest.approx(0.25, abs=1e-10)

    def test_fidelity_dimension_mismatch(self, phi_minus):
        with pytest.raises(InvalidInputError):
            fidelity(phi_minus, maximally_mixed(1))

    def test_purity(self, phi_minus):
        assert purity(phi_minus) == pytest.approx(1.0)
        assert purity(maximally_mixed(3)) == pytest.approx(1 / 8)

    def test_hilbert_schmidt(self, phi_minus, psi_minus):
        assert hs_inner(phi_minus, psi_minus) == pytest.approx(0.0, abs=1e-12)
        assert hs_inner(phi_minus, phi_minus) == pytest.approx(1.0)
        assert hs_distance(phi_minus, psi_minus) == pytest.approx(np.sqrt(2))

    def test_trace_distance(self, phi_minus, psi_minus):
        assert trace_distance(phi_minus, psi_minus) == pytest.approx(1.0)
        assert trace_distance(phi_minus, phi_minus) == pytest.approx(0.0, abs=1e-12)

    def test_entropy(self, phi_minus):
        assert von_neumann_entropy(phi_minus) == pytest.approx(0.0, abs=1e-12)
        assert von_neumann_entropy(maximally_mixed(2)) == pytest.approx(np.log(4))


class TestEigen:
    def test_descending_order(self):
        values, vectors = hermitian_eig(np.diag([0.1, 0.7, 0.2]).astype(complex))
        np.testing.assert_allclose(values, [0.7, 0.2, 0.1])
        assert abs(vectors[1, 0]) == pytest.approx(1.0)

    def test_rejects_non_hermitian(self):
        with pytest.raises(InvalidInputError):
            hermitian_eig(np.array([[0, 1], [0, 0]], dtype=complex))


class TestPartialOperations:
    def test_partial_transpose_of_singlet(self, psi_minus):
        assert min_pt_eigenvalue(psi_minus) == pytest.approx(-0.5)
        assert is_npt(psi_minus)

    def test_product_state_is_ppt(self):
        rho = density_from_pure(product_ket([KET_0, KET_1]))
        assert not is_npt(rho, tol=1e-12)

    def test_partial_transpose_is_involution(self, rng):
        m = rng.standard_normal((8, 8)) + 1j * rng.standard_normal((8, 8))
        for q in range(3):
            np.testing.assert_allclose(partial_transpose(partial_transpose(m, q), q), m)

    def test_partial_transpose_range(self, phi_minus):
        with pytest.raises(InvalidInputError):
            partial_transpose(phi_minus, 2)

    def test_partial_projection_of_bell_state(self, phi_minus):
        reduced = partial_projection(phi_minus, 0, [KET_1])
        np.testing.assert_allclose(reduced, np.diag([0.0, 0.5]), atol=1e-12)

    def test_partial_projection_keeps_second_qubit(self, phi_minus):
        reduced = partial_projection(phi_minus, 1, np.array([1, 0], dtype=complex))
        np.testing.assert_allclose(reduced, np.diag([0.5, 0.0]), atol=1e-12)

    def test_partial_projection_requires_normalized_bra(self, phi_minus):
        with pytest.raises(InvalidInputError):
            partial_projection(phi_minus, 0, np.array([1, 1], dtype=complex))
        with pytest.raises(InvalidInputError):
            partial_projection(phi_minus, 0, [KET_0, KET_1])


class TestProjection:
    def test_projects_negative_eigenvalues(self):
        rho = project_to_density(np.diag([1.1, -0.1]).astype(complex))
        np.testing.assert_allclose(rho.entries, np.diag([1.0, 0.0]), atol=1e-12)

    def test_all_negative_falls_back_to_mixed(self):
        rho = project_to_density(-np.eye(4, dtype=complex))
        np.testing.assert_allclose(rho.entries, np.eye(4) / 4)
