import numpy as np
import pytest

from utils.ensembles import bures_state, werner
from utils.eqp import (
    Atom,
    QuasiProbability,
    Verdict,
    _branching_iteration,
    canonical_qp,
    certify_state,
    eqp_dictionary,
    feasibility_tolerance,
    frame_atoms,
    gram_matrix,
    negativity,
    nnls_certify,
    reconstruct,
    sign_agreement,
    solve_gram,
    stationary_points,
)
from utils.errors import InvalidInputError
from utils.measurement import born_probs
from utils.qcore import (
    BlochQubit,
    DensityMatrix,
    density_from_pure,
    fidelity,
    hs_distance,
    maximally_mixed,
    min_pt_eigenvalue,
    product_ket,
)

KET_0 = np.array([1, 0], dtype=complex)
KET_1 = np.array([0, 1], dtype=complex)
KET_PLUS = np.array([1, 1], dtype=complex) / np.sqrt(2)


class TestAtom:
    def test_ket_is_product(self):
        atom = Atom((BlochQubit(0.0, 0.0), BlochQubit(np.pi, 0.0)), 0.5)
        np.testing.assert_allclose(atom.ket(), [0, 1, 0, 0], atol=1e-15)
        assert atom.n_qubits == 2

    def test_overlap_range(self):
        with pytest.raises(InvalidInputError):
            Atom((BlochQubit(0.0, 0.0),), 1.5)
        with pytest.raises(InvalidInputError):
            Atom((), 0.5)

    def test_from_kets(self):
        atom = Atom.from_kets([KET_1, KET_0], 0.0)
        np.testing.assert_allclose(np.abs(atom.ket()), [0, 0, 1, 0], atol=1e-15)


class TestNegativity:
    def test_sum_of_negative_parts(self):
        assert negativity([0.5, -0.2, 0.9, -0.2]) == pytest.approx(0.4)
        assert negativity([0.1, 0.9]) == 0.0

    def test_quasiprobability_length_check(self):
        atom = Atom.from_kets([KET_0, KET_0], 1.0)
        with pytest.raises(InvalidInputError):
            QuasiProbability((atom,), [0.5, 0.5], 0.0)

    def test_feasibility_tolerance(self):
        assert feasibility_tolerance() == pytest.approx(1e-6)
        assert feasibility_tolerance(10_000) == pytest.approx(0.03)
        with pytest.raises(InvalidInputError):
            feasibility_tolerance(0)


class TestGram:
    def test_frame_gram(self, frame2):
        gram = gram_matrix(frame2)
        assert gram.shape == (36, 36)
        np.testing.assert_allclose(np.diag(gram), 1.0)
        # Z+Z+ against Z-Z+ is orthogonal, against X+Z+ it overlaps by 1/2
        assert gram[0, frame2.index_of("Z-Z+")] == pytest.approx(0.0)
        assert gram[0, frame2.index_of("X+Z+")] == pytest.approx(0.5)

    @pytest.mark.parametrize(
        "first, second, expected",
        [
            ([KET_0, KET_0], [KET_PLUS, KET_PLUS], 0.25),
            ([KET_0, KET_0], [KET_0, KET_0], 1.0),
            ([KET_0, KET_0], [KET_1, KET_1], 0.0),
            ([KET_0, KET_PLUS], [KET_0, KET_0], 0.5),
        ],
    )
    def test_product_overlaps(self, first, second, expected):
        gram = gram_matrix([Atom.from_kets(first, 0.0), Atom.from_kets(second, 0.0)])
        assert gram[0, 1] == pytest.approx(expected)
        assert gram[1, 0] == pytest.approx(expected)

    def test_empty_dictionary(self):
        with pytest.raises(InvalidInputError):
            gram_matrix([])

    def test_solve_gram_on_product_state(self):
        rho = density_from_pure(product_ket([KET_0, KET_0]))
        atoms = stationary_points(rho, restarts=10, rng=np.random.default_rng(2))
        qp = solve_gram(atoms, rho)
        assert qp.negativity == pytest.approx(0.0, abs=1e-8)
        assert qp.residual_norm == pytest.approx(0.0, abs=1e-8)

    def test_solve_gram_over_frame(self, frame2, phi_minus):
        qp = solve_gram(frame2, phi_minus)
        assert len(qp.atoms) == 36
        assert qp.residual_norm < 1e-9
        np.testing.assert_allclose(qp.coeffs, canonical_qp(phi_minus, frame2), atol=1e-10)


class TestCanonicalQP:
    def test_bell_state_has_negative_entries(self, frame2, phi_minus):
        coeffs = canonical_qp(phi_minus, frame2)
        assert coeffs.shape == (36,)
        assert coeffs.sum() == pytest.approx(1.0)
        assert coeffs.min() < -0.2
        assert negativity(coeffs) > 0

    def test_maximally_mixed_is_constant(self, frame2):
        coeffs = canonical_qp(maximally_mixed(2), frame2)
        np.testing.assert_allclose(coeffs, np.full(36, 1 / 36), atol=1e-12)
        assert negativity(coeffs) == 0.0

    def test_reconstruct_round_trip(self, frame2, frame3, rng):
        for n, frame in ((2, frame2), (3, frame3)):
            rho = bures_state(n, rng)
            rebuilt = reconstruct(canonical_qp(rho, frame), frame)
            assert hs_distance(rebuilt.density, rho) < 1e-9
            assert not rebuilt.renormalized
            assert not rebuilt.clipped

    def test_canonical_depends_only_on_probabilities(self, frame2, psi_minus):
        first = canonical_qp(psi_minus, frame2)
        second = canonical_qp(psi_minus.entries.copy(), frame2)
        np.testing.assert_array_equal(first, second)
        assert born_probs(psi_minus, frame2).shape == first.shape


class TestReconstruct:
    def test_requires_atoms(self):
        with pytest.raises(InvalidInputError):
            reconstruct([0.5, 0.5])

    def test_length_mismatch(self, frame2):
        with pytest.raises(InvalidInputError):
            reconstruct(np.zeros(5), frame2)

    def test_renormalizes_trace(self, frame2):
        coeffs = np.zeros(36)
        coeffs[0] = 2.0
        result = reconstruct(coeffs, frame2)
        assert result.renormalized
        assert result.trace == pytest.approx(2.0)
        assert fidelity(result.density, density_from_pure(product_ket([KET_0, KET_0]))) == pytest.approx(1.0)

    def test_clips_negative_spectrum(self, frame2):
        coeffs = np.zeros(36)
        coeffs[0] = 1.5
        coeffs[frame2.index_of("Z-Z-")] = -0.5
        result = reconstruct(coeffs, frame2)
        assert result.clipped
        assert result.min_eigenvalue < 0
        assert np.linalg.eigvalsh(result.density.entries).min() >= -1e-12


class TestStationaryPoints:
    def test_bell_state_maxima(self, phi_minus):
        atoms = stationary_points(phi_minus, restarts=10, rng=np.random.default_rng(0))
        assert atoms
        # Maximal product overlap of a Bell state is 1/2
        assert atoms[0].overlap == pytest.approx(0.5, abs=1e-6)
        assert all(a.overlap <= 0.5 + 1e-9 for a in atoms)

    def test_sorted_by_overlap(self, rng):
        atoms = stationary_points(bures_state(2, rng), restarts=5, rng=rng)
        overlaps = [a.overlap for a in atoms]
        assert overlaps == sorted(overlaps, reverse=True)

    @pytest.mark.parametrize("cap", [1, 2, 3, 4])
    def test_branch_count_reaches_cap(self, rng, cap):
        rho = bures_state(2, rng)
        start = [np.array([1, 1j]) / np.sqrt(2), np.array([0.6, 0.8])]
        converged, stalled = _branching_iteration(rho.entries, start, 500, 1e-10, cap)
        assert len(converged) + stalled == cap

    def test_branching_grows_past_selector_count(self, rng):
        # Two qubits have only four fixed larger/smaller choices per restart
        rho = bures_state(2, rng)
        start = [np.array([1, 1j]) / np.sqrt(2), np.array([0.6, 0.8])]
        converged, stalled = _branching_iteration(rho.entries, start, 500, 1e-10, 64)
        assert 16 <= len(converged) + stalled <= 64
        assert converged

    def test_single_branch_finds_fewer_points(self, rng):
        rho = bures_state(2, rng)
        greedy = stationary_points(rho, restarts=5, rng=np.random.default_rng(3), branch_cap=1)
        full = stationary_points(rho, restarts=5, rng=np.random.default_rng(3))
        assert len(greedy) < len(full)
        assert greedy[0].overlap == pytest.approx(full[0].overlap, abs=1e-6)

    def test_branch_cap_validation(self, phi_minus):
        with pytest.raises(InvalidInputError):
            stationary_points(phi_minus, restarts=1, branch_cap=0)

    def test_restarts_validation(self, phi_minus):
        with pytest.raises(InvalidInputError):
            stationary_points(phi_minus, restarts=0)

    def test_dictionary_includes_frame(self, frame2, phi_minus):
        atoms = eqp_dictionary(phi_minus, restarts=5, rng=np.random.default_rng(1))
        stationary = stationary_points(phi_minus, restarts=5, rng=np.random.default_rng(1))
        assert len(stationary) < len(atoms) <= len(stationary) + 36

    def test_frame_atoms_carry_probabilities(self, frame2, psi_minus):
        atoms = frame_atoms(frame2, psi_minus)
        np.testing.assert_allclose([a.overlap for a in atoms], born_probs(psi_minus, frame2), atol=1e-12)


class TestCertification:
    def test_separable_werner_is_classical(self):
        report = certify_state(werner(0.3), restarts=20, rng=np.random.default_rng(0))
        assert report.certification.verdict == Verdict.CLASSICAL_FEASIBLE
        assert not report.ppt_entangled

    def test_entangled_werner(self):
        report = certify_state(werner(0.4), restarts=20, rng=np.random.default_rng(0))
        assert report.certification.is_entangled
        assert report.certification.witness > report.certification.feas_tol
        assert report.ppt_entangled

    def test_singlet_has_eqp_negativity(self, psi_minus):
        report = certify_state(psi_minus, restarts=20, rng=np.random.default_rng(0))
        assert report.certification.is_entangled
        assert report.qp.negativity > 0

    def test_maximally_mixed_without_refinement(self, frame2):
        rho = maximally_mixed(2)
        certification = nnls_certify(frame_atoms(frame2, rho), rho, refine=False)
        assert certification.verdict == Verdict.CLASSICAL_FEASIBLE
        assert certification.rounds == 0
        assert np.all(certification.weights >= 0)

    def test_exhausted_refinement_is_undecided(self, frame2):
        # Separable, but its correlation along the factor directions exceeds what frame atoms reach
        a = np.array([np.cos(0.3), np.exp(0.7j) * np.sin(0.3)])
        b = np.array([np.cos(1.1), np.exp(-0.4j) * np.sin(1.1)])
        pure = density_from_pure(product_ket([a, b])).entries
        rho = DensityMatrix(0.8 * pure + 0.2 * np.eye(4) / 4)

        cut_short = nnls_certify(frame_atoms(frame2, rho), rho, max_rounds=0)
        assert cut_short.verdict == Verdict.UNDECIDED
        assert cut_short.is_undecided
        assert not cut_short.is_entangled
        assert cut_short.residual_norm > cut_short.feas_tol
        assert cut_short.rounds == 0

        refined = nnls_certify(frame_atoms(frame2, rho), rho)
        assert refined.verdict == Verdict.CLASSICAL_FEASIBLE
        assert refined.rounds >= 1

    def test_entangled_state_never_classical_without_refinement(self, frame2, phi_minus):
        certification = nnls_certify(frame_atoms(frame2, phi_minus), phi_minus, refine=False)
        assert certification.verdict != Verdict.CLASSICAL_FEASIBLE
        assert len(certification.atoms) == 36
        assert certification.rounds == 0

    @pytest.mark.parametrize("visibility", [1.0, 0.7])
    def test_three_qubit_npt_state_is_entangled(self, visibility):
        ghz = np.zeros(8, dtype=complex)
        ghz[0] = ghz[7] = 1 / np.sqrt(2)
        pure = density_from_pure(ghz).entries
        rho = DensityMatrix(visibility * pure + (1 - visibility) * np.eye(8) / 8)
        assert min(min_pt_eigenvalue(rho, q) for q in range(3)) < 0

        report = certify_state(rho, restarts=3, rng=np.random.default_rng(0))
        assert report.certification.is_entangled
        assert report.ppt_entangled

    @pytest.mark.slow
    def test_agrees_with_ppt_on_bures_states(self):
        rng = np.random.default_rng(2024)
        decided, agreed = 0, 0
        for _ in range(500):
            rho = bures_state(2, rng)
            edge = min_pt_eigenvalue(rho)
            if abs(edge) <= 1e-4:
                continue
            report = certify_state(rho, restarts=2, rng=rng)
            decided += 1
            if report.certification.is_entangled == (edge < 0):
                agreed += 1
            else:
                assert abs(edge) < 1e-3
        assert agreed / decided >= 0.99

    def test_dimension_mismatch(self, frame3, phi_minus):
        with pytest.raises(InvalidInputError):
            nnls_certify(frame_atoms(frame3, maximally_mixed(3)), phi_minus)


class TestSignAgreement:
    def test_fraction_of_matching_negatives(self):
        assert sign_agreement([-0.1, 0.2, -0.3], [-0.2, -0.1, -0.4]) == pytest.approx(2 / 3)

    def test_no_negatives(self):
        assert sign_agreement([0.1, -0.2], [0.1, 0.2]) == 1.0

    def test_length_mismatch(self):
        with pytest.raises(InvalidInputError):
            sign_agreement([0.1], [0.1, 0.2])
