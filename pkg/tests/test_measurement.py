import numpy as np
import pytest

from utils.ensembles import bures_state
from utils.errors import InvalidInputError
from utils.measurement import (
    MeasurementRecord,
    SubsetChain,
    born_probs,
    encode_input,
    nested_chain,
    simulate_counts,
    simulate_record,
    simulate_setting_counts,
    universal_frame,
)
from utils.qcore import maximally_mixed


class TestProjectorFrame:
    def test_sizes(self, frame2, frame3):
        assert len(frame2) == 36
        assert len(frame3) == 216
        assert frame2.projectors.shape == (36, 4, 4)

    def test_projectors_are_rank_one(self, frame2):
        for p in frame2.projectors[:6]:
            assert np.trace(p).real == pytest.approx(1.0)
            np.testing.assert_allclose(p @ p, p, atol=1e-12)

    def test_labels(self, frame2):
        assert frame2.label(0) == "Z+Z+"
        assert frame2.index_of("Z+X-") == 3
        assert frame2.index_of("y-y-") == 35
        with pytest.raises(InvalidInputError):
            frame2.index_of("Z+Q+")
        with pytest.raises(InvalidInputError):
            frame2.index_of("Z+")

    def test_setting_members_partition_identity(self, frame2):
        members = frame2.setting_members((1, 2))
        assert len(members) == 4
        total = frame2.projectors[list(members)].sum(axis=0)
        np.testing.assert_allclose(total, np.eye(4), atol=1e-12)
        assert all(frame2.setting(i) == (1, 2) for i in members)

    def test_universal_frame_supported_sizes(self):
        assert len(universal_frame(2)) == 36
        with pytest.raises(InvalidInputError):
            universal_frame(4)


class TestSubsetChain:
    def test_nested_chain(self, frame2, rng):
        chain = nested_chain(frame2, (4, 9, 16, 36), rng)
        subsets = chain.subsets
        assert [len(s) for s in subsets] == [4, 9, 16, 36]
        for small, large in zip(subsets, subsets[1:]):
            assert set(small) < set(large)
        assert set(subsets[-1]) == set(range(36))

    def test_rejects_non_increasing_sizes(self, frame2, rng):
        with pytest.raises(InvalidInputError, match="strictly increasing"):
            nested_chain(frame2, (9, 9), rng)
        with pytest.raises(InvalidInputError):
            nested_chain(frame2, (4, 40), rng)

    def test_rejects_repeated_order(self):
        with pytest.raises(InvalidInputError):
            SubsetChain(2, 36, (2,), (5, 5))

    def test_dict_round_trip(self, frame2, rng):
        chain = nested_chain(frame2, (3, 7), rng)
        assert SubsetChain.from_dict(chain.to_dict()) == chain

    def test_from_dict_malformed(self):
        with pytest.raises(InvalidInputError):
            SubsetChain.from_dict({"sizes": [1]})


class TestMeasurementRecord:
    def test_values_range(self):
        with pytest.raises(InvalidInputError):
            MeasurementRecord((0, 1), [0.5, 1.2])

    def test_distinct_indices(self):
        with pytest.raises(InvalidInputError, match="distinct"):
            MeasurementRecord((3, 3), [0.1, 0.2])

    def test_length_mismatch(self):
        with pytest.raises(InvalidInputError):
            MeasurementRecord((0, 1, 2), [0.1, 0.2])

    def test_finite_shot_granularity(self):
        MeasurementRecord((0,), [0.25], shots=4)
        with pytest.raises(InvalidInputError, match="1/shots"):
            MeasurementRecord((0,), [0.3], shots=4)

    def test_exact_flag(self):
        assert MeasurementRecord((0,), [0.5]).is_exact
        assert not MeasurementRecord((0,), [0.5], shots=2).is_exact


class TestBornProbabilities:
    def test_singlet_probabilities(self, frame2, psi_minus):
        probs = born_probs(psi_minus, frame2)
        # Perfect anticorrelation along every shared axis
        assert probs[frame2.index_of("Z+Z+")] == pytest.approx(0.0, abs=1e-12)
        assert probs[frame2.index_of("Z+Z-")] == pytest.approx(0.5)
        assert probs[frame2.index_of("X+X-")] == pytest.approx(0.5)
        assert probs[frame2.index_of("Z+X+")] == pytest.approx(0.25)

    def test_probabilities_sum_per_setting(self, frame3, rng):
        rho = bures_state(3, rng)
        probs = born_probs(rho, frame3)
        assert probs.sum() == pytest.approx(27.0)

    def test_two_qubit_probabilities_sum_to_settings(self, frame2, phi_minus):
        probs = born_probs(phi_minus, frame2)
        assert probs.min() >= 0.0
        assert probs.sum() == pytest.approx(9.0)

    def test_dimension_mismatch(self, frame3, phi_minus):
        with pytest.raises(InvalidInputError):
            born_probs(phi_minus, frame3)


class TestSimulation:
    def test_exact_record(self, frame2, phi_minus):
        record = simulate_record(phi_minus, frame2, (0, 1, 5))
        assert record.is_exact
        np.testing.assert_allclose(record.values, born_probs(phi_minus, frame2, (0, 1, 5)))

    def test_finite_shots_need_generator(self, frame2, phi_minus):
        with pytest.raises(InvalidInputError):
            simulate_record(phi_minus, frame2, (0,), shots=10)

    def test_binomial_counts_are_seeded(self, frame2, phi_minus):
        a = simulate_record(phi_minus, frame2, range(36), 1000, np.random.default_rng(3))
        b = simulate_record(phi_minus, frame2, range(36), 1000, np.random.default_rng(3))
        np.testing.assert_array_equal(a.values, b.values)
        assert a.shots == 1000

    def test_shot_noise_is_small(self, frame2, rng):
        rho = maximally_mixed(2)
        record = simulate_counts(born_probs(rho, frame2), 100_000, rng)
        np.testing.assert_allclose(record.values, 0.25, atol=0.01)

    def test_setting_counts_sum_to_shots(self, frame2, psi_minus, rng):
        members = frame2.setting_members((0, 0))
        counts = simulate_setting_counts(psi_minus, frame2, members, 500, rng)
        assert counts.sum() == 500
        # |psi-> never yields equal Z outcomes
        assert counts[0] == 0 and counts[3] == 0

    def test_multinomial_record(self, frame2, phi_minus, rng):
        members = frame2.setting_members((2, 2))
        record = simulate_record(phi_minus, frame2, members, 200, rng, multinomial=True)
        assert record.shots == 200
        assert record.values.sum() == pytest.approx(1.0)


class TestEncodeInput:
    def test_two_channel_layout(self, frame2):
        record = MeasurementRecord((2, 7), [0.25, 0.75])
        vector = encode_input(record, frame2)
        assert vector.shape == (72,)
        assert vector[2] == 0.25 and vector[7] == 0.75
        assert vector[36 + 2] == 1.0 and vector[36 + 7] == 1.0
        assert vector.sum() == pytest.approx(3.0)

    def test_rejects_foreign_indices(self, frame2):
        with pytest.raises(InvalidInputError):
            encode_input(MeasurementRecord((40,), [0.1]), frame2)
