import json

import numpy as np
import pytest

from utils.constants import DATASET_FORMAT
from utils.dataset import (
    DatasetRecord,
    build_dataset,
    export_counts,
    import_counts,
    load_dataset,
    make_record,
    matrix_to_pairs,
    pairs_to_matrix,
    records_to_arrays,
    simulate_experiment,
    split_path,
    verify_record,
)
from utils.ensembles import STREAM_TRAIN, EnsembleKind, EnsembleSpec, sample_rng
from utils.errors import CountsParseError, DatasetIOError, InvalidInputError
from utils.measurement import nested_chain

SIZES = (4, 9, 36)


@pytest.fixture
def mixture_spec():
    return EnsembleSpec(EnsembleKind.MIXTURE, 2, 21, {"bures_fraction": 0.5})


@pytest.fixture
async def built(mixture_spec, data_dir):
    summary = await build_dataset(mixture_spec, 10, data_dir, sizes=SIZES, test_count=3)
    return summary


class TestMatrixPairs:
    def test_layout(self):
        m = np.array([[1 + 2j, 0], [0, -1j]])
        pairs = matrix_to_pairs(m)
        assert pairs[0][0] == [1.0, 2.0]
        np.testing.assert_array_equal(pairs_to_matrix(pairs), m)

    def test_rejects_flat_matrix(self):
        with pytest.raises(InvalidInputError):
            pairs_to_matrix([[1.0, 0.0], [0.0, 1.0]])


class TestRecords:
    def test_training_record_measures_a_chain_subset(self, mixture_spec, frame2):
        chain = nested_chain(frame2, SIZES, sample_rng(0, 0))
        record = make_record(mixture_spec, 0, 5, STREAM_TRAIN, "train", frame2, chain, shots=100)
        assert len(record.measurement) in SIZES
        assert set(record.measurement.indices) <= set(chain.subset(len(SIZES) - 1))
        assert record.measurement.shots == 100
        assert verify_record(record, frame2)

    def test_test_record_is_exact_and_complete(self, mixture_spec, frame2):
        chain = nested_chain(frame2, SIZES, sample_rng(0, 0))
        record = make_record(mixture_spec, 1, 5, STREAM_TRAIN, "test", frame2, chain)
        assert record.measurement.is_exact
        assert len(record.measurement) == 36

    def test_json_round_trip(self, mixture_spec, frame2):
        chain = nested_chain(frame2, SIZES, sample_rng(0, 0))
        record = make_record(mixture_spec, 2, 5, STREAM_TRAIN, "validation", frame2, chain)
        back = DatasetRecord.from_json(json.loads(json.dumps(record.to_json())))
        np.testing.assert_array_equal(back.target, record.target)
        assert back.labels.entangled == record.labels.entangled
        assert back.to_json() == record.to_json()

    def test_malformed_json(self):
        with pytest.raises(InvalidInputError):
            DatasetRecord.from_json({"id": 1})

    def test_tampered_target_fails_verification(self, mixture_spec, frame2):
        chain = nested_chain(frame2, SIZES, sample_rng(0, 0))
        data = make_record(mixture_spec, 0, 5, STREAM_TRAIN, "test", frame2, chain).to_json()
        data["target"][0] += 0.1
        assert not verify_record(DatasetRecord.from_json(data), frame2)

    def test_records_to_arrays(self, mixture_spec, frame2):
        chain = nested_chain(frame2, SIZES, sample_rng(0, 0))
        records = [make_record(mixture_spec, i, 3, STREAM_TRAIN, "train", frame2, chain) for i in range(3)]
        inputs, targets = records_to_arrays(records, frame2)
        assert inputs.shape == (3, 72)
        assert targets.shape == (3, 36)
        with pytest.raises(InvalidInputError):
            records_to_arrays([], frame2)


class TestBuildDataset:
    async def test_writes_three_splits(self, built, data_dir):
        assert built["counts"] == {"train": 8, "validation": 2, "test": 3}
        for split in ("train", "validation", "test"):
            header = json.loads(split_path(data_dir, split).read_text().splitlines()[0])
            assert header["format"] == DATASET_FORMAT
            assert header["chain"]["sizes"] == list(SIZES)

    async def test_exact_bures_count(self, built):
        assert built["kinds"] == {"bures": 5, "haar_noisy": 5}

    async def test_splits_share_the_chain(self, built, data_dir, frame2):
        train = load_dataset(data_dir, "train")
        test = load_dataset(data_dir, "test")
        assert train.chain == test.chain
        assert test.header["shots"] is None
        assert all(verify_record(r, frame2) for r in train.records + test.records)

    async def test_deterministic_output(self, mixture_spec, tmp_path):
        first, second = tmp_path / "a", tmp_path / "b"
        await build_dataset(mixture_spec, 6, first, sizes=SIZES, test_count=2, shots=50)
        await build_dataset(mixture_spec, 6, second, sizes=SIZES, test_count=2, shots=50)
        for split in ("train", "validation", "test"):
            assert split_path(first, split).read_bytes() == split_path(second, split).read_bytes()

    async def test_rejects_empty_request(self, mixture_spec, data_dir):
        with pytest.raises(InvalidInputError):
            await build_dataset(mixture_spec, 0, data_dir, sizes=SIZES, test_count=0)

    async def test_rejects_unsupported_register(self, data_dir):
        with pytest.raises(InvalidInputError):
            await build_dataset(EnsembleSpec(EnsembleKind.BURES, 4, 0), 2, data_dir)


class TestLoadSplit:
    def test_missing_file(self, data_dir):
        with pytest.raises(DatasetIOError):
            load_dataset(data_dir, "train")

    def test_unknown_split(self, data_dir):
        with pytest.raises(InvalidInputError):
            split_path(data_dir, "holdout")

    async def test_malformed_line_reports_location(self, built, data_dir):
        path = split_path(data_dir, "train")
        lines = path.read_text().splitlines()
        lines[2] = "{not json"
        path.write_text("\n".join(lines) + "\n")
        with pytest.raises(DatasetIOError, match=r"train\.jsonl:3"):
            load_dataset(data_dir, "train")

    async def test_count_mismatch(self, built, data_dir):
        path = split_path(data_dir, "test")
        lines = path.read_text().splitlines()
        path.write_text("\n".join(lines[:-1]) + "\n")
        with pytest.raises(DatasetIOError, match="declares"):
            load_dataset(data_dir, "test")

    def test_foreign_format(self, data_dir):
        split_path(data_dir, "test").write_text('{"format": "other", "version": 1}\n')
        with pytest.raises(DatasetIOError):
            load_dataset(data_dir, "test")


class TestCounts:
    def test_import_basic_rows(self, tmp_path):
        path = tmp_path / "counts.csv"
        path.write_text("projector_id,counts,shots\n0,500,1000\n1,0,1000\n")
        record = import_counts(path)
        assert record.indices == (0, 1)
        np.testing.assert_allclose(record.values, [0.5, 0.0])
        assert record.shots == 1000

    def test_labels_delimiters_and_comments(self, tmp_path):
        path = tmp_path / "counts.txt"
        path.write_text("# coincidence counts\nZ+X-; 30; 120\n\n2\t60\t120  # tab separated\n")
        record = import_counts(path)
        assert record.indices == (2, 3)
        np.testing.assert_allclose(record.values, [0.5, 0.25])

    def test_duplicate_id_names_the_line(self, tmp_path):
        path = tmp_path / "counts.csv"
        path.write_text("projector_id,counts,shots\n4,10,100\n5,20,100\n4,30,100\n")
        with pytest.raises(CountsParseError, match="line 4") as info:
            import_counts(path)
        assert info.value.line == 4

    @pytest.mark.parametrize(
        "row",
        ["0,5", "0,five,10", "0,11,10", "0,1,0", "36,1,10", "Q+Z+,1,10"],
    )
    def test_rejects_bad_rows(self, tmp_path, row):
        path = tmp_path / "counts.csv"
        path.write_text(f"1,1,10\n{row}\n")
        with pytest.raises(CountsParseError) as info:
            import_counts(path)
        assert info.value.line == 2

    def test_mixed_shots_marks_exact(self, tmp_path):
        path = tmp_path / "counts.csv"
        path.write_text("0,5,10\n1,10,20\n")
        record = import_counts(path)
        assert record.shots is None
        np.testing.assert_allclose(record.values, [0.5, 0.5])

    def test_empty_file(self, tmp_path):
        path = tmp_path / "counts.csv"
        path.write_text("projector_id,counts,shots\n")
        with pytest.raises(CountsParseError):
            import_counts(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(DatasetIOError):
            import_counts(tmp_path / "absent.csv")

    def test_export_then_import(self, tmp_path, frame2, phi_minus, rng):
        indices, counts = simulate_experiment(phi_minus, frame2, 400, rng)
        path = tmp_path / "sim.csv"
        export_counts(path, indices, counts, 400)
        record = import_counts(path)
        assert record.indices == tuple(range(36))
        np.testing.assert_allclose(record.values, counts / 400)

    @pytest.mark.parametrize("multinomial", [False, True])
    def test_simulated_counts_respect_support(self, frame2, phi_minus, rng, multinomial):
        _, counts = simulate_experiment(phi_minus, frame2, 400, rng, multinomial=multinomial)
        assert counts[frame2.index_of("Z+Z-")] == 0
        assert np.all((counts >= 0) & (counts <= 400))

    def test_multinomial_counts_fill_each_setting(self, frame2, psi_minus, rng):
        indices, counts = simulate_experiment(psi_minus, frame2, 400, rng, multinomial=True)
        for setting in {frame2.setting(i) for i in indices}:
            assert sum(counts[i] for i in frame2.setting_members(setting)) == 400

    def test_export_writes_labels(self, tmp_path):
        path = tmp_path / "labels.csv"
        export_counts(path, ["Z+Z+", "Z-Z-"], [3, 7], [10, 10])
        assert path.read_text().splitlines()[1] == "Z+Z+,3,10"
        assert import_counts(path).indices == (0, 7)
