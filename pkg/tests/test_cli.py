import json

import numpy as np
import pytest

import eqpbench
from utils.constants import DOWNSTREAM_CSV_COLUMNS, EXIT_IO, EXIT_NUMERICAL, EXIT_USAGE, SWEEP_CSV_COLUMNS
from utils.eqp import Certification, CertificationReport, Verdict
from utils.errors import NumericalFailureError
from utils.helpers import read_csv
from utils.measurement import universal_frame


def _gen(out, count=5, test_count=2, sizes="9,36", *extra):
    argv = ["gen", "--qubits", "2", "--count", str(count), "--test-count", str(test_count),
            "--sizes", sizes, "--seed", "3", "--out", str(out), *extra]
    return eqpbench.main(argv)


@pytest.fixture
def dataset(data_dir, mock_db):
    assert _gen(data_dir) == 0
    return data_dir


@pytest.fixture
def results_store(tmp_path, mocker):
    """Real results store in a temporary file."""
    path = tmp_path / "results.db"
    mocker.patch("utils.database.RESULTS_DB_PATH", str(path))
    return path


class TestParser:
    def test_missing_command(self, capsys):
        assert eqpbench.main([]) == EXIT_USAGE
        assert "error" in capsys.readouterr().err

    def test_unknown_command(self):
        assert eqpbench.main(["lstsq"]) == EXIT_USAGE

    def test_missing_required_option(self):
        assert eqpbench.main(["gen", "--qubits", "2"]) == EXIT_USAGE

    def test_exit_code_mapping(self):
        assert eqpbench.exit_code_for(eqpbench.UsageError("x")) == EXIT_USAGE
        assert eqpbench.exit_code_for(FileNotFoundError("x")) == EXIT_IO
        assert eqpbench.exit_code_for(NumericalFailureError("x")) == EXIT_NUMERICAL
        assert eqpbench.exit_code_for(RuntimeError("x")) == EXIT_NUMERICAL


class TestGen:
    def test_writes_splits(self, data_dir, mock_db, capsys):
        assert _gen(data_dir, 10, 3, "4,9,36", "--param", "bures_fraction=0.5") == 0
        out = capsys.readouterr().out
        assert "train records" in out
        assert "kind bures" in out
        assert sorted(p.name for p in data_dir.iterdir()) == ["test.jsonl", "train.jsonl", "validation.jsonl"]

    def test_unsupported_register(self, data_dir, mock_db):
        assert eqpbench.main(["gen", "--qubits", "4", "--count", "2", "--out", str(data_dir)]) == EXIT_USAGE

    @pytest.mark.parametrize("extra", [["--sizes", "9,4"], ["--shots", "0"], ["--param", "bures_fraction"]])
    def test_invalid_options(self, data_dir, mock_db, extra):
        assert _gen(data_dir, 5, 2, "9,36", *extra) == EXIT_USAGE


class TestStateCommands:
    def test_eqp(self, tmp_path, capsys):
        out = tmp_path / "eqp.json"
        code = eqpbench.main(["eqp", "--state", "phi-", "--restarts", "5", "--out", str(out)])
        assert code == 0
        assert "Canonical frame EQP (36 components)" in capsys.readouterr().out
        data = json.loads(out.read_text())
        assert len(data["canonical"]["coeffs"]) == 36
        assert data["canonical"]["negativity"] > 0

    def test_eqp_rejects_bell_state_on_three_qubits(self):
        assert eqpbench.main(["eqp", "--state", "phi-", "--qubits", "3"]) == EXIT_USAGE

    @pytest.mark.parametrize("p, verdict", [("0.4", "entangled"), ("0.3", "classical-feasible")])
    def test_certify_werner(self, tmp_path, p, verdict):
        out = tmp_path / "cert.json"
        code = eqpbench.main(["certify", "--state", f"werner:{p}", "--restarts", "20", "--out", str(out)])
        assert code == 0
        assert json.loads(out.read_text())["verdict"] == verdict

    def test_certify_numerical_failure(self, mocker):
        mocker.patch("commands.states.certify_state", side_effect=NumericalFailureError("empty dictionary"))
        assert eqpbench.main(["certify", "--state", "psi-"]) == EXIT_NUMERICAL

    def test_certify_undecided_is_numerical(self, mocker, tmp_path):
        certification = Certification(Verdict.UNDECIDED, 2e-3, 1e-6, (), np.zeros(0), 200, -1e-4)
        qp = mocker.MagicMock(negativity=0.0, residual_norm=0.0)
        mocker.patch(
            "commands.states.certify_state",
            return_value=CertificationReport(qp, certification, (0.01,)),
        )
        out = tmp_path / "cert.json"
        assert eqpbench.main(["certify", "--state", "werner:0.33", "--out", str(out)]) == EXIT_NUMERICAL
        summary = json.loads(out.read_text())
        assert summary["verdict"] == "undecided"
        assert summary["witness"] == pytest.approx(-1e-4)


class TestTomographyCommands:
    def test_simulate_then_import(self, tmp_path):
        counts = tmp_path / "counts.csv"
        estimate = tmp_path / "estimate.json"
        assert eqpbench.main(["simulate", "--state", "phi-", "--shots", "10000", "--labels",
                              "--out", str(counts)]) == 0
        assert counts.read_text().splitlines()[0] == "projector_id,counts,shots"

        assert eqpbench.main(["import", "--counts", str(counts), "--reference", "phi-",
                              "--out", str(estimate)]) == 0
        report = json.loads(estimate.read_text())["report"]
        assert report["projectors"] == 36
        assert report["fidelity to reference"] >= 0.99

    def test_simulate_multinomial_per_setting(self, tmp_path):
        counts = tmp_path / "counts.csv"
        assert eqpbench.main(["simulate", "--state", "psi-", "--shots", "500", "--multinomial",
                              "--out", str(counts)]) == 0
        rows = read_csv(counts)
        assert len(rows) == 36
        frame = universal_frame(2)
        by_index = {int(r["projector_id"]): int(r["counts"]) for r in rows}
        for setting in {frame.setting(i) for i in by_index}:
            assert sum(by_index[i] for i in frame.setting_members(setting)) == 500

    def test_import_missing_file(self, tmp_path):
        assert eqpbench.main(["import", "--counts", str(tmp_path / "absent.csv")]) == EXIT_IO

    def test_import_bad_row(self, tmp_path):
        counts = tmp_path / "counts.csv"
        counts.write_text("0,5,10\n0,6,10\n")
        assert eqpbench.main(["import", "--counts", str(counts)]) == EXIT_IO

    def test_tomo_from_record(self, tmp_path, capsys):
        record = tmp_path / "record.json"
        # Z+Z+ and Z-Z- of phi-, each with probability 1/2
        record.write_text(json.dumps({"indices": [0, 7], "values": [0.5, 0.5], "shots": None}))
        code = eqpbench.main(["tomo", "--record", str(record), "--method", "mlme", "--show-eqp"])
        assert code == 0
        assert "Z+Z+" in capsys.readouterr().out

    def test_tomo_malformed_record(self, tmp_path):
        record = tmp_path / "record.json"
        record.write_text(json.dumps({"values": [0.5]}))
        assert eqpbench.main(["tomo", "--record", str(record)]) == EXIT_USAGE


class TestBenchmarkCommands:
    def test_sweep_missing_dataset(self, tmp_path, mock_db):
        code = eqpbench.main(["sweep", "--method", "oracle", "--dataset", str(tmp_path / "nope"),
                              "--out", str(tmp_path / "s.csv")])
        assert code == EXIT_IO

    def test_sweep_writes_csv_and_stores(self, dataset, mock_db, tmp_path):
        out = tmp_path / "sweep.csv"
        dump = tmp_path / "records.csv"
        code = eqpbench.main(["sweep", "--method", "oracle", "--dataset", str(dataset),
                              "--out", str(out), "--dump", str(dump)])
        assert code == 0
        rows = read_csv(out)
        assert tuple(rows[0]) == SWEEP_CSV_COLUMNS
        assert [r["size"] for r in rows] == ["9", "36"]
        assert all(float(r["mean_rmse"]) == pytest.approx(0.0, abs=1e-12) for r in rows)
        assert len(read_csv(dump)) == 4
        mock_db.save_sweep.assert_awaited_once()

    def test_sweep_no_store(self, dataset, mock_db, tmp_path):
        code = eqpbench.main(["sweep", "--method", "oracle", "--dataset", str(dataset),
                              "--out", str(tmp_path / "s.csv"), "--no-store"])
        assert code == 0
        mock_db.save_sweep.assert_not_awaited()

    def test_sweep_net_without_model(self, dataset, mock_db, tmp_path):
        code = eqpbench.main(["sweep", "--method", "net", "--dataset", str(dataset), "--out", str(tmp_path / "s.csv")])
        assert code == EXIT_USAGE

    def test_report_and_clear(self, data_dir, results_store, tmp_path, capsys):
        assert _gen(data_dir) == 0
        for method in ("oracle", "maxlik"):
            code = eqpbench.main(["sweep", "--method", method, "--dataset", str(data_dir), "--max-iter", "50",
                                  "--out", str(tmp_path / f"{method}.csv")])
            assert code == 0
        capsys.readouterr()

        report = tmp_path / "report.txt"
        assert eqpbench.main(["report", "--dataset", str(data_dir), "--out", str(report)]) == 0
        text = report.read_text()
        assert "oracle" in text and "maxlik" in text

        assert eqpbench.main(["report", "--dataset", str(data_dir), "--clear"]) == 0
        assert eqpbench.main(["report", "--dataset", str(data_dir)]) == 0
        assert "No stored sweeps" in capsys.readouterr().out


class TestLearningCommands:
    def test_train_then_eval(self, data_dir, mock_db, tmp_path):
        assert _gen(data_dir, 10, 2) == 0
        model = tmp_path / "models" / "net.npz"
        code = eqpbench.main(["train", "--dataset", str(data_dir), "--out", str(model), "--epochs", "3",
                              "--width", "8", "--blocks", "1", "--batch-size", "4"])
        assert code == 0
        assert model.exists()
        report = json.loads(model.with_name("net.npz.json").read_text())
        assert report["records"] == 8
        assert report["epochs_run"] <= 3

        out = tmp_path / "downstream.csv"
        assert eqpbench.main(["eval", "--dataset", str(data_dir), "--model", str(model), "--out", str(out)]) == 0
        rows = read_csv(out)
        assert tuple(rows[0]) == DOWNSTREAM_CSV_COLUMNS
        assert [r["size"] for r in rows] == ["9", "36"]

    def test_eval_oracle_needs_no_model(self, dataset, tmp_path):
        out = tmp_path / "downstream.csv"
        assert eqpbench.main(["eval", "--dataset", str(dataset), "--method", "oracle", "--out", str(out)]) == 0
        assert all(float(r["purity_rmse"]) == pytest.approx(0.0, abs=1e-12) for r in read_csv(out))

    def test_train_missing_dataset(self, tmp_path):
        assert eqpbench.main(["train", "--dataset", str(tmp_path), "--out", str(tmp_path / "m.npz")]) == EXIT_IO
