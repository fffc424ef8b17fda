import numpy as np
import pytest

from telesim import cli
from telesim import tomography as tm
from telesim.qstate import MeasurementBasis

IDEAL_FLAGS = [
    "--g1", "0.4", "--g2", "0.4", "--xi", "1.0",
    "--eff_d1", "1", "--eff_d2", "1", "--eff_d3", "1", "--eff_d4", "1",
    "--eff_d5", "1", "--eff_d6", "1", "--eff_trig", "1",
    "--dark_d1", "0", "--dark_d2", "0", "--dark_d3", "0", "--dark_d4", "0",
    "--dark_d5", "0", "--dark_d6", "0", "--dark_trig", "0",
]


def run_cli(*args):
    return cli.main(list(args))


class TestManifestParsing:
    def test_file_plus_overrides(self, tmp_path):
        mf = tmp_path / "run.cfg"
        mf.write_text("pulses = 1000\nseed = 4   # inline comment\n\n# comment\n")
        values = cli.parse_manifest_file(mf)
        assert values == {"pulses": "1000", "seed": "4"}

    def test_bad_line_rejected(self, tmp_path):
        mf = tmp_path / "run.cfg"
        mf.write_text("pulses 1000\n")
        with pytest.raises(Exception):
            cli.parse_manifest_file(mf)

    def test_unknown_key_exit_code(self, tmp_path):
        code = run_cli("simulate", "-o", str(tmp_path), "--no_such_key", "1")
        assert code == 2

    def test_missing_manifest_exit_code(self, tmp_path):
        code = run_cli("simulate", "-m", str(tmp_path / "none.cfg"),
                       "-o", str(tmp_path))
        assert code == 2


class TestSimulate:
    def test_ideal_six_state_run(self, tmp_path):
        code = run_cli("simulate", "-o", str(tmp_path), *IDEAL_FLAGS,
                       "--pulses", "150000", "--seed", "11", "--figures", "false")
        assert code == 0
        summary = cli.load_json_report(tmp_path / "summary.json")
        assert summary["average_fidelity"] >= 0.99
        assert set(summary["states"]) == set("HVPMRL")
        header = (tmp_path / "counts.csv").read_text().splitlines()[0]
        assert header.startswith("# telesim")
        assert "seed=11" in header and "config=" in header

    def test_single_state_run_with_tags(self, tmp_path):
        code = run_cli("simulate", "-o", str(tmp_path), *IDEAL_FLAGS,
                       "--pulses", "60000", "--charlie_state", "R",
                       "--emit_tags", "true", "--figures", "false")
        assert code == 0
        summary = cli.load_json_report(tmp_path / "summary.json")
        assert list(summary["states"]) == ["R"]
        assert summary["states"]["R"]["basis"] == "RL"
        from telesim.experiment import read_tags_qtt
        tags = read_tags_qtt(tmp_path / "tags.qtt")
        assert len(tags) > 0

    def test_zero_pulses_exit_2(self, tmp_path):
        code = run_cli("simulate", "-o", str(tmp_path), "--pulses", "0")
        assert code == 2
        assert not (tmp_path / "counts.csv").exists()

    def test_byte_identical_rerun(self, tmp_path):
        for sub in ("a", "b"):
            code = run_cli("simulate", "-o", str(tmp_path / sub), *IDEAL_FLAGS,
                           "--pulses", "50000", "--seed", "3",
                           "--figures", "false")
            assert code == 0
        assert (tmp_path / "a" / "counts.csv").read_bytes() == \
            (tmp_path / "b" / "counts.csv").read_bytes()


class TestTomoCommands:
    def test_tomo_state(self, tmp_path):
        code = run_cli("tomo-state", "-o", str(tmp_path), *IDEAL_FLAGS,
                       "--pulses", "100000", "--charlie_state", "L",
                       "--figures", "false")
        assert code == 0
        report = cli.load_json_report(tmp_path / "state.json")
        assert report["fidelity_to_ideal"] > 0.99
        counts = tm.read_counts_csv(tmp_path / "counts.csv")
        assert sum(sum(v) for v in counts.counts.values()) > 0

    def test_tomo_process_identity_synthetic(self, tmp_path):
        # exact counts for the identity channel, no simulation noise
        n = 100_000
        expected = {
            "H": {"HV": (n, 0), "PM": (n // 2, n // 2), "RL": (n // 2, n // 2)},
            "V": {"HV": (0, n), "PM": (n // 2, n // 2), "RL": (n // 2, n // 2)},
            "P": {"HV": (n // 2, n // 2), "PM": (n, 0), "RL": (n // 2, n // 2)},
            "R": {"HV": (n // 2, n // 2), "PM": (n // 2, n // 2), "RL": (n, 0)},
        }
        args = ["tomo-process", "-o", str(tmp_path / "out"), "--figures", "false"]
        for label, per_basis in expected.items():
            counts = tm.TomographyCounts(
                {MeasurementBasis(b): v for b, v in per_basis.items()})
            path = tmp_path / f"counts_{label}.csv"
            tm.write_counts_csv(path, counts)
            args += [f"--probe_{label.lower()}", str(path)]
        assert run_cli(*args) == 0
        report = cli.load_json_report(tmp_path / "out" / "chi.json")
        assert report["process_fidelity_vs_identity"] >= 0.999
        cloud = cli.read_table_csv(tmp_path / "out" / "ellipsoid.csv")
        assert cloud.shape[0] == 1024

    def test_missing_probe_names_the_probe(self, tmp_path, capsys):
        code = run_cli("tomo-process", "-o", str(tmp_path))
        assert code == 2
        err = capsys.readouterr().err
        assert "H" in err and "probe" in err


class TestSweepsAndModel:
    def test_sweep_attenuation_contract_columns(self, tmp_path):
        code = run_cli("sweep-attenuation", "-o", str(tmp_path), *IDEAL_FLAGS,
                       "--pulses", "400000", "--sweep_start_db", "0",
                       "--sweep_stop_db", "20", "--sweep_step_db", "10",
                       "--seed", "2", "--figures", "false")
        assert code == 0
        lines = (tmp_path / "attenuation_sweep.csv").read_text().splitlines()
        assert lines[1].startswith("attenuation_db,rate_hz,visibility,snr")
        rows = cli.read_table_csv(tmp_path / "attenuation_sweep.csv")
        assert rows.shape[0] == 3
        assert np.all(np.diff(rows["rate_hz"]) < 0)

    def test_sweep_window_csv(self, tmp_path):
        code = run_cli("sweep-window", "-o", str(tmp_path), *IDEAL_FLAGS,
                       "--pulses", "200000", "--window_start_ns", "1",
                       "--window_stop_ns", "5", "--window_step_ns", "2",
                       "--seed", "2", "--figures", "false")
        assert code == 0
        lines = (tmp_path / "window_sweep.csv").read_text().splitlines()
        assert lines[1].startswith("tau_ps,n_events,visibility,sigma_violation")
        rows = cli.read_table_csv(tmp_path / "window_sweep.csv")
        assert list(rows["tau_ps"]) == [1000, 3000, 5000]
        assert np.all(np.diff(rows["n_events"]) >= 0)

    def test_predict_constant_visibility_without_darks(self, tmp_path):
        code = run_cli("predict", "-o", str(tmp_path), "--p_bsm_hz", "1000",
                       "--v0", "0.9", "--n_hz", "0", "--sweep_start_db", "0",
                       "--sweep_stop_db", "40", "--sweep_step_db", "10",
                       "--figures", "false")
        assert code == 0
        rows = cli.read_table_csv(tmp_path / "predict.csv")
        assert np.allclose(rows["visibility"], 0.9, atol=1e-12)

    def test_fit_round_trip(self, tmp_path):
        code = run_cli("predict", "-o", str(tmp_path), "--p_bsm_hz", "750",
                       "--v0", "0.88", "--n_hz", "400", "--tau_s", "3e-9",
                       "--sweep_start_db", "0", "--sweep_stop_db", "60",
                       "--sweep_step_db", "5", "--figures", "false")
        assert code == 0
        code = run_cli("fit", "-o", str(tmp_path / "fit"),
                       "--sweep_csv", str(tmp_path / "predict.csv"),
                       "--n_hz", "400", "--tau_s", "3e-9", "--figures", "false")
        assert code == 0
        report = cli.load_json_report(tmp_path / "fit" / "fit.json")
        assert not report["flagged"]
        assert report["estimates"]["p_bsm_hz"] == pytest.approx(750, rel=1e-4)
        assert report["estimates"]["v0"] == pytest.approx(0.88, abs=1e-4)

    def test_fit_missing_file_exit_2(self, tmp_path):
        assert run_cli("fit", "-o", str(tmp_path),
                       "--sweep_csv", str(tmp_path / "no.csv")) == 2


class TestFigures:
    def test_figures_rendered_alongside_csv(self, tmp_path):
        code = run_cli("simulate", "-o", str(tmp_path), *IDEAL_FLAGS,
                       "--pulses", "50000", "--seed", "1",
                       "--charlie_state", "H")
        assert code == 0
        assert (tmp_path / "fig_state_fidelity.png").exists()
        assert (tmp_path / "counts.csv").exists()
