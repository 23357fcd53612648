"""Binary dumps, config validation, CLI dispatch, determinism."""

import json
import subprocess
import sys

import numpy as np
import pytest

from quintlab.cli import (
    ExperimentConfig,
    ValidationError,
    emit_plotdata,
    main,
    run_experiment,
)
from quintlab.grids import GridSpec, TorusField
from quintlab.io import dump_field, dump_state, load_field, load_state, write_csv
from quintlab.manybody import BosonicState, ManyBodyConfig


class TestFieldDump:
    @pytest.mark.parametrize("layout", ["spectral", "physical"])
    @pytest.mark.parametrize("d,n", [(1, 16), (3, 8)])
    def test_roundtrip(self, tmp_path, layout, d, n):
        rng = np.random.default_rng(0)
        f = TorusField.random_band_limited(GridSpec(d, n), n // 2, rng)
        p = tmp_path / "f.qlf"
        dump_field(f, p, layout)
        g = load_field(p)
        # complex64 storage: single precision round trip
        assert np.abs(g.coefficients - f.coefficients).max() <= 1e-6 * np.abs(
            f.coefficients
        ).max()

    def test_header_contents(self, tmp_path):
        f = TorusField.constant(GridSpec(2, 8))
        p = tmp_path / "f.qlf"
        dump_field(f, p, "spectral")
        blob = p.read_bytes()
        assert blob[:8] == (2).to_bytes(4, "little") + (8).to_bytes(4, "little")
        assert blob[8:16].rstrip(b"\0") == b"spectral"
        assert len(blob) == 16 + 64 * 8  # n^d complex64 values

    def test_frequency_order_is_ascending(self, tmp_path):
        g = GridSpec(1, 8)
        f = TorusField.plane_wave(g, -3, 2.0)
        p = tmp_path / "f.qlf"
        dump_field(f, p, "spectral")
        data = np.frombuffer(p.read_bytes()[16:], dtype=np.complex64)
        # frequencies run -3..4, so xi=-3 sits at index 0
        assert abs(data[0] - 2.0) <= 1e-6
        assert np.abs(data[1:]).max() == 0.0


class TestStateDump:
    def test_roundtrip(self, tmp_path):
        cfg = ManyBodyConfig(GridSpec(1, 8), 3, 0.05)
        rng = np.random.default_rng(1)
        psi = BosonicState.random_symmetric(cfg, rng, band=2)
        p = tmp_path / "s.qls"
        dump_state(psi, p)
        back = load_state(cfg, p)
        assert np.abs(back.amps - psi.amps).max() <= 1e-6 * np.abs(psi.amps).max()

    def test_geometry_mismatch_rejected(self, tmp_path):
        cfg = ManyBodyConfig(GridSpec(1, 8), 2, 0.0)
        psi = BosonicState.factorized(cfg, TorusField.constant(GridSpec(1, 8)))
        p = tmp_path / "s.qls"
        dump_state(psi, p)
        other = ManyBodyConfig(GridSpec(1, 8), 3, 0.0)
        with pytest.raises(ValueError):
            load_state(other, p)


class TestConfigValidation:
    def test_unknown_keys_rejected_with_full_list(self):
        raw = {
            "kind": "nls-run",
            "params": {
                "d": 1, "n": 8, "b0": 1.0, "dt": 0.01, "T": 0.1,
                "initial": {"kind": "constant"},
                "bogus1": 1, "bogus2": 2,
            },
        }
        with pytest.raises(ValidationError) as exc:
            ExperimentConfig.from_dict(raw)
        joined = " ".join(exc.value.errors)
        assert "bogus1" in joined and "bogus2" in joined

    def test_missing_required_listed(self):
        raw = {"kind": "nls-run", "params": {"d": 1}}
        with pytest.raises(ValidationError) as exc:
            ExperimentConfig.from_dict(raw)
        missing = [e for e in exc.value.errors if "required" in e]
        assert len(missing) >= 4

    def test_precondition_values_checked(self):
        raw = {
            "kind": "nls-run",
            "params": {"d": 1, "n": 7, "b0": -1.0, "dt": 0.01, "T": 0.1,
                       "initial": {"kind": "constant"}},
        }
        with pytest.raises(ValidationError) as exc:
            ExperimentConfig.from_dict(raw)
        joined = " ".join(exc.value.errors)
        assert "params.n" in joined and "params.b0" in joined

    def test_round_trip(self):
        raw = {
            "kind": "couplings",
            "seed": 5,
            "params": {"k": 3},
        }
        cfg = ExperimentConfig.from_dict(raw)
        assert ExperimentConfig.from_dict(cfg.to_dict()).to_dict() == cfg.to_dict()


class TestRunExperiment:
    def test_couplings_k3_map_count(self, tmp_path):
        cfg = ExperimentConfig.from_dict({"kind": "couplings", "params": {"k": 3}})
        report = run_experiment(cfg, tmp_path)
        payload = json.loads((tmp_path / "couplings.json").read_text())
        assert payload["map_count"] == 15
        assert report.passed

    def test_nls_t0_single_snapshot(self, tmp_path):
        cfg = ExperimentConfig.from_dict(
            {
                "kind": "nls-run",
                "params": {"d": 1, "n": 8, "b0": 1.0, "dt": 0.01, "T": 0.0,
                           "initial": {"kind": "constant"}},
            }
        )
        run_experiment(cfg, tmp_path)
        rows = (tmp_path / "timeseries.csv").read_text().strip().split("\n")
        assert len(rows) == 2  # header plus the single t=0 snapshot

    def test_determinism_byte_identical(self, tmp_path):
        raw = {
            "kind": "nls-run",
            "seed": 11,
            "params": {"d": 1, "n": 16, "b0": 1.0, "dt": 0.01, "T": 0.1,
                       "snapshot_every": 2,
                       "initial": {"kind": "random_band", "band": 3, "scale": 1.0}},
        }
        out_a, out_b = tmp_path / "a", tmp_path / "b"
        run_experiment(ExperimentConfig.from_dict(raw), out_a)
        run_experiment(ExperimentConfig.from_dict(raw), out_b)
        assert (out_a / "timeseries.csv").read_bytes() == (out_b / "timeseries.csv").read_bytes()

    def test_partial_outputs_removed_on_failure(self, tmp_path):
        cfg = ExperimentConfig.from_dict(
            {
                "kind": "nls-run",
                "params": {"d": 1, "n": 8, "b0": 1.0, "dt": 0.01, "T": 0.105,
                           "initial": {"kind": "constant"}},
            }
        )
        with pytest.raises(ValueError):
            run_experiment(cfg, tmp_path)  # T not a multiple of dt
        assert not (tmp_path / "timeseries.csv").exists()

    def test_emit_plotdata(self, tmp_path):
        cfg = ExperimentConfig.from_dict(
            {"kind": "hufl",
             "params": {"d": 1, "n": 16, "initial": {"kind": "random_band", "band": 3},
                        "M": 4, "eps": 0.9, "ks": [1, 2]}}
        )
        report = run_experiment(cfg, tmp_path)
        written = emit_plotdata(report)
        assert any(w.endswith("hufl.dat") for w in written)
        assert any(w.endswith("plot_stub.py") for w in written)

    def test_empty_table_is_header_only(self, tmp_path):
        write_csv(tmp_path / "empty.csv", ["a", "b"], [])
        assert (tmp_path / "empty.csv").read_text() == "a,b\n"

    def test_state_file_initial(self, tmp_path):
        # dump a state via one run, feed it back as the initial condition
        base = {
            "kind": "manybody-run",
            "seed": 5,
            "params": {"d": 1, "n": 8, "N": 2, "beta": 0.05, "T": 0.0,
                       "initial": {"kind": "random_band", "band": 2, "scale": 1.0},
                       "dump_state": True},
        }
        out1 = tmp_path / "first"
        run_experiment(ExperimentConfig.from_dict(base), out1)
        follow = {
            "kind": "manybody-run",
            "params": {"d": 1, "n": 8, "N": 2, "beta": 0.05, "T": 0.1,
                       "initial": {"kind": "file", "path": str(out1 / "state.qlf")},
                       "norm_tol": 1e-5},
        }
        out2 = tmp_path / "second"
        report = run_experiment(ExperimentConfig.from_dict(follow), out2)
        assert (out2 / "manybody.json").exists()
        assert report.checks["norm_preserved"]

    def test_field_file_initial(self, tmp_path):
        f = TorusField.plane_wave(GridSpec(1, 8), 2, 0.5)
        dump_field(f, tmp_path / "phi.qlf")
        raw = {
            "kind": "nls-run",
            "params": {"d": 1, "n": 8, "b0": 0.0, "dt": 0.01, "T": 0.05,
                       "initial": {"kind": "file", "path": str(tmp_path / "phi.qlf")},
                       "mass_tol": 1e-5},
        }
        report = run_experiment(ExperimentConfig.from_dict(raw), tmp_path)
        assert report.checks["mass_conserved"]


class TestMainEntry:
    def test_couplings_flag_form(self, tmp_path, capsys):
        rc = main(["couplings", "--k", "2", "--out", str(tmp_path)])
        assert rc == 0
        assert json.loads((tmp_path / "couplings.json").read_text())["map_count"] == 3

    def test_validation_exit_code(self, tmp_path, capsys):
        bad = tmp_path / "bad.json"
        bad.write_text(json.dumps({"kind": "nls-run", "params": {"d": 9}}))
        rc = main(["nls-run", "--config", str(bad), "--out", str(tmp_path)])
        assert rc == 2

    def test_kind_mismatch_rejected(self, tmp_path):
        cfg = tmp_path / "c.json"
        cfg.write_text(json.dumps({"kind": "couplings", "params": {"k": 2}}))
        rc = main(["nls-run", "--config", str(cfg), "--out", str(tmp_path)])
        assert rc == 2

    def test_console_script_runs(self, tmp_path):
        proc = subprocess.run(
            [sys.executable, "-m", "quintlab.cli", "couplings", "--k", "2",
             "--out", str(tmp_path)],
            capture_output=True, text=True,
        )
        assert proc.returncode == 0
        assert "PASS" in proc.stdout
