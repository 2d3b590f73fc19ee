"""End-to-end runs through the command line entry point (small grids)."""
import json

import pytest

from calmedns.cli import EXIT_CONFIG, EXIT_MONITOR, EXIT_OK, EXIT_RUNTIME, build_parser, main
from calmedns.io import read_csv, load_checkpoint

SMALL = """
grid.n = 8
stepper.span = [0.0, 0.5]
initial.norm = 2.0
"""


def _run(tmp_path, sub, text, name="out", extra=()):
    cfg = tmp_path / f"{name}.toml"
    cfg.write_text(text)
    out = tmp_path / name
    return main([sub, "--config", str(cfg), "--out", str(out), *extra]), out


def _files(d):
    return {p.name: p.read_bytes() for p in sorted(d.iterdir())}


class TestSimulate:
    def test_outputs_and_hash_everywhere(self, tmp_path):
        code, out = _run(tmp_path, "simulate", SMALL + "output.snapshots = true\n")
        assert code == EXIT_OK
        summary = json.loads((out / "summary.json").read_text())
        h = summary["config_hash"]
        assert summary["passed"] and summary["monitors"]["gronwall"]
        meta, cols = read_csv(out / "simulate.csv")
        assert meta["config_hash"] == h and cols["t"][-1] == 0.5
        assert json.loads((out / "ledger.json").read_text())["config_hash"] == h
        assert h in (out / "ledger.md").read_text()
        state, hdr = load_checkpoint(out / "final.cnsf", h)
        assert hdr["time"] == 0.5

    def test_byte_identical_reruns(self, tmp_path):
        _, a = _run(tmp_path, "simulate", SMALL, "a")
        _, b = _run(tmp_path, "simulate", SMALL, "b")
        assert _files(a) == _files(b)

    def test_seed_override(self, tmp_path):
        _, a = _run(tmp_path, "simulate", SMALL, "a", ("--seed", "3"))
        s = json.loads((a / "summary.json").read_text())
        assert s["config"]["noise.seed"] == 3 and s["seeds"] == [3]

    def test_stokes_hook(self, tmp_path):
        text = SMALL + 'model.nonlinear = false\nh.amplitude = 0.0\n'
        code, out = _run(tmp_path, "simulate", text)
        s = json.loads((out / "summary.json").read_text())
        assert code == EXIT_OK and s["summary"]["stokes_relative_error"] < 1e-9


class TestOtherExperiments:
    def test_validate_flags_a3(self, tmp_path):
        code, out = _run(tmp_path, "validate", "grid.n = 8\ncalming.eps = 1.0\n")
        assert code == EXIT_MONITOR
        assert json.loads((out / "summary.json").read_text())["monitors"]["a3"] is False

    def test_verify_calming(self, tmp_path):
        code, out = _run(tmp_path, "verify-calming", 'experiment.variants = ["z1", "z4"]\n'
                                                     "experiment.eps_list = [1.0]\nexperiment.samples = 10000\n")
        assert code == EXIT_OK
        meta, cols = read_csv(out / "verify_calming.csv")
        assert cols["variant"] == ["z1", "z4"]

    def test_pullback(self, tmp_path):
        text = ("grid.n = 8\nnoise.horizon = 3.0\nexperiment.horizons = [1.0, 2.0]\n"
                "experiment.t_pairs = [[1.0, 2.0]]\nexperiment.initial_scales = [1.0]\n")
        code, out = _run(tmp_path, "pullback", text)
        assert code == EXIT_OK
        _, cols = read_csv(out / "pullback.csv")
        assert list(cols["t"]) == [1.0, 2.0]


class TestErrors:
    def test_config_error_exit_and_report(self, tmp_path, capsys):
        code, out = _run(tmp_path, "simulate", "model.nu = -1\nbogus = 1\n")
        assert code == EXIT_CONFIG
        errs = json.loads((out / "config_error.json").read_text())["errors"]
        assert len(errs) == 2
        assert "bogus: unknown key" in capsys.readouterr().err

    def test_runtime_error_exit(self, tmp_path):
        text = SMALL + 'h.mode = "missing.cnsf"\n'
        with pytest.raises(FileNotFoundError):
            _run(tmp_path, "simulate", text)

    def test_bad_checkpoint_h(self, tmp_path):
        bad = tmp_path / "h.cnsf"
        bad.write_bytes(b"NOPE" + bytes(20))
        code, _ = _run(tmp_path, "simulate", SMALL + f'h.mode = "{bad}"\n')
        assert code == EXIT_RUNTIME

    def test_parser(self):
        p = build_parser()
        with pytest.raises(SystemExit):
            p.parse_args(["nonsense"])
        a = p.parse_args(["absorb", "--seed", "2"])
        assert a.experiment == "absorb" and a.seed == 2
