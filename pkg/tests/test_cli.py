import numpy as np
import pytest
from click.testing import CliRunner

from toalab.cli import main, write_csv
from toalab.config import RunConfig, config_items, parse_config, read_config_file, write_manifest
from toalab.errors import ConfigError


def invoke(*args):
    return CliRunner().invoke(main, list(args), catch_exceptions=False)


class TestConfig:
    def test_empty_file(self, tmp_path):
        f = tmp_path / "empty.cfg"
        f.write_text("")
        assert config_items(parse_config(f)) == config_items(RunConfig())

    def test_comments_and_values(self, tmp_path):
        f = tmp_path / "a.cfg"
        f.write_text("# odd run\nexperiment = odd  # trailing\nwidth = 1\nhalf-width = 0.5\n\n")
        cfg = parse_config(f)
        assert cfg.experiment == "odd" and cfg.width == 1.0 and cfg.half_width == 0.5

    def test_unknown_key(self, tmp_path):
        f = tmp_path / "a.cfg"
        f.write_text("colour = blue\n")
        with pytest.raises(ConfigError, match="colour"):
            parse_config(f)

    def test_negative_width(self):
        with pytest.raises(ConfigError, match="width must be positive"):
            parse_config(None, {"width": -1})

    @pytest.mark.parametrize("key, value, field", [
        ("n", 1000, "n"), ("dt", 0, "dt"), ("experiment", "plot", "experiment"),
        ("v0", -1, "v0"), ("center", "nan", "center"), ("theta2", 1.0, "theta2"),
        ("seed", "1.5", "seed"), ("threshold.odd.nope", 1, "threshold.odd.nope"),
    ])
    def test_field_errors(self, key, value, field):
        with pytest.raises(ConfigError, match=field):
            parse_config(None, {key: value})

    def test_bad_line(self, tmp_path):
        f = tmp_path / "a.cfg"
        f.write_text("just words\n")
        with pytest.raises(ConfigError, match=":1:"):
            read_config_file(f)

    def test_thresholds(self):
        cfg = parse_config(None, {"threshold.odd.cap_absorbed": "2e-4"})
        assert cfg.thresholds == {"odd.cap_absorbed": 2e-4}

    def test_resolved_defaults(self):
        odd = RunConfig().resolved()
        assert (odd.n, odd.x_min, odd.packet, odd.v0) == (4096, -40.0, "odd_pair", 0.25)
        step = RunConfig(experiment="theta-step").resolved()
        assert step.n == 16384 and step.packet == "theta_step"

    def test_manifest_round_trip(self, tmp_path):
        cfg = parse_config(None, {"experiment": "evolve", "v0": 0.7, "dt": 0.003,
                                  "threshold.evolve.balance": 1e-7}).resolved()
        write_manifest(cfg, tmp_path / "manifest.txt", version="x", wall_time=1.0)
        again = parse_config(tmp_path / "manifest.txt")
        assert config_items(again) == config_items(cfg)

    def test_unresolved_manifest_round_trip(self, tmp_path):
        cfg = RunConfig()
        write_manifest(cfg, tmp_path / "m.txt", version="x")
        assert config_items(parse_config(tmp_path / "m.txt")) == config_items(cfg)


def test_csv_format(tmp_path):
    write_csv(tmp_path / "a.csv", {"t": np.array([0.1, 1 / 3]), "y": np.array([-2.0, 1e-300])})
    lines = (tmp_path / "a.csv").read_text().splitlines()
    assert lines[0] == "t,y"
    assert lines[1] == "1.0000000000000001e-01,-2.0000000000000000e+00"
    back = np.loadtxt(tmp_path / "a.csv", delimiter=",", skiprows=1)
    assert back[1, 0] == 1 / 3 and back[1, 1] == 1e-300


class TestCommands:
    def test_help_lists_experiments(self):
        out = invoke("--help").output
        for name in ("odd", "symmetric", "theta-step", "covariance", "evolve", "arrival", "run"):
            assert name in out

    def test_evolve_without_screen(self, tmp_path):
        r = invoke("evolve", "--out", str(tmp_path), "--v0", "0", "--t-total", "2", "--dt", "0.01")
        assert r.exit_code == 0
        n = np.loadtxt(tmp_path / "cap_norm.csv", delimiter=",", skiprows=1)[:, 1]
        np.testing.assert_allclose(n, 1.0, atol=1e-8)
        assert {p.name for p in tmp_path.iterdir()} == {"cap_norm.csv", "manifest.txt",
                                                       "summary.txt"}

    def test_run_selector_and_config(self, tmp_path):
        cfg = tmp_path / "c.cfg"
        cfg.write_text("experiment = covariance\nshift = 1\n")
        r = invoke("run", "--config", str(cfg), "--out", str(tmp_path / "o"))
        assert r.exit_code == 0
        summary = (tmp_path / "o" / "summary.txt").read_text()
        assert "residual_h" in summary and "overall: PASS" in summary

    def test_failing_metric_exit_status(self, tmp_path):
        r = invoke("evolve", "--out", str(tmp_path), "--t-total", "1", "--dt", "0.01",
                   "--set", "threshold.evolve.balance=-1")
        assert r.exit_code == 1 and "FAIL balance" in r.output

    def test_bad_flag_value(self, tmp_path):
        r = CliRunner().invoke(main, ["evolve", "--out", str(tmp_path), "--width", "-1"])
        assert r.exit_code == 2 and "width must be positive" in r.output

    def test_bad_set(self, tmp_path):
        r = CliRunner().invoke(main, ["evolve", "--set", "nokey"])
        assert r.exit_code == 2

    def test_model_error_exit(self, tmp_path):
        r = CliRunner().invoke(main, ["evolve", "--out", str(tmp_path), "--width", "0.01"])
        assert r.exit_code == 2 and "error" in r.output

    def test_unwritable_output(self, tmp_path):
        blocker = tmp_path / "file"
        blocker.write_text("")
        r = CliRunner().invoke(main, ["evolve", "--out", str(blocker / "sub"), "--t-total", "0.5",
                                      "--dt", "0.05"])
        assert r.exit_code == 2 and "cannot write" in r.output

    def test_arrival_files(self, tmp_path):
        r = invoke("arrival", "--out", str(tmp_path), "--center", "-10", "--width", "2")
        assert r.exit_code == 0
        names = {p.name for p in tmp_path.iterdir()}
        assert {"theta_density.csv", "povm_density.csv", "summary.txt", "manifest.txt"} <= names
