import csv
import math

import numpy as np
import pytest

from nncda import cli
from nncda import config as cfgmod
from nncda.config import ConfigError
from nncda.diagnostics import ErrorSeries
from nncda.spectral import read_checkpoint

SMALL = [
    "grid.n=32",
    "physics.nu=0.05",
    "physics.target_G=200.0",
    "physics.forcing.k_min=2",
    "physics.forcing.k_max=6",
    "da.interpolant.m=4",
    "da.mu=2.0",
    "da.beta=2.0",
    "time.dt=0.005",
    "time.t_spinup=1.0",
    "time.t_end=0.5",
    "time.sample_every=10",
]


def small_args(*extra):
    args = []
    for s in SMALL + list(extra):
        args += ["--set", s]
    return args


def write_series(path, t, err):
    s = ErrorSeries()
    for ti, e in zip(t, err):
        s.append(ti, e, e, e, 0.0, 1.0, 1.0)
    s.to_csv(path)


class TestConfig:
    def test_toml_roundtrip(self, tmp_path):
        cfg = cfgmod.preset("desk").with_overrides(["da.mu=3.5", "io.output_dir='x'"])
        cfg.save(tmp_path / "c.toml")
        assert cfgmod.load(tmp_path / "c.toml").data == cfg.data

    def test_full_scale_preset_constants(self):
        p = cfgmod.preset("paper")
        assert p["grid"]["n"] == 1024 and p["physics"]["nu"] == 0.008
        assert p["physics"]["target_G"] == 250000.0
        assert p["da"]["interpolant"]["m"] == 32
        assert p["time"]["dt"] == 3.125e-4 and p["time"]["t_spinup"] == 240.0

    def test_overrides_typed(self):
        cfg = cfgmod.preset("desk").with_overrides(["grid.n=256", "da.gamma=0.5", "da.mode=linear"])
        assert cfg["grid"]["n"] == 256 and isinstance(cfg["grid"]["n"], int)
        assert cfg["da"]["gamma"] == 0.5 and cfg["da"]["mode"] == "linear"

    def test_parse_value(self):
        assert cfgmod.parse_value("3") == 3
        assert cfgmod.parse_value("1e-3") == 1e-3
        assert cfgmod.parse_value("true") is True
        assert cfgmod.parse_value("hello") == "hello"

    @pytest.mark.parametrize("bad", [
        {"grid": {"n": 33}},
        {"grid": {"bogus": 1}},
        {"physics": {"nu": -1.0}},
        {"da": {"mode": "quadratic"}},
        {"da": {"gamma": 1.5}},
        {"da": {"interpolant": {"kind": "fourier_projection", "m": 4, "h": 0.5}}},
    ])
    def test_invalid_configs(self, tmp_path, bad):
        import tomli_w
        p = tmp_path / "bad.toml"
        p.write_bytes(tomli_w.dumps(bad).encode())
        with pytest.raises(ConfigError):
            cfgmod.load(p)

    def test_unknown_override_key(self):
        with pytest.raises(ConfigError):
            cfgmod.preset("desk").with_overrides(["nope.x=1"])

    def test_env_output_root(self, tmp_path, monkeypatch):
        monkeypatch.setenv(cfgmod.OUTPUT_ROOT_ENV, str(tmp_path))
        assert cfgmod.preset("desk").output_dir() == tmp_path / "desk"
        monkeypatch.delenv(cfgmod.OUTPUT_ROOT_ENV)
        assert str(cfgmod.preset("desk").output_dir()) == "desk"


class TestMainExitCodes:
    def test_unknown_key_exit_2(self, tmp_path, capsys):
        p = tmp_path / "c.toml"
        p.write_text("[grid]\nfoo = 1\n")
        assert cli.main(["check-params", "--config", str(p)]) == 2
        assert "foo" in capsys.readouterr().err

    def test_missing_file_exit_2(self, tmp_path):
        assert cli.main(["check-params", "--config", str(tmp_path / "none.toml")]) == 2

    def test_config_and_preset_conflict(self, tmp_path):
        p = tmp_path / "c.toml"
        p.write_text("")
        assert cli.main(["check-params", "--config", str(p), "--preset", "desk"]) == 2


class TestCheckParams:
    def test_desk_table_has_failures(self, tmp_path, capsys):
        code = cli.main(["check-params", "--preset", "desk", "--csv", str(tmp_path / "c.csv")])
        assert code == 0
        out = capsys.readouterr().out
        assert out.startswith("certification conditional on c = 1")
        with open(tmp_path / "c.csv") as fh:
            rows = list(csv.DictReader(fh))
        assert list(rows[0]) == ["condition", "required", "actual", "satisfied"]
        assert any(r["satisfied"] == "false" for r in rows)

    def test_strict_exit_4(self):
        assert cli.main(["check-params", "--preset", "desk", "--strict"]) == 4

    def test_mu_min_grows_with_G(self):
        def mu_min(G):
            rows, _ = cli.cmd_check_params(cfgmod.preset("desk").with_overrides([f"physics.target_G={G}"]))
            return next(r[1] for r in rows if r[0].startswith("H: mu >"))

        vals = [mu_min(G) for G in (10.0, 100.0, 1000.0)]
        assert vals[0] < vals[1] < vals[2]

    def test_satisfiable_setting(self):
        # tiny forcing, large gains, fine observations
        cfg = cfgmod.preset("desk").with_overrides(
            ["physics.target_G=0.5", "physics.nu=1.0", "da.mu=50.0", "da.beta=50.0", "da.gamma=0.5", "da.interpolant.m=60"])
        rows, _ = cli.cmd_check_params(cfg)
        h_rows = [r for r in rows if r[0].startswith(("H: mu", "H: beta", "H: h < sqrt(nu/(2"))]
        assert len(h_rows) == 3 and all(r[3] for r in h_rows)


class TestAnalyze:
    def test_synthetic_three_regime(self, tmp_path, capsys):
        t = np.linspace(0, 16, 1601)
        y = np.where(t < 4, -t, np.where(t < 8, -4 - (t - 4) - (t - 4) ** 2, np.where(t < 12, -24 - 9 * (t - 8), -60.0)))
        write_series(tmp_path / "s.csv", t, np.exp(y))
        assert cli.main(["analyze", str(tmp_path / "s.csv")]) == 0
        out = capsys.readouterr().out.splitlines()
        assert [line.split()[0] for line in out] == ["exponential", "super_exponential", "exponential", "floor"]
        assert all("max deviation from fit" in line for line in out)
        assert (tmp_path / "s_regimes.csv").exists()

    def test_constant_series_is_floor(self, tmp_path):
        t = np.linspace(0, 1, 50)
        write_series(tmp_path / "c.csv", t, np.full(50, 1e-20))
        report, _ = cli.cmd_analyze(tmp_path / "c.csv")
        assert report.kinds == ["floor"]

    def test_malformed_exit_2(self, tmp_path):
        (tmp_path / "m.csv").write_text("t,err_H2\n0,1\n")
        assert cli.main(["analyze", str(tmp_path / "m.csv")]) == 2


@pytest.fixture(scope="module")
def spun(tmp_path_factory):
    out = tmp_path_factory.mktemp("spin")
    assert cli.main(["spinup", "--output-dir", str(out)] + small_args()) == 0
    return out


class TestSpinupAndRun:
    def test_spinup_outputs(self, spun):
        psi, t = read_checkpoint(spun / "reference.nncda")
        assert psi.grid.n == 32 and t == pytest.approx(1.0)
        assert (spun / "energy.csv").read_text().startswith("t,")
        assert (spun / "spectrum.csv").read_text().startswith("shell,energy\n")
        assert cfgmod.load(spun / "config.toml")["grid"]["n"] == 32

    def test_run_outputs(self, spun, tmp_path):
        out = tmp_path / "run"
        args = ["run", "--reference", str(spun / "reference.nncda"), "--output-dir", str(out)] + small_args(
            "io.checkpoint_every=50")
        assert cli.main(args) == 0
        s = ErrorSeries.from_csv(out / "error_series.csv")
        assert s.times[0] == pytest.approx(1.0) and s.times[-1] == pytest.approx(1.5)
        assert s.err_H2[-1] < s.err_H2[0]
        v, _ = read_checkpoint(out / "v_final.nncda")
        assert np.isfinite(v.coeffs).all()
        assert sorted(p.name for p in (out / "checkpoints").iterdir())[0].startswith("u_")

    def test_grid_mismatch_exit_2(self, spun, tmp_path):
        args = ["run", "--reference", str(spun / "reference.nncda"), "--output-dir", str(tmp_path)] + small_args(
            "grid.n=64")
        assert cli.main(args) == 2

    def test_env_output_root(self, spun, tmp_path, monkeypatch):
        monkeypatch.setenv(cfgmod.OUTPUT_ROOT_ENV, str(tmp_path))
        args = ["run", "--reference", str(spun / "reference.nncda")] + small_args("io.output_dir='envrun'")
        assert cli.main(args) == 0
        assert (tmp_path / "envrun" / "error_series.csv").exists()

    def test_blow_up_exit_3(self, tmp_path):
        args = ["spinup", "--output-dir", str(tmp_path)] + small_args("time.dt=1.0", "time.t_spinup=50.0", "time.sample_every=1",
                                                                     "physics.nu=1e-3", "physics.target_G=1e8")
        assert cli.main(args) == 3


class TestCfl:
    def test_single_mode(self):
        from nncda.spectral import SpectralField, make_grid
        g = make_grid(16, 2 * math.pi)
        psi = SpectralField.single_mode(g, 1, 0, 0.5)  # psi = cos x, max |u| = 1
        assert cli.cfl_number(psi, 0.1) == pytest.approx(0.1 * 16 / (2 * math.pi), rel=1e-12)
