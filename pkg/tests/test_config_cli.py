import csv
import json

import numpy as np
import pytest

from momentlyap.analysis import RATE_CSV_FIELDS
from momentlyap.cli import BOUNDS_CSV_FIELDS, main
from momentlyap.config import ConfigError, ExperimentConfig, apply_overrides, load_config, parse_config, parse_list
from momentlyap.fkmc import MC_CSV_FIELDS
from momentlyap.spectral import SPECTRAL_CSV_FIELDS

GOOD = """
# OU benchmark
[model]
model = ou_quadratic
a = 1
sigma = 1

[mc]
t = 2
n_paths = 400
n_steps = 200
p_grid = -0.5, 0, 0.25

[spectral]
n = 300
p_grid = linspace(-0.5, 0.25, 4)

[output]
formats = csv
"""


def test_parse_list():
    assert parse_list("1, 2 3") == [1.0, 2.0, 3.0]
    assert parse_list("linspace(0, 1, 3)") == [0.0, 0.5, 1.0]
    assert parse_list("geomspace(1, 100, 3)") == pytest.approx([1.0, 10.0, 100.0])


def test_parse_good_config():
    cfg = parse_config(GOOD, "good.ini")
    assert cfg.model["model"] == "ou_quadratic"
    assert cfg.mc.n_paths == 400 and cfg.mc.p_grid == [-0.5, 0.0, 0.25]
    assert cfg.spectral.p_grid == pytest.approx([-0.5, -0.25, 0.0, 0.25])
    assert cfg.output.formats == ["csv"]
    assert cfg.bounds.family == "exp_quadratic"


@pytest.mark.parametrize("text,line,fragment", [
    ("[mc]\nt = 1\n", 1, "missing required section [model]"),
    ("[model]\nmodel = ou_quadratic\n[mc]\nt = -1\n", 4, "mc.t must be positive"),
    ("[model]\nmodel = ou_quadratic\n[spectral]\n\nn = 8\n", 5, "spectral.n must be >= 16"),
    ("[model]\nmodel = pitchfork_corr\nrho = 1.5\n", 3, "rho must lie in [-1, 1]"),
    ("[model]\nmodel = ou_quadratic\n[mc]\nbogus = 1\n", 4, "unknown key 'bogus'"),
    ("[model]\nmodel = ou_quadratic\n[mc]\nn_paths = many\n", 4, "bad value for mc.n_paths"),
    ("[model]\nmodel = ou_quadratic\n[extra]\n", 3, "unknown section [extra]"),
])
def test_config_errors_are_line_anchored(text, line, fragment):
    with pytest.raises(ConfigError) as exc:
        parse_config(text, "bad.ini")
    msg = str(exc.value)
    assert msg.startswith(f"bad.ini:{line}:")
    assert fragment in msg


def test_load_missing_file(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "nope.ini")


def test_overrides():
    cfg = ExperimentConfig(model={"model": "ou_quadratic"})
    apply_overrides(cfg, ["p=0.1,0.2", "t=5", "spectral.n=64", "a=2", "mc.scheme=heun"])
    assert cfg.mc.p_grid == [0.1, 0.2] and cfg.spectral.p_grid == [0.1, 0.2]
    assert cfg.mc.t == 5.0 and cfg.spectral.n == 64 and cfg.model["a"] == "2"
    assert cfg.mc.scheme == "heun"
    with pytest.raises(ConfigError):
        apply_overrides(cfg, ["n=4"])
    with pytest.raises(ConfigError):
        apply_overrides(cfg, ["nonsense"])


def _header(path):
    with open(path) as fh:
        return tuple(next(csv.reader(fh)))


def test_cli_lambda_mc_and_spectral(tmp_path):
    ini = tmp_path / "ou.ini"
    ini.write_text(GOOD)
    out = tmp_path / "out"
    assert main(["lambda-mc", "--config", str(ini), "--out", str(out)]) == 0
    assert _header(out / "lambda_mc.csv") == MC_CSV_FIELDS
    man = json.loads((out / "manifest.json").read_text())
    assert man["config"]["mc"]["n_paths"] == 400 and man["seed"] == 20240101
    assert main(["lambda-spectral", "--config", str(ini), "--out", str(out)]) == 0
    assert _header(out / "lambda_spectral.csv") == SPECTRAL_CSV_FIELDS
    rows = list(csv.reader(open(out / "lambda_spectral.csv")))[1:]
    assert float(rows[-1][1]) == pytest.approx(0.5 * (1 - np.sqrt(0.5)), abs=1e-3)


def test_cli_identical_outputs(tmp_path):
    args = ["lambda-mc", "pitchfork_q2", "p=0,0.5,1", "t=3", "n_paths=300", "n_steps=300"]
    assert main(args + ["--out", str(tmp_path / "a"), "--threads", "1", "--seed", "9"]) == 0
    assert main(args + ["--out", str(tmp_path / "b"), "--threads", "4", "--seed", "9"]) == 0
    assert main(args + ["--out", str(tmp_path / "c"), "--threads", "1", "--seed", "10"]) == 0
    a = (tmp_path / "a" / "lambda_mc.csv").read_bytes()
    assert a == (tmp_path / "b" / "lambda_mc.csv").read_bytes()
    assert a != (tmp_path / "c" / "lambda_mc.csv").read_bytes()


def test_cli_bounds_and_crosscheck(tmp_path, capsys):
    out = tmp_path / "o"
    assert main(["bounds", "pitchfork_q2", "a=0", "p=10", "--out", str(out)]) == 0
    assert _header(out / "bounds.csv") == BOUNDS_CSV_FIELDS
    assert (out / "bounds.svg").read_text().startswith("<svg")
    assert main(["crosscheck", "pitchfork_q2", "a=0", "p=10", "n_paths=200", "n_steps=300",
                 "t=3", "--out", str(out)]) == 0
    line = [l for l in capsys.readouterr().out.splitlines() if l.startswith("p=10:")][0]
    assert "lower=15.88" in line and "spectral=16.61" in line and "upper=18.47" in line
    assert "[ok]" in line


def test_cli_rate_function_growth_asymptotics(tmp_path):
    out = tmp_path / "o"
    assert main(["rate-function", "ou_quadratic", "--out", str(out)]) == 0
    assert _header(out / "rate_function.csv") == RATE_CSV_FIELDS
    assert main(["growth-check", "ou_quadratic", "p=0.375,0.49", "--out", str(out)]) == 0
    assert main(["asymptotics", "pitchfork_q2", "a=0", "--out", str(out)]) == 0
    assert main(["asymptotics", "ou_quadratic", "--out", str(out)]) == 2


def test_cli_clt_and_mdp(tmp_path):
    out = tmp_path / "o"
    assert main(["clt", "ou_quadratic", "t=5", "n_paths=500", "n_steps=500", "--out", str(out)]) == 0
    assert main(["mdp", "ou_quadratic", "p=0.5", "t=5", "n_paths=500", "n_steps=500",
                 "--out", str(out)]) == 0


def test_cli_exit_codes(tmp_path):
    bad = tmp_path / "bad.ini"
    bad.write_text("[mc]\nt = 1\n")
    assert main(["lambda-mc", "--config", str(bad)]) == 2
    assert main(["lambda-mc", "no_such_model", "--out", str(tmp_path)]) == 2
    assert main(["lambda-spectral", "ou_quadratic", "p=0.6", "spectral.weight=exp_quadratic",
                 "spectral.weight_param=0.5", "--out", str(tmp_path)]) == 3
    # every path leaves the guard radius
    assert main(["lambda-mc", "pitchfork_q2", "x0=5", "t=1", "n_steps=5", "n_paths=10",
                 "--out", str(tmp_path)]) == 3
    assert main(["repro", "no-such-experiment"]) == 2


def test_cli_repro(capsys):
    assert main(["repro", "ou-closed-form"]) == 0
    out = capsys.readouterr().out
    assert "[PASS]" in out and "lambda_spec=0.250001 oracle=0.250000" in out
