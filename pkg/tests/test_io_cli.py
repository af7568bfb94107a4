import json

import numpy as np
import pytest

from skeldyn import cli, io
from skeldyn.correlation import DecayCurve, fit_decay
from skeldyn.exceptions import ConfigError
from skeldyn.gallery import NONLINEAR_K_MAX, NONLINEAR_K_MIN, LinearExample, NonlinearExample
from skeldyn.grids import GridFunction, Rect
from skeldyn.map_model import PiecewiseMapSpec


def write(tmp_path, cfg, name="map.json"):
    p = tmp_path / name
    p.write_text(json.dumps(cfg) if not isinstance(cfg, str) else cfg)
    return p


def test_config_examples(tmp_path):
    assert isinstance(io.load_map_config(write(tmp_path, {"example": "nonlinear"})), NonlinearExample)
    ex = io.load_map_config(write(tmp_path, {"example": "linear", "a": 1, "b": 101}))
    assert isinstance(ex, LinearExample) and ex.b == 101


def test_config_linear_family_matches_example(tmp_path, linear):
    rows = [{"a": 1, "b": 101, "c": -2 * n, "lo": 2 * n - 1, "hi": 2 * n + 1} for n in range(-51, 52)]
    cfg = {"family": "linear", "L": 1, "eps1": 1, "Y": 3, "branches": rows}
    spec = io.load_map_config(write(tmp_path, cfg))
    assert isinstance(spec, PiecewiseMapSpec)
    assert spec.A == 101 and spec.M == 1
    rng = np.random.default_rng(0)
    u, v = rng.uniform(-1, 1, (2, 300))
    np.testing.assert_allclose(spec.phi(u, v), linear.spec.phi(u, v), atol=1e-12)


def test_config_quadratic_family_reproduces_nonlinear(tmp_path, nonlinear):
    rows = [{"c2": -35.5, "c1": -214, "c0": k - 0.5, "height": 1}
            for k in range(NONLINEAR_K_MIN, NONLINEAR_K_MAX + 1)]
    cfg = {"family": "quadratic", "L": 1, "eps1": 1, "Y": 3, "A": 144, "M": 2, "branches": rows}
    spec = io.load_map_config(write(tmp_path, cfg))
    assert (spec.A, spec.M, len(spec.pieces)) == (144, 2, 430)
    rng = np.random.default_rng(1)
    u, v = rng.uniform(-1, 1, (2, 200))
    np.testing.assert_allclose(spec.phi(u, v), nonlinear.spec.phi(u, v), atol=1e-12)


@pytest.mark.parametrize("cfg, key", [
    ({"family": "linear", "L": 1, "Y": 3, "branches": [{"a": 1, "b": 2, "lo": 0, "hi": 1}]}, "eps1"),
    ({"family": "linear", "L": 1, "eps1": 1, "Y": 3, "branches": [{"a": 1, "b": "x", "lo": 0, "hi": 1}]},
     "branches[0].b"),
    ({"family": "quadratic", "L": 1, "eps1": 1, "Y": 3,
      "branches": [{"c2": 1, "c1": 0, "c0": 0, "height": 1}]}, "branches[0].A"),
    ({"family": "cubic"}, "family"),
    ({"example": "other"}, "example"),
    ({"family": "linear", "L": 1, "eps1": 1, "Y": 3, "branches": []}, "branches"),
])
def test_config_errors_name_key(tmp_path, cfg, key):
    with pytest.raises(ConfigError) as info:
        io.load_map_config(write(tmp_path, cfg))
    assert info.value.key == key


def test_config_unreadable(tmp_path):
    with pytest.raises(ConfigError):
        io.load_map_config(write(tmp_path, "{not json"))


def test_grid_csv_roundtrip(tmp_path):
    rng = np.random.default_rng(3)
    g = GridFunction(Rect(-1, 1, -0.1, 0.1), rng.random((5, 7)) / 3)
    io.write_grid_csv(tmp_path / "g.csv", g)
    back = io.read_grid_csv(tmp_path / "g.csv")
    assert back.rect == g.rect
    np.testing.assert_array_equal(back.values, g.values)


def test_decay_csv_layout(tmp_path):
    n = np.arange(0, 6)
    cov = 0.5 ** n
    curve = DecayCurve(n, cov, np.full(6, 1e-3), cov, fit_decay(n[1:], cov[1:]))
    io.write_decay_csv(tmp_path / "d.csv", curve)
    lines = (tmp_path / "d.csv").read_text().splitlines()
    assert lines[0] == "lag,cov_mc,stderr,cov_op"
    assert lines[2].split(",")[1] == "0.5"


# ---------------------------------------------------------------------- CLI

def run(*argv):
    return cli.main([str(a) for a in argv])


def test_check_nonlinear_passes(tmp_path):
    assert run("check", "--example", "nonlinear", "--seed", 1, "--out", tmp_path) == 0
    rec = json.loads((tmp_path / "report.json").read_text())
    assert rec["overall"] == "pass"


def test_check_linear_inadmissible(tmp_path):
    code = run("check", "--example", "linear", "--a", 1, "--b", 50, "--L", 1, "--seed", 1,
               "--samples", 500, "--out", tmp_path)
    assert code == 1
    rec = json.loads((tmp_path / "report.json").read_text())
    assert rec["admissibility"]["admissible"] is False


def test_check_malformed_config(tmp_path, capsys):
    cfg = write(tmp_path, {"family": "linear", "L": 1, "Y": 3, "branches": [{"a": 1}]})
    assert run("check", "--config", cfg, "--seed", 1, "--out", tmp_path) == 2
    assert "eps1" in capsys.readouterr().err


def test_seed_is_mandatory(tmp_path, capsys):
    assert run("density", "--example", "linear", "--out", tmp_path) == 2
    assert "seed" in capsys.readouterr().err


def test_density_minimal_grid(tmp_path):
    code = run("density", "--example", "linear", "--nx", 2, "--ny", 2, "--samples-per-cell", 50,
               "--seed", 3, "--force", "--out", tmp_path)
    assert code == 0
    g = io.read_grid_csv(tmp_path / "density.csv")
    assert g.integral() == pytest.approx(1.0, abs=1e-12)
    assert (tmp_path / "marginals.csv").exists()


def test_density_linear_uniform(tmp_path):
    code = run("density", "--example", "linear", "--nx", 32, "--ny", 32, "--samples-per-cell", 100,
               "--seed", 3, "--out", tmp_path)
    assert code == 0
    rec = json.loads((tmp_path / "spectral.json").read_text())
    assert rec["max_relative_deviation_from_uniform"] < 0.05


def test_decay_constant_observables_exit_4(tmp_path):
    code = run("decay", "--example", "linear", "--nx", 16, "--ny", 16, "--samples-per-cell", 50,
               "--trajectories", 2000, "--lags", 6, "--F", "one", "--H", "one", "--seed", 2,
               "--force", "--out", tmp_path)
    assert code == 4


def test_decay_unknown_observable_exit_2(tmp_path):
    code = run("decay", "--example", "linear", "--nx", 8, "--ny", 8, "--samples-per-cell", 20,
               "--trajectories", 100, "--F", "cos", "--seed", 2, "--force", "--out", tmp_path)
    assert code == 2


def test_decay_outputs_and_cache(tmp_path):
    args = ["decay", "--example", "nonlinear", "--nx", 24, "--ny", 24, "--samples-per-cell", 60,
            "--trajectories", 5000, "--lags", 8, "--seed", 4, "--eps0", 0.05, "--force", "--out", tmp_path]
    assert run(*args) == 0
    fit = json.loads((tmp_path / "fit.json").read_text())
    assert 0 < fit["rho"] < 1
    assert fit["bound_factor"]["constant_symbolic"] is True
    first = (tmp_path / "decay.csv").read_bytes()
    assert len(list((tmp_path / "cache").iterdir())) == 1
    # second run reads the cache and must reproduce the file exactly
    assert run(*args) == 0
    assert (tmp_path / "decay.csv").read_bytes() == first


def test_example_facts(tmp_path):
    assert run("example", "linear", "--out", tmp_path) == 0
    rec = json.loads((tmp_path / "facts.json").read_text())
    assert rec["verified"]["uniform_density"] is True
    assert run("example", "nonlinear", "--out", tmp_path) == 0
    rec = json.loads((tmp_path / "facts.json").read_text())
    assert rec["verified"]["P1_increasing_region3"] is True
