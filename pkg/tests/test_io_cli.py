import json

import numpy as np
import pytest

from exclusion_ldp import io
from exclusion_ldp.cli import main
from exclusion_ldp.model import ModelParams
from exclusion_ldp.pde import Grid, solve_tilted, stationary_profile
from exclusion_ldp.rate import TrajectoryData, explicit_rate


# ---------------------------------------------------------------- profiles and tilts

def test_named_profiles():
    x = np.array([-0.5, 0.0, 0.5])
    assert np.array_equal(io.named_profile("constant:0.25")(x), [0.25] * 3)
    assert np.array_equal(io.named_profile("step:0.8,0.2")(x), [0.8, 0.2, 0.2])
    assert np.allclose(io.named_profile("cosine")(x), 0.5 + 0.3 * np.cos(np.pi * x))
    p = ModelParams(1.0, 0.3, 0.7, 2)
    assert np.allclose(io.named_profile("stationary", p)(x), stationary_profile(p)(x))


@pytest.mark.parametrize("spec", ["constant:1.2", "step:0.1", "step:a,b", "wave", "stationary"])
def test_bad_profiles(spec):
    with pytest.raises(ValueError):
        io.named_profile(spec)


def test_profile_from_file(tmp_path):
    path = tmp_path / "rho.csv"
    path.write_text("x,value\n1,0.6\n-1,0.2\n")
    assert np.allclose(io.named_profile(f"file:{path}")(np.array([-1.0, 0.0, 1.0])), [0.2, 0.4, 0.6])
    path.write_text("x,value\n-1,1.5\n1,0.5\n")
    with pytest.raises(ValueError):
        io.named_profile(f"file:{path}")


def test_named_tilts():
    assert io.named_tilt("zero").is_zero
    h = io.named_tilt("sine:2.0:ramp:0.1:0.2+one:0.5:constant:0.0")
    x = np.array([-1.0, 0.0, 1.0])
    assert np.allclose(h(0.05, x), 0.5)
    assert np.allclose(h(0.3, x), 2.0 * np.sin(0.5 * np.pi * x) + 0.5)
    assert h.activation_time() == pytest.approx(0.0)
    with pytest.raises(ValueError):
        io.named_tilt("triangle:1")
    with pytest.raises(ValueError):
        io.named_tilt("sine:1:sawtooth")


def test_smootherstep_endpoints():
    s = io.smootherstep(np.array([-1.0, 0.0, 0.5, 1.0, 2.0]))
    assert np.allclose(s, [0.0, 0.0, 0.5, 1.0, 1.0])


# ---------------------------------------------------------------- files

def test_field_csv_roundtrip(tmp_path):
    p = ModelParams(1.0, 0.3, 0.7, 2)
    f = solve_tilted(p, Grid(32, 0.3, n_saves=30), stationary_profile(p), io.named_tilt("sine:0.5"))
    path = io.write_field_csv(tmp_path / "f.csv", f)
    traj = io.read_field_csv(path)
    direct = TrajectoryData.from_field(f)
    assert traj.params == p
    assert np.array_equal(traj.t, direct.t) and np.array_equal(traj.u, direct.u)
    assert np.array_equal(traj.dudt, direct.dudt)
    assert explicit_rate(traj)[0].total == explicit_rate(direct)[0].total
    meta = json.loads(path.with_suffix(".json").read_text())
    assert meta["controlled"] and meta["grid"]["m_cells"] == 32


def test_field_csv_without_sidecar(tmp_path):
    path = tmp_path / "g.csv"
    path.write_text("t,x,u\n" + "".join(f"{t},-0.5,0.3\n{t},0.5,0.7\n" for t in range(3)))
    with pytest.raises(ValueError):
        io.read_field_csv(path)
    traj = io.read_field_csv(path, ModelParams(0.0, 0.3, 0.7, 2))
    assert traj.u.shape == (3, 2) and np.allclose(traj.dudt, 0.0)
    path.write_text("t,x,u\n0,-0.5,0.3\n0,0.5,0.7\n1,-0.5,0.3\n")
    with pytest.raises(ValueError):
        io.read_field_csv(path, ModelParams(0.0, 0.3, 0.7, 2))


def test_digest_is_order_independent():
    assert io.digest({"a": 1, "b": np.float64(0.5)}) == io.digest({"b": 0.5, "a": 1})
    assert io.digest({"a": 1}) != io.digest({"a": 2})


def test_floats_written_losslessly(tmp_path):
    v = 0.1 + 0.2
    path = io.write_rows(tmp_path / "r.csv", ("v",), [(v,)])
    assert float(path.read_text().splitlines()[1]) == v


# ---------------------------------------------------------------- command line

def run(argv):
    return main([str(a) for a in argv])


def run_dir(root):
    """The single run directory created under ``root``."""
    (d,) = sorted(root.iterdir())
    return d


def test_each_run_gets_its_own_directory(tmp_path):
    for _ in range(2):
        assert run(["equilibrium", "--seed", 7, "--output-dir", tmp_path]) == 0
    names = sorted(d.name for d in tmp_path.iterdir())
    assert len(names) == 2 and all("_seed7" in n for n in names)


def test_equilibrium_command(capsys):
    assert run(["equilibrium", "--n", 3, "--rho", 0.4, "--a", 0.5]) == 0
    assert "detailed balance residual" in capsys.readouterr().out


def test_equilibrium_command_writes_report(tmp_path):
    assert run(["equilibrium", "--output-dir", tmp_path]) == 0
    d = run_dir(tmp_path)
    assert json.loads((d / "equilibrium.json").read_text())["passed"]
    assert json.loads((d / "manifest.json").read_text())["command"] == "equilibrium"


def test_solve_pde_constant_equilibrium(tmp_path):
    args = ["solve-pde", "--alpha", 0.4, "--beta", 0.4, "--profile", "constant:0.4",
            "--m-cells", 32, "--horizon", 0.1, "--n-saves", 5, "--output-dir", tmp_path]
    assert run(args) == 0
    traj = io.read_field_csv(run_dir(tmp_path) / "field.csv")
    assert np.allclose(traj.u, 0.4, atol=1e-14)


def test_tilted_solve_then_rate_methods_agree(tmp_path):
    assert run(["solve-tilted", "--m-cells", 64, "--n-saves", 100,
                "--output-dir", tmp_path / "solve"]) == 0
    assert run(["rate", "--trajectory", run_dir(tmp_path / "solve") / "tilted.csv",
                "--output-dir", tmp_path / "rate"]) == 0
    rates = json.loads((run_dir(tmp_path / "rate") / "rates.json").read_text())
    assert rates["agreement"]["max_relative_to_explicit"] < 0.01
    assert rates["explicit"]["total"] > 0.01


def test_rerun_is_byte_identical_apart_from_timestamp(tmp_path):
    outs = []
    for k in range(2):
        d = tmp_path / f"run{k}"
        assert run(["simulate", "--n", 8, "--replicas", 3, "--horizon", 0.1, "--seed", 5,
                    "--tilt", "sine:1:ramp:0.02:0.05", "--output-dir", d]) == 0
        outs.append({f.name: f.read_bytes() for f in sorted(run_dir(d).iterdir())
                     if f.name != "timestamp.json"})
    assert outs[0] == outs[1]
    assert {"profiles.csv", "log_rn.csv", "manifest.json"} <= set(outs[0])


def test_threads_do_not_change_results(tmp_path):
    files = []
    for threads in (1, 2):
        d = tmp_path / f"t{threads}"
        assert run(["simulate", "--n", 8, "--replicas", 4, "--horizon", 0.05, "--seed", 2,
                    "--threads", threads, "--output-dir", d]) == 0
        files.append((run_dir(d) / "replica_profiles.csv").read_bytes())
    assert files[0] == files[1]


@pytest.mark.parametrize("argv", [
    ["simulate", "--a", -0.7],
    ["simulate", "--alpha", 1.0],
    ["simulate", "--horizon", 0],
    ["simulate", "--threads", 0],
    ["simulate", "--bogus"],
    ["frobnicate"],
    [],
    ["solve-pde", "--profile", "wave"],
    ["rate", "--trajectory", "missing.csv"],
    ["equilibrium", "--n", 7],
])
def test_usage_errors_exit_2(argv, tmp_path, capsys):
    assert run([*argv, "--output-dir", tmp_path] if argv and argv[0] != "frobnicate" else argv) == 2


def test_config_file_and_override(tmp_path):
    cfg = tmp_path / "c.toml"
    cfg.write_text('seed = 4\nalpha = 0.4\nbeta = 0.4\n[equilibrium]\nn = 2\nrho = 0.35\n')
    out = tmp_path / "o"
    assert run(["equilibrium", "--config", cfg, "--n", 3, "--output-dir", out]) == 0
    rec = json.loads((run_dir(out) / "manifest.json").read_text())
    assert rec["config"]["n"] == 3 and rec["config"]["rho"] == 0.35 and rec["seed"] == 4


@pytest.mark.parametrize("text", ["colour = 1\n", "[equilibrium]\nwidth = 2\n", "seed = [\n",
                                  "equilibrium = 3\n"])
def test_bad_config_exit_2(tmp_path, text):
    cfg = tmp_path / "c.toml"
    cfg.write_text(text)
    assert run(["equilibrium", "--config", cfg]) == 2


def test_failed_criterion_exits_1(tmp_path, capsys):
    # far too small to show the decrease in N reliably at this resolution
    code = run(["converge", "--n-list", "4,5", "--replicas", 1, "--horizon", 0.01,
                "--m-cells", 16, "--profile", "constant:0.5", "--alpha", 0.5, "--beta", 0.5,
                "--seed", 1, "--output-dir", tmp_path])
    rep = json.loads((run_dir(tmp_path) / "hydro_convergence.json").read_text())
    assert code == (0 if rep["passed"] else 1)
    assert code == 1
