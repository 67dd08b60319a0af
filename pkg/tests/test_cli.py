import csv

import numpy as np
import pytest

from qpinn import checkpoint as ckpt_io
from qpinn.cli import interpolate, main, models_from_checkpoint
from qpinn.config import RunConfig, load_config, read_config
from qpinn.errors import ConfigurationError
from qpinn.problems import make_problem

SMALL = "n_qubits = 2\ndepth = 1\ngrid_size = 8\niterations = 3\n"


def write_config(tmp_path, text, name="run.cfg"):
    path = tmp_path / name
    path.write_text(text)
    return path


def rows(path):
    with open(path, newline="") as handle:
        return list(csv.reader(handle))


def run(tmp_path, text, out="out", *extra):
    cfg = write_config(tmp_path, text)
    code = main(["run", "--config", str(cfg), "--out", str(tmp_path / out), *extra])
    return code, tmp_path / out


# -- configuration parsing ---------------------------------------------------------

def test_config_grammar():
    config = load_config("problem = linear2nd  # trailing comment\n\n# full line\nlayout = AEC\nalpha_b = 1e3\n")
    assert (config.problem, config.layout, config.alpha_b) == ("linear2nd", "aec", 1000.0)
    spec = config.problem_spec()
    assert spec.layout == "AEC" and spec.alpha_f == 1.0


@pytest.mark.parametrize("text,fragment", [
    ("problem = riccati\ncolour = red\n", "unknown configuration key"),
    ("problem = riccati\nseed = 1\nseed = 2\n", "duplicate key"),
    ("problem = riccati\nlearning_rate = fast\n", "learning_rate"),
    ("problem = riccati\nlearning_rate = 0\n", "learning_rate"),
    ("problem = riccati\nalpha_f = -1\n", "alpha_f"),
    ("problem = riccati\nlayout = ring\n", "layout"),
    ("layout = rc\n", "missing required key 'problem'"),
    ("problem = heat\n", "problem"),
    ("problem = riccati\njust words\n", "expected 'key = value'"),
    ("problem = riccati\nobservable = weighted\nobservable_weights = 1,2\n", "weighted observable"),
])
def test_config_errors_name_the_field(text, fragment):
    with pytest.raises(ConfigurationError, match=fragment):
        load_config(text)


def test_config_defaults_follow_problem():
    resolved = load_config("problem = duffing\n").resolved()
    spec = make_problem("duffing")
    assert (resolved.n_qubits, resolved.depth, resolved.iterations, resolved.learning_rate) == \
        (spec.n_qubits, spec.depth, spec.iterations, spec.learning_rate)
    assert resolved.grid_size == 50 and resolved.seed == 0


def test_config_text_round_trip():
    config = load_config("problem = system2\nobservable = weighted\nobservable_weights = 0.5,1,2\nseed = 9\n")
    again = load_config(config.resolved().to_text())
    assert again == config.resolved()


def test_overrides_replace_file_values(tmp_path):
    path = write_config(tmp_path, "problem = riccati\nseed = 1\n")
    assert read_config(path, {"seed": "5"}).seed == 5
    with pytest.raises(ConfigurationError):
        read_config(tmp_path / "missing.cfg")


# -- run --------------------------------------------------------------------------------

def test_run_writes_three_files(tmp_path, capsys):
    code, out = run(tmp_path, "problem = riccati\n" + SMALL)
    assert code == 0
    assert sorted(p.name for p in out.iterdir()) == ["checkpoint.txt", "convergence.csv", "solution.csv"]
    conv = rows(out / "convergence.csv")
    assert conv[0] == ["iteration", "loss_total", "loss_residual", "loss_boundary", "one_minus_r2"]
    assert [r[0] for r in conv[1:]] == ["0", "1", "2"]
    sol = rows(out / "solution.csv")
    assert sol[0] == ["x", "u_pred", "u_oracle", "error"] and len(sol) == 9
    for r in sol[1:]:
        assert float(r[3]) == pytest.approx(abs(float(r[1]) - float(r[2])), abs=1e-15)
    assert "final 1-R2:" in capsys.readouterr().out


def test_run_zero_iterations_reports_untrained_model(tmp_path):
    code, out = run(tmp_path, "problem = linear2nd\n" + SMALL.replace("iterations = 3", "iterations = 0"))
    assert code == 0
    assert len(rows(out / "convergence.csv")) == 1
    config = ckpt_io.load(out / "checkpoint.txt").config
    _, models = models_from_checkpoint(ckpt_io.load(out / "checkpoint.txt"))
    from qpinn.optimizer import build_models
    fresh = build_models(config.problem_spec(), config.seed)
    assert np.array_equal(models[0].theta, fresh[0].theta)


@pytest.mark.parametrize("pid", ["riccati", "system2", "linear2nd", "duffing", "poisson2d"])
def test_reruns_are_byte_identical(tmp_path, pid):
    text = f"problem = {pid}\n" + SMALL.replace("grid_size = 8", "grid_size = 5" if pid == "poisson2d" else "grid_size = 8")
    names = ("convergence.csv", "solution.csv", "checkpoint.txt")
    _, out = run(tmp_path, text)
    first = [(out / name).read_bytes() for name in names]
    run(tmp_path, text)
    assert [(out / name).read_bytes() for name in names] == first


def test_seed_flag_changes_run(tmp_path):
    run(tmp_path, "problem = riccati\n" + SMALL, "a", "--seed", "1")
    run(tmp_path, "problem = riccati\n" + SMALL, "b", "--seed", "2")
    assert (tmp_path / "a" / "convergence.csv").read_bytes() != (tmp_path / "b" / "convergence.csv").read_bytes()
    assert ckpt_io.load(tmp_path / "b" / "checkpoint.txt").config.seed == 2


def test_override_flag(tmp_path):
    code, out = run(tmp_path, "problem = riccati\n" + SMALL, "o", "--override", "iterations=2")
    assert code == 0 and len(rows(out / "convergence.csv")) == 3
    assert main(["run", "--config", str(tmp_path / "run.cfg"), "--override", "nonsense"]) == 2


def test_system2_solution_columns(tmp_path):
    _, out = run(tmp_path, "problem = system2\n" + SMALL)
    assert rows(out / "solution.csv")[0] == \
        ["x", "u1_pred", "u1_oracle", "u1_error", "u2_pred", "u2_oracle", "u2_error"]


def test_numbers_use_seventeen_significant_digits(tmp_path):
    _, out = run(tmp_path, "problem = riccati\n" + SMALL)
    for r in rows(out / "convergence.csv")[1:]:
        for cell in r[1:]:
            assert float(format(float(cell), ".17g")) == float(cell)
            assert cell == format(float(cell), ".17g")


# -- checkpoints -------------------------------------------------------------------------------

@pytest.mark.parametrize("pid,weighting", [("riccati", "constant"), ("linear2nd", "sapinn-logistic")])
def test_checkpoint_round_trip_reemits_solution(tmp_path, pid, weighting):
    _, out = run(tmp_path, f"problem = {pid}\nweighting = {weighting}\n" + SMALL)
    loaded = ckpt_io.load(out / "checkpoint.txt")
    assert ckpt_io.dumps(ckpt_io.loads(ckpt_io.dumps(loaded))) == (out / "checkpoint.txt").read_text()
    if weighting != "constant":
        assert loaded.lambda_f.size == 8 and np.any(loaded.lambda_f > 1)
    path, _ = interpolate(out / "checkpoint.txt", 8, out_dir=tmp_path / "again")
    assert path.read_bytes() == (out / "solution.csv").read_bytes()


def test_config_echo_reproduces_convergence(tmp_path):
    _, out = run(tmp_path, "problem = duffing\nseed = 3\n" + SMALL)
    echo = ckpt_io.load(out / "checkpoint.txt").config
    (tmp_path / "echo.cfg").write_text(echo.to_text())
    assert main(["run", "--config", str(tmp_path / "echo.cfg"), "--out", str(tmp_path / "echo")]) == 0
    assert (tmp_path / "echo" / "convergence.csv").read_bytes() == (out / "convergence.csv").read_bytes()


def test_corrupt_checkpoint_rejected(tmp_path):
    _, out = run(tmp_path, "problem = riccati\n" + SMALL)
    text = (out / "checkpoint.txt").read_text()
    bad = tmp_path / "bad.txt"
    bad.write_text(text.replace("qpinn-checkpoint 1", "qpinn-checkpoint 9"))
    with pytest.raises(ConfigurationError):
        ckpt_io.load(bad)
    bad.write_text(text[: len(text) // 2])
    with pytest.raises(ConfigurationError):
        ckpt_io.load(bad)


# -- interpolate ----------------------------------------------------------------------------------

def test_interpolate_poisson_lines_and_mesh(tmp_path):
    _, out = run(tmp_path, "problem = poisson2d\n" + SMALL.replace("grid_size = 8", "grid_size = 5"))
    ck = str(out / "checkpoint.txt")
    assert main(["interpolate", "--checkpoint", ck, "--points", "20", "--line", "x=0.25"]) == 0
    line = rows(out / "interpolation_x0.25_n20.csv")
    assert line[0] == ["x", "y", "u_pred", "u_oracle", "error"] and len(line) == 21
    assert all(float(r[0]) == 0.25 for r in line[1:])
    assert main(["interpolate", "--checkpoint", ck, "--points", "7", "--line", "y=0.75"]) == 0
    assert all(float(r[1]) == 0.75 for r in rows(out / "interpolation_y0.75_n7.csv")[1:])
    assert main(["interpolate", "--checkpoint", ck, "--points", "4"]) == 0
    assert len(rows(out / "interpolation_n4.csv")) == 17


def test_interpolate_duffing_500_points(tmp_path):
    _, out = run(tmp_path, "problem = duffing\n" + SMALL)
    assert main(["interpolate", "--checkpoint", str(out / "checkpoint.txt"), "--points", "500",
                 "--problem", "duffing"]) == 0
    table = rows(out / "interpolation_n500.csv")
    assert len(table) == 501 and float(table[1][0]) == 0.0 and float(table[-1][0]) == 0.9


def test_interpolate_errors(tmp_path, capsys):
    _, out = run(tmp_path, "problem = riccati\n" + SMALL)
    ck = str(out / "checkpoint.txt")
    assert main(["interpolate", "--checkpoint", ck, "--points", "5", "--problem", "duffing"]) == 2
    assert "trained on 'riccati'" in capsys.readouterr().err
    assert main(["interpolate", "--checkpoint", ck, "--points", "5", "--line", "x=0.2"]) == 2
    assert main(["interpolate", "--checkpoint", ck, "--points", "1"]) == 2
    assert main(["interpolate", "--checkpoint", str(tmp_path / "none.txt"), "--points", "5"]) == 2


# -- compare -----------------------------------------------------------------------------------------

def test_compare_identical_configs_give_identical_columns(tmp_path):
    a = write_config(tmp_path, "problem = linear2nd\n" + SMALL, "a.cfg")
    b = write_config(tmp_path, "problem = linear2nd\n" + SMALL, "b.cfg")
    assert main(["compare", "--config", str(a), "--config", str(b), "--out", str(tmp_path / "cmp")]) == 0
    table = rows(tmp_path / "cmp" / "compare.csv")
    assert table[0] == ["iteration", "one_minus_r2_a", "one_minus_r2_b", "loss_total_a", "loss_total_b"]
    assert len(table) == 4
    for r in table[1:]:
        assert r[1] == r[2] and r[3] == r[4]


def test_compare_rc_vs_aec(tmp_path):
    a = write_config(tmp_path, "problem = linear2nd\nlayout = rc\n" + SMALL, "a.cfg")
    b = write_config(tmp_path, "problem = linear2nd\nlayout = aec\n" + SMALL, "b.cfg")
    assert main(["compare", "--config", str(a), "--config", str(b), "--out", str(tmp_path / "cmp")]) == 0
    table = rows(tmp_path / "cmp" / "compare.csv")
    assert any(r[1] != r[2] for r in table[1:])


def test_compare_rejects_mismatched_problems(tmp_path, capsys):
    a = write_config(tmp_path, "problem = linear2nd\n" + SMALL, "a.cfg")
    b = write_config(tmp_path, "problem = riccati\n" + SMALL, "b.cfg")
    assert main(["compare", "--config", str(a), "--config", str(b), "--out", str(tmp_path / "cmp")]) == 2
    assert "different problems" in capsys.readouterr().err
    assert main(["compare", "--config", str(a), "--out", str(tmp_path / "cmp")]) == 2


# -- misc ------------------------------------------------------------------------------------------------

def test_list_problems(capsys):
    assert main(["list-problems"]) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert [ln.split(":")[0] for ln in lines] == ["riccati", "system2", "linear2nd", "duffing", "poisson2d"]
    assert "30x30" in lines[-1]


def test_invalid_config_exit_status(tmp_path, capsys):
    code, _ = run(tmp_path, "problem = riccati\nalpha_f = lots\n")
    assert code == 2 and "alpha_f" in capsys.readouterr().err


def test_divergence_exit_status(tmp_path, capsys):
    # a learning rate this large throws the boundary-weighted loss past the guard
    text = "problem = linear2nd\nalpha_b = 1e6\nlearning_rate = 50\n" + SMALL.replace("iterations = 3", "iterations = 40")
    code, _ = run(tmp_path, text)
    assert code == 3 and "iteration" in capsys.readouterr().err


def test_thread_cap_env(tmp_path, monkeypatch):
    monkeypatch.setenv("QPINN_THREADS", "1")
    code, _ = run(tmp_path, "problem = riccati\n" + SMALL)
    assert code == 0
    monkeypatch.setenv("QPINN_THREADS", "zero")
    assert main(["list-problems"]) == 2


def test_usage_errors_exit_nonzero():
    with pytest.raises(SystemExit) as info:
        main(["run"])
    assert info.value.code != 0
    with pytest.raises(SystemExit):
        main(["run", "--config", "x", "--seed", "-1"])


def test_run_config_dataclass_is_frozen():
    config = RunConfig("riccati")
    with pytest.raises(Exception):
        config.seed = 3
