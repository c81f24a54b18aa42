import numpy as np
import pytest

from latentcause import formats
from latentcause.cli import dispatch, main, parse_args, parse_lags

FIG1_ARGV = ("exp-fig1 --n 10 --m 10 --p 0.1 --q 0.1 --a 0.2 --b 0.7 --sigma2 0.1 "
             "--T 10000 --instances 50 --lags 1:12 --seed 7 --out fig1.csv").split()


def usage_error(argv, capsys):
    with pytest.raises(SystemExit) as info:
        parse_args(argv)
    assert info.value.code == 2
    return capsys.readouterr().err


def test_fig1_invocation():
    inv = parse_args(FIG1_ARGV)
    assert inv.subcommand == "exp-fig1"
    o = inv.options
    assert (o["n"], o["m"], o["p"], o["a"], o["b"], o["T"], o["instances"], o["seed"]) == \
        (10, 10, (0.1,), 0.2, 0.7, 10_000, 50, 7)
    assert o["lags"] == tuple(range(1, 13))
    assert str(inv.out_path) == "fig1.csv"


def test_nonlinear_invocation():
    inv = parse_args("exp-nonlinear --samples 1000 --k 10 --seed 1 --out nl.csv".split())
    assert (inv.options["samples"], inv.options["k"], inv.options["seed"]) == (1000, 10, 1)


def test_lag_zero_rejected(capsys):
    err = usage_error("fit --traj t.csv --lag 0 --out f.txt".split(), capsys)
    assert "--lag" in err


def test_unknown_flag_rejected(capsys):
    err = usage_error("fit --traj t.csv --lag 1 --out f.txt --bogus 1".split(), capsys)
    assert "--bogus" in err


@pytest.mark.parametrize("sub", [
    "simulate --system s.txt --steps 5",
    "gen-consensus --n 2 --m 1 --p 0.1 --q 0.1 --a 0.2 --b 0.7 --sigma2 0.1",
    "exp-intro --T 1000",
    "exp-nonlinear --samples 100 --k 5",
    FIG1_ARGV[0] + " --n 2 --m 1 --p 0.1 --q 0.1 --a 0.2 --b 0.7 --sigma2 0.1",
])
def test_seed_required(sub, capsys):
    err = usage_error(sub.split() + ["--out", "x"], capsys)
    assert "--seed" in err


def test_invariant_checks(capsys):
    assert "--p" in usage_error(FIG1_ARGV[:5] + ["0.7"] + FIG1_ARGV[6:], capsys)
    assert "--samples" in usage_error("exp-nonlinear --samples 5 --k 10 --seed 1 --out x".split(), capsys)


def test_parse_lags():
    assert parse_lags("1:4") == (1, 2, 3, 4)
    assert parse_lags("2,5,9") == (2, 5, 9)


def test_exp_intro_writes_matrix(tmp_path, capsys):
    out = tmp_path / "intro.txt"
    assert main(["exp-intro", "--T", "5000", "--seed", "1", "--out", str(out)]) == 0
    mat = formats.load_matrix(out.read_text())
    assert mat.shape == (2, 2)
    summary = capsys.readouterr().out.strip().splitlines()
    assert len(summary) == 1 and "wrote" in summary[0]


def test_consensus_then_simulate_round_trip(tmp_path):
    sys_path, traj_path = tmp_path / "sys.txt", tmp_path / "t.csv"
    argv = ("gen-consensus --n 4 --m 3 --p 0.2 --q 0.2 --a 0.2 --b 0.7 --sigma2 0.1 --seed 5 "
            f"--out {sys_path} --steps 400 --traj-out {traj_path}").split()
    assert main(argv) == 0
    system = formats.load_system(sys_path.read_text())
    assert formats.load_system(formats.dump_system(system)) == system
    out = tmp_path / "t2.csv"
    assert main(["simulate", "--system", str(sys_path), "--steps", "50", "--seed", "2",
                 "--out", str(out)]) == 0
    assert formats.load_trajectory(out.read_text()).data.shape == (51, 4)

    fit_path, sup_path = tmp_path / "fit.txt", tmp_path / "sup.txt"
    assert main(["fit", "--traj", str(traj_path), "--lag", "2", "--out", str(fit_path)]) == 0
    assert main(["recover", "--fit", str(fit_path), "--threshold", "0.1", "--truth", str(sys_path),
                 "--out", str(sup_path)]) == 0
    assert formats.load_support(sup_path.read_text()).shape == (4, 4)


def test_gen_consensus_matches_trajectory_network(tmp_path):
    a, b = tmp_path / "a.txt", tmp_path / "b.txt"
    base = "gen-consensus --n 3 --m 3 --p 0.2 --q 0.2 --a 0.2 --b 0.7 --sigma2 0.1 --seed 9".split()
    assert main(base + ["--out", str(a)]) == 0
    assert main(base + ["--out", str(b), "--steps", "10", "--traj-out", str(tmp_path / "t.csv")]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_cmi_subcommand(tmp_path):
    samples = tmp_path / "s.csv"
    pts = np.random.default_rng(0).normal(size=(200, 3))
    from latentcause.infotheory import SampleSet
    samples.write_text(formats.dump_samples(SampleSet(pts, ("a", "b", "c"))))
    out = tmp_path / "c.csv"
    assert main(["cmi", "--samples", str(samples), "--x", "a", "--y", "b", "--z", "c",
                 "--k", "5", "--out", str(out)]) == 0
    assert formats.load_cmi(out.read_text()).n_samples == 200


def test_same_argv_same_bytes(tmp_path):
    outs = [tmp_path / "a.csv", tmp_path / "b.csv"]
    for out in outs:
        assert main(["exp-nonlinear", "--samples", "300", "--k", "5", "--seed", "4",
                     "--out", str(out)]) == 0
    assert outs[0].read_bytes() == outs[1].read_bytes()


def test_unwritable_out_path(tmp_path, capsys):
    out = tmp_path / "nope" / "intro.txt"
    inv = parse_args(["exp-intro", "--T", "1000", "--seed", "1", "--out", str(out)])
    assert dispatch(inv) == 1
    err = capsys.readouterr().err.strip().splitlines()
    assert len(err) == 1 and err[0].startswith("error:")
    assert not out.parent.exists()


def test_runtime_error_exit_code(tmp_path, capsys):
    traj = tmp_path / "t.csv"
    traj.write_text("t,x1\n0,1\n1,2\n")
    out = tmp_path / "f.txt"
    assert main(["fit", "--traj", str(traj), "--lag", "1", "--out", str(out)]) == 1
    assert capsys.readouterr().err.startswith("error:")
    assert not out.exists()
