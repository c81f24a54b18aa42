"""Command-line interface.

Exit status: 0 on success, 1 on runtime failure (one ``error:`` line on
stderr), 2 on usage errors.
"""

from __future__ import annotations

import argparse
import math
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import formats
from .dynamics import (
    ConsensusParams,
    generate_consensus,
    simulate_consensus,
    simulate_linear,
    true_support,
)
from .experiments import (
    Fig1Config,
    fig1_csv,
    nonlinear_csv,
    run_fig1,
    run_intro_example,
    run_nonlinear,
)
from .infotheory import cmi_knn
from .varfit import fit_var, recover_support, support_error

SUBCOMMANDS = ("simulate", "gen-consensus", "fit", "recover", "cmi",
               "exp-intro", "exp-fig1", "exp-nonlinear")


@dataclass
class CliInvocation:
    subcommand: str
    options: dict = field(default_factory=dict)
    out_path: Path | None = None


# -- value parsers ---------------------------------------------------------

def _int_at_least(lo: int):
    def parse(text: str) -> int:
        try:
            val = int(text)
        except ValueError:
            raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
        if val < lo:
            raise argparse.ArgumentTypeError(f"must be >= {lo}, got {val}")
        return val
    return parse


def _float_in(lo: float = -math.inf, hi: float = math.inf, lo_open=False, hi_open=False):
    def parse(text: str) -> float:
        try:
            val = float(text)
        except ValueError:
            raise argparse.ArgumentTypeError(f"expected a number, got {text!r}") from None
        if not math.isfinite(val):
            raise argparse.ArgumentTypeError("must be finite")
        if val < lo or (lo_open and val == lo) or val > hi or (hi_open and val == hi):
            lb = "(" if lo_open else "["
            rb = ")" if hi_open else "]"
            raise argparse.ArgumentTypeError(f"must lie in {lb}{lo}, {hi}{rb}, got {val}")
        return val
    return parse


def _seed(text: str) -> int:
    try:
        return int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer seed, got {text!r}") from None


def parse_lags(text: str) -> tuple[int, ...]:
    """``start:end`` (inclusive) or a comma-separated list of lags."""
    try:
        if ":" in text:
            start, end = (int(part) for part in text.split(":"))
            lags = tuple(range(start, end + 1))
        else:
            lags = tuple(int(part) for part in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad lag range {text!r}") from None
    if not lags or lags[0] < 1 or any(b <= a for a, b in zip(lags, lags[1:])):
        raise argparse.ArgumentTypeError(f"lags must be ascending and >= 1, got {text!r}")
    return lags


def _float_list(lo, hi, lo_open=False, hi_open=False):
    one = _float_in(lo, hi, lo_open, hi_open)

    def parse(text: str) -> tuple[float, ...]:
        return tuple(one(part) for part in text.split(","))
    return parse


def _vector(text: str) -> np.ndarray:
    try:
        return np.array([float(v) for v in text.split(",")])
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _names(text: str) -> list[str]:
    names = [t.strip() for t in text.split(",") if t.strip()]
    if not names:
        raise argparse.ArgumentTypeError("expected at least one column")
    return names


# -- parser ----------------------------------------------------------------

def _consensus_flags(sp, p_type):
    sp.add_argument("--n", type=_int_at_least(1), required=True)
    sp.add_argument("--m", type=_int_at_least(0), required=True)
    sp.add_argument("--p", type=p_type, required=True)
    sp.add_argument("--q", type=_float_in(0, 0.5), required=True)
    sp.add_argument("--a", type=_float_in(0, lo_open=True), required=True)
    sp.add_argument("--b", type=_float_in(0, lo_open=True), required=True)
    sp.add_argument("--sigma2", type=_float_in(0), required=True)
    sp.add_argument("--max-tries", type=_int_at_least(1), default=1000)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="latentcause",
        description="1-step causal structure among observed processes with noiseless latent states.",
    )
    sub = parser.add_subparsers(dest="subcommand", required=True, metavar="SUBCOMMAND")

    def add(name, help_, stochastic):
        sp = sub.add_parser(name, help=help_)
        sp.add_argument("--out", type=Path, required=True, help="output file")
        if stochastic:
            sp.add_argument("--seed", type=_seed, required=True)
        return sp

    sp = add("simulate", "simulate a system file", True)
    sp.add_argument("--system", type=Path, required=True)
    sp.add_argument("--steps", type=_int_at_least(1), required=True)
    sp.add_argument("--x0", type=_vector, default=None, help="comma-separated initial state")

    sp = add("gen-consensus", "draw a random consensus network", True)
    _consensus_flags(sp, _float_in(0, 0.5))
    sp.add_argument("--steps", type=_int_at_least(1), default=None)
    sp.add_argument("--traj-out", type=Path, default=None,
                    help="also simulate --steps transitions and write the trajectory here")

    sp = add("fit", "least-squares VAR fit of a trajectory", False)
    sp.add_argument("--traj", type=Path, required=True)
    sp.add_argument("--lag", type=_int_at_least(1), required=True)
    sp.add_argument("--drop-prefix", type=_int_at_least(0), default=None)

    sp = add("recover", "threshold a fit into a support matrix", False)
    sp.add_argument("--fit", type=Path, required=True)
    sp.add_argument("--threshold", type=_float_in(0), required=True)
    sp.add_argument("--truth", type=Path, default=None,
                    help="system file; report the support error against it")

    sp = add("cmi", "kNN conditional mutual information of CSV samples", False)
    sp.add_argument("--samples", type=Path, required=True)
    sp.add_argument("--x", type=_names, required=True)
    sp.add_argument("--y", type=_names, required=True)
    sp.add_argument("--z", type=_names, default=[])
    sp.add_argument("--k", type=_int_at_least(1), default=10)
    sp.add_argument("--seed", type=_seed, default=0, help="jitter seed for duplicate points")

    sp = add("exp-intro", "lag-1 fit on the latent counter-example", True)
    sp.add_argument("--T", type=_int_at_least(1000), default=100_000)
    sp.add_argument("--noise-var", type=_float_in(0, lo_open=True), default=1.0)
    sp.add_argument("--seeds", type=_int_at_least(1), default=1, help="number of seeds averaged")

    sp = add("exp-fig1", "support error versus lag over random consensus networks", True)
    _consensus_flags(sp, _float_list(0, 0.5, lo_open=True, hi_open=True))
    sp.add_argument("--T", type=_int_at_least(2), default=10_000)
    sp.add_argument("--instances", type=_int_at_least(1), default=50)
    sp.add_argument("--lags", type=parse_lags, default=tuple(range(1, 13)))
    sp.add_argument("--threshold", type=_float_in(0), default=None)

    sp = add("exp-nonlinear", "CMI estimates on the nonlinear example", True)
    sp.add_argument("--samples", type=_int_at_least(2), required=True)
    sp.add_argument("--k", type=_int_at_least(1), default=10)
    sp.add_argument("--noise-var", type=_float_in(0), default=0.1)
    return parser


def parse_args(argv) -> CliInvocation:
    parser = build_parser()
    ns = parser.parse_args(argv)
    opts = vars(ns).copy()
    sub = opts.pop("subcommand")
    out = opts.pop("out")
    if sub == "exp-nonlinear" and ns.samples <= ns.k:
        parser.error("argument --samples: must exceed --k")
    if sub == "gen-consensus" and (ns.steps is None) != (ns.traj_out is None):
        parser.error("argument --traj-out: --steps and --traj-out go together")
    return CliInvocation(subcommand=sub, options=opts, out_path=out)


# -- dispatch --------------------------------------------------------------

def _consensus_params(o, p) -> ConsensusParams:
    return ConsensusParams(n=o["n"], m=o["m"], p=p, q=o["q"], a=o["a"], b=o["b"],
                           sigma2=o["sigma2"], max_tries=o["max_tries"])


def _run(inv: CliInvocation) -> tuple[str, int]:
    o = inv.options
    sub = inv.subcommand
    if sub == "simulate":
        system = formats.load_system(o["system"].read_text())
        traj = simulate_linear(system, o["steps"], x0=o["x0"], seed=o["seed"])
        return formats.dump_trajectory(traj), traj.data.shape[0]
    if sub == "gen-consensus":
        params = _consensus_params(o, o["p"])
        if o["traj_out"] is None:
            net_seq, _ = np.random.SeedSequence(o["seed"]).spawn(2)
            system = generate_consensus(params, net_seq).system
        else:
            system, traj = simulate_consensus(params, o["steps"], o["seed"])
            formats.write_atomic(o["traj_out"], formats.dump_trajectory(traj))
        return formats.dump_system(system), 1
    if sub == "fit":
        traj = formats.load_trajectory(o["traj"].read_text())
        fit = fit_var(traj, o["lag"], o["drop_prefix"])
        if fit.degenerate:
            print("warning: rank-deficient regressors; minimum-norm solution", file=sys.stderr)
        return formats.dump_fit(fit), fit.lag
    if sub == "recover":
        fit = formats.load_fit(o["fit"].read_text())
        support = recover_support(fit, o["threshold"])
        if o["truth"] is not None:
            truth = true_support(formats.load_system(o["truth"].read_text()))
            print(f"support_error {support_error(support, truth)}", file=sys.stderr)
        return formats.dump_support(support), support.shape[0]
    if sub == "cmi":
        samples = formats.load_samples(o["samples"].read_text())
        est = cmi_knn(samples, o["x"], o["y"], o["z"], k=o["k"], seed=o["seed"])
        return formats.dump_cmi(est), 1
    if sub == "exp-intro":
        mat = run_intro_example(o["T"], o["noise_var"], o["seed"], n_seeds=o["seeds"])
        return formats.dump_matrix(mat), 2
    if sub == "exp-fig1":
        config = Fig1Config(
            consensus=_consensus_params(o, o["p"][0]),
            trajectory_len=o["T"],
            instances=o["instances"],
            lag_values=o["lags"],
            p_values=o["p"],
            threshold=o["threshold"],
            base_seed=o["seed"],
        )
        points = run_fig1(config)
        return fig1_csv(points), len(points)
    if sub == "exp-nonlinear":
        first, second = run_nonlinear(o["samples"], o["k"], o["seed"], o["noise_var"])
        return nonlinear_csv(first, second), 2
    raise ValueError(f"unknown subcommand {sub!r}")


def dispatch(inv: CliInvocation) -> int:
    """Run the invocation and write its output atomically; return the exit status."""
    started = time.perf_counter()
    try:
        text, rows = _run(inv)
        formats.write_atomic(inv.out_path, text)
    except (OSError, ValueError, RuntimeError, ArithmeticError, np.linalg.LinAlgError) as exc:
        msg = " ".join(str(exc).split()) or type(exc).__name__
        print(f"error: {type(exc).__name__}: {msg}", file=sys.stderr)
        return 1
    elapsed = time.perf_counter() - started
    print(f"{inv.subcommand}: wrote {rows} rows to {inv.out_path} in {elapsed:.2f}s")
    return 0


def main(argv=None) -> int:
    inv = parse_args(sys.argv[1:] if argv is None else argv)
    return dispatch(inv)


if __name__ == "__main__":
    sys.exit(main())
