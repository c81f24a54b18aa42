"""End-to-end experiments: the latent-confounder counter-example, the lag
sweep over random consensus networks, and the nonlinear CMI demonstration."""

from __future__ import annotations

import csv
import io
import logging
from dataclasses import dataclass, field, replace

import numpy as np

from .dynamics import (
    ConsensusParams,
    GenerationError,
    InstabilityError,
    generate_consensus,
    intro_system,
    simulate_linear,
    simulate_nonlinear_example,
    true_support,
)
from .formats import fmt_float
from .infotheory import CmiEstimate, SampleSet, cmi_knn
from .varfit import fit_var, recover_support, support_error

log = logging.getLogger(__name__)

MIN_INTRO_LENGTH = 1000


class ExperimentError(RuntimeError):
    pass


def run_intro_example(trajectory_len: int = 100_000, noise_var: float = 1.0, seed: int = 0,
                      n_seeds: int = 1, include_latent: bool = False) -> np.ndarray:
    """Lag-1 least-squares fit on the observed pair of the three-state system.

    Returns the fitted 2 x 2 one-step matrix, averaged over seeds
    ``seed, ..., seed + n_seeds - 1``. With ``include_latent`` the latent
    state is treated as observed and the 3 x 3 fit is returned instead.
    """
    if trajectory_len < MIN_INTRO_LENGTH:
        raise ValueError(f"trajectory_len must be at least {MIN_INTRO_LENGTH}")
    if n_seeds < 1:
        raise ValueError("n_seeds must be at least 1")
    system = intro_system(noise_var)
    fits = []
    for s in range(seed, seed + n_seeds):
        if include_latent:
            states = _simulate_full(system, trajectory_len, s)
        else:
            states = simulate_linear(system, trajectory_len, seed=s).data
        fits.append(fit_var(states, lag=1).lag1)
    return np.mean(fits, axis=0)


def _simulate_full(system, steps: int, seed: int) -> np.ndarray:
    """Simulate observed and latent states together (same noise stream as simulate_linear)."""
    n, m = system.n, system.m
    rng = np.random.default_rng(seed)
    noise = rng.standard_normal((steps, n)) * np.sqrt(system.noise_var)
    A = system.full_matrix
    V = np.zeros((steps + 1, n + m))
    V[0, n:] = system.z0
    for t in range(1, steps + 1):
        V[t] = A @ V[t - 1]
        V[t, :n] += noise[t - 1]
    if not np.all(np.isfinite(V)):
        raise InstabilityError(int(np.flatnonzero(~np.isfinite(V).all(axis=1))[0]))
    return V


@dataclass(frozen=True)
class Fig1Config:
    consensus: ConsensusParams = field(default_factory=ConsensusParams)
    trajectory_len: int = 10_000
    instances: int = 50
    lag_values: tuple[int, ...] = tuple(range(1, 13))
    p_values: tuple[float, ...] = (0.05, 0.10, 0.15)
    threshold: float | None = None
    base_seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "lag_values", tuple(int(v) for v in self.lag_values))
        object.__setattr__(self, "p_values", tuple(float(v) for v in self.p_values))
        if self.instances < 1:
            raise ValueError("instances must be at least 1")
        if self.trajectory_len < 2:
            raise ValueError("trajectory_len must be at least 2")
        lags = self.lag_values
        if not lags or lags[0] < 1 or any(b <= a for a, b in zip(lags, lags[1:])):
            raise ValueError("lag_values must be a nonempty strictly ascending list of lags >= 1")
        if not self.p_values or any(not 0 < p < 0.5 for p in self.p_values):
            raise ValueError("p_values must lie in (0, 0.5)")
        if self.threshold is not None and self.threshold < 0:
            raise ValueError("threshold must be nonnegative")

    @property
    def effective_threshold(self) -> float:
        return self.consensus.a / 2 if self.threshold is None else self.threshold


@dataclass(frozen=True)
class CurvePoint:
    p: float
    lag: int
    avg_error: float
    instances_used: int
    failures: int


def fig1_instance_errors(config: Fig1Config, p: float) -> dict[int, list[int | None]]:
    """Per-instance support errors for every lag at one value of ``p``.

    ``None`` marks an instance that failed (generation, divergence or too
    little data for the lag). Instance ``r`` uses seed ``base_seed + r``.
    """
    params = replace(config.consensus, p=p)
    threshold = config.effective_threshold
    errors: dict[int, list[int | None]] = {lag: [] for lag in config.lag_values}
    for r in range(config.instances):
        seed = config.base_seed + r
        net_seq, noise_seq = np.random.SeedSequence(seed).spawn(2)
        try:
            net = generate_consensus(params, net_seq)
            traj = simulate_linear(net.system, config.trajectory_len, seed=noise_seq)
        except (GenerationError, InstabilityError) as exc:
            log.info("p=%s instance %d rejected: %s", p, r, exc)
            for lag in config.lag_values:
                errors[lag].append(None)
            continue
        truth = true_support(net.system)
        for lag in config.lag_values:
            try:
                fit = fit_var(traj, lag)
            except ValueError as exc:
                log.info("p=%s instance %d lag %d not fitted: %s", p, r, lag, exc)
                errors[lag].append(None)
                continue
            errors[lag].append(support_error(recover_support(fit, threshold), truth))
    return errors


def run_fig1(config: Fig1Config) -> list[CurvePoint]:
    """Average support-recovery error for every (p, lag) cell, sorted by (p, lag)."""
    points = []
    for p in sorted(config.p_values):
        errors = fig1_instance_errors(config, p)
        for lag in config.lag_values:
            ok = [e for e in errors[lag] if e is not None]
            failures = len(errors[lag]) - len(ok)
            if not ok:
                raise ExperimentError(f"all {config.instances} instances failed at p={p}, lag={lag}")
            # fixed reduction order: by instance index
            points.append(CurvePoint(p=p, lag=lag, avg_error=sum(ok) / len(ok),
                                     instances_used=len(ok), failures=failures))
    return points


FIG1_HEADER = ("p", "lag", "avg_error", "instances_used", "failures")


def fig1_csv(points: list[CurvePoint]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(FIG1_HEADER)
    for pt in sorted(points, key=lambda c: (c.p, c.lag)):
        w.writerow([fmt_float(pt.p), pt.lag, fmt_float(pt.avg_error),
                    pt.instances_used, pt.failures])
    return buf.getvalue()


def parse_fig1_csv(text: str) -> list[CurvePoint]:
    reader = csv.reader(io.StringIO(text))
    if tuple(next(reader, ())) != FIG1_HEADER:
        raise ValueError("unexpected Fig. 1 CSV header")
    return [CurvePoint(float(p), int(lag), float(err), int(used), int(fail))
            for p, lag, err, used, fail in (row for row in reader if row)]


def run_nonlinear(n_samples: int = 1000, k: int = 10, seed: int = 0,
                  noise_var: float = 0.1) -> tuple[CmiEstimate, CmiEstimate]:
    """Estimate I(X1(1); X2(0) | X1(0)) and I(X2(1); X1(0) | X2(0))."""
    if n_samples <= k:
        raise ValueError("n_samples must exceed k")
    state = simulate_nonlinear_example(n_samples, noise_var=noise_var, seed=seed)
    samples = SampleSet(state.samples, state.columns)
    first = cmi_knn(samples, ["x1_1"], ["x2_0"], ["x1_0"], k=k, seed=seed)
    second = cmi_knn(samples, ["x2_1"], ["x1_0"], ["x2_0"], k=k, seed=seed)
    return first, second


NONLINEAR_HEADER = ("quantity", "value", "k", "n_samples")


def nonlinear_csv(first: CmiEstimate, second: CmiEstimate) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(NONLINEAR_HEADER)
    for name, est in (("cmi_x1_given", first), ("cmi_x2_given", second)):
        w.writerow([name, fmt_float(est.value), est.k, est.n_samples])
    return buf.getvalue()
