"""Latent-block linear systems, the consensus network generator and the
nonlinear three-state example.

State layout everywhere: the first ``n`` coordinates are observed (X), the
remaining ``m`` are latent (Z). Latent states evolve without noise.
"""

from __future__ import annotations

import graphlib
from dataclasses import dataclass, field

import numpy as np

# Simulation aborts once any state magnitude exceeds this.
DIVERGENCE_LIMIT = 1e12
_CHECK_EVERY = 256


class InstabilityError(RuntimeError):
    """Raised when a simulated state diverges."""

    def __init__(self, step: int, message: str | None = None):
        self.step = step
        super().__init__(message or f"simulation diverged at time step {step}")


class GenerationError(RuntimeError):
    """Raised when no acceptable random network is found within ``max_tries``."""

    def __init__(self, tries: int):
        self.tries = tries
        super().__init__(
            f"no network with acyclic latent part after {tries} tries"
        )


def _as_matrix(a, rows: int, cols: int, name: str) -> np.ndarray:
    arr = np.asarray(a, dtype=float)
    if arr.size == 0:
        arr = arr.reshape(rows, cols)
    if arr.shape != (rows, cols):
        raise ValueError(f"{name} has shape {arr.shape}, expected {(rows, cols)}")
    return arr


@dataclass(frozen=True, eq=False)
class LatentLinearSystem:
    """Linear system with observed block X (noisy) and latent block Z (noiseless).

    X(t) = a11 X(t-1) + a12 Z(t-1) + w(t),   w_i ~ N(0, noise_var[i])
    Z(t) = a21 X(t-1) + a22 Z(t-1)
    """

    a11: np.ndarray
    a12: np.ndarray
    a21: np.ndarray
    a22: np.ndarray
    noise_var: np.ndarray
    z0: np.ndarray = None

    def __post_init__(self):
        a11 = np.atleast_2d(np.asarray(self.a11, dtype=float))
        n = a11.shape[0]
        if a11.shape != (n, n):
            raise ValueError(f"a11 must be square, got {a11.shape}")
        a22 = np.asarray(self.a22, dtype=float)
        m = 0 if a22.size == 0 else np.atleast_2d(a22).shape[0]
        a22 = _as_matrix(a22, m, m, "a22")
        a12 = _as_matrix(self.a12, n, m, "a12")
        a21 = _as_matrix(self.a21, m, n, "a21")
        noise_var = np.asarray(self.noise_var, dtype=float).reshape(-1)
        if noise_var.shape != (n,):
            raise ValueError(f"noise_var must have length {n}")
        if np.any(noise_var < 0):
            raise ValueError("noise_var entries must be nonnegative")
        z0 = np.zeros(m) if self.z0 is None else np.asarray(self.z0, dtype=float).reshape(-1)
        if z0.shape != (m,):
            raise ValueError(f"z0 must have length {m}")
        for name, val in [("a11", a11), ("a12", a12), ("a21", a21), ("a22", a22),
                          ("noise_var", noise_var), ("z0", z0)]:
            if not np.all(np.isfinite(val)):
                raise ValueError(f"{name} contains non-finite values")
            val.flags.writeable = False
            object.__setattr__(self, name, val)

    @property
    def n(self) -> int:
        return self.a11.shape[0]

    @property
    def m(self) -> int:
        return self.a22.shape[0]

    @property
    def full_matrix(self) -> np.ndarray:
        """The (n+m) x (n+m) transition matrix [[a11, a12], [a21, a22]]."""
        return np.block([[self.a11, self.a12], [self.a21, self.a22]])

    def spectral_radius(self) -> float:
        if self.n + self.m == 0:
            return 0.0
        return float(np.max(np.abs(np.linalg.eigvals(self.full_matrix))))

    def __eq__(self, other):
        if not isinstance(other, LatentLinearSystem):
            return NotImplemented
        return all(
            np.array_equal(getattr(self, k), getattr(other, k))
            for k in ("a11", "a12", "a21", "a22", "noise_var", "z0")
        )


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Observed states, row ``t`` holding X(t)."""

    data: np.ndarray
    seed: int = 0

    def __post_init__(self):
        data = np.asarray(self.data, dtype=float)
        if data.ndim == 1:
            data = data[:, None]
        if data.ndim != 2 or data.shape[0] < 1:
            raise ValueError("trajectory needs at least one row")
        data.flags.writeable = False
        object.__setattr__(self, "data", data)

    @property
    def n(self) -> int:
        return self.data.shape[1]

    @property
    def steps(self) -> int:
        return self.data.shape[0] - 1

    def __eq__(self, other):
        if not isinstance(other, Trajectory):
            return NotImplemented
        return self.seed == other.seed and np.array_equal(self.data, other.data)


@dataclass(frozen=True)
class ConsensusParams:
    n: int = 10
    m: int = 10
    p: float = 0.1
    q: float = 0.1
    a: float = 0.2
    b: float = 0.7
    sigma2: float = 0.1
    max_tries: int = 1000

    def __post_init__(self):
        if self.n < 1 or self.m < 0:
            raise ValueError("need n >= 1 and m >= 0")
        if not 0 <= self.p <= 0.5:
            raise ValueError(f"p must lie in [0, 0.5], got {self.p}")
        if not 0 <= self.q <= 0.5:
            raise ValueError(f"q must lie in [0, 0.5], got {self.q}")
        if self.a <= 0 or self.b <= 0:
            raise ValueError("weight magnitudes a and b must be positive")
        if self.sigma2 < 0:
            raise ValueError("sigma2 must be nonnegative")
        if self.max_tries < 1:
            raise ValueError("max_tries must be at least 1")


@dataclass(frozen=True)
class ConsensusNetwork:
    """A sampled consensus network: raw edge weights and the derived system."""

    weights: np.ndarray
    system: LatentLinearSystem
    tries: int


@dataclass(frozen=True, eq=False)
class NonlinearExampleState:
    """Samples of (X1(0), X2(0), X1(1), X2(1)) from the three-state example."""

    samples: np.ndarray
    noise_var: float
    z0: float = 0.0

    columns = ("x1_0", "x2_0", "x1_1", "x2_1")

    def __post_init__(self):
        s = np.asarray(self.samples, dtype=float)
        if s.ndim != 2 or s.shape[1] != 4 or s.shape[0] < 1:
            raise ValueError("samples must be an N x 4 matrix with N >= 1")
        s.flags.writeable = False
        object.__setattr__(self, "samples", s)


def _check_seed(seed):
    if isinstance(seed, (np.random.SeedSequence, np.random.Generator)):
        return seed
    if isinstance(seed, bool) or not isinstance(seed, (int, np.integer)):
        raise TypeError(f"seed must be an integer, got {type(seed).__name__}")
    return int(seed)


def _first_divergent_row(block: np.ndarray) -> int | None:
    bad = ~np.isfinite(block) | (np.abs(block) > DIVERGENCE_LIMIT)
    rows = np.flatnonzero(bad.any(axis=1))
    return int(rows[0]) if rows.size else None


def simulate_linear(system: LatentLinearSystem, steps: int, x0=None, seed=0) -> Trajectory:
    """Simulate the observed part of a latent linear system.

    Parameters
    ----------
    system : LatentLinearSystem
    steps : int
        Number of transitions; the trajectory has ``steps + 1`` rows.
    x0 : array_like, optional
        Initial observed state, zeros by default.
    seed : int or numpy.random.SeedSequence
        Seed of the Gaussian noise stream.

    Raises
    ------
    InstabilityError
        If any observed or latent state exceeds ``DIVERGENCE_LIMIT`` or
        becomes non-finite.
    """
    if steps < 1:
        raise ValueError("steps must be at least 1")
    n, m = system.n, system.m
    x0 = np.zeros(n) if x0 is None else np.asarray(x0, dtype=float).reshape(-1)
    if x0.shape != (n,):
        raise ValueError(f"x0 must have length {n}, got {x0.shape[0]}")
    seed = _check_seed(seed)
    rng = np.random.default_rng(seed)
    noise = rng.standard_normal((steps, n)) * np.sqrt(system.noise_var)

    states = np.empty((steps + 1, n + m))
    states[0, :n] = x0
    states[0, n:] = system.z0
    if (bad := _first_divergent_row(states[:1])) is not None:
        raise InstabilityError(0)
    trans = np.ascontiguousarray(system.full_matrix.T)
    with np.errstate(over="ignore", invalid="ignore"):
        for t in range(1, steps + 1):
            np.dot(states[t - 1], trans, out=states[t])
            states[t, :n] += noise[t - 1]
            if t % _CHECK_EVERY == 0 or t == steps:
                start = t - (t - 1) % _CHECK_EVERY
                bad = _first_divergent_row(states[start:t + 1])
                if bad is not None:
                    raise InstabilityError(start + bad)
    return Trajectory(states[:, :n].copy(), seed=seed if isinstance(seed, int) else 0)


def latent_is_acyclic(weights: np.ndarray) -> bool:
    """True when the nonzero off-diagonal pattern of ``weights`` has no directed cycle."""
    w = np.asarray(weights)
    graph = {
        i: {j for j in np.flatnonzero(w[i]) if j != i}
        for i in range(w.shape[0])
    }
    try:
        tuple(graphlib.TopologicalSorter(graph).static_order())
    except graphlib.CycleError:
        return False
    return True


def consensus_matrix(weights: np.ndarray) -> np.ndarray:
    """Map consensus edge weights to the transition matrix.

    Off-diagonal entries copy the weights. The diagonal is
    ``w_ii - sum_{j != i} w_ij`` with ``w_ii`` the sum of the node's
    nonzero-weight edges.
    """
    w = np.array(weights, dtype=float)
    size = w.shape[0]
    np.fill_diagonal(w, 0.0)
    A = w.copy()
    for i in range(size):
        row = w[i]
        w_ii = sum(row[j] for j in range(size) if j != i and row[j] != 0.0)
        A[i, i] = w_ii - sum(row[j] for j in range(size) if j != i)
    return A


def draw_consensus_weights(params: ConsensusParams, rng: np.random.Generator) -> np.ndarray:
    """One draw of the off-diagonal consensus weights (diagonal left at 0)."""
    n, m = params.n, params.m
    size = n + m
    w = rng.choice(
        np.array([-params.a, 0.0, params.a]),
        size=(size, size),
        p=[params.p, 1 - 2 * params.p, params.p],
    )
    if m:
        w[n:, n:] = rng.choice(
            np.array([-params.b, 0.0, params.b]),
            size=(m, m),
            p=[params.q, 1 - 2 * params.q, params.q],
        )
    np.fill_diagonal(w, 0.0)
    return w


def generate_consensus(params: ConsensusParams, seed) -> ConsensusNetwork:
    """Draw a consensus network whose latent subgraph is acyclic.

    Raises
    ------
    GenerationError
        If every one of ``params.max_tries`` draws has a latent cycle.
    """
    rng = np.random.default_rng(_check_seed(seed))
    n = params.n
    for tries in range(1, params.max_tries + 1):
        w = draw_consensus_weights(params, rng)
        if latent_is_acyclic(w[n:, n:]):
            break
    else:
        raise GenerationError(params.max_tries)
    A = consensus_matrix(w)
    system = LatentLinearSystem(
        a11=A[:n, :n], a12=A[:n, n:], a21=A[n:, :n], a22=A[n:, n:],
        noise_var=np.full(n, params.sigma2),
    )
    return ConsensusNetwork(weights=w, system=system, tries=tries)


def simulate_consensus(params: ConsensusParams, steps: int, seed: int,
                       x0=None) -> tuple[LatentLinearSystem, Trajectory]:
    """Generate a random consensus network and simulate it.

    Network and noise use independent streams spawned from ``seed``.
    """
    seed = _check_seed(seed)
    net_seq, noise_seq = np.random.SeedSequence(seed).spawn(2)
    net = generate_consensus(params, net_seq)
    traj = simulate_linear(net.system, steps, x0=x0, seed=noise_seq)
    return net.system, Trajectory(traj.data, seed=seed)


def nonlinear_step(x1, x2, z, w1=0.0, w2=0.0):
    """One transition of the three-state nonlinear example.

    Returns the next ``(x1, x2, z)``.
    """
    x1 = np.asarray(x1, dtype=float)
    x2 = np.asarray(x2, dtype=float)
    z = np.asarray(z, dtype=float)
    x1_next = 0.2 * x1 + 0.4 * np.sqrt(np.abs(z)) + w1
    x2_next = 0.5 * x1 ** 2 + 0.9 * z + w2
    z_next = 0.9 * x1 ** 3 + 0.4 * z
    return x1_next, x2_next, z_next


def simulate_nonlinear_example(n_samples: int, noise_var: float = 0.1, seed: int = 0,
                               z0: float = 0.0) -> NonlinearExampleState:
    """Draw i.i.d. samples of the first transition of the nonlinear example.

    X1(0), X2(0) are standard normal, Z(0) = ``z0`` and the observation
    noises are N(0, noise_var).
    """
    if n_samples < 1:
        raise ValueError("n_samples must be at least 1")
    if noise_var < 0:
        raise ValueError("noise_var must be nonnegative")
    rng = np.random.default_rng(_check_seed(seed))
    x0 = rng.standard_normal((n_samples, 2))
    w = rng.standard_normal((n_samples, 2)) * np.sqrt(noise_var)
    x1_1, x2_1, _ = nonlinear_step(x0[:, 0], x0[:, 1], np.full(n_samples, z0), w[:, 0], w[:, 1])
    return NonlinearExampleState(
        samples=np.column_stack([x0, x1_1, x2_1]), noise_var=noise_var, z0=z0
    )


def nilpotency_index(mat, tol: float = 0.0) -> int | None:
    """Smallest ``l`` in ``[1, dim]`` with ``max|mat**l| <= tol``, else None."""
    M = np.asarray(mat, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError("matrix must be square")
    if tol < 0:
        raise ValueError("tol must be nonnegative")
    dim = M.shape[0]
    if dim == 0:
        return None
    power = M.copy()
    for l in range(1, dim + 1):
        if np.max(np.abs(power)) <= tol:
            return l
        power = power @ M
    return None


@dataclass(frozen=True, eq=False)
class SupportMatrix:
    """Binary adjacency among observed nodes; entry (i, j) = 1 means j -> i."""

    entries: np.ndarray = field()

    def __post_init__(self):
        e = np.asarray(self.entries)
        if e.ndim != 2:
            raise ValueError("support must be a 2-d matrix")
        if not np.all((e == 0) | (e == 1)):
            raise ValueError("support entries must be 0 or 1")
        e = e.astype(np.int8)
        e.flags.writeable = False
        object.__setattr__(self, "entries", e)

    @property
    def shape(self):
        return self.entries.shape

    def __eq__(self, other):
        if not isinstance(other, SupportMatrix):
            return NotImplemented
        return np.array_equal(self.entries, other.entries)


def true_support(system: LatentLinearSystem, tol: float = 1e-9) -> SupportMatrix:
    """Ground-truth 1-step graph among observed processes: ``|a11| > tol``."""
    return SupportMatrix((np.abs(system.a11) > tol).astype(np.int8))


def reduced_var_coeffs(system: LatentLinearSystem, l: int) -> list[np.ndarray]:
    """Coefficients of the latent-free VAR representation, lags 0..l.

    Entry 0 is a11; entry k >= 1 is ``a12 @ a22**(k-1) @ a21``.
    """
    if l < 0:
        raise ValueError("l must be nonnegative")
    coeffs = [system.a11.copy()]
    power = np.eye(system.m)
    for _ in range(l):
        coeffs.append(system.a12 @ power @ system.a21)
        power = power @ system.a22
    return coeffs


def random_nilpotent_system(n: int, m: int, seed, radius: float = 0.9,
                            noise_var: float = 1.0, density: float = 0.6) -> LatentLinearSystem:
    """Random system whose latent block is nilpotent, scaled to a given spectral radius.

    The latent block is strictly triangular under a random relabeling, so
    its interaction graph is acyclic.
    """
    rng = np.random.default_rng(_check_seed(seed))

    def sparse(rows, cols):
        return rng.normal(size=(rows, cols)) * (rng.random((rows, cols)) < density)

    a11, a12, a21 = sparse(n, n), sparse(n, m), sparse(m, n)
    a22 = np.tril(sparse(m, m), k=-1)
    perm = rng.permutation(m)
    a22 = a22[np.ix_(perm, perm)]
    full = np.block([[a11, a12], [a21, a22]])
    rho = np.max(np.abs(np.linalg.eigvals(full)))
    if rho > 0:
        full *= radius / rho
    return LatentLinearSystem(
        a11=full[:n, :n], a12=full[:n, n:], a21=full[n:, :n], a22=full[n:, n:],
        noise_var=np.full(n, noise_var),
    )


def intro_system(noise_var: float = 1.0) -> LatentLinearSystem:
    """Two observed states and one latent state; the latent carries the X1 <- X2 path."""
    A = np.array([[0.0, 0.0, 0.5],
                  [0.5, 0.1, 0.9],
                  [0.9, 0.0, 0.5]])
    return LatentLinearSystem(
        a11=A[:2, :2], a12=A[:2, 2:], a21=A[2:, :2], a22=A[2:, 2:],
        noise_var=[noise_var, noise_var],
    )
