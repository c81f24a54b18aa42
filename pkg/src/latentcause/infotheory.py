"""kNN entropy and conditional mutual information estimates, in nats.

Entropies use the Kozachenko-Leonenko estimator under the maximum norm:

    H = psi(N) - psi(k) + d*log(2) + (d/N) * sum_i log(eps_i)

with eps_i the distance from sample i to its k-th nearest neighbour.
Conditional mutual information is the four-entropy combination
H(X,Z) + H(Y,Z) - H(Z) - H(X,Y,Z).
"""

from __future__ import annotations

import math
from collections.abc import Callable, Sequence
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree
from scipy.special import digamma

from .dynamics import LatentLinearSystem, Trajectory, simulate_linear

MAX_CONDITIONING_DIM = 20
JITTER_SCALE = 1e-10


class DimensionalityError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class SampleSet:
    points: np.ndarray
    column_labels: tuple[str, ...] = ()

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim == 1:
            pts = pts[:, None]
        if pts.ndim != 2 or pts.shape[0] < 2:
            raise ValueError("a sample set needs at least two rows")
        if not np.all(np.isfinite(pts)):
            raise ValueError("samples must be finite")
        labels = tuple(self.column_labels) or tuple(f"v{c}" for c in range(pts.shape[1]))
        if len(labels) != pts.shape[1]:
            raise ValueError("one label per column required")
        pts.flags.writeable = False
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "column_labels", labels)

    @property
    def n_samples(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def column_index(self, key) -> int:
        if isinstance(key, (int, np.integer)):
            if not 0 <= key < self.dim:
                raise IndexError(f"column {key} out of range")
            return int(key)
        try:
            return self.column_labels.index(key)
        except ValueError:
            raise KeyError(f"unknown column {key!r}") from None

    def __eq__(self, other):
        if not isinstance(other, SampleSet):
            return NotImplemented
        return (self.column_labels == other.column_labels
                and np.array_equal(self.points, other.points))


@dataclass(frozen=True)
class CmiEstimate:
    value: float
    k: int
    n_samples: int
    h_xz: float
    h_yz: float
    h_z: float
    h_xyz: float

    @property
    def components(self) -> tuple[float, float, float, float]:
        return (self.h_xz, self.h_yz, self.h_z, self.h_xyz)


def kth_neighbor_distances(points: np.ndarray, k: int) -> np.ndarray:
    """Max-norm distance from each point to its k-th nearest other point (exact)."""
    dist, _ = cKDTree(points).query(points, k=k + 1, p=np.inf)
    return dist[:, k]


def _entropy_from_points(points: np.ndarray, k: int, seed: int) -> float:
    N, d = points.shape
    if d == 0:
        return 0.0
    eps = kth_neighbor_distances(points, k)
    if np.any(eps == 0):
        scale = points.std(axis=0)
        scale[scale == 0] = 1.0
        rng = np.random.default_rng(seed)
        points = points + JITTER_SCALE * scale * rng.standard_normal(points.shape)
        eps = kth_neighbor_distances(points, k)
    # fsum: exact, order-independent.
    mean_log = math.fsum(np.log(eps).tolist()) / N
    return float(digamma(N) - digamma(k) + d * math.log(2.0) + d * mean_log)


def knn_entropy(samples, k: int = 10, seed: int = 0) -> float:
    """Kozachenko-Leonenko differential entropy estimate in nats.

    Parameters
    ----------
    samples : SampleSet or array_like
        N x d samples (a 1-d array is one variable).
    k : int
        Neighbour rank.
    seed : int
        Seed of the tiny jitter applied only when duplicate points make a
        k-th neighbour distance zero.
    """
    points = samples.points if isinstance(samples, SampleSet) else np.asarray(samples, float)
    if points.ndim == 1:
        points = points[:, None]
    N, d = points.shape
    if d < 1:
        raise ValueError("need at least one column")
    if k < 1 or k >= N:
        raise ValueError(f"k must satisfy 1 <= k < N (k={k}, N={N})")
    return _entropy_from_points(points, k, seed)


def _columns(samples: SampleSet, cols) -> list[int]:
    if cols is None:
        return []
    if isinstance(cols, (int, np.integer, str)):
        cols = [cols]
    return [samples.column_index(c) for c in cols]


def cmi_knn(samples, x_cols, y_cols, z_cols=(), k: int = 10, seed: int = 0) -> CmiEstimate:
    """Estimate I(X; Y | Z) as H(X,Z) + H(Y,Z) - H(Z) - H(X,Y,Z).

    With no conditioning columns this is the mutual information
    H(X) + H(Y) - H(X,Y).
    """
    if not isinstance(samples, SampleSet):
        samples = SampleSet(samples)
    x, y, z = (_columns(samples, c) for c in (x_cols, y_cols, z_cols))
    if not x or not y:
        raise ValueError("x_cols and y_cols must be nonempty")
    all_cols = x + y + z
    if len(set(all_cols)) != len(all_cols):
        raise ValueError("column sets must be disjoint and free of repeats")
    N = samples.n_samples
    if k < 1 or k >= N:
        raise ValueError(f"k must satisfy 1 <= k < N (k={k}, N={N})")

    def h(cols):
        # sorted columns: identical point sets give identical estimates
        return _entropy_from_points(samples.points[:, sorted(cols)], k, seed)

    h_xz, h_yz, h_z, h_xyz = h(x + z), h(y + z), h(z), h(x + y + z)
    value = h_xz + h_yz - h_z - h_xyz
    return CmiEstimate(value=value, k=k, n_samples=N,
                       h_xz=h_xz, h_yz=h_yz, h_z=h_z, h_xyz=h_xyz)


def gaussian_cmi(a11_ij: float, var_i: float, var_j: float) -> float:
    """Closed-form 1-step CMI for linear-Gaussian dynamics, in nats.

    0.5 * ln(1 + a11_ij**2 * var_j / var_i); ``var_i``, ``var_j`` are the
    noise variances of the target and source processes.
    """
    if var_i <= 0:
        raise ValueError("var_i must be positive; the criterion needs noise on the target")
    if var_j < 0:
        raise ValueError("var_j must be nonnegative")
    return 0.5 * math.log1p(a11_ij * a11_ij * var_j / var_i)


ReplicaSource = Callable[[np.random.Generator], np.ndarray]


def _replicas(source, t: int, n_replicas: int, seed: int) -> np.ndarray:
    """Stack of ``n_replicas`` independent paths X(0..t), shape (R, t+1, n)."""
    if isinstance(source, np.ndarray) or isinstance(source, Sequence):
        arr = np.asarray(source, dtype=float)
        if arr.ndim != 3 or arr.shape[1] < t + 1:
            raise ValueError("replica array must have shape (R, >= t+1, n)")
        return arr[:, : t + 1]
    seqs = np.random.SeedSequence(seed).spawn(n_replicas)
    if isinstance(source, LatentLinearSystem):
        return np.stack([simulate_linear(source, t, seed=s).data for s in seqs])
    paths = []
    for s in seqs:
        path = source(np.random.default_rng(s))
        path = path.data if isinstance(path, Trajectory) else np.asarray(path, float)
        if path.ndim != 2 or path.shape[0] < t + 1:
            raise ValueError("replica source must return at least t+1 rows")
        paths.append(path[: t + 1])
    return np.stack(paths)


def edge_samples(paths: np.ndarray, i: int, j: int, t: int,
                 history_window: int) -> tuple[SampleSet, list[str]]:
    """Arrange replicas as samples of (X_i(t), X_j(t-1), conditioning history).

    The conditioning set is every X(s), ``t - w <= s <= t-1`` with
    ``w = min(t, history_window)``, minus X_j(t-1). Columns that are constant
    across replicas (deterministic initial values) carry no information and
    are dropped.
    """
    R, _, n = paths.shape
    if t < 1:
        raise ValueError("t must be at least 1")
    if history_window < 1:
        raise ValueError("history_window must be at least 1")
    if not (0 <= i < n and 0 <= j < n):
        raise IndexError(f"process indices ({i}, {j}) out of range for n={n}")
    window = min(t, history_window)
    cols = [paths[:, t, i], paths[:, t - 1, j]]
    labels = [f"x{i + 1}({t})", f"x{j + 1}({t - 1})"]
    cond_labels = []
    for s in range(t - 1, t - 1 - window, -1):
        for c in range(n):
            if s == t - 1 and c == j:
                continue
            col = paths[:, s, c]
            if np.all(col == col[0]):
                continue
            cols.append(col)
            cond_labels.append(f"x{c + 1}({s})")
    return SampleSet(np.column_stack(cols), tuple(labels + cond_labels)), cond_labels


def edge_test(source, i: int, j: int, t: int, *, history_window: int = 2, k: int = 10,
              threshold: float = 0.1, n_replicas: int = 1000,
              seed: int = 0) -> tuple[bool, CmiEstimate]:
    """Decide whether X_j(t-1) influences X_i(t) by thresholding a kNN CMI.

    Parameters
    ----------
    source : LatentLinearSystem, callable or ndarray
        Where independent realizations come from. A system is re-simulated
        from its default initial state; a callable receives a
        ``numpy.random.Generator`` and returns one path with at least
        ``t + 1`` rows; an array of shape (R, T+1, n) is used as given.
    i, j : int
        Target and source process (0-based).
    t : int
        Time index of the target.
    history_window : int
        Number of past steps kept in the conditioning set.

    Returns
    -------
    (bool, CmiEstimate)
        Edge decision (estimate > threshold) and the estimate.
    """
    paths = _replicas(source, t, n_replicas, seed)
    samples, cond = edge_samples(paths, i, j, t, history_window)
    if len(cond) > MAX_CONDITIONING_DIM:
        raise DimensionalityError(
            f"conditioning set has {len(cond)} variables (limit {MAX_CONDITIONING_DIM}); "
            "reduce history_window"
        )
    est = cmi_knn(samples, [0], [1], list(range(2, samples.dim)), k=k, seed=seed)
    return bool(est.value > threshold), est
