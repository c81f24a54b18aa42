"""Least-squares VAR fitting and support recovery for the observed block."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import linalg

from .dynamics import SupportMatrix, Trajectory

__all__ = [
    "VarFit",
    "InsufficientDataError",
    "SingularDesignError",
    "lagged_design",
    "fit_var",
    "recover_support",
    "wald_statistic",
    "support_error",
]


class InsufficientDataError(ValueError):
    pass


class SingularDesignError(np.linalg.LinAlgError):
    pass


@dataclass(frozen=True, eq=False)
class VarFit:
    """Result of a no-intercept VAR(lag) least-squares fit.

    ``coeffs[k]`` multiplies X(t-1-k). ``residual_var`` is the per-equation
    mean squared residual (divided by ``sample_count``).
    """

    lag: int
    coeffs: tuple[np.ndarray, ...]
    residual_var: np.ndarray
    sample_count: int
    drop_prefix: int = 0
    degenerate: bool = False

    def __post_init__(self):
        if self.lag < 1:
            raise ValueError("lag must be at least 1")
        coeffs = tuple(np.asarray(c, dtype=float) for c in self.coeffs)
        if len(coeffs) != self.lag:
            raise ValueError(f"expected {self.lag} coefficient matrices, got {len(coeffs)}")
        n = coeffs[0].shape[0]
        if any(c.shape != (n, n) for c in coeffs):
            raise ValueError("coefficient matrices must all be n x n")
        rv = np.asarray(self.residual_var, dtype=float).reshape(-1)
        if rv.shape != (n,) or np.any(rv < 0):
            raise ValueError("residual_var must be n nonnegative values")
        for c in coeffs:
            c.flags.writeable = False
        rv.flags.writeable = False
        object.__setattr__(self, "coeffs", coeffs)
        object.__setattr__(self, "residual_var", rv)

    @property
    def n(self) -> int:
        return self.coeffs[0].shape[0]

    @property
    def lag1(self) -> np.ndarray:
        """Estimated one-step coefficient matrix (the a11 estimate)."""
        return self.coeffs[0]

    def __eq__(self, other):
        if not isinstance(other, VarFit):
            return NotImplemented
        return (
            (self.lag, self.sample_count, self.drop_prefix, self.degenerate)
            == (other.lag, other.sample_count, other.drop_prefix, other.degenerate)
            and all(np.array_equal(a, b) for a, b in zip(self.coeffs, other.coeffs))
            and np.array_equal(self.residual_var, other.residual_var)
        )


def _as_data(traj) -> np.ndarray:
    return traj.data if isinstance(traj, Trajectory) else np.atleast_2d(np.asarray(traj, float))


def lagged_design(data: np.ndarray, lag: int, start: int) -> tuple[np.ndarray, np.ndarray]:
    """Stack regressors ``[X(t-1), ..., X(t-lag)]`` and targets ``X(t)`` for t >= start."""
    T1, n = data.shape
    rows = T1 - start
    R = np.empty((rows, n * lag))
    for k in range(lag):
        R[:, k * n:(k + 1) * n] = data[start - 1 - k:T1 - 1 - k]
    return R, data[start:]


def _start_row(lag: int, drop_prefix: int | None) -> tuple[int, int]:
    drop = lag if drop_prefix is None else drop_prefix
    if drop < 0:
        raise ValueError("drop_prefix must be nonnegative")
    return drop, max(lag, drop)


def fit_var(traj, lag: int, drop_prefix: int | None = None) -> VarFit:
    """Fit X(t) = sum_k C_k X(t-1-k) + e(t) by least squares, no intercept.

    Parameters
    ----------
    traj : Trajectory or array_like
        Observed states, one row per time step.
    lag : int
        Number of lagged states in the regression.
    drop_prefix : int, optional
        Leading samples excluded as targets; defaults to ``lag``.

    Notes
    -----
    Solved with an SVD-based least-squares routine. A rank-deficient design
    yields the minimum-norm solution and ``degenerate=True``.
    """
    if lag < 1:
        raise ValueError("lag must be at least 1")
    data = _as_data(traj)
    T1, n = data.shape
    drop, start = _start_row(lag, drop_prefix)
    needed = lag + drop + n * lag + 1
    if T1 < needed:
        raise InsufficientDataError(
            f"trajectory has {T1} rows; lag {lag} with drop_prefix {drop} needs {needed}"
        )
    R, Y = lagged_design(data, lag, start)
    B, _, rank, _ = np.linalg.lstsq(R, Y, rcond=None)
    resid = Y - R @ B
    residual_var = np.mean(resid ** 2, axis=0)
    coeffs = tuple(B[k * n:(k + 1) * n].T.copy() for k in range(lag))
    return VarFit(
        lag=lag,
        coeffs=coeffs,
        residual_var=residual_var,
        sample_count=Y.shape[0],
        drop_prefix=drop,
        degenerate=bool(rank < R.shape[1]),
    )


def recover_support(fit: VarFit, threshold: float) -> SupportMatrix:
    """Entries whose one-step coefficient exceeds ``threshold`` in magnitude.

    With known weight magnitude ``a`` the usual choice is ``a / 2``.
    """
    if threshold < 0:
        raise ValueError("threshold must be nonnegative")
    return SupportMatrix((np.abs(fit.lag1) > threshold).astype(np.int8))


def wald_statistic(fit: VarFit, traj, i: int, j: int) -> float:
    """Squared t-ratio of the one-step coefficient (i, j).

    Coefficient variance is ``residual_var[i] * inv(R'R)[j, j]`` with R the
    stacked regressors used by ``fit``. Asymptotically chi-square(1) when
    the true coefficient is zero.

    Raises
    ------
    SingularDesignError
        If R'R is singular.
    """
    n = fit.n
    if not (0 <= i < n and 0 <= j < n):
        raise IndexError(f"indices ({i}, {j}) out of range for n={n}")
    data = _as_data(traj)
    if data.shape[1] != n:
        raise ValueError("trajectory dimension does not match the fit")
    _, start = _start_row(fit.lag, fit.drop_prefix)
    R, _ = lagged_design(data, fit.lag, start)
    if R.shape[0] != fit.sample_count:
        raise ValueError("trajectory is not the one the fit was produced from")
    upper = linalg.qr(R, mode="r")[0][: R.shape[1]]
    diag = np.abs(np.diag(upper))
    if diag.size == 0 or diag.min() <= diag.max() * R.shape[1] * np.finfo(float).eps:
        raise SingularDesignError(
            f"regressor cross-product is singular (rank < {R.shape[1]}); "
            "coefficient variance undefined"
        )
    # inv(R'R) = inv(U) inv(U)'; row j of inv(U) gives the diagonal entry.
    inv_upper = linalg.solve_triangular(upper, np.eye(upper.shape[0]))
    var_factor = float(inv_upper[j] @ inv_upper[j])
    coef = float(fit.lag1[i, j])
    variance = float(fit.residual_var[i]) * var_factor
    if variance == 0.0:
        return 0.0 if coef == 0.0 else float("inf")
    return coef * coef / variance


def support_error(est: SupportMatrix, truth: SupportMatrix) -> int:
    """Count of disagreeing entries, i.e. squared Frobenius norm of the difference."""
    if est.shape != truth.shape:
        raise ValueError(f"shape mismatch: {est.shape} vs {truth.shape}")
    return int(np.count_nonzero(est.entries != truth.entries))
