"""Pattern-coupled sparse Bayesian learning (1D and 2D).

Complex circular Gaussian version of the pattern-coupled hierarchical
model. Each coefficient's prior precision is its own hyperparameter plus
``coupling`` times those of its grid neighbours; in 2D the grid is
(coefficient index, subcarrier index). Missing neighbours at the borders
contribute nothing.

Inputs are rescaled to unit average measurement power before the EM loop
so that the Gamma hyperprior ``(a, b)`` acts on a fixed scale; outputs are
scaled back.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import lapack, solve_triangular

from .common import SolverConfig, check_finite


@dataclass
class SblResult:
    x: np.ndarray
    alpha: np.ndarray
    noise_var: np.ndarray
    iterations: int
    converged: bool
    history: list[float]


def neighbour_sum(values: np.ndarray, along_columns: bool) -> np.ndarray:
    """Sum of the up/down (and, optionally, left/right) neighbours on the grid."""
    out = np.zeros_like(values)
    out[1:] += values[:-1]
    out[:-1] += values[1:]
    if along_columns:
        out[:, 1:] += values[:, :-1]
        out[:, :-1] += values[:, 1:]
    return out


def posterior(A: np.ndarray, y: np.ndarray, precision: np.ndarray, noise_var: float):
    """Full Gaussian posterior ``(mean, covariance)`` for one column.

    ``Sigma = (A^H A / s2 + diag(precision))^-1``, ``m = Sigma A^H y / s2``.
    """
    gram = A.conj().T @ A / noise_var
    gram[np.diag_indices_from(gram)] += precision
    L = np.linalg.cholesky(gram)
    L_inv = np.linalg.solve(L, np.eye(len(precision)))
    sigma = L_inv.conj().T @ L_inv
    mean = sigma @ (A.conj().T @ y) / noise_var
    return mean, sigma


def _estep(A: np.ndarray, Y: np.ndarray, precision: np.ndarray, noise_var: np.ndarray):
    """Posterior means and marginal variances for all columns.

    ``precision`` is (M, P); ``noise_var`` has one entry per column.
    Uses the T x T (Woodbury) form when T < M, else the M x M form.
    """
    T, M = A.shape
    P = Y.shape[1]
    AH = A.conj().T
    mean = np.empty((M, P), dtype=complex)
    var = np.empty((M, P))
    if T < M:
        d_inv = 1.0 / precision  # (M, P)
        cov_y = (A[None] * d_inv.T[:, None, :]) @ AH
        cov_y[:, np.arange(T), np.arange(T)] += noise_var[:, None]
        rhs = np.concatenate([A, np.zeros((T, 1), dtype=complex)], axis=1)
        for p in range(P):
            L = _cholesky(cov_y[p])
            rhs[:, M] = Y[:, p]
            W = solve_triangular(L, rhs, lower=True, check_finite=False)  # L^-1 [A | y]
            WA = W[:, :M]
            mean[:, p] = d_inv[:, p] * (WA.conj().T @ W[:, M])
            var[:, p] = d_inv[:, p] - d_inv[:, p] ** 2 * np.sum(np.abs(WA) ** 2, axis=0)
        # posterior variance is positive; clip round-off for precisions near the cap
        return mean, np.maximum(var, d_inv * 1e-12)
    gram = AH @ A
    b = AH @ Y
    for p in range(P):
        lhs = gram / noise_var[p]
        lhs[np.diag_indices(M)] += precision[:, p]
        c, info = lapack.zpotrf(lhs, lower=1)
        if info != 0:
            raise np.linalg.LinAlgError("posterior precision is not positive definite")
        mean[:, p] = lapack.zpotrs(c, b[:, p] / noise_var[p], lower=1)[0]
        inv, info = lapack.zpotri(c, lower=1)
        var[:, p] = inv.real.diagonal()
    return mean, var


def _cholesky(a: np.ndarray) -> np.ndarray:
    c, info = lapack.zpotrf(a, lower=1, clean=1)
    if info != 0:
        raise np.linalg.LinAlgError("measurement covariance is not positive definite")
    return c


def _run(Y, A, cfg: SolverConfig, noise_var: float, couple_columns: bool) -> SblResult:
    Y = np.asarray(Y, dtype=complex)
    A = np.asarray(A, dtype=complex)
    check_finite(Y, A)
    if not np.isfinite(noise_var) or noise_var < 0:
        raise ValueError("noise variance must be finite and non-negative")
    T, M = A.shape
    P = Y.shape[1]
    scale = np.sqrt(np.mean(np.abs(Y) ** 2))
    if scale == 0:
        zeros = np.zeros((M, P), dtype=complex)
        return SblResult(zeros, np.full((M, P), np.inf), np.zeros(P), 0, True, [])
    Yn = Y / scale
    s2 = max(noise_var / scale**2, cfg.noise_floor)
    sigma2 = np.full(P, s2)

    beta = cfg.coupling
    alpha = np.ones((M, P))
    mean = np.zeros((M, P), dtype=complex)
    active = np.ones(P, dtype=bool)
    history: list[float] = []
    converged = False
    it = 0
    for it in range(1, cfg.max_iter + 1):
        precision = alpha + beta * neighbour_sum(alpha, couple_columns)
        cols = np.flatnonzero(active)
        new_mean, var = _estep(A, Yn[:, cols], precision[:, cols], sigma2[cols])
        moment = np.abs(new_mean) ** 2 + var

        prev = mean[:, cols]
        if couple_columns:
            denom = np.linalg.norm(prev)
            change = np.linalg.norm(new_mean - prev) / denom if denom > 0 else np.inf
            col_change = np.full(len(cols), change)
        else:
            denom = np.linalg.norm(prev, axis=0)
            with np.errstate(divide="ignore", invalid="ignore"):
                col_change = np.where(
                    denom > 0, np.linalg.norm(new_mean - prev, axis=0) / denom, np.inf
                )
        history.append(float(np.max(col_change)))
        mean[:, cols] = new_mean

        if cfg.noise_mode == "em":
            resid = np.sum(np.abs(Yn[:, cols] - A @ new_mean) ** 2, axis=0)
            dof = np.sum(1 - precision[:, cols] * var, axis=0)
            if couple_columns:
                sigma2[cols] = (resid.sum() + sigma2[cols][0] * dof.sum()) / (T * len(cols))
            else:
                sigma2[cols] = (resid + sigma2[cols] * dof) / T
            sigma2 = np.maximum(sigma2, cfg.noise_floor)

        # in 1D mode columns never interact, so working on the active subset is exact
        coupled_moment = moment + beta * neighbour_sum(moment, couple_columns)
        alpha[:, cols] = (cfg.a + 1) / (cfg.b + coupled_moment)

        done = col_change < cfg.tol
        if couple_columns:
            if done.all():
                converged = True
                break
        else:
            active[cols[done]] = False
            if not active.any():
                converged = True
                break
    return SblResult(mean * scale, alpha, sigma2 * scale**2, it, converged, history)


def pcsbl_1d(y, A, cfg: SolverConfig = SolverConfig(), noise_var: float = 0.0) -> SblResult:
    """Chain-coupled SBL for one measurement vector (or column-wise for a matrix).

    A matrix ``y`` is processed as independent columns, each stopping on its
    own convergence test, exactly as separate calls would.
    """
    y = np.asarray(y)
    squeeze = y.ndim == 1
    res = _run(y.reshape(y.shape[0], -1), A, cfg, noise_var, couple_columns=False)
    if squeeze:
        res.x = res.x[:, 0]
        res.alpha = res.alpha[:, 0]
    return res


def pcsbl_2d(Y, A, cfg: SolverConfig = SolverConfig(), noise_var: float = 0.0) -> SblResult:
    """Jointly coupled SBL over the (coefficient, subcarrier) grid."""
    Y = np.asarray(Y)
    if Y.ndim == 1:
        Y = Y[:, None]
    return _run(Y, A, cfg, noise_var, couple_columns=True)
