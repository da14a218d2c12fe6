"""Greedy pursuit: OMP, simultaneous OMP and block OMP.

Columns of the sensing matrix are normalised internally for atom
selection; returned coefficients refer to the caller's unnormalised
matrix. Ties go to the lowest index (``np.argmax`` semantics).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .common import REFIT_RIDGE, SolverConfig, check_finite


@dataclass
class GreedyResult:
    x: np.ndarray
    support: list[int]
    residual_norms: list[float]

    @property
    def iterations(self) -> int:
        return len(self.support)


def _normalize(A: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    norms = np.linalg.norm(A, axis=0)
    norms = np.where(norms > 0, norms, 1.0)
    return A / norms, norms


def _refit(A_s: np.ndarray, Y: np.ndarray) -> np.ndarray:
    gram = A_s.conj().T @ A_s
    gram[np.diag_indices_from(gram)] += REFIT_RIDGE
    return np.linalg.solve(gram, A_s.conj().T @ Y)


def _stop_level(cfg: SolverConfig, noise_var: float, n_meas: int, signal_energy: float) -> float:
    level = noise_var if cfg.residual_threshold is None else cfg.residual_threshold
    # noise-free data still needs a relative floor; the refit ridge alone
    # leaves a relative residual near REFIT_RIDGE
    return max(level * n_meas, 1e-16 * signal_energy)


def _pursuit(Y, A, cfg, noise_var, groups, k_max):
    """Shared loop; ``groups`` are contiguous, ordered runs of column indices."""
    Y = np.asarray(Y, dtype=complex)
    squeeze = Y.ndim == 1
    Y = Y.reshape(Y.shape[0], -1)
    check_finite(Y, A)
    An, norms = _normalize(np.asarray(A, dtype=complex))
    n_meas, n_cols = Y.shape
    energy = float(np.sum(np.abs(Y) ** 2))
    stop = _stop_level(cfg, noise_var, n_meas * n_cols, energy)

    starts = np.array([g[0] for g in groups])
    support: list[int] = []
    chosen: list[int] = []
    available = np.ones(len(groups), dtype=bool)
    residual = Y.copy()
    res_norms = [float(np.sqrt(energy))]
    coef = np.zeros((0, n_cols), dtype=complex)
    while len(chosen) < k_max and res_norms[-1] ** 2 > stop and available.any():
        corr = np.sum(np.abs(An.conj().T @ residual) ** 2, axis=1)
        score = np.add.reduceat(corr, starts)
        score[~available] = -np.inf
        best = int(np.argmax(score))
        if score[best] <= 0:
            break
        available[best] = False
        chosen.append(best)
        support.extend(groups[best])
        coef = _refit(An[:, support], Y)
        residual = Y - An[:, support] @ coef
        res_norms.append(float(np.linalg.norm(residual)))

    x = np.zeros((A.shape[1], n_cols), dtype=complex)
    if support:
        x[support] = coef / norms[support, None]
    if squeeze:
        x = x[:, 0]
    return GreedyResult(x, chosen, res_norms)


def _default_k(cfg: SolverConfig, fallback: int) -> int:
    return fallback if cfg.k_max is None else cfg.k_max


def omp(y, A, cfg: SolverConfig = SolverConfig(), noise_var: float = 0.0) -> GreedyResult:
    """Orthogonal matching pursuit for one measurement vector."""
    groups = [[i] for i in range(A.shape[1])]
    return _pursuit(y, A, cfg, noise_var, groups, _default_k(cfg, A.shape[0]))


def somp(Y, A, cfg: SolverConfig = SolverConfig(), noise_var: float = 0.0) -> GreedyResult:
    """Simultaneous OMP: one support shared by every column of ``Y``.

    The atom score is ``sum_p |a^H r_p|^2``.
    """
    groups = [[i] for i in range(A.shape[1])]
    return _pursuit(Y, A, cfg, noise_var, groups, _default_k(cfg, A.shape[0]))


def block_groups(n_cols: int, block_size: int) -> list[list[int]]:
    return [list(range(s, min(s + block_size, n_cols))) for s in range(0, n_cols, block_size)]


def bomp(y, A, cfg: SolverConfig = SolverConfig(), noise_var: float = 0.0) -> GreedyResult:
    """Block OMP over contiguous column blocks of ``cfg.block_size``.

    ``support`` of the result lists selected block indices.
    """
    if cfg.block_size is None:
        raise ValueError("bomp needs an explicit block_size")
    groups = block_groups(A.shape[1], cfg.block_size)
    k_default = max(1, A.shape[0] // cfg.block_size)
    return _pursuit(y, A, cfg, noise_var, groups, _default_k(cfg, k_default))
