"""Named estimators that run on one trial's observations.

Every method sees the same :class:`Problem` (channel, pilots, noisy
observations) and returns an :class:`EstimateResult` whose ``h_hat`` is in
the physical vec(H) domain so NMSE is comparable across dictionaries.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from ..config import SystemConfig
from ..dictionary import (
    PolarGrid,
    UnifiedDictionary,
    default_block_size,
    polar_cascaded_dictionary,
    polar_dictionary,
)
from .common import EstimateResult, SolverConfig, nmse
from .greedy import bomp, omp, somp
from .sbl import pcsbl_1d, pcsbl_2d


@dataclass
class Problem:
    cfg: SystemConfig
    dictionary: UnifiedDictionary
    c_matrix: np.ndarray
    y: np.ndarray
    noise_var: float
    H: np.ndarray | None = None
    polar: PolarGrid | None = None
    n_rings: int = 4
    gamma: float = 1.0

    @cached_property
    def omega(self) -> np.ndarray:
        return self.c_matrix.T @ self.dictionary.e_mu / np.sqrt(self.dictionary.n_ris)

    @cached_property
    def polar_synthesis(self) -> np.ndarray:
        grid = self.polar or polar_dictionary(self.cfg, self.n_rings, self.gamma)
        return polar_cascaded_dictionary(self.cfg, grid)

    @cached_property
    def polar_sensing(self) -> np.ndarray:
        return self.c_matrix.T @ self.polar_synthesis


def _finish(problem: Problem, result: EstimateResult) -> EstimateResult:
    if problem.H is not None:
        result.nmse_db = nmse(result.h_hat, problem.H)
    return result


def _greedy_k(cfg: SystemConfig, solver_cfg: SolverConfig, per_block: bool) -> SolverConfig:
    """Fill in block size and a budget of K*L blocks (or blocks-worth of atoms)."""
    if solver_cfg.block_size is None:
        solver_cfg = _replace(solver_cfg, block_size=default_block_size(cfg.n_ris))
    if solver_cfg.k_max is not None:
        return solver_cfg
    paths = cfg.n_paths_bs_ris * cfg.n_paths_ris_ue
    k = paths if per_block else paths * solver_cfg.block_size
    return _replace(solver_cfg, k_max=k)


def _replace(solver_cfg: SolverConfig, **changes) -> SolverConfig:
    data = solver_cfg.to_dict()
    data.update(changes)
    return SolverConfig(**data)


def run_oracle(problem: Problem, solver_cfg: SolverConfig) -> EstimateResult:
    """Exact coefficients pushed through the unitary round trip (accuracy floor)."""
    x = problem.dictionary.analyze(problem.H)
    return _finish(problem, EstimateResult(x, problem.dictionary.synthesize(x)))


def run_p_omp(problem: Problem, solver_cfg: SolverConfig) -> EstimateResult:
    scfg = _greedy_k(problem.cfg, solver_cfg, per_block=False)
    A = problem.polar_sensing
    xs, supports, iters, resid = [], [], 0, 0.0
    for j in range(problem.y.shape[1]):
        res = omp(problem.y[:, j], A, scfg, problem.noise_var)
        xs.append(res.x)
        supports.append(res.support)
        iters = max(iters, res.iterations)
        resid += res.residual_norms[-1] ** 2
    x = np.stack(xs, axis=1)
    out = EstimateResult(x, problem.polar_synthesis @ x, iters, float(np.sqrt(resid)), supports)
    return _finish(problem, out)


def run_p_somp(problem: Problem, solver_cfg: SolverConfig) -> EstimateResult:
    scfg = _greedy_k(problem.cfg, solver_cfg, per_block=False)
    res = somp(problem.y, problem.polar_sensing, scfg, problem.noise_var)
    out = EstimateResult(
        res.x, problem.polar_synthesis @ res.x, res.iterations, res.residual_norms[-1], res.support
    )
    return _finish(problem, out)


def run_bomp(problem: Problem, solver_cfg: SolverConfig) -> EstimateResult:
    scfg = _greedy_k(problem.cfg, solver_cfg, per_block=True)
    xs, supports, iters, resid = [], [], 0, 0.0
    for j in range(problem.y.shape[1]):
        res = bomp(problem.y[:, j], problem.omega, scfg, problem.noise_var)
        xs.append(res.x)
        supports.append(res.support)
        iters = max(iters, res.iterations)
        resid += res.residual_norms[-1] ** 2
    x = np.stack(xs, axis=1)
    out = EstimateResult(x, problem.dictionary.synthesize(x), iters, float(np.sqrt(resid)), supports)
    return _finish(problem, out)


def _sbl_result(problem: Problem, res) -> EstimateResult:
    resid = float(np.linalg.norm(problem.y - problem.omega @ res.x))
    diag = dict(noise_var=float(np.mean(res.noise_var)))
    out = EstimateResult(
        res.x,
        problem.dictionary.synthesize(res.x),
        res.iterations,
        resid,
        converged=res.converged,
        diagnostics=diag,
    )
    return _finish(problem, out)


def run_pcsbl(problem: Problem, solver_cfg: SolverConfig) -> EstimateResult:
    res = pcsbl_1d(problem.y, problem.omega, solver_cfg, problem.noise_var)
    return _sbl_result(problem, res)


def run_pcsbl_2d(problem: Problem, solver_cfg: SolverConfig) -> EstimateResult:
    res = pcsbl_2d(problem.y, problem.omega, solver_cfg, problem.noise_var)
    return _sbl_result(problem, res)


METHODS = {
    "oracle": run_oracle,
    "p-omp": run_p_omp,
    "bomp": run_bomp,
    "pcsbl": run_pcsbl,
    "p-somp": run_p_somp,
    "2d-pcsbl": run_pcsbl_2d,
}


def run_method(name: str, problem: Problem, solver_cfg: SolverConfig | None = None) -> EstimateResult:
    try:
        fn = METHODS[name]
    except KeyError:
        raise ValueError(f"unknown method {name!r}; choose from {sorted(METHODS)}") from None
    solver_cfg = SolverConfig(method=name) if solver_cfg is None else solver_cfg
    return fn(problem, solver_cfg)
