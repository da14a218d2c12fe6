from __future__ import annotations

from dataclasses import dataclass, field, fields

import numpy as np

from ..dictionary import UnifiedDictionary

NMSE_FLOOR_DB = -300.0

# Ridge added to the normal equations of every least-squares refit.
REFIT_RIDGE = 1e-10


@dataclass(frozen=True)
class SolverConfig:
    """Knobs shared by the greedy and Bayesian solvers.

    ``k_max`` counts atoms for OMP/SOMP and blocks for BOMP; ``None`` lets
    the caller pick a problem-dependent default. ``residual_threshold`` is a
    per-measurement residual power; ``None`` means "the noise variance".
    ``block_size = None`` resolves to ``ceil(sqrt(N))`` for the system at hand.
    """

    method: str = "2d-pcsbl"
    k_max: int | None = None
    block_size: int | None = None
    coupling: float = 1.0
    a: float = 0.5
    b: float = 1e-4
    max_iter: int = 200
    tol: float = 1e-4
    noise_mode: str = "known"
    residual_threshold: float | None = None
    noise_floor: float = 1e-6

    def __post_init__(self):
        if self.k_max is not None and self.k_max < 1:
            raise ValueError("k_max must be >= 1")
        if self.block_size is not None and self.block_size < 1:
            raise ValueError("block_size must be >= 1")
        if not 0 <= self.coupling <= 1:
            raise ValueError("coupling must lie in [0, 1]")
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")
        if self.noise_mode not in ("known", "em"):
            raise ValueError(f"noise_mode must be 'known' or 'em', got {self.noise_mode!r}")

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


@dataclass
class EstimateResult:
    x_hat: np.ndarray
    h_hat: np.ndarray
    iterations: int = 0
    residual: float = float("nan")
    support: list | None = None
    nmse_db: float | None = None
    converged: bool = True
    diagnostics: dict = field(default_factory=dict)

    def summary(self) -> dict:
        out = dict(
            iterations=int(self.iterations),
            residual=float(self.residual),
            converged=bool(self.converged),
            nmse_db=None if self.nmse_db is None else float(self.nmse_db),
        )
        if self.support is not None:
            out["support"] = [list(map(int, s)) if np.ndim(s) else int(s) for s in self.support]
        out.update(self.diagnostics)
        return out


def reconstruct(x_hat: np.ndarray, dictionary: UnifiedDictionary) -> np.ndarray:
    """``H_hat = E_mu X_hat / sqrt(N)``."""
    return dictionary.synthesize(x_hat)


def nmse_ratio(h_hat: np.ndarray, h: np.ndarray) -> float:
    ref = float(np.sum(np.abs(h) ** 2))
    if ref == 0:
        raise ValueError("reference channel is identically zero")
    return float(np.sum(np.abs(h_hat - h) ** 2)) / ref


def to_db(ratio: float) -> float:
    if ratio <= 0:
        return NMSE_FLOOR_DB
    return float(max(10 * np.log10(ratio), NMSE_FLOOR_DB))


def nmse(h_hat: np.ndarray, h: np.ndarray) -> float:
    """``10 log10(||H_hat - H||_F^2 / ||H||_F^2)``, floored at -300 dB."""
    return to_db(nmse_ratio(h_hat, h))


def check_finite(*arrays) -> None:
    for arr in arrays:
        if not np.all(np.isfinite(arr)):
            raise ValueError("solver inputs must be finite")
