"""Pilot schedules, sensing matrices and noisy observations."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import SystemConfig
from .dictionary import UnifiedDictionary


@dataclass(frozen=True)
class PilotSchedule:
    """RIS phase patterns ``s`` (T x N) and BS precoders ``f`` (T x N_t)."""

    s: np.ndarray
    f: np.ndarray

    @property
    def T(self) -> int:
        return self.s.shape[0]

    def c_matrix(self) -> np.ndarray:
        """``C`` with column t equal to ``kron(f(t), s(t))``, shape ``(N N_t, T)``."""
        cols = self.f[:, :, None] * self.s[:, None, :]
        return cols.reshape(self.T, -1).T


@dataclass
class ObservationSet:
    c_matrix: np.ndarray
    omega: np.ndarray | None
    y: np.ndarray
    noise_var: float
    snr_db: float

    @property
    def T(self) -> int:
        return self.y.shape[0]


def complex_normal(rng: np.random.Generator, shape, var: float = 1.0) -> np.ndarray:
    """Circularly-symmetric CN(0, var) samples; real and imaginary parts get var/2 each."""
    scale = np.sqrt(var / 2)
    return scale * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


def gen_pilots(cfg: SystemConfig, T: int, rng: np.random.Generator) -> PilotSchedule:
    if T < 1:
        raise ValueError("pilot length must be at least 1")
    s = np.exp(1j * rng.uniform(0, 2 * np.pi, size=(T, cfg.n_ris)))
    f = complex_normal(rng, (T, cfg.n_t))
    return PilotSchedule(s, f)


def sensing_matrices(
    pilots: PilotSchedule, dictionary: UnifiedDictionary
) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(C, Omega)`` with ``Omega = C^T E_mu / sqrt(N)``."""
    C = pilots.c_matrix()
    if C.shape[0] != dictionary.dim:
        raise ValueError(f"pilot dimension {C.shape[0]} != dictionary dimension {dictionary.dim}")
    omega = C.T @ dictionary.e_mu / np.sqrt(dictionary.n_ris)
    return C, omega


def noise_variance(clean: np.ndarray, snr_db: float) -> float:
    """Average per-measurement signal power divided by the linear SNR."""
    if np.isposinf(snr_db):
        return 0.0
    if not np.isfinite(snr_db):
        raise ValueError(f"invalid SNR {snr_db}")
    return float(np.mean(np.abs(clean) ** 2) / 10 ** (snr_db / 10))


def synthesize_observations(
    H: np.ndarray,
    C: np.ndarray,
    snr_db: float,
    rng: np.random.Generator,
    omega: np.ndarray | None = None,
) -> ObservationSet:
    """``Y = C^T H + N`` with white circular Gaussian noise at ``snr_db``."""
    if C.shape[0] != H.shape[0]:
        raise ValueError(f"C has {C.shape[0]} rows, H has {H.shape[0]}")
    clean = C.T @ H
    var = noise_variance(clean, snr_db)
    y = clean + complex_normal(rng, clean.shape, var) if var > 0 else clean
    return ObservationSet(C, omega, y, var, float(snr_db))


def realized_snr_db(obs: ObservationSet, H: np.ndarray) -> float:
    clean = obs.c_matrix.T @ H
    noise = obs.y - clean
    return float(10 * np.log10(np.mean(np.abs(clean) ** 2) / np.mean(np.abs(noise) ** 2)))
