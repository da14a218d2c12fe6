"""Steering vectors and wideband BS-RIS-UE channel synthesis.

The BS-RIS hop is far field (planar wavefront), the RIS-UE hop is near field
(spherical wavefront). Vectorisation of ``H_p`` (N x N_t) is column-major,
so entry ``(n, n_t)`` lands at ``n_t * N + n``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .config import SPEED_OF_LIGHT, FrequencyGrid, SystemConfig, subcarrier_grid

EXACT = "exact"
FRESNEL = "fresnel"


@dataclass(frozen=True)
class BsRisPath:
    gain: complex
    aod_bs: float
    ris_angles: tuple[float, float]
    delay_s: float


@dataclass(frozen=True)
class RisUePath:
    gain: complex
    angles: tuple[float, float]
    range_m: float
    delay_s: float
    is_los: bool = False


@dataclass
class ChannelRealization:
    bs_ris_paths: list[BsRisPath]
    ris_ue_paths: list[RisUePath]
    H: np.ndarray
    per_subcarrier_g: np.ndarray | None = field(default=None, repr=False)
    per_subcarrier_h: np.ndarray | None = field(default=None, repr=False)


def wavenumber(f: float) -> float:
    return 2 * np.pi * f / SPEED_OF_LIGHT


def ris_indices(n_y: int, n_z: int) -> tuple[np.ndarray, np.ndarray]:
    """Per-element ``(n_y', n_z')`` in the global ordering ``n_y' * n_z + n_z'``."""
    ny, nz = np.meshgrid(np.arange(n_y), np.arange(n_z), indexing="ij")
    return ny.ravel(), nz.ravel()


def spatial_angles(angle_1: float, angle_2: float) -> tuple[float, float]:
    """``(Psi_a, Psi_e) = (sin a1, cos a1 sin a2)``."""
    return np.sin(angle_1), np.cos(angle_1) * np.sin(angle_2)


def bs_steering(aod: float, f_p: float, n_t: int, spacing: float) -> np.ndarray:
    """ULA response ``exp(j k_p n d sin(aod)) / sqrt(N_t)``, n = 0..N_t-1."""
    return bs_steering_sin(np.sin(aod), f_p, n_t, spacing)


def bs_steering_sin(sin_aod: float, f_p: float, n_t: int, spacing: float) -> np.ndarray:
    """:func:`bs_steering` parameterised by ``sin(aod)`` (may exceed 1 after remapping)."""
    n = np.arange(n_t)
    return np.exp(1j * wavenumber(f_p) * n * spacing * sin_aod) / np.sqrt(n_t)


def ris_ff_steering_psi(psi_a, psi_e, f_p, n_y, n_z, spacing) -> np.ndarray:
    """Far-field UPA response parameterised directly by spatial angles."""
    ny, nz = ris_indices(n_y, n_z)
    phase = wavenumber(f_p) * spacing * (nz * psi_a + ny * psi_e)
    return np.exp(1j * phase) / np.sqrt(n_y * n_z)


def ris_ff_steering(theta_1, theta_2, f_p, n_y, n_z, spacing) -> np.ndarray:
    psi_a, psi_e = spatial_angles(theta_1, theta_2)
    return ris_ff_steering_psi(psi_a, psi_e, f_p, n_y, n_z, spacing)


def _check_range(r) -> None:
    if np.any(np.asarray(r) <= 0):
        raise ValueError(f"range must be positive, got {r}")


def element_distance_exact(r, phi_1, phi_2, n_y_idx, n_z_idx, spacing):
    """Distance from the source at ``(r, phi_1, phi_2)`` to element ``(n_y', n_z')``."""
    _check_range(r)
    psi_a, psi_e = spatial_angles(phi_1, phi_2)
    return np.sqrt(
        r**2
        + spacing**2 * (n_y_idx**2 + n_z_idx**2)
        + 2 * r * spacing * (n_z_idx * psi_a + n_y_idx * psi_e)
    )


def quadratic_weight(psi_a, psi_e, n_y_idx, n_z_idx):
    """``n_z'^2 (1 - Psi_a^2) + n_y'^2 (1 - Psi_e^2)``; equals ``r / mu`` per element."""
    return n_z_idx**2 * (1 - psi_a**2) + n_y_idx**2 * (1 - psi_e**2)


def element_distance_fresnel(r, phi_1, phi_2, n_y_idx, n_z_idx, spacing):
    """Second-order (Fresnel) expansion of :func:`element_distance_exact`."""
    _check_range(r)
    psi_a, psi_e = spatial_angles(phi_1, phi_2)
    linear = spacing * (n_z_idx * psi_a + n_y_idx * psi_e)
    return r + linear + spacing**2 * quadratic_weight(psi_a, psi_e, n_y_idx, n_z_idx) / (2 * r)


def inverse_mu(r, psi_a, psi_e, n_y, n_z) -> np.ndarray:
    """Per-element ``1 / mu(r, .)``; zero at the reference element and for r = inf.

    Working with ``1/mu`` avoids the 0/0 of ``mu`` at ``n_y' = n_z' = 0``.
    """
    ny, nz = ris_indices(n_y, n_z)
    weight = quadratic_weight(psi_a, psi_e, ny, nz)
    if np.isinf(r):
        return np.zeros(n_y * n_z)
    _check_range(r)
    return weight / r


def nf_quadratic_vector(inv_mu: np.ndarray, f_p: float, spacing: float) -> np.ndarray:
    """Distance-dependent factor ``exp(j k_p d^2 / (2 mu))`` (unit modulus, no 1/sqrt(N))."""
    return np.exp(1j * wavenumber(f_p) * spacing**2 * np.asarray(inv_mu) / 2)


def nf_steering(phi_1, phi_2, f_p, r, n_y, n_z, spacing, mode: str = FRESNEL) -> np.ndarray:
    """Near-field UPA response ``exp(j k_p (r_n - r)) / sqrt(N)``.

    ``mode="fresnel"`` is built as ``b(phi, f_p) * d(mu, f_p)``, which is
    identical to using the Fresnel distances in the phase.
    """
    _check_range(r)
    if mode == EXACT:
        ny, nz = ris_indices(n_y, n_z)
        dist = element_distance_exact(r, phi_1, phi_2, ny, nz, spacing)
        return np.exp(1j * wavenumber(f_p) * (dist - r)) / np.sqrt(n_y * n_z)
    if mode == FRESNEL:
        psi_a, psi_e = spatial_angles(phi_1, phi_2)
        far = ris_ff_steering_psi(psi_a, psi_e, f_p, n_y, n_z, spacing)
        return far * nf_quadratic_vector(inverse_mu(r, psi_a, psi_e, n_y, n_z), f_p, spacing)
    raise ValueError(f"unknown steering mode {mode!r}")


def _rician_gains(n_paths: int, kappa_db: float, rng: np.random.Generator) -> np.ndarray:
    # path 0 is LoS; NLoS paths share the remaining power equally
    phases = np.exp(1j * rng.uniform(0, 2 * np.pi, n_paths))
    if n_paths == 1:
        return phases
    kappa = 10 ** (kappa_db / 10)
    power = np.full(n_paths, 1 / ((kappa + 1) * (n_paths - 1)))
    power[0] = kappa / (kappa + 1)
    return np.sqrt(power) * phases


def sample_paths(
    cfg: SystemConfig, grid: FrequencyGrid | None, rng: np.random.Generator
) -> tuple[list[BsRisPath], list[RisUePath]]:
    """Draw BS-RIS and RIS-UE path parameters.

    All angles are uniform on [-pi/2, pi/2]; UE and scatterer ranges are
    uniform on ``cfg.ue_distance_range_m``; delays are ``range / c``.
    """
    n_l, n_k = cfg.n_paths_bs_ris, cfg.n_paths_ris_ue
    if n_l < 1 or n_k < 1:
        raise ValueError("need at least one path per hop")
    half_pi = np.pi / 2
    rho = _rician_gains(n_l, cfg.rician_factor_db, rng)
    bs_angles = rng.uniform(-half_pi, half_pi, size=(n_l, 3))
    tau_br = cfg.bs_ris_distance_m / SPEED_OF_LIGHT
    bs_ris = [
        BsRisPath(complex(rho[l]), float(a[0]), (float(a[1]), float(a[2])), tau_br)
        for l, a in enumerate(bs_angles)
    ]

    xi = _rician_gains(n_k, cfg.rician_factor_db, rng)
    ue_angles = rng.uniform(-half_pi, half_pi, size=(n_k, 2))
    ranges = rng.uniform(*cfg.ue_distance_range_m, size=n_k)
    ris_ue = [
        RisUePath(
            complex(xi[k]),
            (float(ue_angles[k, 0]), float(ue_angles[k, 1])),
            float(ranges[k]),
            float(ranges[k] / SPEED_OF_LIGHT),
            is_los=(k == 0),
        )
        for k in range(n_k)
    ]
    return bs_ris, ris_ue


def build_G(paths: list[BsRisPath], grid: FrequencyGrid, cfg: SystemConfig) -> np.ndarray:
    """Far-field BS-RIS channels, shape ``(P, N, N_t)``.

    Path gains rotate with frequency as ``rho_l exp(-j 2 pi f_p tau_l)``.
    """
    n, n_t, d = cfg.n_ris, cfg.n_t, cfg.element_spacing_m
    scale = np.sqrt(n_t * n / len(paths))
    G = np.zeros((len(grid), n, n_t), dtype=complex)
    for p, f_p in enumerate(grid.frequencies):
        for path in paths:
            rho = path.gain * np.exp(-2j * np.pi * f_p * path.delay_s)
            b = ris_ff_steering(*path.ris_angles, f_p, cfg.n_y, cfg.n_z, d)
            a = bs_steering(path.aod_bs, f_p, n_t, d)
            G[p] += rho * np.outer(b, a.conj())
        G[p] *= scale
    return G


def build_h(
    paths: list[RisUePath], grid: FrequencyGrid, cfg: SystemConfig, mode: str = EXACT
) -> np.ndarray:
    """Near-field RIS-UE channels, shape ``(P, N)``."""
    n, d = cfg.n_ris, cfg.element_spacing_m
    scale = np.sqrt(n / len(paths))
    h = np.zeros((len(grid), n), dtype=complex)
    for p, f_p in enumerate(grid.frequencies):
        for path in paths:
            xi = path.gain * np.exp(-2j * np.pi * f_p * path.delay_s)
            h[p] += xi * nf_steering(*path.angles, f_p, path.range_m, cfg.n_y, cfg.n_z, d, mode)
        h[p] *= scale
    return h


def build_cascaded(G: np.ndarray, h: np.ndarray) -> np.ndarray:
    """Stack ``vec(diag(h_p^H) G_p)`` as columns, shape ``(N * N_t, P)``."""
    G = np.asarray(G)
    h = np.asarray(h)
    if G.ndim != 3 or h.ndim != 2 or G.shape[:2] != h.shape:
        raise ValueError(f"shape mismatch: G {G.shape}, h {h.shape}")
    cascaded = h.conj()[:, :, None] * G
    # column-major vec of each (N, N_t) slice
    return cascaded.transpose(0, 2, 1).reshape(G.shape[0], -1).T.copy()


def unvec(column: np.ndarray, n_ris: int) -> np.ndarray:
    """Inverse of the column-major vec: length ``N * N_t`` -> ``(N, N_t)``."""
    return np.asarray(column).reshape(-1, n_ris).T


def generate_channel(
    cfg: SystemConfig,
    rng: np.random.Generator,
    grid: FrequencyGrid | None = None,
    mode: str = EXACT,
    keep_factors: bool = False,
) -> ChannelRealization:
    """Sample paths and synthesise the stacked cascaded channel."""
    grid = subcarrier_grid(cfg) if grid is None else grid
    bs_ris, ris_ue = sample_paths(cfg, grid, rng)
    return realize(cfg, bs_ris, ris_ue, grid, mode, keep_factors)


def realize(cfg, bs_ris, ris_ue, grid=None, mode=EXACT, keep_factors=False) -> ChannelRealization:
    """Build a :class:`ChannelRealization` from given path parameters."""
    grid = subcarrier_grid(cfg) if grid is None else grid
    G = build_G(bs_ris, grid, cfg)
    h = build_h(ris_ue, grid, cfg, mode)
    H = build_cascaded(G, h)
    if not keep_factors:
        G = h = None
    return ChannelRealization(bs_ris, ris_ue, H, G, h)
