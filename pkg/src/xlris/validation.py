"""Algebraic identity checks for the dictionary, channel and measurement models.

Every check returns a :class:`Check` carrying the measured error and the
tolerance it is held to; :func:`identity_suite` runs them all. The suite
is what ``xlris validate`` prints and what the acceptance tests assert.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import (
    EXACT,
    bs_steering_sin,
    element_distance_exact,
    element_distance_fresnel,
    generate_channel,
    inverse_mu,
    nf_quadratic_vector,
    nf_steering,
    ris_ff_steering_psi,
    ris_indices,
    spatial_angles,
)
from .config import SystemConfig, child_rng, field_boundaries, subcarrier_grid
from .dictionary import (
    MuProfile,
    aggregation_map,
    dft2_matrix,
    dft_matrix,
    frequency_map,
    modified_dict,
    theta_full,
    theta_rep,
    unified_dictionary,
)
from .measurement import gen_pilots, sensing_matrices

FAR_FIELD_FACTOR = 10.0


@dataclass(frozen=True)
class Check:
    name: str
    value: float
    tol: float | None = None

    @property
    def passed(self) -> bool:
        return self.tol is None or self.value <= self.tol

    def line(self) -> str:
        if self.tol is None:
            return f"[INFO] {self.name}: {self.value:.3e}"
        status = "PASS" if self.passed else "FAIL"
        return f"[{status}] {self.name}: {self.value:.3e} (tol {self.tol:.0e})"


def _unitary_gap(M: np.ndarray) -> float:
    return float(np.max(np.abs(M.conj().T @ M - np.eye(M.shape[1]))))


def _rel(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.linalg.norm(a - b) / np.linalg.norm(b))


def _random_mu(cfg: SystemConfig, rng: np.random.Generator) -> MuProfile:
    r_min, r_max = cfg.ue_distance_range_m
    phi = rng.uniform(-np.pi / 2, np.pi / 2, 2)
    return MuProfile.from_source(rng.uniform(r_min, r_max), phi[0], phi[1], cfg.n_y, cfg.n_z)


def _crandn(rng, shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


# ---------------------------------------------------------------------------
# dictionary
# ---------------------------------------------------------------------------


def unitarity_checks(cfg: SystemConfig, rng: np.random.Generator) -> list[Check]:
    grid = subcarrier_grid(cfg)
    n, d = cfg.n_ris, cfg.element_spacing_m
    mu = _random_mu(cfg, rng)
    d_gap = theta_gap = 0.0
    for f_p in grid.frequencies:
        d_gap = max(d_gap, _unitary_gap(modified_dict(mu, f_p, cfg.n_y, cfg.n_z, d)))
        theta = np.sqrt(n) * theta_rep(mu, f_p, cfg.n_y, cfg.n_z, d)
        theta_gap = max(theta_gap, _unitary_gap(theta))
    e_mu = unified_dictionary(cfg).e_mu
    return [
        Check("E_mu unitarity", _unitary_gap(e_mu), 1e-10),
        Check("D_p unitarity (all p)", d_gap, 1e-12),
        Check("sqrt(N) Theta_N,p unitarity (all p)", theta_gap, 1e-12),
    ]


def aggregation_check(cfg: SystemConfig, rng: np.random.Generator) -> Check:
    """``Theta_p = Theta_{N,p} P`` with the full ``N x N^2`` materialisation."""
    if cfg.n_ris > 64:
        raise ValueError("full Khatri-Rao materialisation is limited to N <= 64")
    agg = aggregation_map(cfg.n_y, cfg.n_z).matrix()
    mu = _random_mu(cfg, rng)
    grid = subcarrier_grid(cfg)
    worst = 0.0
    for f_p in grid.frequencies[[0, len(grid) // 2, -1]]:
        args = (mu, f_p, cfg.n_y, cfg.n_z, cfg.element_spacing_m)
        worst = max(worst, float(np.max(np.abs(theta_full(*args) - theta_rep(*args) @ agg))))
    return Check("Theta_p = Theta_N,p P", worst, 1e-12)


def _block_sparse(rng, n: int, block: int, n_blocks: int) -> np.ndarray:
    beta = np.zeros(n, dtype=complex)
    for start in rng.choice(max(1, n - block + 1), size=n_blocks, replace=False):
        beta[start : start + block] = _crandn(rng, min(block, n - start))
    return beta


def chain_checks(cfg: SystemConfig, rng: np.random.Generator, instances: int = 20) -> list[Check]:
    """Factorisation chain, aggregation consistency and vectorisation identity.

    For random block-sparse ``beta`` and sparse ``Lambda``:
    ``diag((D beta)^H) U Lambda V^H = Theta (beta^* kron Lambda) V^H`` and
    ``vec(H) = (V^* kron Theta_N)(I kron P) vec(beta^* kron Lambda)``.
    """
    if cfg.n_ris > 64:
        raise ValueError("chain checks materialise N^2 columns; use N <= 64")
    n, n_t, d = cfg.n_ris, cfg.n_t, cfg.element_spacing_m
    U = dft2_matrix(cfg.n_y, cfg.n_z)
    V = dft_matrix(n_t)
    agg = aggregation_map(cfg.n_y, cfg.n_z)
    agg_mat = agg.matrix()
    grid = subcarrier_grid(cfg)
    block = max(1, int(np.ceil(np.sqrt(n))))
    chain = consistency = vectorised = 0.0
    for _ in range(instances):
        mu = _random_mu(cfg, rng)
        f_p = grid.frequencies[rng.integers(len(grid))]
        beta = _block_sparse(rng, n, block, 2)
        lam = np.zeros((n, n_t), dtype=complex)
        rows = rng.choice(n, size=min(n, 3), replace=False)
        lam[rows] = _crandn(rng, (len(rows), n_t))

        D = modified_dict(mu, f_p, cfg.n_y, cfg.n_z, d)
        lhs = (D @ beta).conj()[:, None] * (U @ lam @ V.conj().T)
        phi = np.kron(beta.conj()[:, None], lam)
        theta = theta_full(mu, f_p, cfg.n_y, cfg.n_z, d)
        theta_n = theta_rep(mu, f_p, cfg.n_y, cfg.n_z, d)
        chain = max(chain, _rel(theta @ phi @ V.conj().T, lhs))
        consistency = max(consistency, _rel(theta_n @ (agg_mat @ phi), theta @ phi))

        vec_h = lhs.reshape(-1, order="F")
        x = agg.apply(phi).reshape(-1, order="F")
        vectorised = max(vectorised, _rel(np.kron(V.conj(), theta_n) @ x, vec_h))
    return [
        Check("Khatri-Rao factorisation chain", chain, 1e-10),
        Check("aggregation consistency", consistency, 1e-10),
        Check("vectorisation identity", vectorised, 1e-10),
    ]


def frequency_map_checks(cfg: SystemConfig, rng: np.random.Generator, draws: int = 100) -> list[Check]:
    """Remapped parameters at ``f_c`` reproduce the subcarrier-``p`` vectors."""
    grid = subcarrier_grid(cfg)
    n_y, n_z, n_t, d, f_c = cfg.n_y, cfg.n_z, cfg.n_t, cfg.element_spacing_m, cfg.f_c
    r_min, r_max = cfg.ue_distance_range_m
    err_b = err_d = err_a = err_mu = 0.0
    for _ in range(draws):
        p = rng.integers(len(grid))
        f_p, eta = grid.frequencies[p], grid.ratios[p]
        phi_1, phi_2, aod = rng.uniform(-np.pi / 2, np.pi / 2, 3)
        r = rng.uniform(r_min, r_max)
        psi_a, psi_e = spatial_angles(phi_1, phi_2)
        inv_mu = inverse_mu(r, psi_a, psi_e, n_y, n_z)
        m = frequency_map(eta, psi_a, psi_e, np.sin(aod), inv_mu)

        b_p = ris_ff_steering_psi(psi_a, psi_e, f_p, n_y, n_z, d)
        err_b = max(err_b, float(np.max(np.abs(b_p - ris_ff_steering_psi(m.psi_a, m.psi_e, f_c, n_y, n_z, d)))))
        d_p = nf_quadratic_vector(inv_mu, f_p, d)
        err_d = max(err_d, float(np.max(np.abs(d_p - nf_quadratic_vector(m.inv_mu, f_c, d)))))
        a_p = bs_steering_sin(np.sin(aod), f_p, n_t, d)
        err_a = max(err_a, float(np.max(np.abs(a_p - bs_steering_sin(m.sin_aod, f_c, n_t, d)))))
        # mu-level map: mu~ = mu / eta, compared where mu is finite
        finite = inv_mu > 0
        mu_mapped = 1.0 / m.inv_mu[finite]
        err_mu = max(err_mu, float(np.max(np.abs(mu_mapped * eta / (1.0 / inv_mu[finite]) - 1))))
    return [
        Check("b remapping (RIS far-field)", err_b, 1e-12),
        Check("d remapping (quadratic phase)", err_d, 1e-12),
        Check("a remapping (BS steering)", err_a, 1e-12),
        Check("mu~ = mu / eta_p", err_mu, 1e-12),
    ]


# ---------------------------------------------------------------------------
# channel decomposition
# ---------------------------------------------------------------------------


def fresnel_phase_bound(cfg: SystemConfig, n_ranges: int = 40, n_angles: int = 37) -> float:
    """Worst ``k_c |exact - fresnel|`` over elements and a grid of (r, phi_1, phi_2)."""
    ny, nz = ris_indices(cfg.n_y, cfg.n_z)
    d = cfg.element_spacing_m
    k_c = 2 * np.pi / cfg.wavelength
    r_min, r_max = cfg.ue_distance_range_m
    angles = np.linspace(-np.pi / 2, np.pi / 2, n_angles)
    a1, a2 = np.meshgrid(angles, angles, indexing="ij")
    a1, a2 = a1.ravel()[:, None], a2.ravel()[:, None]
    worst = 0.0
    for r in np.linspace(r_min, r_max, n_ranges):
        gap = element_distance_exact(r, a1, a2, ny, nz, d) - element_distance_fresnel(r, a1, a2, ny, nz, d)
        worst = max(worst, k_c * float(np.max(np.abs(gap))))
    return worst


def decomposition_checks(cfg: SystemConfig, rng: np.random.Generator, draws: int = 100) -> list[Check]:
    n_y, n_z, d, f_c = cfg.n_y, cfg.n_z, cfg.element_spacing_m, cfg.f_c
    r_min, r_max = cfg.ue_distance_range_m
    _, rayleigh = field_boundaries(cfg)
    ny, nz = ris_indices(n_y, n_z)
    k_c = 2 * np.pi / cfg.wavelength
    factor_gap = far_gap = 0.0
    for _ in range(draws):
        phi_1, phi_2 = rng.uniform(-np.pi / 2, np.pi / 2, 2)
        r = rng.uniform(r_min, r_max)
        c = nf_steering(phi_1, phi_2, f_c, r, n_y, n_z, d)
        # per-element oracle from the Fresnel distances
        dist = element_distance_fresnel(r, phi_1, phi_2, ny, nz, d)
        oracle = np.exp(1j * k_c * (dist - r)) / np.sqrt(n_y * n_z)
        factor_gap = max(factor_gap, float(np.max(np.abs(c - oracle))))

        r_far = FAR_FIELD_FACTOR * rayleigh
        c_far = nf_steering(phi_1, phi_2, f_c, r_far, n_y, n_z, d)
        b = ris_ff_steering_psi(*spatial_angles(phi_1, phi_2), f_c, n_y, n_z, d)
        far_gap = max(far_gap, _rel(c_far, b))
    return [
        Check("fresnel c = b o d", factor_gap, 1e-12),
        Check("|exact - fresnel| phase bound [rad]", fresnel_phase_bound(cfg)),
        Check("far-field limit at 10 R (relative 2-norm)", far_gap, 1e-2),
    ]


# ---------------------------------------------------------------------------
# measurement
# ---------------------------------------------------------------------------


def observation_check(cfg: SystemConfig, rng: np.random.Generator, T: int | None = None) -> Check:
    """``C^T H`` against ``Omega X~`` for a sampled channel (noise-free)."""
    T = cfg.dim // 2 if T is None else T
    dictionary = unified_dictionary(cfg)
    H = generate_channel(cfg, rng, mode=EXACT).H
    C, omega = sensing_matrices(gen_pilots(cfg, T, rng), dictionary)
    physical = C.T @ H
    sparse = omega @ dictionary.analyze(H)
    return Check("C^T H = Omega X~ (noise-free)", _rel(sparse, physical), 1e-10)


def identity_suite(cfg: SystemConfig, seed: int = 0) -> list[Check]:
    """Run every identity check; the ``N^2`` ones only when ``N <= 64``."""
    checks = unitarity_checks(cfg, child_rng(seed, "validate-unitary", 0))
    if cfg.n_ris <= 64:
        checks.append(aggregation_check(cfg, child_rng(seed, "validate-aggregation", 0)))
        checks += chain_checks(cfg, child_rng(seed, "validate-chain", 0))
    checks += frequency_map_checks(cfg, child_rng(seed, "validate-frequency", 0))
    checks += decomposition_checks(cfg, child_rng(seed, "validate-decomposition", 0))
    checks.append(observation_check(cfg, child_rng(seed, "validate-observation", 0)))
    return checks
