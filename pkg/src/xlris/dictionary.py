"""DFT-based dictionaries for the cascaded channel.

Conventions:

* ``dft_matrix(n)[a, b] = exp(-2j pi a b / n) / sqrt(n)``.
* The 2D-DFT is ``U_{N_y} kron U_{N_z}``, matching the element ordering
  ``n_y' * N_z + n_z'``; column ``q_y * N_z + q_z``.
* Transposed Khatri-Rao ``A . B``: row n is ``kron(A[n], B[n])``, so column
  ``i * B.shape[1] + j`` is ``A[:, i] * B[:, j]``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .channel import (
    inverse_mu,
    nf_quadratic_vector,
    ris_ff_steering_psi,
    ris_indices,
)
from .config import SystemConfig, field_boundaries


def dft_matrix(n: int) -> np.ndarray:
    if n < 1:
        raise ValueError("DFT size must be positive")
    idx = np.arange(n)
    return np.exp(-2j * np.pi * np.outer(idx, idx) / n) / np.sqrt(n)


def dft2_matrix(n_y: int, n_z: int) -> np.ndarray:
    return np.kron(dft_matrix(n_y), dft_matrix(n_z))


def khatri_rao_t(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Row-wise Kronecker (face-splitting) product."""
    if A.shape[0] != B.shape[0]:
        raise ValueError("row counts differ")
    return (A[:, :, None] * B[:, None, :]).reshape(A.shape[0], -1)


# ---------------------------------------------------------------------------
# effective-distance profile
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MuProfile:
    """Per-element ``1/mu`` profile with the source that produced it.

    ``r_m = inf`` gives the all-zero profile (pure DFT dictionary).
    """

    inv_mu: np.ndarray
    r_m: float = math.inf
    angles: tuple[float, float] = (0.0, 0.0)

    @classmethod
    def from_source(cls, r_m, phi_1, phi_2, n_y, n_z) -> "MuProfile":
        psi_a, psi_e = np.sin(phi_1), np.cos(phi_1) * np.sin(phi_2)
        return cls(inverse_mu(r_m, psi_a, psi_e, n_y, n_z), float(r_m), (phi_1, phi_2))

    @classmethod
    def far_field(cls, n: int) -> "MuProfile":
        return cls(np.zeros(n))

    @property
    def mu(self) -> np.ndarray:
        with np.errstate(divide="ignore"):
            return 1.0 / self.inv_mu


def default_mu_ref(cfg: SystemConfig) -> MuProfile:
    """Broadside source at the geometric mean of the UE range interval."""
    r_min, r_max = cfg.ue_distance_range_m
    return MuProfile.from_source(math.sqrt(r_min * r_max), 0.0, 0.0, cfg.n_y, cfg.n_z)


def modified_dict(mu: MuProfile, f_p: float, n_y: int, n_z: int, spacing: float) -> np.ndarray:
    """``D_p = diag(d(mu, f_p)) U``."""
    d = nf_quadratic_vector(mu.inv_mu, f_p, spacing)
    return d[:, None] * dft2_matrix(n_y, n_z)


def theta_full(mu: MuProfile, f_p: float, n_y: int, n_z: int, spacing: float) -> np.ndarray:
    """``Theta_p = diag(d^*) (U^* . U)``, shape ``N x N^2``. Test-scale only."""
    U = dft2_matrix(n_y, n_z)
    d = nf_quadratic_vector(mu.inv_mu, f_p, spacing)
    return d.conj()[:, None] * khatri_rao_t(U.conj(), U)


def theta_rep(mu: MuProfile, f_p: float, n_y: int, n_z: int, spacing: float) -> np.ndarray:
    """First N columns of ``Theta_p``, i.e. ``diag(d^*) U / sqrt(N)``."""
    n = n_y * n_z
    d = nf_quadratic_vector(mu.inv_mu, f_p, spacing)
    return d.conj()[:, None] * dft2_matrix(n_y, n_z) / np.sqrt(n)


@dataclass(frozen=True)
class AggregationMap:
    class_of: np.ndarray
    n_y: int
    n_z: int

    @property
    def n(self) -> int:
        return self.n_y * self.n_z

    def matrix(self) -> np.ndarray:
        """Materialise the ``N x N^2`` 0/1 aggregation matrix."""
        P = np.zeros((self.n, self.n**2))
        P[self.class_of, np.arange(self.n**2)] = 1.0
        return P

    def apply(self, rows: np.ndarray) -> np.ndarray:
        """``P @ rows`` without building P (sums rows by class)."""
        rows = np.asarray(rows)
        out = np.zeros((self.n,) + rows.shape[1:], dtype=rows.dtype)
        np.add.at(out, self.class_of, rows)
        return out


def aggregation_map(n_y: int, n_z: int) -> AggregationMap:
    """Class of Khatri-Rao column (i, j): per-axis cyclic difference ``j - i``."""
    if n_y < 1 or n_z < 1:
        raise ValueError("array dimensions must be positive")
    n = n_y * n_z
    i = np.repeat(np.arange(n), n)
    j = np.tile(np.arange(n), n)
    dy = (j // n_z - i // n_z) % n_y
    dz = (j % n_z - i % n_z) % n_z
    return AggregationMap(dy * n_z + dz, n_y, n_z)


# ---------------------------------------------------------------------------
# unified dictionary
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class UnifiedDictionary:
    e_mu: np.ndarray
    theta_rep: np.ndarray
    v_c: np.ndarray
    mu_ref: MuProfile
    n_ris: int

    @property
    def dim(self) -> int:
        return self.e_mu.shape[0]

    def synthesize(self, x: np.ndarray) -> np.ndarray:
        """``H = E_mu X / sqrt(N)``."""
        x = np.asarray(x)
        if x.shape[0] != self.dim:
            raise ValueError(f"coefficient length {x.shape[0]} != {self.dim}")
        return self.e_mu @ x / np.sqrt(self.n_ris)

    def analyze(self, H: np.ndarray) -> np.ndarray:
        """``X = sqrt(N) E_mu^H H``."""
        H = np.asarray(H)
        if H.shape[0] != self.dim:
            raise ValueError(f"channel length {H.shape[0]} != {self.dim}")
        return np.sqrt(self.n_ris) * (self.e_mu.conj().T @ H)


def unified_dictionary(cfg: SystemConfig, mu_ref: MuProfile | None = None) -> UnifiedDictionary:
    """``E_mu = sqrt(N) V_c^* kron Theta_{N,c}`` evaluated at the carrier."""
    mu_ref = default_mu_ref(cfg) if mu_ref is None else mu_ref
    n = cfg.n_ris
    theta = theta_rep(mu_ref, cfg.f_c, cfg.n_y, cfg.n_z, cfg.element_spacing_m)
    v_c = dft_matrix(cfg.n_t)
    e_mu = np.sqrt(n) * np.kron(v_c.conj(), theta)
    return UnifiedDictionary(e_mu, theta, v_c, mu_ref, n)


@dataclass
class SparseCoefficients:
    x_tilde: np.ndarray
    block_size: int

    def block_energy(self) -> np.ndarray:
        return block_energy(self.x_tilde, self.block_size)


def default_block_size(n_ris: int) -> int:
    return math.isqrt(n_ris - 1) + 1 if n_ris > 1 else 1


def analyze_coefficients(
    H: np.ndarray, dictionary: UnifiedDictionary, block_size: int | None = None
) -> SparseCoefficients:
    block_size = default_block_size(dictionary.n_ris) if block_size is None else block_size
    return SparseCoefficients(dictionary.analyze(H), block_size)


def block_energy(x: np.ndarray, block_size: int) -> np.ndarray:
    """Energy per contiguous coefficient block, shape ``(n_blocks, P)``.

    A trailing partial block is kept as its own block.
    """
    x = np.atleast_2d(np.asarray(x).T).T
    n_blocks = -(-x.shape[0] // block_size)
    pad = n_blocks * block_size - x.shape[0]
    energy = np.abs(x) ** 2
    if pad:
        energy = np.vstack([energy, np.zeros((pad, x.shape[1]))])
    return energy.reshape(n_blocks, block_size, -1).sum(axis=1)


def blocks_for_energy(x: np.ndarray, block_size: int, fraction: float = 0.95) -> np.ndarray:
    """Per column, the fewest blocks whose energy reaches ``fraction`` of the total."""
    energy = block_energy(x, block_size)
    total = energy.sum(axis=0)
    ranked = -np.sort(-energy, axis=0)
    cum = np.cumsum(ranked, axis=0)
    counts = np.empty(energy.shape[1], dtype=int)
    for j in range(energy.shape[1]):
        if total[j] == 0:
            counts[j] = 0
        else:
            # small relative slack so an exact 100% target is reachable in float
            counts[j] = int(np.searchsorted(cum[:, j], fraction * total[j] * (1 - 1e-12))) + 1
    return counts


# ---------------------------------------------------------------------------
# frequency normalisation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MappedParams:
    psi_a: float
    psi_e: float
    sin_aod: float
    inv_mu: np.ndarray | None


def frequency_map(
    ratio: float,
    psi_a: float = 0.0,
    psi_e: float = 0.0,
    sin_aod: float = 0.0,
    inv_mu: np.ndarray | None = None,
) -> MappedParams:
    """Map subcarrier-``p`` parameters to equivalent carrier-frequency ones.

    Spatial angles scale by ``eta_p``; ``mu`` scales by ``1/eta_p`` (so
    ``1/mu`` scales by ``eta_p``). No scalar range ``r~`` exists in general
    because the ``mu`` mapping is element dependent.
    """
    if not ratio > 0:
        raise ValueError("frequency ratio must be positive")
    mapped_inv = None if inv_mu is None else np.asarray(inv_mu) * ratio
    return MappedParams(ratio * psi_a, ratio * psi_e, ratio * sin_aod, mapped_inv)


# ---------------------------------------------------------------------------
# polar-domain baseline
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PolarGrid:
    psi_a: np.ndarray
    psi_e: np.ndarray
    ranges_m: np.ndarray
    atoms: np.ndarray

    @property
    def n_rings(self) -> int:
        return len(self.ranges_m)


def polar_angle_grid(n: int) -> np.ndarray:
    """Uniform spatial-angle grid on [-1, 1) with ``n`` points."""
    return -1 + 2 * np.arange(n) / n


def polar_dictionary(cfg: SystemConfig, n_rings: int = 4, gamma: float = 1.0) -> PolarGrid:
    """Near-field (Fresnel) atoms on an angle grid times distance rings.

    Ring ``s`` sits at ``r_s = gamma * R / s`` with ``R`` the Rayleigh
    distance; ``s = 0`` is the far-field ring. Atom column order is
    ``(s, psi_e index, psi_a index)`` with ``psi_a`` fastest.
    """
    if n_rings < 1:
        raise ValueError("need at least one ring")
    n_y, n_z, d = cfg.n_y, cfg.n_z, cfg.element_spacing_m
    _, rayleigh = field_boundaries(cfg)
    ranges = np.array([math.inf] + [gamma * rayleigh / s for s in range(1, n_rings)])
    psi_e_axis = polar_angle_grid(n_y)
    psi_a_axis = polar_angle_grid(n_z)
    pe, pa = np.meshgrid(psi_e_axis, psi_a_axis, indexing="ij")
    pe, pa = pe.ravel(), pa.ravel()

    ny, nz = ris_indices(n_y, n_z)
    k_c = 2 * np.pi / cfg.wavelength
    far = np.exp(1j * k_c * d * (np.outer(nz, pa) + np.outer(ny, pe)))
    weight = np.outer(nz**2, 1 - pa**2) + np.outer(ny**2, 1 - pe**2)
    blocks = []
    for r in ranges:
        quad = np.zeros_like(weight) if np.isinf(r) else k_c * d**2 * weight / (2 * r)
        blocks.append(far * np.exp(1j * quad))
    atoms = np.hstack(blocks) / np.sqrt(n_y * n_z)
    return PolarGrid(pa, pe, ranges, atoms)


def polar_cascaded_dictionary(cfg: SystemConfig, grid: PolarGrid) -> np.ndarray:
    """Synthesis matrix for vec(H_p) over the polar grid: ``V_c^* kron conj(atoms)``.

    The RIS factor of the cascaded channel is ``h^* * b``, so it carries the
    conjugated quadratic phase; conjugating an atom flips its angle, which
    maps the symmetric grid onto itself.
    """
    return np.kron(dft_matrix(cfg.n_t).conj(), grid.atoms.conj())


def far_field_atom(cfg: SystemConfig, psi_a: float, psi_e: float) -> np.ndarray:
    return ris_ff_steering_psi(psi_a, psi_e, cfg.f_c, cfg.n_y, cfg.n_z, cfg.element_spacing_m)
