"""System parameters, subcarrier grid and seeded randomness.

All quantities are SI. Subcarrier indices are 1-based (p = 1..P) in the
public formulas; arrays indexed by subcarrier are 0-based, so column ``j``
of any per-subcarrier array belongs to subcarrier ``p = j + 1``.
"""

from __future__ import annotations

import dataclasses
import json
import zlib
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

# Light speed used throughout; 3e8 reproduces the published F_r/R values.
SPEED_OF_LIGHT = 3e8


class ConfigError(ValueError):
    """Raised for an invalid :class:`SystemConfig`."""


@dataclass(frozen=True)
class SystemConfig:
    """Geometry, band plan and channel statistics of one XL-RIS link.

    ``element_spacing_m`` defaults to half a carrier wavelength and
    ``ue_distance_range_m`` defaults to ``[F_r, R]`` of the RIS aperture.
    RIS elements are ordered ``index = n_y * n_z_count + n_z``.
    """

    n_t: int = 2
    n_y: int = 16
    n_z: int = 4
    f_c: float = 100e9
    bandwidth: float = 10e9
    n_subcarriers: int = 16
    n_paths_bs_ris: int = 2
    n_paths_ris_ue: int = 2
    rician_factor_db: float = 13.0
    bs_ris_distance_m: float = 50.0
    ue_distance_range_m: tuple[float, float] | None = None
    element_spacing_m: float | None = None
    near_field: bool = True
    seed: int = 0

    def __post_init__(self):
        if self.element_spacing_m is None:
            object.__setattr__(self, "element_spacing_m", self.wavelength / 2)
        if self.ue_distance_range_m is None:
            object.__setattr__(self, "ue_distance_range_m", field_boundaries(self))
        else:
            object.__setattr__(
                self, "ue_distance_range_m", tuple(float(v) for v in self.ue_distance_range_m)
            )
        self.validate()

    @property
    def n_ris(self) -> int:
        return self.n_y * self.n_z

    @property
    def wavelength(self) -> float:
        return SPEED_OF_LIGHT / self.f_c

    @property
    def dim(self) -> int:
        """Length of vec(H_p), i.e. ``N * N_t``."""
        return self.n_ris * self.n_t

    def validate(self) -> None:
        counts = dict(
            n_t=self.n_t,
            n_y=self.n_y,
            n_z=self.n_z,
            n_subcarriers=self.n_subcarriers,
            n_paths_bs_ris=self.n_paths_bs_ris,
            n_paths_ris_ue=self.n_paths_ris_ue,
        )
        for name, value in counts.items():
            if int(value) != value or value < 1:
                raise ConfigError(f"{name} must be a positive integer, got {value!r}")
        if not self.f_c > 0:
            raise ConfigError("f_c must be positive")
        if self.bandwidth < 0:
            raise ConfigError("bandwidth must be non-negative")
        if self.bandwidth >= self.f_c:
            raise ConfigError("bandwidth must be below the carrier frequency")
        if not self.element_spacing_m > 0:
            raise ConfigError("element_spacing_m must be positive")
        if not self.bs_ris_distance_m > 0:
            raise ConfigError("bs_ris_distance_m must be positive")
        r_min, r_max = self.ue_distance_range_m
        if not 0 < r_min <= r_max:
            raise ConfigError(f"invalid ue_distance_range_m {self.ue_distance_range_m}")
        if self.near_field:
            fresnel, rayleigh = field_boundaries(self)
            # relative slack absorbs float round-off of the default range
            if r_min < fresnel * (1 - 1e-9) or r_max > rayleigh * (1 + 1e-9):
                raise ConfigError(
                    f"near-field placement needs [{fresnel:.4g}, {rayleigh:.4g}] m, "
                    f"got {self.ue_distance_range_m}"
                )

    def replace(self, **changes) -> "SystemConfig":
        # derived defaults are recomputed unless explicitly overridden
        base = self.to_dict()
        if "f_c" in changes and "element_spacing_m" not in changes:
            base["element_spacing_m"] = None
        geometry = {"f_c", "n_y", "n_z", "element_spacing_m"}
        if geometry & changes.keys() and "ue_distance_range_m" not in changes:
            base["ue_distance_range_m"] = None
        base.update(changes)
        return SystemConfig.from_dict(base)

    def to_dict(self) -> dict:
        out = dataclasses.asdict(self)
        out["ue_distance_range_m"] = list(self.ue_distance_range_m)
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "SystemConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        data = dict(data)
        if data.get("ue_distance_range_m") is not None:
            data["ue_distance_range_m"] = tuple(data["ue_distance_range_m"])
        return cls(**data)

    @classmethod
    def from_json(cls, path: str | Path) -> "SystemConfig":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def to_json(self, path: str | Path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)


def desk_profile(**overrides) -> SystemConfig:
    """Reduced configuration used for tests and acceptance (N=64, N_t=2, P=16)."""
    return SystemConfig(**overrides)


def paper_profile(**overrides) -> SystemConfig:
    """Full-scale configuration (N=128x8, N_t=4, P=128). Long-running."""
    params = dict(n_t=4, n_y=128, n_z=8, n_subcarriers=128)
    params.update(overrides)
    return SystemConfig(**params)


PROFILES = {"desk": desk_profile, "paper": paper_profile}


@dataclass(frozen=True)
class FrequencyGrid:
    frequencies: np.ndarray
    wavenumbers: np.ndarray
    ratios: np.ndarray
    f_c: float = field(default=0.0)

    def __len__(self) -> int:
        return len(self.frequencies)


def subcarrier_grid(cfg: SystemConfig) -> FrequencyGrid:
    """Subcarrier frequencies ``f_p = f_c + (2p - P) B / (2P)`` for p = 1..P."""
    n_sc = cfg.n_subcarriers
    if n_sc < 1:
        raise ConfigError("need at least one subcarrier")
    if cfg.bandwidth < 0:
        raise ConfigError("bandwidth must be non-negative")
    p = np.arange(1, n_sc + 1)
    freqs = cfg.f_c + (2 * p - n_sc) * cfg.bandwidth / (2 * n_sc)
    wavenumbers = 2 * np.pi * freqs / SPEED_OF_LIGHT
    ratios = freqs / cfg.f_c
    for arr in (freqs, wavenumbers, ratios):
        arr.flags.writeable = False
    return FrequencyGrid(freqs, wavenumbers, ratios, cfg.f_c)


def ris_aperture(cfg: SystemConfig) -> float:
    """Diagonal of the RIS over element centres."""
    return cfg.element_spacing_m * float(np.hypot(cfg.n_y - 1, cfg.n_z - 1))


def field_boundaries(cfg: SystemConfig) -> tuple[float, float]:
    """Return ``(fresnel_m, rayleigh_m)`` for the RIS aperture.

    ``F_r = 0.62 sqrt(D^3 / lambda_c)`` and ``R = 2 D^2 / lambda_c``.
    """
    spacing = cfg.element_spacing_m
    if spacing is None:
        spacing = cfg.wavelength / 2
    aperture = spacing * float(np.hypot(cfg.n_y - 1, cfg.n_z - 1))
    lam = cfg.wavelength
    return 0.62 * np.sqrt(aperture**3 / lam), 2 * aperture**2 / lam


def child_rng(root_seed: int, label: str, trial: int = 0) -> np.random.Generator:
    """Independent generator for one (purpose, trial) pair.

    The stream depends only on the three arguments, so trials can run in any
    order or in parallel and still reproduce.
    """
    key = (zlib.crc32(label.encode("utf-8")), int(trial))
    seq = np.random.SeedSequence(entropy=int(root_seed) & (2**64 - 1), spawn_key=key)
    return np.random.default_rng(seq)
