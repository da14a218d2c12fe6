"""Near-field wideband cascaded-channel estimation for XL-RIS OFDM links."""

from .config import SystemConfig, child_rng, desk_profile, field_boundaries, paper_profile, subcarrier_grid

__version__ = "0.1.0"

__all__ = [
    "SystemConfig",
    "child_rng",
    "desk_profile",
    "field_boundaries",
    "paper_profile",
    "subcarrier_grid",
]
