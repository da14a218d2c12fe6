"""Binary container for channels, dictionaries and observation sets.

Layout::

    magic      4 bytes   b"XLRS"
    version    uint32 little-endian
    hlen       uint64 little-endian, length of the JSON header in bytes
    header     UTF-8 JSON: {"kind", "meta", "arrays": [{"name", "shape", "dtype", "offset"}]}
    payload    concatenated arrays

Complex arrays are stored as interleaved (real, imag) little-endian float64
pairs, real arrays as little-endian float64, both in C order. ``offset`` is
relative to the start of the payload.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .channel import ChannelRealization
from .config import SystemConfig
from .dictionary import UnifiedDictionary
from .measurement import ObservationSet

MAGIC = b"XLRS"
VERSION = 1
_PREFIX = struct.Struct("<4sIQ")


class ContainerError(ValueError):
    pass


@dataclass
class Container:
    kind: str
    arrays: dict[str, np.ndarray]
    meta: dict


def _encode(arr: np.ndarray) -> tuple[bytes, str]:
    arr = np.ascontiguousarray(arr)
    if np.iscomplexobj(arr):
        pairs = np.stack([arr.real, arr.imag], axis=-1).astype("<f8")
        return pairs.tobytes(), "complex128"
    return arr.astype("<f8").tobytes(), "float64"


def dump(path, kind: str, arrays: dict[str, np.ndarray], meta: dict | None = None) -> Path:
    path = Path(path)
    entries, chunks, offset = [], [], 0
    for name, arr in arrays.items():
        data, dtype = _encode(np.asarray(arr))
        entries.append(dict(name=name, shape=list(np.shape(arr)), dtype=dtype, offset=offset))
        chunks.append(data)
        offset += len(data)
    header = json.dumps(dict(kind=kind, meta=meta or {}, arrays=entries), sort_keys=True).encode()
    try:
        with path.open("wb") as fh:
            fh.write(_PREFIX.pack(MAGIC, VERSION, len(header)))
            fh.write(header)
            for chunk in chunks:
                fh.write(chunk)
    except OSError as exc:
        raise OSError(f"cannot write container {path}: {exc}") from exc
    return path


def load(path, kind: str | None = None) -> Container:
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise OSError(f"cannot read container {path}: {exc}") from exc
    if len(raw) < _PREFIX.size:
        raise ContainerError(f"{path}: truncated header")
    magic, version, hlen = _PREFIX.unpack_from(raw)
    if magic != MAGIC:
        raise ContainerError(f"{path}: not an xlris container")
    if version != VERSION:
        raise ContainerError(f"{path}: unsupported container version {version}")
    header = json.loads(raw[_PREFIX.size : _PREFIX.size + hlen])
    if kind is not None and header["kind"] != kind:
        raise ContainerError(f"{path}: expected a {kind!r} container, found {header['kind']!r}")
    payload = memoryview(raw)[_PREFIX.size + hlen :]
    arrays = {}
    for entry in header["arrays"]:
        shape = tuple(entry["shape"])
        count = int(np.prod(shape, dtype=np.int64))
        if entry["dtype"] == "complex128":
            flat = np.frombuffer(payload, "<f8", 2 * count, entry["offset"])
            arr = (flat[0::2] + 1j * flat[1::2]).reshape(shape)
        elif entry["dtype"] == "float64":
            arr = np.frombuffer(payload, "<f8", count, entry["offset"]).astype(float).reshape(shape)
        else:
            raise ContainerError(f"{path}: unknown dtype {entry['dtype']!r}")
        arrays[entry["name"]] = arr
    return Container(header["kind"], arrays, header["meta"])


# ---------------------------------------------------------------------------
# typed helpers
# ---------------------------------------------------------------------------


def dump_channel(path, channel: ChannelRealization, cfg: SystemConfig) -> Path:
    arrays = {"H": channel.H}
    if channel.per_subcarrier_g is not None:
        arrays["G"] = channel.per_subcarrier_g
        arrays["h"] = channel.per_subcarrier_h
    return dump(path, "channel", arrays, {"config": cfg.to_dict()})


def load_channel(path) -> tuple[np.ndarray, SystemConfig, dict[str, np.ndarray]]:
    c = load(path, "channel")
    return c.arrays["H"], SystemConfig.from_dict(c.meta["config"]), c.arrays


def dump_dictionary(path, dictionary: UnifiedDictionary, cfg: SystemConfig) -> Path:
    arrays = {"e_mu": dictionary.e_mu, "inv_mu": dictionary.mu_ref.inv_mu}
    meta = {"config": cfg.to_dict(), "mu_ref_range_m": dictionary.mu_ref.r_m, "mu_ref_angles": list(dictionary.mu_ref.angles)}
    return dump(path, "dictionary", arrays, meta)


def load_dictionary(path) -> tuple[np.ndarray, SystemConfig, dict]:
    c = load(path, "dictionary")
    return c.arrays["e_mu"], SystemConfig.from_dict(c.meta["config"]), c.meta


def dump_observations(
    path, obs: ObservationSet, cfg: SystemConfig, H: np.ndarray | None = None, extra: dict | None = None
) -> Path:
    """Store ``C``, ``Y`` and (optionally) the true ``H`` for later replay."""
    arrays = {"c_matrix": obs.c_matrix, "y": obs.y}
    if H is not None:
        arrays["H"] = H
    meta = {"config": cfg.to_dict(), "noise_var": obs.noise_var, "snr_db": obs.snr_db}
    meta.update(extra or {})
    return dump(path, "observations", arrays, meta)


def load_observations(path) -> tuple[ObservationSet, SystemConfig, np.ndarray | None, dict]:
    c = load(path, "observations")
    obs = ObservationSet(
        c.arrays["c_matrix"], None, c.arrays["y"], float(c.meta["noise_var"]), float(c.meta["snr_db"])
    )
    return obs, SystemConfig.from_dict(c.meta["config"]), c.arrays.get("H"), c.meta
