"""Spherical-wavefront array responses, channels and noisy pilots."""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .scene import ArrayGeometry, ConfigError, Scene, _check_element


def distances(geometry: ArrayGeometry, x, y, elements: slice | None = None) -> np.ndarray:
    """Point-to-element distances, broadcasting ``x``/``y`` against elements.

    ``x`` and ``y`` may be scalars or arrays of the same shape; the result has
    their shape with a trailing element axis.
    """
    ey = geometry.element_y if elements is None else geometry.element_y[elements]
    x = np.asarray(x, dtype=float)[..., None]
    y = np.asarray(y, dtype=float)[..., None]
    return np.hypot(x, y - ey)


def element_distance(geometry: ArrayGeometry, m: int, point) -> float:
    _check_element(geometry, m)
    x, y = point
    ym = geometry.spacing * (m - (geometry.element_count + 1) / 2)
    return float(np.hypot(x, y - ym))


def array_response(geometry: ArrayGeometry, point, elements: slice | None = None) -> np.ndarray:
    """Near-field response with entries (x/D_m) exp(j 2 pi D_m).

    Raises:
        ValueError: if x <= 0, where the amplitude law degenerates.
    """
    x, y = point
    if not x > 0:
        raise ValueError(f"array response needs x > 0, got {x}")
    D = distances(geometry, x, y, elements)
    return (x / D) * np.exp(2j * np.pi * D)


def steering_phase(geometry: ArrayGeometry, point, elements: slice | None = None) -> np.ndarray:
    """Unit-modulus steering vector exp(j 2 pi D_m)."""
    D = distances(geometry, *point, elements)
    return np.exp(2j * np.pi * D)


def subarray_mask(geometry: ArrayGeometry, subarrays: Iterable[int]) -> np.ndarray:
    """Boolean element mask of the given 1-based subarrays."""
    N = geometry.subarray_count
    mask = np.zeros(N, dtype=bool)
    for n in subarrays:
        if not 1 <= n <= N:
            raise ValueError(f"subarray index {n} outside 1..{N}")
        mask[n - 1] = True
    return np.repeat(mask, geometry.subarray_size)


def selection_vector(geometry: ArrayGeometry, subarrays: Iterable[int]) -> np.ndarray:
    """0/1 vector selecting the elements of ``subarrays``."""
    return subarray_mask(geometry, subarrays).astype(np.int8)


def synthesize_channel(scene: Scene) -> np.ndarray:
    """Superpose every scatterer's masked array response, weighted by its gain."""
    geometry = scene.geometry
    h = np.zeros(geometry.element_count, dtype=complex)
    for sc in scene.scatterers:
        mask = subarray_mask(geometry, sc.visible_subarrays)
        h[mask] += sc.gain * array_response(geometry, sc.position)[mask]
    return h


def subvector(vec: np.ndarray, n: int, subarray_count: int) -> np.ndarray:
    """Entries of subarray ``n`` (1-based) out of ``subarray_count`` equal blocks."""
    vec = np.asarray(vec)
    if not 1 <= n <= subarray_count:
        raise IndexError(f"subarray index {n} outside 1..{subarray_count}")
    K = vec.shape[-1] // subarray_count
    return vec[..., (n - 1) * K : n * K]


@dataclass(frozen=True)
class PilotSnapshot:
    """Received all-ones pilot r = sqrt(P) h + w with unit-variance noise."""

    entries: np.ndarray
    power: float

    def __post_init__(self):
        if not self.power > 0:
            raise ValueError(f"transmit power must be positive, got {self.power}")
        entries = np.asarray(self.entries, dtype=complex)
        if entries.ndim != 1:
            raise ValueError("snapshot entries must be one-dimensional")
        entries.setflags(write=False)
        object.__setattr__(self, "entries", entries)

    noise_variance = 1.0

    def to_bytes(self) -> bytes:
        """Interleaved (re, im) little-endian float64 values."""
        return self.entries.astype("<c16").tobytes()

    @classmethod
    def from_bytes(cls, data: bytes, power: float) -> PilotSnapshot:
        if len(data) % 16:
            raise ValueError("binary snapshot length is not a multiple of 16 bytes")
        return cls(np.frombuffer(data, dtype="<c16").astype(complex), power)

    def to_json(self) -> str:
        flat = np.column_stack([self.entries.real, self.entries.imag]).ravel()
        return json.dumps({"power": self.power, "entries": [float(v) for v in flat]})

    @classmethod
    def from_json(cls, text: str, power: float | None = None) -> PilotSnapshot:
        """Parse either ``{"power": P, "entries": [...]}`` or a bare interleaved array."""
        doc = json.loads(text)
        if isinstance(doc, dict):
            flat = doc.get("entries")
            power = doc.get("power", power)
        else:
            flat = doc
        if flat is None or power is None:
            raise ConfigError("snapshot JSON needs entries and a transmit power")
        flat = np.asarray(flat, dtype=float)
        if flat.ndim != 1 or flat.size % 2:
            raise ConfigError("snapshot entries must be a flat array of (re, im) pairs")
        return cls(flat[0::2] + 1j * flat[1::2], float(power))


def receive_pilot(channel: np.ndarray, power: float, seed) -> PilotSnapshot:
    """Noisy pilot observation with circularly-symmetric unit-variance noise.

    Raises:
        ValueError: if ``power`` is not positive.
    """
    if not power > 0:
        raise ValueError(f"transmit power must be positive, got {power}")
    channel = np.asarray(channel, dtype=complex)
    rng = np.random.default_rng(seed)
    M = channel.shape[0]
    w = (rng.standard_normal(M) + 1j * rng.standard_normal(M)) / np.sqrt(2)
    return PilotSnapshot(np.sqrt(power) * channel + w, power)

