"""Array geometry and randomized ground-truth scenes.

All lengths are in carrier wavelengths. Elements and subarrays are indexed
from 1, matching the usual ULA notation; numpy arrays returned by the helpers
here are 0-based as usual.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np


class ConfigError(ValueError):
    """Invalid configuration or argument value."""


class GenerationError(RuntimeError):
    """Scene generation could not satisfy its constraints."""


@dataclass(frozen=True)
class ArrayGeometry:
    """Uniform linear array along the y-axis, centered at the origin.

    Attributes:
        element_count: Number of elements M.
        subarray_count: Number of equal contiguous subarrays N (must divide M).
        spacing: Element spacing d in wavelengths.
    """

    element_count: int = 1024
    subarray_count: int = 4
    spacing: float = 0.5

    def __post_init__(self):
        M, N = self.element_count, self.subarray_count
        if M < 1 or N < 1:
            raise ConfigError("element_count and subarray_count must be positive")
        if M % N:
            raise ConfigError(f"subarray_count {N} does not divide element_count {M}")
        if M // N < 2:
            raise ConfigError("subarrays need at least 2 elements")
        if not self.spacing > 0:
            raise ConfigError("spacing must be positive")

    @property
    def subarray_size(self) -> int:
        return self.element_count // self.subarray_count

    @cached_property
    def element_y(self) -> np.ndarray:
        """y-coordinates of all elements, shape (M,)."""
        m = np.arange(self.element_count)
        return (m - (self.element_count - 1) / 2) * self.spacing

    def subarray_slice(self, n: int) -> slice:
        """0-based slice of the elements in subarray ``n`` (1-based)."""
        _check_subarray(self, n)
        K = self.subarray_size
        return slice((n - 1) * K, n * K)


def _check_element(geometry: ArrayGeometry, m: int) -> None:
    if not 1 <= m <= geometry.element_count:
        raise IndexError(f"element index {m} outside 1..{geometry.element_count}")


def _check_subarray(geometry: ArrayGeometry, n: int) -> None:
    if not 1 <= n <= geometry.subarray_count:
        raise IndexError(f"subarray index {n} outside 1..{geometry.subarray_count}")


def element_coordinate(geometry: ArrayGeometry, m: int) -> tuple[float, float]:
    """Coordinate of element ``m`` (1-based)."""
    _check_element(geometry, m)
    return (0.0, (m - 1 - (geometry.element_count - 1) / 2) * geometry.spacing)


def subarray_of_element(geometry: ArrayGeometry, m: int) -> int:
    """1-based subarray index ceil(m*N/M) of element ``m``."""
    _check_element(geometry, m)
    M, N = geometry.element_count, geometry.subarray_count
    return -(-m * N // M)


@dataclass(frozen=True)
class RegionBounds:
    """Rectangle in which scatterers may lie."""

    x_min: float = 20.0
    x_max: float = 200.0
    y_min: float = -600.0
    y_max: float = 600.0

    def __post_init__(self):
        if not 0 < self.x_min < self.x_max:
            raise ConfigError("bounds need 0 < x_min < x_max")
        if not self.y_min < self.y_max:
            raise ConfigError("bounds need y_min < y_max")

    def contains(self, x: float, y: float) -> bool:
        return self.x_min <= x <= self.x_max and self.y_min <= y <= self.y_max


@dataclass(frozen=True)
class Scatterer:
    position: tuple[float, float]
    gain: complex
    visible_subarrays: tuple[int, ...]

    def __post_init__(self):
        if not self.visible_subarrays:
            raise ConfigError("a scatterer must see at least one subarray")
        object.__setattr__(self, "visible_subarrays", tuple(sorted(set(self.visible_subarrays))))
        object.__setattr__(self, "position", (float(self.position[0]), float(self.position[1])))
        object.__setattr__(self, "gain", complex(self.gain))


@dataclass(frozen=True)
class Scene:
    geometry: ArrayGeometry
    bounds: RegionBounds
    scatterers: tuple[Scatterer, ...]
    rng_seed: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "scatterers", tuple(self.scatterers))
        if not self.scatterers:
            raise ConfigError("a scene needs at least one scatterer")
        N = self.geometry.subarray_count
        for s in self.scatterers:
            if not all(1 <= n <= N for n in s.visible_subarrays):
                raise ConfigError(f"visible subarrays {s.visible_subarrays} outside 1..{N}")

    def visible_scatterers(self, n: int) -> tuple[int, ...]:
        """Scatterers (1-based) seen by subarray ``n``; may be empty."""
        _check_subarray(self.geometry, n)
        return tuple(s for s, sc in enumerate(self.scatterers, 1) if n in sc.visible_subarrays)

    @property
    def active_subarrays(self) -> tuple[int, ...]:
        """Subarrays that see at least one scatterer."""
        seen = set()
        for sc in self.scatterers:
            seen.update(sc.visible_subarrays)
        return tuple(sorted(seen))

    def to_dict(self) -> dict:
        g, b = self.geometry, self.bounds
        return {
            "geometry": {
                "element_count": g.element_count,
                "subarray_count": g.subarray_count,
                "spacing": g.spacing,
            },
            "bounds": {"x_min": b.x_min, "x_max": b.x_max, "y_min": b.y_min, "y_max": b.y_max},
            "scatterers": [
                {
                    "x": s.position[0],
                    "y": s.position[1],
                    "gain_re": s.gain.real,
                    "gain_im": s.gain.imag,
                    "visible_subarrays": list(s.visible_subarrays),
                }
                for s in self.scatterers
            ],
            "seed": self.rng_seed,
        }

    @classmethod
    def from_dict(cls, data: dict) -> Scene:
        try:
            geometry = ArrayGeometry(**data["geometry"])
            bounds = RegionBounds(**data["bounds"])
            scatterers = tuple(
                Scatterer(
                    position=(s["x"], s["y"]),
                    gain=complex(s["gain_re"], s["gain_im"]),
                    visible_subarrays=tuple(s["visible_subarrays"]),
                )
                for s in data["scatterers"]
            )
        except (KeyError, TypeError) as exc:
            raise ConfigError(f"malformed scene document: {exc!r}") from exc
        return cls(geometry, bounds, scatterers, data.get("seed"))

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_json(cls, text: str) -> Scene:
        return cls.from_dict(json.loads(text))


@dataclass(frozen=True)
class SceneConfig:
    """Parameters of the random scene generator.

    ``visible_count`` is the number of subarrays each scatterer sees (N_s);
    ``None`` means half the subarrays. ``gain_power`` bounds |g|^2.
    """

    geometry: ArrayGeometry = field(default_factory=ArrayGeometry)
    bounds: RegionBounds = field(default_factory=RegionBounds)
    num_scatterers: int = 2
    visible_count: int | None = None
    gain_power: tuple[float, float] = (0.5, 1.0)
    min_separation: float = 20.0
    max_retries: int = 1000
    seed: int = 0

    def __post_init__(self):
        N = self.geometry.subarray_count
        if self.num_scatterers < 1:
            raise ConfigError("num_scatterers must be >= 1")
        if not 1 <= self.n_visible <= N:
            raise ConfigError(f"visible_count {self.n_visible} outside 1..{N}")
        lo, hi = self.gain_power
        if not 0 < lo <= hi < math.inf:
            raise ConfigError("gain_power must satisfy 0 < min <= max < inf")
        if self.min_separation < 0:
            raise ConfigError("min_separation must be >= 0")

    @property
    def n_visible(self) -> int:
        if self.visible_count is None:
            return max(1, self.geometry.subarray_count // 2)
        return self.visible_count


def generate_scene(config: SceneConfig, seed: int | None = None) -> Scene:
    """Draw a random scene.

    Positions are uniform over the bounds rectangle and resampled jointly until
    every pair is at least ``min_separation`` apart. Each scatterer sees a
    contiguous block of ``n_visible`` subarrays with a uniform start, and its
    gain has uniform power in ``gain_power`` and uniform phase.

    Raises:
        GenerationError: if the separation constraint fails ``max_retries`` times.
    """
    seed = config.seed if seed is None else seed
    rng = np.random.default_rng(seed)
    b = config.bounds
    S = config.num_scatterers
    for _ in range(config.max_retries):
        xs = rng.uniform(b.x_min, b.x_max, S)
        ys = rng.uniform(b.y_min, b.y_max, S)
        pts = np.column_stack([xs, ys])
        sep = np.linalg.norm(pts[:, None, :] - pts[None, :, :], axis=-1)
        if S == 1 or sep[np.triu_indices(S, 1)].min() >= config.min_separation:
            break
    else:
        raise GenerationError(
            f"no placement with separation >= {config.min_separation} "
            f"after {config.max_retries} tries"
        )

    power = rng.uniform(*config.gain_power, S)
    phase = rng.uniform(0.0, 2 * np.pi, S)
    gains = np.sqrt(power) * np.exp(1j * phase)
    N, Ns = config.geometry.subarray_count, config.n_visible
    starts = rng.integers(1, N - Ns + 2, S)

    scatterers = tuple(
        Scatterer((xs[s], ys[s]), gains[s], tuple(range(starts[s], starts[s] + Ns)))
        for s in range(S)
    )
    return Scene(config.geometry, b, scatterers, seed)
