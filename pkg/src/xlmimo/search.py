"""Spatial grids, the radiation-power objective and least-squares amplitudes.

Grid points are flattened in x-major order (x outer, y inner), so the first
maximum found by ``np.argmax`` is the one with the smallest x, then the
smallest y.
"""

from __future__ import annotations

import math
from collections import OrderedDict
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .scene import ArrayGeometry, ConfigError, RegionBounds
from .wavefield import array_response, distances, steering_phase, subarray_mask

# Digits kept on grid coordinates so that lattice points equal their decimal literals.
_GRID_DECIMALS = 10

# Cached steering matrices are only kept for grids below this size.
STEERING_CACHE_BYTES = 512 * 2**20
_STEERING_CACHE_ENTRIES = 2
_steering_cache: OrderedDict = OrderedDict()

# Complex entries evaluated per chunk when steering vectors are built on the fly.
_CHUNK_ENTRIES = 2**21


@dataclass(frozen=True, eq=False)
class SpatialGrid:
    """Rectangular lattice of candidate scatterer positions."""

    x: np.ndarray
    y: np.ndarray
    step_x: float
    step_y: float

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        y = np.asarray(self.y, dtype=float)
        if x.size == 0 or y.size == 0:
            raise ConfigError("spatial grid is empty")
        if np.any(np.diff(x) <= 0) or np.any(np.diff(y) <= 0):
            raise ConfigError("grid samples must be strictly ascending")
        if np.any(x < 0):
            raise ConfigError("grid x-samples must be non-negative")
        for arr in (x, y):
            arr.setflags(write=False)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)

    @property
    def shape(self) -> tuple[int, int]:
        return (self.x.size, self.y.size)

    @property
    def size(self) -> int:
        return self.x.size * self.y.size

    def point(self, index: int) -> tuple[float, float]:
        i, j = divmod(int(index), self.y.size)
        return (float(self.x[i]), float(self.y[j]))

    def points(self) -> np.ndarray:
        """All grid points as an (size, 2) array in x-major order."""
        X, Y = np.meshgrid(self.x, self.y, indexing="ij")
        return np.column_stack([X.ravel(), Y.ravel()])

    def _key(self) -> tuple:
        return (self.x.tobytes(), self.y.tobytes())


@dataclass(frozen=True, eq=False)
class LocalGrid(SpatialGrid):
    """Fine lattice around a coarse estimate."""

    center: tuple[float, float] = (0.0, 0.0)
    half_width: float = 0.0
    half_height: float = 0.0


def _axis(lo: float, hi: float, step: float) -> np.ndarray:
    if not step > 0:
        raise ConfigError(f"grid step must be positive, got {step}")
    if hi < lo:
        raise ConfigError(f"empty grid axis [{lo}, {hi}]")
    count = math.floor((hi - lo) / step + 1e-9) + 1
    return np.round(lo + np.arange(count) * step, _GRID_DECIMALS)


def _bounds_tuple(bounds) -> tuple[float, float, float, float]:
    if isinstance(bounds, RegionBounds) or hasattr(bounds, "x_min"):
        return (bounds.x_min, bounds.x_max, bounds.y_min, bounds.y_max)
    x_min, x_max, y_min, y_max = bounds
    return (float(x_min), float(x_max), float(y_min), float(y_max))


def build_coarse_grid(bounds, step_x: float, step_y: float) -> SpatialGrid:
    """Lattice from the lower bounds upward, keeping samples that do not exceed the upper bounds.

    ``bounds`` is a :class:`RegionBounds` or an ``(x_min, x_max, y_min, y_max)``
    tuple; the tuple form allows degenerate (zero-width) rectangles and x_min = 0.
    """
    x_min, x_max, y_min, y_max = _bounds_tuple(bounds)
    return SpatialGrid(_axis(x_min, x_max, step_x), _axis(y_min, y_max, step_y), step_x, step_y)


def build_local_grid(
    center: tuple[float, float],
    half_width: float,
    half_height: float,
    step_x: float,
    step_y: float,
    bounds=None,
) -> LocalGrid:
    """Symmetric fine lattice around ``center``, clipped to x > 0 and to ``bounds``."""
    if not (step_x > 0 and step_y > 0):
        raise ConfigError("local grid steps must be positive")
    cx, cy = center
    kx = math.floor(half_width / step_x + 1e-9)
    ky = math.floor(half_height / step_y + 1e-9)
    xs = np.round(cx + np.arange(-kx, kx + 1) * step_x, _GRID_DECIMALS)
    ys = np.round(cy + np.arange(-ky, ky + 1) * step_y, _GRID_DECIMALS)
    keep_x = xs > 0
    keep_y = np.ones_like(ys, dtype=bool)
    if bounds is not None:
        x_min, x_max, y_min, y_max = _bounds_tuple(bounds)
        keep_x &= (xs >= x_min) & (xs <= x_max)
        keep_y &= (ys >= y_min) & (ys <= y_max)
    # the center itself is always a candidate
    keep_x[kx] = True
    keep_y[ky] = True
    return LocalGrid(
        xs[keep_x], ys[keep_y], step_x, step_y,
        center=(float(cx), float(cy)), half_width=half_width, half_height=half_height,
    )


def _steering_matrix(geometry: ArrayGeometry, grid: SpatialGrid) -> np.ndarray | None:
    """Full (grid x elements) steering matrix when it fits the cache budget."""
    if grid.size * geometry.element_count * 16 > STEERING_CACHE_BYTES:
        return None
    key = (geometry.element_count, geometry.spacing, grid._key())
    B = _steering_cache.get(key)
    if B is None:
        pts = grid.points()
        B = np.empty((grid.size, geometry.element_count), dtype=complex)
        rows = max(1, _CHUNK_ENTRIES // geometry.element_count)
        for start in range(0, grid.size, rows):
            chunk = pts[start : start + rows]
            B[start : start + rows] = np.exp(2j * np.pi * distances(geometry, chunk[:, 0], chunk[:, 1]))
        _steering_cache[key] = B
        while len(_steering_cache) > _STEERING_CACHE_ENTRIES:
            _steering_cache.popitem(last=False)
    else:
        _steering_cache.move_to_end(key)
    return B


def subarray_correlations(
    geometry: ArrayGeometry,
    z: np.ndarray,
    grid: SpatialGrid,
    subarrays: Sequence[int],
    cache: bool = False,
) -> np.ndarray:
    """Per-subarray partial sums of z^H b over every grid point.

    Returns an array of shape (grid.size, len(subarrays)) whose column i holds
    sum over the elements m of subarray ``subarrays[i]`` of conj(z_m) b_m(x, y).
    The radiation power for a visible set is the squared magnitude of the
    row-sum over its columns. With ``cache=True`` the grid's steering matrix is
    kept between calls (for the coarse grid, which every iteration revisits).
    """
    z = np.asarray(z, dtype=complex)
    out = np.zeros((grid.size, len(subarrays)), dtype=complex)
    if not len(subarrays):
        return out
    slices = [_subarray_slice(geometry, n) for n in subarrays]
    B = _steering_matrix(geometry, grid) if cache else None
    if B is not None:
        for i, sl in enumerate(slices):
            out[:, i] = B[:, sl] @ np.conj(z[sl])
        return out

    pts = grid.points()
    K = geometry.subarray_size
    rows = max(1, _CHUNK_ENTRIES // (K * len(slices)))
    for start in range(0, grid.size, rows):
        chunk = pts[start : start + rows]
        for i, sl in enumerate(slices):
            b = np.exp(2j * np.pi * distances(geometry, chunk[:, 0], chunk[:, 1], sl))
            out[start : start + rows, i] = b @ np.conj(z[sl])
    return out


def _subarray_slice(geometry: ArrayGeometry, n: int) -> slice:
    if not 1 <= n <= geometry.subarray_count:
        raise ValueError(f"subarray index {n} outside 1..{geometry.subarray_count}")
    return geometry.subarray_slice(n)


def radiation_power(geometry: ArrayGeometry, subarrays: Iterable[int], z, point) -> float:
    """|(z masked to ``subarrays``)^H b(x, y)|^2 at a single point."""
    mask = subarray_mask(geometry, subarrays)
    if not mask.any():
        return 0.0
    b = steering_phase(geometry, point)
    return float(abs(np.vdot(np.asarray(z)[mask], b[mask])) ** 2)


def amplitude_projection(geometry: ArrayGeometry, subarrays: Iterable[int], z, point) -> complex:
    """Least-squares coefficient of the masked atom a(x, y) fitted to ``z``.

    Raises:
        ValueError: if the masked atom is zero (empty ``subarrays`` or x <= 0).
    """
    mask = subarray_mask(geometry, subarrays)
    if not mask.any():
        raise ValueError("cannot project on an empty visible set")
    atom = array_response(geometry, point)[mask]
    energy = np.vdot(atom, atom).real
    if energy == 0:
        raise ValueError("zero-norm atom")
    return complex(np.vdot(atom, np.asarray(z)[mask]) / energy)


def grid_argmax(
    geometry: ArrayGeometry,
    subarrays: Iterable[int],
    z,
    grid: SpatialGrid,
    cache: bool = False,
) -> tuple[tuple[float, float], float]:
    """Grid point with the largest radiation power, ties to smallest x then y."""
    subarrays = sorted(set(subarrays))
    corr = subarray_correlations(geometry, z, grid, subarrays, cache=cache)
    rho = np.abs(corr.sum(axis=1)) ** 2
    idx = int(np.argmax(rho))
    return grid.point(idx), float(rho[idx])


def pattern_map(geometry: ArrayGeometry, subarrays: Iterable[int], z, grid: SpatialGrid) -> np.ndarray:
    """Radiation power at every grid point, shaped (len(x), len(y))."""
    subarrays = sorted(set(subarrays))
    corr = subarray_correlations(geometry, z, grid, subarrays)
    return (np.abs(corr.sum(axis=1)) ** 2).reshape(grid.shape)
