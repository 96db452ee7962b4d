"""Hierarchical-grid OMP channel estimators and the LS baseline.

Amplitude convention: an :class:`EstimatedPath` stores ``amplitude`` as the
fitted coefficient of the atom in the received pilot, i.e. an estimate of
sqrt(P) * g. Residual updates subtract ``amplitude * atom`` directly and the
reconstructed channel divides by sqrt(P).
"""

from __future__ import annotations

import math
import time
from collections import defaultdict
from dataclasses import dataclass, field

import numpy as np

from .scene import ArrayGeometry, ConfigError, RegionBounds
from .search import (
    SpatialGrid,
    amplitude_projection,
    build_coarse_grid,
    build_local_grid,
    grid_argmax,
    subarray_correlations,
)
from .wavefield import PilotSnapshot, array_response, steering_phase, subarray_mask

PHASES = ("stopping", "coarse", "visible_coarse", "fine", "amplitude_coarse", "visible_fine", "amplitude")


@dataclass(frozen=True)
class StoppingConfig:
    false_alarm_rate: float = 0.01
    max_iterations: int = 20

    def __post_init__(self):
        if not 0 < self.false_alarm_rate < 1:
            raise ConfigError("false_alarm_rate must lie in (0, 1)")
        if self.max_iterations < 1:
            raise ConfigError("max_iterations must be positive")


@dataclass(frozen=True)
class EstimatorParams:
    """Search and detection settings shared by both estimators.

    ``local_half_width``/``local_half_height`` default to one coarse step.
    ``delta`` and ``alpha`` only affect the scatterer-wise method.
    """

    bounds: RegionBounds = field(default_factory=RegionBounds)
    coarse_step: tuple[float, float] = (4.0, 4.0)
    fine_step: tuple[float, float] = (0.1, 0.1)
    local_half_width: float | None = None
    local_half_height: float | None = None
    delta: float = 0.5
    alpha: float = 0.8
    stopping: StoppingConfig = field(default_factory=StoppingConfig)

    def __post_init__(self):
        if not 0 < self.delta < 1:
            raise ConfigError("delta must lie in (0, 1)")
        if not 0 < self.alpha < 1:
            raise ConfigError("alpha must lie in (0, 1)")
        if min(self.coarse_step) <= 0 or min(self.fine_step) <= 0:
            raise ConfigError("grid steps must be positive")

    @property
    def half_extents(self) -> tuple[float, float]:
        hx = self.coarse_step[0] if self.local_half_width is None else self.local_half_width
        hy = self.coarse_step[1] if self.local_half_height is None else self.local_half_height
        return hx, hy

    def coarse_grid(self) -> SpatialGrid:
        return build_coarse_grid(self.bounds, *self.coarse_step)

    def local_grid(self, center):
        return build_local_grid(center, *self.half_extents, *self.fine_step, self.bounds)


@dataclass(frozen=True)
class EstimatedPath:
    position: tuple[float, float]
    amplitude: complex
    visible_set: tuple[int, ...]

    def to_dict(self) -> dict:
        return {
            "x": self.position[0],
            "y": self.position[1],
            "amplitude_re": self.amplitude.real,
            "amplitude_im": self.amplitude.imag,
            "visible_subarrays": list(self.visible_set),
        }


@dataclass
class IterationTrace:
    """Intermediate sets of one scatterer-wise iteration."""

    failing: tuple[int, ...]
    coarse_position: tuple[float, float]
    gamma: dict[int, float]
    coarse_visible: tuple[int, ...]
    fine_position: tuple[float, float]
    coarse_amplitude: complex
    visible: tuple[int, ...]


@dataclass
class EstimationResult:
    """Output of one estimator run.

    For the subarray-wise method ``iterations`` and ``truncated`` hold one entry
    per subarray; for the scatterer-wise method a single entry.
    """

    method: str
    paths: list[EstimatedPath]
    channel: np.ndarray
    path_counts: list[int]
    iterations: list[int]
    truncated: list[bool]
    timings: dict[str, float] = field(default_factory=dict)
    trace: list[IterationTrace] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "paths": [p.to_dict() for p in self.paths],
            "path_counts": self.path_counts,
            "iterations": self.iterations,
            "truncated": self.truncated,
            "timings": dict(self.timings),
        }


def noise_floor_threshold(segment_length: int, false_alarm_rate: float) -> float:
    """Threshold on the largest squared unitary-DFT bin of white unit-variance noise.

    The maximum of K independent Exp(1) bin powers exceeds the returned value
    with probability ``false_alarm_rate``.
    """
    if segment_length < 1:
        raise ValueError("segment_length must be >= 1")
    if not 0 < false_alarm_rate < 1:
        raise ValueError("false_alarm_rate must lie in (0, 1)")
    # 1 - (1 - pfa)^(1/K), computed without cancellation
    tail = -math.expm1(math.log1p(-false_alarm_rate) / segment_length)
    return -math.log(tail)


def residual_is_noise(segment: np.ndarray, threshold: float) -> bool:
    """True when no unitary-DFT bin of ``segment`` reaches ``threshold`` in power."""
    spectrum = np.fft.fft(np.asarray(segment, dtype=complex), norm="ortho")
    return bool(np.max(np.abs(spectrum) ** 2) < threshold)


def ls_estimate(snapshot: PilotSnapshot) -> np.ndarray:
    return snapshot.entries / np.sqrt(snapshot.power)


class _Clock:
    def __init__(self):
        self.totals = defaultdict(float)

    def __call__(self, phase: str, start: float) -> float:
        now = time.perf_counter()
        self.totals[phase] += now - start
        return now


def subarray_wise_estimate(
    snapshot: PilotSnapshot, geometry: ArrayGeometry, params: EstimatorParams | None = None
) -> EstimationResult:
    """Run refined OMP on each subarray's pilot segment independently."""
    params = params or EstimatorParams()
    r = np.asarray(snapshot.entries)
    if r.shape != (geometry.element_count,):
        raise ValueError("snapshot length does not match the array geometry")
    sqrt_p = math.sqrt(snapshot.power)
    N = geometry.subarray_count
    tau = noise_floor_threshold(geometry.subarray_size, params.stopping.false_alarm_rate)
    coarse = params.coarse_grid()
    clock = _Clock()

    paths: list[EstimatedPath] = []
    h_est = np.zeros_like(r)
    counts, iterations, truncated = [], [], []
    for n in range(1, N + 1):
        sl = geometry.subarray_slice(n)
        r_n = r[sl]
        fitted = np.zeros_like(r_n)
        found: list[EstimatedPath] = []
        atoms: list[np.ndarray] = []
        stopped = False
        for _ in range(params.stopping.max_iterations):
            t = time.perf_counter()
            residual = r_n - fitted
            quiet = residual_is_noise(residual, tau)
            t = clock("stopping", t)
            if quiet:
                stopped = True
                break
            z = np.zeros_like(r)
            z[sl] = residual
            coarse_pt, _ = grid_argmax(geometry, [n], z, coarse, cache=True)
            t = clock("coarse", t)
            fine_pt, _ = grid_argmax(geometry, [n], z, params.local_grid(coarse_pt))
            t = clock("fine", t)
            beta = amplitude_projection(geometry, [n], z, fine_pt)
            clock("amplitude", t)
            found.append(EstimatedPath(fine_pt, beta, (n,)))
            atoms.append(array_response(geometry, fine_pt, sl))
            fitted = sum(p.amplitude * a for p, a in zip(found, atoms))
        else:
            t = time.perf_counter()
            stopped = residual_is_noise(r_n - fitted, tau)
            clock("stopping", t)
        if found:
            h_est[sl] = fitted / sqrt_p
        paths.extend(found)
        counts.append(len(found))
        iterations.append(len(found))
        truncated.append(not stopped)

    return EstimationResult(
        "subarray", paths, h_est, counts, iterations, truncated, dict(clock.totals)
    )


def _top_fraction(gamma: dict[int, float], delta: float) -> tuple[int, ...]:
    """Smallest set of largest-gamma subarrays whose gamma sum reaches ``delta``."""
    order = sorted(gamma, key=lambda n: (-gamma[n], n))
    chosen, total = [], 0.0
    for n in order:
        chosen.append(n)
        total += gamma[n]
        if total >= delta:
            break
    return tuple(sorted(chosen))


def scatterer_wise_estimate(
    snapshot: PilotSnapshot, geometry: ArrayGeometry, params: EstimatorParams | None = None
) -> EstimationResult:
    """Extract one scatterer per iteration jointly over all subarrays that still hold signal."""
    params = params or EstimatorParams()
    r = np.asarray(snapshot.entries)
    if r.shape != (geometry.element_count,):
        raise ValueError("snapshot length does not match the array geometry")
    sqrt_p = math.sqrt(snapshot.power)
    N, K = geometry.subarray_count, geometry.subarray_size
    tau = noise_floor_threshold(K, params.stopping.false_alarm_rate)
    coarse = params.coarse_grid()
    clock = _Clock()

    paths: list[EstimatedPath] = []
    trace: list[IterationTrace] = []
    fitted = np.zeros_like(r)
    stopped = False
    for _ in range(params.stopping.max_iterations):
        t = time.perf_counter()
        residual = r - fitted
        failing = tuple(
            n for n in range(1, N + 1)
            if not residual_is_noise(residual[geometry.subarray_slice(n)], tau)
        )
        t = clock("stopping", t)
        if not failing:
            stopped = True
            break
        z = residual * subarray_mask(geometry, failing)

        corr = subarray_correlations(geometry, z, coarse, failing, cache=True)
        idx = int(np.argmax(np.abs(corr.sum(axis=1)) ** 2))
        coarse_pt = coarse.point(idx)
        t = clock("coarse", t)

        per_sub = np.abs(corr[idx]) ** 2
        total = per_sub.sum()
        if total > 0:
            gamma = {n: float(v / total) for n, v in zip(failing, per_sub)}
        else:
            gamma = {n: 1.0 / len(failing) for n in failing}
        coarse_visible = _top_fraction(gamma, params.delta)
        t = clock("visible_coarse", t)

        z_hat = residual * subarray_mask(geometry, coarse_visible)
        fine_pt, _ = grid_argmax(geometry, coarse_visible, z_hat, params.local_grid(coarse_pt))
        t = clock("fine", t)

        g_hat = amplitude_projection(geometry, coarse_visible, z_hat, fine_pt)
        t = clock("amplitude_coarse", t)

        a = array_response(geometry, fine_pt)
        b = steering_phase(geometry, fine_pt)
        visible = []
        for n in failing:
            sl = geometry.subarray_slice(n)
            rho_n = abs(np.vdot(z[sl], b[sl])) ** 2
            model = abs(g_hat * np.vdot(b[sl], a[sl])) ** 2
            if rho_n >= params.alpha * model + K:
                visible.append(n)
        visible = tuple(visible) or coarse_visible
        t = clock("visible_fine", t)

        beta = amplitude_projection(geometry, visible, residual, fine_pt)
        clock("amplitude", t)

        paths.append(EstimatedPath(fine_pt, beta, visible))
        trace.append(IterationTrace(failing, coarse_pt, gamma, coarse_visible, fine_pt, g_hat, visible))
        fitted = np.zeros_like(r)
        for p in paths:
            fitted += p.amplitude * array_response(geometry, p.position) * subarray_mask(geometry, p.visible_set)
    else:
        residual = r - fitted
        stopped = all(
            residual_is_noise(residual[geometry.subarray_slice(n)], tau) for n in range(1, N + 1)
        )

    counts = [sum(n in p.visible_set for p in paths) for n in range(1, N + 1)]
    return EstimationResult(
        "scatterer",
        paths,
        fitted / sqrt_p,
        counts,
        [len(paths)],
        [not stopped],
        dict(clock.totals),
        trace,
    )


ESTIMATORS = {
    "subarray": subarray_wise_estimate,
    "scatterer": scatterer_wise_estimate,
}
