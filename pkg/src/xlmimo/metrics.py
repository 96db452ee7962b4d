"""Channel MSE and scatterer-detection metrics."""

from __future__ import annotations

import math
from typing import Iterable

import numpy as np

from .estimators import EstimatedPath
from .scene import Scene

DETECTION_RADIUS = 10.0


def mse_metric(true_channel, estimated_channel, scene: Scene) -> dict[int, float]:
    """Relative error ||h_est_n - h_n||^2 / ||h_n||^2 per subarray that sees a scatterer.

    Subarrays without any visible scatterer are left out.

    Raises:
        RuntimeError: if an included subarray has an all-zero true channel.
    """
    geometry = scene.geometry
    h = np.asarray(true_channel)
    h_est = np.asarray(estimated_channel)
    errors = {}
    for n in scene.active_subarrays:
        sl = geometry.subarray_slice(n)
        energy = np.vdot(h[sl], h[sl]).real
        if energy == 0:
            raise RuntimeError(f"subarray {n} sees a scatterer but has a zero channel")
        diff = h_est[sl] - h[sl]
        errors[n] = float(np.vdot(diff, diff).real / energy)
    return errors


def detection_outcomes(
    scene: Scene, paths: Iterable[EstimatedPath], radius: float = DETECTION_RADIUS
) -> dict[tuple[int, int], bool]:
    """Detection flag for every true (subarray, scatterer) pair, both 1-based.

    A pair (n, s) is detected when some path lies closer than ``radius`` to
    scatterer s and lists n in its visible set.
    """
    paths = list(paths)
    outcomes = {}
    for s, sc in enumerate(scene.scatterers, 1):
        near = [p for p in paths if math.dist(p.position, sc.position) < radius]
        for n in sc.visible_subarrays:
            outcomes[(n, s)] = any(n in p.visible_set for p in near)
    return dict(sorted(outcomes.items()))


def detection_metric(
    scene: Scene, paths: Iterable[EstimatedPath], radius: float = DETECTION_RADIUS
) -> float | None:
    """Fraction of true subarray-scatterer mappings that were detected.

    Returns None when the scene has no mapping to detect.
    """
    outcomes = detection_outcomes(scene, paths, radius)
    if not outcomes:
        return None
    return sum(outcomes.values()) / len(outcomes)
