import numpy as np
import pytest

from xlmimo.scene import ArrayGeometry, RegionBounds, Scatterer, Scene


@pytest.fixture
def small_geometry():
    return ArrayGeometry(element_count=8, subarray_count=4, spacing=0.5)


@pytest.fixture
def full_geometry():
    return ArrayGeometry(element_count=1024, subarray_count=8, spacing=0.5)


@pytest.fixture
def two_scatterer_scene(full_geometry):
    """Two on-grid scatterers with disjoint contiguous visible regions."""
    return Scene(
        full_geometry,
        RegionBounds(),
        (
            Scatterer((100.0, 40.0), 0.8 * np.exp(0.3j), (1, 2, 3)),
            Scatterer((60.0, -300.0), 0.75 * np.exp(-1.1j), (5, 6, 7, 8)),
        ),
        rng_seed=None,
    )


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


def snap_to_grid(scene, step=4.0):
    """Move generated positions onto the coarse grid and split visibility into two disjoint halves."""
    N = scene.geometry.subarray_count
    b = scene.bounds
    halves = (tuple(range(1, N // 2 + 1)), tuple(range(N // 2 + 1, N + 1)))
    scatterers = []
    for sc, vis in zip(scene.scatterers, halves):
        x = b.x_min + step * round((sc.position[0] - b.x_min) / step)
        y = b.y_min + step * round((sc.position[1] - b.y_min) / step)
        scatterers.append(Scatterer((float(x), float(y)), sc.gain, vis))
    return Scene(scene.geometry, b, tuple(scatterers), scene.rng_seed)


@pytest.fixture
def on_grid_scene():
    """Factory: seeded two-scatterer scene on the coarse grid with disjoint visible halves."""
    from xlmimo.scene import SceneConfig, generate_scene

    def make(subarray_count, seed):
        cfg = SceneConfig(geometry=ArrayGeometry(1024, subarray_count, 0.5), num_scatterers=2)
        return snap_to_grid(generate_scene(cfg, seed))

    return make
