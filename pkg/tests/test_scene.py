import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from xlmimo.scene import (
    ArrayGeometry,
    ConfigError,
    GenerationError,
    RegionBounds,
    Scatterer,
    Scene,
    SceneConfig,
    element_coordinate,
    generate_scene,
    subarray_of_element,
)


def test_element_coordinate_full_array():
    g = ArrayGeometry(1024, 8, 0.5)
    assert element_coordinate(g, 1) == (0.0, -255.75)
    assert element_coordinate(g, 1024) == (0.0, 255.75)


def test_element_coordinate_symmetric_pair():
    g = ArrayGeometry(2, 1, 0.5)
    assert element_coordinate(g, 1)[1] == -0.25
    assert element_coordinate(g, 2)[1] == 0.25


def test_element_coordinate_odd_center():
    # subarray_count=1 and M=3 keeps the >=2 elements-per-subarray rule
    g = ArrayGeometry(3, 1, 1.0)
    assert element_coordinate(g, 2) == (0.0, 0.0)


@pytest.mark.parametrize("m", [0, 9, -1])
def test_element_index_bounds(small_geometry, m):
    with pytest.raises(IndexError):
        element_coordinate(small_geometry, m)
    with pytest.raises(IndexError):
        subarray_of_element(small_geometry, m)


def test_subarray_of_element_examples(small_geometry):
    assert subarray_of_element(small_geometry, 1) == 1
    assert subarray_of_element(small_geometry, 2) == 1
    assert subarray_of_element(small_geometry, 3) == 2
    assert subarray_of_element(ArrayGeometry(1024, 8, 0.5), 1024) == 8


@given(st.sampled_from([(8, 4), (16, 2), (1024, 8), (1024, 16), (12, 3), (60, 5)]), st.data())
def test_subarray_of_element_matches_ceil(shape, data):
    M, N = shape
    g = ArrayGeometry(M, N, 0.5)
    m = data.draw(st.integers(1, M))
    assert subarray_of_element(g, m) == math.ceil(m * N / M)
    # contiguous equal blocks
    assert subarray_of_element(g, m) == (m - 1) // (M // N) + 1


def test_element_y_matches_coordinates(small_geometry):
    ys = [element_coordinate(small_geometry, m)[1] for m in range(1, 9)]
    np.testing.assert_array_equal(small_geometry.element_y, ys)


@pytest.mark.parametrize(
    "kwargs",
    [dict(element_count=10, subarray_count=4), dict(element_count=4, subarray_count=4),
     dict(spacing=0.0), dict(element_count=0)],
)
def test_geometry_validation(kwargs):
    with pytest.raises(ConfigError):
        ArrayGeometry(**kwargs)


@pytest.mark.parametrize("bounds", [(0, 10, -1, 1), (5, 5, -1, 1), (1, 10, 2, 2), (-1, 10, 0, 1)])
def test_bounds_validation(bounds):
    with pytest.raises(ConfigError):
        RegionBounds(*bounds)


def test_scene_rejects_out_of_range_visibility(small_geometry):
    with pytest.raises(ConfigError):
        Scene(small_geometry, RegionBounds(), (Scatterer((50, 0), 1, (5,)),))
    with pytest.raises(ConfigError):
        Scatterer((50, 0), 1, ())


def test_generate_scene_deterministic():
    cfg = SceneConfig()
    a = generate_scene(cfg, 7)
    b = generate_scene(cfg, 7)
    assert a == b
    assert a.to_json() == b.to_json()
    assert generate_scene(cfg, 8) != a


def test_visible_blocks_are_contiguous():
    cfg = SceneConfig(geometry=ArrayGeometry(8, 4, 0.5), visible_count=2)
    seen = set()
    for seed in range(200):
        for sc in generate_scene(cfg, seed).scatterers:
            seen.add(sc.visible_subarrays)
    assert seen == {(1, 2), (2, 3), (3, 4)}


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), N=st.sampled_from([2, 4, 8, 16]), S=st.integers(1, 4))
def test_generated_scene_invariants(seed, N, S):
    cfg = SceneConfig(geometry=ArrayGeometry(1024, N, 0.5), num_scatterers=S)
    scene = generate_scene(cfg, seed)
    b = scene.bounds
    assert len(scene.scatterers) == S
    for sc in scene.scatterers:
        x, y = sc.position
        assert b.x_min <= x < b.x_max and b.y_min <= y < b.y_max
        assert len(sc.visible_subarrays) == N // 2
        assert set(sc.visible_subarrays) <= set(range(1, N + 1))
        assert 0.5 <= abs(sc.gain) ** 2 <= 1.0
    for n in range(1, N + 1):
        for s, sc in enumerate(scene.scatterers, 1):
            assert (s in scene.visible_scatterers(n)) == (n in sc.visible_subarrays)
    pts = np.array([sc.position for sc in scene.scatterers])
    for i in range(S):
        for j in range(i + 1, S):
            assert np.linalg.norm(pts[i] - pts[j]) >= 20


def test_position_mean_is_uniform():
    """Mean of x over 10^4 scenes sits within 3 standard errors of the midpoint."""
    cfg = SceneConfig(geometry=ArrayGeometry(16, 4, 0.5), num_scatterers=2, min_separation=0)
    xs = np.array([[sc.position[0] for sc in generate_scene(cfg, s).scatterers] for s in range(10_000)]).ravel()
    b = cfg.bounds
    se = (b.x_max - b.x_min) / math.sqrt(12) / math.sqrt(xs.size)
    assert abs(xs.mean() - (b.x_min + b.x_max) / 2) < 3 * se


def test_visible_count_larger_than_n_rejected():
    with pytest.raises(ConfigError):
        SceneConfig(geometry=ArrayGeometry(8, 4, 0.5), visible_count=5)


def test_separation_retry_cap():
    cfg = SceneConfig(bounds=RegionBounds(20, 21, 0, 1), num_scatterers=2, max_retries=5)
    with pytest.raises(GenerationError):
        generate_scene(cfg, 0)


def test_scene_json_roundtrip(two_scatterer_scene):
    text = two_scatterer_scene.to_json()
    back = Scene.from_json(text)
    assert back == two_scatterer_scene
    doc = json.loads(text)
    assert doc["scatterers"][0]["gain_re"] == pytest.approx(0.8 * math.cos(0.3))


def test_empty_visible_region_allowed(two_scatterer_scene):
    assert two_scatterer_scene.visible_scatterers(4) == ()
    assert two_scatterer_scene.active_subarrays == (1, 2, 3, 5, 6, 7, 8)
