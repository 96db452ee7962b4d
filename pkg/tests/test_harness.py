import json
import math

import numpy as np
import pytest

from xlmimo.config import parse_config
from xlmimo.estimators import scatterer_wise_estimate, subarray_wise_estimate
from xlmimo.harness import CSV_COLUMNS, aggregate, record_line, run_sweep, run_trial, trial_seeds
from xlmimo.metrics import mse_metric
from xlmimo.scene import generate_scene
from xlmimo.wavefield import receive_pilot, synthesize_channel


def _stable(rec):
    """Record JSON without wall-clock fields."""
    doc = json.loads(record_line(rec))
    del doc["timings"], doc["elapsed"]
    return doc


@pytest.fixture(scope="module")
def small_config():
    return parse_config("", element_count=256, subarray_counts=[4, 8], snr_db=[10.0, 20.0], trials=2)


@pytest.fixture(scope="module")
def small_sweep(small_config):
    return run_sweep(small_config)


def test_trial_seeds_distinct_and_stable():
    seeds = {trial_seeds(0, i, j, t) for i in range(3) for j in range(2) for t in range(5)}
    assert len(seeds) == 30
    assert trial_seeds(5, 1, 0, 2) == trial_seeds(5, 1, 0, 2)
    assert trial_seeds(5, 1, 0, 2) != trial_seeds(6, 1, 0, 2)


def test_sweep_rerun_bit_identical(small_config, small_sweep):
    result, records = small_sweep
    again, records2 = run_sweep(small_config)
    assert again.to_csv() == result.to_csv()
    assert [_stable(r) for r in records] == [_stable(r) for r in records2]


def test_single_trial_reproducible_in_isolation(small_config, small_sweep):
    _, records = small_sweep
    alone = run_trial(small_config, snr_index=1, n_index=1, trial=1)
    picked = [r for r in records if (r.subarray_count, r.snr_db, r.trial) == (8, 20.0, 1)]
    assert [_stable(r) for r in alone] == [_stable(r) for r in picked]


def test_aggregate_equals_record_means(small_config, small_sweep):
    result, records = small_sweep
    assert len(result.rows) == 3 * 2 * 2
    for row in result.rows:
        recs = [r for r in records if (r.method, r.subarray_count, r.snr_db) == (row["method"], row["N"], row["snr_db"])]
        assert row["trials"] == len(recs) == 2
        assert row["mean_mse"] == pytest.approx(np.mean([r.mse for r in recs]), rel=1e-15)
        if row["method"] == "ls":
            assert row["detection_ratio"] is None
        else:
            assert row["detection_ratio"] == pytest.approx(np.mean([r.detection_ratio for r in recs]), rel=1e-15)
    # aggregation does not depend on record order
    assert aggregate(reversed(records), small_config).to_csv() == result.to_csv()


def test_methods_are_paired(small_sweep):
    _, records = small_sweep
    by_trial = {}
    for r in records:
        by_trial.setdefault((r.subarray_count, r.snr_db, r.trial), []).append(r)
    for recs in by_trial.values():
        assert [r.method for r in recs] == ["subarray", "scatterer", "ls"]
        assert len({(r.scene_seed, r.noise_seed) for r in recs}) == 1
        assert len({tuple(r.mse_terms) for r in recs}) == 1


def test_ls_record_matches_direct_computation(small_config, small_sweep):
    _, records = small_sweep
    rec = next(r for r in records if r.method == "ls")
    scene = generate_scene(small_config.scene_config(rec.subarray_count), rec.scene_seed)
    h = synthesize_channel(scene)
    r = receive_pilot(h, 10 ** (rec.snr_db / 10), rec.noise_seed)
    direct = mse_metric(h, r.entries / math.sqrt(r.power), scene)
    assert direct == rec.mse_terms


def test_detection_ratio_monotone_in_radius(small_config, small_sweep):
    _, records = small_sweep
    for rec in records:
        if rec.method == "ls":
            continue
        scene = generate_scene(small_config.scene_config(rec.subarray_count), rec.scene_seed)
        assert rec.redetect(scene, 10.0) == rec.detection_ratio
        assert rec.redetect(scene, 20.0) >= rec.detection_ratio


def test_csv_layout(small_sweep):
    result, _ = small_sweep
    lines = result.to_csv().splitlines()
    assert lines[0] == ",".join(CSV_COLUMNS)
    first = dict(zip(CSV_COLUMNS, lines[1].split(",")))
    assert first["method"] == "subarray" and first["N"] == "4" and first["snr_db"] == "10.0"
    # full precision round trip
    assert float(first["mean_mse"]) == result.rows[0]["mean_mse"]
    ls = dict(zip(CSV_COLUMNS, lines[-1].split(",")))
    assert ls["detection_ratio"] == "" and ls["se_detection"] == ""


def test_record_line_is_json(small_sweep):
    _, records = small_sweep
    doc = json.loads(record_line(records[0]))
    assert doc["method"] == "subarray"
    assert set(doc) >= {"scene_seed", "noise_seed", "mse", "detection_ratio", "paths", "timings"}


def test_on_record_stream_order(small_config, small_sweep):
    _, records = small_sweep
    seen = []
    run_sweep(small_config.model_copy(update={"subarray_counts": [4], "snr_db": [10.0]}), on_record=seen.append)
    assert [_stable(r) for r in seen] == [_stable(r) for r in records[:6]]


@pytest.mark.slow
def test_parallel_matches_serial(small_config, small_sweep):
    result, _ = small_sweep
    par, _ = run_sweep(small_config, workers=2)
    assert par.to_csv() == result.to_csv()


def test_ls_above_one_percent_at_20db():
    """The LS baseline alone at N=4, 20 dB sits above 1e-2."""
    cfg = parse_config("", subarray_counts=[4], snr_db=[20.0], trials=20, methods=["ls"])
    result, _ = run_sweep(cfg)
    assert result.lookup("ls", 4, 20.0)["mean_mse"] > 1e-2


@pytest.mark.parametrize("estimator", [subarray_wise_estimate, scatterer_wise_estimate], ids=["subarray", "scatterer"])
def test_near_noiseless_on_grid(estimator, on_grid_scene):
    """At 60 dB, on-grid disjoint scenes are recovered to MSE below 1e-6 on average."""
    errors = []
    for seed in range(10):
        scene = on_grid_scene(4, seed)
        h = synthesize_channel(scene)
        result = estimator(receive_pilot(h, 1e6, 1000 + seed), scene.geometry)
        errors.append(np.mean(list(mse_metric(h, result.channel, scene).values())))
    assert np.mean(errors) < 1e-6
