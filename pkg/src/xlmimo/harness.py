"""Seeded Monte-Carlo sweeps over SNR and subarray count."""

from __future__ import annotations

import csv
import io
import itertools
import json
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Callable, Iterable

import numpy as np

from .config import RunConfig
from .estimators import ESTIMATORS, EstimatedPath, ls_estimate
from .metrics import detection_outcomes, mse_metric
from .scene import generate_scene
from .wavefield import receive_pilot, synthesize_channel

log = logging.getLogger(__name__)

CSV_COLUMNS = ("method", "N", "snr_db", "mean_mse", "se_mse", "detection_ratio", "se_detection", "trials")


def trial_seeds(base_seed: int, snr_index: int, n_index: int, trial: int) -> tuple[int, int]:
    """Independent (scene, noise) seeds for one trial, reproducible in isolation."""
    ss = np.random.SeedSequence(base_seed, spawn_key=(snr_index, n_index, trial))
    scene_seed, noise_seed = ss.generate_state(2, np.uint64)
    return int(scene_seed), int(noise_seed)


@dataclass
class TrialRecord:
    method: str
    subarray_count: int
    snr_db: float
    trial: int
    scene_seed: int
    noise_seed: int
    mse_terms: dict[int, float]
    detections: dict[tuple[int, int], bool] | None
    paths: list[EstimatedPath] = field(default_factory=list)
    iterations: list[int] = field(default_factory=list)
    truncated: list[bool] = field(default_factory=list)
    timings: dict[str, float] = field(default_factory=dict)
    elapsed: float = 0.0

    @property
    def mse(self) -> float:
        return float(np.mean(list(self.mse_terms.values())))

    @property
    def detection_ratio(self) -> float | None:
        if not self.detections:
            return None
        return sum(self.detections.values()) / len(self.detections)

    def redetect(self, scene, radius: float) -> float | None:
        """Detection ratio of this record's paths under a different radius."""
        if self.detections is None:
            return None
        outcomes = detection_outcomes(scene, self.paths, radius)
        return sum(outcomes.values()) / len(outcomes) if outcomes else None

    def to_dict(self) -> dict:
        d = asdict(self)
        d["mse_terms"] = {str(n): v for n, v in self.mse_terms.items()}
        d["detections"] = (
            None if self.detections is None
            else [[n, s, ok] for (n, s), ok in self.detections.items()]
        )
        d["paths"] = [p.to_dict() for p in self.paths]
        d["mse"] = self.mse
        d["detection_ratio"] = self.detection_ratio
        return d


@dataclass
class SweepResult:
    rows: list[dict]

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for row in self.rows:
            writer.writerow([_fmt(row[c]) for c in CSV_COLUMNS])
        return buf.getvalue()

    def lookup(self, method: str, subarray_count: int, snr_db: float) -> dict:
        for row in self.rows:
            if (row["method"], row["N"], row["snr_db"]) == (method, subarray_count, snr_db):
                return row
        raise KeyError((method, subarray_count, snr_db))


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _mean_se(values: list[float]) -> tuple[float | None, float | None]:
    if not values:
        return None, None
    arr = np.asarray(values, dtype=float)
    mean = float(arr.mean())
    se = float(arr.std(ddof=1) / math.sqrt(arr.size)) if arr.size > 1 else None
    return mean, se


def aggregate(records: Iterable[TrialRecord], config: RunConfig) -> SweepResult:
    """Per (method, N, SNR) means and standard errors of the per-trial metrics."""
    groups: dict[tuple, list[TrialRecord]] = {}
    for rec in records:
        groups.setdefault((rec.method, rec.subarray_count, rec.snr_db), []).append(rec)
    rows = []
    for method, N, snr in itertools.product(config.methods, config.subarray_counts, config.snr_db):
        recs = groups.get((method, N, float(snr)), [])
        mean_mse, se_mse = _mean_se([r.mse for r in recs])
        ratios = [r.detection_ratio for r in recs if r.detection_ratio is not None]
        det, se_det = _mean_se(ratios)
        rows.append({
            "method": method, "N": N, "snr_db": float(snr),
            "mean_mse": mean_mse, "se_mse": se_mse,
            "detection_ratio": det, "se_detection": se_det,
            "trials": len(recs),
        })
    return SweepResult(rows)


def run_trial(config: RunConfig, snr_index: int, n_index: int, trial: int) -> list[TrialRecord]:
    """Simulate one scene/noise realization and run every configured method on it."""
    N = config.subarray_counts[n_index]
    snr_db = float(config.snr_db[snr_index])
    scene_seed, noise_seed = trial_seeds(config.seed, snr_index, n_index, trial)
    scene = generate_scene(config.scene_config(N), scene_seed)
    geometry = scene.geometry
    h = synthesize_channel(scene)
    snapshot = receive_pilot(h, 10 ** (snr_db / 10), noise_seed)
    params = config.estimator_params()

    records = []
    for method in config.methods:
        start = time.perf_counter()
        if method == "ls":
            h_est, result = ls_estimate(snapshot), None
        else:
            result = ESTIMATORS[method](snapshot, geometry, params)
            h_est = result.channel
        elapsed = time.perf_counter() - start
        records.append(TrialRecord(
            method=method,
            subarray_count=N,
            snr_db=snr_db,
            trial=trial,
            scene_seed=scene_seed,
            noise_seed=noise_seed,
            mse_terms=mse_metric(h, h_est, scene),
            detections=None if result is None else detection_outcomes(scene, result.paths, config.detection_radius),
            paths=[] if result is None else result.paths,
            iterations=[] if result is None else result.iterations,
            truncated=[] if result is None else result.truncated,
            timings={} if result is None else result.timings,
            elapsed=elapsed,
        ))
    return records


def _run_task(args) -> list[TrialRecord]:
    return run_trial(*args)


def run_sweep(
    config: RunConfig,
    workers: int | None = None,
    on_record: Callable[[TrialRecord], None] | None = None,
) -> tuple[SweepResult, list[TrialRecord]]:
    """Run every (N, SNR, trial) combination and aggregate.

    Records are delivered to ``on_record`` in a fixed order regardless of the
    worker count, so outputs depend only on the config.
    """
    workers = config.workers if workers is None else workers
    tasks = [
        (config, i_snr, i_n, t)
        for i_n in range(len(config.subarray_counts))
        for i_snr in range(len(config.snr_db))
        for t in range(config.trials)
    ]
    log.info("running %d trials with %d worker(s)", len(tasks), workers)
    records: list[TrialRecord] = []
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            batches = pool.map(_run_task, tasks, chunksize=max(1, len(tasks) // (4 * workers)))
            for batch in batches:
                _deliver(batch, records, on_record)
    else:
        for task in tasks:
            _deliver(_run_task(task), records, on_record)
    return aggregate(records, config), records


def _deliver(batch, records, on_record):
    for rec in batch:
        records.append(rec)
        if on_record is not None:
            on_record(rec)


def record_line(record: TrialRecord) -> str:
    return json.dumps(record.to_dict())
