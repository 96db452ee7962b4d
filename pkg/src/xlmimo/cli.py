"""Command-line front end: ``pattern``, ``estimate`` and ``sweep`` subcommands."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .config import METHODS, RunConfig, parse_config
from .estimators import ESTIMATORS, ls_estimate
from .harness import record_line, run_sweep
from .metrics import detection_metric, mse_metric
from .scene import ConfigError, Scene, generate_scene
from .search import build_coarse_grid, pattern_map
from .wavefield import PilotSnapshot, array_response, receive_pilot, subarray_mask, synthesize_channel

log = logging.getLogger("xlmimo")


def _float_list(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _int_list(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _point(text: str) -> tuple[float, float]:
    vals = _float_list(text)
    if len(vals) != 2:
        raise argparse.ArgumentTypeError("expected X,Y")
    return vals[0], vals[1]


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="JSON config file")
    common.add_argument("--seed", type=int, help="override the config seed")
    common.add_argument("--workers", type=int, help="worker processes for sweeps")
    common.add_argument("--out", type=Path, help="output directory")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="xlmimo", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("pattern", parents=[common], help="radiation-power map of one scatterer")
    p.add_argument("--point", type=_point, help="scatterer position X,Y")
    p.add_argument("--visible", type=_int_list, help="visible subarrays, e.g. 2,3,4,5")
    p.add_argument("--subarrays", type=int, help="subarray count N")

    e = sub.add_parser("estimate", parents=[common], help="estimate one snapshot")
    e.add_argument("--snapshot", type=Path, help="snapshot file (.json, or raw little-endian complex128)")
    e.add_argument("--scene", type=Path, help="scene JSON to synthesize from (and score against)")
    e.add_argument("--snr-db", type=float, help="SNR in dB; sets the pilot power")
    e.add_argument("--subarrays", type=int, help="subarray count N")
    e.add_argument("--noiseless", action="store_true", help="synthesize without noise")
    e.add_argument("--method", choices=[*METHODS, "all"], default="all")

    s = sub.add_parser("sweep", parents=[common], help="Monte-Carlo sweep over SNR and N")
    s.add_argument("--snr-db", type=_float_list, help="comma-separated SNR list in dB")
    s.add_argument("--subarrays", type=_int_list, help="comma-separated subarray counts")
    s.add_argument("--trials", type=int)
    s.add_argument("--method", choices=[*METHODS, "all"])
    return parser


def load_config(args) -> RunConfig:
    text = args.config.read_text() if args.config else ""
    overrides = {"seed": args.seed, "workers": args.workers}
    if args.out is not None:
        overrides["out_dir"] = str(args.out)
    if args.command == "sweep":
        overrides.update(snr_db=args.snr_db, subarray_counts=args.subarrays, trials=args.trials)
        if args.method and args.method != "all":
            overrides["methods"] = [args.method]
    elif args.command == "pattern":
        overrides.update(pattern_point=args.point, pattern_visible=args.visible,
                         pattern_subarray_count=args.subarrays)
    return parse_config(text, **overrides)


def _out_dir(config: RunConfig) -> Path:
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_pattern(config: RunConfig, args) -> int:
    geometry = config.geometry(config.pattern_subarray_count)
    grid = build_coarse_grid(
        (config.pattern_x_min, config.pattern_x_max, config.pattern_y_min, config.pattern_y_max),
        config.pattern_step, config.pattern_step,
    )
    z = array_response(geometry, config.pattern_point) * subarray_mask(geometry, config.pattern_visible)
    rho = pattern_map(geometry, config.pattern_visible, z, grid)
    path = _out_dir(config) / "pattern.csv"
    X, Y = np.meshgrid(grid.x, grid.y, indexing="ij")
    with path.open("w") as fh:
        fh.write("x,y,rho\n")
        for x, y, r in zip(X.ravel().tolist(), Y.ravel().tolist(), rho.ravel().tolist()):
            fh.write(f"{x!r},{y!r},{r!r}\n")
    i, j = np.unravel_index(int(np.argmax(rho)), rho.shape)
    print(f"peak at ({float(grid.x[i])!r}, {float(grid.y[j])!r}) rho={float(rho[i, j])!r}; wrote {path}")
    return 0


def _load_snapshot(path: Path, power: float | None) -> PilotSnapshot:
    data = path.read_bytes()
    if path.suffix == ".json":
        return PilotSnapshot.from_json(data.decode(), power)
    if power is None:
        raise ConfigError("binary snapshots need --snr-db to set the pilot power")
    return PilotSnapshot.from_bytes(data, power)


def cmd_estimate(config: RunConfig, args) -> int:
    N = args.subarrays or config.subarray_counts[0]
    power = None if args.snr_db is None else 10 ** (args.snr_db / 10)
    out = _out_dir(config)

    scene = None
    if args.scene is not None:
        scene = Scene.from_json(args.scene.read_text())
        N = scene.geometry.subarray_count
    elif args.snapshot is None:
        scene = generate_scene(config.scene_config(N), config.seed)
    geometry = scene.geometry if scene is not None else config.geometry(N)

    if args.snapshot is not None:
        snapshot = _load_snapshot(args.snapshot, power)
        if snapshot.entries.size != geometry.element_count:
            raise ConfigError(
                f"snapshot has {snapshot.entries.size} entries, geometry expects {geometry.element_count}"
            )
    else:
        power = power if power is not None else 10 ** (config.snr_db[0] / 10)
        h = synthesize_channel(scene)
        if args.noiseless:
            snapshot = PilotSnapshot(np.sqrt(power) * h, power)
        else:
            noise_seed = int(np.random.SeedSequence(config.seed, spawn_key=(1,)).generate_state(1, np.uint64)[0])
            snapshot = receive_pilot(h, power, noise_seed)
        (out / "scene.json").write_text(scene.to_json())
        (out / "snapshot.json").write_text(snapshot.to_json())

    methods = METHODS if args.method == "all" else (args.method,)
    params = config.estimator_params()
    h_true = synthesize_channel(scene) if scene is not None else None
    report = {"subarray_count": N, "power": snapshot.power, "methods": {}}
    for method in methods:
        if method == "ls":
            entry, h_est, paths = {"method": "ls"}, ls_estimate(snapshot), None
        else:
            result = ESTIMATORS[method](snapshot, geometry, params)
            entry, h_est, paths = result.to_dict(), result.channel, result.paths
        if scene is not None:
            terms = mse_metric(h_true, h_est, scene)
            entry["mse_terms"] = {str(n): v for n, v in terms.items()}
            entry["mse"] = float(np.mean(list(terms.values())))
            if paths is not None:
                entry["detection_ratio"] = detection_metric(scene, paths, config.detection_radius)
        report["methods"][method] = entry
    path = out / "estimate.json"
    path.write_text(json.dumps(report, indent=2))
    for method, entry in report["methods"].items():
        summary = f"{method}: {len(entry.get('paths', []))} paths" if method != "ls" else "ls"
        if "mse" in entry:
            summary += f", mse={entry['mse']:.3e}"
        print(summary)
    print(f"wrote {path}")
    return 0


def cmd_sweep(config: RunConfig, args) -> int:
    out = _out_dir(config)
    with (out / "trials.jsonl").open("w") as fh:
        result, _ = run_sweep(config, on_record=lambda rec: fh.write(record_line(rec) + "\n"))
    csv_path = out / "sweep.csv"
    csv_path.write_text(result.to_csv())
    print(result.to_csv(), end="")
    print(f"wrote {csv_path}")
    return 0


COMMANDS = {"pattern": cmd_pattern, "estimate": cmd_estimate, "sweep": cmd_sweep}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        config = load_config(args)
        return COMMANDS[args.command](config, args)
    except (ConfigError, OSError, ValueError) as exc:
        print(f"xlmimo {args.command}: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
