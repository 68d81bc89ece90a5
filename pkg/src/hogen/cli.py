"""Command-line entry point: reproducible synthesis, generation, benchmarks,
and the two evaluation pipelines.

Every run writes a manifest JSON with the fully resolved configuration;
feeding that manifest back via --config reproduces the run (wall-clock
fields aside). Flags override config-file values, which override defaults.

Exit codes: 0 success, 1 invalid configuration, 2 generation failure,
3 timeout ("ot").
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from dataclasses import asdict, dataclass, fields
from pathlib import Path

import numpy as np

from . import __version__
from .baselines import HiddenConfig, hidden_generate, hyperbox_generate
from .bisection import BisectConfig, generate_batch
from .core import ConfigError, CsvParseError, Dataset, GenerationError
from .data import (GaussianSpec, downsample_outliers, gen_gaussian_clusters,
                   load_csv, save_csv)
from .detectors import DetectorSpec, calibrate_threshold
from .ensemble import fit_ensemble, select_subspaces
from .evaluate import (BenchResult, ForestSpec, bench_generation, run_occ,
                       run_sod, write_results_csv, write_summary_json)

COMMANDS = ("synth", "generate", "bench", "occ", "sod")


@dataclass
class RunConfig:
    command: str
    input: str | None = None
    input_full: str | None = None
    output: str = "."
    label_column: str = "outlier"
    generator: str = "bisect"
    adversary: str = "lof"
    k: int | None = None
    contamination: float = 0.1
    budget: int = 2048
    n_cuts: int = 5
    err: float = 0.05
    epsilon: float = 0.1
    n_samp: int = 500
    repeats: int = 7
    seed: int = 0
    timeout: float = 1800.0
    workers: int = 0  # 0 means one per logical core
    clusters: int = 1
    dims: str = "7"
    n_rows: int = 1000
    grid: str = "desk"
    grid_seeds: int = 2
    generators: str = "bisect,hidden"
    target_fraction: float = 0.02
    n_trees: int = 500


_FIELD_TYPES = {f.name: f for f in fields(RunConfig)}


def _validate(cfg: RunConfig) -> None:
    errs = []
    if cfg.command not in COMMANDS:
        errs.append(f"command: must be one of {COMMANDS}, got {cfg.command!r}")
    if cfg.generator not in ("bisect", "hidden", "hyperbox", "none"):
        errs.append(f"generator: must be bisect|hidden|hyperbox|none, got {cfg.generator!r}")
    if cfg.adversary not in ("lof", "knn"):
        errs.append(f"adversary: must be lof|knn, got {cfg.adversary!r}")
    if cfg.k is not None and cfg.k < 1:
        errs.append(f"k: must be >= 1, got {cfg.k}")
    if not 0.0 < cfg.contamination <= 0.5:
        errs.append(f"contamination: must be in (0, 0.5], got {cfg.contamination}")
    if cfg.budget < 1:
        errs.append(f"budget: must be >= 1, got {cfg.budget}")
    if cfg.n_cuts < 1:
        errs.append(f"n_cuts: must be >= 1, got {cfg.n_cuts}")
    if not cfg.err > 0:
        errs.append(f"err: must be > 0, got {cfg.err}")
    if not 0.0 < cfg.epsilon <= 1.0:
        errs.append(f"epsilon: must be in (0, 1], got {cfg.epsilon}")
    if cfg.n_samp < 1:
        errs.append(f"n_samp: must be >= 1, got {cfg.n_samp}")
    if cfg.repeats < 1:
        errs.append(f"repeats: must be >= 1, got {cfg.repeats}")
    if not cfg.timeout > 0:
        errs.append(f"timeout: must be > 0, got {cfg.timeout}")
    if cfg.workers < 0:
        errs.append(f"workers: must be >= 0, got {cfg.workers}")
    if cfg.clusters < 1:
        errs.append(f"clusters: must be >= 1, got {cfg.clusters}")
    if cfg.n_rows < 1:
        errs.append(f"n_rows: must be >= 1, got {cfg.n_rows}")
    if cfg.grid not in ("desk", "table1", "custom"):
        errs.append(f"grid: must be desk|table1|custom, got {cfg.grid!r}")
    if cfg.grid_seeds < 1:
        errs.append(f"grid_seeds: must be >= 1, got {cfg.grid_seeds}")
    bad = [g for g in _parse_generators(cfg.generators) if g not in ("bisect", "hidden")]
    if bad:
        errs.append(f"generators: bench supports bisect and hidden, got {bad}")
    if not 0.0 < cfg.target_fraction < 1.0:
        errs.append(f"target_fraction: must be in (0, 1), got {cfg.target_fraction}")
    if cfg.n_trees < 1:
        errs.append(f"n_trees: must be >= 1, got {cfg.n_trees}")
    try:
        _parse_dims(cfg.dims)
    except ValueError as exc:
        errs.append(f"dims: {exc}")
    if cfg.command in ("generate", "occ") and not cfg.input:
        errs.append(f"input: required for {cfg.command}")
    if cfg.command == "sod" and not cfg.input_full:
        errs.append("input_full: required for sod")
    if errs:
        raise ConfigError("; ".join(errs))


def _parse_dims(text: str) -> list[int]:
    dims = [int(tok) for tok in str(text).split(",") if tok.strip()]
    if not dims or any(d < 1 for d in dims):
        raise ValueError(f"expected comma-separated positive integers, got {text!r}")
    return dims


def _parse_generators(text: str) -> list[str]:
    return [tok.strip() for tok in str(text).split(",") if tok.strip()]


def _load_config_file(path: str) -> dict:
    with open(path, encoding="utf-8") as fh:
        obj = json.load(fh)
    if isinstance(obj, dict) and "config" in obj and "versions" in obj:
        obj = obj["config"]  # a manifest: reuse its resolved config
    if not isinstance(obj, dict):
        raise ConfigError(f"{path}: config must be a JSON object")
    unknown = sorted(set(obj) - set(_FIELD_TYPES))
    if unknown:
        raise ConfigError(f"{path}: unknown config keys: {unknown}")
    return obj


def resolve_config(command: str, args: argparse.Namespace) -> RunConfig:
    """Layer defaults, then config-file values, then explicit flags."""
    values = {"command": command}
    if getattr(args, "config", None):
        file_values = _load_config_file(args.config)
        file_cmd = file_values.pop("command", command)
        if file_cmd != command:
            raise ConfigError(
                f"config file is for command {file_cmd!r}, invoked {command!r}"
            )
        values.update(file_values)
    for name in _FIELD_TYPES:
        flag_val = getattr(args, name, None)
        if flag_val is not None and name != "command":
            values[name] = flag_val
    cfg = RunConfig(**values)
    _validate(cfg)
    return cfg


def _versions() -> dict:
    import scipy
    import sklearn
    return {
        "hogen": __version__,
        "python": sys.version.split()[0],
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "sklearn": sklearn.__version__,
    }


def _write_manifest(cfg: RunConfig, outdir: Path) -> None:
    manifest = {"config": asdict(cfg), "seed": cfg.seed, "versions": _versions()}
    with open(outdir / "manifest.json", "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _detector_spec(cfg: RunConfig) -> DetectorSpec:
    return DetectorSpec(kind=cfg.adversary, k=cfg.k, contamination=cfg.contamination)


def _bisect_cfg(cfg: RunConfig) -> BisectConfig:
    return BisectConfig(n_cuts=cfg.n_cuts, err=cfg.err, timeout=cfg.timeout)


def _load_features(path: str, label_column: str) -> Dataset:
    """Load a CSV, splitting off the label column only if it exists."""
    with open(path, newline="", encoding="utf-8") as fh:
        header = next(csv.reader(fh), [])
    return load_csv(path, label_column if label_column in header else None)


def _write_points_csv(path, points: np.ndarray, names: list[str], sides) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow([*names, "side"])
        for i, row in enumerate(points):
            side = sides[i].value if sides and i < len(sides) else ""
            writer.writerow([*(repr(float(v)) for v in row), side])


def _cmd_synth(cfg: RunConfig, outdir: Path) -> int:
    dims = _parse_dims(cfg.dims)
    data = gen_gaussian_clusters(
        GaussianSpec(clusters=cfg.clusters, d=dims[0], n=cfg.n_rows, seed=cfg.seed)
    )
    save_csv(data, outdir / "synthetic.csv", label_column=cfg.label_column)
    return 0


def _cmd_generate(cfg: RunConfig, outdir: Path) -> int:
    data = _load_features(cfg.input, cfg.label_column)
    spec = _detector_spec(cfg)
    sub_seed, gen_seed = np.random.SeedSequence(cfg.seed).spawn(2)
    m = calibrate_threshold(spec, data)
    workers = cfg.workers if cfg.workers > 0 else (os.cpu_count() or 1)
    if cfg.generator == "hyperbox":
        res = hyperbox_generate(data, m, cfg.n_samp, seed=gen_seed, timeout=cfg.timeout)
        points, sides, flag = res.points, None, ("ot" if res.timed_out else "ok")
        summary = {"requested": cfg.n_samp, "emitted": len(points), "flag": flag,
                   "candidates_tried": res.candidates_tried,
                   "wall_time": res.wall_time}
    else:
        e = fit_ensemble(data, select_subspaces(data.d, cfg.budget, sub_seed), spec)
        if cfg.generator == "bisect":
            rep = generate_batch(data, m, e, cfg.n_samp, _bisect_cfg(cfg),
                                 seed=gen_seed, timeout=cfg.timeout, workers=workers)
        elif cfg.generator == "hidden":
            rep = hidden_generate(
                data, m, e, cfg.n_samp,
                HiddenConfig(epsilon=cfg.epsilon, timeout=cfg.timeout), seed=gen_seed,
            )
        else:
            raise ConfigError(f"generator: {cfg.generator!r} not supported by generate")
        points, sides, flag = rep.points, rep.sides, rep.flag
        summary = {
            "requested": cfg.n_samp, "emitted": len(points), "flag": flag,
            "sides": {s.value: sum(1 for x in rep.sides if x is s)
                      for s in set(rep.sides)},
            "restarts": rep.restarts, "candidates_tried": rep.candidates_tried,
            "wall_time": rep.wall_time,
            "adversary_inference_cost": rep.adversary_inference_cost,
        }
    names = data.feature_names or [f"x{j}" for j in range(data.d)]
    _write_points_csv(outdir / "points.csv", points, names, sides)
    write_summary_json(outdir / "summary.json", summary)
    return 3 if flag == "ot" else 0


def _grid_specs(cfg: RunConfig) -> list[GaussianSpec]:
    if cfg.grid == "table1":
        clusters, dims, n, reps = [1, 2, 5], [7, 15, 30, 50, 100, 150], 1000, 5
    elif cfg.grid == "desk":
        clusters, dims, n, reps = [1], [7, 15, 30], 600, cfg.grid_seeds
    else:
        clusters, dims, n, reps = [cfg.clusters], _parse_dims(cfg.dims), cfg.n_rows, cfg.grid_seeds
    cells = [(c, d) for c in clusters for d in dims for _ in range(reps)]
    seeds = np.random.SeedSequence(cfg.seed).generate_state(len(cells))
    return [GaussianSpec(clusters=c, d=d, n=n, seed=int(s))
            for (c, d), s in zip(cells, seeds)]


def _cmd_bench(cfg: RunConfig, outdir: Path) -> int:
    result: BenchResult = bench_generation(
        _grid_specs(cfg), generators=_parse_generators(cfg.generators),
        n_samp=cfg.n_samp, seed=cfg.seed, adversary=_detector_spec(cfg),
        budget=cfg.budget, bisect_cfg=_bisect_cfg(cfg), epsilons=(cfg.epsilon,),
        timeout=cfg.timeout,
    )
    write_results_csv(outdir / "bench.csv", [asdict(c) for c in result.cells])
    write_summary_json(outdir / "summary.json", result.summary)
    return 3 if any(c.flag == "ot" for c in result.cells) else 0


def _eval_outputs(cfg: RunConfig, outdir: Path, dataset_name: str, result) -> int:
    rows = [
        {"dataset": dataset_name, "generator": cfg.generator, "repeat": i,
         "auc": auc, "seconds": sec, "flag": result.flag}
        for i, (auc, sec) in enumerate(
            zip(result.auc_per_repeat, result.seconds_per_repeat)
        )
    ]
    if rows:
        write_results_csv(outdir / "results.csv", rows)
    aucs = result.auc_per_repeat
    summary = {
        "dataset": dataset_name, "generator": cfg.generator,
        "median_auc": result.median_auc, "p_value": result.p_value,
        "auc_per_repeat": aucs, "flag": result.flag,
        "auc_quartiles": (list(np.percentile(aucs, [25, 50, 75])) if aucs else None),
        "seconds_per_repeat": result.seconds_per_repeat,
    }
    write_summary_json(outdir / "summary.json", summary)
    return 3 if result.flag == "ot" else 0


def _cmd_occ(cfg: RunConfig, outdir: Path) -> int:
    data = load_csv(cfg.input, cfg.label_column)
    result = run_occ(
        data, cfg.generator, _detector_spec(cfg), repeats=cfg.repeats, seed=cfg.seed,
        budget=cfg.budget, bisect_cfg=_bisect_cfg(cfg), epsilon=cfg.epsilon,
        timeout=cfg.timeout, forest=ForestSpec(n_trees=cfg.n_trees),
    )
    return _eval_outputs(cfg, outdir, Path(cfg.input).stem, result)


def _cmd_sod(cfg: RunConfig, outdir: Path) -> int:
    d_full = load_csv(cfg.input_full, cfg.label_column)
    if cfg.input:
        d_small = load_csv(cfg.input, cfg.label_column)
    else:
        down_seed = np.random.SeedSequence(cfg.seed).spawn(1)[0]
        d_small = downsample_outliers(d_full, cfg.target_fraction, down_seed)
    result = run_sod(
        d_small, d_full, cfg.generator, _detector_spec(cfg), repeats=cfg.repeats,
        seed=cfg.seed, budget=cfg.budget, bisect_cfg=_bisect_cfg(cfg),
        epsilon=cfg.epsilon, timeout=cfg.timeout,
        forest=ForestSpec(n_trees=cfg.n_trees),
    )
    return _eval_outputs(cfg, outdir, Path(cfg.input_full).stem, result)


def run(cfg: RunConfig) -> int:
    """Execute a validated config, writing artifacts and the manifest."""
    outdir = Path(cfg.output)
    outdir.mkdir(parents=True, exist_ok=True)
    _write_manifest(cfg, outdir)
    handler = {
        "synth": _cmd_synth, "generate": _cmd_generate, "bench": _cmd_bench,
        "occ": _cmd_occ, "sod": _cmd_sod,
    }[cfg.command]
    return handler(cfg, outdir)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hogen",
        description="Generate hidden outliers and evaluate them.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config or manifest to load")
    common.add_argument("--output", help="output directory (default: .)")
    common.add_argument("--seed", type=int)
    common.add_argument("--label-column", dest="label_column")

    detector = argparse.ArgumentParser(add_help=False)
    detector.add_argument("--adversary", choices=["lof", "knn"])
    detector.add_argument("--k", type=int)
    detector.add_argument("--contamination", type=float)
    detector.add_argument("--budget", type=int)

    gen = argparse.ArgumentParser(add_help=False)
    gen.add_argument("--generator", choices=["bisect", "hidden", "hyperbox", "none"])
    gen.add_argument("--n-cuts", dest="n_cuts", type=int)
    gen.add_argument("--err", type=float)
    gen.add_argument("--epsilon", type=float)
    gen.add_argument("--n-samp", dest="n_samp", type=int)
    gen.add_argument("--timeout", type=float)
    gen.add_argument("--workers", type=int)

    p = sub.add_parser("synth", parents=[common], help="write a synthetic dataset")
    p.add_argument("--clusters", type=int)
    p.add_argument("--dims", help="feature count")
    p.add_argument("--n-rows", dest="n_rows", type=int)

    p = sub.add_parser("generate", parents=[common, detector, gen],
                       help="generate hidden outliers from a CSV")
    p.add_argument("--input")

    p = sub.add_parser("bench", parents=[common, detector, gen],
                       help="time generators over a synthetic grid")
    p.add_argument("--grid", choices=["desk", "table1", "custom"])
    p.add_argument("--generators", help="comma-separated: bisect,hidden")
    p.add_argument("--clusters", type=int)
    p.add_argument("--dims", help="comma-separated feature counts")
    p.add_argument("--n-rows", dest="n_rows", type=int)
    p.add_argument("--grid-seeds", dest="grid_seeds", type=int)

    p = sub.add_parser("occ", parents=[common, detector, gen],
                       help="one-class classification pipeline")
    p.add_argument("--input")
    p.add_argument("--repeats", type=int)
    p.add_argument("--n-trees", dest="n_trees", type=int)

    p = sub.add_parser("sod", parents=[common, detector, gen],
                       help="supervised outlier detection pipeline")
    p.add_argument("--input", help="downsampled dataset (optional)")
    p.add_argument("--input-full", dest="input_full")
    p.add_argument("--target-fraction", dest="target_fraction", type=float)
    p.add_argument("--repeats", type=int)
    p.add_argument("--n-trees", dest="n_trees", type=int)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = resolve_config(args.command, args)
    except (ConfigError, CsvParseError, json.JSONDecodeError, OSError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 1
    try:
        return run(cfg)
    except (ConfigError, CsvParseError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except GenerationError as exc:
        print(f"generation failed: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
