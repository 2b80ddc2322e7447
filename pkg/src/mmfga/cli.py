"""Command-line interface.

Every subcommand reads an optional JSON experiment file (``--config``) and
lets command-line flags override individual keys. Outputs go to
``--output`` (the ``output_dir`` key)::

    mmfga simulate   --config exp.json      # target.pgm, ground_truth.pbm, tm.tmx
    mmfga retrieve   --config exp.json      # retrieved.pbm, metrics.csv, convergence.svg
    mmfga bend-sweep --config exp.json      # sweep.csv, sweep.svg
    mmfga oracle     --config exp.json      # oracle.json
    mmfga calib-gen  --config exp.json      # calibration/ (PBM, PGM, index.csv)
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from .errors import CapacityError, ConfigError, ShapeError
from .experiments import bend_sweep, planted_target
from .fiber_model import TransmissionMatrix, as_mask
from .fibersim import FiberSpec, export_calibration_set, synth_tm
from .ga import GaConfig, resume, run
from .io import load_tm, read_pbm, read_pgm, save_tm, write_pbm, write_pgm
from .oracle import brute_force_best_mask
from .patterns import BUILTIN_PATTERNS, builtin_pattern

log = logging.getLogger("mmfga")

SEED_KEYS = ("fiber", "ga", "noise", "bend", "calibration")


@dataclass
class ExperimentConfig:
    """One experiment, as read from a JSON file plus flag overrides.

    Exactly one fiber source is used: ``tm_file`` when set, otherwise the
    synthetic ``fiber`` spec. ``image`` is a built-in pattern name or a PBM
    path.
    """

    fiber: Optional[FiberSpec] = None
    tm_file: Optional[str] = None
    image: str = "letter-Z"
    ga: GaConfig = field(default_factory=GaConfig)
    bend_sweep: Optional[list] = None
    bend_seed: int = 0
    noise_sigma: float = 0.0
    noise_seed: int = 0
    target_file: Optional[str] = None
    ground_truth_file: Optional[str] = None
    calibration_count: int = 8000
    calibration_on_ratio: float = 0.5
    calibration_seed: int = 0
    checkpoint_every: int = 0
    resume: bool = False
    output_dir: str = "mmfga-out"

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        d = dict(d)
        fiber = d.pop("fiber", None)
        if isinstance(fiber, dict):
            if "tm_file" in fiber:
                d.setdefault("tm_file", fiber.pop("tm_file"))
            fiber = FiberSpec(**fiber) if fiber else None
        ga = GaConfig.from_dict(d.pop("ga", {}))
        known = set(cls.__dataclass_fields__)
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown configuration keys: {sorted(unknown)}")
        cfg = cls(fiber=fiber, ga=ga, **d)
        if cfg.fiber is not None and cfg.tm_file is not None:
            raise ConfigError("give either a synthetic fiber spec or tm_file, not both")
        return cfg

    def to_dict(self) -> dict:
        d = {k: getattr(self, k) for k in self.__dataclass_fields__}
        d["ga"] = self.ga.to_dict()
        if self.fiber is not None:
            d["fiber"] = {
                "input_shape": list(self.fiber.input_shape),
                "output_shape": list(self.fiber.output_shape),
                "seed": self.fiber.seed,
            }
        return d

    def seeds(self) -> dict:
        return {
            "fiber": None if self.fiber is None else self.fiber.seed,
            "ga": self.ga.rng_seed,
            "noise": self.noise_seed,
            "bend": self.bend_seed,
            "calibration": self.calibration_seed,
        }


def derive_seeds(master: int) -> dict:
    """Independent per-purpose seeds from one master seed."""
    state = np.random.SeedSequence(master).generate_state(len(SEED_KEYS), np.uint64)
    return dict(zip(SEED_KEYS, (int(s) for s in state)))


# --------------------------------------------------------------------------
# configuration assembly


def _shape(text: str) -> tuple[int, int]:
    try:
        h, w = (int(v) for v in text.lower().split("x"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected HxW, got {text!r}") from None
    return h, w


def build_config(args: argparse.Namespace) -> ExperimentConfig:
    raw = {}
    if args.config:
        path = Path(args.config)
        if not path.is_file():
            raise ConfigError(f"config file not found: {path}")
        try:
            raw = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc})") from None
    cfg = ExperimentConfig.from_dict(raw)

    ga_changes = {}
    for flag, key in [
        ("population", "population_size"),
        ("generations", "max_generations"),
        ("mutation_rate", "mutation_rate"),
        ("elite", "elite_count"),
        ("target_cc1", "target_cc1"),
        ("on_ratio", "on_ratio"),
        ("crossover_block", "crossover_block"),
        ("threads", "threads"),
    ]:
        value = getattr(args, flag, None)
        if value is not None:
            ga_changes[key] = value
    changes = {}
    for flag in (
        "image", "tm_file", "noise_sigma", "target_file", "ground_truth_file",
        "checkpoint_every", "bend_sweep",
    ):
        value = getattr(args, flag, None)
        if value is not None:
            changes[flag] = value
    if getattr(args, "count", None) is not None:
        changes["calibration_count"] = args.count
    if getattr(args, "calib_on_ratio", None) is not None:
        changes["calibration_on_ratio"] = args.calib_on_ratio
    if getattr(args, "resume", False):
        changes["resume"] = True
    if args.output is not None:
        changes["output_dir"] = args.output

    fiber = cfg.fiber
    if args.input_shape or args.output_shape:
        base = fiber or FiberSpec()
        fiber = FiberSpec(
            args.input_shape or base.input_shape,
            args.output_shape or base.output_shape,
            base.seed,
        )
    if "tm_file" in changes:
        fiber = None
    elif fiber is not None and cfg.tm_file is not None:
        changes["tm_file"] = None

    if args.seed is not None:
        seeds = derive_seeds(args.seed)
        if fiber is not None:
            fiber = replace(fiber, seed=seeds["fiber"])
        ga_changes["rng_seed"] = seeds["ga"]
        changes.update(
            noise_seed=seeds["noise"],
            bend_seed=seeds["bend"],
            calibration_seed=seeds["calibration"],
        )
    cfg = replace(cfg, fiber=fiber, ga=replace(cfg.ga, **ga_changes), **changes)
    if cfg.fiber is not None and cfg.tm_file is not None:
        raise ConfigError("give either a synthetic fiber spec or tm_file, not both")
    return cfg


# --------------------------------------------------------------------------
# inputs


def _out(cfg) -> Path:
    return Path(cfg.output_dir)


def _resolve_tm(cfg: ExperimentConfig, prefer_output=False) -> tuple[TransmissionMatrix, bool]:
    """Load or synthesize the matrix; returns ``(tm, synthetic)``."""
    if cfg.tm_file is not None:
        path = Path(cfg.tm_file)
        if not path.is_file():
            raise ConfigError(f"TM file not found: {path}")
        return load_tm(path), False
    saved = _out(cfg) / "tm.tmx"
    if prefer_output and saved.is_file():
        tm = load_tm(saved)
        spec = cfg.fiber
        if spec is not None and (spec.input_shape, spec.output_shape) != (
            tm.input_shape, tm.output_shape
        ):
            raise ConfigError(
                f"{saved} is {tm.input_shape} -> {tm.output_shape} but the fiber "
                f"spec asks for {spec.input_shape} -> {spec.output_shape}; "
                "use a fresh --output directory or pass --tm-file"
            )
        return tm, False
    return synth_tm(cfg.fiber or FiberSpec()), True


def _resolve_image(cfg: ExperimentConfig, shape) -> np.ndarray:
    if cfg.image in BUILTIN_PATTERNS:
        return builtin_pattern(cfg.image, shape)
    path = Path(cfg.image)
    if not path.is_file():
        raise ConfigError(
            f"image {cfg.image!r} is neither a built-in pattern "
            f"({', '.join(sorted(BUILTIN_PATTERNS))}) nor an existing file"
        )
    mask = read_pbm(path)
    if mask.shape != tuple(shape):
        raise ShapeError(f"image shape {mask.shape} does not match input shape {shape}")
    return mask


def _write_outputs(directory: Path, writers: dict) -> list[str]:
    """Run every writer into a temporary name, then rename all of them.

    Nothing is left behind when any writer fails.
    """
    directory.mkdir(parents=True, exist_ok=True)
    done = []
    try:
        for name, write in writers.items():
            tmp = directory / f".{name}.partial"
            write(tmp)
            done.append((tmp, directory / name))
    except BaseException:
        for tmp, _ in done:
            tmp.unlink(missing_ok=True)
        for name in writers:
            (directory / f".{name}.partial").unlink(missing_ok=True)
        raise
    for tmp, final in done:
        os.replace(tmp, final)
    return list(writers)


def _manifest(cfg: ExperimentConfig, command: str, files: list[str], extra=None) -> dict:
    m = {
        "command": command,
        "version": __version__,
        "seeds": cfg.seeds(),
        "config": cfg.to_dict(),
        "files": files,
    }
    if extra:
        m.update(extra)
    return m


def _write_json(data):
    def write(path):
        Path(path).write_text(json.dumps(data, indent=2, sort_keys=True) + "\n")
    return write


# --------------------------------------------------------------------------
# commands


def cmd_simulate(cfg: ExperimentConfig) -> list[str]:
    tm, synthetic = _resolve_tm(cfg)
    gt = _resolve_image(cfg, tm.input_shape)
    target = planted_target(tm, gt, cfg.noise_sigma, cfg.noise_seed)
    writers = {
        "target.pgm": lambda p: write_pgm(p, target),
        "ground_truth.pbm": lambda p: write_pbm(p, gt),
    }
    if synthetic:
        writers["tm.tmx"] = lambda p: save_tm(p, tm)
    files = list(writers) + ["manifest.json"]
    writers["manifest.json"] = _write_json(_manifest(cfg, "simulate", files))
    _write_outputs(_out(cfg), writers)
    log.info("simulate: wrote %s to %s", ", ".join(files), _out(cfg))
    return files


def _load_target(cfg, tm):
    path = Path(cfg.target_file) if cfg.target_file else _out(cfg) / "target.pgm"
    if not path.is_file():
        raise ConfigError(f"target speckle not found: {path} (run simulate first?)")
    target = read_pgm(path)
    if target.shape != tm.output_shape:
        raise ConfigError(
            f"target speckle shape {target.shape} does not match the TM "
            f"output shape {tm.output_shape}"
        )
    return target


def _load_ground_truth(cfg, tm):
    if cfg.ground_truth_file:
        path = Path(cfg.ground_truth_file)
        if not path.is_file():
            raise ConfigError(f"ground truth not found: {path}")
    else:
        path = _out(cfg) / "ground_truth.pbm"
        if not path.is_file():
            return None
    gt = read_pbm(path)
    if gt.shape != tm.input_shape:
        raise ConfigError(
            f"ground truth shape {gt.shape} does not match TM input shape {tm.input_shape}"
        )
    return gt


def _progress(quiet):
    if quiet:
        return None

    def report(stats):
        if stats.generation % 1000 == 0:
            log.info(
                "generation %d: best CC1 %.5f, CC2 %.5f",
                stats.generation, stats.best_cc1, stats.best_cc2,
            )
    return report


def cmd_retrieve(cfg: ExperimentConfig, quiet=False) -> dict:
    from .plotting import plot_convergence

    tm, _ = _resolve_tm(cfg, prefer_output=True)
    target = _load_target(cfg, tm)
    gt = _load_ground_truth(cfg, tm)
    cfg.ga.validate(tm.input_shape)
    out = _out(cfg)
    out.mkdir(parents=True, exist_ok=True)
    checkpoint = out / "checkpoint.gac" if cfg.checkpoint_every or cfg.resume else None
    if cfg.resume:
        if not checkpoint.is_file():
            raise ConfigError(f"no checkpoint to resume from at {checkpoint}")
        result = resume(
            checkpoint, tm, target, gt,
            max_generations=cfg.ga.max_generations,
            threads=cfg.ga.threads,
            checkpoint_every=cfg.checkpoint_every,
            callback=_progress(quiet),
        )
    else:
        result = run(
            tm, target, cfg.ga, gt,
            checkpoint_path=checkpoint,
            checkpoint_every=cfg.checkpoint_every,
            callback=_progress(quiet),
        )
    files = ["retrieved.pbm", "metrics.csv", "convergence.svg", "retrieve_manifest.json"]
    summary = {
        "final_cc1": result.best_cc1,
        "final_cc2": result.best_cc2,
        "generations": result.generations,
    }
    _write_outputs(out, {
        "retrieved.pbm": lambda p: write_pbm(p, result.best_mask),
        "metrics.csv": lambda p: result.metrics.to_csv(p),
        "convergence.svg": lambda p: plot_convergence(result.metrics, p),
        "retrieve_manifest.json": _write_json(_manifest(cfg, "retrieve", files, summary)),
    })
    print(
        f"final cc1={result.best_cc1:.6f} cc2={result.best_cc2:.6f} "
        f"generations={result.generations}"
    )
    return summary


def cmd_bend_sweep(cfg: ExperimentConfig, quiet=False) -> list:
    from .plotting import plot_sweep

    if not cfg.bend_sweep:
        raise ConfigError("bend_sweep needs a non-empty list of displacements")
    for d in cfg.bend_sweep:
        if not 0.0 <= float(d) <= 1.0:
            raise ConfigError(f"displacement {d} outside [0, 1]")
    tm, _ = _resolve_tm(cfg, prefer_output=True)
    gt = _resolve_image(cfg, tm.input_shape)
    cfg.ga.validate(tm.input_shape)
    out = _out(cfg)

    def report(point):
        if not quiet:
            log.info(
                "d=%.3f: final CC1 %.5f, CC2 %.5f",
                point.displacement, point.final_cc1, point.final_cc2,
            )

    points = bend_sweep(
        tm, gt, cfg.bend_sweep, cfg.ga, cfg.bend_seed, cfg.noise_sigma,
        cfg.noise_seed, callback=report,
    )
    ds = [p.displacement for p in points]
    cc1 = [p.final_cc1 for p in points]
    cc2 = [p.final_cc2 for p in points]

    def write_csv(path):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["d", "final_cc1", "final_cc2"])
            for p in points:
                writer.writerow([repr(p.displacement), repr(p.final_cc1), repr(p.final_cc2)])

    files = ["sweep.csv", "sweep.svg", "sweep_manifest.json"]
    _write_outputs(out, {
        "sweep.csv": write_csv,
        "sweep.svg": lambda p: plot_sweep(ds, cc1, cc2, p),
        "sweep_manifest.json": _write_json(_manifest(cfg, "bend-sweep", files)),
    })
    for p in points:
        print(f"d={p.displacement:g} cc1={p.final_cc1:.6f} cc2={p.final_cc2:.6f}")
    return points


def cmd_oracle(cfg: ExperimentConfig) -> dict:
    tm, _ = _resolve_tm(cfg, prefer_output=True)
    if tm.n > 24:
        raise CapacityError(
            f"the oracle enumerates 2**N masks and is limited to N <= 24; "
            f"this fiber has N={tm.n}. Use a smaller input_shape (e.g. 3x3)."
        )
    if cfg.target_file:
        target = _load_target(cfg, tm)
    else:
        gt = _resolve_image(cfg, tm.input_shape)
        target = planted_target(tm, gt, cfg.noise_sigma, cfg.noise_seed)
    report = brute_force_best_mask(tm, target)
    _write_outputs(_out(cfg), {"oracle.json": lambda p: report.to_json(p)})
    print(f"oracle best_cc1={report.best_cc1:.12f} ties={report.ties} n={report.n}")
    return report.to_dict()


def cmd_calib_gen(cfg: ExperimentConfig) -> Path:
    tm, synthetic = _resolve_tm(cfg, prefer_output=True)
    directory = export_calibration_set(
        _out(cfg) / "calibration", tm, cfg.calibration_count,
        cfg.calibration_on_ratio, cfg.calibration_seed,
    )
    if synthetic:
        save_tm(directory / "tm.tmx", tm)
    log.info("calib-gen: wrote %d pairs to %s", cfg.calibration_count, directory)
    return directory


# --------------------------------------------------------------------------
# argument parsing


def _common_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    g = p.add_argument_group("global options")
    g.add_argument("--config", help="JSON experiment file")
    g.add_argument("--seed", type=int, help="master seed; derives every other seed")
    g.add_argument("--output", help="output directory (output_dir)")
    g.add_argument("--threads", type=int, help="fitness evaluation threads (ga.threads)")
    g.add_argument("--quiet", action="store_true", help="suppress progress logging")
    f = p.add_argument_group("fiber and image")
    f.add_argument("--tm-file", help="TMX1 transmission matrix (tm_file)")
    f.add_argument("--input-shape", type=_shape, help="synthetic input grid HxW")
    f.add_argument("--output-shape", type=_shape, help="synthetic output grid HxW")
    f.add_argument("--image", help="built-in pattern name or PBM file")
    f.add_argument("--noise-sigma", type=float, help="relative camera noise")
    return p


def _ga_flags(p):
    g = p.add_argument_group("genetic algorithm")
    g.add_argument("--population", type=int, help="ga.population_size")
    g.add_argument("--generations", type=int, help="ga.max_generations")
    g.add_argument("--mutation-rate", type=float, help="ga.mutation_rate")
    g.add_argument("--elite", type=int, help="ga.elite_count")
    g.add_argument("--target-cc1", type=float, help="ga.target_cc1")
    g.add_argument("--on-ratio", type=float, help="ga.on_ratio")
    g.add_argument("--crossover-block", type=_shape, help="ga.crossover_block HxW")


def make_parser() -> argparse.ArgumentParser:
    common = _common_parser()
    parser = argparse.ArgumentParser(
        prog="mmfga",
        description="Binary image retrieval through a simulated multimode fiber.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("simulate", parents=[common], help="make a target speckle")

    p = sub.add_parser("retrieve", parents=[common], help="recover the mask with the GA")
    _ga_flags(p)
    p.add_argument("--target-file", help="target speckle PGM")
    p.add_argument("--ground-truth-file", help="ground-truth PBM for CC2")
    p.add_argument("--checkpoint-every", type=int, help="checkpoint period in generations")
    p.add_argument("--resume", action="store_true", help="continue from checkpoint.gac")

    p = sub.add_parser("bend-sweep", parents=[common], help="retrieval through bent fibers")
    _ga_flags(p)
    p.add_argument("--displacements", dest="bend_sweep", type=float, nargs="+",
                   help="bend displacements in [0, 1]")

    p = sub.add_parser("oracle", parents=[common], help="exhaustive search (N <= 24)")
    p.add_argument("--target-file", help="target speckle PGM")

    p = sub.add_parser("calib-gen", parents=[common], help="random calibration set")
    p.add_argument("--count", type=int, help="number of masks")
    p.add_argument("--calib-on-ratio", type=float, help="fraction of ON pixels")
    return parser


def main(argv=None) -> int:
    parser = make_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING if args.quiet else logging.INFO,
        format="%(levelname)s %(message)s",
        stream=sys.stderr,
    )
    try:
        cfg = build_config(args)
        if args.command == "simulate":
            cmd_simulate(cfg)
        elif args.command == "retrieve":
            cmd_retrieve(cfg, args.quiet)
        elif args.command == "bend-sweep":
            cmd_bend_sweep(cfg, args.quiet)
        elif args.command == "oracle":
            cmd_oracle(cfg)
        elif args.command == "calib-gen":
            cmd_calib_gen(cfg)
    except (ConfigError, ShapeError, CapacityError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
