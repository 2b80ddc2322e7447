"""Genetic algorithm that recovers a binary input mask from one speckle.

Each generation keeps the ``elite_count`` best masks unchanged and fills the
rest of the population with children. A child is made by picking two
distinct parents with rank-linear probabilities, copying a random
rectangular block of the second parent into the first and flipping pixels
at random. Fitness (CC1) is the correlation between the speckle a mask
produces through the transmission matrix and the measured target speckle.

All randomness comes from one ``numpy.random.Generator`` seeded with
``GaConfig.rng_seed`` and consumed in a fixed order by the sequential
generation loop. Fitness evaluation uses no randomness, and a row of the
batched forward model does not depend on which other rows share its batch,
so results are bitwise identical for any thread count.
"""

from __future__ import annotations

import csv
import json
import struct
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Callable, Optional

import numpy as np
from scipy.stats import rankdata

from .errors import ConfigError, DegenerateVarianceError, ShapeError
from .fiber_model import (
    TargetCorrelator,
    TransmissionMatrix,
    as_mask,
    corr2,
    forward_intensity_batch,
)

__all__ = [
    "GaConfig",
    "Individual",
    "Population",
    "GenerationStats",
    "RunMetrics",
    "RunResult",
    "init_population",
    "evaluate",
    "rank_weights",
    "selection_probabilities",
    "rank_and_select_parents",
    "crossover",
    "crossover_batch",
    "block_crossover",
    "mutate",
    "step_generation",
    "run",
    "save_checkpoint",
    "load_checkpoint",
    "resume",
]


@dataclass(frozen=True)
class GaConfig:
    """Hyperparameters of the genetic algorithm.

    ``crossover_block`` bounds the height and width of the block copied from
    the second parent; ``None`` allows blocks up to the full mask.
    ``threads`` only affects speed, never results.
    """

    population_size: int = 30
    on_ratio: float = 0.5
    crossover_block: Optional[tuple[int, int]] = None
    mutation_rate: float = 0.005
    elite_count: int = 2
    max_generations: int = 60_000
    target_cc1: float = 0.999
    rng_seed: int = 0
    threads: int = 1

    def __post_init__(self):
        if self.crossover_block is not None:
            object.__setattr__(
                self, "crossover_block", tuple(int(v) for v in self.crossover_block)
            )
        self.validate()

    def validate(self, mask_shape=None) -> None:
        if self.population_size < 2:
            raise ConfigError("population_size must be at least 2")
        if not 0 <= self.elite_count < self.population_size:
            raise ConfigError("elite_count must be in [0, population_size)")
        if not 0.0 <= self.on_ratio <= 1.0:
            raise ConfigError("on_ratio must lie in [0, 1]")
        if not 0.0 <= self.mutation_rate < 1.0:
            raise ConfigError("mutation_rate must lie in [0, 1)")
        if self.max_generations < 0:
            raise ConfigError("max_generations must be non-negative")
        if not 0.0 < self.target_cc1 <= 1.0:
            raise ConfigError("target_cc1 must lie in (0, 1]")
        if not 0 <= self.rng_seed < 2**64:
            raise ConfigError("rng_seed must be a 64-bit unsigned integer")
        if self.threads < 1:
            raise ConfigError("threads must be at least 1")
        block = self.crossover_block
        if block is not None:
            if len(block) != 2 or min(block) < 1:
                raise ConfigError("crossover_block must be two positive integers")
            if mask_shape is not None and (
                block[0] > mask_shape[0] or block[1] > mask_shape[1]
            ):
                raise ConfigError(
                    f"crossover_block {block} does not fit mask shape {mask_shape}"
                )

    def block_bounds(self, mask_shape) -> tuple[int, int]:
        if self.crossover_block is None:
            return tuple(mask_shape)
        return self.crossover_block

    def to_dict(self) -> dict:
        d = asdict(self)
        if d["crossover_block"] is not None:
            d["crossover_block"] = list(d["crossover_block"])
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "GaConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown GA settings: {sorted(unknown)}")
        return cls(**d)


@dataclass(frozen=True)
class Individual:
    mask: np.ndarray
    fitness: Optional[float] = None


@dataclass
class Population:
    """A stack of candidate masks with optional fitness values.

    ``masks`` has shape ``(P, h, w)``; ``fitness`` is ``None`` until the
    population is evaluated. ``degenerate_count`` counts masks whose speckle
    was constant and therefore scored -1.
    """

    masks: np.ndarray
    fitness: Optional[np.ndarray] = None
    degenerate_count: int = 0

    def __len__(self):
        return self.masks.shape[0]

    def __getitem__(self, i) -> Individual:
        fit = None if self.fitness is None else float(self.fitness[i])
        return Individual(self.masks[i], fit)

    @property
    def mask_shape(self) -> tuple[int, int]:
        return self.masks.shape[1:]

    @property
    def evaluated(self) -> bool:
        return self.fitness is not None

    def best_index(self) -> int:
        if self.fitness is None:
            raise ValueError("population has not been evaluated")
        return int(np.argmax(self.fitness))


@dataclass(frozen=True)
class GenerationStats:
    """Summary of one generation.

    ``best_cc2`` is nan when no ground truth was supplied. ``wall_time`` is
    the elapsed time in seconds since the run started.
    """

    generation: int
    best_cc1: float
    mean_cc1: float
    best_cc2: float = float("nan")
    wall_time: float = 0.0


@dataclass
class RunMetrics:
    stats: list[GenerationStats] = field(default_factory=list)
    degenerate_count: int = 0

    CSV_COLUMNS = ("generation", "best_cc1", "mean_cc1", "cc2", "elapsed_s")

    def __len__(self):
        return len(self.stats)

    @property
    def generations(self) -> np.ndarray:
        return np.array([s.generation for s in self.stats], dtype=np.int64)

    @property
    def best_cc1(self) -> np.ndarray:
        return np.array([s.best_cc1 for s in self.stats])

    @property
    def mean_cc1(self) -> np.ndarray:
        return np.array([s.mean_cc1 for s in self.stats])

    @property
    def cc2(self) -> np.ndarray:
        return np.array([s.best_cc2 for s in self.stats])

    @property
    def elapsed(self) -> np.ndarray:
        return np.array([s.wall_time for s in self.stats])

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(self.CSV_COLUMNS)
            for s in self.stats:
                writer.writerow(
                    [
                        s.generation,
                        repr(s.best_cc1),
                        repr(s.mean_cc1),
                        repr(s.best_cc2),
                        f"{s.wall_time:.6f}",
                    ]
                )

    @classmethod
    def from_csv(cls, path) -> "RunMetrics":
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
        return cls(
            [
                GenerationStats(
                    int(r["generation"]),
                    float(r["best_cc1"]),
                    float(r["mean_cc1"]),
                    float(r["cc2"]),
                    float(r["elapsed_s"]),
                )
                for r in rows
            ]
        )


@dataclass
class RunResult:
    best_mask: np.ndarray
    best_cc1: float
    best_cc2: float
    metrics: RunMetrics
    population: Population
    generations: int

    def __iter__(self):
        # unpacks as (best mask, metrics)
        return iter((self.best_mask, self.metrics))


def _as_rng(rng) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)


def init_population(cfg: GaConfig, mask_shape, rng=None) -> Population:
    """Random masks with each pixel ON independently with ``cfg.on_ratio``.

    Uses a generator seeded from ``cfg.rng_seed`` unless `rng` is given.

    Raises
    ------
    ConfigError
        If the masks would be identical (``on_ratio`` of 0 or 1), which
        leaves the search with nothing to work with, or if the shape has
        fewer than two pixels.
    """
    mask_shape = tuple(int(s) for s in mask_shape)
    if len(mask_shape) != 2 or mask_shape[0] * mask_shape[1] < 2:
        raise ConfigError("masks need a 2-D shape with at least two pixels")
    cfg.validate(mask_shape)
    if cfg.on_ratio in (0.0, 1.0):
        raise ConfigError(
            "on_ratio of 0 or 1 makes every initial mask identical and constant"
        )
    rng = np.random.default_rng(cfg.rng_seed) if rng is None else _as_rng(rng)
    masks = rng.random((cfg.population_size, *mask_shape)) < cfg.on_ratio
    return Population(masks.astype(np.uint8))


class _Evaluator:
    """Fitness evaluation against one target through one matrix."""

    def __init__(self, tm: TransmissionMatrix, target, threads: int = 1):
        target = np.asarray(target, dtype=np.float64)
        if target.shape != tm.output_shape:
            raise ShapeError(
                f"target shape {target.shape} does not match the matrix "
                f"output shape {tm.output_shape}"
            )
        self.tm = tm
        self.correlate = TargetCorrelator(target)
        self.threads = threads
        self._pool = ThreadPoolExecutor(threads) if threads > 1 else None

    def close(self):
        if self._pool is not None:
            self._pool.shutdown()
            self._pool = None

    def _chunk(self, masks):
        speckles = forward_intensity_batch(self.tm, masks)
        return self.correlate(speckles)

    def __call__(self, masks: np.ndarray) -> tuple[np.ndarray, int]:
        if masks.shape[1:] != self.tm.input_shape:
            raise ShapeError(
                f"mask shape {masks.shape[1:]} does not match the matrix "
                f"input shape {self.tm.input_shape}"
            )
        size = max(1, -(-len(masks) // self.threads))
        chunks = [masks[i : i + size] for i in range(0, len(masks), size)]
        if self._pool is None or len(chunks) < 2:
            parts = [self._chunk(c) for c in chunks]
        else:
            parts = list(self._pool.map(self._chunk, chunks))
        if not parts:
            return np.zeros(0), 0
        r = np.concatenate([p[0] for p in parts])
        degenerate = np.concatenate([p[1] for p in parts])
        r[degenerate] = -1.0
        return r, int(degenerate.sum())


def evaluate(pop: Population, tm: TransmissionMatrix, target, threads: int = 1) -> Population:
    """Score every mask by CC1 against `target`.

    Each fitness equals ``corr2(forward_intensity(tm, mask), target)``
    bitwise. Masks whose speckle is constant get fitness -1 and increment
    ``degenerate_count``.
    """
    ev = _Evaluator(tm, target, threads)
    try:
        fit, bad = ev(pop.masks)
    finally:
        ev.close()
    return Population(pop.masks, fit, pop.degenerate_count + bad)


def rank_weights(fitness) -> np.ndarray:
    """Integer selection weights, twice ``R - rank + 1`` with rank 1 best.

    Tied individuals share their average rank, so equal fitness means equal
    weight. Only the ordering of `fitness` matters.
    """
    fitness = np.asarray(fitness, dtype=np.float64)
    if np.any(np.isnan(fitness)):
        raise ValueError("fitness values must all be present")
    ranks2 = np.rint(2 * rankdata(-fitness, method="average")).astype(np.int64)
    return 2 * (len(fitness) + 1) - ranks2


def selection_probabilities(fitness) -> np.ndarray:
    w = rank_weights(fitness)
    return w / w.sum()


def rank_and_select_parents(
    pop: Population, rng, n_pairs: Optional[int] = None, elite_count: int = 0
) -> np.ndarray:
    """Draw parent pairs with rank-linear weights.

    Returns an ``(n_pairs, 2)`` array of population indices; the two
    parents of a pair are always different individuals. `n_pairs` defaults
    to ``len(pop) - elite_count``.
    """
    if len(pop) < 2:
        raise ConfigError("parent selection needs at least two individuals")
    if pop.fitness is None:
        raise ValueError("population has not been evaluated")
    rng = _as_rng(rng)
    if n_pairs is None:
        n_pairs = len(pop) - elite_count
    w = rank_weights(pop.fitness)
    cum = np.cumsum(w)
    total = int(cum[-1])
    first = np.searchsorted(cum, rng.integers(0, total, n_pairs), side="right")
    # second parent: draw from the total weight minus the first parent's,
    # then skip over the first parent's interval of the cumulative sum
    u = rng.integers(0, total - w[first])
    lower = cum[first] - w[first]
    u = np.where(u >= lower, u + w[first], u)
    second = np.searchsorted(cum, u, side="right")
    return np.stack([first, second], axis=1)


def crossover_batch(parents_a, parents_b, rng, max_block=None) -> np.ndarray:
    """Vectorized :func:`crossover` over stacks of parent masks."""
    parents_a = np.asarray(parents_a)
    parents_b = np.asarray(parents_b)
    if parents_a.shape != parents_b.shape:
        raise ShapeError(f"parent shapes differ: {parents_a.shape} vs {parents_b.shape}")
    k, h, w = parents_a.shape
    bh, bw = (h, w) if max_block is None else max_block
    if not (1 <= bh <= h and 1 <= bw <= w):
        raise ConfigError(f"crossover block {(bh, bw)} does not fit mask shape {(h, w)}")
    rng = _as_rng(rng)
    heights = rng.integers(1, bh + 1, k)
    widths = rng.integers(1, bw + 1, k)
    tops = rng.integers(0, h - heights + 1)
    lefts = rng.integers(0, w - widths + 1)
    return block_crossover(parents_a, parents_b, tops, lefts, heights, widths)


def block_crossover(parents_a, parents_b, top, left, height, width) -> np.ndarray:
    """Copy the block ``[top:top+height, left:left+width]`` of `parents_b`
    into `parents_a`. Works on single masks or stacks with per-mask blocks."""
    parents_a = np.asarray(parents_a)
    parents_b = np.asarray(parents_b)
    h, w = parents_a.shape[-2:]
    top, left, height, width = (np.asarray(v)[..., None] for v in (top, left, height, width))
    in_rows = (np.arange(h) >= top) & (np.arange(h) < top + height)
    in_cols = (np.arange(w) >= left) & (np.arange(w) < left + width)
    block = in_rows[..., :, None] & in_cols[..., None, :]
    return np.where(block, parents_b, parents_a)


def crossover(parent_a, parent_b, rng, max_block=None) -> np.ndarray:
    """Child equal to `parent_a` except inside one block taken from `parent_b`.

    The block height and width are uniform in ``[1, max_block]`` (the full
    mask by default) and its position is uniform over all placements that
    fit inside the mask.
    """
    a = as_mask(parent_a)
    b = as_mask(parent_b)
    if a.shape != b.shape:
        raise ShapeError(f"parent shapes differ: {a.shape} vs {b.shape}")
    return crossover_batch(a[None], b[None], rng, max_block)[0]


def mutate(mask, mutation_rate: float, rng) -> np.ndarray:
    """Flip each pixel independently with probability `mutation_rate`.

    Accepts a single mask or a stack of masks.
    """
    if not 0.0 <= mutation_rate < 1.0:
        raise ConfigError("mutation_rate must lie in [0, 1)")
    mask = np.asarray(mask, dtype=np.uint8)
    if mutation_rate == 0.0:
        return mask.copy()
    flips = _as_rng(rng).random(mask.shape) < mutation_rate
    return mask ^ flips.astype(np.uint8)


def _elite_order(fitness: np.ndarray) -> np.ndarray:
    return np.argsort(-fitness, kind="stable")


def _breed(pop: Population, cfg: GaConfig, rng) -> np.ndarray:
    n_children = len(pop) - cfg.elite_count
    pairs = rank_and_select_parents(pop, rng, n_children)
    children = crossover_batch(
        pop.masks[pairs[:, 0]],
        pop.masks[pairs[:, 1]],
        rng,
        cfg.block_bounds(pop.mask_shape),
    )
    return mutate(children, cfg.mutation_rate, rng)


def _next_generation(pop, cfg, rng, evaluator):
    order = _elite_order(pop.fitness)[: cfg.elite_count]
    children = _breed(pop, cfg, rng)
    child_fit, bad = evaluator(children)
    masks = np.concatenate([pop.masks[order], children])
    fitness = np.concatenate([pop.fitness[order], child_fit])
    return Population(masks, fitness, pop.degenerate_count + bad)


def step_generation(
    pop: Population,
    tm: TransmissionMatrix,
    target,
    cfg: GaConfig,
    rng,
    generation: int = 1,
    ground_truth=None,
) -> tuple[Population, GenerationStats]:
    """Produce the next evaluated generation from an evaluated population."""
    if pop.fitness is None:
        raise ValueError("population has not been evaluated")
    if len(pop) != cfg.population_size:
        raise ConfigError("population size does not match the configuration")
    cfg.validate(pop.mask_shape)
    t0 = time.perf_counter()
    evaluator = _Evaluator(tm, target, cfg.threads)
    try:
        new = _next_generation(pop, cfg, _as_rng(rng), evaluator)
    finally:
        evaluator.close()
    best = new.best_index()
    cc2 = _cc2(new.masks[best], ground_truth)
    stats = GenerationStats(
        generation,
        float(new.fitness[best]),
        float(new.fitness.mean()),
        cc2,
        time.perf_counter() - t0,
    )
    return new, stats


def _cc2(mask, ground_truth) -> float:
    if ground_truth is None:
        return float("nan")
    try:
        return corr2(mask, ground_truth)
    except DegenerateVarianceError:
        return float("nan")


# --------------------------------------------------------------------------
# run loop and checkpoints

CHECKPOINT_MAGIC = b"GAC1"
CHECKPOINT_VERSION = 1


@dataclass
class _RunState:
    cfg: GaConfig
    generation: int
    rng: np.random.Generator
    population: Population
    metrics: RunMetrics
    best_mask: np.ndarray
    best_cc1: float


def save_checkpoint(path, state: _RunState) -> None:
    """Write a resumable snapshot of a run.

    Layout: magic ``b"GAC1"``, little-endian u32 format version, u32 header
    length, a UTF-8 JSON header (config, generation, RNG state, metrics,
    best fitness, array shapes), then packed mask bits for the population
    and the best mask, then the population fitness as little-endian float64.
    """
    pop = state.population
    header = {
        "config": state.cfg.to_dict(),
        "generation": state.generation,
        "rng_state": state.rng.bit_generator.state,
        "population_shape": list(pop.masks.shape),
        "degenerate_count": pop.degenerate_count,
        "best_cc1": state.best_cc1,
        "metrics": [asdict(s) for s in state.metrics.stats],
    }
    blob = json.dumps(header).encode("utf-8")
    parts = [
        CHECKPOINT_MAGIC,
        struct.pack("<II", CHECKPOINT_VERSION, len(blob)),
        blob,
        np.packbits(pop.masks.reshape(-1)).tobytes(),
        np.packbits(state.best_mask.reshape(-1)).tobytes(),
        np.asarray(pop.fitness, dtype="<f8").tobytes(),
    ]
    tmp = Path(str(path) + ".tmp")
    tmp.write_bytes(b"".join(parts))
    tmp.replace(path)


def load_checkpoint(path) -> _RunState:
    data = Path(path).read_bytes()
    if data[:4] != CHECKPOINT_MAGIC:
        raise ValueError(f"{path}: not a GAC1 checkpoint")
    version, hlen = struct.unpack_from("<II", data, 4)
    if version != CHECKPOINT_VERSION:
        raise ValueError(f"{path}: unsupported checkpoint version {version}")
    offset = 12
    header = json.loads(data[offset : offset + hlen].decode("utf-8"))
    offset += hlen
    p, h, w = header["population_shape"]
    n_pop = p * h * w
    pop_bytes = (n_pop + 7) // 8
    best_bytes = (h * w + 7) // 8
    bits = np.frombuffer(data, np.uint8, pop_bytes, offset)
    masks = np.unpackbits(bits)[:n_pop].reshape(p, h, w)
    offset += pop_bytes
    bits = np.frombuffer(data, np.uint8, best_bytes, offset)
    best_mask = np.unpackbits(bits)[: h * w].reshape(h, w)
    offset += best_bytes
    fitness = np.frombuffer(data, "<f8", p, offset).astype(np.float64)

    cfg = GaConfig.from_dict(header["config"])
    rng = np.random.default_rng()
    rng.bit_generator.state = header["rng_state"]
    metrics = RunMetrics(
        [GenerationStats(**s) for s in header["metrics"]],
        header["degenerate_count"],
    )
    pop = Population(masks, fitness, header["degenerate_count"])
    return _RunState(
        cfg, header["generation"], rng, pop, metrics, best_mask, header["best_cc1"]
    )


def _loop(
    state: _RunState,
    evaluator: _Evaluator,
    ground_truth,
    checkpoint_path,
    checkpoint_every: int,
    callback,
) -> RunResult:
    cfg = state.cfg
    start = time.perf_counter() - (state.metrics.stats[-1].wall_time if state.metrics.stats else 0.0)
    pop = state.population
    best_cc2 = _cc2(state.best_mask, ground_truth)
    while state.generation < cfg.max_generations and state.best_cc1 < cfg.target_cc1:
        pop = _next_generation(pop, cfg, state.rng, evaluator)
        state.generation += 1
        best = pop.best_index()
        cur = float(pop.fitness[best])
        if cur > state.best_cc1:
            state.best_cc1 = cur
            state.best_mask = pop.masks[best].copy()
            best_cc2 = _cc2(state.best_mask, ground_truth)
        cc2 = best_cc2 if cur == state.best_cc1 else _cc2(pop.masks[best], ground_truth)
        stats = GenerationStats(
            state.generation,
            cur,
            float(pop.fitness.mean()),
            cc2,
            time.perf_counter() - start,
        )
        state.metrics.stats.append(stats)
        state.population = pop
        state.metrics.degenerate_count = pop.degenerate_count
        if callback is not None:
            callback(stats)
        if checkpoint_path is not None and checkpoint_every and (
            state.generation % checkpoint_every == 0
        ):
            save_checkpoint(checkpoint_path, state)
    if checkpoint_path is not None and checkpoint_every:
        save_checkpoint(checkpoint_path, state)
    return RunResult(
        state.best_mask,
        state.best_cc1,
        _cc2(state.best_mask, ground_truth),
        state.metrics,
        pop,
        state.generation,
    )


def _check_ground_truth(ground_truth, tm):
    if ground_truth is None:
        return None
    gt = as_mask(ground_truth)
    if gt.shape != tm.input_shape:
        raise ShapeError(
            f"ground truth shape {gt.shape} does not match input shape {tm.input_shape}"
        )
    return gt


def run(
    tm: TransmissionMatrix,
    target,
    cfg: GaConfig = GaConfig(),
    ground_truth=None,
    *,
    checkpoint_path=None,
    checkpoint_every: int = 0,
    callback: Optional[Callable[[GenerationStats], None]] = None,
) -> RunResult:
    """Evolve masks until ``max_generations`` or ``best_cc1 >= target_cc1``.

    Parameters
    ----------
    tm : TransmissionMatrix
        Matrix used to compute candidate speckles.
    target : ndarray
        Measured speckle, shape ``tm.output_shape``.
    cfg : GaConfig
    ground_truth : ndarray, optional
        True input mask; when given, CC2 of the best mask is recorded in
        every generation's stats.
    checkpoint_path : path, optional
        Write a ``GAC1`` checkpoint here every `checkpoint_every`
        generations and at the end of the run.
    callback : callable, optional
        Called with each generation's :class:`GenerationStats`.

    Returns
    -------
    RunResult
        Best mask found, its CC1 and CC2, the per-generation metrics and
        the final population. Unpacks as ``best_mask, metrics``.
    """
    gt = _check_ground_truth(ground_truth, tm)
    rng = np.random.default_rng(cfg.rng_seed)
    pop = init_population(cfg, tm.input_shape, rng)
    evaluator = _Evaluator(tm, target, cfg.threads)
    try:
        fit, bad = evaluator(pop.masks)
        pop = Population(pop.masks, fit, bad)
        best = pop.best_index()
        state = _RunState(
            cfg, 0, rng, pop, RunMetrics(degenerate_count=bad),
            pop.masks[best].copy(), float(fit[best]),
        )
        return _loop(state, evaluator, gt, checkpoint_path, checkpoint_every, callback)
    finally:
        evaluator.close()


def resume(
    checkpoint_path,
    tm: TransmissionMatrix,
    target,
    ground_truth=None,
    *,
    max_generations: Optional[int] = None,
    threads: Optional[int] = None,
    checkpoint_every: int = 0,
    callback=None,
) -> RunResult:
    """Continue a run from a checkpoint written by :func:`run`.

    With the same inputs the result is identical to an uninterrupted run,
    apart from elapsed times.
    """
    state = load_checkpoint(checkpoint_path)
    changes = {}
    if max_generations is not None:
        changes["max_generations"] = max_generations
    if threads is not None:
        changes["threads"] = threads
    if changes:
        state.cfg = replace(state.cfg, **changes)
    if state.population.mask_shape != tm.input_shape:
        raise ShapeError("checkpoint masks do not match the matrix input shape")
    gt = _check_ground_truth(ground_truth, tm)
    evaluator = _Evaluator(tm, target, state.cfg.threads)
    try:
        return _loop(
            state, evaluator, gt, checkpoint_path, checkpoint_every, callback
        )
    finally:
        evaluator.close()
