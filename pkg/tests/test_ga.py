import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import chisquare

from mmfga.errors import ConfigError, ShapeError
from mmfga.fiber_model import TransmissionMatrix, corr2, forward_intensity
from mmfga.fibersim import FiberSpec, add_measurement_noise, synth_tm
from mmfga.ga import (
    GaConfig,
    Population,
    RunMetrics,
    block_crossover,
    crossover,
    evaluate,
    init_population,
    load_checkpoint,
    mutate,
    rank_and_select_parents,
    rank_weights,
    resume,
    run,
    selection_probabilities,
    step_generation,
)
from mmfga.patterns import letter_z


def planted(tm, seed=0):
    rng = np.random.default_rng((seed, 77))  # kept apart from GA seeds
    gt = (rng.random(tm.input_shape) < 0.5).astype(np.uint8)
    return gt, forward_intensity(tm, gt)


class TestConfig:
    @pytest.mark.parametrize(
        "kwargs",
        [
            {"population_size": 1},
            {"elite_count": 30},
            {"mutation_rate": 1.0},
            {"mutation_rate": -0.1},
            {"on_ratio": 1.5},
            {"target_cc1": 0.0},
            {"crossover_block": (0, 2)},
            {"threads": 0},
            {"max_generations": -1},
        ],
    )
    def test_invalid(self, kwargs):
        with pytest.raises(ConfigError):
            GaConfig(**kwargs)

    def test_block_must_fit_mask(self):
        with pytest.raises(ConfigError):
            init_population(GaConfig(crossover_block=(5, 2)), (4, 4))

    def test_dict_round_trip(self):
        cfg = GaConfig(crossover_block=(2, 3), rng_seed=7)
        assert GaConfig.from_dict(cfg.to_dict()) == cfg
        with pytest.raises(ConfigError):
            GaConfig.from_dict({"bogus": 1})


class TestInitPopulation:
    def test_deterministic(self):
        cfg = GaConfig(rng_seed=99)
        a = init_population(cfg, (6, 6))
        b = init_population(cfg, (6, 6))
        np.testing.assert_array_equal(a.masks, b.masks)
        assert a.masks.shape == (30, 6, 6)
        assert not a.evaluated

    def test_degenerate_on_ratio_rejected(self):
        with pytest.raises(ConfigError):
            init_population(GaConfig(on_ratio=0.0), (4, 4))
        with pytest.raises(ConfigError):
            init_population(GaConfig(on_ratio=1.0), (4, 4))

    def test_too_few_pixels(self):
        with pytest.raises(ConfigError):
            init_population(GaConfig(), (1, 1))

    def test_on_fraction(self):
        # 10 x 1000 = 10,000 pixels; the 99% binomial interval is 0.5 +- 0.013
        pop = init_population(GaConfig(population_size=10, rng_seed=5), (25, 40))
        assert abs(pop.masks.mean() - 0.5) <= 0.02
        assert set(np.unique(pop.masks)) <= {0, 1}


class TestEvaluate:
    def test_planted_mask_scores_one(self, desk_tm):
        gt, target = planted(desk_tm)
        pop = evaluate(Population(gt[None].repeat(3, axis=0)), desk_tm, target)
        np.testing.assert_allclose(pop.fitness, 1.0, atol=1e-9)

    def test_identical_masks_identical_fitness(self, desk_tm, rng):
        _, target = planted(desk_tm)
        mask = (rng.random((12, 12)) < 0.5).astype(np.uint8)
        pop = evaluate(Population(mask[None].repeat(5, axis=0)), desk_tm, target)
        assert len(set(pop.fitness.tolist())) == 1

    def test_matches_standalone_corr2_exactly(self):
        tm = synth_tm(FiberSpec((3, 3), (6, 6), seed=4))
        target = forward_intensity(tm, letter_z((5, 5))[1:4, 1:4])
        pop = init_population(GaConfig(population_size=8, rng_seed=1), (3, 3))
        scored = evaluate(pop, tm, target)
        for mask, fit in zip(pop.masks, scored.fitness):
            assert fit == corr2(forward_intensity(tm, mask), target)

    def test_order_does_not_matter(self, desk_tm):
        _, target = planted(desk_tm)
        pop = init_population(GaConfig(rng_seed=3), (12, 12))
        forward = evaluate(pop, desk_tm, target).fitness
        backward = evaluate(Population(pop.masks[::-1].copy()), desk_tm, target).fitness
        np.testing.assert_array_equal(forward, backward[::-1])

    def test_degenerate_speckle_scores_minus_one(self, small_tm):
        _, target = planted(small_tm)
        masks = np.zeros((3, 4, 4), dtype=np.uint8)
        masks[1, 0, 0] = 1
        masks[2] = 1
        pop = evaluate(Population(masks), small_tm, target)
        assert pop.fitness[0] == -1.0
        assert pop.degenerate_count == 1
        assert -1 < pop.fitness[1] <= 1

    def test_target_shape_checked(self, small_tm):
        pop = init_population(GaConfig(), (4, 4))
        with pytest.raises(ShapeError):
            evaluate(pop, small_tm, np.ones((5, 5)))

    @pytest.mark.parametrize("threads", [2, 8])
    def test_thread_count_does_not_change_values(self, desk_tm, threads):
        _, target = planted(desk_tm)
        pop = init_population(GaConfig(rng_seed=8), (12, 12))
        np.testing.assert_array_equal(
            evaluate(pop, desk_tm, target, threads).fitness,
            evaluate(pop, desk_tm, target, 1).fitness,
        )


class TestSelection:
    def test_rank_linear_probabilities(self):
        p = selection_probabilities([0.3, 0.9, -0.2, 0.5])
        np.testing.assert_allclose(p, [0.2, 0.4, 0.1, 0.3])

    def test_ties_share_weight(self):
        w = rank_weights([0.5, 0.5, 0.1])
        assert w[0] == w[1] > w[2]

    @settings(max_examples=40, deadline=None)
    @given(
        st.lists(st.integers(-1000, 1000), min_size=2, max_size=12),
        st.floats(0.01, 10),
        st.floats(-5, 5),
    )
    def test_affine_changes_do_not_alter_probabilities(self, fit, a, b):
        # coarse grid keeps distinct values distinct after the transform
        fit = np.array(fit) / 1000
        np.testing.assert_array_equal(
            selection_probabilities(fit), selection_probabilities(a * fit + b)
        )

    def test_population_of_two(self, rng):
        pop = Population(np.zeros((2, 2, 2), np.uint8), np.array([0.1, 0.7]))
        pairs = rank_and_select_parents(pop, rng, n_pairs=200)
        assert all(set(p) == {0, 1} for p in pairs.tolist())

    def test_too_small(self, rng):
        with pytest.raises(ConfigError):
            rank_and_select_parents(Population(np.zeros((1, 2, 2)), np.zeros(1)), rng)

    def test_default_pair_count_and_distinct(self, rng):
        fit = rng.random(30)
        pop = Population(np.zeros((30, 2, 2), np.uint8), fit)
        pairs = rank_and_select_parents(pop, rng, elite_count=2)
        assert pairs.shape == (28, 2)
        many = rank_and_select_parents(pop, rng, n_pairs=20_000)
        assert np.all(many[:, 0] != many[:, 1])

    def test_uniform_when_fitness_equal(self):
        r = 5
        pop = Population(np.zeros((r, 2, 2), np.uint8), np.full(r, 0.3))
        pairs = rank_and_select_parents(pop, np.random.default_rng(2024), n_pairs=10_000)
        ordered = list(itertools.permutations(range(r), 2))
        counts = [np.sum((pairs[:, 0] == a) & (pairs[:, 1] == b)) for a, b in ordered]
        assert sum(counts) == 10_000
        assert chisquare(counts).pvalue > 0.001

    def test_first_parent_follows_rank_weights(self):
        fit = np.array([0.1, 0.4, 0.3, 0.2])
        pop = Population(np.zeros((4, 2, 2), np.uint8), fit)
        pairs = rank_and_select_parents(pop, np.random.default_rng(7), n_pairs=40_000)
        observed = np.bincount(pairs[:, 0], minlength=4)
        expected = 40_000 * selection_probabilities(fit)
        assert chisquare(observed, expected).pvalue > 0.001


class TestCrossover:
    def test_identical_parents(self, rng):
        a = (rng.random((6, 6)) < 0.5).astype(np.uint8)
        for _ in range(20):
            np.testing.assert_array_equal(crossover(a, a.copy(), rng), a)

    def test_full_block_gives_second_parent(self, rng):
        a = (rng.random((4, 5)) < 0.5).astype(np.uint8)
        b = 1 - a
        np.testing.assert_array_equal(block_crossover(a, b, 0, 0, 4, 5), b)

    def test_shape_mismatch(self, rng):
        with pytest.raises(ShapeError):
            crossover(np.zeros((2, 3)), np.zeros((3, 2)), rng)

    def test_children_come_from_parents_in_one_block(self, rng):
        max_block = (3, 4)
        for _ in range(1000):
            a = (rng.random((6, 7)) < 0.5).astype(np.uint8)
            b = (rng.random((6, 7)) < 0.5).astype(np.uint8)
            child = crossover(a, b, rng, max_block)
            assert np.all((child == a) | (child == b))
            # pixels taken from b (where parents differ) fit in one block
            rows, cols = np.nonzero(child != a)
            if len(rows):
                assert rows.max() - rows.min() < max_block[0]
                assert cols.max() - cols.min() < max_block[1]
                box = (slice(rows.min(), rows.max() + 1), slice(cols.min(), cols.max() + 1))
                assert np.all(child[box] == b[box])

    def test_block_sizes_cover_range(self):
        rng = np.random.default_rng(0)
        a = np.zeros((4, 4), np.uint8)
        b = np.ones((4, 4), np.uint8)
        sizes = {int(crossover(a, b, rng).sum()) for _ in range(500)}
        assert {1, 16} <= sizes


class TestMutate:
    def test_rate_zero_is_identity(self, rng):
        a = (rng.random((5, 5)) < 0.5).astype(np.uint8)
        np.testing.assert_array_equal(mutate(a, 0.0, rng), a)

    def test_flip_count(self):
        # binomial(10,000, 0.005): 99.9% interval is [29, 75]
        a = np.zeros((100, 100), np.uint8)
        flips = int(mutate(a, 0.005, np.random.default_rng(3)).sum())
        assert 25 <= flips <= 75

    def test_rate_bounds(self, rng):
        with pytest.raises(ConfigError):
            mutate(np.zeros((2, 2)), 1.0, rng)

    def test_fixed_point(self, rng):
        a = (rng.random((5, 5)) < 0.5).astype(np.uint8)
        child = mutate(mutate(crossover(a, a.copy(), rng), 0.0, rng), 0.0, rng)
        np.testing.assert_array_equal(child, a)


class TestStepGeneration:
    def setup_method(self):
        self.tm = synth_tm(FiberSpec((5, 5), (10, 10), seed=2))
        self.gt, self.target = planted(self.tm, 1)

    def evaluated(self, cfg):
        return evaluate(init_population(cfg, (5, 5)), self.tm, self.target)

    def test_full_elitism_keeps_best(self):
        cfg = GaConfig(population_size=10, elite_count=9, mutation_rate=0.0)
        pop = self.evaluated(cfg)
        new, stats = step_generation(pop, self.tm, self.target, cfg, np.random.default_rng(0))
        assert stats.best_cc1 == pop.fitness.max()
        assert len(new) == 10

    def test_best_never_drops_and_size_conserved(self):
        cfg = GaConfig(population_size=12, elite_count=1, rng_seed=4)
        pop = self.evaluated(cfg)
        rng = np.random.default_rng(4)
        best = pop.fitness.max()
        for g in range(1, 60):
            pop, stats = step_generation(pop, self.tm, self.target, cfg, rng, g, self.gt)
            assert stats.best_cc1 >= best
            assert stats.best_cc1 >= stats.mean_cc1
            assert len(pop) == 12
            assert pop.masks.shape == (12, 5, 5)
            assert set(np.unique(pop.masks)) <= {0, 1}
            assert -1 <= stats.best_cc2 <= 1
            best = stats.best_cc1

    def test_replay_is_bit_identical(self):
        cfg = GaConfig(rng_seed=10)
        pop = self.evaluated(cfg)
        a, sa = step_generation(pop, self.tm, self.target, cfg, np.random.default_rng(77))
        b, sb = step_generation(pop, self.tm, self.target, cfg, np.random.default_rng(77))
        np.testing.assert_array_equal(a.masks, b.masks)
        np.testing.assert_array_equal(a.fitness, b.fitness)
        assert sa.best_cc1 == sb.best_cc1 and sa.mean_cc1 == sb.mean_cc1

    def test_elites_copied_unchanged(self):
        cfg = GaConfig(elite_count=3, rng_seed=1)
        pop = self.evaluated(cfg)
        order = np.argsort(-pop.fitness, kind="stable")[:3]
        new, _ = step_generation(pop, self.tm, self.target, cfg, np.random.default_rng(1))
        np.testing.assert_array_equal(new.masks[:3], pop.masks[order])
        np.testing.assert_array_equal(new.fitness[:3], pop.fitness[order])

    def test_requires_evaluated(self):
        cfg = GaConfig()
        with pytest.raises(ValueError):
            step_generation(init_population(cfg, (5, 5)), self.tm, self.target, cfg, 0)


class TestRun:
    def setup_method(self):
        self.tm = synth_tm(FiberSpec((6, 6), (16, 16), seed=21))
        self.gt, self.target = planted(self.tm, 2)

    def test_zero_budget_returns_best_initial(self):
        cfg = GaConfig(max_generations=0, rng_seed=3)
        result = run(self.tm, self.target, cfg, self.gt)
        initial = evaluate(init_population(cfg, (6, 6)), self.tm, self.target)
        assert result.generations == 0
        assert len(result.metrics) == 0
        assert result.best_cc1 == initial.fitness.max()
        np.testing.assert_array_equal(result.best_mask, initial.masks[initial.best_index()])

    def test_unpacks_as_mask_and_metrics(self):
        mask, metrics = run(self.tm, self.target, GaConfig(max_generations=3))
        assert mask.shape == (6, 6)
        assert isinstance(metrics, RunMetrics)
        assert metrics.generations.tolist() == [1, 2, 3]
        assert np.all(np.isnan(metrics.cc2))

    def test_recovers_planted_mask(self):
        cfg = GaConfig(max_generations=3000, rng_seed=5)
        result = run(self.tm, self.target, cfg, self.gt)
        assert result.best_cc1 >= cfg.target_cc1
        assert result.generations < 3000
        assert result.metrics.cc2[-1] == result.best_cc2

    @settings(max_examples=10, deadline=None)
    @given(st.integers(0, 2**63))
    def test_monotone_best(self, seed):
        cfg = GaConfig(max_generations=40, rng_seed=seed, elite_count=1)
        result = run(self.tm, self.target, cfg)
        assert np.all(np.diff(result.metrics.best_cc1) >= 0)

    def test_deterministic(self):
        cfg = GaConfig(max_generations=50, rng_seed=17)
        a = run(self.tm, self.target, cfg, self.gt)
        b = run(self.tm, self.target, cfg, self.gt)
        np.testing.assert_array_equal(a.best_mask, b.best_mask)
        np.testing.assert_array_equal(a.metrics.best_cc1, b.metrics.best_cc1)
        np.testing.assert_array_equal(a.metrics.mean_cc1, b.metrics.mean_cc1)
        np.testing.assert_array_equal(a.population.masks, b.population.masks)

    def test_without_elitism_tracks_best_ever(self):
        cfg = GaConfig(max_generations=30, elite_count=0, mutation_rate=0.2, rng_seed=1)
        result = run(self.tm, self.target, cfg)
        assert result.best_cc1 >= result.metrics.best_cc1.max()

    def test_checkpoint_resume_matches_uninterrupted(self, tmp_path):
        # noisy target: the run cannot stop early
        self.target = add_measurement_noise(self.target, 0.2, 0)
        cfg = GaConfig(max_generations=60, rng_seed=9, target_cc1=1.0)
        full = run(self.tm, self.target, cfg, self.gt)
        ckpt = tmp_path / "run.gac"
        half = run(
            self.tm, self.target, GaConfig(max_generations=25, rng_seed=9, target_cc1=1.0),
            self.gt, checkpoint_path=ckpt, checkpoint_every=5,
        )
        assert half.generations == 25
        assert ckpt.read_bytes()[:4] == b"GAC1"
        state = load_checkpoint(ckpt)
        assert state.generation == 25
        resumed = resume(ckpt, self.tm, self.target, self.gt, max_generations=60)
        np.testing.assert_array_equal(resumed.best_mask, full.best_mask)
        np.testing.assert_array_equal(resumed.population.masks, full.population.masks)
        for col in ("generations", "best_cc1", "mean_cc1", "cc2"):
            np.testing.assert_array_equal(
                getattr(resumed.metrics, col), getattr(full.metrics, col)
            )

    def test_metrics_csv_round_trip(self, tmp_path):
        result = run(self.tm, self.target, GaConfig(max_generations=5), self.gt)
        result.metrics.to_csv(tmp_path / "m.csv")
        header = (tmp_path / "m.csv").read_text().splitlines()[0]
        assert header == "generation,best_cc1,mean_cc1,cc2,elapsed_s"
        back = RunMetrics.from_csv(tmp_path / "m.csv")
        np.testing.assert_array_equal(back.best_cc1, result.metrics.best_cc1)
        np.testing.assert_array_equal(back.generations, [1, 2, 3, 4, 5])

    def test_ground_truth_shape_checked(self):
        with pytest.raises(ShapeError):
            run(self.tm, self.target, GaConfig(max_generations=1), np.ones((3, 3)))


def test_cc1_usually_exceeds_cc2_on_noiseless_problems():
    tm = synth_tm(FiberSpec((8, 8), (16, 16), seed=31))
    gt = letter_z((8, 8))
    target = forward_intensity(tm, gt)
    ordered = 0
    for seed in range(10):
        result = run(tm, target, GaConfig(max_generations=5000, rng_seed=seed), gt)
        assert result.best_cc1 >= 0.999
        # exact recovery ties both scores at 1 up to rounding
        ordered += result.best_cc1 >= result.best_cc2 - 1e-12
    assert ordered >= 8


def test_single_precision_matrix_runs():
    tm = synth_tm(FiberSpec((5, 5), (10, 10), seed=2)).astype(np.complex64)
    gt, target = planted(synth_tm(FiberSpec((5, 5), (10, 10), seed=2)), 1)
    result = run(tm, target, GaConfig(max_generations=20))
    assert isinstance(tm, TransmissionMatrix)
    assert -1 <= result.best_cc1 <= 1
