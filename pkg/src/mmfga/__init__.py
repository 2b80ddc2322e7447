"""Single-shot binary image retrieval through a multimode fiber.

A transmission matrix maps binary input masks to output fields; a camera
sees only the speckle intensity. A genetic algorithm searches for the mask
whose computed speckle correlates best with one measured speckle.
"""

__version__ = "0.1.0"

from .errors import CapacityError, ConfigError, DegenerateVarianceError, ShapeError
from .fiber_model import (
    TransmissionMatrix,
    as_mask,
    corr2,
    forward_field,
    forward_intensity,
    forward_intensity_batch,
    intensity,
)
from .fibersim import (
    BendState,
    FiberSpec,
    add_measurement_noise,
    gen_calibration_set,
    perturb_tm_bend,
    synth_tm,
)
from .ga import (
    GaConfig,
    GenerationStats,
    Population,
    RunMetrics,
    crossover,
    evaluate,
    init_population,
    mutate,
    rank_and_select_parents,
    run,
    step_generation,
)
from .oracle import LandscapeReport, brute_force_best_mask, near_optimal_count
from .patterns import builtin_pattern, letter_z
