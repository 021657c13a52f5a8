"""Recovery of piecewise-constant signals from undersampled linear
measurements corrupted by multiplicative (speckle) noise."""

from .compression import (
    CodeStats,
    CodewordDescription,
    PiecewiseConstantCode,
    code_stats,
    decode,
    encode,
    project_approx,
    project_viterbi,
    quantize,
)
from .harness import ExperimentConfig, ExperimentRow, emit_outputs, psnr, run_experiment
from .likelihood import (
    ObjectiveContext,
    SingularObjectiveError,
    denoise_constant_ml,
    denoise_ml,
    nll_finite_sigma_z,
    nll_gradient,
    nll_limit,
    nll_overdetermined,
)
from .measurement import (
    MeasurementInstance,
    Signal,
    make_instance,
    make_piecewise_signal,
    measure,
    sample_matrix,
    stream,
)
from .solvers import (
    MultilevelConfig,
    PgdConfig,
    SolverReport,
    inner_continuous,
    multilevel,
    pgd,
    pgd_multi_init,
    pgd_then_multilevel,
)
from .theory import (
    BoundCheck,
    BoundInputs,
    BoundOutputs,
    check_empirical_bound,
    recovery_bound,
    sparse_recovery_bound,
)

__version__ = "0.1.0"
