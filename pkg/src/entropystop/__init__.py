"""Label-free training stopping for unsupervised outlier detection.

The core loop: train a self-supervised detector, watch the Shannon entropy
of its normalized per-sample loss distribution on a fixed evaluation set,
and stop at the lowest entropy point that passes a downtrend-significance
test. See the README for the CLI and the usual entry points.
"""

from .entropy import (
    DEFAULT_N_EVAL,
    EvalSet,
    eval_entropy,
    gradient_effect,
    loss_entropy,
    loss_split,
    make_eval_set,
    normalize_losses,
    read_trace_csv,
    write_trace_csv,
)
from .errors import (
    ContractViolationError,
    DegenerateFitError,
    DegenerateInjectionError,
    InvalidInputError,
    NumericalError,
    ShapeError,
)
from .harness import PAPER_GRIDS, RunConfig, build_report, expand_grid, run_grid, run_one
from .metrics import WilcoxonReport, auc, pearson, score_auc, wilcoxon_one_sided
from .models import Autoencoder, DeepSvddLite, OutlierModel, build_model, svdd_init_center
from .nn import (
    ForwardMode,
    LayerSpec,
    Mlp,
    OptimizerConfig,
    ParamSnapshot,
    grad_check,
    make_optimizer,
)
from .stopper import EntropyStopper, StepDecision, StopperConfig, replay
from .synth import (
    GmmModel,
    InjectionConfig,
    gmm_fit,
    gmm_sample,
    inject,
    inject_cluster,
    inject_global,
    inject_local,
    make_synthetic_suite,
    outlier_count,
)
from .tensor import Dataset, RngStream, load_csv, sample_rows, save_csv, standardize
from .training import (
    RunResult,
    TrainConfig,
    auc_trace,
    run_training,
    train_naive,
    train_optimal,
    train_with_stopper,
)

__version__ = "0.1.0"
