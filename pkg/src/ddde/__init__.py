"""Deep data density estimation.

Trains a positive critic on the Donsker-Varadhan variational bound of the
KL divergence between the data distribution and a uniform reference over a
box; the critic's log output plus a recovered constant estimates the data
log density. Ships with a cross-validated Gaussian KDE baseline, seeded
toy-data generators, evaluation metrics, and a CLI.
"""

from .data import (
    AffineRecord,
    Dataset,
    Domain,
    gen_circles,
    gen_correlated_gaussian,
    gen_gaussian,
    gen_gaussian_mixture,
    gen_two_moons,
    load_csv,
    load_idx,
    normalize_to_unit,
    rotate_image,
    sample_uniform,
    save_csv,
)
from .errors import (
    DddeError,
    DegenerateDataError,
    DivergenceError,
    DomainError,
    FormatError,
    ShapeError,
    ValidationError,
)
from .estimator import (
    DddeModel,
    DvLossValue,
    TrainConfig,
    TrainHistory,
    dv_loss,
    dv_loss_gradient_seed,
    lr_schedule,
    train,
    update_ema,
)
from .evaluation import (
    DensityGrid,
    auroc,
    grid_centers,
    grid_eval,
    nll,
    normalization_integral,
    save_grid_csv,
)
from .kde import KDE_BANDWIDTH_GRID, KdeModel, kde_log_density, kde_nll, select_bandwidth_cv
from .nn import AdamState, DenseLayer, MlpNetwork, adam_step, dropout_mask, elu

__version__ = "0.1.0"
