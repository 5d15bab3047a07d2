"""Budgeted 2D Gaussian image representation with region-constrained rasterization."""

from .core import (
    CHOL_DIAG_FLOOR,
    GaussianSet,
    GradientSet,
    LabelMap,
    TrainConfig,
    covariance_of,
    validate_set,
)
from .metrics import EdgeBandMask, edge_band, evaluate_pair, ms_ssim, psnr, ssim
from .rasterizer import (
    TileIndex,
    backward,
    build_tile_index,
    kernel_weight,
    render,
    render_naive,
)
from .synth import ChartSpec, gen_grid_chart, gen_pie_chart
from .trainer import (
    AdamState,
    TrainReport,
    assign_regions,
    fit,
    initialize,
    loss_and_grad,
    step,
    warmup_due,
)

__version__ = "0.1.0"
