"""High-resolution image reconstruction from quarter-sampled sensors,
single view or stereo-assisted."""

from .errors import (
    CorruptImageError,
    DimensionError,
    InputError,
    InvariantError,
    MissingFileError,
    NrstereoError,
    UnsupportedBlockError,
    UnsupportedFormatError,
)
from .raster import RasterImage, crop, load_image, quantize, rgb_to_gray, save_image
from .sampling import (
    SampledView,
    SamplingMask,
    WeightClass,
    apply_mask,
    generate_mask,
    simulate_lr,
)
from .fse import (
    BlockModel,
    FseParams,
    linear_reconstruct,
    model_block,
    processing_order,
    reconstruct,
    reconstruct_any,
    support_weights,
)
from .stereo import (
    DisparityMap,
    MatchParams,
    WarpStats,
    compute_disparity,
    consistency_check,
    disparity_to_image,
    merge_views,
    warp_samples,
)
from .metrics import QualityEntry, QualityReport, build_report, psnr, ssim
from .pipeline import (
    PipelineConfig,
    StereoResult,
    StereoStats,
    load_config,
    run_batch,
    run_single_view,
    run_stereo,
    save_config,
)
from .estimators import FseReconstructor, LinearReconstructor

__version__ = "0.1.0"
