"""Continuous-strength low-light enhancement toolkit.

Retinex-based pseudo-paired data construction, misalignment-aware weighted
flow matching at desk scale, strength-scaled low-rank adapters, and the
HTTP service behind the interactive strength studio.
"""

from .imgcore import (
    EPSILON,
    ColorSpace,
    ImageBuffer,
    MapRole,
    ScalarMap,
    linear_to_srgb,
    log_luminance,
    luminance,
    read_png,
    srgb_to_linear,
    write_png,
)
from .spatial import (
    BilateralParams,
    BinaryMask,
    bilateral_filter,
    dilate,
    distance_transform,
    resize_area,
    sobel_l1,
    threshold_percentile,
)
from .retinex import (
    InterpolationMethod,
    RetinexDecomposition,
    StrengthGroup,
    alpha_blend,
    build_group,
    decompose,
    interpolate_illumination,
    interpolate_reflectance,
    reconstruct,
    retinex_interpolate,
)
from .weights import (
    MaskParams,
    WeightMap,
    edge_diff,
    edge_response,
    soft_weight,
    structural_highpass,
    to_latent,
    unreliable_mask,
    weight_map_for_pair,
)
from .flow import (
    Latent,
    LossKind,
    LowRankAdapter,
    TrainConfig,
    TrainingPair,
    VelocityField,
    VelocityNet,
    adapter_effective,
    decode,
    encode,
    fm_loss,
    forward,
    interpolate_latent,
    load_model,
    sample,
    save_model,
    train,
    velocity_target,
    wfm_loss,
)
from .pipeline import (
    DatasetManifest,
    PairRecord,
    build_dataset,
    edge_consistency_score,
    ingest,
    read_manifest,
    write_manifest,
)

__version__ = "0.1.0"
