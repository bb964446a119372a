"""DeadNet phototoxicity classifier (C++ core)."""

from ._deadnet import (
    Network,
    Error,
    ShapeError,
    ambiguity_chain,
    bootstrap_bca,
    class_model,
    deadnet_shapes,
    dihedral8,
    gaussian_blur,
    generate_synthetic,
    gradcam,
    inv_lr,
    load_checkpoint,
    sliding_window_classify,
    tps_warp,
    variance_normalize,
)

__version__ = "0.1.0"
