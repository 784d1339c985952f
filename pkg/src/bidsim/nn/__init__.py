"""Dense-network core: fixed MLP shapes with manual backprop and Adam.

Hot kernels live in the compiled extension when built; the numpy
reference backend is selected automatically as a fallback (see
``bidsim.nn.backend``).
"""

from .backend import active_backend, available_backends, set_backend, use_backend
from .core import (
    Activation,
    AdamState,
    BatchNormState,
    DenseLayer,
    Mode,
    Network,
    NORM_EPS,
    NormScheme,
    ParamGrads,
    adam_step,
    apply_normalization,
    soft_update,
)
from .serial import dump_params, load_params, parse_params, save_params

__all__ = [
    "Activation",
    "AdamState",
    "BatchNormState",
    "DenseLayer",
    "Mode",
    "NORM_EPS",
    "Network",
    "NormScheme",
    "ParamGrads",
    "active_backend",
    "adam_step",
    "apply_normalization",
    "available_backends",
    "dump_params",
    "load_params",
    "parse_params",
    "save_params",
    "set_backend",
    "soft_update",
    "use_backend",
]
