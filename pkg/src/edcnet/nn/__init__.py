from .layers import (
    conv1d_backward,
    conv1d_forward,
    dense_backward,
    dense_forward,
    interp_backward,
    interp_upsample,
    relu,
    relu_backward,
    sigmoid,
    sigmoid_backward,
)
from .model import (
    PRESETS,
    Model,
    ModelConfig,
    count_params,
    load_params,
    param_shapes,
    preset,
    save_params,
)

__all__ = [
    "conv1d_backward", "conv1d_forward", "dense_backward", "dense_forward",
    "interp_backward", "interp_upsample", "relu", "relu_backward", "sigmoid",
    "sigmoid_backward", "PRESETS", "Model", "ModelConfig", "count_params",
    "load_params", "param_shapes", "preset", "save_params",
]
