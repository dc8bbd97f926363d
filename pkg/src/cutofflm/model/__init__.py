from .config import ModelConfig, ParamCount, param_count
from .transformer import DecoderLM, cross_entropy_loss
from .generate import GenerationParams, generate

__all__ = [
    "ModelConfig",
    "ParamCount",
    "param_count",
    "DecoderLM",
    "cross_entropy_loss",
    "GenerationParams",
    "generate",
]
