"""Architecture hyperparameters and closed-form parameter accounting."""

from __future__ import annotations

from dataclasses import asdict, dataclass


@dataclass(frozen=True)
class ModelConfig:
    """Decoder-only transformer shape: RoPE attention, SwiGLU FFN, RMSNorm.

    Embeddings are untied (separate input table and output projection) and
    linear layers carry no biases; the published parameter counts reconcile
    only under those conventions.
    """

    sequence_length: int = 2048
    n_layers: int = 24
    d_model: int = 2048
    ffn_hidden: int = 5504
    n_heads: int = 16
    vocab_size: int = 32000
    rope_theta: float = 10000.0
    norm_eps: float = 1e-5

    def __post_init__(self) -> None:
        if self.d_model % self.n_heads != 0:
            raise ValueError(f"d_model {self.d_model} not divisible by n_heads {self.n_heads}")
        if self.head_dim % 2 != 0:
            raise ValueError(f"head dim {self.head_dim} must be even for rotary pairs")
        if self.ffn_hidden <= 0:
            raise ValueError("ffn_hidden must be positive")
        # Tokenizer-backed configs need vocab_size >= 256 + specials; that is
        # enforced where a tokenizer meets the model (pretrain refuses a config
        # smaller than the tokenizer vocabulary). Oracle-scale configs may be tiny.
        if self.vocab_size < 2:
            raise ValueError("vocab_size must be at least 2")
        if self.sequence_length < 1:
            raise ValueError("sequence_length must be positive")

    @property
    def head_dim(self) -> int:
        return self.d_model // self.n_heads

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "ModelConfig":
        return cls(**data)


@dataclass(frozen=True)
class ParamCount:
    embedding_params: int
    non_embedding_params: int

    @property
    def total_params(self) -> int:
        return self.embedding_params + self.non_embedding_params


def param_count(config: ModelConfig) -> ParamCount:
    """Exact parameter count from the architecture shape.

    embedding: input table plus untied output projection, 2*V*d.
    per layer: four d*d attention projections, SwiGLU gate/up/down (3*d*f),
    and two RMSNorm scale vectors; plus the final RMSNorm scale.
    """
    d, f, v = config.d_model, config.ffn_hidden, config.vocab_size
    embedding = 2 * v * d
    per_layer = 4 * d * d + 3 * d * f + 2 * d
    non_embedding = config.n_layers * per_layer + d
    return ParamCount(embedding_params=embedding, non_embedding_params=non_embedding)
