"""Decoder-only transformer: rotary attention, SwiGLU FFN, pre-norm RMSNorm.

Residual blocks are pre-norm with a final norm before the untied output
projection; linear layers have no biases. Rotary rotation acts on
consecutive dimension pairs of each head with base frequency theta.
"""

from __future__ import annotations

import math

import torch
import torch.nn as nn
import torch.nn.functional as F

from .config import ModelConfig

IGNORE_ID = -100


class RMSNorm(nn.Module):
    def __init__(self, dim: int, eps: float):
        super().__init__()
        self.eps = eps
        self.weight = nn.Parameter(torch.ones(dim))

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        scale = torch.rsqrt(x.pow(2).mean(-1, keepdim=True) + self.eps)
        return x * scale * self.weight


def rope_angles(
    n_positions: int, head_dim: int, theta: float, dtype: torch.dtype
) -> tuple[torch.Tensor, torch.Tensor]:
    """cos/sin tables of shape [n_positions, head_dim // 2], computed in float64."""
    inv_freq = theta ** (
        -torch.arange(0, head_dim, 2, dtype=torch.float64) / head_dim
    )
    angles = torch.outer(torch.arange(n_positions, dtype=torch.float64), inv_freq)
    return angles.cos().to(dtype), angles.sin().to(dtype)


def apply_rope(x: torch.Tensor, cos: torch.Tensor, sin: torch.Tensor) -> torch.Tensor:
    """Rotate consecutive dimension pairs of x [B, T, H, head_dim]."""
    x1 = x[..., 0::2]
    x2 = x[..., 1::2]
    cos = cos[None, :, None, :]
    sin = sin[None, :, None, :]
    r1 = x1 * cos - x2 * sin
    r2 = x1 * sin + x2 * cos
    return torch.stack((r1, r2), dim=-1).flatten(-2)


class Block(nn.Module):
    def __init__(self, config: ModelConfig):
        super().__init__()
        d, f = config.d_model, config.ffn_hidden
        self.n_heads = config.n_heads
        self.head_dim = config.head_dim
        self.attn_norm = RMSNorm(d, config.norm_eps)
        self.q = nn.Linear(d, d, bias=False)
        self.k = nn.Linear(d, d, bias=False)
        self.v = nn.Linear(d, d, bias=False)
        self.o = nn.Linear(d, d, bias=False)
        self.ffn_norm = RMSNorm(d, config.norm_eps)
        self.gate = nn.Linear(d, f, bias=False)
        self.up = nn.Linear(d, f, bias=False)
        self.down = nn.Linear(f, d, bias=False)

    def forward(self, x: torch.Tensor, cos: torch.Tensor, sin: torch.Tensor) -> torch.Tensor:
        bsz, seq, dim = x.shape
        h = self.attn_norm(x)
        shape = (bsz, seq, self.n_heads, self.head_dim)
        q = apply_rope(self.q(h).view(shape), cos, sin).transpose(1, 2)
        k = apply_rope(self.k(h).view(shape), cos, sin).transpose(1, 2)
        v = self.v(h).view(shape).transpose(1, 2)
        attn = F.scaled_dot_product_attention(q, k, v, is_causal=True)
        x = x + self.o(attn.transpose(1, 2).reshape(bsz, seq, dim))
        h = self.ffn_norm(x)
        x = x + self.down(F.silu(self.gate(h)) * self.up(h))
        return x


class DecoderLM(nn.Module):
    def __init__(self, config: ModelConfig, init_seed: int | None = 0):
        super().__init__()
        self.config = config
        self.embed = nn.Embedding(config.vocab_size, config.d_model)
        self.blocks = nn.ModuleList(Block(config) for _ in range(config.n_layers))
        self.final_norm = RMSNorm(config.d_model, config.norm_eps)
        self.lm_head = nn.Linear(config.d_model, config.vocab_size, bias=False)
        if init_seed is not None:
            self.init_parameters(init_seed)

    def init_parameters(self, seed: int) -> None:
        """normal(0, 0.02) everywhere, residual projections scaled by 1/sqrt(2L)."""
        gen = torch.Generator().manual_seed(seed)
        residual_scale = 1.0 / math.sqrt(max(1, 2 * self.config.n_layers))
        for name, param in self.named_parameters():
            if name.endswith("norm.weight"):
                with torch.no_grad():
                    param.fill_(1.0)
            else:
                std = 0.02
                if name.endswith(("o.weight", "down.weight")):
                    std *= residual_scale
                with torch.no_grad():
                    param.normal_(0.0, std, generator=gen)

    def param_tensor_count(self) -> int:
        return sum(p.numel() for p in self.parameters())

    def forward(self, tokens: torch.Tensor) -> torch.Tensor:
        if tokens.dim() != 2:
            raise ValueError(f"expected [batch, seq] token tensor, got shape {tuple(tokens.shape)}")
        bsz, seq = tokens.shape
        if seq == 0:
            raise ValueError("empty sequence")
        if seq > self.config.sequence_length:
            raise ValueError(
                f"sequence length {seq} exceeds model limit {self.config.sequence_length}"
            )
        lo, hi = int(tokens.min()), int(tokens.max())
        if lo < 0 or hi >= self.config.vocab_size:
            raise ValueError(
                f"token ids must lie in [0, {self.config.vocab_size}), saw [{lo}, {hi}]"
            )
        h = self.embed(tokens)
        cos, sin = rope_angles(seq, self.config.head_dim, self.config.rope_theta, h.dtype)
        for block in self.blocks:
            h = block(h, cos, sin)
        return self.lm_head(self.final_norm(h))


def cross_entropy_loss(
    logits: torch.Tensor, targets: torch.Tensor, ignore_id: int = IGNORE_ID
) -> torch.Tensor:
    """Mean next-token cross entropy in nats over non-ignored positions.

    Numerically stable via log-sum-exp; raises if every position is ignored
    rather than returning NaN.
    """
    if logits.shape[:-1] != targets.shape:
        raise ValueError(
            f"logits {tuple(logits.shape)} and targets {tuple(targets.shape)} disagree"
        )
    mask = targets != ignore_id
    n_scored = int(mask.sum())
    if n_scored == 0:
        raise ValueError("all target positions are ignored; loss undefined")
    vocab = logits.shape[-1]
    safe_targets = targets.masked_fill(~mask, 0)
    if int(safe_targets.min()) < 0 or int(safe_targets.max()) >= vocab:
        raise ValueError("target ids out of vocabulary range")
    log_z = torch.logsumexp(logits, dim=-1)
    picked = logits.gather(-1, safe_targets.unsqueeze(-1)).squeeze(-1)
    nll = (log_z - picked) * mask
    return nll.sum() / n_scored
