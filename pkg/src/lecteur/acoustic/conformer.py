"""Conformer blocks with padding masks that leave valid positions untouched.

The convolution module uses LayerNorm rather than BatchNorm so a padded
batch gives the same result as running each item alone.
"""

from __future__ import annotations

import torch
import torch.nn as nn


def sinusoidal_positions(n: int, d: int) -> torch.Tensor:
    """Classic fixed positional table [n, d]."""
    pos = torch.arange(n, dtype=torch.float32).unsqueeze(1)
    idx = torch.arange(0, d, 2, dtype=torch.float32)
    angle = pos / torch.pow(10000.0, idx / d)
    out = torch.zeros(n, d)
    out[:, 0::2] = torch.sin(angle)
    out[:, 1::2] = torch.cos(angle[:, : out[:, 1::2].shape[1]])
    return out


def lengths_to_mask(lengths: torch.Tensor, max_len: int) -> torch.Tensor:
    """Boolean [B, T], True at valid positions."""
    ar = torch.arange(max_len, device=lengths.device)
    return ar.unsqueeze(0) < lengths.unsqueeze(1)


class FeedForward(nn.Module):
    def __init__(self, d_model: int, hidden: int, dropout: float):
        super().__init__()
        self.net = nn.Sequential(
            nn.LayerNorm(d_model),
            nn.Linear(d_model, hidden),
            nn.SiLU(),
            nn.Dropout(dropout),
            nn.Linear(hidden, d_model),
            nn.Dropout(dropout),
        )

    def forward(self, x):
        return self.net(x)


class ConvModule(nn.Module):
    def __init__(self, d_model: int, kernel: int, dropout: float,
                 conv_padding: str = "zeros"):
        super().__init__()
        self.norm = nn.LayerNorm(d_model)
        self.pointwise1 = nn.Conv1d(d_model, 2 * d_model, 1)
        self.depthwise = nn.Conv1d(
            d_model, d_model, kernel, padding=(kernel - 1) // 2, groups=d_model,
            padding_mode=conv_padding,
        )
        self.mid_norm = nn.LayerNorm(d_model)
        self.pointwise2 = nn.Conv1d(d_model, d_model, 1)
        self.dropout = nn.Dropout(dropout)

    def forward(self, x, mask):
        # x [B, T, d]; zero the padding so the depthwise kernel sees the
        # same zeros an unpadded run would see beyond its edges
        y = self.norm(x) * mask.unsqueeze(-1)
        y = y.transpose(1, 2)
        y = nn.functional.glu(self.pointwise1(y), dim=1)
        y = y * mask.unsqueeze(1)
        y = self.depthwise(y)
        y = y.transpose(1, 2)
        y = nn.functional.silu(self.mid_norm(y))
        y = self.pointwise2(y.transpose(1, 2)).transpose(1, 2)
        return self.dropout(y)


class ConformerBlock(nn.Module):
    """Half-step FF, self-attention, convolution, half-step FF, LayerNorm."""

    def __init__(self, d_model: int, n_heads: int, ff_hidden: int,
                 kernel: int, dropout: float, conv_padding: str = "zeros"):
        super().__init__()
        self.ff1 = FeedForward(d_model, ff_hidden, dropout)
        self.attn_norm = nn.LayerNorm(d_model)
        self.attn = nn.MultiheadAttention(
            d_model, n_heads, dropout=dropout, batch_first=True
        )
        self.conv = ConvModule(d_model, kernel, dropout, conv_padding)
        self.ff2 = FeedForward(d_model, ff_hidden, dropout)
        self.final_norm = nn.LayerNorm(d_model)

    def forward(self, x, mask):
        pad = ~mask
        x = x + 0.5 * self.ff1(x)
        q = self.attn_norm(x)
        att, _ = self.attn(q, q, q, key_padding_mask=pad, need_weights=False)
        x = x + att
        x = x + self.conv(x, mask)
        x = x + 0.5 * self.ff2(x)
        x = self.final_norm(x)
        return x * mask.unsqueeze(-1)


class ConformerStack(nn.Module):
    def __init__(self, n_blocks: int, d_model: int, n_heads: int,
                 ff_hidden: int, kernel: int, dropout: float,
                 use_positions: bool = True, conv_padding: str = "zeros"):
        super().__init__()
        self.d_model = d_model
        self.use_positions = use_positions
        self.blocks = nn.ModuleList(
            ConformerBlock(d_model, n_heads, ff_hidden, kernel, dropout, conv_padding)
            for _ in range(n_blocks)
        )

    def forward(self, x, lengths, return_all: bool = False):
        # x [B, T, d], lengths [B]
        mask = lengths_to_mask(lengths, x.shape[1])
        if self.use_positions:
            x = x + sinusoidal_positions(x.shape[1], self.d_model).to(x.dtype)
        x = x * mask.unsqueeze(-1)
        states = []
        for block in self.blocks:
            x = block(x, mask)
            states.append(x)
        return states if return_all else x
