"""Predictors that replace the reference encoders at inference, plus the
variance heads and length regulation."""

from __future__ import annotations

import torch
import torch.nn as nn


class GSTPredictor(nn.Module):
    """GRU over conditioned phone hiddens, final state through a bottleneck."""

    def __init__(self, d_model: int, d_style: int, bottleneck: int | None = None):
        super().__init__()
        bottleneck = bottleneck or max(d_style // 4, 1)
        self.gru = nn.GRU(d_model, d_model, batch_first=True)
        self.down = nn.Linear(d_model, bottleneck)
        self.up = nn.Linear(bottleneck, d_style)

    def forward(self, hidden: torch.Tensor) -> torch.Tensor:
        # hidden [n_phones, d_model] -> [d_style]
        _, h = self.gru(hidden.unsqueeze(0))
        return self.up(torch.tanh(self.down(h[0, 0])))


class ProsodyPredictor(nn.Module):
    """Two stacked GRU layers over concat(phone hidden, gst)."""

    def __init__(self, d_model: int, d_style: int, d_prosody: int):
        super().__init__()
        self.gru = nn.GRU(d_model + d_style, d_model, num_layers=2, batch_first=True)
        self.out = nn.Linear(d_model, d_prosody)

    def forward(self, hidden: torch.Tensor, gst: torch.Tensor) -> torch.Tensor:
        # hidden [n_phones, d_model], gst [d_style] -> [n_phones, d_prosody]
        x = torch.cat([hidden, gst.unsqueeze(0).expand(hidden.shape[0], -1)], dim=-1)
        y, _ = self.gru(x.unsqueeze(0))
        return self.out(y[0])


class VariancePredictor(nn.Module):
    """Two 1D conv layers and a linear head to one scalar per phone."""

    def __init__(self, d_model: int, hidden: int | None = None, kernel: int = 3,
                 dropout: float = 0.1):
        super().__init__()
        hidden = hidden or d_model
        pad = (kernel - 1) // 2
        self.conv1 = nn.Conv1d(d_model, hidden, kernel, padding=pad)
        self.norm1 = nn.LayerNorm(hidden)
        self.conv2 = nn.Conv1d(hidden, hidden, kernel, padding=pad)
        self.norm2 = nn.LayerNorm(hidden)
        self.drop = nn.Dropout(dropout)
        self.out = nn.Linear(hidden, 1)

    def forward(self, hidden: torch.Tensor) -> torch.Tensor:
        # hidden [n_phones, d_model] -> [n_phones]
        x = hidden.unsqueeze(0).transpose(1, 2)
        x = torch.relu(self.conv1(x)).transpose(1, 2)
        x = self.drop(self.norm1(x))
        x = torch.relu(self.conv2(x.transpose(1, 2))).transpose(1, 2)
        x = self.drop(self.norm2(x))
        return self.out(x)[0, :, 0]


class PitchEmbedding(nn.Module):
    """Projects the per-phone pitch scalar into the model dimension."""

    def __init__(self, d_model: int, kernel: int = 3):
        super().__init__()
        self.conv = nn.Conv1d(1, d_model, kernel, padding=(kernel - 1) // 2)

    def forward(self, pitch: torch.Tensor) -> torch.Tensor:
        # pitch [n_phones] -> [n_phones, d_model]
        return self.conv(pitch.unsqueeze(0).unsqueeze(0))[0].t()


def length_regulate(hidden: torch.Tensor, durations: torch.Tensor) -> torch.Tensor:
    """Repeat phone rows by their frame counts. hidden [n_phones, d]."""
    if hidden.shape[0] != durations.shape[0]:
        raise ValueError("durations must give one count per phone")
    durations = durations.to(torch.long)
    if (durations < 0).any():
        raise ValueError("durations must be non-negative")
    if int(durations.sum()) == 0:
        raise ValueError("all durations are zero, nothing to synthesize")
    return torch.repeat_interleave(hidden, durations, dim=0)


def durations_from_log(
    log_pred: torch.Tensor, silence_mask: torch.Tensor | None = None
) -> torch.Tensor:
    """Invert the log(1+frames) target. Non-silence phones get at least one
    frame; silence phones may get zero."""
    frames = torch.round(torch.exp(log_pred) - 1.0).to(torch.long)
    floor = torch.ones_like(frames)
    if silence_mask is not None:
        floor = floor.masked_fill(silence_mask, 0)
    return torch.maximum(frames, floor)
