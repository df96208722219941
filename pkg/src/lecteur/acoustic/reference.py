"""Reference encoders: utterance style (GST) and per-phone prosody.

Both consume ground-truth mels during training; at inference their outputs
are replaced by the predictors. Items are processed one by one at their true
length, so batch padding never reaches these modules.
"""

from __future__ import annotations

import math

import torch
import torch.nn as nn
import torch.nn.functional as F

from .conformer import ConformerStack

# receptive field of the two stride-2 conv layers
_MIN_REF_FRAMES = 7


class TokenAttention(nn.Module):
    """Multi-head attention of a single query against learned style tokens."""

    def __init__(self, d_query: int, n_tokens: int, d_style: int, n_heads: int):
        super().__init__()
        self.n_heads = n_heads
        self.d_head = d_style // n_heads
        self.tokens = nn.Parameter(torch.randn(n_tokens, d_style) * 0.5)
        self.wq = nn.Linear(d_query, d_style)
        self.wk = nn.Linear(d_style, d_style, bias=False)
        self.wv = nn.Linear(d_style, d_style, bias=False)

    def forward(self, query: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor]:
        # query [d_query] -> (gst [d_style], weights [n_heads, n_tokens])
        h, dh = self.n_heads, self.d_head
        q = self.wq(query).view(h, dh)
        k = self.wk(self.tokens).view(-1, h, dh)
        v = self.wv(self.tokens).view(-1, h, dh)
        scores = torch.einsum("hd,nhd->hn", q, k) / math.sqrt(dh)
        weights = torch.softmax(scores, dim=-1)
        out = torch.einsum("hn,nhd->hd", weights, v)
        return out.reshape(-1), weights

    def value_tokens(self) -> torch.Tensor:
        # [n_tokens, n_heads, d_head], the vectors whose span holds the gst
        return self.wv(self.tokens).view(-1, self.n_heads, self.d_head)


class GSTReferenceEncoder(nn.Module):
    """Conv2d stack over the mel, GRU over time, token attention."""

    def __init__(self, n_mels: int, d_style: int, n_tokens: int, n_heads: int,
                 channels: int = 32):
        super().__init__()
        self.convs = nn.ModuleList(
            [
                nn.Conv2d(1, channels, 3, stride=2, padding=1),
                nn.Conv2d(channels, channels, 3, stride=2, padding=1),
            ]
        )
        reduced_mels = n_mels
        for _ in self.convs:
            reduced_mels = (reduced_mels + 1) // 2
        self.gru = nn.GRU(channels * reduced_mels, d_style, batch_first=True)
        self.attention = TokenAttention(d_style, n_tokens, d_style, n_heads)

    def forward(self, mel: torch.Tensor) -> torch.Tensor:
        gst, _ = self.forward_with_weights(mel)
        return gst

    def forward_with_weights(self, mel: torch.Tensor):
        # mel [n_frames, n_mels]
        if mel.ndim != 2 or mel.shape[0] == 0:
            raise ValueError("reference mel must be a non-empty [frames, mels] matrix")
        while mel.shape[0] < _MIN_REF_FRAMES:
            if mel.shape[0] == 1:
                mel = mel.expand(_MIN_REF_FRAMES, -1).contiguous()
                break
            # reflect pad caps at length-1 per pass, so loop for tiny inputs
            need = min(_MIN_REF_FRAMES - mel.shape[0], mel.shape[0] - 1)
            mel = F.pad(mel.t().unsqueeze(0), (0, need), mode="reflect")[0].t()
        x = mel.unsqueeze(0).unsqueeze(0)  # [1, 1, T, M]
        for conv in self.convs:
            x = F.relu(conv(x))
        x = x.permute(0, 2, 1, 3).flatten(2)  # [1, T', C*M']
        _, h = self.gru(x)
        return self.attention(h[0, 0])


def segment_means(frames: torch.Tensor, durations: torch.Tensor) -> torch.Tensor:
    """Mean of each phone's frame rows. frames [n_frames, d], durations [n_phones]."""
    if int(durations.sum()) != frames.shape[0]:
        raise ValueError(
            f"durations sum to {int(durations.sum())} but mel has {frames.shape[0]} frames"
        )
    out = []
    pos = 0
    for d in durations.tolist():
        if d == 0:
            out.append(torch.zeros(frames.shape[1], dtype=frames.dtype))
        else:
            out.append(frames[pos : pos + d].mean(dim=0))
        pos += d
    return torch.stack(out)


class ProsodyReferenceEncoder(nn.Module):
    """Small Conformer over mel frames, averaged per phone by durations.

    No positional table here: prosody should follow content, not absolute
    frame position. Replicate conv padding keeps edge frames consistent
    with the interior (this stack always runs unbatched, so the padded-batch
    concern behind zero padding does not apply).
    """

    def __init__(self, n_mels: int, d_hidden: int, d_prosody: int,
                 n_heads: int = 2, kernel: int = 3):
        super().__init__()
        self.inp = nn.Linear(n_mels, d_hidden)
        self.stack = ConformerStack(
            1, d_hidden, n_heads, 2 * d_hidden, kernel, dropout=0.0,
            use_positions=False, conv_padding="replicate",
        )
        self.out = nn.Linear(d_hidden, d_prosody)

    def forward(self, mel: torch.Tensor, durations: torch.Tensor) -> torch.Tensor:
        # mel [n_frames, n_mels], durations [n_phones] -> [n_phones, d_prosody]
        if mel.ndim != 2 or mel.shape[0] == 0:
            raise ValueError("reference mel must be a non-empty [frames, mels] matrix")
        x = self.inp(mel).unsqueeze(0)
        lengths = torch.tensor([mel.shape[0]])
        h = self.stack(x, lengths)[0]
        return self.out(segment_means(h, durations))
