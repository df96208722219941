"""Acoustic model hyperparameters."""

from __future__ import annotations

from dataclasses import asdict, dataclass


@dataclass
class AcousticConfig:
    n_blocks: int = 6
    d_model: int = 512
    conv_ff_hidden: int = 2048
    n_heads: int = 8
    n_mels: int = 80
    n_style_tokens: int = 10
    d_style: int = 64
    d_prosody: int = 16
    d_prosody_hidden: int = 32
    n_speakers: int = 64
    d_cse: int = 32
    phone_vocab_size: int = 64
    conv_kernel: int = 7
    dropout: float = 0.1

    def __post_init__(self):
        dims = (
            self.n_blocks, self.d_model, self.conv_ff_hidden, self.n_heads,
            self.n_mels, self.n_style_tokens, self.d_style, self.d_prosody,
            self.d_prosody_hidden, self.n_speakers, self.d_cse,
            self.phone_vocab_size, self.conv_kernel,
        )
        if any(d < 1 for d in dims):
            raise ValueError("all dimensions must be >= 1")
        if self.d_model % self.n_heads:
            raise ValueError(
                f"d_model {self.d_model} not divisible by n_heads {self.n_heads}"
            )
        if self.d_style % self.n_heads:
            raise ValueError(
                f"d_style {self.d_style} not divisible by n_heads {self.n_heads}"
            )

    @classmethod
    def toy(cls, **overrides) -> "AcousticConfig":
        """Desk-scale preset small enough to overfit on a CPU in minutes."""
        base = dict(
            n_blocks=2, d_model=64, conv_ff_hidden=128, n_heads=2, n_mels=80,
            n_style_tokens=10, d_style=64, d_prosody=16, d_prosody_hidden=32,
            n_speakers=4, d_cse=32, phone_vocab_size=64, conv_kernel=3,
            dropout=0.0,
        )
        base.update(overrides)
        return cls(**base)

    def to_dict(self) -> dict:
        return asdict(self)
