"""Mel to waveform stage.

Two routes share one contract (a mel frame becomes exactly 300 samples at
24 kHz): a small GAN generator trained with period and scale discriminators,
and a deterministic Griffin-Lim fallback that needs no training at all. Final
delivery resamples to 22.05 kHz and peak-normalizes.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch
import torch.nn.functional as F
from torch import nn

from . import dsp
from .errors import DataError, PipelineError

WAVE_SR = 24000
FINAL_SR = 22050
SAMPLES_PER_FRAME = 300  # 12.5 ms hop at 24 kHz
GRIFFIN_LIM_ITERS = 60
PEAK_TARGET = 0.95


@dataclass
class VocoderConfig:
    """Generator geometry plus training-mode switches."""

    upsample_factors: tuple[int, ...] = (5, 5, 4, 3)
    channels: tuple[int, ...] = (128, 64, 32, 16, 8)  # pre-conv then per stage
    discriminators: str = "toy"  # none | toy
    mode: str = "gan"  # gan | griffinlim
    n_mels: int = dsp.N_MELS

    def __post_init__(self):
        prod = math.prod(self.upsample_factors)
        if prod != SAMPLES_PER_FRAME:
            raise ValueError(
                f"upsample factors must multiply to {SAMPLES_PER_FRAME}, got {prod}"
            )
        if len(self.channels) != len(self.upsample_factors) + 1:
            raise ValueError(
                f"need {len(self.upsample_factors) + 1} channel widths, "
                f"got {len(self.channels)}"
            )
        if self.discriminators not in ("none", "toy"):
            raise ValueError(f"unknown discriminator set {self.discriminators!r}")
        if self.mode not in ("gan", "griffinlim"):
            raise ValueError(f"unknown vocoder mode {self.mode!r}")

    @classmethod
    def toy(cls, **overrides):
        kw = dict(channels=(32, 16, 8, 8, 4))
        kw.update(overrides)
        return cls(**kw)

    def to_dict(self) -> dict:
        return {
            "upsample_factors": tuple(self.upsample_factors),
            "channels": tuple(self.channels),
            "discriminators": self.discriminators,
            "mode": self.mode,
            "n_mels": self.n_mels,
        }


@dataclass
class VocoderTrainConfig:
    steps: int = 500
    batch_size: int = 2
    clip_frames: int = 16  # training crop length in mel frames
    lr: float = 2e-4
    betas: tuple[float, float] = (0.8, 0.99)
    lambda_mel: float = 45.0
    lambda_fm: float = 2.0
    log_every: int = 10
    seed: int = 0


@dataclass
class VocoderSample:
    """One paired training example: 24 kHz wave plus its 16 k-feature mel."""

    wave: np.ndarray
    sr: int
    mel: dsp.MelSpec
    utt_id: str = ""


class ResBlock(nn.Module):
    """Two dilated convolutions with residual connections, kernel 3."""

    def __init__(self, channels: int, dilations=(1, 3)):
        super().__init__()
        self.convs = nn.ModuleList(
            nn.Conv1d(channels, channels, 3, dilation=d, padding=d)
            for d in dilations
        )

    def forward(self, x):
        for conv in self.convs:
            x = x + conv(F.leaky_relu(x, 0.1))
        return x


def _upsample_geometry(factor: int) -> tuple[int, int]:
    """Kernel and padding giving exactly L*factor transposed-conv outputs."""
    if factor % 2 == 0:
        return 2 * factor, factor // 2
    return 3 * factor, factor


class Generator(nn.Module):
    """Transposed-convolution upsampler with residual dilated stacks.

    mel [B, n_mels, F] -> wave [B, 1, 300*F] in (-1, 1).
    """

    def __init__(self, cfg: VocoderConfig):
        super().__init__()
        self.cfg = cfg
        chans = cfg.channels
        self.pre = nn.Conv1d(cfg.n_mels, chans[0], 7, padding=3)
        ups = []
        blocks = []
        for i, f in enumerate(cfg.upsample_factors):
            k, p = _upsample_geometry(f)
            ups.append(nn.ConvTranspose1d(chans[i], chans[i + 1], k, stride=f, padding=p))
            blocks.append(ResBlock(chans[i + 1]))
        self.ups = nn.ModuleList(ups)
        self.blocks = nn.ModuleList(blocks)
        self.post = nn.Conv1d(chans[-1], 1, 7, padding=3)

    def forward(self, mel: torch.Tensor) -> torch.Tensor:
        x = self.pre(mel)
        for up, block in zip(self.ups, self.blocks):
            x = block(up(F.leaky_relu(x, 0.1)))
        return torch.tanh(self.post(F.leaky_relu(x, 0.1)))


class PeriodDiscriminator(nn.Module):
    """2D convolutions over the wave folded into columns of one period."""

    def __init__(self, period: int):
        super().__init__()
        self.period = period
        self.convs = nn.ModuleList(
            [
                nn.Conv2d(1, 16, (5, 1), stride=(3, 1), padding=(2, 0)),
                nn.Conv2d(16, 32, (5, 1), stride=(3, 1), padding=(2, 0)),
                nn.Conv2d(32, 32, (5, 1), padding=(2, 0)),
            ]
        )
        self.post = nn.Conv2d(32, 1, (3, 1), padding=(1, 0))

    def forward(self, wave: torch.Tensor):
        # wave [B, 1, T]; pad T to a multiple of the period, fold to [B,1,T/p,p]
        b, _, t = wave.shape
        pad = (-t) % self.period
        if pad:
            wave = F.pad(wave, (0, pad), mode="reflect")
            t = t + pad
        x = wave.view(b, 1, t // self.period, self.period)
        feats = []
        for conv in self.convs:
            x = F.leaky_relu(conv(x), 0.1)
            feats.append(x)
        out = self.post(x)
        feats.append(out)
        return out.flatten(1), feats


class ScaleDiscriminator(nn.Module):
    """1D convolutions on the wave, optionally average-pooled first."""

    def __init__(self, pool: int):
        super().__init__()
        self.pool = pool
        self.convs = nn.ModuleList(
            [
                nn.Conv1d(1, 16, 15, stride=4, padding=7),
                nn.Conv1d(16, 32, 15, stride=4, padding=7),
                nn.Conv1d(32, 32, 5, padding=2),
            ]
        )
        self.post = nn.Conv1d(32, 1, 3, padding=1)

    def forward(self, wave: torch.Tensor):
        x = wave if self.pool == 1 else F.avg_pool1d(wave, self.pool, self.pool)
        feats = []
        for conv in self.convs:
            x = F.leaky_relu(conv(x), 0.1)
            feats.append(x)
        out = self.post(x)
        feats.append(out)
        return out.flatten(1), feats


class DiscriminatorSet(nn.Module):
    """Toy multi-period (2, 3) plus multi-scale (1, 2) pair."""

    def __init__(self):
        super().__init__()
        self.period = nn.ModuleList([PeriodDiscriminator(p) for p in (2, 3)])
        self.scale = nn.ModuleList([ScaleDiscriminator(s) for s in (1, 2)])

    def forward(self, wave: torch.Tensor):
        outs, feats = [], []
        for d in list(self.period) + list(self.scale):
            o, f = d(wave)
            outs.append(o)
            feats.append(f)
        return outs, feats


# torch twins of the 16 kHz analysis pipeline, used for the differentiable
# mel-reconstruction loss on generated audio

_T_WINDOW = torch.from_numpy(dsp._WINDOW.copy()).float()
_T_FILTERBANK = torch.from_numpy(dsp._FILTERBANK.copy()).float()


def _sinc_decimation_kernel(taps: int = 121) -> torch.Tensor:
    """Hann-windowed sinc lowpass for 24 k -> 16 k (cutoff 8 kHz at 48 k)."""
    n = torch.arange(taps, dtype=torch.float32) - (taps - 1) / 2
    h = torch.where(
        n == 0,
        torch.tensor(1.0 / 3.0),
        torch.sin(math.pi * n / 3.0) / (math.pi * n),
    )
    window = torch.hann_window(taps, periodic=False)
    h = h * window
    # DC gain 2 compensates the zero insertion of the x2 upsampling half
    return (2.0 * h / h.sum()).reshape(1, 1, -1)


_DECIM_KERNEL = _sinc_decimation_kernel()


def torch_resample_24k_to_16k(wave: torch.Tensor) -> torch.Tensor:
    """Differentiable 24 kHz -> 16 kHz polyphase resample, wave [B, 1, T]."""
    b, _, t = wave.shape
    stuffed = torch.zeros(b, 1, 2 * t, dtype=wave.dtype, device=wave.device)
    stuffed[:, :, ::2] = wave
    kernel = _DECIM_KERNEL.to(wave.dtype)
    taps = kernel.shape[-1]
    pad = (taps - 1) // 2
    return F.conv1d(F.pad(stuffed, (pad, pad)), kernel, stride=3)


def torch_mel16(wave16: torch.Tensor) -> torch.Tensor:
    """Log-mel of a 16 kHz wave [B, T] -> [B, F, n_mels], dsp geometry."""
    frames = wave16.unfold(-1, dsp.FRAME_LEN, dsp.HOP)
    win = _T_WINDOW.to(wave16.dtype)
    spec = torch.fft.rfft(frames * win, n=dsp.N_FFT, dim=-1).abs()
    mel = spec @ _T_FILTERBANK.to(wave16.dtype).T
    return torch.log(torch.clamp(mel, min=dsp.LOG_FLOOR))


def _feature_matching(real_feats, fake_feats) -> torch.Tensor:
    loss = 0.0
    for rf, ff in zip(real_feats, fake_feats):
        for r, f in zip(rf, ff):
            loss = loss + (r.detach() - f).abs().mean()
    return loss


def _mel_loss(fake_wave: torch.Tensor, target_mel: torch.Tensor) -> torch.Tensor:
    """L1 between the mel of the generated wave and the target mel slice.

    fake_wave [B, 1, 300*Fc] at 24 kHz; target_mel [B, Fc, n_mels]. The
    resampled 16 k segment only supports Fc-3 full analysis windows, so the
    comparison drops the trailing frames of the target.
    """
    wave16 = torch_resample_24k_to_16k(fake_wave).squeeze(1)
    mel = torch_mel16(wave16)
    usable = mel.shape[1]
    return (mel - target_mel[:, :usable]).abs().mean()


def _check_pairs(pairs: list[VocoderSample]) -> None:
    if not pairs:
        raise DataError("no vocoder training pairs")
    for p in pairs:
        if p.sr != WAVE_SR:
            raise DataError(
                f"{p.utt_id or 'pair'}: wave sample rate {p.sr} != {WAVE_SR}"
            )
        if p.mel.sr != dsp.MEL_SR:
            raise DataError(
                f"{p.utt_id or 'pair'}: mel feature rate {p.mel.sr} != {dsp.MEL_SR}"
            )


def _crop(pair: VocoderSample, clip_frames: int, rng: np.random.Generator):
    mel = pair.mel.data
    n_frames = min(mel.shape[0], len(pair.wave) // SAMPLES_PER_FRAME)
    if n_frames <= clip_frames:
        f0, fc = 0, n_frames
    else:
        f0 = int(rng.integers(0, n_frames - clip_frames + 1))
        fc = clip_frames
    mel_clip = mel[f0 : f0 + fc]
    wave_clip = pair.wave[f0 * SAMPLES_PER_FRAME : (f0 + fc) * SAMPLES_PER_FRAME]
    return mel_clip, wave_clip


def save_vocoder_checkpoint(
    path: Path,
    generator: Generator,
    disc: DiscriminatorSet | None,
    cfg: VocoderConfig,
    step: int,
) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    torch.save(
        {
            "config": cfg.to_dict(),
            "generator": generator.state_dict(),
            "discriminators": disc.state_dict() if disc is not None else None,
            "step": step,
        },
        path,
    )
    return path


def load_vocoder_checkpoint(path: Path) -> dict:
    path = Path(path)
    if not path.exists():
        raise DataError(f"vocoder checkpoint not found: {path}")
    payload = torch.load(path, map_location="cpu", weights_only=True)
    cfgd = dict(payload["config"])
    cfgd["upsample_factors"] = tuple(cfgd["upsample_factors"])
    cfgd["channels"] = tuple(cfgd["channels"])
    payload["config"] = VocoderConfig(**cfgd)
    return payload


def train_vocoder(
    pairs: list[VocoderSample],
    cfg: VocoderConfig,
    train_cfg: VocoderTrainConfig,
    out_dir: Path,
    fine_tune_from: Path | None = None,
) -> Path:
    """Adversarial training of the generator on paired clips.

    Writes vocoder_metrics.csv and returns the final checkpoint path. With
    discriminators "none" only the mel reconstruction term trains the
    generator. fine_tune_from initializes from an earlier checkpoint; zero
    steps then re-saves it unchanged.
    """
    _check_pairs(pairs)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    torch.manual_seed(train_cfg.seed)
    gen = Generator(cfg)
    disc = DiscriminatorSet() if cfg.discriminators == "toy" else None
    if fine_tune_from is not None:
        payload = load_vocoder_checkpoint(fine_tune_from)
        gen.load_state_dict(payload["generator"])
        if disc is not None and payload["discriminators"] is not None:
            disc.load_state_dict(payload["discriminators"])

    ckpt_path = out_dir / "vocoder_last.pt"
    if train_cfg.steps == 0:
        return save_vocoder_checkpoint(ckpt_path, gen, disc, cfg, 0)

    opt_g = torch.optim.AdamW(gen.parameters(), lr=train_cfg.lr, betas=train_cfg.betas)
    opt_d = (
        torch.optim.AdamW(disc.parameters(), lr=train_cfg.lr, betas=train_cfg.betas)
        if disc is not None
        else None
    )
    rng = np.random.default_rng(train_cfg.seed)

    metrics = out_dir / "vocoder_metrics.csv"
    with metrics.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["step", "d_loss", "g_adv", "g_fm", "g_mel", "g_total"])
        for step in range(1, train_cfg.steps + 1):
            idx = rng.integers(0, len(pairs), size=train_cfg.batch_size)
            mel_clips, wave_clips = [], []
            for i in idx:
                m, w = _crop(pairs[int(i)], train_cfg.clip_frames, rng)
                mel_clips.append(m)
                wave_clips.append(w)
            fc = min(m.shape[0] for m in mel_clips)
            mel_in = torch.stack(
                [torch.from_numpy(m[:fc].copy()).float() for m in mel_clips]
            )
            real = torch.stack(
                [
                    torch.from_numpy(w[: fc * SAMPLES_PER_FRAME].copy()).float()
                    for w in wave_clips
                ]
            ).unsqueeze(1)

            fake = gen(mel_in.transpose(1, 2))

            d_loss_val = 0.0
            if disc is not None:
                opt_d.zero_grad()
                real_outs, _ = disc(real)
                fake_outs, _ = disc(fake.detach())
                d_loss = sum(
                    ((r - 1.0) ** 2).mean() + (f**2).mean()
                    for r, f in zip(real_outs, fake_outs)
                )
                d_loss.backward()
                opt_d.step()
                d_loss_val = float(d_loss.detach())

            opt_g.zero_grad()
            g_mel = _mel_loss(fake, mel_in)
            g_adv = torch.zeros(())
            g_fm = torch.zeros(())
            if disc is not None:
                fake_outs, fake_feats = disc(fake)
                with torch.no_grad():
                    _, real_feats = disc(real)
                g_adv = sum(((f - 1.0) ** 2).mean() for f in fake_outs)
                g_fm = _feature_matching(real_feats, fake_feats)
            g_total = (
                train_cfg.lambda_mel * g_mel
                + g_adv
                + train_cfg.lambda_fm * g_fm
            )
            if not torch.isfinite(g_total):
                raise PipelineError("vocoder", f"loss not finite at step {step}")
            g_total.backward()
            opt_g.step()

            if step == 1 or step % train_cfg.log_every == 0 or step == train_cfg.steps:
                writer.writerow(
                    [
                        step,
                        f"{d_loss_val:.6f}",
                        f"{float(g_adv.detach()):.6f}",
                        f"{float(g_fm.detach()):.6f}",
                        f"{float(g_mel.detach()):.6f}",
                        f"{float(g_total.detach()):.6f}",
                    ]
                )

    return save_vocoder_checkpoint(ckpt_path, gen, disc, cfg, train_cfg.steps)


_PINV_FILTERBANK = None


def _pinv_filterbank() -> np.ndarray:
    global _PINV_FILTERBANK
    if _PINV_FILTERBANK is None:
        _PINV_FILTERBANK = np.linalg.pinv(_FILTERBANK_T())
    return _PINV_FILTERBANK


def _FILTERBANK_T() -> np.ndarray:
    return dsp._FILTERBANK.T  # [n_fft//2+1, n_mels]


_MAG_REFINE_ITERS = 60


def mel_to_magnitude(mel: dsp.MelSpec, refine_iters: int = _MAG_REFINE_ITERS) -> np.ndarray:
    """Non-negative linear-magnitude estimate for each frame, [F, n_fft//2+1].

    Initialized from the filterbank pseudo-inverse, then refined with
    multiplicative least-squares updates. The plain pseudo-inverse smears
    energy into silent bands between harmonics, which dominates the log-mel
    round-trip error; the refinement keeps those valleys dark.
    """
    mel_lin = np.exp(mel.data)  # [F, n_mels]
    fb = dsp._FILTERBANK  # [n_mels, n_fft//2+1]
    mag = np.maximum(mel_lin @ _pinv_filterbank(), 1e-10)
    num = mel_lin @ fb
    for _ in range(refine_iters):
        den = (mag @ fb.T) @ fb
        mag = mag * num / np.maximum(den, 1e-12)
    return mag


def griffin_lim(mel: dsp.MelSpec, iters: int = GRIFFIN_LIM_ITERS) -> np.ndarray:
    """Deterministic mel inversion at 16 kHz, zero-phase initialization.

    Linear magnitudes come from mel_to_magnitude; phase is refined by iters
    rounds of istft/stft projection.
    """
    mag = mel_to_magnitude(mel)
    spec = mag.astype(np.complex128)
    for _ in range(iters):
        wave = dsp.istft(spec)
        rebuilt = dsp.stft_complex(wave)
        phase = rebuilt / np.maximum(np.abs(rebuilt), 1e-12)
        spec = mag * phase
    return dsp.istft(spec)


def generate(
    mel: dsp.MelSpec,
    cfg: VocoderConfig,
    checkpoint: Path | None = None,
) -> np.ndarray:
    """Mel to 24 kHz waveform; exactly 300 samples per frame, in [-1, 1]."""
    n_frames = mel.n_frames
    target_len = n_frames * SAMPLES_PER_FRAME
    if cfg.mode == "griffinlim":
        wave16 = griffin_lim(mel)
        wave24 = dsp.resample(wave16, dsp.MEL_SR, WAVE_SR)
    else:
        if checkpoint is None:
            raise PipelineError("vocoder", "gan mode requires a checkpoint")
        payload = load_vocoder_checkpoint(checkpoint)
        gen = Generator(payload["config"])
        gen.load_state_dict(payload["generator"])
        gen.eval()
        with torch.no_grad():
            mel_in = torch.from_numpy(mel.data.copy()).float().T.unsqueeze(0)
            wave24 = gen(mel_in).squeeze(0).squeeze(0).numpy().astype(np.float64)
    if len(wave24) < target_len:
        wave24 = np.pad(wave24, (0, target_len - len(wave24)))
    return np.clip(wave24[:target_len], -1.0, 1.0)


def finalize(wave24k: np.ndarray) -> np.ndarray:
    """Resample to 22.05 kHz and peak-normalize to 0.95; silence passes through."""
    out = dsp.resample(np.asarray(wave24k, dtype=np.float64), WAVE_SR, FINAL_SR)
    peak = float(np.max(np.abs(out))) if out.size else 0.0
    if peak > 0.0:
        out = out * (PEAK_TARGET / peak)
    return out
