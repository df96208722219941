"""Signal analysis kernels: mel spectrograms, pitch, SSIM, resampling, alignments.

All audio enters and leaves as float numpy arrays in [-1, 1]. Mel analysis is
fixed at 16 kHz with 50 ms frames and a 12.5 ms hop; framing is valid
(left-aligned, no padding), so a signal of n samples yields
(n - frame_len) // hop + 1 frames.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import signal as sps
from scipy.io import wavfile

MEL_SR = 16000
FRAME_LEN = 800  # 50 ms at 16 kHz
HOP = 200  # 12.5 ms at 16 kHz
N_FFT = 1024
N_MELS = 80
FMIN = 0.0
FMAX = 8000.0
LOG_FLOOR = 1e-5


class AlignmentError(ValueError):
    """Raised for malformed alignment files."""


@dataclass
class MelSpec:
    """Log-mel spectrogram with its analysis geometry.

    data is [n_frames, n_mels], log of band magnitudes clamped at LOG_FLOOR.
    """

    data: np.ndarray
    sr: int = MEL_SR
    frame_len: int = FRAME_LEN
    hop: int = HOP
    n_mels: int = N_MELS
    pad_mode: str = "valid"

    @property
    def n_frames(self) -> int:
        return self.data.shape[0]


@dataclass
class PitchConfig:
    f0_min: float = 50.0
    f0_max: float = 600.0
    voicing_threshold: float = 0.6  # normalized autocorrelation peak
    rms_floor: float = 1e-4  # frames quieter than this are unvoiced
    tie_tolerance: float = 1e-3  # prefer the shortest lag within this of the peak


@dataclass
class PitchTrack:
    """Per-frame F0 in Hz; 0.0 marks unvoiced frames."""

    f0: np.ndarray
    sr: int
    frame_len: int
    hop: int


def mel_frame_count(n_samples: int, frame_len: int = FRAME_LEN, hop: int = HOP) -> int:
    """Number of fully covered analysis windows for a signal of n_samples."""
    if n_samples < frame_len:
        raise ValueError(
            f"signal too short for analysis: {n_samples} samples < frame {frame_len}"
        )
    return (n_samples - frame_len) // hop + 1


def _frames(wave: np.ndarray, frame_len: int, hop: int) -> np.ndarray:
    n = mel_frame_count(len(wave), frame_len, hop)
    view = np.lib.stride_tricks.sliding_window_view(wave, frame_len)[::hop]
    return view[:n]


def _hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)


def _mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)


def mel_filterbank(
    n_mels: int = N_MELS,
    n_fft: int = N_FFT,
    sr: int = MEL_SR,
    fmin: float = FMIN,
    fmax: float = FMAX,
) -> np.ndarray:
    """Triangular, area-normalized mel filterbank, [n_mels, n_fft // 2 + 1]."""
    edges_hz = _mel_to_hz(np.linspace(_hz_to_mel(fmin), _hz_to_mel(fmax), n_mels + 2))
    bin_hz = np.arange(n_fft // 2 + 1, dtype=np.float64) * sr / n_fft
    fb = np.zeros((n_mels, len(bin_hz)), dtype=np.float64)
    for i in range(n_mels):
        lo, ctr, hi = edges_hz[i], edges_hz[i + 1], edges_hz[i + 2]
        up = (bin_hz - lo) / (ctr - lo)
        down = (hi - bin_hz) / (hi - ctr)
        fb[i] = np.maximum(0.0, np.minimum(up, down))
        fb[i] *= 2.0 / (hi - lo)  # unit area per filter
    if np.any(fb.sum(axis=1) == 0.0):
        raise ValueError("degenerate mel filterbank: a filter covers no FFT bin")
    return fb


_WINDOW = sps.get_window("hann", FRAME_LEN, fftbins=True)
_FILTERBANK = mel_filterbank()


def stft_magnitude(wave: np.ndarray) -> np.ndarray:
    """Magnitude STFT with the module's fixed 16 kHz geometry, [n_frames, n_fft//2+1]."""
    frames = _frames(np.asarray(wave, dtype=np.float64), FRAME_LEN, HOP)
    return np.abs(np.fft.rfft(frames * _WINDOW, n=N_FFT, axis=1))


def stft_complex(wave: np.ndarray) -> np.ndarray:
    frames = _frames(np.asarray(wave, dtype=np.float64), FRAME_LEN, HOP)
    return np.fft.rfft(frames * _WINDOW, n=N_FFT, axis=1)


def istft(spec: np.ndarray) -> np.ndarray:
    """Overlap-add inverse of stft_complex (least-squares, window-normalized)."""
    spec = np.asarray(spec)
    n_frames = spec.shape[0]
    out_len = (n_frames - 1) * HOP + FRAME_LEN
    out = np.zeros(out_len, dtype=np.float64)
    norm = np.zeros(out_len, dtype=np.float64)
    frames = np.fft.irfft(spec, n=N_FFT, axis=1)[:, :FRAME_LEN]
    for t in range(n_frames):
        s = t * HOP
        out[s : s + FRAME_LEN] += frames[t] * _WINDOW
        norm[s : s + FRAME_LEN] += _WINDOW**2
    return out / np.maximum(norm, 1e-8)


def compute_mel(wave: np.ndarray, sr: int = MEL_SR) -> MelSpec:
    """Log-mel spectrogram of a mono waveform.

    Input at any sample rate; resampled to 16 kHz first when needed. Framing
    is valid (no padding): n_frames = (n - 800) // 200 + 1.

    Raises:
        ValueError: empty input, non-mono input, or input shorter than one frame.
    """
    wave = np.asarray(wave, dtype=np.float64)
    if wave.ndim != 1:
        raise ValueError(f"expected mono waveform, got shape {wave.shape}")
    if wave.size == 0:
        raise ValueError("empty waveform")
    if sr != MEL_SR:
        wave = resample(wave, sr, MEL_SR)
    mag = stft_magnitude(wave)
    mel = mag @ _FILTERBANK.T
    data = np.log(np.clip(mel, LOG_FLOOR, None))
    return MelSpec(data=data)


def extract_f0(
    wave: np.ndarray, sr: int = MEL_SR, cfg: PitchConfig | None = None
) -> PitchTrack:
    """Per-frame F0 by normalized autocorrelation with parabolic refinement.

    Frame/hop mirror the mel geometry (50 ms / 12.5 ms) at the given rate, so
    the track aligns one-to-one with compute_mel frames of the same signal.
    """
    cfg = cfg or PitchConfig()
    wave = np.asarray(wave, dtype=np.float64)
    if wave.ndim != 1 or wave.size == 0:
        raise ValueError("expected a non-empty mono waveform")
    frame_len = round(0.050 * sr)
    hop = round(0.0125 * sr)
    frames = _frames(wave, frame_len, hop)
    lag_min = max(2, int(math.floor(sr / cfg.f0_max)))
    lag_max = int(math.ceil(sr / cfg.f0_min))
    if lag_max >= frame_len:
        raise ValueError("frame too short for the configured f0_min")
    f0 = np.zeros(frames.shape[0], dtype=np.float64)
    for t, x in enumerate(frames):
        x = x - x.mean()
        if math.sqrt(float(np.mean(x * x))) < cfg.rms_floor:
            continue
        # ac[tau] = sum_t x[t] * x[t + tau]
        ac = sps.fftconvolve(x, x[::-1])[frame_len - 1 :]
        e = np.concatenate(([0.0], np.cumsum(x * x)))
        lags = np.arange(lag_min - 1, min(lag_max + 1, frame_len - 1) + 1)
        e_head = e[frame_len - lags] - e[0]  # energy of x[0 : W-tau]
        e_tail = e[frame_len] - e[lags]  # energy of x[tau : W]
        denom = np.sqrt(e_head * e_tail)
        r = np.where(denom > 1e-12, ac[lags] / np.maximum(denom, 1e-12), 0.0)
        core = (lags >= lag_min) & (lags <= lag_max)
        if not np.any(core):
            continue
        r_core = r[core]
        peak = float(r_core.max())
        if peak < cfg.voicing_threshold:
            continue
        # shortest lag within tolerance of the peak, to avoid octave-down errors
        idx_core = int(np.argmax(r_core >= peak - cfg.tie_tolerance))
        idx = int(np.flatnonzero(core)[idx_core])
        lag = float(lags[idx])
        if 0 < idx < len(lags) - 1:
            rm, r0, rp = r[idx - 1], r[idx], r[idx + 1]
            curv = rm - 2.0 * r0 + rp
            if curv < 0:
                delta = 0.5 * (rm - rp) / curv
                lag += float(np.clip(delta, -0.5, 0.5))
        f0[t] = float(np.clip(sr / lag, cfg.f0_min, cfg.f0_max))
    return PitchTrack(f0=f0, sr=sr, frame_len=frame_len, hop=hop)


def phone_pitch(track: PitchTrack, durations: np.ndarray) -> np.ndarray:
    """Mean log-F0 per phone over its voiced frames; 0.0 for fully unvoiced phones.

    durations are frame counts that must tile the track exactly.
    """
    durations = np.asarray(durations, dtype=np.int64)
    if durations.ndim != 1 or durations.size == 0:
        raise ValueError("durations must be a non-empty 1-D array")
    if np.any(durations < 0):
        raise ValueError("negative duration")
    if int(durations.sum()) != len(track.f0):
        raise ValueError(
            f"durations sum to {int(durations.sum())} frames, track has {len(track.f0)}"
        )
    out = np.zeros(len(durations), dtype=np.float64)
    start = 0
    for i, d in enumerate(durations):
        seg = track.f0[start : start + int(d)]
        voiced = seg[seg > 0]
        if voiced.size:
            out[i] = float(np.mean(np.log(voiced)))
        start += int(d)
    return out


def speaker_pitch_stats(phone_values: list[np.ndarray]) -> tuple[float, float]:
    """Mean and std of voiced (nonzero) per-phone log-F0 values across utterances."""
    voiced = np.concatenate([np.asarray(v)[np.asarray(v) != 0] for v in phone_values])
    if voiced.size == 0:
        return 0.0, 1.0
    return float(voiced.mean()), float(max(voiced.std(), 1e-6))


def normalize_phone_pitch(values: np.ndarray, mean: float, std: float) -> np.ndarray:
    """Standardize voiced values; exact zeros (unvoiced) pass through unchanged."""
    values = np.asarray(values, dtype=np.float64)
    return np.where(values != 0, (values - mean) / std, 0.0)


_SSIM_WIN = 11
_SSIM_SIGMA = 1.5


def _gaussian_kernel(size: int = _SSIM_WIN, sigma: float = _SSIM_SIGMA) -> np.ndarray:
    ax = np.arange(size, dtype=np.float64) - (size - 1) / 2.0
    g = np.exp(-(ax**2) / (2.0 * sigma**2))
    k = np.outer(g, g)
    return k / k.sum()


_SSIM_KERNEL = _gaussian_kernel()


def _pad_to_min(x: np.ndarray, size: int) -> np.ndarray:
    # reflect-pad any axis shorter than the SSIM window (edge-pad if length 1)
    for axis in (0, 1):
        while x.shape[axis] < size:
            need = size - x.shape[axis]
            avail = x.shape[axis] - 1
            if avail == 0:
                pad = (need - need // 2, need // 2)
                x = np.pad(x, [pad if a == axis else (0, 0) for a in (0, 1)], mode="edge")
            else:
                left = min(need - need // 2, avail)
                right = min(need - left, avail)
                x = np.pad(
                    x, [(left, right) if a == axis else (0, 0) for a in (0, 1)],
                    mode="reflect",
                )
    return x


def ssim(a: np.ndarray, b: np.ndarray) -> float:
    """Structural similarity between two equal-shape 2-D maps.

    11x11 Gaussian window (sigma 1.5), valid placements only, stabilizers
    C1=(0.01 L)^2 and C2=(0.03 L)^2 where L is the joint dynamic range of the
    pair. Maps with a dimension below 11 are reflect-padded up to the window.
    Identical inputs return exactly 1.0; the value is symmetric in (a, b).
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.ndim != 2 or b.ndim != 2:
        raise ValueError("ssim expects 2-D maps")
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    if a.size == 0:
        raise ValueError("empty input")
    dyn = max(a.max(), b.max()) - min(a.min(), b.min())
    if dyn == 0.0:
        return 1.0  # both maps are one identical constant
    c1 = (0.01 * dyn) ** 2
    c2 = (0.03 * dyn) ** 2
    a = _pad_to_min(a, _SSIM_WIN)
    b = _pad_to_min(b, _SSIM_WIN)
    k = _SSIM_KERNEL
    wa = np.lib.stride_tricks.sliding_window_view(a, (_SSIM_WIN, _SSIM_WIN))
    wb = np.lib.stride_tricks.sliding_window_view(b, (_SSIM_WIN, _SSIM_WIN))
    mu_a = np.tensordot(wa, k, axes=2)
    mu_b = np.tensordot(wb, k, axes=2)
    e_aa = np.tensordot(wa * wa, k, axes=2)
    e_bb = np.tensordot(wb * wb, k, axes=2)
    e_ab = np.tensordot(wa * wb, k, axes=2)
    var_a = e_aa - mu_a * mu_a
    var_b = e_bb - mu_b * mu_b
    cov = e_ab - mu_a * mu_b
    num = (2.0 * (mu_a * mu_b) + c1) * (2.0 * cov + c2)
    den = (mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2)
    return float(np.mean(num / den))


def resample(wave: np.ndarray, sr_from: int, sr_to: int) -> np.ndarray:
    """Polyphase resampling; output length is round(n * sr_to / sr_from)."""
    if sr_from <= 0 or sr_to <= 0:
        raise ValueError(f"sample rates must be positive, got {sr_from} -> {sr_to}")
    wave = np.asarray(wave, dtype=np.float64)
    if wave.ndim != 1:
        raise ValueError("expected mono waveform")
    if sr_from == sr_to:
        return wave.copy()
    g = math.gcd(sr_from, sr_to)
    out = sps.resample_poly(wave, sr_to // g, sr_from // g)
    target = int(round(len(wave) * sr_to / sr_from))
    if len(out) >= target:
        return out[:target]
    return np.pad(out, (0, target - len(out)))


def read_wav(path: str | Path) -> tuple[np.ndarray, int]:
    """Load a mono PCM WAV as float64 in [-1, 1]."""
    sr, data = wavfile.read(str(path))
    if data.ndim != 1:
        raise ValueError(f"{path}: expected mono audio, got shape {data.shape}")
    if data.dtype == np.int16:
        wave = data.astype(np.float64) / 32767.0
    elif data.dtype == np.int32:
        wave = data.astype(np.float64) / 2147483648.0
    elif data.dtype in (np.float32, np.float64):
        wave = data.astype(np.float64)
    else:
        raise ValueError(f"{path}: unsupported sample format {data.dtype}")
    return wave, int(sr)


def write_wav(path: str | Path, wave: np.ndarray, sr: int) -> None:
    """Write float audio in [-1, 1] as 16-bit PCM."""
    wave = np.asarray(wave, dtype=np.float64)
    pcm = np.round(np.clip(wave, -1.0, 1.0) * 32767.0).astype(np.int16)
    wavfile.write(str(path), sr, pcm)


def load_alignment(path: str | Path) -> dict[str, tuple[list[str], np.ndarray]]:
    """Parse a phone alignment TSV: utt_id, phone, start_frame, end_frame.

    Rows for one utterance must be contiguous in the file, start at frame 0,
    and tile the utterance without gaps or overlaps.

    Returns:
        utt_id -> (phones, durations) with durations in frames.

    Raises:
        AlignmentError: naming the offending line on any structural defect.
    """
    out: dict[str, tuple[list[str], np.ndarray]] = {}
    cur_id: str | None = None
    phones: list[str] = []
    ends: list[int] = []
    prev_end = 0

    def flush():
        if cur_id is not None:
            durs = np.diff(np.concatenate(([0], np.asarray(ends, dtype=np.int64))))
            out[cur_id] = (list(phones), durs)

    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n")
            if not line.strip():
                continue
            parts = line.split("\t")
            if len(parts) != 4:
                raise AlignmentError(f"{path}:{lineno}: expected 4 tab-separated fields")
            utt, phone, s_str, e_str = parts
            try:
                start, end = int(s_str), int(e_str)
            except ValueError:
                raise AlignmentError(f"{path}:{lineno}: non-integer frame index") from None
            if end < start:
                raise AlignmentError(f"{path}:{lineno}: end_frame {end} < start_frame {start}")
            if utt != cur_id:
                flush()
                if utt in out:
                    raise AlignmentError(f"{path}:{lineno}: rows for '{utt}' are not contiguous")
                cur_id, phones, ends, prev_end = utt, [], [], 0
                if start != 0:
                    raise AlignmentError(f"{path}:{lineno}: first phone of '{utt}' starts at {start}, not 0")
            if start != prev_end:
                kind = "gap" if start > prev_end else "overlap"
                raise AlignmentError(f"{path}:{lineno}: {kind} at frame {prev_end} in '{utt}'")
            phones.append(phone)
            ends.append(end)
            prev_end = end
    flush()
    return out


def synth_alignment(n_phones: int, n_frames: int, seed: int) -> np.ndarray:
    """Random composition of n_frames into n_phones positive frame counts."""
    if n_phones < 1:
        raise ValueError("n_phones must be >= 1")
    if n_frames < n_phones:
        raise ValueError(f"cannot split {n_frames} frames into {n_phones} nonzero phones")
    rng = np.random.default_rng(seed)
    cuts = np.sort(rng.choice(np.arange(1, n_frames), size=n_phones - 1, replace=False))
    return np.diff(np.concatenate(([0], cuts, [n_frames]))).astype(np.int64)
