"""Composite six-term training loss.

The mel/ssim terms train the whole network including both reference
encoders; the predictor terms (gst, phone prosody) see detached references
so they cannot drag the references toward the predictors.
"""

from __future__ import annotations

from dataclasses import dataclass

import torch

from ..acoustic.model import TrainOutputs, UtteranceFeatures
from ..errors import PipelineError

_SSIM_WIN = 11
_SSIM_SIGMA = 1.5


@dataclass
class LossBreakdown:
    l_gst: torch.Tensor
    l_phone: torch.Tensor
    l_pitch: torch.Tensor
    l_dur: torch.Tensor
    l_mel: torch.Tensor
    l_ssim: torch.Tensor
    total: torch.Tensor

    def terms(self) -> dict[str, float]:
        return {
            "l_gst": float(self.l_gst.detach()),
            "l_phone": float(self.l_phone.detach()),
            "l_pitch": float(self.l_pitch.detach()),
            "l_dur": float(self.l_dur.detach()),
            "l_mel": float(self.l_mel.detach()),
            "l_ssim": float(self.l_ssim.detach()),
            "total": float(self.total.detach()),
        }


def _ssim_kernel(dtype) -> torch.Tensor:
    c = (_SSIM_WIN - 1) / 2.0
    x = torch.arange(_SSIM_WIN, dtype=torch.float64) - c
    g = torch.exp(-(x * x) / (2.0 * _SSIM_SIGMA**2))
    k = torch.outer(g, g)
    return (k / k.sum()).to(dtype)


def _pad_to_min(x: torch.Tensor, size: int) -> torch.Tensor:
    # mirror of the numpy reference: reflect up to the window, edge for dim 1
    for axis in (0, 1):
        while x.shape[axis] < size:
            need = size - x.shape[axis]
            avail = x.shape[axis] - 1
            if avail == 0:
                left, right = need - need // 2, need // 2
                mode = "replicate"
            else:
                left = min(need - need // 2, avail)
                right = min(need - left, avail)
                mode = "reflect"
            pad = (0, 0, left, right) if axis == 0 else (left, right, 0, 0)
            x = torch.nn.functional.pad(
                x.unsqueeze(0).unsqueeze(0), pad, mode=mode
            )[0, 0]
    return x


def torch_ssim(a: torch.Tensor, b: torch.Tensor) -> torch.Tensor:
    """Differentiable twin of the numpy structural-similarity routine."""
    if a.ndim != 2 or b.ndim != 2:
        raise ValueError("ssim expects 2-D maps")
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {tuple(a.shape)} vs {tuple(b.shape)}")
    if a.numel() == 0:
        raise ValueError("empty input")
    dyn = torch.maximum(a.max(), b.max()) - torch.minimum(a.min(), b.min())
    if float(dyn.detach()) == 0.0:
        return torch.ones((), dtype=a.dtype)
    c1 = (0.01 * dyn) ** 2
    c2 = (0.03 * dyn) ** 2
    a = _pad_to_min(a, _SSIM_WIN)
    b = _pad_to_min(b, _SSIM_WIN)
    k = _ssim_kernel(a.dtype).unsqueeze(0).unsqueeze(0)

    def w(x):
        return torch.nn.functional.conv2d(x.unsqueeze(0).unsqueeze(0), k)[0, 0]

    mu_a, mu_b = w(a), w(b)
    var_a = w(a * a) - mu_a * mu_a
    var_b = w(b * b) - mu_b * mu_b
    cov = w(a * b) - mu_a * mu_b
    num = (2.0 * mu_a * mu_b + c1) * (2.0 * cov + c2)
    den = (mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2)
    return (num / den).mean()


def _mean_l1(pred: torch.Tensor, target: torch.Tensor) -> torch.Tensor:
    return (pred - target).abs().mean()


def composite_loss(
    outputs: TrainOutputs, batch: list[UtteranceFeatures]
) -> LossBreakdown:
    """Unweighted sum of the six terms; batch items pooled by concatenation
    (ssim averaged per item since it is a per-matrix statistic)."""
    l_gst = _mean_l1(
        torch.cat([g for g in outputs.gst_pred]),
        torch.cat([g.detach() for g in outputs.gst_ref]),
    )
    l_phone = _mean_l1(
        torch.cat(outputs.prosody_pred, dim=0),
        torch.cat([p.detach() for p in outputs.prosody_ref], dim=0),
    )
    l_pitch = _mean_l1(
        torch.cat(outputs.pitch_pred),
        torch.cat([item.pitch for item in batch]),
    )
    l_dur = _mean_l1(
        torch.cat(outputs.log_dur_pred),
        torch.cat([torch.log1p(item.durations.to(torch.get_default_dtype()))
                   for item in batch]),
    )
    n_blocks = len(outputs.mel[0].per_block)
    l_mel = torch.zeros((), dtype=outputs.mel[0].final.dtype)
    for blk in range(n_blocks):
        l_mel = l_mel + _mean_l1(
            torch.cat([m.per_block[blk] for m in outputs.mel], dim=0),
            torch.cat([item.mel for item in batch], dim=0),
        )
    sims = [torch_ssim(m.final, item.mel) for m, item in zip(outputs.mel, batch)]
    l_ssim = 1.0 - torch.stack(sims).mean()
    terms = {
        "l_gst": l_gst, "l_phone": l_phone, "l_pitch": l_pitch,
        "l_dur": l_dur, "l_mel": l_mel, "l_ssim": l_ssim,
    }
    for name, value in terms.items():
        if not torch.isfinite(value.detach()):
            raise PipelineError("loss", f"{name} is not finite")
    total = l_gst + l_phone + l_pitch + l_dur + l_mel + l_ssim
    return LossBreakdown(total=total, **terms)
