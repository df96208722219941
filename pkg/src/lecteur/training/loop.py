"""Training loop, feature cache IO, checkpointing, and speaker adaptation."""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
import torch
import torch.nn as nn

from ..acoustic.config import AcousticConfig
from ..acoustic.model import AcousticModel, UtteranceFeatures
from ..errors import DataError
from .losses import composite_loss
from .ranger import OptimizerConfig, Ranger, lr_at

log = logging.getLogger(__name__)

METRIC_COLUMNS = [
    "step", "l_gst", "l_phone", "l_pitch", "l_dur", "l_mel", "l_ssim",
    "total", "lr",
]


@dataclass
class TrainConfig:
    steps: int = 2000
    batch_max_frames: int = 1200
    checkpoint_every: int = 500
    log_every: int = 10
    seed: int = 0


@dataclass
class AdaptConfig:
    mode: str = "full"  # full | decoder | embedding
    steps: int = 200
    lr: float | None = None  # default peak_lr / 10
    batch_max_frames: int = 1200
    seed: int = 0


def save_features(item: UtteranceFeatures, features_dir: str | Path) -> Path:
    """One .npz per utterance; keys mirror UtteranceFeatures."""
    features_dir = Path(features_dir)
    features_dir.mkdir(parents=True, exist_ok=True)
    arrays = {
        "phone_ids": item.phone_ids.numpy().astype(np.int64),
        "pitch": item.pitch.numpy().astype(np.float32),
        "durations": item.durations.numpy().astype(np.int64),
        "mel": item.mel.numpy().astype(np.float32),
        "speaker_id": np.int64(item.speaker_id),
        "nd_id": np.int64(item.nd_id),
    }
    if item.context is not None:
        arrays["context"] = item.context.numpy().astype(np.float32)
    if item.cse is not None:
        arrays["cse"] = item.cse.numpy().astype(np.float32)
    out = features_dir / f"{item.utt_id}.npz"
    np.savez(out, **arrays)
    return out


def load_features(
    features_dir: str | Path, utt_ids: list[str]
) -> list[UtteranceFeatures]:
    features_dir = Path(features_dir)
    missing = [u for u in utt_ids if not (features_dir / f"{u}.npz").exists()]
    if missing:
        raise DataError(f"missing features for utt_ids: {', '.join(sorted(missing))}")
    items = []
    for utt_id in utt_ids:
        z = np.load(features_dir / f"{utt_id}.npz")
        items.append(
            UtteranceFeatures(
                phone_ids=torch.from_numpy(z["phone_ids"]),
                pitch=torch.from_numpy(z["pitch"]),
                durations=torch.from_numpy(z["durations"]),
                mel=torch.from_numpy(z["mel"]),
                speaker_id=int(z["speaker_id"]),
                nd_id=int(z["nd_id"]),
                context=torch.from_numpy(z["context"]) if "context" in z else None,
                cse=torch.from_numpy(z["cse"]) if "cse" in z else None,
                utt_id=utt_id,
            )
        )
    return items


def make_batches(
    items: list[UtteranceFeatures], max_frames: int
) -> list[list[int]]:
    """Group utterances of similar length, each batch within a frame budget."""
    order = sorted(range(len(items)), key=lambda i: items[i].mel.shape[0])
    batches: list[list[int]] = []
    current: list[int] = []
    frames = 0
    for i in order:
        n = items[i].mel.shape[0]
        if current and frames + n > max_frames:
            batches.append(current)
            current, frames = [], 0
        current.append(i)
        frames += n
    if current:
        batches.append(current)
    return batches


def save_checkpoint(
    path: str | Path,
    model: AcousticModel,
    optimizer: Ranger | None,
    opt_cfg: OptimizerConfig,
    step: int,
    batch_rng: torch.Generator | None = None,
) -> None:
    payload = {
        "config": model.config.to_dict(),
        "model": model.state_dict(),
        "optimizer": optimizer.state_dict() if optimizer else None,
        "opt_cfg": vars(opt_cfg),
        "step": step,
        "torch_rng": torch.get_rng_state(),
        "batch_rng": batch_rng.get_state() if batch_rng else None,
    }
    torch.save(payload, path)


def load_checkpoint(path: str | Path) -> dict:
    return torch.load(path, weights_only=False)


def _write_metrics_row(path: Path, row: dict) -> None:
    new = not path.exists()
    with path.open("a", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=METRIC_COLUMNS)
        if new:
            writer.writeheader()
        writer.writerow(row)


def train(
    model: AcousticModel,
    items: list[UtteranceFeatures],
    opt_cfg: OptimizerConfig,
    train_cfg: TrainConfig,
    out_dir: str | Path,
    resume_from: str | Path | None = None,
) -> Path:
    """Run the optimization to train_cfg.steps; returns the final checkpoint."""
    if not items:
        raise DataError("no utterances to train on")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    metrics_path = out_dir / "metrics.csv"
    optimizer = Ranger(model.parameters(), opt_cfg)
    batch_rng = torch.Generator()
    start_step = 0
    if resume_from is not None:
        payload = load_checkpoint(resume_from)
        model.load_state_dict(payload["model"])
        optimizer.load_state_dict(payload["optimizer"])
        start_step = payload["step"]
        torch.set_rng_state(payload["torch_rng"])
        batch_rng.set_state(payload["batch_rng"])
    else:
        torch.manual_seed(train_cfg.seed)
        batch_rng.manual_seed(train_cfg.seed + 1)
    batches = make_batches(items, train_cfg.batch_max_frames)
    model.train()
    step = start_step
    ckpt_path = out_dir / "checkpoint_last.pt"
    while step < train_cfg.steps:
        epoch_order = torch.randperm(len(batches), generator=batch_rng).tolist()
        for bi in epoch_order:
            step += 1
            optimizer.set_lr(lr_at(step, opt_cfg))
            optimizer.zero_grad()
            batch = [items[i] for i in batches[bi]]
            breakdown = composite_loss(model.forward_train(batch), batch)
            breakdown.total.backward()
            optimizer.step()
            if step % train_cfg.log_every == 0 or step == 1 or step == train_cfg.steps:
                row = {"step": step, "lr": lr_at(step, opt_cfg), **breakdown.terms()}
                _write_metrics_row(metrics_path, row)
                log.info("step %d total %.4f", step, row["total"])
            if step % train_cfg.checkpoint_every == 0 or step == train_cfg.steps:
                save_checkpoint(ckpt_path, model, optimizer, opt_cfg, step, batch_rng)
            if step >= train_cfg.steps:
                break
    model.eval()
    save_checkpoint(ckpt_path, model, optimizer, opt_cfg, step, batch_rng)
    return ckpt_path


_ADAPT_GROUPS = {
    "full": None,  # everything trainable
    "decoder": ("speaker_embedding", "pitch_head", "duration_head", "decoder",
                "mel_heads"),
    "embedding": ("speaker_embedding",),
}


def expand_speaker_table(model: AcousticModel) -> int:
    """Append one speaker row (initialized to the mean of existing rows);
    returns the new speaker id."""
    old = model.speaker_embedding
    n, d = old.weight.shape
    new = nn.Embedding(n + 1, d)
    with torch.no_grad():
        new.weight[:n] = old.weight
        new.weight[n] = old.weight.mean(dim=0)
    model.speaker_embedding = new
    model.config = replace(model.config, n_speakers=n + 1)
    return n


def adapt(
    source_ckpt: str | Path,
    items: list[UtteranceFeatures],
    adapt_cfg: AdaptConfig,
    out_dir: str | Path,
) -> tuple[Path, int]:
    """Fine-tune a source model for one new speaker; returns (ckpt, speaker id).

    Every item in the target manifest is re-labeled with the new speaker id.
    """
    if adapt_cfg.mode not in _ADAPT_GROUPS:
        raise ValueError(f"unknown adapt mode {adapt_cfg.mode!r}")
    payload = load_checkpoint(source_ckpt)
    model = AcousticModel(AcousticConfig(**payload["config"]))
    model.load_state_dict(payload["model"])
    if model.config.n_speakers < 2:
        raise DataError("source checkpoint must be multi-speaker")
    for item in items:
        if item.speaker_id >= model.config.n_speakers:
            raise DataError(
                f"utt {item.utt_id}: speaker id {item.speaker_id} collides with "
                f"the reserved new-speaker row"
            )
    target_id = expand_speaker_table(model)
    items = [replace_speaker(i, target_id) for i in items]
    group = _ADAPT_GROUPS[adapt_cfg.mode]
    if group is not None:
        allowed = tuple(f"{name}." for name in group)
        for pname, p in model.named_parameters():
            p.requires_grad = pname.startswith(allowed)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    opt_cfg = OptimizerConfig(peak_lr=adapt_cfg.lr if adapt_cfg.lr is not None else 1e-4)
    ckpt_path = out_dir / "checkpoint_adapted.pt"
    if adapt_cfg.steps == 0:
        for p in model.parameters():
            p.requires_grad = True
        save_checkpoint(ckpt_path, model, None, opt_cfg, 0)
        return ckpt_path, target_id
    optimizer = Ranger(model.parameters(), opt_cfg)
    torch.manual_seed(adapt_cfg.seed)
    batch_rng = torch.Generator().manual_seed(adapt_cfg.seed + 1)
    batches = make_batches(items, adapt_cfg.batch_max_frames)
    metrics_path = out_dir / "adapt_metrics.csv"
    model.train()
    step = 0
    while step < adapt_cfg.steps:
        for bi in torch.randperm(len(batches), generator=batch_rng).tolist():
            step += 1
            optimizer.set_lr(opt_cfg.peak_lr)
            optimizer.zero_grad()
            batch = [items[i] for i in batches[bi]]
            breakdown = composite_loss(model.forward_train(batch), batch)
            breakdown.total.backward()
            optimizer.step()
            if step % 10 == 0 or step == 1 or step >= adapt_cfg.steps:
                _write_metrics_row(
                    metrics_path,
                    {"step": step, "lr": opt_cfg.peak_lr, **breakdown.terms()},
                )
            if step >= adapt_cfg.steps:
                break
    model.eval()
    for p in model.parameters():
        p.requires_grad = True
    save_checkpoint(ckpt_path, model, optimizer, opt_cfg, step, batch_rng)
    return ckpt_path, target_id


def replace_speaker(item: UtteranceFeatures, speaker_id: int) -> UtteranceFeatures:
    return UtteranceFeatures(
        phone_ids=item.phone_ids, pitch=item.pitch, durations=item.durations,
        mel=item.mel, speaker_id=speaker_id, nd_id=item.nd_id,
        context=item.context, cse=item.cse, utt_id=item.utt_id,
    )
