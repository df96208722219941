"""Phone-level duration-based acoustic model.

Training consumes ground-truth durations, pitch, and reference encoders over
the target mel; inference swaps every reference for its predictor. Both
paths share the encoder, decoder, and injection layers, so the decoder never
sees a train/infer distribution mismatch beyond the reference/predictor gap.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import torch
import torch.nn as nn

from .config import AcousticConfig
from .conformer import ConformerStack
from .predictors import (
    GSTPredictor,
    PitchEmbedding,
    ProsodyPredictor,
    VariancePredictor,
    durations_from_log,
    length_regulate,
)
from .reference import GSTReferenceEncoder, ProsodyReferenceEncoder

MEL_BIAS_INIT = -4.0  # log-mel floor region, keeps early predictions dark


@dataclass
class UtteranceFeatures:
    """One training item. Lengths vary per item; no padding here."""

    phone_ids: torch.Tensor  # [n_phones] long
    pitch: torch.Tensor  # [n_phones] normalized log-f0, 0 where unvoiced
    durations: torch.Tensor  # [n_phones] long, frames per phone
    mel: torch.Tensor  # [n_frames, n_mels]
    speaker_id: int = 0
    nd_id: int = 0  # 0 narration, 1 dialogue
    context: torch.Tensor | None = None  # [n_phones, d_model]
    cse: torch.Tensor | None = None  # [d_cse]
    utt_id: str = ""


@dataclass
class MelPrediction:
    per_block: list[torch.Tensor]  # n_blocks matrices [n_frames, n_mels]

    @property
    def final(self) -> torch.Tensor:
        return self.per_block[-1]


@dataclass
class TrainOutputs:
    mel: list[MelPrediction]
    pitch_pred: list[torch.Tensor]
    log_dur_pred: list[torch.Tensor]
    gst_pred: list[torch.Tensor]
    gst_ref: list[torch.Tensor]
    prosody_pred: list[torch.Tensor]
    prosody_ref: list[torch.Tensor]


@dataclass
class InferenceOutput:
    mel: torch.Tensor  # final block [n_frames, n_mels]
    blocks: MelPrediction
    durations: torch.Tensor  # [n_phones] long
    pitch: torch.Tensor  # [n_phones]


class AcousticModel(nn.Module):
    def __init__(self, config: AcousticConfig):
        super().__init__()
        self.config = config
        c = config
        self.phone_embedding = nn.Embedding(c.phone_vocab_size, c.d_model)
        self.encoder = ConformerStack(
            c.n_blocks, c.d_model, c.n_heads, c.conv_ff_hidden, c.conv_kernel,
            c.dropout,
        )
        self.speaker_embedding = nn.Embedding(c.n_speakers, c.d_model)
        self.nd_embedding = nn.Embedding(2, c.d_model)
        self.cse_proj = nn.Linear(c.d_cse, c.d_model)
        nn.init.zeros_(self.cse_proj.weight)
        nn.init.zeros_(self.cse_proj.bias)
        self.gst_reference_encoder = GSTReferenceEncoder(
            c.n_mels, c.d_style, c.n_style_tokens, c.n_heads
        )
        self.prosody_reference_encoder = ProsodyReferenceEncoder(
            c.n_mels, c.d_prosody_hidden, c.d_prosody
        )
        self.gst_predictor = GSTPredictor(c.d_model, c.d_style)
        self.prosody_predictor = ProsodyPredictor(c.d_model, c.d_style, c.d_prosody)
        self.pitch_head = VariancePredictor(c.d_model, dropout=c.dropout)
        self.duration_head = VariancePredictor(c.d_model, dropout=c.dropout)
        self.pitch_embed = PitchEmbedding(c.d_model)
        self.style_inject = nn.Linear(c.d_style, c.d_model)
        self.prosody_inject = nn.Linear(c.d_prosody, c.d_model)
        self.decoder = ConformerStack(
            c.n_blocks, c.d_model, c.n_heads, c.conv_ff_hidden, c.conv_kernel,
            c.dropout,
        )
        self.mel_heads = nn.ModuleList(
            nn.Linear(c.d_model, c.n_mels) for _ in range(c.n_blocks)
        )
        for head in self.mel_heads:
            nn.init.constant_(head.bias, MEL_BIAS_INIT)

    # ---- encoder side ----

    def _encode_batch(
        self, ids_list: list[torch.Tensor], ctx_list: list[torch.Tensor | None]
    ) -> list[torch.Tensor]:
        lengths = torch.tensor([len(i) for i in ids_list])
        t_max = int(lengths.max())
        x = torch.zeros(len(ids_list), t_max, self.config.d_model)
        for b, (ids, ctx) in enumerate(zip(ids_list, ctx_list)):
            e = self.phone_embedding(ids)
            if ctx is not None:
                if ctx.shape != e.shape:
                    raise ValueError(
                        f"context matrix {tuple(ctx.shape)} does not match "
                        f"phones {tuple(e.shape)}"
                    )
                e = e + ctx
            x[b, : len(ids)] = e
        out = self.encoder(x, lengths)
        return [out[b, : int(n)] for b, n in enumerate(lengths)]

    def conformer_encode(
        self, phone_ids: torch.Tensor, context: torch.Tensor | None = None
    ) -> torch.Tensor:
        if phone_ids.ndim != 1 or phone_ids.shape[0] == 0:
            raise ValueError("phone_ids must be a non-empty 1D id tensor")
        return self._encode_batch([phone_ids], [context])[0]

    def condition(
        self,
        hidden: torch.Tensor,
        speaker_id: int,
        nd_id: int,
        cse: torch.Tensor | None = None,
    ) -> torch.Tensor:
        if not 0 <= speaker_id < self.config.n_speakers:
            raise ValueError(f"speaker id {speaker_id} out of range")
        if nd_id not in (0, 1):
            raise ValueError(f"nd id {nd_id} out of range")
        idx = torch.tensor([speaker_id])
        out = hidden + self.speaker_embedding(idx) + self.nd_embedding(torch.tensor([nd_id]))
        if cse is None:
            cse = torch.zeros(self.config.d_cse)
        return out + self.cse_proj(cse)

    # ---- references and predictors ----

    def gst_reference(self, mel: torch.Tensor) -> torch.Tensor:
        return self.gst_reference_encoder(mel)

    def gst_predict(self, hidden: torch.Tensor) -> torch.Tensor:
        return self.gst_predictor(hidden)

    def prosody_reference(self, mel: torch.Tensor, durations: torch.Tensor) -> torch.Tensor:
        return self.prosody_reference_encoder(mel, durations)

    def prosody_predict(self, hidden: torch.Tensor, gst: torch.Tensor) -> torch.Tensor:
        return self.prosody_predictor(hidden, gst)

    def predict_pitch(self, hidden: torch.Tensor) -> torch.Tensor:
        return self.pitch_head(hidden)

    def predict_duration(self, hidden: torch.Tensor) -> torch.Tensor:
        return self.duration_head(hidden)

    # ---- decoder side ----

    def _frame_input(
        self,
        hidden: torch.Tensor,
        pitch: torch.Tensor,
        durations: torch.Tensor,
        gst: torch.Tensor,
        prosody: torch.Tensor,
    ) -> torch.Tensor:
        h = hidden + self.pitch_embed(pitch)
        frames = length_regulate(h, durations)
        frames = frames + self.style_inject(gst)
        frames = frames + length_regulate(self.prosody_inject(prosody), durations)
        return frames

    def _decode_batch(self, frame_list: list[torch.Tensor]) -> list[MelPrediction]:
        lengths = torch.tensor([f.shape[0] for f in frame_list])
        t_max = int(lengths.max())
        x = torch.zeros(len(frame_list), t_max, self.config.d_model)
        for b, f in enumerate(frame_list):
            x[b, : f.shape[0]] = f
        states = self.decoder(x, lengths, return_all=True)
        preds = []
        for b, n in enumerate(lengths):
            preds.append(
                MelPrediction(
                    [head(s[b, : int(n)]) for head, s in zip(self.mel_heads, states)]
                )
            )
        return preds

    def decode_mel(self, frame_hidden: torch.Tensor) -> MelPrediction:
        return self._decode_batch([frame_hidden])[0]

    # ---- end-to-end paths ----

    def forward_train(self, batch: list[UtteranceFeatures]) -> TrainOutputs:
        for item in batch:
            if item.durations is None or item.mel is None:
                raise ValueError(f"training item {item.utt_id!r} lacks alignment")
            if int(item.durations.sum()) != item.mel.shape[0]:
                raise ValueError(
                    f"training item {item.utt_id!r}: durations cover "
                    f"{int(item.durations.sum())} frames, mel has {item.mel.shape[0]}"
                )
        hiddens = self._encode_batch(
            [i.phone_ids for i in batch], [i.context for i in batch]
        )
        out = TrainOutputs([], [], [], [], [], [], [])
        frame_inputs = []
        for item, h in zip(batch, hiddens):
            cond = self.condition(h, item.speaker_id, item.nd_id, item.cse)
            out.pitch_pred.append(self.predict_pitch(cond))
            out.log_dur_pred.append(self.predict_duration(cond))
            gst_ref = self.gst_reference(item.mel)
            pros_ref = self.prosody_reference(item.mel, item.durations)
            out.gst_ref.append(gst_ref)
            out.prosody_ref.append(pros_ref)
            out.gst_pred.append(self.gst_predict(cond))
            out.prosody_pred.append(self.prosody_predict(cond, gst_ref.detach()))
            frame_inputs.append(
                self._frame_input(cond, item.pitch, item.durations, gst_ref, pros_ref)
            )
        out.mel = self._decode_batch(frame_inputs)
        return out

    def forward_infer(
        self,
        phone_ids: torch.Tensor,
        context: torch.Tensor | None = None,
        speaker_id: int = 0,
        nd_id: int = 0,
        cse: torch.Tensor | None = None,
        silence_mask: torch.Tensor | None = None,
    ) -> InferenceOutput:
        hidden = self.conformer_encode(phone_ids, context)
        cond = self.condition(hidden, speaker_id, nd_id, cse)
        pitch = self.predict_pitch(cond)
        durations = durations_from_log(self.predict_duration(cond), silence_mask)
        gst = self.gst_predict(cond)
        prosody = self.prosody_predict(cond, gst)
        frames = self._frame_input(cond, pitch, durations, gst, prosody)
        blocks = self.decode_mel(frames)
        return InferenceOutput(
            mel=blocks.final, blocks=blocks, durations=durations, pitch=pitch
        )

    # ---- persistence ----

    def save(self, path: str | Path) -> None:
        torch.save(
            {"config": self.config.to_dict(), "state_dict": self.state_dict()},
            path,
        )

    @classmethod
    def load(cls, path: str | Path) -> "AcousticModel":
        payload = torch.load(path, weights_only=True)
        model = cls(AcousticConfig(**payload["config"]))
        model.load_state_dict(payload["state_dict"])
        return model
