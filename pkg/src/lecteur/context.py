"""Cross-sentence context features and dialogue emotion representations.

Three feature streams feed the acoustic model:
  * token-level features (semantic embedding + syntactic descriptors),
    upsampled to phone resolution and added at the encoder input,
  * a sentence state vector summarizing neighbor sentences with a
    bidirectional recurrent aggregator,
  * a context-sensitive emotion vector (CSE) for dialogue, the mean of the
    center sentence's token embeddings taken inside its surrounding context.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import torch
import torch.nn as nn
import torch.nn.functional as F

from .corpus import DIALOGUE, UtteranceRecord
from .embeddings import EmbeddingProvider
from .errors import DataError
from .frontend.g2p import PhoneSequence
from .frontend.lexicon import UD_TAGS
from .frontend.sentences import is_word_token, tokenize

log = logging.getLogger(__name__)

# syntactic descriptor: [len_norm, position, quote_depth] + POS one-hot
D_SYNTACTIC = 3 + len(UD_TAGS)

# token budget for the CSE context stream
CSE_MAX_TOKENS = 256

# tag order fixes the class indices of the emotion head
EMOTION_TAGS = ("neutral", "joy", "anger", "sorrow", "fear", "surprise")

_LEN_NORM = 20.0  # token length feature saturates here


@dataclass
class TokenContextFeatures:
    """Per-token features for one sentence.

    semantic  [n_tokens, d_sem]
    syntactic [n_tokens, D_SYNTACTIC]
    """

    semantic: torch.Tensor
    syntactic: torch.Tensor

    def __post_init__(self):
        if self.semantic.shape[0] != self.syntactic.shape[0]:
            raise ValueError("semantic and syntactic row counts differ")


@dataclass
class SentenceStateVector:
    state: torch.Tensor  # [d_ctx]


@dataclass
class CSEVector:
    cse: torch.Tensor  # [d_sem]
    is_narration: bool


@dataclass
class ContextWindow:
    """A center utterance with up to w_prev/w_next neighbor sentences."""

    center: UtteranceRecord
    prev: list[str] = field(default_factory=list)
    next: list[str] = field(default_factory=list)


def window_from_records(
    records: list[UtteranceRecord], index: int, w_prev: int = 5, w_next: int = 5
) -> ContextWindow:
    """Build a window from chapter-ordered records, shrinking at the edges."""
    center = records[index]
    prev, nxt = [], []
    for r in records[max(0, index - w_prev) : index]:
        if r.chapter_id == center.chapter_id:
            prev.append(r.text)
    for r in records[index + 1 : index + 1 + w_next]:
        if r.chapter_id == center.chapter_id:
            nxt.append(r.text)
    return ContextWindow(center, prev, nxt)


def extract_token_features(
    sentence: str, annotations, embedder: EmbeddingProvider
) -> TokenContextFeatures:
    """Token embeddings plus [len_norm, idx/n, quote_depth, POS one-hot]."""
    tokens = tokenize(sentence)
    if len(annotations) != len(tokens):
        raise ValueError(
            f"got {len(annotations)} annotations for {len(tokens)} tokens"
        )
    with torch.no_grad():
        semantic = embedder.encode(tokens)
    n = max(len(tokens), 1)
    rows = []
    depth = 0
    for i, (tok, a) in enumerate(zip(tokens, annotations)):
        if tok == "«":
            depth += 1
            d = depth
        elif tok == "»":
            d = depth
            depth = max(0, depth - 1)
        else:
            d = depth
        row = torch.zeros(D_SYNTACTIC)
        row[0] = min(len(tok), _LEN_NORM) / _LEN_NORM
        row[1] = i / n
        row[2] = float(d)
        row[3 + UD_TAGS.index(a.pos)] = 1.0
        rows.append(row)
    syntactic = torch.stack(rows) if rows else torch.zeros(0, D_SYNTACTIC)
    return TokenContextFeatures(semantic=semantic, syntactic=syntactic)


def sentence_embedding(sentence: str, embedder: EmbeddingProvider) -> torch.Tensor:
    """Mean of the sentence's token embeddings; zeros for empty input."""
    tokens = tokenize(sentence)
    if not tokens:
        log.warning("sentence_embedding on empty sentence")
        return torch.zeros(embedder.dim)
    with torch.no_grad():
        e = embedder.encode(tokens)
    return e.mean(dim=0)


class ContextAggregator(nn.Module):
    """BiGRU over the window's sentence embeddings; final fwd/bwd states
    concatenated and projected to d_ctx."""

    def __init__(self, d_sem: int, d_ctx: int = 32, hidden: int = 32):
        super().__init__()
        self.d_sem = d_sem
        self.d_ctx = d_ctx
        self.gru = nn.GRU(d_sem, hidden, batch_first=True, bidirectional=True)
        self.proj = nn.Linear(2 * hidden, d_ctx)

    def forward(self, sentence_matrix: torch.Tensor) -> torch.Tensor:
        # sentence_matrix [n_sentences, d_sem]
        _, h = self.gru(sentence_matrix.unsqueeze(0))
        return self.proj(torch.cat([h[0, 0], h[1, 0]], dim=-1))


def encode_context(
    window: ContextWindow, embedder: EmbeddingProvider, aggregator: ContextAggregator
) -> SentenceStateVector:
    sents = list(window.prev) + [window.center.text] + list(window.next)
    mat = torch.stack([sentence_embedding(s, embedder) for s in sents])
    return SentenceStateVector(state=aggregator(mat))


def _build_cse_stream(window: ContextWindow) -> tuple[list[str], int, int]:
    """Token stream for the CSE, capped at CSE_MAX_TOKENS with the center
    kept intact; returns (tokens, center_start, center_end)."""
    center = tokenize(window.center.text)
    prev = [t for s in window.prev for t in tokenize(s)]
    nxt = [t for s in window.next for t in tokenize(s)]
    if len(center) > CSE_MAX_TOKENS:
        log.warning(
            "center sentence has %d tokens, truncating to %d",
            len(center), CSE_MAX_TOKENS,
        )
        center = center[:CSE_MAX_TOKENS]
        return center, 0, len(center)
    budget = CSE_MAX_TOKENS - len(center)
    # drop outermost context tokens, alternating sides, until within budget
    kp, kn = len(prev), len(nxt)
    drop_prev = True
    while kp + kn > budget:
        if drop_prev and kp > 0:
            kp -= 1
        elif kn > 0:
            kn -= 1
        else:
            kp -= 1
        drop_prev = not drop_prev
    kept_prev = prev[len(prev) - kp :]
    kept_next = nxt[:kn]
    stream = kept_prev + center + kept_next
    return stream, len(kept_prev), len(kept_prev) + len(center)


def compute_cse(window: ContextWindow, embedder: EmbeddingProvider) -> CSEVector:
    """Zero for narration; otherwise the mean embedding of the center
    sentence's tokens inside the context stream."""
    if not window.center.is_dialogue():
        return CSEVector(cse=torch.zeros(embedder.dim), is_narration=True)
    stream, lo, hi = _build_cse_stream(window)
    if lo == hi:
        log.warning("dialogue center %s has no tokens", window.center.utt_id)
        return CSEVector(cse=torch.zeros(embedder.dim), is_narration=False)
    with torch.no_grad():
        e = embedder.encode(stream)
    return CSEVector(cse=e[lo:hi].mean(dim=0), is_narration=False)


class EmotionHead(nn.Module):
    """Linear classifier over CSE vectors. Zero-initialized so the first
    batch sits at the uniform-softmax loss ln(C)."""

    def __init__(self, d_sem: int, n_classes: int = len(EMOTION_TAGS)):
        super().__init__()
        self.linear = nn.Linear(d_sem, n_classes)
        nn.init.zeros_(self.linear.weight)
        nn.init.zeros_(self.linear.bias)

    def forward(self, cse: torch.Tensor) -> torch.Tensor:
        return self.linear(cse)


def load_emotion_dataset(path: str | Path) -> list[tuple[ContextWindow, str]]:
    """JSONL rows: context_sentences (list), center_index, emotion_tag.
    The center is treated as dialogue (only dialogue carries a CSE)."""
    path = Path(path)
    out = []
    with path.open(encoding="utf-8") as fh:
        for ln, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                row = json.loads(line)
                sents = row["context_sentences"]
                ci = row["center_index"]
                tag = row["emotion_tag"]
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise DataError(f"{path}:{ln}: bad emotion row ({exc})") from exc
            if not isinstance(ci, int) or not 0 <= ci < len(sents):
                raise DataError(f"{path}:{ln}: center_index out of range")
            text = sents[ci]
            center = UtteranceRecord(
                utt_id=f"emo-{ln}", chapter_id="emo", speaker_id="emo",
                text=text,
                nd_label=[{"start": 0, "end": len(text), "label": DIALOGUE}],
                start_s=0.0, end_s=0.0, audio_path="",
            )
            out.append((ContextWindow(center, sents[:ci], sents[ci + 1 :]), tag))
    return out


def train_emotion_head(
    labeled: list[tuple[ContextWindow, str]],
    embedder: EmbeddingProvider,
    epochs: int = 200,
    lr: float = 0.05,
    holdout: float = 0.1,
    seed: int = 0,
) -> tuple[EmotionHead, dict[str, float]]:
    """Train the CSE emotion probe; the TTS model consumes the CSE itself,
    this classifier only shapes and sanity-checks the representation."""
    for _, tag in labeled:
        if tag not in EMOTION_TAGS:
            raise DataError(f"unknown emotion tag {tag!r}")
    xs = torch.stack([compute_cse(w, embedder).cse for w, _ in labeled])
    ys = torch.tensor([EMOTION_TAGS.index(t) for _, t in labeled], dtype=torch.long)
    g = torch.Generator().manual_seed(seed)
    order = torch.randperm(len(labeled), generator=g).tolist()
    n_held = int(len(labeled) * holdout) if len(labeled) >= 5 else 0
    held, train = order[:n_held], order[n_held:]
    head = EmotionHead(embedder.dim)
    opt = torch.optim.Adam(head.parameters(), lr=lr)
    first_loss = None
    for _ in range(epochs):
        opt.zero_grad()
        loss = F.cross_entropy(head(xs[train]), ys[train])
        if first_loss is None:
            first_loss = float(loss.detach())
        loss.backward()
        opt.step()
    eval_idx = held if held else train
    with torch.no_grad():
        pred = head(xs[eval_idx]).argmax(dim=-1)
    acc = float((pred == ys[eval_idx]).float().mean())
    log.info("emotion head held-out accuracy %.3f", acc)
    return head, {"accuracy": acc, "first_batch_loss": first_loss}


class PhoneUpsampler(nn.Module):
    """Projects per-word context features + sentence state to phone rows."""

    def __init__(self, d_sem: int, d_ctx: int, d_model: int):
        super().__init__()
        self.proj = nn.Linear(d_sem + D_SYNTACTIC + d_ctx, d_model)

    def forward(
        self,
        tokenfeat: TokenContextFeatures,
        state: SentenceStateVector,
        phones: PhoneSequence,
        alignment: list[list[int]],
    ) -> torch.Tensor:
        return upsample_to_phones(tokenfeat, state, phones, alignment, self)


def upsample_to_phones(
    tokenfeat: TokenContextFeatures,
    state: SentenceStateVector,
    phones: PhoneSequence,
    alignment: list[list[int]],
    upsampler: PhoneUpsampler,
) -> torch.Tensor:
    """One row per phone: projection(concat(word token-feature mean, state)).

    alignment[word_index] lists the token rows backing that word.
    """
    feat = torch.cat([tokenfeat.semantic, tokenfeat.syntactic], dim=-1)
    word_rows: dict[int, torch.Tensor] = {}
    rows = []
    for symbol, w in phones.phones:
        if w not in word_rows:
            if w >= len(alignment) or not alignment[w]:
                raise ValueError(f"phone {symbol!r} belongs to unmapped word index {w}")
            idx = torch.tensor(alignment[w], dtype=torch.long)
            word_rows[w] = feat.index_select(0, idx).mean(dim=0)
        rows.append(torch.cat([word_rows[w], state.state]))
    if not rows:
        return torch.zeros(0, upsampler.proj.out_features)
    return upsampler.proj(torch.stack(rows))
