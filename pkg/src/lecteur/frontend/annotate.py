"""Multi-task token annotation: POS tagging, liaison, polyphone disambiguation.

Three linear heads over contextual token embeddings, trained jointly with an
equal-weight sum of cross-entropies. Lexicon knowledge constrains inference:
liaison can only be true for words with a declared liaison final, and variant
ids only apply to lexicon polyphones.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path

import torch
from torch import nn
from torch.nn import functional as F

from ..embeddings import EmbeddingProvider
from ..errors import DataError
from .lexicon import UD_TAGS, VOWELS, GLIDES, Lexicon
from .sentences import is_word_token

log = logging.getLogger(__name__)

TASKS = ("pos", "liaison", "polyphone")

# (token, label) sentences; label None marks an unlabeled token
Sentence = list[tuple[str, object]]


@dataclass
class TokenAnnotation:
    token: str
    pos: str
    liaison: bool
    polyphone_class: int | None = None


class AnnotationHeads(nn.Module):
    """Linear classifiers over token embeddings plus the lexicon-derived
    vocabularies that constrain liaison and polyphone predictions."""

    def __init__(
        self,
        embedding_dim: int,
        n_polyphone_classes: int = 2,
        liaison_vocab: frozenset[str] = frozenset(),
        polyphone_vocab: frozenset[str] = frozenset(),
    ):
        super().__init__()
        self.embedding_dim = embedding_dim
        self.n_polyphone_classes = n_polyphone_classes
        self.liaison_vocab = liaison_vocab
        self.polyphone_vocab = polyphone_vocab
        self.pos_head = nn.Linear(embedding_dim, len(UD_TAGS))
        self.liaison_head = nn.Linear(embedding_dim, 2)
        self.polyphone_head = nn.Linear(embedding_dim, n_polyphone_classes)

    @classmethod
    def from_lexicon(cls, embedding_dim: int, lexicon: Lexicon) -> "AnnotationHeads":
        return cls(
            embedding_dim,
            n_polyphone_classes=max(2, lexicon.max_variants),
            liaison_vocab=lexicon.liaison_vocab,
            polyphone_vocab=lexicon.polyphone_vocab,
        )

    def save(self, path: str | Path) -> None:
        torch.save(
            {
                "embedding_dim": self.embedding_dim,
                "n_polyphone_classes": self.n_polyphone_classes,
                "liaison_vocab": sorted(self.liaison_vocab),
                "polyphone_vocab": sorted(self.polyphone_vocab),
                "state": self.state_dict(),
            },
            path,
        )

    @classmethod
    def load(cls, path: str | Path) -> "AnnotationHeads":
        obj = torch.load(path, weights_only=True)
        heads = cls(
            obj["embedding_dim"],
            n_polyphone_classes=obj["n_polyphone_classes"],
            liaison_vocab=frozenset(obj["liaison_vocab"]),
            polyphone_vocab=frozenset(obj["polyphone_vocab"]),
        )
        heads.load_state_dict(obj["state"])
        return heads


def predict_annotations(
    tokens: list[str], embedder: EmbeddingProvider, heads: AnnotationHeads
) -> list[TokenAnnotation]:
    """Per-token argmax of each head, with lexicon constraints applied.

    Raises:
        ValueError: embedder/heads dimension mismatch (configuration error).
    """
    if embedder.dim != heads.embedding_dim:
        raise ValueError(
            f"configuration error: embedder dim {embedder.dim} != heads dim "
            f"{heads.embedding_dim}"
        )
    if not tokens:
        return []
    with torch.no_grad():
        emb = embedder.encode(tokens)
        pos_idx = heads.pos_head(emb).argmax(dim=1).tolist()
        liaison_idx = heads.liaison_head(emb).argmax(dim=1).tolist()
        poly_idx = heads.polyphone_head(emb).argmax(dim=1).tolist()
    out = []
    for i, tok in enumerate(tokens):
        key = tok.casefold()
        out.append(
            TokenAnnotation(
                token=tok,
                pos=UD_TAGS[pos_idx[i]],
                liaison=bool(liaison_idx[i]) and key in heads.liaison_vocab,
                polyphone_class=poly_idx[i] if key in heads.polyphone_vocab else None,
            )
        )
    return out


def default_annotations(tokens: list[str], lexicon: Lexicon) -> list[TokenAnnotation]:
    """Rule-based annotations used before any heads are trained: POS from the
    lexicon's first entry, liaison by the vowel-context rule (declared final
    + next word starts with a vowel or glide phone), first variant for
    polyphones."""
    anns = []
    word_positions = [i for i, t in enumerate(tokens) if is_word_token(t)]
    next_word = {}
    for a, b in zip(word_positions, word_positions[1:]):
        next_word[a] = tokens[b]
    for i, tok in enumerate(tokens):
        if not is_word_token(tok):
            anns.append(TokenAnnotation(tok, "PUNCT", False, None))
            continue
        entries = lexicon.lookup(tok)
        pos = entries[0].pos if entries and entries[0].pos else "X"
        liaison = False
        if entries and any(e.liaison_final for e in entries) and i in next_word:
            nxt = lexicon.lookup(next_word[i])
            if nxt and nxt[0].phones[0] in (VOWELS | GLIDES):
                liaison = True
        poly = 0 if lexicon.is_polyphone(tok) else None
        anns.append(TokenAnnotation(tok, pos, liaison, poly))
    return anns


def read_conll(path: str | Path, task: str) -> list[Sentence]:
    """Parse token TAB label lines, blank line between sentences.

    Labels: POS tags for "pos"; 0/1 for "liaison"; variant ids for
    "polyphone". "-" marks an unlabeled token in any task.

    Raises:
        DataError: label outside the task's tag set, naming file and line.
    """
    if task not in TASKS:
        raise ValueError(f"unknown task {task!r}")
    sentences: list[Sentence] = []
    cur: Sentence = []
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n")
            if not line.strip():
                if cur:
                    sentences.append(cur)
                    cur = []
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise DataError(f"{path}:{lineno}: expected token TAB label")
            token, label = parts
            if label == "-":
                cur.append((token, None))
                continue
            if task == "pos":
                if label not in UD_TAGS:
                    raise DataError(f"{path}:{lineno}: POS '{label}' not a UD tag")
                cur.append((token, label))
            elif task == "liaison":
                if label not in ("0", "1"):
                    raise DataError(f"{path}:{lineno}: liaison label must be 0 or 1")
                cur.append((token, int(label)))
            else:
                if not label.isdigit():
                    raise DataError(f"{path}:{lineno}: variant id must be an integer")
                cur.append((token, int(label)))
    if cur:
        sentences.append(cur)
    return sentences


def _label_index(task: str, label: object, heads: AnnotationHeads, where: str) -> int:
    if task == "pos":
        return UD_TAGS.index(label)
    idx = int(label)
    n = 2 if task == "liaison" else heads.n_polyphone_classes
    if not 0 <= idx < n:
        raise DataError(f"{where}: label {idx} outside 0..{n - 1} for task {task}")
    return idx


def multitask_loss(
    heads: AnnotationHeads,
    embedder: EmbeddingProvider,
    batches: dict[str, list[Sentence]],
) -> tuple[torch.Tensor, dict[str, float]]:
    """Equal-weight sum of per-task mean cross-entropies. A task with no
    labeled tokens contributes exactly zero, so the total over one task
    equals that task's loss alone."""
    total = torch.zeros(())
    per_task: dict[str, float] = {}
    for task in TASKS:
        head = getattr(heads, f"{task}_head")
        logits_list, labels = [], []
        for sent in batches.get(task, []):
            tokens = [t for t, _ in sent]
            with torch.no_grad():
                emb = embedder.encode(tokens)
            logits = head(emb)
            for i, (_, label) in enumerate(sent):
                if label is None:
                    continue
                logits_list.append(logits[i])
                labels.append(_label_index(task, label, heads, f"task {task}"))
        if not labels:
            per_task[task] = 0.0
            continue
        loss = F.cross_entropy(
            torch.stack(logits_list), torch.tensor(labels, dtype=torch.long)
        )
        per_task[task] = float(loss.detach())
        total = total + loss
    return total, per_task


def _accuracy(
    heads: AnnotationHeads, embedder: EmbeddingProvider, task: str, sents: list[Sentence]
) -> float:
    head = getattr(heads, f"{task}_head")
    hits = n = 0
    with torch.no_grad():
        for sent in sents:
            tokens = [t for t, _ in sent]
            pred = head(embedder.encode(tokens)).argmax(dim=1).tolist()
            for i, (_, label) in enumerate(sent):
                if label is None:
                    continue
                want = _label_index(task, label, heads, f"task {task}")
                hits += int(pred[i] == want)
                n += 1
    return hits / n if n else float("nan")


def train_annotation_heads(
    pos_data: list[Sentence] | str | Path | None,
    liaison_data: list[Sentence] | str | Path | None,
    polyphone_data: list[Sentence] | str | Path | None,
    embedder: EmbeddingProvider,
    lexicon: Lexicon,
    epochs: int = 60,
    lr: float = 0.05,
    holdout: float = 0.1,
    seed: int = 0,
) -> tuple[AnnotationHeads, dict[str, float]]:
    """Train the three heads jointly; returns (heads, held-out accuracy per task).

    Heads for tasks with no data are left at initialization. The embedder is
    treated as frozen features here.
    """
    datasets: dict[str, list[Sentence]] = {}
    for task, data in zip(TASKS, (pos_data, liaison_data, polyphone_data)):
        if data is None:
            continue
        if isinstance(data, (str, Path)):
            data = read_conll(data, task)
        if data:
            datasets[task] = data
    heads = AnnotationHeads.from_lexicon(embedder.dim, lexicon)
    g = torch.Generator().manual_seed(seed)
    train_sets: dict[str, list[Sentence]] = {}
    held_sets: dict[str, list[Sentence]] = {}
    for task, sents in datasets.items():
        order = torch.randperm(len(sents), generator=g).tolist()
        n_held = int(len(sents) * holdout) if len(sents) >= 5 else 0
        held_sets[task] = [sents[i] for i in order[:n_held]]
        train_sets[task] = [sents[i] for i in order[n_held:]]
    opt = torch.optim.Adam(heads.parameters(), lr=lr)
    for _ in range(epochs):
        opt.zero_grad()
        loss, _ = multitask_loss(heads, embedder, train_sets)
        if loss.requires_grad:
            loss.backward()
            opt.step()
    report = {}
    for task in TASKS:
        eval_set = held_sets.get(task) or train_sets.get(task) or []
        if eval_set:
            report[task] = _accuracy(heads, embedder, task, eval_set)
        log.info("annotation head %s held-out accuracy: %s", task, report.get(task))
    return heads, report
