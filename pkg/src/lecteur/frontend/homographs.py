"""Homograph pronunciation evaluation harness."""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path

from ..embeddings import EmbeddingProvider
from ..errors import DataError
from .annotate import AnnotationHeads, predict_annotations
from .g2p import g2p
from .lexicon import Lexicon
from .normalize import normalize_text
from .sentences import is_word_token, tokenize

log = logging.getLogger(__name__)


@dataclass
class HomographItem:
    sentence: str
    target_word: str
    expected_phones: list[str]


@dataclass
class FrontendState:
    lexicon: Lexicon
    embedder: EmbeddingProvider
    heads: AnnotationHeads


def load_homograph_testset(path: str | Path) -> list[HomographItem]:
    """JSON Lines: {"sentence", "target_word", "expected_phones"} per line."""
    items = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                items.append(
                    HomographItem(
                        obj["sentence"], obj["target_word"], list(obj["expected_phones"])
                    )
                )
            except (json.JSONDecodeError, KeyError, TypeError) as e:
                raise DataError(f"{path}:{lineno}: bad testset row ({e!r})") from None
    return items


def eval_homographs(testset: list[HomographItem], state: FrontendState) -> float:
    """Fraction of items whose target word resolves to the expected phones.

    An item whose target word cannot be located in the tokenized sentence
    counts as an error and is reported in the log.

    Raises:
        DataError: empty testset.
    """
    if not testset:
        raise DataError("homograph testset is empty")
    correct = 0
    for item in testset:
        norm = normalize_text(item.sentence)
        tokens = tokenize(norm)
        anns = predict_annotations(tokens, state.embedder, state.heads)
        seq = g2p(norm, state.lexicon, anns)
        words = [t.casefold() for t in tokens if is_word_token(t)]
        target = item.target_word.casefold()
        if target not in words:
            log.warning(
                "homograph target %r not found in %r; counted as error",
                item.target_word, item.sentence,
            )
            continue
        got = seq.word_phones(words.index(target))
        if got == list(item.expected_phones):
            correct += 1
        else:
            log.info(
                "homograph miss: %r in %r -> %s, expected %s",
                item.target_word, item.sentence, got, item.expected_phones,
            )
    return correct / len(testset)
