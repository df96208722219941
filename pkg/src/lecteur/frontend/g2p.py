"""Grapheme-to-phoneme conversion driven by lexicon + token annotations."""

from __future__ import annotations

from dataclasses import dataclass, field

from .annotate import TokenAnnotation, default_annotations
from .lexicon import SILENCE_PHONES, Lexicon, LexiconEntry, letter_to_sound
from .sentences import is_word_token, split_sentences, tokenize


@dataclass
class PhoneSequence:
    """Phones with word attribution.

    phones: (ipa symbol, word_index) pairs; word_index counts word tokens
    (punctuation excluded) and is non-decreasing.
    word_boundaries: index into phones where each word starts.
    punctuation: (phone position, symbol) for punctuation tokens, where the
    position is the phone count at the moment the symbol occurred.
    """

    phones: list[tuple[str, int]] = field(default_factory=list)
    word_boundaries: list[int] = field(default_factory=list)
    punctuation: list[tuple[int, str]] = field(default_factory=list)

    @property
    def symbols(self) -> list[str]:
        return [p for p, _ in self.phones]

    def word_phones(self, word_index: int) -> list[str]:
        return [p for p, w in self.phones if w == word_index]


def select_entry(
    entries: list[LexiconEntry], ann: TokenAnnotation, is_polyphone: bool
) -> LexiconEntry:
    """Resolution ladder: polyphone variant id, then POS constraint, then first."""
    if is_polyphone and ann.polyphone_class is not None:
        if 0 <= ann.polyphone_class < len(entries):
            return entries[ann.polyphone_class]
    if ann.pos:
        for e in entries:
            if e.pos == ann.pos:
                return e
    return entries[0]


def g2p(
    sentence: str, lexicon: Lexicon, annotations: list[TokenAnnotation]
) -> PhoneSequence:
    """Convert a normalized sentence to phones.

    Deterministic for identical inputs. Liaison appends the entry's declared
    final (n/t/z) as this word's last phone; out-of-vocabulary words use the
    letter-to-sound fallback.

    Raises:
        ValueError: annotation count does not match the token count.
    """
    tokens = tokenize(sentence)
    if len(tokens) != len(annotations):
        raise ValueError(
            f"{len(annotations)} annotations for {len(tokens)} tokens"
        )
    seq = PhoneSequence()
    word_idx = 0
    for tok, ann in zip(tokens, annotations):
        if not is_word_token(tok):
            seq.punctuation.append((len(seq.phones), tok))
            continue
        entries = lexicon.lookup(tok)
        if entries:
            entry = select_entry(entries, ann, lexicon.is_polyphone(tok))
            phones = list(entry.phones)
            if ann.liaison and entry.liaison_final:
                phones.append(entry.liaison_final)
        else:
            phones = letter_to_sound(tok)
        seq.word_boundaries.append(len(seq.phones))
        seq.phones.extend((p, word_idx) for p in phones)
        word_idx += 1
    return seq


def word_token_alignment(tokens: list[str]) -> list[list[int]]:
    """Token indices backing each word, in word order. With this tokenizer
    every word is one token; the list-of-lists shape supports subword
    providers."""
    return [[i] for i, t in enumerate(tokens) if is_word_token(t)]


def sentence_phone_script(
    sentence: str, lexicon: Lexicon, annotations: list[TokenAnnotation] | None = None
) -> list[str]:
    """Acoustic phone script for one sentence: g2p phones plus silences.

    Leading sil, one sp per punctuation run, and a trailing sp so every
    sentence ends in silence. Alignment files and cached features both use
    this script, so it is the single source of truth for phone counts.
    """
    if annotations is None:
        annotations = default_annotations(tokenize(sentence), lexicon)
    seq = g2p(sentence, lexicon, annotations)
    marks = {pos for pos, _ in seq.punctuation}
    out = ["sil"]
    for i, (ph, _) in enumerate(seq.phones):
        if i in marks and out[-1] not in SILENCE_PHONES:
            out.append("sp")
        out.append(ph)
    if out[-1] not in SILENCE_PHONES:
        out.append("sp")
    return out


def utterance_phone_script(text: str, lexicon: Lexicon) -> list[str]:
    """Concatenated sentence scripts for a full utterance text."""
    out: list[str] = []
    for sentence in split_sentences(text):
        out.extend(sentence_phone_script(sentence, lexicon))
    return out
