"""Pronunciation lexicon and deterministic letter-to-sound fallback.

Lexicon file format, one entry per line, UTF-8:
    word<TAB>pos?<TAB>ipa phones space-separated<TAB>liaison_final?
pos and liaison_final may be empty. A word may appear on several lines;
distinct pronunciations make it a polyphone.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from pathlib import Path

from ..errors import DataError

VOWELS = {
    "a", "ɑ", "e", "ɛ", "ə", "i", "o", "ɔ", "u", "y", "ø", "œ",
    "ɑ̃", "ɛ̃", "ɔ̃", "œ̃",
}
GLIDES = {"j", "w", "ɥ"}
CONSONANTS = {
    "b", "d", "f", "g", "k", "l", "m", "n", "ɲ", "ŋ", "p", "ʁ", "s", "ʃ",
    "t", "v", "z", "ʒ",
}
SILENCE_PHONES = ("sil", "sp")
PHONE_INVENTORY = VOWELS | GLIDES | CONSONANTS | set(SILENCE_PHONES)
# stable numeric ids for acoustic features (codepoint sort is deterministic)
PHONE_IDS = {p: i for i, p in enumerate(sorted(PHONE_INVENTORY))}
LIAISON_FINALS = ("n", "t", "z")

UD_TAGS = (
    "ADJ", "ADP", "ADV", "AUX", "CCONJ", "DET", "INTJ", "NOUN", "NUM",
    "PART", "PRON", "PROPN", "PUNCT", "SCONJ", "SYM", "VERB", "X",
)


@dataclass(frozen=True)
class LexiconEntry:
    phones: tuple[str, ...]
    pos: str | None = None
    liaison_final: str | None = None


class Lexicon:
    def __init__(self, entries: dict[str, list[LexiconEntry]]):
        self.entries = entries

    def lookup(self, word: str) -> list[LexiconEntry]:
        return self.entries.get(word.casefold(), [])

    def __contains__(self, word: str) -> bool:
        return word.casefold() in self.entries

    def is_polyphone(self, word: str) -> bool:
        entries = self.lookup(word)
        return len({e.phones for e in entries}) >= 2

    @property
    def liaison_vocab(self) -> frozenset[str]:
        return frozenset(
            w for w, es in self.entries.items() if any(e.liaison_final for e in es)
        )

    @property
    def polyphone_vocab(self) -> frozenset[str]:
        return frozenset(w for w in self.entries if self.is_polyphone(w))

    @property
    def max_variants(self) -> int:
        return max((len(es) for es in self.entries.values()), default=1)


def load_lexicon(path: str | Path) -> Lexicon:
    """Parse and validate a lexicon file.

    Raises:
        DataError: unknown phone, bad liaison final, or bad POS, naming the line.
    """
    entries: dict[str, list[LexiconEntry]] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n")
            if not line.strip() or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) < 3:
                raise DataError(f"{path}:{lineno}: expected word, pos, phones[, liaison]")
            word = parts[0].casefold()
            pos = parts[1] or None
            phones = tuple(parts[2].split())
            liaison = parts[3] if len(parts) > 3 and parts[3] else None
            if not phones:
                raise DataError(f"{path}:{lineno}: empty phone list")
            for p in phones:
                if p not in PHONE_INVENTORY:
                    raise DataError(f"{path}:{lineno}: phone '{p}' not in inventory")
            if pos is not None and pos not in UD_TAGS:
                raise DataError(f"{path}:{lineno}: POS '{pos}' is not a UD tag")
            if liaison is not None and liaison not in LIAISON_FINALS:
                raise DataError(
                    f"{path}:{lineno}: liaison final '{liaison}' not in {LIAISON_FINALS}"
                )
            entries.setdefault(word, []).append(LexiconEntry(phones, pos, liaison))
    return Lexicon(entries)


def save_lexicon(lexicon: Lexicon, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for word in sorted(lexicon.entries):
            for e in lexicon.entries[word]:
                fh.write(
                    f"{word}\t{e.pos or ''}\t{' '.join(e.phones)}\t{e.liaison_final or ''}\n"
                )


_ORTHO_VOWELS = "aàâäeéèêëiîïoôöuùûüyœæ"

# ordered longest-first; nasal digraphs checked with a context condition
_MULTI_RULES: list[tuple[str, tuple[str, ...]]] = [
    ("eau", ("o",)),
    ("ain", ("ɛ̃",)),
    ("aim", ("ɛ̃",)),
    ("ein", ("ɛ̃",)),
    ("oin", ("w", "ɛ̃")),
    ("ill", ("i", "j")),
    ("ch", ("ʃ",)),
    ("ph", ("f",)),
    ("gn", ("ɲ",)),
    ("qu", ("k",)),
    ("au", ("o",)),
    ("ou", ("u",)),
    ("oi", ("w", "a")),
    ("ai", ("ɛ",)),
    ("ei", ("ɛ",)),
    ("eu", ("ø",)),
    ("œu", ("œ",)),
    ("ss", ("s",)),
]
_NASALS = {
    "an": "ɑ̃", "am": "ɑ̃", "en": "ɑ̃", "em": "ɑ̃",
    "on": "ɔ̃", "om": "ɔ̃",
    "in": "ɛ̃", "im": "ɛ̃",
    "un": "œ̃", "um": "œ̃",
}
_SOFT_NEXT = "eéèêëiîïy"
_FINAL_MUTE = "dtspxzg"


def letter_to_sound(word: str) -> list[str]:
    """Deterministic French-oriented grapheme-to-phoneme fallback for words
    missing from the lexicon. Coarse by design; always yields phones."""
    w = word.casefold().replace("’", "'")
    w = re.sub(r"[^a-zàâäçéèêëîïôöùûüœæ]", "", w)
    if not w:
        return ["ə"]
    if len(w) > 2 and w[-1] in _FINAL_MUTE:
        w = w[:-1]
    phones: list[str] = []
    i = 0
    n = len(w)
    while i < n:
        matched = False
        for graph, ph in _MULTI_RULES:
            if w.startswith(graph, i):
                phones.extend(ph)
                i += len(graph)
                matched = True
                break
        if matched:
            continue
        pair = w[i : i + 2]
        if pair in _NASALS:
            nxt = w[i + 2] if i + 2 < n else ""
            if nxt == "" or (nxt not in _ORTHO_VOWELS and nxt not in "nm"):
                phones.append(_NASALS[pair])
                i += 2
                continue
        c = w[i]
        nxt = w[i + 1] if i + 1 < n else ""
        if c == "c":
            phones.append("s" if nxt in _SOFT_NEXT else "k")
        elif c == "g":
            phones.append("ʒ" if nxt in _SOFT_NEXT else "g")
        elif c == "s":
            prev = w[i - 1] if i > 0 else ""
            phones.append("z" if prev in _ORTHO_VOWELS and nxt in _ORTHO_VOWELS else "s")
        elif c == "e":
            if i == n - 1 and len(w) > 2 and phones:
                pass  # final silent e
            else:
                phones.append("ə")
        elif c == "y":
            phones.append("j" if nxt in _ORTHO_VOWELS else "i")
        elif c == "x":
            phones.extend(("k", "s"))
        elif c == "h":
            pass
        else:
            single = {
                "a": "a", "à": "a", "â": "ɑ", "ä": "a", "b": "b", "ç": "s",
                "d": "d", "é": "e", "è": "ɛ", "ê": "ɛ", "ë": "ɛ", "f": "f",
                "i": "i", "î": "i", "ï": "i", "j": "ʒ", "k": "k", "l": "l",
                "m": "m", "n": "n", "o": "ɔ", "ô": "o", "ö": "ɔ", "p": "p",
                "q": "k", "r": "ʁ", "t": "t", "u": "y", "ù": "y", "û": "y",
                "ü": "y", "v": "v", "w": "v", "z": "z", "œ": "œ", "æ": "e",
            }
            phones.append(single[c])
        i += 1
    return phones or ["ə"]
