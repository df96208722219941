"""Sentence splitting and tokenization for normalized French text."""

from __future__ import annotations

import re

EOS_MARKS = ".!?…"
_CLOSERS = "\"'”)]"
_OPENERS = "«—¬\""

# words may contain internal hyphens and end with an elision apostrophe
_TOKEN_RE = re.compile(r"[^\W\d_]+(?:-[^\W\d_]+)*['’]?|\d+|\S")


def tokenize(text: str) -> list[str]:
    return _TOKEN_RE.findall(text)


def is_word_token(token: str) -> bool:
    return bool(token) and token[0].isalpha()


def _is_opener(ch: str) -> bool:
    return ch.isupper() or ch in _OPENERS


def split_sentences(text: str) -> list[str]:
    """Split on . ! ? … followed by whitespace and a sentence opener
    (uppercase letter, «, or a dialogue dash); never inside « »; closing
    quotes right after the mark stay with the sentence."""
    n = len(text)
    sentences: list[str] = []
    depth = 0
    start = 0
    i = 0
    while i < n:
        c = text[i]
        if c == "«":
            depth += 1
        elif c == "»":
            depth = max(0, depth - 1)
            if depth == 0:
                # quote ended a sentence inside the guillemets: the closer
                # stays with it and the split happens here
                p = i - 1
                while p >= 0 and text[p].isspace():
                    p -= 1
                if p >= 0 and text[p] in EOS_MARKS:
                    j = i + 1
                    while j < n and text[j] in _CLOSERS:
                        j += 1
                    k = j
                    while k < n and text[k].isspace():
                        k += 1
                    if k == n or (k > j and _is_opener(text[k])):
                        piece = text[start:j].strip()
                        if piece:
                            sentences.append(piece)
                        start = k
                        i = k
                        continue
        elif c in EOS_MARKS and depth == 0:
            j = i + 1
            while j < n and text[j] in EOS_MARKS:
                j += 1
            while j < n and text[j] in _CLOSERS:
                j += 1
            k = j
            while k < n and text[k].isspace():
                k += 1
            if k == n or (k > j and _is_opener(text[k])):
                piece = text[start:j].strip()
                if piece:
                    sentences.append(piece)
                start = k
                i = k
                continue
        i += 1
    tail = text[start:].strip()
    if tail:
        sentences.append(tail)
    return sentences
