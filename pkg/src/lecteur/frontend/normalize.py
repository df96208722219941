"""French text normalization: numbers, ordinals, abbreviations, whitespace."""

from __future__ import annotations

import re

_UNITS = [
    "zéro", "un", "deux", "trois", "quatre", "cinq", "six", "sept", "huit",
    "neuf", "dix", "onze", "douze", "treize", "quatorze", "quinze", "seize",
]
_TENS = {20: "vingt", 30: "trente", 40: "quarante", 50: "cinquante", 60: "soixante"}


def _under_20(n: int) -> str:
    if n < 17:
        return _UNITS[n]
    return "dix-" + _UNITS[n - 10]


def _under_100(n: int, final: bool) -> str:
    """final: this group ends the whole numeral (controls the -s of quatre-vingts)."""
    if n < 20:
        return _under_20(n)
    if n < 70:
        t, u = (n // 10) * 10, n % 10
        if u == 0:
            return _TENS[t]
        if u == 1:
            return _TENS[t] + " et un"
        return _TENS[t] + "-" + _UNITS[u]
    if n < 80:
        if n == 71:
            return "soixante et onze"
        return "soixante-" + _under_20(n - 60)
    if n == 80:
        return "quatre-vingts" if final else "quatre-vingt"
    return "quatre-vingt-" + _under_20(n - 80)


def _under_1000(n: int, final: bool) -> str:
    h, r = divmod(n, 100)
    if h == 0:
        return _under_100(r, final)
    if h == 1:
        head = "cent"
    else:
        head = _UNITS[h] + " cent" + ("s" if r == 0 and final else "")
    return head if r == 0 else head + " " + _under_100(r, final)


def spell_number(n: int) -> str:
    """Traditional-orthography French cardinal for 0 <= n <= 999999."""
    if not 0 <= n <= 999_999:
        raise ValueError(f"cardinal out of supported range: {n}")
    if n < 1000:
        return _under_1000(n, final=True)
    th, r = divmod(n, 1000)
    head = "mille" if th == 1 else _under_1000(th, final=False) + " mille"
    return head if r == 0 else head + " " + _under_1000(r, final=True)


def spell_ordinal(n: int, feminine: bool = False) -> str:
    """French ordinal word: 1 -> premier/première, else cardinal + ième."""
    if n == 1:
        return "première" if feminine else "premier"
    words = spell_number(n).split(" ")
    segs = words[-1].split("-")
    seg = segs[-1]
    if seg in ("vingts", "cents"):
        seg = seg[:-1]
    if seg == "cinq":
        seg = "cinquième"
    elif seg == "neuf":
        seg = "neuvième"
    elif seg.endswith("e"):
        seg = seg[:-1] + "ième"
    else:
        seg = seg + "ième"
    segs[-1] = seg
    words[-1] = "-".join(segs)
    return " ".join(words)


# whole-token abbreviations (matched after stripping trailing punctuation
# other than the abbreviation's own period)
ABBREVIATIONS = {
    "M.": "Monsieur",
    "MM.": "Messieurs",
    "Mme": "Madame",
    "Mmes": "Mesdames",
    "Mlle": "Mademoiselle",
    "Mlles": "Mesdemoiselles",
    "Dr": "Docteur",
    "St": "Saint",
    "Ste": "Sainte",
    "etc.": "et cetera",
    "av.": "avenue",
    "bd": "boulevard",
    "n°": "numéro",
    "nº": "numéro",
}

_ORDINAL_RE = re.compile(r"(?<!\d)(\d{1,6})(ᵉʳᵉ|ʳᵉ|ᵉʳ|ᵉ|ème|º|°)")
_CARDINAL_RE = re.compile(r"(?<!\d)(\d{1,6})(?!\d)")
_TRAIL = ",;:!?»)…\"'"


def _expand_abbreviations(text: str) -> str:
    out = []
    for token in text.split(" "):
        core = token.rstrip(_TRAIL)
        trail = token[len(core) :]
        out.append(ABBREVIATIONS.get(core, core) + trail)
    return " ".join(out)


def _expand_ordinal(m: re.Match) -> str:
    n = int(m.group(1))
    feminine = m.group(2) in ("ᵉʳᵉ", "ʳᵉ")
    return spell_ordinal(n, feminine=feminine)


def normalize_text(raw: str) -> str:
    """Expand cardinals (up to 999 999), ordinal suffixes, and abbreviations;
    collapse whitespace. Unknown patterns pass through verbatim."""
    text = re.sub(r"\s+", " ", raw).strip()
    text = _expand_abbreviations(text)
    text = _ORDINAL_RE.sub(_expand_ordinal, text)
    text = _CARDINAL_RE.sub(lambda m: spell_number(int(m.group(1))), text)
    return re.sub(r"\s+", " ", text).strip()
