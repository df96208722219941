"""Chapter scripts to utterance manifests: segmentation, narration/dialogue spans.

A chapter script is a JSON file of timestamped sentence spans grouped into
paragraphs. Segmentation greedily merges consecutive sentences into utterances
of a target length window; classification marks dialogue by French
typographic conventions (guillemets, paragraph-initial dashes).
"""

from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from scipy import signal as sps

from .errors import DataError

log = logging.getLogger(__name__)

NARRATION = "narration"
DIALOGUE = "dialogue"

EOS_MARKS = ".!?…"
# characters that may trail the EOS mark without hiding it
_CLOSING_TRAIL = "»\"'” )]"
DASH_MARKERS = ("¬", "—")


@dataclass
class SentenceSpan:
    start_s: float
    end_s: float
    text: str

    @property
    def duration(self) -> float:
        return self.end_s - self.start_s


@dataclass
class ChapterScript:
    chapter_id: str
    audio_path: str
    # each paragraph: (paragraph text, its sentence spans in time order)
    paragraphs: list[tuple[str, list[SentenceSpan]]]


@dataclass
class SegmentationConfig:
    min_len: float = 5.0
    max_len: float = 20.0
    min_dialogue_chars: int = 4

    def __post_init__(self):
        if not 0 < self.min_len < self.max_len:
            raise ValueError(
                f"need 0 < min_len < max_len, got {self.min_len}, {self.max_len}"
            )


@dataclass
class NDSpan:
    start: int
    end: int
    label: str


@dataclass
class UtteranceRecord:
    utt_id: str
    chapter_id: str
    speaker_id: str
    text: str
    nd_label: list[dict]  # [{"start", "end", "label"}] over text
    start_s: float
    end_s: float
    audio_path: str
    context_prev_ids: list[str] = field(default_factory=list)
    context_next_ids: list[str] = field(default_factory=list)
    oversize: bool = False  # set when duration falls outside [min_len, max_len]

    @property
    def duration(self) -> float:
        return self.end_s - self.start_s

    def is_dialogue(self) -> bool:
        return any(s["label"] == DIALOGUE for s in self.nd_label)


def classify_nd(paragraph_text: str, cfg: SegmentationConfig) -> list[NDSpan]:
    """Partition a paragraph into narration/dialogue character spans.

    Rule R2 first: a paragraph whose first non-space character is ¬ or — is
    dialogue from that marker to the end (no further scanning inside). Rule
    R1 otherwise: text inside « » is dialogue when its trimmed length is at
    least min_dialogue_chars, else the quoted region stays narration.
    Dialogue spans carry the trimmed inner text; the marks themselves remain
    narration. An unmatched « is treated like a quote running to paragraph
    end (same length rule) and logs a warning.

    Spans partition the paragraph: concatenating them reproduces it exactly.
    """
    text = paragraph_text
    if not text:
        return []
    stripped = text.lstrip()
    if stripped and stripped[0] in DASH_MARKERS:
        lead = len(text) - len(stripped)
        spans = []
        if lead:
            spans.append(NDSpan(0, lead, NARRATION))
        spans.append(NDSpan(lead, len(text), DIALOGUE))
        return spans

    dialogue_spans: list[tuple[int, int]] = []
    pos = 0
    while True:
        open_i = text.find("«", pos)
        if open_i == -1:
            break
        close_i = text.find("»", open_i + 1)
        if close_i == -1:
            inner = text[open_i + 1 :]
            log.warning("unbalanced « in paragraph: %r", text[:60])
            if len(inner.strip()) >= cfg.min_dialogue_chars:
                content = inner.strip()
                s = open_i + 1 + inner.index(content)
                dialogue_spans.append((s, s + len(content)))
            break
        inner = text[open_i + 1 : close_i]
        if len(inner.strip()) >= cfg.min_dialogue_chars:
            content = inner.strip()
            s = open_i + 1 + inner.index(content)
            dialogue_spans.append((s, s + len(content)))
        # too-short content: the whole quoted region stays narration
        pos = close_i + 1

    spans: list[NDSpan] = []
    cursor = 0
    for s, e in dialogue_spans:
        if s > cursor:
            spans.append(NDSpan(cursor, s, NARRATION))
        spans.append(NDSpan(s, e, DIALOGUE))
        cursor = e
    if cursor < len(text):
        spans.append(NDSpan(cursor, len(text), NARRATION))
    return spans


def _ends_with_eos(text: str) -> bool:
    t = text.rstrip()
    while t and t[-1] in _CLOSING_TRAIL:
        t = t[:-1].rstrip()
    return bool(t) and t[-1] in EOS_MARKS


def _sentence_nd(
    paragraph_text: str, spans: list[SentenceSpan], cfg: SegmentationConfig
) -> list[list[NDSpan]]:
    """ND spans for each sentence, classified at paragraph level and projected."""
    para_spans = classify_nd(paragraph_text, cfg)
    out: list[list[NDSpan]] = []
    cursor = 0
    for sent in spans:
        found = paragraph_text.find(sent.text, cursor)
        if found == -1:
            # sentence text not present verbatim; classify it in isolation
            out.append(classify_nd(sent.text, cfg))
            continue
        lo, hi = found, found + len(sent.text)
        cursor = hi
        projected = []
        for ps in para_spans:
            s, e = max(ps.start, lo), min(ps.end, hi)
            if s < e:
                projected.append(NDSpan(s - lo, e - lo, ps.label))
        out.append(projected or [NDSpan(0, len(sent.text), NARRATION)])
    return out


def _merge_nd(parts: list[tuple[str, list[NDSpan]]]) -> tuple[str, list[dict]]:
    """Join sentence texts with single spaces, shifting and fusing ND spans."""
    text_parts: list[str] = []
    spans: list[NDSpan] = []
    offset = 0
    for i, (t, nd) in enumerate(parts):
        if i > 0:
            # joining space takes the narration label
            spans.append(NDSpan(offset, offset + 1, NARRATION))
            text_parts.append(" ")
            offset += 1
        for s in nd:
            spans.append(NDSpan(s.start + offset, s.end + offset, s.label))
        text_parts.append(t)
        offset += len(t)
    fused: list[NDSpan] = []
    for s in spans:
        if fused and fused[-1].label == s.label and fused[-1].end == s.start:
            fused[-1] = NDSpan(fused[-1].start, s.end, s.label)
        else:
            fused.append(s)
    return "".join(text_parts), [asdict(s) for s in fused]


def segment_chapter(
    chapter: ChapterScript,
    cfg: SegmentationConfig,
    speaker_id: str,
    context_window: int = 2,
) -> list[UtteranceRecord]:
    """Greedily merge sentence spans into utterance records.

    Accumulation closes when the running duration reaches min_len at a span
    whose text ends with an end-of-sentence mark, when appending the next
    span would cross max_len, and always at chapter end. Records outside
    [min_len, max_len] carry oversize=True; sentences are never split.

    Raises:
        DataError: overlapping or inverted spans, with their indices.
    """
    flat: list[tuple[SentenceSpan, list[NDSpan]]] = []
    for p_text, sents in chapter.paragraphs:
        for sent, nd in zip(sents, _sentence_nd(p_text, sents, cfg)):
            flat.append((sent, nd))
    for i, (span, _) in enumerate(flat):
        if span.end_s <= span.start_s:
            raise DataError(f"chapter {chapter.chapter_id}: span {i} has end <= start")
        if i and span.start_s < flat[i - 1][0].end_s - 1e-9:
            raise DataError(
                f"chapter {chapter.chapter_id}: spans {i - 1} and {i} overlap"
            )
    records: list[UtteranceRecord] = []
    acc: list[tuple[SentenceSpan, list[NDSpan]]] = []

    def flush():
        if not acc:
            return
        text, nd = _merge_nd([(s.text, n) for s, n in acc])
        start_s, end_s = acc[0][0].start_s, acc[-1][0].end_s
        dur = end_s - start_s
        records.append(
            UtteranceRecord(
                utt_id=f"{chapter.chapter_id}-{len(records):04d}",
                chapter_id=chapter.chapter_id,
                speaker_id=speaker_id,
                text=text,
                nd_label=nd,
                start_s=start_s,
                end_s=end_s,
                audio_path=chapter.audio_path,
                oversize=not (cfg.min_len <= dur <= cfg.max_len),
            )
        )
        acc.clear()

    for span, nd in flat:
        acc_dur = acc[-1][0].end_s - acc[0][0].start_s if acc else 0.0
        if acc and acc_dur + span.duration > cfg.max_len:
            flush()
        acc.append((span, nd))
        acc_dur = acc[-1][0].end_s - acc[0][0].start_s
        if acc_dur >= cfg.min_len and _ends_with_eos(span.text):
            flush()
    flush()

    for i, rec in enumerate(records):
        rec.context_prev_ids = [r.utt_id for r in records[max(0, i - context_window) : i]]
        rec.context_next_ids = [r.utt_id for r in records[i + 1 : i + 1 + context_window]]
    return records


def enhance_audio(wave: np.ndarray, sr: int, method: str = "identity") -> np.ndarray:
    """Speech-enhancement hook. Default is identity; "spectral_gate" is a
    fixed median-floor gate used to exercise the interface in tests."""
    wave = np.asarray(wave, dtype=np.float64)
    if method == "identity":
        return wave.copy()
    if method == "spectral_gate":
        if len(wave) < 512:
            return wave.copy()
        f, t, spec = sps.stft(wave, fs=sr, nperseg=512)
        mag = np.abs(spec)
        floor = np.median(mag, axis=1, keepdims=True)
        gated = np.maximum(mag - floor, 0.0) * np.exp(1j * np.angle(spec))
        _, out = sps.istft(gated, fs=sr, nperseg=512)
        out = out[: len(wave)]
        if len(out) < len(wave):
            out = np.pad(out, (0, len(wave) - len(out)))
        return out
    raise ValueError(f"unknown enhancement method: {method}")


_RECORD_FIELDS = [
    "utt_id", "chapter_id", "speaker_id", "text", "nd_label",
    "start_s", "end_s", "audio_path", "context_prev_ids", "context_next_ids",
    "oversize",
]


def write_manifest(records: list[UtteranceRecord], path: str | Path) -> None:
    """Write records as JSON Lines, one utterance per line, UTF-8."""
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(asdict(rec), ensure_ascii=False) + "\n")


def read_manifest(path: str | Path) -> list[UtteranceRecord]:
    """Inverse of write_manifest.

    Raises:
        DataError: malformed JSON or missing fields, naming the line number.
    """
    records = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as e:
                raise DataError(f"{path}:{lineno}: invalid JSON ({e.msg})") from None
            missing = [k for k in _RECORD_FIELDS if k not in obj]
            if missing:
                raise DataError(f"{path}:{lineno}: missing fields {missing}")
            records.append(UtteranceRecord(**{k: obj[k] for k in _RECORD_FIELDS}))
    return records


def load_chapter(path: str | Path) -> ChapterScript:
    """Load a chapter script JSON file.

    Schema: {"chapter_id", "audio_path", "paragraphs": [{"text",
    "sentences": [{"start_s", "end_s", "text"}]}]}.
    """
    try:
        with open(path, encoding="utf-8") as fh:
            obj = json.load(fh)
    except json.JSONDecodeError as e:
        raise DataError(f"{path}: invalid chapter JSON ({e.msg})") from None
    try:
        paragraphs = [
            (
                p["text"],
                [SentenceSpan(s["start_s"], s["end_s"], s["text"]) for s in p["sentences"]],
            )
            for p in obj["paragraphs"]
        ]
        return ChapterScript(obj["chapter_id"], obj["audio_path"], paragraphs)
    except (KeyError, TypeError) as e:
        raise DataError(f"{path}: chapter schema violation ({e!r})") from None


def save_chapter(chapter: ChapterScript, path: str | Path) -> None:
    obj = {
        "chapter_id": chapter.chapter_id,
        "audio_path": chapter.audio_path,
        "paragraphs": [
            {
                "text": text,
                "sentences": [
                    {"start_s": s.start_s, "end_s": s.end_s, "text": s.text}
                    for s in sents
                ],
            }
            for text, sents in chapter.paragraphs
        ],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, ensure_ascii=False, indent=1)
