"""Bundled synthetic-corpus generator.

Everything the pipeline needs to run self-contained: a toy French lexicon
with liaison words and two homograph pairs, chapters mixing narration with
guillemet and dash dialogue, sine-composite audio whose band structure
follows the phone script, frame-exact alignments, and labeled datasets for
the frontend and emotion heads. One integer seed determines it all.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

import numpy as np

from . import dsp
from .corpus import (
    ChapterScript,
    SegmentationConfig,
    SentenceSpan,
    UtteranceRecord,
    save_chapter,
    segment_chapter,
)
from .errors import PipelineError
from .frontend.g2p import utterance_phone_script
from .frontend.lexicon import SILENCE_PHONES, Lexicon, LexiconEntry, save_lexicon

SAMPLE_RATE = 24000
SAMPLES_PER_FRAME = 300  # 12.5 ms
SECONDS_PER_FRAME = SAMPLES_PER_FRAME / SAMPLE_RATE

# the toy corpus uses short utterances so 2000-step overfits fit a desk budget
TOY_SEGMENTATION = SegmentationConfig(min_len=1.0, max_len=5.0)

# per-speaker multiplier on every phone's base frequency
SPEAKER_PROFILES = {"spk0": 0.85, "spk1": 1.0, "spk2": 1.3}

# word, pos, phones, liaison final
_LEXICON_ROWS = [
    ("le", "DET", "l ə", None),
    ("la", "DET", "l a", None),
    ("les", "DET", "l e", "z"),
    ("un", "DET", "œ̃", "n"),
    ("une", "DET", "y n", None),
    ("des", "DET", "d e", "z"),
    ("et", "CCONJ", "e", None),
    ("il", "PRON", "i l", None),
    ("elle", "PRON", "ɛ l", None),
    ("ils", "PRON", "i l", "z"),
    ("est", "AUX", "ɛ", None),
    ("est", "NOUN", "ɛ s t", None),
    ("sont", "AUX", "s ɔ̃", "t"),
    ("dit", "VERB", "d i", None),
    ("dort", "VERB", "d ɔ ʁ", None),
    ("chante", "VERB", "ʃ ɑ̃ t", None),
    ("regarde", "VERB", "ʁ ə g a ʁ d", None),
    ("ouvre", "VERB", "u v ʁ", None),
    ("ouvrent", "VERB", "u v ʁ", None),
    ("demande", "VERB", "d ə m ɑ̃ d", None),
    ("répond", "VERB", "ʁ e p ɔ̃", None),
    ("murmure", "VERB", "m y ʁ m y ʁ", None),
    ("crie", "VERB", "k ʁ i", None),
    ("pense", "VERB", "p ɑ̃ s", None),
    ("tirent", "VERB", "t i ʁ", None),
    ("coud", "VERB", "k u", None),
    ("petit", "ADJ", "p ə t i", "t"),
    ("grand", "ADJ", "g ʁ ɑ̃", "t"),
    ("grande", "ADJ", "g ʁ ɑ̃ d", None),
    ("vieux", "ADJ", "v j ø", "z"),
    ("beau", "ADJ", "b o", None),
    ("sage", "ADJ", "s a ʒ", None),
    ("sages", "ADJ", "s a ʒ", None),
    ("longs", "ADJ", "l ɔ̃", None),
    ("calme", "ADJ", "k a l m", None),
    ("calmes", "ADJ", "k a l m", None),
    ("ami", "NOUN", "a m i", None),
    ("amis", "NOUN", "a m i", "z"),
    ("enfant", "NOUN", "ɑ̃ f ɑ̃", None),
    ("arbre", "NOUN", "a ʁ b ʁ", None),
    ("oiseau", "NOUN", "w a z o", None),
    ("maison", "NOUN", "m ɛ z ɔ̃", None),
    ("jardin", "NOUN", "ʒ a ʁ d ɛ̃", None),
    ("chat", "NOUN", "ʃ a", None),
    ("chien", "NOUN", "ʃ j ɛ̃", None),
    ("nuit", "NOUN", "n ɥ i", None),
    ("jour", "NOUN", "ʒ u ʁ", None),
    ("voix", "NOUN", "v w a", None),
    ("porte", "NOUN", "p ɔ ʁ t", None),
    ("mère", "NOUN", "m ɛ ʁ", None),
    ("père", "NOUN", "p ɛ ʁ", None),
    ("route", "NOUN", "ʁ u t", None),
    ("ombre", "NOUN", "ɔ̃ b ʁ", None),
    ("poules", "NOUN", "p u l", None),
    ("monsieur", "NOUN", "m ə s j ø", None),
    ("madame", "NOUN", "m a d a m", None),
    ("joie", "NOUN", "ʒ w a", None),
    ("colère", "NOUN", "k ɔ l ɛ ʁ", None),
    ("chagrin", "NOUN", "ʃ a g ʁ ɛ̃", None),
    ("peur", "NOUN", "p œ ʁ", None),
    ("surprise", "NOUN", "s y ʁ p ʁ i z", None),
    # homograph pair 1: convent noun vs brooding verb
    ("couvent", "NOUN", "k u v ɑ̃", None),
    ("couvent", "VERB", "k u v", None),
    # homograph pair 2: son vs threads
    ("fils", "NOUN", "f i s", None),
    ("fils", "NOUN", "f i l", None),
    ("dans", "ADP", "d ɑ̃", "z"),
    ("sous", "ADP", "s u", "z"),
    ("vers", "ADP", "v ɛ ʁ", "z"),
    ("chez", "ADP", "ʃ e", "z"),
    ("très", "ADV", "t ʁ ɛ", "z"),
    ("bien", "ADV", "b j ɛ̃", None),
    ("ici", "ADV", "i s i", None),
    ("encore", "ADV", "ɑ̃ k ɔ ʁ", None),
    ("bonjour", "INTJ", "b ɔ̃ ʒ u ʁ", None),
    ("oui", "INTJ", "w i", None),
    ("non", "INTJ", "n ɔ̃", None),
]


def toy_lexicon() -> Lexicon:
    entries: dict[str, list[LexiconEntry]] = {}
    for word, pos, phones, liaison in _LEXICON_ROWS:
        entries.setdefault(word, []).append(
            LexiconEntry(tuple(phones.split()), pos, liaison)
        )
    return Lexicon(entries)


# sentence material

_MASC = [("le", "chat"), ("le", "chien"), ("le", "père"), ("le", "jardin"), ("le", "jour")]
_FEM = [("la", "mère"), ("la", "nuit"), ("la", "porte"), ("la", "maison"), ("la", "route")]
_VERBS = ["dort", "chante", "murmure", "pense"]
_ADJ = ["petit", "grand", "beau", "calme", "sage"]
_SAY = ["dit", "demande", "répond", "crie"]
_DIALOGUE = [
    "Bonjour monsieur.",
    "Bonjour madame.",
    "Oui madame.",
    "Non monsieur.",
    "La joie est grande.",
    "La voix est calme.",
]


def _narration_sentence(rng: np.random.Generator) -> str:
    form = int(rng.integers(0, 5))
    pairs = _MASC + _FEM
    det, noun = pairs[int(rng.integers(0, len(pairs)))]
    if form == 0:
        det2, noun2 = _FEM[int(rng.integers(0, len(_FEM)))]
        return f"{det.capitalize()} {noun} {rng.choice(_VERBS)} dans {det2} {noun2}."
    if form == 1:
        return f"{det.capitalize()} {noun} {rng.choice(_VERBS)}."
    if form == 2:
        return f"{det.capitalize()} {noun} est {rng.choice(_ADJ)}."
    if form == 3:
        return f"Les {rng.choice(['amis', 'poules'])} sont {rng.choice(['sages', 'calmes'])}."
    return f"Les amis sont dans {det} {noun}."


def _quote_sentence(rng: np.random.Generator) -> str:
    pron = rng.choice(["Il", "Elle"])
    return f"{pron} {rng.choice(_SAY)} « {rng.choice(_DIALOGUE)} »"


def _dash_sentence(rng: np.random.Generator) -> str:
    return f"— {rng.choice(_DIALOGUE)}"


def _phone_frequencies(phone: str, speaker_factor: float) -> list[tuple[float, float]]:
    """Stable partial set for a phone: base in [110, 290] Hz from its hash."""
    digest = hashlib.md5(phone.encode("utf-8")).digest()
    base = (110.0 + (digest[0] * 256 + digest[1]) % 181) * speaker_factor
    return [(base, 0.22), (2.0 * base, 0.10), (3.0 * base, 0.05)]


def phone_wave(
    phone: str, n_frames: int, speaker_factor: float, phase: float = 0.0
) -> np.ndarray:
    """Sine-composite audio for one phone at 24 kHz, 300 samples per frame."""
    n = n_frames * SAMPLES_PER_FRAME
    if phone in SILENCE_PHONES:
        return np.zeros(n)
    t = (np.arange(n) + phase) / SAMPLE_RATE
    out = np.zeros(n)
    for freq, amp in _phone_frequencies(phone, speaker_factor):
        out += amp * np.sin(2 * np.pi * freq * t)
    ramp = min(120, n // 4)  # 5 ms edges against clicks
    if ramp:
        env = np.ones(n)
        env[:ramp] = np.linspace(0.0, 1.0, ramp)
        env[-ramp:] = np.linspace(1.0, 0.0, ramp)
        out *= env
    return out


def _phone_frame_counts(
    phones: list[str], rng: np.random.Generator, min_total: int
) -> list[int]:
    counts = []
    for p in phones:
        if p == "sil":
            counts.append(int(rng.integers(6, 11)))
        elif p == "sp":
            counts.append(int(rng.integers(4, 9)))
        else:
            counts.append(int(rng.integers(5, 10)))
    if sum(counts) < min_total:
        counts[0] += min_total - sum(counts)
    return counts


def _sentence_plan(text: str, lexicon: Lexicon, rng: np.random.Generator):
    """(text, phones, frame counts) with the sentence forced over min_len."""
    phones = utterance_phone_script(text, lexicon)
    min_frames = int(np.ceil(TOY_SEGMENTATION.min_len / SECONDS_PER_FRAME)) + 6
    counts = _phone_frame_counts(phones, rng, min_frames)
    return text, phones, counts


def make_chapter(
    chapter_id: str,
    speaker: str,
    n_sentences: int,
    seed: int,
    lexicon: Lexicon,
    audio_path: str,
) -> tuple[ChapterScript, np.ndarray, list[UtteranceRecord], dict]:
    """Build one chapter: script with timed spans, audio, per-utterance phones.

    Every sentence exceeds the toy minimum utterance length and ends with an
    end-of-sentence mark, so segmentation flushes after each sentence and
    utterances map 1:1 onto sentences.
    """
    rng = np.random.default_rng(seed)
    factor = SPEAKER_PROFILES[speaker]
    plans = []
    for i in range(n_sentences):
        kind = int(rng.integers(0, 6))
        if kind == 4:
            text = _quote_sentence(rng)
        elif kind == 5:
            text = _dash_sentence(rng)
        else:
            text = _narration_sentence(rng)
        plans.append(_sentence_plan(text, lexicon, rng))

    # group sentences into paragraphs of 1-3; dash dialogue stands alone
    paragraphs: list[tuple[str, list[SentenceSpan]]] = []
    cursor_frames = 0
    i = 0
    while i < len(plans):
        if plans[i][0].startswith("—"):
            take = 1
        else:
            limit = int(rng.integers(1, 4))
            take = 1
            while (
                take < limit
                and i + take < len(plans)
                and not plans[i + take][0].startswith("—")
            ):
                take += 1
        group = plans[i : i + take]
        spans = []
        for text, _, counts in group:
            n_frames = sum(counts)
            spans.append(
                SentenceSpan(
                    start_s=cursor_frames * SECONDS_PER_FRAME,
                    end_s=(cursor_frames + n_frames) * SECONDS_PER_FRAME,
                    text=text,
                )
            )
            cursor_frames += n_frames
        paragraphs.append((" ".join(t for t, _, _ in group), spans))
        i += take

    chapter = ChapterScript(chapter_id, audio_path, paragraphs)
    records = segment_chapter(chapter, TOY_SEGMENTATION, speaker)
    if len(records) != len(plans):
        raise PipelineError(
            "synthetic",
            f"{chapter_id}: expected {len(plans)} utterances, got {len(records)}",
        )

    wave = np.zeros(cursor_frames * SAMPLES_PER_FRAME)
    alignments: dict[str, tuple[list[str], list[int]]] = {}
    offset = 0
    for rec, (text, phones, counts) in zip(records, plans):
        if rec.text != text:
            raise PipelineError(
                "synthetic", f"{rec.utt_id}: segmentation changed the sentence text"
            )
        pos = offset
        for ph, c in zip(phones, counts):
            n = c * SAMPLES_PER_FRAME
            wave[pos : pos + n] = phone_wave(ph, c, factor)
            pos += n
        offset = pos
        # mel analysis of the slice covers 3 fewer frames than its hop count
        durations = list(counts)
        durations[-1] -= 3
        if durations[-1] < 1:
            raise PipelineError("synthetic", f"{rec.utt_id}: final silence too short")
        alignments[rec.utt_id] = (phones, durations)
    return chapter, wave, records, alignments


def write_alignments(alignments: dict, path: Path) -> None:
    """TSV rows (utt_id, phone, start_frame, end_frame), frame-contiguous."""
    with open(path, "w", encoding="utf-8") as fh:
        for utt_id, (phones, durations) in alignments.items():
            frame = 0
            for ph, dur in zip(phones, durations):
                fh.write(f"{utt_id}\t{ph}\t{frame}\t{frame + dur}\n")
                frame += dur


# labeled datasets for the frontend heads

def _polyphone_sentences() -> list[tuple[str, str, int]]:
    """(sentence, target word, variant id) covering both homograph pairs.

    The context embedder only mixes immediate neighbors, so the testset's
    (prev, next) pairs must all occur here."""
    rows = []
    for prev in ("", "grand ", "vieux "):
        for nxt in ("est", "dort", "ouvre"):
            rows.append((f"Le {prev}couvent {nxt} ici.", "couvent", 0))
    rows.append(("Les poules couvent dans le jardin.", "couvent", 1))
    rows.append(("Les poules couvent sous un arbre.", "couvent", 1))
    rows.append(("Les poules couvent ici.", "couvent", 1))
    rows.append(("Les poules couvent encore.", "couvent", 1))
    for nxt in ("est", "dort", "chante"):
        rows.append((f"Le fils {nxt} bien.", "fils", 0))
        rows.append((f"Le fils {nxt} encore.", "fils", 0))
    rows.append(("Les fils sont longs.", "fils", 1))
    rows.append(("Les fils sont calmes.", "fils", 1))
    rows.append(("Les fils tirent bien.", "fils", 1))
    rows.append(("Les fils tirent encore.", "fils", 1))
    return rows


def _sentence_conll(sentence: str, labeler) -> str:
    from .frontend.sentences import tokenize

    lines = []
    tokens = tokenize(sentence)
    for i, tok in enumerate(tokens):
        lines.append(f"{tok}\t{labeler(i, tok, tokens)}")
    return "\n".join(lines) + "\n"


def make_frontend_datasets(out_dir: Path, lexicon: Lexicon, seed: int = 0) -> dict:
    """Write pos/liaison/polyphone CoNLL files plus the homograph testset."""
    from .frontend.annotate import default_annotations
    from .frontend.sentences import is_word_token, tokenize

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)

    sentences = [_narration_sentence(rng) for _ in range(40)]
    sentences += [s for s, _, _ in _polyphone_sentences()]

    def pos_label(i, tok, tokens):
        if not is_word_token(tok):
            return "PUNCT"
        entries = lexicon.lookup(tok)
        return entries[0].pos if entries and entries[0].pos else "X"

    pos_path = out_dir / "pos.conll"
    with open(pos_path, "w", encoding="utf-8") as fh:
        for s in sentences:
            fh.write(_sentence_conll(s, pos_label) + "\n")

    def liaison_label(sentence):
        tokens = tokenize(sentence)
        anns = default_annotations(tokens, lexicon)

        def label(i, tok, _):
            if not is_word_token(tok):
                return "-"
            return "1" if anns[i].liaison else "0"

        return label

    liaison_path = out_dir / "liaison.conll"
    liaison_pool = sentences + [
        "Les amis sont ici.",
        "Il est dans un jardin.",
        "Les amis ouvrent la porte.",
        "Le petit enfant dort.",
        "Le grand arbre est beau.",
        "Ils ouvrent la porte.",
        "Le chat dort sous un arbre.",
    ] * 3
    with open(liaison_path, "w", encoding="utf-8") as fh:
        for s in liaison_pool:
            fh.write(_sentence_conll(s, liaison_label(s)) + "\n")

    poly_path = out_dir / "polyphone.conll"
    with open(poly_path, "w", encoding="utf-8") as fh:
        for s, target, variant in _polyphone_sentences() * 4:
            def label(i, tok, tokens, target=target, variant=variant):
                if not is_word_token(tok):
                    return "-"
                word = tok.casefold()
                if word == target:
                    return str(variant)
                # the toy texts only ever use auxiliary est, variant 0
                if word == "est":
                    return "0"
                return "-"

            fh.write(_sentence_conll(s, label) + "\n")

    homograph_path = out_dir / "homographs.jsonl"
    testset = [
        ("Le couvent est ici.", "couvent", ["k", "u", "v", "ɑ̃"]),
        ("Le grand couvent dort ici.", "couvent", ["k", "u", "v", "ɑ̃"]),
        ("Le vieux couvent ouvre ici.", "couvent", ["k", "u", "v", "ɑ̃"]),
        ("Les poules couvent dans le jardin.", "couvent", ["k", "u", "v"]),
        ("Les poules couvent encore.", "couvent", ["k", "u", "v"]),
        ("Le fils est bien.", "fils", ["f", "i", "s"]),
        ("Le fils chante bien.", "fils", ["f", "i", "s"]),
        ("Le fils dort encore.", "fils", ["f", "i", "s"]),
        ("Les fils sont longs.", "fils", ["f", "i", "l"]),
        ("Les fils tirent bien.", "fils", ["f", "i", "l"]),
    ]
    with open(homograph_path, "w", encoding="utf-8") as fh:
        for sentence, target, phones in testset:
            fh.write(
                json.dumps(
                    {
                        "sentence": sentence,
                        "target_word": target,
                        "expected_phones": phones,
                    },
                    ensure_ascii=False,
                )
                + "\n"
            )

    return {
        "pos": pos_path,
        "liaison": liaison_path,
        "polyphone": poly_path,
        "homographs": homograph_path,
    }


_EMOTION_KEYWORDS = {
    "joy": "joie",
    "anger": "colère",
    "sorrow": "chagrin",
    "fear": "peur",
    "surprise": "surprise",
}


def make_emotion_dataset(path: Path, n_per_class: int = 10, seed: int = 0) -> Path:
    """JSONL rows {context_sentences, center_index, emotion_tag}."""
    rng = np.random.default_rng(seed)
    rows = []
    for tag in ("neutral", "joy", "anger", "sorrow", "fear", "surprise"):
        for _ in range(n_per_class):
            if tag == "neutral":
                center = rng.choice(["Oui madame.", "Bonjour monsieur.", "Non monsieur."])
            else:
                kw = _EMOTION_KEYWORDS[tag]
                center = rng.choice(
                    [f"La {kw} est grande.", f"La {kw} est ici.", f"Quelle {kw} encore."]
                )
            n_prev = int(rng.integers(0, 3))
            n_next = int(rng.integers(0, 2))
            context = (
                [_narration_sentence(rng) for _ in range(n_prev)]
                + [center]
                + [_narration_sentence(rng) for _ in range(n_next)]
            )
            rows.append(
                {
                    "context_sentences": context,
                    "center_index": n_prev,
                    "emotion_tag": tag,
                }
            )
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(json.dumps(row, ensure_ascii=False) + "\n")
    return path


def make_toy_corpus(
    out_dir: Path,
    n_chapters: int = 2,
    sentences_per_chapter: int = 10,
    seed: int = 0,
    speakers: tuple[str, ...] = ("spk0", "spk1"),
) -> dict:
    """Write a complete toy corpus under out_dir and return a summary.

    Layout: lexicon.tsv, chapters/*.json, audio/*.wav (24 kHz),
    alignments.tsv, datasets/ (CoNLL + emotion + homograph testset).
    """
    out_dir = Path(out_dir)
    (out_dir / "chapters").mkdir(parents=True, exist_ok=True)
    (out_dir / "audio").mkdir(exist_ok=True)
    lexicon = toy_lexicon()
    save_lexicon(lexicon, out_dir / "lexicon.tsv")

    all_alignments: dict = {}
    n_utts = 0
    chapter_speakers: list[tuple[str, str]] = []
    for c in range(n_chapters):
        chapter_id = f"ch{c:02d}"
        speaker = speakers[c % len(speakers)]
        audio_rel = f"audio/{chapter_id}.wav"
        chapter, wave, records, alignments = make_chapter(
            chapter_id,
            speaker,
            sentences_per_chapter,
            seed=seed * 1000 + c,
            lexicon=lexicon,
            audio_path=audio_rel,
        )
        dsp.write_wav(out_dir / audio_rel, wave, SAMPLE_RATE)
        save_chapter(chapter, out_dir / "chapters" / f"{chapter_id}.json")
        all_alignments.update(alignments)
        chapter_speakers.append((chapter_id, speaker))
        n_utts += len(records)

    write_alignments(all_alignments, out_dir / "alignments.tsv")
    with open(out_dir / "speakers.tsv", "w", encoding="utf-8") as fh:
        for chapter_id, speaker in chapter_speakers:
            fh.write(f"{chapter_id}\t{speaker}\n")
    dataset_paths = make_frontend_datasets(out_dir / "datasets", lexicon, seed=seed)
    make_emotion_dataset(out_dir / "datasets" / "emotion.jsonl", seed=seed)

    return {
        "out_dir": out_dir,
        "n_chapters": n_chapters,
        "n_utterances": n_utts,
        "speakers": list(speakers),
        "lexicon": out_dir / "lexicon.tsv",
        "alignments": out_dir / "alignments.tsv",
        "datasets": dataset_paths,
    }


_RANDOM_SENTENCES = [
    "Le chat dort dans la maison.",
    "La nuit est calme.",
    "Il murmure vers la porte.",
    "Les amis sont sages.",
    "Elle dit « Bonjour monsieur. »",
    "— Oui madame.",
]


def random_timed_chapter(seed: int) -> ChapterScript:
    """Randomized spans for segmentation property tests; durations decouple
    from text, spans tile the timeline with no gaps."""
    rng = np.random.default_rng(seed)
    cursor = float(rng.uniform(0.0, 2.0))
    paragraphs = []
    for p in range(int(rng.integers(1, 5))):
        spans = []
        texts = []
        for _ in range(int(rng.integers(1, 6))):
            dur = float(rng.uniform(0.5, 9.0))
            if rng.random() < 0.04:
                dur = float(rng.uniform(20.5, 26.0))  # force oversize singles
            text = _RANDOM_SENTENCES[int(rng.integers(0, len(_RANDOM_SENTENCES)))]
            spans.append(SentenceSpan(cursor, cursor + dur, text))
            texts.append(text)
            cursor += dur
        paragraphs.append((" ".join(texts), spans))
    return ChapterScript(f"rnd{seed}", f"rnd{seed}.wav", paragraphs)
