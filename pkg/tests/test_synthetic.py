"""Bundled synthetic corpus: structure, determinism, alignment bookkeeping."""

import numpy as np
import pytest

from lecteur import dsp
from lecteur.corpus import SegmentationConfig, load_chapter, segment_chapter
from lecteur.context import load_emotion_dataset
from lecteur.frontend.annotate import UD_TAGS, read_conll
from lecteur.frontend.g2p import utterance_phone_script
from lecteur.frontend.homographs import load_homograph_testset
from lecteur.frontend.lexicon import PHONE_IDS, load_lexicon
from lecteur.frontend.sentences import is_word_token, tokenize
from lecteur.synthetic import (
    SAMPLES_PER_FRAME,
    SPEAKER_PROFILES,
    TOY_SEGMENTATION,
    make_toy_corpus,
    phone_wave,
    random_timed_chapter,
    toy_lexicon,
)


@pytest.fixture(scope="module")
def corpus_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("toycorpus")
    make_toy_corpus(out, n_chapters=2, sentences_per_chapter=10, seed=0)
    return out


class TestToyLexicon:
    def test_polyphone_words(self):
        lex = toy_lexicon()
        polys = sorted(w for w in lex.entries if lex.is_polyphone(w))
        assert polys == ["couvent", "est", "fils"]

    def test_phones_in_inventory(self):
        lex = toy_lexicon()
        for word, entries in lex.entries.items():
            for e in entries:
                for p in e.phones:
                    assert p in PHONE_IDS, (word, p)

    def test_liaison_markers(self):
        lex = toy_lexicon()
        finals = {
            e.liaison_final
            for entries in lex.entries.values()
            for e in entries
            if e.liaison_final
        }
        assert finals <= {"n", "t", "z"}

    def test_save_load_round_trip(self, tmp_path, corpus_dir):
        lex = toy_lexicon()
        loaded = load_lexicon(corpus_dir / "lexicon.tsv")
        assert loaded.entries == lex.entries


class TestPhoneWave:
    def test_silence_is_zero(self):
        assert not phone_wave("sil", 8, 1.0).any()
        assert not phone_wave("sp", 5, 1.0).any()

    def test_length_is_frames_times_hop(self):
        assert phone_wave("a", 7, 1.0).shape == (7 * SAMPLES_PER_FRAME,)

    def test_deterministic(self):
        np.testing.assert_array_equal(phone_wave("u", 6, 1.0), phone_wave("u", 6, 1.0))

    def _peak_hz(self, wave):
        spec = np.abs(np.fft.rfft(wave))
        return np.fft.rfftfreq(len(wave), d=1 / 24000)[spec.argmax()]

    def test_phones_have_distinct_bases(self):
        # these four hash to bases at least 38 Hz apart
        peaks = {self._peak_hz(phone_wave(p, 40, 1.0)) for p in ("a", "u", "o", "ʁ")}
        assert len(peaks) == 4

    def test_speaker_factor_scales_pitch(self):
        lo = self._peak_hz(phone_wave("a", 40, SPEAKER_PROFILES["spk0"]))
        hi = self._peak_hz(phone_wave("a", 40, SPEAKER_PROFILES["spk2"]))
        assert hi > lo


class TestMakeToyCorpus:
    def test_layout_and_counts(self, corpus_dir):
        assert (corpus_dir / "lexicon.tsv").is_file()
        assert (corpus_dir / "alignments.tsv").is_file()
        assert len(list((corpus_dir / "chapters").glob("*.json"))) == 2
        assert len(list((corpus_dir / "audio").glob("*.wav"))) == 2
        for name in ("pos.conll", "liaison.conll", "polyphone.conll",
                     "emotion.jsonl", "homographs.jsonl"):
            assert (corpus_dir / "datasets" / name).is_file()
        assert len(dsp.load_alignment(corpus_dir / "alignments.tsv")) == 20

    def test_utterances_map_one_to_one_and_frames_agree(self, corpus_dir):
        lex = load_lexicon(corpus_dir / "lexicon.tsv")
        align = dsp.load_alignment(corpus_dir / "alignments.tsv")
        n = 0
        for cj in sorted((corpus_dir / "chapters").glob("*.json")):
            chapter = load_chapter(cj)
            wave, sr = dsp.read_wav(corpus_dir / chapter.audio_path)
            assert sr == 24000
            w16 = dsp.resample(wave, 24000, 16000)
            records = segment_chapter(chapter, TOY_SEGMENTATION, "spk")
            spans = [s for _, ss in chapter.paragraphs for s in ss]
            assert len(records) == len(spans)
            for rec in records:
                n += 1
                assert not rec.oversize
                a = round(rec.start_s * 16000)
                b = round(rec.end_s * 16000)
                mel = dsp.compute_mel(w16[a:b], 16000)
                phones, durations = align[rec.utt_id]
                assert sum(durations) == mel.n_frames
                assert list(phones) == utterance_phone_script(rec.text, lex)
        assert n == 20

    def test_dialogue_forms_present(self, corpus_dir):
        texts = []
        for cj in (corpus_dir / "chapters").glob("*.json"):
            chapter = load_chapter(cj)
            for _, spans in chapter.paragraphs:
                texts.extend(s.text for s in spans)
        assert any("«" in t for t in texts)
        assert any(t.startswith("—") for t in texts)
        assert any("«" not in t and not t.startswith("—") for t in texts)

    def test_same_seed_reproduces_bytes(self, tmp_path, corpus_dir):
        again = tmp_path / "again"
        make_toy_corpus(again, n_chapters=2, sentences_per_chapter=10, seed=0)
        for rel in ("alignments.tsv", "lexicon.tsv", "audio/ch00.wav",
                    "chapters/ch01.json", "datasets/polyphone.conll"):
            assert (again / rel).read_bytes() == (corpus_dir / rel).read_bytes(), rel

    def test_different_seed_differs(self, tmp_path, corpus_dir):
        other = tmp_path / "other"
        make_toy_corpus(other, n_chapters=2, sentences_per_chapter=10, seed=9)
        assert (other / "alignments.tsv").read_bytes() != (
            corpus_dir / "alignments.tsv"
        ).read_bytes()


class TestDatasets:
    def test_conll_files_parse(self, corpus_dir):
        for task in ("pos", "liaison", "polyphone"):
            sents = read_conll(corpus_dir / "datasets" / f"{task}.conll", task)
            assert sents

    def test_pos_labels_are_tags(self, corpus_dir):
        for sent in read_conll(corpus_dir / "datasets" / "pos.conll", "pos"):
            for _, label in sent:
                assert label is None or label in UD_TAGS

    def test_liaison_has_both_classes(self, corpus_dir):
        labels = {
            label
            for sent in read_conll(corpus_dir / "datasets" / "liaison.conll", "liaison")
            for _, label in sent
            if label is not None
        }
        assert labels == {0, 1}

    def test_polyphone_covers_both_variants(self, corpus_dir):
        seen = {}
        for sent in read_conll(
            corpus_dir / "datasets" / "polyphone.conll", "polyphone"
        ):
            for token, label in sent:
                if label is not None:
                    seen.setdefault(token.casefold(), set()).add(label)
        assert seen["couvent"] == {0, 1}
        assert seen["fils"] == {0, 1}
        assert seen["est"] == {0}

    def test_testset_contexts_occur_in_training(self, corpus_dir):
        # the hash embedder mixes only immediate neighbors, so the head can
        # only separate contexts it saw; every testset (prev, target, next)
        # word triple must appear in the labeled training sentences
        def triples(sentence, target):
            words = [t.casefold() for t in tokenize(sentence) if is_word_token(t)]
            return {
                (words[i - 1] if i else "", w, words[i + 1] if i + 1 < len(words) else "")
                for i, w in enumerate(words)
                if w == target
            }

        train = set()
        for sent in read_conll(
            corpus_dir / "datasets" / "polyphone.conll", "polyphone"
        ):
            words = [t.casefold() for t in (tok for tok, _ in sent) if is_word_token(t)]
            for i, w in enumerate(words):
                if w in ("couvent", "fils"):
                    train.add(
                        (
                            words[i - 1] if i else "",
                            w,
                            words[i + 1] if i + 1 < len(words) else "",
                        )
                    )
        for item in load_homograph_testset(corpus_dir / "datasets" / "homographs.jsonl"):
            got = triples(item.sentence, item.target_word)
            assert got <= train, (item.sentence, got - train)

    def test_homograph_testset_shape(self, corpus_dir):
        items = load_homograph_testset(corpus_dir / "datasets" / "homographs.jsonl")
        assert len(items) == 10
        by_word = {}
        for it in items:
            by_word.setdefault(it.target_word, []).append(tuple(it.expected_phones))
        assert set(by_word) == {"couvent", "fils"}
        assert len(by_word["couvent"]) == 5 and len(by_word["fils"]) == 5
        # both variants of each word are exercised
        assert len(set(by_word["couvent"])) == 2
        assert len(set(by_word["fils"])) == 2

    def test_emotion_rows(self, corpus_dir):
        rows = load_emotion_dataset(corpus_dir / "datasets" / "emotion.jsonl")
        tags = sorted({tag for _, tag in rows})
        assert tags == ["anger", "fear", "joy", "neutral", "sorrow", "surprise"]
        assert len(rows) == 60


class TestRandomTimedChapter:
    @pytest.mark.parametrize("seed", range(20))
    def test_duration_conserved_and_bounds(self, seed):
        cfg = SegmentationConfig()
        chapter = random_timed_chapter(seed)
        records = segment_chapter(chapter, cfg, "s")
        spans = [s for _, ss in chapter.paragraphs for s in ss]
        total = sum(s.end_s - s.start_s for s in spans)
        merged = sum(r.end_s - r.start_s for r in records)
        assert merged == pytest.approx(total, abs=1e-9)
        for r in records:
            if not r.oversize:
                assert cfg.min_len <= r.end_s - r.start_s <= cfg.max_len

    def test_oversize_occurs_somewhere(self):
        cfg = SegmentationConfig()
        assert any(
            r.oversize
            for seed in range(30)
            for r in segment_chapter(random_timed_chapter(seed), cfg, "s")
        )
