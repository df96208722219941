"""Context feature, CSE, and emotion head tests."""

import json
import math

import pytest
import torch
from hypothesis import given, settings
from hypothesis import strategies as st

from lecteur.context import (
    CSE_MAX_TOKENS,
    ContextAggregator,
    ContextWindow,
    D_SYNTACTIC,
    EMOTION_TAGS,
    EmotionHead,
    PhoneUpsampler,
    SentenceStateVector,
    TokenContextFeatures,
    _build_cse_stream,
    compute_cse,
    encode_context,
    extract_token_features,
    load_emotion_dataset,
    sentence_embedding,
    train_emotion_head,
    upsample_to_phones,
    window_from_records,
)
from lecteur.corpus import UtteranceRecord
from lecteur.embeddings import EmbeddingProvider, HashEmbedder
from lecteur.errors import DataError
from lecteur.frontend import TokenAnnotation, tokenize
from lecteur.frontend.g2p import PhoneSequence


def ann(token, pos="X"):
    return TokenAnnotation(token, pos, False, None)


def record(text, dialogue=False, utt_id="u0", chapter_id="c0"):
    label = "dialogue" if dialogue else "narration"
    return UtteranceRecord(
        utt_id=utt_id, chapter_id=chapter_id, speaker_id="s",
        text=text, nd_label=[{"start": 0, "end": len(text), "label": label}],
        start_s=0.0, end_s=1.0, audio_path="",
    )


class StubEmbedder(EmbeddingProvider):
    mix = 0.0

    def __init__(self, table, dim):
        super().__init__()
        self.table = table
        self.dim = dim

    def _base(self, tokens):
        return torch.stack(
            [torch.tensor(self.table[t], dtype=torch.float32) for t in tokens]
        )


class TestTokenFeatures:
    def test_dimensions(self):
        emb = HashEmbedder(dim=8)
        toks = tokenize("Il dort.")
        f = extract_token_features("Il dort.", [ann(t) for t in toks], emb)
        assert f.semantic.shape == (3, 8)
        assert f.syntactic.shape == (3, D_SYNTACTIC)
        assert D_SYNTACTIC == 20

    def test_single_token_index_zero(self):
        emb = HashEmbedder(dim=4)
        f = extract_token_features("mot", [ann("mot")], emb)
        assert f.syntactic[0, 1] == 0.0

    def test_quote_depth_hand_count(self):
        emb = HashEmbedder(dim=4)
        toks = tokenize("Il dit « Bonjour » !")
        f = extract_token_features(
            "Il dit « Bonjour » !", [ann(t) for t in toks], emb
        )
        assert f.syntactic[:, 2].tolist() == [0.0, 0.0, 1.0, 1.0, 1.0, 0.0]

    def test_pos_one_hot(self):
        emb = HashEmbedder(dim=4)
        f = extract_token_features("chat", [ann("chat", "NOUN")], emb)
        assert f.syntactic[0, 3:].sum() == 1.0

    def test_mismatch_errors(self):
        emb = HashEmbedder(dim=4)
        with pytest.raises(ValueError):
            extract_token_features("un deux", [ann("un")], emb)

    @given(st.text(alphabet="ab «»él.!-", min_size=0, max_size=60))
    @settings(max_examples=100, deadline=None)
    def test_finite_for_arbitrary_text(self, text):
        emb = HashEmbedder(dim=4)
        toks = tokenize(text)
        f = extract_token_features(text, [ann(t) for t in toks], emb)
        assert torch.isfinite(f.semantic).all()
        assert torch.isfinite(f.syntactic).all()


class TestSentenceEmbedding:
    def test_single_token_is_its_embedding(self):
        emb = HashEmbedder(dim=16)
        got = sentence_embedding("mot", emb)
        with torch.no_grad():
            want = emb.encode(["mot"])[0]
        assert torch.equal(got, want)

    def test_opposite_embeddings_cancel(self):
        e = [1.0, -2.0, 3.0]
        emb = StubEmbedder({"a": e, "b": [-x for x in e]}, dim=3)
        emb.mix = 0.25
        got = sentence_embedding("a b", emb)
        assert torch.allclose(got, torch.zeros(3), atol=1e-7)

    def test_hand_computed_mean(self):
        table = {"x": [1.0, 0.0, 2.0, 0.0], "y": [0.0, 3.0, 0.0, 1.0],
                 "z": [2.0, 0.0, 1.0, 5.0]}
        emb = StubEmbedder(table, dim=4)
        got = sentence_embedding("x y z", emb)
        assert torch.allclose(got, torch.tensor([1.0, 1.0, 1.0, 2.0]))

    def test_empty_warns_and_zeros(self, caplog):
        emb = HashEmbedder(dim=4)
        with caplog.at_level("WARNING"):
            got = sentence_embedding("", emb)
        assert torch.equal(got, torch.zeros(4))
        assert "empty" in caplog.text


class TestEncodeContext:
    def make(self, seed=0):
        torch.manual_seed(seed)
        return HashEmbedder(dim=8), ContextAggregator(d_sem=8, d_ctx=6, hidden=5)

    def test_degenerate_window(self):
        emb, agg = self.make()
        w = ContextWindow(record("Il dort."))
        s = encode_context(w, emb, agg)
        assert s.state.shape == (6,)
        assert torch.isfinite(s.state).all()

    def test_deterministic(self):
        emb, agg = self.make()
        w = ContextWindow(record("Il dort."), ["Avant."], ["Après."])
        a = encode_context(w, emb, agg).state
        b = encode_context(w, emb, agg).state
        assert torch.equal(a, b)

    def test_order_sensitive(self):
        emb, agg = self.make(seed=3)
        center = record("Il dort.")
        a = encode_context(ContextWindow(center, ["Un chat.", "Une nuit."]), emb, agg)
        b = encode_context(ContextWindow(center, ["Une nuit.", "Un chat."]), emb, agg)
        assert not torch.allclose(a.state, b.state)

    def test_window_from_records_same_chapter_only(self):
        recs = [record(f"Phrase {i}.", utt_id=f"u{i}", chapter_id="c0" if i < 3 else "c1")
                for i in range(5)]
        w = window_from_records(recs, 2, w_prev=5, w_next=5)
        assert w.prev == ["Phrase 0.", "Phrase 1."]
        assert w.next == []


class TestCSE:
    def test_narration_is_exact_zero(self):
        emb = HashEmbedder(dim=16)
        w = ContextWindow(record("Il marcha."), ["Avant."], ["Après."])
        v = compute_cse(w, emb)
        assert v.is_narration
        assert torch.equal(v.cse, torch.zeros(16))

    def test_dialogue_empty_context_equals_sentence_embedding(self):
        emb = HashEmbedder(dim=16)
        w = ContextWindow(record("Bonjour madame", dialogue=True))
        v = compute_cse(w, emb)
        assert not v.is_narration
        assert torch.equal(v.cse, sentence_embedding("Bonjour madame", emb))

    def test_stream_capped_center_intact(self):
        def words(prefix, n):
            return " ".join(
                prefix + chr(97 + i // 26) + chr(97 + i % 26) for i in range(n)
            )

        center_text = words("mot", 10)
        w = ContextWindow(
            record(center_text, dialogue=True), [words("av", 150)], [words("ap", 150)]
        )
        stream, lo, hi = _build_cse_stream(w)
        assert len(stream) == CSE_MAX_TOKENS
        assert stream[lo:hi] == tokenize(center_text)
        # symmetric trimming keeps the context tokens nearest the center
        assert stream[lo - 1] == "av" + chr(97 + 149 // 26) + chr(97 + 149 % 26)
        assert stream[hi] == "apaa"

    def test_cse_uses_context(self):
        emb = HashEmbedder(dim=16)
        center = record("Bonjour madame", dialogue=True)
        bare = compute_cse(ContextWindow(center), emb)
        ctx = compute_cse(ContextWindow(center, ["Il hurla très fort."]), emb)
        assert not torch.allclose(bare.cse, ctx.cse)

    def test_giant_center_truncated_with_warning(self, caplog):
        text = " ".join(f"mot{i}" for i in range(300))
        w = ContextWindow(record(text, dialogue=True), ["avant"], ["après"])
        with caplog.at_level("WARNING"):
            stream, lo, hi = _build_cse_stream(w)
        assert (lo, hi) == (0, CSE_MAX_TOKENS)
        assert len(stream) == CSE_MAX_TOKENS
        assert "truncating" in caplog.text


def emotion_windows(n=40):
    tags = ("joy", "anger")
    rows = []
    for i in range(n):
        tok = f"{tags[i % 2]}word{i % 4}"
        rows.append((ContextWindow(record(tok, dialogue=True)), tags[i % 2]))
    return rows


class TestEmotionHead:
    def test_first_batch_loss_is_log_c(self):
        emb = HashEmbedder(dim=16)
        _, report = train_emotion_head(emotion_windows(8), emb, epochs=1)
        assert report["first_batch_loss"] == pytest.approx(math.log(len(EMOTION_TAGS)), abs=1e-6)
        assert len(EMOTION_TAGS) == 6

    def test_separable_set_reaches_full_accuracy(self):
        emb = HashEmbedder(dim=32)
        _, report = train_emotion_head(emotion_windows(40), emb, epochs=300, lr=0.1, seed=1)
        assert report["accuracy"] == 1.0

    def test_single_class(self):
        emb = HashEmbedder(dim=16)
        rows = [(ContextWindow(record(f"mot{i}", dialogue=True)), "fear") for i in range(10)]
        _, report = train_emotion_head(rows, emb, epochs=100, lr=0.1)
        assert report["accuracy"] == 1.0

    def test_unknown_tag_is_data_error(self):
        emb = HashEmbedder(dim=8)
        rows = [(ContextWindow(record("mot", dialogue=True)), "ennui")]
        with pytest.raises(DataError, match="ennui"):
            train_emotion_head(rows, emb)

    def test_zero_init(self):
        head = EmotionHead(8)
        assert torch.equal(head.linear.weight, torch.zeros(6, 8))


class TestEmotionDataset:
    def test_round_trip(self, tmp_path):
        p = tmp_path / "emo.jsonl"
        rows = [
            {"context_sentences": ["Avant.", "Quelle joie !", "Après."],
             "center_index": 1, "emotion_tag": "joy"},
        ]
        p.write_text("\n".join(json.dumps(r, ensure_ascii=False) for r in rows))
        data = load_emotion_dataset(p)
        assert len(data) == 1
        w, tag = data[0]
        assert tag == "joy"
        assert w.center.text == "Quelle joie !"
        assert w.center.is_dialogue()
        assert w.prev == ["Avant."] and w.next == ["Après."]

    def test_bad_row_names_line(self, tmp_path):
        p = tmp_path / "emo.jsonl"
        p.write_text('{"context_sentences": ["a"], "center_index": 5, "emotion_tag": "joy"}\n')
        with pytest.raises(DataError, match=":1:"):
            load_emotion_dataset(p)


class TestUpsample:
    def make(self, n_tokens, d_sem=6, d_ctx=4, d_model=10, seed=0):
        torch.manual_seed(seed)
        feat = TokenContextFeatures(
            semantic=torch.randn(n_tokens, d_sem),
            syntactic=torch.randn(n_tokens, D_SYNTACTIC),
        )
        state = SentenceStateVector(torch.randn(d_ctx))
        ups = PhoneUpsampler(d_sem, d_ctx, d_model)
        return feat, state, ups

    def test_same_word_rows_identical(self):
        feat, state, ups = self.make(1)
        seq = PhoneSequence(phones=[("a", 0), ("b", 0)], word_boundaries=[0], punctuation=[])
        out = upsample_to_phones(feat, state, seq, [[0]], ups)
        assert out.shape == (2, 10)
        assert torch.equal(out[0], out[1])

    def test_two_token_word_uses_mean(self):
        feat, state, ups = self.make(2)
        seq = PhoneSequence(phones=[("a", 0)], word_boundaries=[0], punctuation=[])
        out = upsample_to_phones(feat, state, seq, [[0, 1]], ups)
        joint = torch.cat([feat.semantic, feat.syntactic], dim=-1).mean(dim=0)
        want = ups.proj(torch.cat([joint, state.state]))
        assert torch.allclose(out[0], want, atol=1e-6)

    def test_row_count_matches_phones(self):
        feat, state, ups = self.make(3)
        seq = PhoneSequence(
            phones=[("a", 0), ("b", 1), ("c", 1), ("d", 2)],
            word_boundaries=[0, 1, 3], punctuation=[],
        )
        out = upsample_to_phones(feat, state, seq, [[0], [1], [2]], ups)
        assert out.shape[0] == 4

    def test_unmapped_word_errors(self):
        feat, state, ups = self.make(1)
        seq = PhoneSequence(phones=[("a", 1)], word_boundaries=[0], punctuation=[])
        with pytest.raises(ValueError, match="word"):
            upsample_to_phones(feat, state, seq, [[0]], ups)
