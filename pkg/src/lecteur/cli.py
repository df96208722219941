"""Batch command line tying the pipeline together.

Subcommands: make-toy-corpus, prepare, train-frontend, train-acoustic,
train-vocoder, adapt, synthesize, eval. Every command reads one JSON run
config (--config, see config.py for the schema) plus a few command-specific
flags. Exit codes: 0 success, 1 usage, 2 data error, 3 runtime error.
"""

from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import sys
from pathlib import Path

import numpy as np
import torch

from . import dsp
from .acoustic import AcousticConfig, AcousticModel, UtteranceFeatures
from .config import RunConfig, load_run_config
from .context import (
    ContextAggregator,
    ContextWindow,
    EmotionHead,
    PhoneUpsampler,
    compute_cse,
    encode_context,
    extract_token_features,
    load_emotion_dataset,
    train_emotion_head,
    window_from_records,
)
from .corpus import (
    UtteranceRecord,
    ChapterScript,
    SentenceSpan,
    enhance_audio,
    load_chapter,
    segment_chapter,
)
from .embeddings import HashEmbedder
from .errors import DataError, PipelineError, UsageError
from .frontend.annotate import (
    AnnotationHeads,
    default_annotations,
    predict_annotations,
    train_annotation_heads,
)
from .frontend.g2p import g2p, sentence_phone_script, word_token_alignment
from .frontend.homographs import FrontendState, eval_homographs, load_homograph_testset
from .frontend.lexicon import PHONE_IDS, SILENCE_PHONES, Lexicon, load_lexicon
from .frontend.normalize import normalize_text
from .frontend.sentences import split_sentences, tokenize
from .training import (
    adapt as run_adapt,
    load_checkpoint,
    load_features,
    save_features,
    train as run_train,
)
from .vocoder import (
    FINAL_SR,
    VocoderSample,
    finalize,
    generate,
    train_vocoder,
)

_SILENCE_IDS = tuple(PHONE_IDS[p] for p in SILENCE_PHONES)


# ---- shared plumbing ----


def _manifest_path(cfg: RunConfig) -> Path:
    return cfg.features_dir / "manifest.json"


def _read_manifest(path: Path) -> dict:
    if not path.is_file():
        raise DataError(f"manifest not found: {path} (run prepare first)")
    return json.loads(path.read_text(encoding="utf-8"))


def _context_modules_path(cfg: RunConfig) -> Path:
    return cfg.checkpoints_dir / "context_modules.pt"


def _build_context_modules(cfg: RunConfig):
    """Embedder + aggregator + upsampler, deterministic for a given seed."""
    torch.manual_seed(cfg.seed)
    embedder = HashEmbedder(cfg.context.embedding_dim)
    aggregator = ContextAggregator(cfg.context.embedding_dim, cfg.context.d_ctx)
    upsampler = PhoneUpsampler(
        cfg.context.embedding_dim, cfg.context.d_ctx, cfg.acoustic.d_model
    )
    return embedder, aggregator, upsampler


def _load_or_create_context_modules(cfg: RunConfig, create: bool):
    """The context modules are frozen at prepare time; training and synthesis
    must consume the exact same weights, so they live in a checkpoint."""
    path = _context_modules_path(cfg)
    embedder, aggregator, upsampler = _build_context_modules(cfg)
    if path.is_file():
        payload = torch.load(path, weights_only=True)
        dims = payload["dims"]
        want = {
            "embedding_dim": cfg.context.embedding_dim,
            "d_ctx": cfg.context.d_ctx,
            "d_model": cfg.acoustic.d_model,
        }
        if dims != want:
            raise DataError(
                f"context modules at {path} were built with {dims}, config wants {want}"
            )
        embedder.load_state_dict(payload["embedder"])
        aggregator.load_state_dict(payload["aggregator"])
        upsampler.load_state_dict(payload["upsampler"])
    elif create:
        path.parent.mkdir(parents=True, exist_ok=True)
        torch.save(
            {
                "dims": {
                    "embedding_dim": cfg.context.embedding_dim,
                    "d_ctx": cfg.context.d_ctx,
                    "d_model": cfg.acoustic.d_model,
                },
                "embedder": embedder.state_dict(),
                "aggregator": aggregator.state_dict(),
                "upsampler": upsampler.state_dict(),
            },
            path,
        )
    else:
        raise DataError(f"context modules not found: {path} (run prepare first)")
    for m in (embedder, aggregator, upsampler):
        m.eval()
    return embedder, aggregator, upsampler


def _utterance_inputs(
    record: UtteranceRecord,
    window: ContextWindow,
    lexicon: Lexicon,
    embedder,
    aggregator,
    upsampler,
    annotate,
):
    """Phone ids, per-phone context matrix, CSE, and silence mask for one
    utterance. `annotate(tokens) -> list[TokenAnnotation]` picks rule-based
    or trained-head annotations."""
    state = encode_context(window, embedder, aggregator)
    script: list[str] = []
    rows: list[torch.Tensor] = []
    for sentence in split_sentences(record.text):
        tokens = tokenize(sentence)
        anns = annotate(tokens)
        seq = g2p(sentence, lexicon, anns)
        feat = extract_token_features(sentence, anns, embedder)
        with torch.no_grad():
            speech_rows = upsampler(feat, state, seq, word_token_alignment(tokens))
        sscript = sentence_phone_script(sentence, lexicon, anns)
        k = 0
        for symbol in sscript:
            if symbol in SILENCE_PHONES:
                rows.append(torch.zeros(upsampler.proj.out_features))
            else:
                rows.append(speech_rows[k])
                k += 1
        if k != speech_rows.shape[0]:
            raise PipelineError(
                "prepare",
                f"{record.utt_id}: phone script used {k} speech rows, "
                f"g2p produced {speech_rows.shape[0]}",
            )
        script.extend(sscript)
    if not script:
        raise DataError(f"{record.utt_id}: no phones from text {record.text!r}")
    cse = compute_cse(window, embedder)
    phone_ids = torch.tensor([PHONE_IDS[p] for p in script], dtype=torch.long)
    silence = torch.tensor([p in SILENCE_PHONES for p in script], dtype=torch.bool)
    return {
        "script": script,
        "phone_ids": phone_ids,
        "context": torch.stack(rows).float(),
        "cse": cse.cse.float(),
        "is_narration": cse.is_narration,
        "silence_mask": silence,
    }


def _default_annotator(lexicon: Lexicon):
    return lambda tokens: default_annotations(tokens, lexicon)


def _frontend_path(cfg: RunConfig) -> Path:
    return cfg.checkpoints_dir / "frontend_last.pt"


def _load_frontend(cfg: RunConfig):
    """Trained annotation heads + their embedder, or None if not trained."""
    path = _frontend_path(cfg)
    if not path.is_file():
        return None
    payload = torch.load(path, weights_only=True)
    embedder = HashEmbedder(payload["embedding_dim"])
    embedder.load_state_dict(payload["embedder"])
    heads = AnnotationHeads(
        payload["embedding_dim"],
        n_polyphone_classes=payload["n_polyphone_classes"],
        liaison_vocab=frozenset(payload["liaison_vocab"]),
        polyphone_vocab=frozenset(payload["polyphone_vocab"]),
    )
    heads.load_state_dict(payload["heads"])
    embedder.eval()
    heads.eval()
    return {"embedder": embedder, "heads": heads}


def _speaker_map(corpus_dir: Path) -> dict[str, str]:
    """chapter_id -> speaker name; single 'narrator' if no speakers.tsv."""
    path = corpus_dir / "speakers.tsv"
    if not path.is_file():
        return {}
    out = {}
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip():
            continue
        parts = line.split("\t")
        if len(parts) != 2:
            raise DataError(f"{path}:{lineno}: expected chapter_id TAB speaker")
        out[parts[0]] = parts[1]
    return out


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


# ---- prepare ----


def cmd_prepare(cfg: RunConfig) -> int:
    if not cfg.corpus_dir.is_dir():
        raise DataError(f"corpus directory not found: {cfg.corpus_dir}")
    if not cfg.lexicon.is_file():
        raise DataError(f"lexicon not found: {cfg.lexicon}")
    chapter_files = sorted((cfg.corpus_dir / "chapters").glob("*.json"))
    if not chapter_files:
        raise DataError(f"no chapter files under {cfg.corpus_dir / 'chapters'}")
    if cfg.context.embedding_dim != cfg.acoustic.d_cse:
        raise DataError(
            f"context embedding_dim {cfg.context.embedding_dim} must equal "
            f"acoustic d_cse {cfg.acoustic.d_cse} (the cse feeds the decoder)"
        )
    lexicon = load_lexicon(cfg.lexicon)
    embedder, aggregator, upsampler = _load_or_create_context_modules(cfg, create=True)
    annotate = _default_annotator(lexicon)

    align_path = cfg.corpus_dir / "alignments.tsv"
    alignments = dsp.load_alignment(align_path) if align_path.is_file() else {}
    chapter_speaker = _speaker_map(cfg.corpus_dir)

    # pass 1: segmentation over all chapters
    per_chapter: list[tuple] = []
    speakers: set[str] = set()
    for cj in chapter_files:
        chapter = load_chapter(cj)
        speaker = chapter_speaker.get(chapter.chapter_id, "narrator")
        speakers.add(speaker)
        records = segment_chapter(chapter, cfg.segmentation, speaker)
        per_chapter.append((chapter, speaker, records))
    speaker_ids = {name: i for i, name in enumerate(sorted(speakers))}
    n_utts = sum(len(r) for _, _, r in per_chapter)
    n_dialogue = sum(1 for _, _, rs in per_chapter for r in rs if r.is_dialogue())
    n_oversize = sum(1 for _, _, rs in per_chapter for r in rs if r.oversize)
    print(f"chapters: {len(per_chapter)}")
    print(
        f"utterances: {n_utts} (dialogue {n_dialogue}, narration "
        f"{n_utts - n_dialogue}, oversize {n_oversize})"
    )

    cfg.features_dir.mkdir(parents=True, exist_ok=True)
    manifest_rows = []
    n_loaded = n_synth = n_unchanged = 0
    n_frames_total = 0
    n_cse = 0
    for chapter, speaker, records in per_chapter:
        audio_path = cfg.corpus_dir / chapter.audio_path
        if not audio_path.is_file():
            first = records[0].utt_id if records else chapter.chapter_id
            raise DataError(f"{first}: audio file not found: {audio_path}")
        wave, sr = dsp.read_wav(audio_path)
        wave = enhance_audio(wave, sr, method=cfg.enhancement)
        w16 = dsp.resample(wave, sr, dsp.MEL_SR) if sr != dsp.MEL_SR else wave
        for rec_index, rec in enumerate(records):
            a = round(rec.start_s * dsp.MEL_SR)
            b = round(rec.end_s * dsp.MEL_SR)
            if b > len(w16) or b <= a:
                raise DataError(
                    f"{rec.utt_id}: span {rec.start_s:.3f}..{rec.end_s:.3f}s "
                    f"outside audio of {len(w16) / dsp.MEL_SR:.3f}s"
                )
            try:
                mel = dsp.compute_mel(w16[a:b], dsp.MEL_SR)
                track = dsp.extract_f0(w16[a:b], dsp.MEL_SR)
                inputs = _utterance_inputs(
                    rec,
                    window_from_records(records, rec_index),
                    lexicon,
                    embedder,
                    aggregator,
                    upsampler,
                    annotate,
                )
                script = inputs["script"]
                aligned = alignments.get(rec.utt_id)
                if aligned is not None and int(np.sum(aligned[1])) != mel.n_frames:
                    # frame count disagrees, the file was made for a different
                    # segmentation of the same chapter, ignore the entry
                    aligned = None
                if aligned is not None:
                    phones, durations = aligned
                    if list(phones) != script:
                        raise DataError(
                            f"{rec.utt_id}: alignment phones disagree with the "
                            f"text's phone script"
                        )
                    alignment_source = "loaded"
                    n_loaded += 1
                else:
                    seed = cfg.seed * 100003 + len(manifest_rows)
                    durations = dsp.synth_alignment(len(script), mel.n_frames, seed)
                    alignment_source = "synthesized"
                    n_synth += 1
                pitch = dsp.phone_pitch(track, np.asarray(durations))
                item = UtteranceFeatures(
                    phone_ids=inputs["phone_ids"],
                    pitch=torch.from_numpy(np.asarray(pitch, dtype=np.float32)),
                    durations=torch.from_numpy(
                        np.asarray(durations, dtype=np.int64)
                    ),
                    mel=torch.from_numpy(mel.data.astype(np.float32)),
                    speaker_id=speaker_ids[speaker],
                    nd_id=1 if rec.is_dialogue() else 0,
                    context=inputs["context"],
                    cse=inputs["cse"],
                    utt_id=rec.utt_id,
                )
            except (ValueError, KeyError) as exc:
                raise PipelineError("prepare", f"{rec.utt_id}: {exc}") from exc
            out = cfg.features_dir / f"{rec.utt_id}.npz"
            before = _sha256(out) if out.is_file() else None
            path = save_features(item, cfg.features_dir)
            digest = _sha256(path)
            if before == digest:
                n_unchanged += 1
            n_frames_total += mel.n_frames
            if not inputs["is_narration"]:
                n_cse += 1
            manifest_rows.append(
                {
                    "utt_id": rec.utt_id,
                    "chapter_id": rec.chapter_id,
                    "speaker": speaker,
                    "speaker_id": speaker_ids[speaker],
                    "nd_id": 1 if rec.is_dialogue() else 0,
                    "n_phones": len(script),
                    "n_frames": mel.n_frames,
                    "alignment": "loaded" if rec.utt_id in alignments else "synthesized",
                    "text": rec.text,
                    "feature_sha256": digest,
                }
            )
    print(f"mel/f0: {n_utts} utterances, {n_frames_total} frames")
    print(f"alignments: {n_loaded} loaded, {n_synth} synthesized")
    print(f"context/cse: {n_utts} cached ({n_cse} dialogue cse nonzero)")
    print(f"features: {n_utts} written ({n_unchanged} unchanged)")

    manifest = {
        "speakers": sorted(speakers),
        "n_utterances": n_utts,
        "sample_rate": dsp.MEL_SR,
        "enhancement": cfg.enhancement,
        "utterances": manifest_rows,
    }
    mpath = _manifest_path(cfg)
    mpath.write_text(
        json.dumps(manifest, ensure_ascii=False, indent=1, sort_keys=True) + "\n",
        encoding="utf-8",
    )
    print(f"manifest: {mpath}")
    return 0


# ---- training commands ----


def _load_all_features(cfg: RunConfig) -> tuple[dict, list[UtteranceFeatures]]:
    manifest = _read_manifest(_manifest_path(cfg))
    utt_ids = [row["utt_id"] for row in manifest["utterances"]]
    items = load_features(cfg.features_dir, utt_ids)
    return manifest, items


def _check_acoustic_fits(cfg: RunConfig, manifest: dict, items) -> None:
    n_speakers = len(manifest["speakers"])
    if cfg.acoustic.n_speakers < n_speakers:
        raise DataError(
            f"acoustic n_speakers {cfg.acoustic.n_speakers} < corpus speakers "
            f"{n_speakers}"
        )
    if cfg.acoustic.phone_vocab_size <= max(PHONE_IDS.values()):
        raise DataError(
            f"phone_vocab_size {cfg.acoustic.phone_vocab_size} too small for the "
            f"{len(PHONE_IDS)}-symbol inventory"
        )
    for item in items:
        if item.mel.shape[1] != cfg.acoustic.n_mels:
            raise DataError(
                f"{item.utt_id}: mel has {item.mel.shape[1]} bands, acoustic "
                f"config wants {cfg.acoustic.n_mels}"
            )


def cmd_train_acoustic(cfg: RunConfig, resume: Path | None = None) -> int:
    manifest, items = _load_all_features(cfg)
    _check_acoustic_fits(cfg, manifest, items)
    torch.manual_seed(cfg.seed)
    model = AcousticModel(cfg.acoustic)
    out_dir = cfg.checkpoints_dir / "acoustic"
    ckpt = run_train(model, items, cfg.optimizer, cfg.training, out_dir, resume_from=resume)
    print(f"checkpoint: {ckpt}")
    print(f"metrics: {out_dir / 'metrics.csv'}")
    return 0


def cmd_train_vocoder(cfg: RunConfig, fine_tune_from: Path | None = None) -> int:
    manifest, items = _load_all_features(cfg)
    by_id = {i.utt_id: i for i in items}
    chapter_speaker = _speaker_map(cfg.corpus_dir)
    pairs: list[VocoderSample] = []
    for cj in sorted((cfg.corpus_dir / "chapters").glob("*.json")):
        chapter = load_chapter(cj)
        audio_path = cfg.corpus_dir / chapter.audio_path
        if not audio_path.is_file():
            raise DataError(f"{chapter.chapter_id}: audio file not found: {audio_path}")
        wave, sr = dsp.read_wav(audio_path)
        wave = enhance_audio(wave, sr, method=cfg.enhancement)
        speaker = chapter_speaker.get(chapter.chapter_id, "narrator")
        for rec in segment_chapter(chapter, cfg.segmentation, speaker):
            item = by_id.get(rec.utt_id)
            if item is None:
                continue
            a = round(rec.start_s * sr)
            b = round(rec.end_s * sr)
            mel = dsp.MelSpec(
                data=item.mel.numpy(),
                sr=dsp.MEL_SR,
                frame_len=dsp.FRAME_LEN,
                hop=dsp.HOP,
                n_mels=item.mel.shape[1],
            )
            pairs.append(
                VocoderSample(wave=wave[a:b], sr=sr, mel=mel, utt_id=rec.utt_id)
            )
    out_dir = cfg.checkpoints_dir / "vocoder"
    ckpt = train_vocoder(
        pairs, cfg.vocoder, cfg.vocoder_training, out_dir, fine_tune_from=fine_tune_from
    )
    print(f"checkpoint: {ckpt}")
    print(f"metrics: {out_dir / 'vocoder_metrics.csv'}")
    return 0


def cmd_train_frontend(cfg: RunConfig) -> int:
    if not cfg.lexicon.is_file():
        raise DataError(f"lexicon not found: {cfg.lexicon}")
    lexicon = load_lexicon(cfg.lexicon)
    datasets = cfg.corpus_dir / "datasets"
    paths = {name: datasets / f"{name}.conll" for name in ("pos", "liaison", "polyphone")}
    present = {k: (p if p.is_file() else None) for k, p in paths.items()}
    emotion_path = datasets / "emotion.jsonl"
    if not any(present.values()) and not emotion_path.is_file():
        raise DataError(f"no training datasets under {datasets}")
    torch.manual_seed(cfg.seed)
    embedder = HashEmbedder(cfg.context.embedding_dim)
    heads, metrics = train_annotation_heads(
        present["pos"],
        present["liaison"],
        present["polyphone"],
        embedder,
        lexicon,
        epochs=cfg.frontend.epochs,
        lr=cfg.frontend.lr,
        holdout=cfg.frontend.holdout,
        seed=cfg.seed,
    )
    for task, acc in sorted(metrics.items()):
        print(f"{task}: holdout accuracy {acc:.3f}")
    payload = {
        "embedding_dim": cfg.context.embedding_dim,
        "n_polyphone_classes": max(2, lexicon.max_variants),
        "liaison_vocab": sorted(lexicon.liaison_vocab),
        "polyphone_vocab": sorted(lexicon.polyphone_vocab),
        "embedder": embedder.state_dict(),
        "heads": heads.state_dict(),
        "metrics": metrics,
    }
    if emotion_path.is_file():
        labeled = load_emotion_dataset(emotion_path)
        emotion, emo_metrics = train_emotion_head(
            labeled,
            embedder,
            epochs=cfg.frontend.emotion_epochs,
            lr=cfg.frontend.lr,
            holdout=cfg.frontend.holdout,
            seed=cfg.seed,
        )
        print(f"emotion: holdout accuracy {emo_metrics['accuracy']:.3f}")
        payload["emotion"] = emotion.state_dict()
        payload["emotion_metrics"] = emo_metrics
    cfg.checkpoints_dir.mkdir(parents=True, exist_ok=True)
    out = _frontend_path(cfg)
    torch.save(payload, out)
    print(f"checkpoint: {out}")
    return 0


def cmd_adapt(
    cfg: RunConfig, source_checkpoint: Path | None, target_features: Path | None
) -> int:
    if source_checkpoint is None:
        raise UsageError("adapt requires --source-checkpoint")
    if not Path(source_checkpoint).is_file():
        raise DataError(f"source checkpoint not found: {source_checkpoint}")
    features_dir = target_features or cfg.features_dir
    manifest = _read_manifest(Path(features_dir) / "manifest.json")
    utt_ids = [row["utt_id"] for row in manifest["utterances"]]
    items = load_features(features_dir, utt_ids)
    out_dir = cfg.checkpoints_dir / "adapt"
    ckpt, speaker_id = run_adapt(source_checkpoint, items, cfg.adapt, out_dir)
    print(f"checkpoint: {ckpt}")
    print(f"target speaker id: {speaker_id}")
    return 0


# ---- synthesis ----


def _paragraphs_from_text(path: Path) -> list[str]:
    if not path.is_file():
        raise DataError(f"text file not found: {path}")
    blocks = path.read_text(encoding="utf-8").split("\n\n")
    out = []
    for block in blocks:
        text = normalize_text(" ".join(block.split()))
        if text:
            out.append(text)
    if not out:
        raise DataError(f"text file {path} holds no paragraphs")
    return out


def _paragraphs_from_manifest(path: Path) -> list[str]:
    manifest = _read_manifest(path)
    return [row["text"] for row in manifest["utterances"]]


def _pseudo_chapter(paragraphs: list[str], cfg: RunConfig) -> ChapterScript:
    """Wrap input text in the chapter schema so segmentation and ND run
    unchanged. Span times are synthetic pacing, only used for grouping."""
    per_sentence = max(cfg.segmentation.min_len, 0.5)
    cursor = 0.0
    paras = []
    for text in paragraphs:
        spans = []
        for sentence in split_sentences(text):
            spans.append(SentenceSpan(cursor, cursor + per_sentence, sentence))
            cursor += per_sentence
        if spans:
            paras.append((text, spans))
    if not paras:
        raise DataError("no sentences found in the input text")
    return ChapterScript("input", "", paras)


def _load_acoustic(path: Path) -> AcousticModel:
    if not path.is_file():
        raise DataError(f"acoustic checkpoint not found: {path}")
    payload = load_checkpoint(path)
    model = AcousticModel(AcousticConfig(**payload["config"]))
    model.load_state_dict(payload["model"])
    model.eval()
    return model


def cmd_synthesize(
    cfg: RunConfig,
    text_path: Path | None,
    manifest_path: Path | None,
    speaker: int,
    mode: str | None,
    acoustic_checkpoint: Path | None,
    vocoder_checkpoint: Path | None,
    dump_features: bool,
) -> int:
    if (text_path is None) == (manifest_path is None):
        raise UsageError("synthesize needs exactly one of --text or --manifest")
    if not cfg.lexicon.is_file():
        raise DataError(f"lexicon not found: {cfg.lexicon}")
    mode = mode or cfg.vocoder.mode
    if mode not in ("gan", "griffinlim"):
        raise UsageError(f"unknown vocoder mode {mode!r}")
    if mode != cfg.vocoder.mode:
        cfg.vocoder = dataclasses.replace(cfg.vocoder, mode=mode)
    ckpt_path = acoustic_checkpoint or cfg.checkpoints_dir / "acoustic" / "checkpoint_last.pt"
    model = _load_acoustic(Path(ckpt_path))
    if not 0 <= speaker < model.config.n_speakers:
        raise DataError(
            f"speaker id {speaker} out of range for a "
            f"{model.config.n_speakers}-speaker checkpoint"
        )
    voc_ckpt: Path | None = None
    if mode == "gan":
        voc_ckpt = vocoder_checkpoint or cfg.checkpoints_dir / "vocoder" / "vocoder_last.pt"

    lexicon = load_lexicon(cfg.lexicon)
    embedder, aggregator, upsampler = _load_or_create_context_modules(cfg, create=False)
    frontend = _load_frontend(cfg)
    if frontend is not None:
        def annotate(tokens):
            return predict_annotations(tokens, frontend["embedder"], frontend["heads"])
    else:
        annotate = _default_annotator(lexicon)

    paragraphs = (
        _paragraphs_from_text(Path(text_path))
        if text_path is not None
        else _paragraphs_from_manifest(Path(manifest_path))
    )
    chapter = _pseudo_chapter(paragraphs, cfg)
    records = segment_chapter(chapter, cfg.segmentation, f"speaker{speaker}")
    print(f"utterances: {len(records)}")

    torch.manual_seed(cfg.seed)
    cfg.output_dir.mkdir(parents=True, exist_ok=True)
    if dump_features:
        (cfg.output_dir / "features").mkdir(exist_ok=True)
    index_rows = []
    for i, rec in enumerate(records):
        inputs = _utterance_inputs(
            rec,
            window_from_records(records, i),
            lexicon,
            embedder,
            aggregator,
            upsampler,
            annotate,
        )
        with torch.no_grad():
            out = model.forward_infer(
                inputs["phone_ids"],
                context=inputs["context"],
                speaker_id=speaker,
                nd_id=1 if rec.is_dialogue() else 0,
                cse=inputs["cse"],
                silence_mask=inputs["silence_mask"],
            )
        mel = out.mel.numpy()
        if mel.shape[0] == 0:
            raise PipelineError("acoustic", f"{rec.utt_id}: predicted zero frames")
        melspec = dsp.MelSpec(
            data=mel.astype(np.float64),
            sr=dsp.MEL_SR,
            frame_len=dsp.FRAME_LEN,
            hop=dsp.HOP,
            n_mels=mel.shape[1],
        )
        wave24 = generate(melspec, cfg.vocoder, checkpoint=voc_ckpt)
        wave = finalize(wave24)
        wav_name = f"{rec.utt_id}.wav"
        dsp.write_wav(cfg.output_dir / wav_name, wave, FINAL_SR)
        if dump_features:
            np.savez(
                cfg.output_dir / "features" / f"{rec.utt_id}.npz",
                phone_ids=inputs["phone_ids"].numpy(),
                context=inputs["context"].numpy(),
                cse=inputs["cse"].numpy(),
                silence_mask=inputs["silence_mask"].numpy(),
                nd_id=np.int64(1 if rec.is_dialogue() else 0),
                mel=mel,
                durations=out.durations.numpy(),
                pitch=out.pitch.numpy(),
            )
        index_rows.append(
            {
                "utt_id": rec.utt_id,
                "wav": wav_name,
                "text": rec.text,
                "nd_id": 1 if rec.is_dialogue() else 0,
                "n_frames": int(mel.shape[0]),
                "duration_s": round(mel.shape[0] * 300 / 24000, 4),
            }
        )
    index = {
        "sample_rate": FINAL_SR,
        "speaker": speaker,
        "mode": mode,
        "utterances": index_rows,
    }
    ipath = cfg.output_dir / "index.json"
    ipath.write_text(
        json.dumps(index, ensure_ascii=False, indent=1, sort_keys=True) + "\n",
        encoding="utf-8",
    )
    print(f"wrote {len(records)} wav files + {ipath}")
    return 0


# ---- evaluation ----


def cmd_eval(cfg: RunConfig, acoustic_checkpoint: Path | None) -> int:
    manifest, items = _load_all_features(cfg)
    ckpt_path = acoustic_checkpoint or cfg.checkpoints_dir / "acoustic" / "checkpoint_last.pt"
    model = _load_acoustic(Path(ckpt_path))

    mel_l1 = []
    ssim_tf = []
    ssim_fr = []
    dur_l1 = []
    pitch_l1 = []
    with torch.no_grad():
        for item in items:
            outs = model.forward_train([item])
            pred = outs.mel[0].final
            target = item.mel
            mel_l1.append(float(torch.mean(torch.abs(pred - target))))
            ssim_tf.append(dsp.ssim(pred.numpy(), target.numpy()))
            dur_pred = torch.expm1(outs.log_dur_pred[0]).round().clamp(min=0)
            dur_l1.append(float(torch.mean(torch.abs(dur_pred - item.durations))))
            pitch_l1.append(
                float(torch.mean(torch.abs(outs.pitch_pred[0] - item.pitch)))
            )

            silence = torch.tensor(
                [int(p) in _SILENCE_IDS for p in item.phone_ids], dtype=torch.bool
            )
            free = model.forward_infer(
                item.phone_ids,
                context=item.context,
                speaker_id=item.speaker_id,
                nd_id=item.nd_id,
                cse=item.cse,
                silence_mask=silence,
            )
            n = min(free.mel.shape[0], target.shape[0])
            if n == 0:
                ssim_fr.append(0.0)
            else:
                ssim_fr.append(dsp.ssim(free.mel[:n].numpy(), target[:n].numpy()))

    report = {
        "homograph_accuracy": None,
        "mel_l1": float(np.mean(mel_l1)),
        "ssim": float(np.mean(ssim_tf)),
        "duration_l1": float(np.mean(dur_l1)),
        "pitch_l1": float(np.mean(pitch_l1)),
        "ssim_free_running": float(np.mean(ssim_fr)),
        "n_utterances": len(items),
    }

    testset_path = cfg.corpus_dir / "datasets" / "homographs.jsonl"
    frontend = _load_frontend(cfg)
    if testset_path.is_file() and frontend is not None:
        lexicon = load_lexicon(cfg.lexicon)
        state = FrontendState(
            lexicon=lexicon, embedder=frontend["embedder"], heads=frontend["heads"]
        )
        testset = load_homograph_testset(testset_path)
        report["homograph_accuracy"] = eval_homographs(testset, state)
    elif testset_path.is_file():
        raise DataError(
            f"homograph testset present at {testset_path} but no trained frontend "
            f"at {_frontend_path(cfg)} (run train-frontend)"
        )

    cfg.output_dir.mkdir(parents=True, exist_ok=True)
    rpath = cfg.output_dir / "eval_report.json"
    rpath.write_text(json.dumps(report, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    print(json.dumps(report, indent=2, sort_keys=True))
    return 0


# ---- toy corpus ----


def cmd_make_toy_corpus(out: Path, chapters: int, sentences: int, seed: int, speakers: str) -> int:
    from .synthetic import make_toy_corpus

    names = tuple(s.strip() for s in speakers.split(",") if s.strip())
    if not names:
        raise UsageError("--speakers must name at least one speaker")
    summary = make_toy_corpus(
        out, n_chapters=chapters, sentences_per_chapter=sentences, seed=seed, speakers=names
    )
    print(f"corpus: {summary['out_dir']}")
    print(f"chapters: {summary['n_chapters']}")
    print(f"utterances: {summary['n_utterances']}")
    print(f"speakers: {', '.join(summary['speakers'])}")
    return 0


# ---- argument surface ----


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse default exits 2; usage errors are 1
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="lecteur", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    common = _Parser(add_help=False)
    common.add_argument("--config", type=Path, default=None, help="run config JSON")
    common.add_argument("--preset", choices=("toy", "full"), default=None)
    common.add_argument("--seed", type=int, default=None, help="override config seed")

    sub.add_parser("prepare", parents=[common], help="segment, extract, cache features")

    p = sub.add_parser("train-acoustic", parents=[common], help="train the acoustic model")
    p.add_argument("--resume", type=Path, default=None, help="checkpoint to resume from")

    p = sub.add_parser("train-vocoder", parents=[common], help="train the neural vocoder")
    p.add_argument("--fine-tune-from", type=Path, default=None)

    sub.add_parser("train-frontend", parents=[common], help="train annotation + emotion heads")

    p = sub.add_parser("adapt", parents=[common], help="fine-tune for a new speaker")
    p.add_argument("--source-checkpoint", type=Path, default=None)
    p.add_argument("--target-features", type=Path, default=None,
                   help="prepared features of the target speaker corpus")

    p = sub.add_parser("synthesize", parents=[common], help="text to wav files")
    p.add_argument("--text", type=Path, default=None, help="paragraphs separated by blank lines")
    p.add_argument("--manifest", type=Path, default=None, help="re-synthesize a prepared manifest")
    p.add_argument("--speaker", type=int, default=0)
    p.add_argument("--mode", choices=("gan", "griffinlim"), default=None)
    p.add_argument("--acoustic-checkpoint", type=Path, default=None)
    p.add_argument("--vocoder-checkpoint", type=Path, default=None)
    p.add_argument("--dump-features", action="store_true")

    p = sub.add_parser("eval", parents=[common], help="objective metrics report")
    p.add_argument("--acoustic-checkpoint", type=Path, default=None)

    p = sub.add_parser("make-toy-corpus", parents=[common], help="write the bundled synthetic corpus")
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--chapters", type=int, default=2)
    p.add_argument("--sentences", type=int, default=10)
    p.add_argument("--speakers", type=str, default="spk0,spk1")

    return parser


def _dispatch(args: argparse.Namespace) -> int:
    if args.command == "make-toy-corpus":
        return cmd_make_toy_corpus(
            args.out, args.chapters, args.sentences, args.seed or 0, args.speakers
        )
    cfg = load_run_config(args.config, preset=args.preset, seed=args.seed)
    if args.command == "prepare":
        return cmd_prepare(cfg)
    if args.command == "train-acoustic":
        return cmd_train_acoustic(cfg, resume=args.resume)
    if args.command == "train-vocoder":
        return cmd_train_vocoder(cfg, fine_tune_from=args.fine_tune_from)
    if args.command == "train-frontend":
        return cmd_train_frontend(cfg)
    if args.command == "adapt":
        return cmd_adapt(cfg, args.source_checkpoint, args.target_features)
    if args.command == "synthesize":
        return cmd_synthesize(
            cfg,
            args.text,
            args.manifest,
            args.speaker,
            args.mode,
            args.acoustic_checkpoint,
            args.vocoder_checkpoint,
            args.dump_features,
        )
    if args.command == "eval":
        return cmd_eval(cfg, args.acoustic_checkpoint)
    raise UsageError(f"unknown command {args.command!r}")


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return _dispatch(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2
    except PipelineError as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return 3
    except (ValueError, RuntimeError, OSError) as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
