"""Acceptance gate: one test per shipped guarantee, one pass/fail line each.

Run with -v to get the per-criterion verdict from pytest itself; each test
additionally prints a [criterion NN] PASS/FAIL line with the measured values
so the gate can be audited from captured output alone.
"""

import csv
import json
import math
import time
from dataclasses import replace
from types import SimpleNamespace

import numpy as np
import pytest
import torch

from lecteur import cli, dsp, vocoder
from lecteur.acoustic.config import AcousticConfig
from lecteur.acoustic.model import (
    AcousticModel,
    MelPrediction,
    TrainOutputs,
    UtteranceFeatures,
)
from lecteur.config import preset_defaults
from lecteur.context import _build_cse_stream, ContextWindow, compute_cse
from lecteur.corpus import SegmentationConfig, UtteranceRecord, classify_nd, segment_chapter
from lecteur.embeddings import HashEmbedder
from lecteur.frontend.annotate import read_conll, train_annotation_heads
from lecteur.frontend.homographs import (
    FrontendState,
    HomographItem,
    eval_homographs,
    load_homograph_testset,
)
from lecteur.frontend.lexicon import load_lexicon
from lecteur.synthetic import random_timed_chapter
from lecteur.training import (
    OptimizerConfig,
    Ranger,
    TrainConfig,
    composite_loss,
    load_checkpoint,
    load_features,
    lr_at,
    train,
)
from lecteur.training.loop import adapt as run_adapt, AdaptConfig, replace_speaker
from lecteur.vocoder import Generator, VocoderConfig, finalize, generate

from nd_cases import CASES


def report(num: int, name: str, ok: bool, detail: str = "") -> None:
    tail = f" ({detail})" if detail else ""
    print(f"[criterion {num:02d}] {name}: {'PASS' if ok else 'FAIL'}{tail}")
    assert ok, f"criterion {num} {name}: {detail}"


# ---------------------------------------------------------------- fixtures


@pytest.fixture(scope="module")
def ws(tmp_path_factory):
    """The bundled 20-utterance corpus, prepared through the real CLI."""
    root = tmp_path_factory.mktemp("acceptance")
    assert cli.main(["make-toy-corpus", "--out", str(root / "corpus")]) == 0
    cfg = {
        "preset": "toy",
        "seed": 0,
        "paths": {"corpus": "corpus", "features": "features",
                  "checkpoints": "ckpt", "output": "out"},
    }
    cfg_path = root / "run.json"
    cfg_path.write_text(json.dumps(cfg), encoding="utf-8")
    assert cli.main(["prepare", "--config", str(cfg_path)]) == 0
    manifest = json.loads(
        (root / "features" / "manifest.json").read_text(encoding="utf-8")
    )
    ids = [r["utt_id"] for r in manifest["utterances"]]
    items = load_features(root / "features", ids)
    return SimpleNamespace(root=root, cfg_path=cfg_path, manifest=manifest,
                           items=items)


@pytest.fixture(scope="module")
def overfit(ws):
    """Chunked toy-preset training with early stop once both targets hold."""
    run_cfg = preset_defaults("toy")
    out_dir = ws.root / "ckpt" / "acoustic"
    torch.manual_seed(run_cfg.seed)
    model = AcousticModel(run_cfg.acoustic)
    t0 = time.monotonic()
    ckpt = None
    chunk = 250
    step10_avg = None
    loss_step = None
    ssim_val = 0.0
    trained_steps = 0
    for limit in range(chunk, run_cfg.training.steps + 1, chunk):
        tc = replace(run_cfg.training, steps=limit, log_every=1,
                     checkpoint_every=chunk)
        ckpt = train(model, ws.items, run_cfg.optimizer, tc, out_dir,
                     resume_from=ckpt)
        trained_steps = limit
        with open(out_dir / "metrics.csv", encoding="utf-8") as fh:
            rows = [{k: float(v) for k, v in r.items()}
                    for r in csv.DictReader(fh)]
        if step10_avg is None:
            head = [r["total"] for r in rows if r["step"] <= 10]
            step10_avg = sum(head) / len(head)
        if loss_step is None:
            for r in rows:
                if r["total"] < 0.3 * step10_avg:
                    loss_step = int(r["step"])
                    break
        model.eval()
        with torch.no_grad():
            sims = [
                dsp.ssim(
                    model.forward_train([it]).mel[0].final.numpy(),
                    it.mel.numpy(),
                )
                for it in ws.items
            ]
        ssim_val = float(np.mean(sims))
        if loss_step is not None and ssim_val >= 0.85:
            break
    seconds = time.monotonic() - t0
    return SimpleNamespace(ckpt=ckpt, step10_avg=step10_avg,
                           loss_step=loss_step, ssim=ssim_val,
                           steps=trained_steps, seconds=seconds)


# -------------------------------------------------------- loss fixtures


def _random_outputs(gen: torch.Generator, identical: bool):
    """A TrainOutputs/batch pair with no model in the loop."""
    n_blocks, n_mels, d_style, d_pro = 2, 6, 8, 4
    n_items = 1 + int(torch.randint(0, 2, (1,), generator=gen))
    batch, mels, pitch_p, logd_p = [], [], [], []
    gst_p, gst_r, pro_p, pro_r = [], [], [], []
    for i in range(n_items):
        n_ph = int(torch.randint(2, 6, (1,), generator=gen))
        dur = torch.randint(1, 4, (n_ph,), generator=gen)
        frames = int(dur.sum())
        mel_t = torch.randn(frames, n_mels, generator=gen)
        pitch_t = torch.randn(n_ph, generator=gen)
        batch.append(UtteranceFeatures(
            phone_ids=torch.randint(0, 10, (n_ph,), generator=gen),
            pitch=pitch_t, durations=dur, mel=mel_t, utt_id=f"fx{i}",
        ))
        gr = torch.randn(d_style, generator=gen)
        pr = torch.randn(n_ph, d_pro, generator=gen)
        gst_r.append(gr)
        pro_r.append(pr)
        if identical:
            mels.append(MelPrediction([mel_t.clone() for _ in range(n_blocks)]))
            pitch_p.append(pitch_t.clone())
            logd_p.append(torch.log1p(dur.to(torch.get_default_dtype())))
            gst_p.append(gr.clone())
            pro_p.append(pr.clone())
        else:
            mels.append(MelPrediction(
                [torch.randn(frames, n_mels, generator=gen)
                 for _ in range(n_blocks)]
            ))
            pitch_p.append(torch.randn(n_ph, generator=gen))
            logd_p.append(torch.randn(n_ph, generator=gen))
            gst_p.append(torch.randn(d_style, generator=gen))
            pro_p.append(torch.randn(n_ph, d_pro, generator=gen))
    outs = TrainOutputs(mel=mels, pitch_pred=pitch_p, log_dur_pred=logd_p,
                        gst_pred=gst_p, gst_ref=gst_r,
                        prosody_pred=pro_p, prosody_ref=pro_r)
    return outs, batch


def test_criterion_01_loss_sum_integrity():
    gen = torch.Generator().manual_seed(11)
    worst = 0.0
    for i in range(1000):
        outs, batch = _random_outputs(gen, identical=False)
        bd = composite_loss(outs, batch)
        resum = bd.l_gst + bd.l_phone + bd.l_pitch + bd.l_dur + bd.l_mel + bd.l_ssim
        worst = max(worst, abs(float(bd.total) - float(resum)))
        assert float(bd.total) == float(resum), f"fixture {i}"
    outs, batch = _random_outputs(gen, identical=True)
    zero_total = float(composite_loss(outs, batch).total)
    ok = worst == 0.0 and zero_total == 0.0
    report(1, "loss sum integrity", ok,
           f"1000 fixtures, max |total - resum| = {worst}, "
           f"all-correct total = {zero_total}")


def _fd_fixture(gen):
    """Single-item double-precision fixture with margins away from L1 kinks.

    Every leaf has at least 20 elements so each term gets 20 distinct
    finite-difference points."""
    n_ph, n_mels, d_style, d_pro = 24, 6, 24, 4
    dur = torch.randint(1, 4, (n_ph,), generator=gen)
    frames = int(dur.sum())

    def offset(shape):
        sign = torch.where(
            torch.rand(shape, generator=gen) < 0.5, -1.0, 1.0
        )
        return sign * (0.3 + 0.5 * torch.rand(shape, generator=gen))

    mel_t = torch.randn(frames, n_mels, generator=gen)
    pitch_t = torch.randn(n_ph, generator=gen)
    item = UtteranceFeatures(
        phone_ids=torch.randint(0, 10, (n_ph,), generator=gen),
        pitch=pitch_t, durations=dur, mel=mel_t, utt_id="fd",
    )
    base = {
        "gst_p": offset((d_style,)),
        "gst_r": torch.randn(d_style, generator=gen),
        "pro_r": torch.randn(n_ph, d_pro, generator=gen),
        "pitch_p": pitch_t + offset((n_ph,)),
        "logd_p": torch.log1p(dur.double()) + offset((n_ph,)),
        "mel_b0": mel_t + offset((frames, n_mels)),
        "mel_b1": mel_t + offset((frames, n_mels)),
    }
    base["gst_p"] = base["gst_r"] + offset((d_style,))
    base["pro_p"] = base["pro_r"] + offset((n_ph, d_pro))
    return base, item


def _fd_outputs(tensors):
    return TrainOutputs(
        mel=[MelPrediction([tensors["mel_b0"], tensors["mel_b1"]])],
        pitch_pred=[tensors["pitch_p"]],
        log_dur_pred=[tensors["logd_p"]],
        gst_pred=[tensors["gst_p"]],
        gst_ref=[tensors["gst_r"]],
        prosody_pred=[tensors["pro_p"]],
        prosody_ref=[tensors["pro_r"]],
    )


def test_criterion_02_gradient_finite_differences():
    term_leaf = {
        "l_gst": "gst_p", "l_phone": "pro_p", "l_pitch": "pitch_p",
        "l_dur": "logd_p", "l_mel": "mel_b0", "l_ssim": "mel_b1",
    }
    old_dtype = torch.get_default_dtype()
    torch.set_default_dtype(torch.float64)
    try:
        gen = torch.Generator().manual_seed(23)
        base, item = _fd_fixture(gen)
        leaves = {k: v.detach().clone().requires_grad_(k in term_leaf.values())
                  for k, v in base.items()}
        bd = composite_loss(_fd_outputs(leaves), [item])
        eps = 1e-6
        worst = 0.0
        points = 0
        for term, leaf_name in term_leaf.items():
            analytic = torch.autograd.grad(
                getattr(bd, term), leaves[leaf_name], retain_graph=True
            )[0]
            flat = base[leaf_name].reshape(-1)
            order = torch.randperm(flat.numel(), generator=gen).tolist()
            # skip coordinates whose derivative is below fd roundoff scale
            coords = [c for c in order
                      if abs(float(analytic.reshape(-1)[c])) >= 1e-5][:20]
            assert len(coords) == 20, (term, len(coords))
            for c in coords:
                plus = dict(base)
                minus = dict(base)
                plus[leaf_name] = base[leaf_name].detach().clone()
                minus[leaf_name] = base[leaf_name].detach().clone()
                plus[leaf_name].reshape(-1)[c] += eps
                minus[leaf_name].reshape(-1)[c] -= eps
                fd = (
                    float(getattr(composite_loss(_fd_outputs(plus), [item]), term))
                    - float(getattr(composite_loss(_fd_outputs(minus), [item]), term))
                ) / (2 * eps)
                an = float(analytic.reshape(-1)[c])
                rel = abs(fd - an) / max(abs(fd), abs(an), 1e-12)
                worst = max(worst, rel)
                points += 1
                assert rel < 1e-4, (term, c, fd, an)
    finally:
        torch.set_default_dtype(old_dtype)
    report(2, "gradients vs finite differences", worst < 1e-4,
           f"{points} points over 6 terms, worst relative error {worst:.2e}")


def test_criterion_03_overfit(overfit):
    ok = (
        overfit.loss_step is not None
        and overfit.loss_step <= 2000
        and overfit.ssim >= 0.85
        and overfit.seconds < 900.0
    )
    report(3, "toy overfit", ok,
           f"loss < 30% of step-10 average ({overfit.step10_avg:.2f}) at step "
           f"{overfit.loss_step}, ssim {overfit.ssim:.3f} after "
           f"{overfit.steps} steps, {overfit.seconds:.0f}s")


def test_criterion_04_pipeline_determinism(ws, overfit, tmp_path):
    text = ws.root / "input.txt"
    text.write_text(
        "Le chat dort dans la maison. Il dit « Bonjour madame. »\n\n"
        "— Oui monsieur.\n",
        encoding="utf-8",
    )
    outs = []
    for name in ("d1", "d2"):
        cfg = {
            "preset": "toy", "seed": 0,
            "paths": {"corpus": str(ws.root / "corpus"),
                      "features": str(ws.root / "features"),
                      "checkpoints": str(ws.root / "ckpt"),
                      "output": str(tmp_path / name)},
        }
        p = tmp_path / f"{name}.json"
        p.write_text(json.dumps(cfg), encoding="utf-8")
        assert cli.main(["synthesize", "--config", str(p), "--text", str(text),
                         "--mode", "griffinlim"]) == 0
        outs.append(tmp_path / name)
    a, b = outs
    wavs = sorted(w.name for w in a.glob("*.wav"))
    same = all((a / n).read_bytes() == (b / n).read_bytes() for n in wavs)
    same_index = (a / "index.json").read_bytes() == (b / "index.json").read_bytes()
    report(4, "pipeline determinism", same and same_index and len(wavs) == 3,
           f"{len(wavs)} WAVs byte-identical across two runs")


def test_criterion_05_segmentation_conformance():
    cfg = SegmentationConfig()
    n_records = 0
    n_oversize = 0
    for seed in range(1000):
        chapter = random_timed_chapter(seed)
        records = segment_chapter(chapter, cfg, "s")
        spans = [s for _, ss in chapter.paragraphs for s in ss]
        total = sum(s.end_s - s.start_s for s in spans)
        merged = sum(r.end_s - r.start_s for r in records)
        assert merged == pytest.approx(total, abs=1e-9), seed
        for r in records:
            n_records += 1
            if r.oversize:
                n_oversize += 1
            else:
                assert cfg.min_len <= r.duration <= cfg.max_len, (seed, r.utt_id)
    report(5, "segmentation conformance", n_records > 0 and n_oversize > 0,
           f"1000 chapters, {n_records} utterances, {n_oversize} flagged, "
           f"duration conserved to 1e-9")


def test_criterion_06_nd_rules():
    cfg = SegmentationConfig()
    failures = []
    for text, expected in CASES:
        got = [(text[s.start:s.end], s.label[0]) for s in classify_nd(text, cfg)]
        if got != expected:
            failures.append(text)
    report(6, "narration/dialogue fixtures", not failures,
           f"{len(CASES) - len(failures)}/{len(CASES)} cases"
           + (f", first failure: {failures[0]!r}" if failures else ""))


def test_criterion_07_dsp_oracles():
    rng = np.random.default_rng(3)
    for _ in range(1000):
        n_ph = int(rng.integers(1, 12))
        durs = rng.integers(0, 9, size=n_ph)
        if durs.sum() == 0:
            durs[0] = 1
        f0 = np.where(rng.random(int(durs.sum())) < 0.3, 0.0,
                      rng.uniform(60.0, 400.0, int(durs.sum())))
        track = dsp.PitchTrack(f0=f0, sr=16000, frame_len=800, hop=200)
        got = dsp.phone_pitch(track, durs)
        start = 0
        for i, d in enumerate(durs):
            acc, n = 0.0, 0
            for v in f0[start:start + int(d)]:
                if v > 0:
                    acc += math.log(v)
                    n += 1
            want = acc / n if n else 0.0
            assert abs(got[i] - want) < 1e-10, (i, got[i], want)
            start += int(d)
    x = rng.standard_normal((30, 80))
    y = rng.standard_normal((30, 80))
    assert dsp.ssim(x, x.copy()) == 1.0
    assert dsp.ssim(x, y) == dsp.ssim(y, x)
    frames_1s = dsp.compute_mel(rng.standard_normal(16000), 16000).n_frames
    frames_2s = dsp.compute_mel(rng.standard_normal(32000), 16000).n_frames
    assert frames_1s == (16000 - 800) // 200 + 1 == 77
    assert frames_2s == (32000 - 800) // 200 + 1 == 157
    t = np.arange(32000) / 16000.0
    sine = 0.4 * np.sin(2 * np.pi * 200.0 * t)
    f0s = dsp.extract_f0(sine, 16000).f0
    voiced = f0s[f0s > 0]
    err = float(np.max(np.abs(voiced - 200.0)))
    assert voiced.size == len(f0s) and err <= 2.0
    report(7, "dsp oracles", True,
           f"1000 pitch tracks match brute force, ssim identity/symmetry "
           f"exact, frame formula 77@1s/157@2s, 200 Hz sine off by "
           f"{err:.3f} Hz")


def test_criterion_08_optimizer_and_schedule():
    cfg = OptimizerConfig()
    assert lr_at(4000, cfg) == pytest.approx(1e-3, rel=1e-12)
    assert lr_at(2000, cfg) == pytest.approx(5e-4, rel=1e-12)
    # fast weights coincide with slow weights after every k-th step
    k = 6
    torch.manual_seed(2)
    w = torch.nn.Parameter(torch.randn(8))
    opt = Ranger([w], OptimizerConfig(lookahead_k=k, warmup_steps=1))
    opt.set_lr(1e-2)
    g = torch.Generator().manual_seed(3)
    for step in range(1, 3 * k + 1):
        opt.zero_grad()
        w.grad = torch.randn(8, generator=g)
        opt.step()
        if step % k == 0:
            assert torch.equal(w.detach(), opt.slow[0]), step
        else:
            assert not torch.equal(w.detach(), opt.slow[0]), step
    # quadratic bowl descends overall (sync steps may wiggle locally)
    torch.manual_seed(4)
    target = torch.randn(12)
    v = torch.nn.Parameter(torch.randn(12))
    opt = Ranger([v], OptimizerConfig(warmup_steps=1))
    opt.set_lr(5e-2)
    first = float((0.5 * ((v - target) ** 2).sum()).detach())
    for _ in range(100):
        opt.zero_grad()
        loss = 0.5 * ((v - target) ** 2).sum()
        loss.backward()
        opt.step()
    last = float((0.5 * ((v - target) ** 2).sum()).detach())
    assert last < 0.8 * first
    report(8, "optimizer and schedule", True,
           f"lookahead sync exact at k/2k/3k, lr(2000)=5e-4, lr(4000)=1e-3, "
           f"bowl {first:.2f} -> {last:.2f} in 100 steps")


def test_criterion_09_masking_invariance():
    torch.manual_seed(6)
    model = AcousticModel(AcousticConfig.toy())
    model.eval()
    a = torch.randint(0, 64, (7,))
    b = torch.randint(0, 64, (13,))
    with torch.no_grad():
        enc = model._encode_batch([a, b], [None, None])
        enc_solo = [model.conformer_encode(a), model.conformer_encode(b)]
        f1, f2 = torch.randn(9, 64), torch.randn(17, 64)
        dec = model._decode_batch([f1, f2])
        dec_solo = [model.decode_mel(f1), model.decode_mel(f2)]
    worst = 0.0
    for got, want in zip(enc, enc_solo):
        worst = max(worst, float((got - want).abs().max()))
    for got, want in zip(dec, dec_solo):
        for gb, wb in zip(got.per_block, want.per_block):
            worst = max(worst, float((gb - wb).abs().max()))
    gen = torch.Generator().manual_seed(7)
    items = []
    for n_ph, seed_off in ((4, 0), (7, 1)):
        dur = torch.randint(3, 6, (n_ph,), generator=gen)
        items.append(UtteranceFeatures(
            phone_ids=torch.randint(0, 64, (n_ph,), generator=gen),
            pitch=torch.randn(n_ph, generator=gen),
            durations=dur,
            mel=torch.randn(int(dur.sum()), 80, generator=gen),
            utt_id=f"m{seed_off}",
        ))
    with torch.no_grad():
        outs = model.forward_train(items)
        for i, item in enumerate(items):
            gr = model.gst_reference(item.mel)
            pr = model.prosody_reference(item.mel, item.durations)
            worst = max(worst, float((outs.gst_ref[i] - gr).abs().max()))
            worst = max(worst, float((outs.prosody_ref[i] - pr).abs().max()))
    report(9, "masking and batching invariance", worst <= 1e-5,
           f"encoder/decoder/reference encoders, worst deviation {worst:.2e}")


def test_criterion_10_cse_contract(ws, overfit, tmp_path):
    text = tmp_path / "t.txt"
    text.write_text(
        "La maison dort sous la lune. Il dit « Bonjour tout le monde. »\n",
        encoding="utf-8",
    )
    cfg = {
        "preset": "toy", "seed": 0,
        "paths": {"corpus": str(ws.root / "corpus"),
                  "features": str(ws.root / "features"),
                  "checkpoints": str(ws.root / "ckpt"),
                  "output": str(tmp_path / "o")},
    }
    p = tmp_path / "c.json"
    p.write_text(json.dumps(cfg), encoding="utf-8")
    assert cli.main(["synthesize", "--config", str(p), "--text", str(text),
                     "--mode", "griffinlim", "--dump-features"]) == 0
    narration = np.load(tmp_path / "o" / "features" / "input-0000.npz")
    dialogue = np.load(tmp_path / "o" / "features" / "input-0001.npz")
    nar_zero = (narration["nd_id"] == 0
                and np.array_equal(narration["cse"],
                                   np.zeros_like(narration["cse"])))
    dia_nonzero = dialogue["nd_id"] == 1 and np.abs(dialogue["cse"]).sum() > 0
    # the context stream never exceeds its token budget, center kept whole
    center = UtteranceRecord(
        utt_id="u", chapter_id="c", speaker_id="s",
        text="« " + " ".join(f"mot{i}" for i in range(30)) + " »",
        nd_label=[{"start": 0, "end": 5, "label": "dialogue"}],
        start_s=0.0, end_s=1.0, audio_path="x.wav",
    )
    big = ContextWindow(
        center=center,
        prev=[" ".join(f"avant{j}m{i}" for i in range(40)) for j in range(10)],
        next=[" ".join(f"apres{j}m{i}" for i in range(40)) for j in range(10)],
    )
    stream, lo, hi = _build_cse_stream(big)
    budget_ok = len(stream) <= 256 and hi - lo >= 30
    vec = compute_cse(big, HashEmbedder(dim=16))
    report(10, "cse contract", bool(nar_zero and dia_nonzero and budget_ok
                                    and not vec.is_narration),
           f"narration cse exactly zero, dialogue nonzero, stream "
           f"{len(stream)} <= 256 tokens with center intact")


def test_criterion_11_speaker_adaptation(ws, overfit, tmp_path):
    assert cli.main(["make-toy-corpus", "--out", str(tmp_path / "c3"),
                     "--chapters", "1", "--sentences", "8", "--seed", "7",
                     "--speakers", "spk2"]) == 0
    cfg = {
        "preset": "toy", "seed": 0,
        "paths": {"corpus": str(tmp_path / "c3"),
                  "features": str(tmp_path / "f3"),
                  "checkpoints": str(tmp_path / "k3"),
                  "output": str(tmp_path / "o3")},
    }
    p = tmp_path / "a.json"
    p.write_text(json.dumps(cfg), encoding="utf-8")
    assert cli.main(["prepare", "--config", str(p)]) == 0
    manifest = json.loads(
        (tmp_path / "f3" / "manifest.json").read_text(encoding="utf-8")
    )
    items = load_features(tmp_path / "f3",
                          [r["utt_id"] for r in manifest["utterances"]])
    train_items, val_items = items[:5], items[5:]

    def val_l1(model, speaker_id):
        model.eval()
        vals = []
        with torch.no_grad():
            for it in val_items:
                pred = model.forward_train(
                    [replace_speaker(it, speaker_id)]
                ).mel[0].final
                vals.append(float((pred - it.mel).abs().mean()))
        return float(np.mean(vals))

    payload = load_checkpoint(overfit.ckpt)
    source = AcousticModel(AcousticConfig(**payload["config"]))
    source.load_state_dict(payload["model"])
    unadapted = min(val_l1(source, sid)
                    for sid in range(source.config.n_speakers))
    adapt_cfg = preset_defaults("toy").adapt
    ckpt_path, target_id = run_adapt(overfit.ckpt, train_items, adapt_cfg,
                                     tmp_path / "adapt")
    adapted_payload = load_checkpoint(ckpt_path)
    adapted = AcousticModel(AcousticConfig(**adapted_payload["config"]))
    adapted.load_state_dict(adapted_payload["model"])
    adapted_l1 = val_l1(adapted, target_id)

    emb_ckpt, _ = run_adapt(
        overfit.ckpt, train_items,
        AdaptConfig(mode="embedding", steps=3, lr=1e-3),
        tmp_path / "adapt_emb",
    )
    emb_state = load_checkpoint(emb_ckpt)["model"]
    src_state = payload["model"]
    frozen_ok = True
    for key, tensor in src_state.items():
        if key == "speaker_embedding.weight":
            n = tensor.shape[0]
            frozen_ok &= torch.equal(emb_state[key][:n], tensor)
        else:
            frozen_ok &= torch.equal(emb_state[key], tensor)
    report(11, "speaker adaptation", adapted_l1 < unadapted and frozen_ok,
           f"val mel L1 {unadapted:.3f} -> {adapted_l1:.3f} after "
           f"{adapt_cfg.steps} steps, embedding-only run froze the rest "
           f"bit-exactly")


def test_criterion_12_vocoder(tmp_path):
    rng = np.random.default_rng(5)
    mel = dsp.MelSpec(data=rng.normal(-4.0, 1.0, size=(37, 80)))
    gl_wave = generate(mel, VocoderConfig(mode="griffinlim"))
    cfg = VocoderConfig.toy(mode="gan")
    torch.manual_seed(0)
    gen = Generator(cfg)
    ckpt = vocoder.save_vocoder_checkpoint(tmp_path / "v.pt", gen, None, cfg, 0)
    gan_wave = generate(mel, cfg, ckpt)
    exact = gl_wave.shape == (37 * 300,) and gan_wave.shape == (37 * 300,)

    t = np.arange(int(16000 * 1.2)) / 16000.0
    env = 0.5 + 0.5 * np.sin(2 * np.pi * 2.0 * t)
    speechish = env * (0.4 * np.sin(2 * np.pi * 220.0 * t)
                       + 0.2 * np.sin(2 * np.pi * 440.0 * t)
                       + 0.1 * np.sin(2 * np.pi * 660.0 * t))
    ref = dsp.compute_mel(speechish, 16000)
    back = dsp.compute_mel(
        vocoder.griffin_lim(ref)[: len(speechish)], 16000
    )
    n = min(ref.n_frames, back.n_frames)
    round_trip = float(np.mean(np.abs(ref.data[:n] - back.data[:n])))

    out = finalize(0.3 * np.sin(2 * np.pi * 300.0 * np.arange(24000) / 24000.0))
    peak = float(np.max(np.abs(out)))
    fin_ok = out.shape == (22050,) and abs(peak - 0.95) < 1e-9
    report(12, "vocoder contracts", exact and round_trip < 0.5 and fin_ok,
           f"300 samples/frame exact (both modes), griffin-lim round trip "
           f"{round_trip:.3f} < 0.5, finalize 22.05 kHz peak {peak:.3f}")


def test_criterion_13_homograph_harness(ws):
    corpus = ws.root / "corpus"
    lexicon = load_lexicon(corpus / "lexicon.tsv")
    datasets = corpus / "datasets"
    torch.manual_seed(0)
    embedder = HashEmbedder(dim=32)
    heads, metrics = train_annotation_heads(
        read_conll(datasets / "pos.conll", "pos"),
        read_conll(datasets / "liaison.conll", "liaison"),
        read_conll(datasets / "polyphone.conll", "polyphone"),
        embedder,
        lexicon,
        epochs=60,
        lr=0.05,
        holdout=0.1,
        seed=0,
    )
    assert metrics["polyphone"] == 1.0, metrics
    state = FrontendState(lexicon, embedder, heads)
    testset = load_homograph_testset(datasets / "homographs.jsonl")
    sets = {}
    for item in testset:
        sets.setdefault(item.target_word, []).append(item)
    shape_ok = sorted(len(v) for v in sets.values()) == [5, 5]
    clean = eval_homographs(testset, state)
    planted = list(testset)
    wrong = next(
        list(e.phones)
        for e in lexicon.entries[planted[0].target_word]
        if list(e.phones) != planted[0].expected_phones
    )
    planted[0] = HomographItem(planted[0].sentence, planted[0].target_word,
                               wrong)
    with_error = eval_homographs(planted, state)
    report(13, "homograph harness",
           shape_ok and clean == 1.0 and with_error == 0.9,
           f"two 5-item sets, clean accuracy {clean}, one planted error "
           f"-> {with_error}")
