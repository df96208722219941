"""Vocoder generation, Griffin-Lim fallback, and GAN training tests."""

import csv

import numpy as np
import pytest
import torch

from lecteur import dsp, vocoder
from lecteur.errors import DataError, PipelineError
from lecteur.vocoder import (
    Generator,
    VocoderConfig,
    VocoderSample,
    VocoderTrainConfig,
    finalize,
    generate,
    load_vocoder_checkpoint,
    train_vocoder,
)


def sine(freq, seconds=1.0, sr=16000, amp=0.5):
    t = np.arange(int(seconds * sr)) / sr
    return amp * np.sin(2 * np.pi * freq * t)


def sine_composite(sr=16000):
    t = np.arange(sr) / sr
    return (
        0.4 * np.sin(2 * np.pi * 220 * t)
        + 0.2 * np.sin(2 * np.pi * 660 * t)
        + 0.1 * np.sin(2 * np.pi * 1320 * t)
    )


def speech_like(sr=16000, seed=0):
    rng = np.random.default_rng(seed)
    t = np.arange(sr) / sr
    env = np.clip(np.sin(2 * np.pi * 3 * t), 0, None)
    return env * (
        0.3 * np.sin(2 * np.pi * 150 * t)
        + 0.2 * np.sin(2 * np.pi * 450 * t)
        + 0.05 * rng.normal(size=sr)
    )


def toy_pairs(n=10):
    pairs = []
    for i in range(n):
        t = np.arange(16000) / 16000
        f = 150 + 40 * i
        w16 = 0.4 * np.sin(2 * np.pi * f * t) * (0.5 + 0.5 * np.sin(2 * np.pi * 2 * t))
        mel = dsp.compute_mel(w16)
        w24 = dsp.resample(w16, 16000, 24000)[: 300 * mel.n_frames]
        pairs.append(VocoderSample(wave=w24, sr=24000, mel=mel, utt_id=f"u{i}"))
    return pairs


class TestConfig:
    def test_bad_upsample_product(self):
        with pytest.raises(ValueError, match="300"):
            VocoderConfig(upsample_factors=(5, 5, 4, 4))

    def test_channel_count_mismatch(self):
        with pytest.raises(ValueError, match="channel"):
            VocoderConfig(channels=(32, 16))

    def test_bad_mode(self):
        with pytest.raises(ValueError, match="mode"):
            VocoderConfig(mode="vose")

    def test_bad_discriminators(self):
        with pytest.raises(ValueError, match="discriminator"):
            VocoderConfig(discriminators="full")

    @pytest.mark.parametrize("factors", [(5, 5, 4, 3), (10, 10, 3), (6, 5, 10), (300,)])
    def test_any_factorization_of_300(self, factors):
        cfg = VocoderConfig(
            upsample_factors=factors, channels=tuple([16] * (len(factors) + 1))
        )
        torch.manual_seed(0)
        gen = Generator(cfg)
        out = gen(torch.randn(1, cfg.n_mels, 5))
        assert out.shape == (1, 1, 1500)


class TestGenerate:
    def test_griffinlim_hundred_frames(self):
        rng = np.random.default_rng(0)
        mel = dsp.MelSpec(data=rng.normal(-4, 1, size=(100, 80)))
        wave = generate(mel, VocoderConfig(mode="griffinlim"))
        assert wave.shape == (30000,)
        assert np.all(np.abs(wave) <= 1.0)

    def test_gan_exact_length_and_range(self, tmp_path):
        cfg = VocoderConfig.toy(mode="gan")
        torch.manual_seed(0)
        gen = Generator(cfg)
        ckpt = vocoder.save_vocoder_checkpoint(tmp_path / "v.pt", gen, None, cfg, 0)
        rng = np.random.default_rng(1)
        mel = dsp.MelSpec(data=rng.normal(-4, 1, size=(23, 80)))
        wave = generate(mel, cfg, ckpt)
        assert wave.shape == (23 * 300,)
        assert np.all(np.abs(wave) <= 1.0)

    def test_gan_without_checkpoint_errors(self):
        mel = dsp.MelSpec(data=np.zeros((5, 80)))
        with pytest.raises(PipelineError, match="checkpoint"):
            generate(mel, VocoderConfig(mode="gan"))

    def test_missing_checkpoint_file_errors(self, tmp_path):
        mel = dsp.MelSpec(data=np.zeros((5, 80)))
        with pytest.raises(DataError, match="not found"):
            generate(mel, VocoderConfig(mode="gan"), tmp_path / "ghost.pt")

    def test_griffinlim_440hz_peak(self):
        # 4096-point Welch oracle: the 80-band mel quantizes the tone to a
        # few Hz, so the peak must land in the 440 Hz bin or its neighbor.
        from scipy import signal as sps

        mel = dsp.compute_mel(sine(440))
        wave = generate(mel, VocoderConfig(mode="griffinlim"))
        freqs, pxx = sps.welch(wave, fs=24000, nperseg=4096)
        peak_bin = int(np.argmax(pxx))
        target_bin = int(round(440.0 / freqs[1]))
        assert abs(peak_bin - target_bin) <= 1

    def test_griffinlim_deterministic(self):
        mel = dsp.compute_mel(sine_composite())
        a = generate(mel, VocoderConfig(mode="griffinlim"))
        b = generate(mel, VocoderConfig(mode="griffinlim"))
        assert np.array_equal(a, b)


class TestRoundTrip:
    BOUND = 0.5  # frozen regression bound, log-mel L1

    @pytest.mark.parametrize(
        "wave", [sine_composite(), speech_like(), sine(440)], ids=["composite", "speech", "sine440"]
    )
    def test_mel_round_trip_below_bound(self, wave):
        mel = dsp.compute_mel(wave)
        w24 = generate(mel, VocoderConfig(mode="griffinlim"))
        back = dsp.compute_mel(dsp.resample(w24, 24000, 16000))
        n = min(mel.n_frames, back.n_frames)
        err = float(np.abs(back.data[:n] - mel.data[:n]).mean())
        assert err < self.BOUND


class TestTorchTwins:
    def test_resample_matches_polyphase(self):
        x = sine(1000, sr=24000)
        mine = (
            vocoder.torch_resample_24k_to_16k(
                torch.from_numpy(x).double().reshape(1, 1, -1)
            )
            .numpy()
            .ravel()
        )
        ref = dsp.resample(x, 24000, 16000)
        assert mine.shape == ref.shape
        core = slice(200, -200)  # skip filter edge transients
        assert np.abs(mine[core] - ref[core]).max() < 2e-3

    def test_mel_matches_dsp(self):
        x = speech_like(seed=3)
        got = vocoder.torch_mel16(torch.from_numpy(x).double().unsqueeze(0)).numpy()[0]
        want = dsp.compute_mel(x).data
        assert got.shape == want.shape
        assert np.abs(got - want).max() < 5e-3

    def test_mel_loss_differentiable(self):
        wave = (torch.randn(1, 1, 1200) * 0.1).requires_grad_()
        target = torch.full((1, 4, 80), -4.0)
        loss = vocoder._mel_loss(wave, target)
        loss.backward()
        assert wave.grad is not None
        assert torch.isfinite(wave.grad).all()


class TestTraining:
    def test_pair_validation(self, tmp_path):
        mel = dsp.compute_mel(sine(300))
        bad_sr = VocoderSample(wave=np.zeros(24000), sr=16000, mel=mel, utt_id="x")
        with pytest.raises(DataError, match="sample rate"):
            train_vocoder([bad_sr], VocoderConfig.toy(), VocoderTrainConfig(steps=1), tmp_path)
        bad_mel = VocoderSample(
            wave=np.zeros(24000), sr=24000,
            mel=dsp.MelSpec(data=mel.data, sr=22050), utt_id="y",
        )
        with pytest.raises(DataError, match="feature rate"):
            train_vocoder([bad_mel], VocoderConfig.toy(), VocoderTrainConfig(steps=1), tmp_path)
        with pytest.raises(DataError, match="no vocoder"):
            train_vocoder([], VocoderConfig.toy(), VocoderTrainConfig(steps=1), tmp_path)

    def test_discriminator_smoke_finite(self, tmp_path):
        pairs = toy_pairs(3)
        cfg = VocoderConfig.toy()
        tc = VocoderTrainConfig(steps=2, log_every=1, seed=0)
        train_vocoder(pairs, cfg, tc, tmp_path)
        rows = list(csv.DictReader((tmp_path / "vocoder_metrics.csv").open()))
        assert rows
        for row in rows:
            for key in ("d_loss", "g_adv", "g_fm", "g_mel", "g_total"):
                assert np.isfinite(float(row[key]))

    def test_mel_l1_decreases(self, tmp_path):
        pairs = toy_pairs(10)
        cfg = VocoderConfig.toy()
        tc = VocoderTrainConfig(steps=120, log_every=5, seed=0)
        train_vocoder(pairs, cfg, tc, tmp_path)
        rows = list(csv.DictReader((tmp_path / "vocoder_metrics.csv").open()))
        early = [float(r["g_mel"]) for r in rows if int(r["step"]) <= 10]
        late = [float(r["g_mel"]) for r in rows[-3:]]
        assert np.mean(late) < np.mean(early)

    def test_fine_tune_zero_steps_identical(self, tmp_path):
        pairs = toy_pairs(2)
        cfg = VocoderConfig.toy()
        src = train_vocoder(
            pairs, cfg, VocoderTrainConfig(steps=3, log_every=1, seed=1), tmp_path / "src"
        )
        out = train_vocoder(
            pairs, cfg, VocoderTrainConfig(steps=0, seed=2), tmp_path / "ft",
            fine_tune_from=src,
        )
        a = load_vocoder_checkpoint(src)
        b = load_vocoder_checkpoint(out)
        assert a["generator"].keys() == b["generator"].keys()
        for k in a["generator"]:
            assert torch.equal(a["generator"][k], b["generator"][k]), k
        for k in a["discriminators"]:
            assert torch.equal(a["discriminators"][k], b["discriminators"][k]), k

    def test_mel_only_mode_trains(self, tmp_path):
        pairs = toy_pairs(3)
        cfg = VocoderConfig.toy(discriminators="none")
        tc = VocoderTrainConfig(steps=4, log_every=1, seed=0)
        ckpt = train_vocoder(pairs, cfg, tc, tmp_path)
        payload = load_vocoder_checkpoint(ckpt)
        assert payload["discriminators"] is None
        assert payload["step"] == 4


class TestFinalize:
    def test_length_and_peak(self):
        wave = sine(440, sr=24000)
        out = finalize(wave)
        assert out.shape == (22050,)
        assert float(np.max(np.abs(out))) == pytest.approx(0.95, abs=1e-12)

    def test_silence_passes_through(self):
        out = finalize(np.zeros(24000))
        assert out.shape == (22050,)
        assert np.all(out == 0.0)

    def test_peak_is_exact_for_quiet_input(self):
        out = finalize(0.001 * sine(200, sr=24000))
        assert float(np.max(np.abs(out))) == pytest.approx(0.95, abs=1e-12)
