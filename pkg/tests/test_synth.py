"""Dataset synthesis: clip prep, SNR mixing, mixture assembly, full builds."""

import json
import math
import re
from pathlib import Path

import numpy as np
import pytest
from scipy.io import wavfile

from conftest import write_hrir_grid
from biseld.errors import BiseldError
from biseld.hrtf import HrirPair
from biseld.metrics import read_label_csv
from biseld.synth import (DEFAULT_CLASSES, BinauralClip, EventLabel,
                          SynthConfig, build_dataset, build_mixture,
                          class_prefix, mix_at_snr, read_wav, resample,
                          spatialize, write_label_csv, write_wav)

FS = 2000.0
SEG = 0.5
SEG_N = int(SEG * FS)


def micro_config(**overrides) -> SynthConfig:
    base = dict(fs=FS, classes=("Alarm", "Dog"), samples_per_class=4,
                split=(2, 1, 1), azimuths=(0.0, 90.0), elevations=(0.0,),
                segment_s=SEG, mixture_s=1.0, seed=7, hrir_fs=FS)
    base.update(overrides)
    return SynthConfig(**base)


def write_event_wavs(event_dir: Path, prefix: str, count: int,
                     n_samples: int, freq_hz: float) -> None:
    event_dir.mkdir(parents=True, exist_ok=True)
    t = np.arange(n_samples) / FS
    for i in range(count):
        tone = 0.5 * np.sin(2.0 * math.pi * (freq_hz + 25.0 * i) * t)
        pcm = np.round(tone * 32767.0).astype(np.int16)
        wavfile.write(str(event_dir / f"{prefix}{i}.wav"), int(FS), pcm)


@pytest.fixture()
def dataset_dirs(tmp_path):
    events = tmp_path / "events"
    write_event_wavs(events, "alarm", 4, 1200, 150.0)  # longer than a segment
    write_event_wavs(events, "dog", 4, 800, 310.0)     # shorter, gets padded
    hrirs = tmp_path / "hrirs"
    write_hrir_grid(hrirs, [0.0, 90.0], [0.0], fs=FS)
    noise = tmp_path / "noise"
    noise.mkdir()
    rng = np.random.default_rng(99)
    hiss = (rng.normal(scale=0.1, size=(6000, 2)) * 32767.0).astype(np.int16)
    wavfile.write(str(noise / "street.wav"), int(FS), hiss)
    return events, noise, hrirs


# --- naming ---------------------------------------------------------------

def test_class_prefix_lowercases_and_drops_spaces():
    assert class_prefix("Female Scream") == "femalescream"
    assert class_prefix("Dog") == "dog"


def test_default_class_prefixes_are_unique():
    prefixes = [class_prefix(name) for name in DEFAULT_CLASSES]
    assert len(DEFAULT_CLASSES) == 12
    assert len(set(prefixes)) == len(prefixes)


# --- config validation ----------------------------------------------------

def test_config_split_must_sum_to_samples_per_class():
    with pytest.raises(BiseldError, match="split"):
        micro_config(split=(2, 1, 2))


def test_config_mixture_length_must_cover_all_classes():
    with pytest.raises(BiseldError, match="mixture_s"):
        micro_config(mixture_s=1.5)


def test_config_segment_must_align_to_label_frames():
    with pytest.raises(BiseldError, match="segment_s"):
        micro_config(segment_s=0.55, mixture_s=1.1)


def test_config_json_round_trip(tmp_path):
    config = micro_config(snr_db=10.0)
    path = tmp_path / "synth.json"
    path.write_text(json.dumps(config.to_dict()))
    assert SynthConfig.from_json(path) == config


def test_config_rejects_unknown_field(tmp_path):
    path = tmp_path / "synth.json"
    path.write_text(json.dumps({"loudness": 3}))
    with pytest.raises(BiseldError, match="loudness"):
        SynthConfig.from_json(path)


# --- resampling and spatialization ----------------------------------------

def test_resample_is_identity_at_matching_rates(rng):
    x = rng.normal(size=257)
    np.testing.assert_array_equal(resample(x, 32000.0, 32000.0), x)


def test_resample_scales_length_by_rate_ratio(rng):
    x = rng.normal(size=400)
    assert resample(x, 2000.0, 1000.0).size == 200
    assert resample(x, 2000.0, 3000.0).size == 600


def test_resample_preserves_inband_tone():
    t = np.arange(2000) / 2000.0
    tone = np.sin(2.0 * math.pi * 100.0 * t)
    up = resample(tone, 2000.0, 4000.0)
    t_up = np.arange(up.size) / 4000.0
    mid = slice(400, up.size - 400)  # ignore filter edge ringing
    np.testing.assert_allclose(up[mid], np.sin(2.0 * math.pi * 100.0 * t_up)[mid],
                               atol=5e-3)


def test_resample_rejects_nonpositive_rates():
    with pytest.raises(BiseldError, match="positive"):
        resample(np.zeros(8), 0.0, 1000.0)


def test_spatialize_impulse_hrirs_pass_signal_through(rng):
    mono = rng.normal(size=300)
    impulse = np.zeros(32)
    impulse[0] = 1.0
    pair = HrirPair(impulse, impulse, FS)
    out = spatialize(mono, pair, FS)
    assert out.shape == (2, 300)
    np.testing.assert_allclose(out[0], mono, atol=1e-12)
    np.testing.assert_allclose(out[1], mono, atol=1e-12)


def test_spatialize_applies_per_ear_delay_and_gain(rng):
    mono = rng.normal(size=300)
    left = np.zeros(32)
    left[3] = 1.0
    right = np.zeros(32)
    right[0] = 0.5
    out = spatialize(mono, HrirPair(left, right, FS), FS)
    np.testing.assert_allclose(out[0][3:], mono[:-3], atol=1e-12)
    np.testing.assert_allclose(out[1], 0.5 * mono, atol=1e-12)


def test_spatialize_rejects_rate_mismatch():
    pair = HrirPair(np.zeros(8), np.zeros(8), 48000.0)
    with pytest.raises(BiseldError, match="does not match"):
        spatialize(np.zeros(16), pair, FS)


# --- SNR mixing -----------------------------------------------------------

@pytest.mark.parametrize("snr_db", [10.0, 0.0, -5.0])
def test_mix_at_snr_hits_target(rng, snr_db):
    event = rng.normal(size=(2, 500))
    noise = rng.normal(scale=0.3, size=(2, 500))
    mixed = mix_at_snr(event, noise, snr_db)
    scaled_event = mixed - noise
    achieved = 20.0 * math.log10(
        np.sqrt(np.mean(scaled_event ** 2)) / np.sqrt(np.mean(noise ** 2)))
    assert achieved == pytest.approx(snr_db, abs=1e-9)


def test_mix_at_snr_leaves_noise_untouched(rng):
    event = rng.normal(size=(2, 100))
    noise = rng.normal(size=(2, 100))
    mixed = mix_at_snr(event, noise, 0.0)
    ratio = (mixed - noise) / event
    np.testing.assert_allclose(ratio, ratio[0, 0], atol=1e-9)


def test_mix_at_snr_rejects_silent_inputs(rng):
    live = rng.normal(size=(2, 64))
    with pytest.raises(BiseldError, match="event has zero power"):
        mix_at_snr(np.zeros((2, 64)), live, 0.0)
    with pytest.raises(BiseldError, match="noise has zero power"):
        mix_at_snr(live, np.zeros((2, 64)), 0.0)


def test_mix_at_snr_rejects_shape_mismatch(rng):
    with pytest.raises(BiseldError, match="shape mismatch"):
        mix_at_snr(rng.normal(size=(2, 64)), rng.normal(size=(2, 65)), 0.0)


# --- mixture assembly -----------------------------------------------------

def constant_clip(class_idx: int, value: float, azimuth: float = 0.0,
                  elevation: float = 0.0) -> BinauralClip:
    return BinauralClip(np.full((2, SEG_N), value), class_idx, azimuth, elevation)


def test_build_mixture_places_classes_into_their_slots():
    clips = [constant_clip(0, 1.0, azimuth=90.0), constant_clip(1, 2.0)]
    audio, labels = build_mixture(clips, FS, SEG, slot_order=(1, 0))
    # class 0 lands in slot 1, class 1 in slot 0; no normalization here
    np.testing.assert_array_equal(audio[:, :SEG_N], 2.0)
    np.testing.assert_array_equal(audio[:, SEG_N:], 1.0)
    assert audio.shape == (2, 2 * SEG_N)

    fps = int(SEG * 10)
    assert [e.class_idx for e in labels[:fps]] == [1] * fps
    assert [e.class_idx for e in labels[fps:]] == [0] * fps
    assert [e.frame_ds for e in labels] == list(range(2 * fps))
    assert labels[fps].azimuth_deg == 90.0


def test_build_mixture_labels_are_frame_sorted(rng):
    clips = [constant_clip(i, 1.0 + i) for i in range(3)]
    _, labels = build_mixture(clips, FS, SEG, slot_order=(2, 0, 1),
                              rng=rng)
    keys = [(e.frame_ds, e.class_idx) for e in labels]
    assert keys == sorted(keys)
    # slot 0 holds class 1, slot 1 holds class 2, slot 2 holds class 0
    assert labels[0].class_idx == 1
    assert labels[-1].class_idx == 0


def test_build_mixture_requires_one_clip_per_class():
    with pytest.raises(BiseldError, match="one clip per class"):
        build_mixture([constant_clip(0, 1.0), constant_clip(0, 2.0)], FS, SEG)


def test_build_mixture_rejects_wrong_clip_shape():
    short = BinauralClip(np.zeros((2, SEG_N - 1)), 0, 0.0, 0.0)
    with pytest.raises(BiseldError, match="expected \\(2,"):
        build_mixture([short], FS, SEG)


def test_build_mixture_rejects_bad_slot_order():
    clips = [constant_clip(0, 1.0), constant_clip(1, 2.0)]
    with pytest.raises(BiseldError, match="slot_order"):
        build_mixture(clips, FS, SEG, slot_order=(0, 0))


def test_build_mixture_noise_requires_snr(rng):
    clips = [constant_clip(0, 1.0)]
    noise = rng.normal(size=(2, SEG_N))
    with pytest.raises(BiseldError, match="snr"):
        build_mixture(clips, FS, SEG, slot_order=(0,), noise=noise)
    with pytest.raises(BiseldError, match="noise shape"):
        build_mixture(clips, FS, SEG, slot_order=(0,),
                      noise=rng.normal(size=(2, SEG_N + 1)), snr_db=0.0)


def test_build_mixture_scales_each_slot_against_its_noise(rng):
    clips = [constant_clip(0, 1.0), constant_clip(1, 2.0)]
    noise = rng.normal(scale=0.2, size=(2, 2 * SEG_N))
    noise[:, SEG_N:] *= 4.0  # second slot is noisier
    audio, _ = build_mixture(clips, FS, SEG, slot_order=(0, 1),
                             noise=noise, snr_db=6.0)
    for lo in (0, SEG_N):
        span = slice(lo, lo + SEG_N)
        event_part = audio[:, span] - noise[:, span]
        achieved = 20.0 * math.log10(
            np.sqrt(np.mean(event_part ** 2)) / np.sqrt(np.mean(noise[:, span] ** 2)))
        assert achieved == pytest.approx(6.0, abs=1e-9)


# --- wav and label IO -----------------------------------------------------

def test_write_wav_normalizes_to_headroom(tmp_path, rng):
    audio = rng.normal(size=(2, 400))
    audio[0, 10] = 4.0  # known peak
    path = tmp_path / "mix.wav"
    scale = write_wav(path, audio, FS)
    assert scale == pytest.approx(10.0 ** (-1.0 / 20.0) / 4.0)
    back, fs = read_wav(path)
    assert fs == FS
    assert np.max(np.abs(back)) == pytest.approx(10.0 ** (-1.0 / 20.0),
                                                 abs=2.0 / 32768.0)
    np.testing.assert_allclose(back, audio * scale, atol=1.0 / 32768.0)


def test_write_wav_on_silence_keeps_unit_scale(tmp_path):
    assert write_wav(tmp_path / "still.wav", np.zeros((2, 64)), FS) == 1.0


def test_read_wav_duplicates_mono(tmp_path):
    pcm = (np.linspace(-0.5, 0.5, 64) * 32767.0).astype(np.int16)
    wavfile.write(str(tmp_path / "mono.wav"), int(FS), pcm)
    audio, _ = read_wav(tmp_path / "mono.wav")
    assert audio.shape == (2, 64)
    np.testing.assert_array_equal(audio[0], audio[1])


def test_read_wav_rejects_multichannel(tmp_path):
    pcm = np.zeros((64, 4), dtype=np.int16)
    wavfile.write(str(tmp_path / "quad.wav"), int(FS), pcm)
    with pytest.raises(BiseldError, match="mono or stereo"):
        read_wav(tmp_path / "quad.wav")


def test_read_wav_missing_file(tmp_path):
    with pytest.raises(BiseldError, match="no such file"):
        read_wav(tmp_path / "absent.wav")


def test_read_wav_checks_expected_rate(tmp_path):
    wavfile.write(str(tmp_path / "slow.wav"), 1000, np.zeros(32, dtype=np.int16))
    with pytest.raises(BiseldError, match="expected 2000"):
        read_wav(tmp_path / "slow.wav", expect_fs=FS)


def test_label_csv_round_trip(tmp_path):
    labels = [EventLabel(3, 1, 90.0, -30.0), EventLabel(0, 0, 0.0, 0.0),
              EventLabel(3, 0, 270.0, 60.0)]
    path = tmp_path / "labels.csv"
    write_label_csv(labels, path)
    lines = path.read_text().strip().split("\n")
    assert lines[0] == "0,0,0,0"  # frame-sorted integer rows
    assert lines[1] == "3,0,270,60"
    assert lines[2] == "3,1,90,-30"
    events = read_label_csv(path)
    assert events.n_frames == 4
    assert sorted(c for c, _ in events.at(3)) == [0, 1]


# --- full builds ----------------------------------------------------------

def test_build_dataset_micro_counts_and_names(tmp_path, dataset_dirs):
    events, _, hrirs = dataset_dirs
    out = tmp_path / "out"
    manifest = build_dataset(micro_config(), events, None, out, hrirs)

    assert manifest["counts"] == {"train": 4, "valid": 2, "test": 2,
                                  "test-h": 2, "test-v": 1}
    expected = {
        "train/train_mix001.wav", "train/train_mix002.wav",
        "train/train_mix003.wav", "train/train_mix004.wav",
        "valid/valid_mix001.wav", "valid/valid_mix002.wav",
        "test/test_mix001.wav", "test/test_mix002.wav",
        "test-h/test-a000e+00_mix1.wav", "test-h/test-a090e+00_mix1.wav",
        "test-v/test-a000e+00_mix1.wav",
    }
    assert set(manifest["files"]) == expected
    for rel in expected:
        assert (out / rel).exists()
        assert (out / rel).with_suffix(".csv").exists()
    assert (out / "manifest.json").exists()


def test_build_dataset_micro_labels(tmp_path, dataset_dirs):
    events, _, hrirs = dataset_dirs
    out = tmp_path / "out"
    manifest = build_dataset(micro_config(), events, None, out, hrirs)
    for rel, record in manifest["files"].items():
        rows = [line.split(",") for line in
                (out / record["labels"]).read_text().strip().split("\n")]
        assert all(len(r) == 4 for r in rows)
        frames = sorted(int(r[0]) for r in rows)
        assert frames == list(range(10))  # 1 s mixture, two 0.5 s slots
        for _, cls, az, el in rows:
            assert int(cls) in (0, 1)
            assert int(az) in (0, 90)
            assert int(el) == 0


def test_build_dataset_train_covers_every_sample_direction_combo(tmp_path,
                                                                 dataset_dirs):
    events, _, hrirs = dataset_dirs
    manifest = build_dataset(micro_config(), events, None, tmp_path / "out", hrirs)
    seen: dict[int, set] = {0: set(), 1: set()}
    for rel, record in manifest["files"].items():
        if not rel.startswith("train/"):
            continue
        for clip in record["clips"]:
            seen[clip["class"]].add((clip["sample"], clip["azimuth"]))
    train_samples = manifest["samples"]["train"]
    assert len(train_samples["Alarm"]) == 2
    for idx, name in ((0, "Alarm"), (1, "Dog")):
        combos = {(s, az) for s in train_samples[name] for az in (0.0, 90.0)}
        assert seen[idx] == combos


def test_build_dataset_sweeps_pin_the_other_angle(tmp_path, dataset_dirs):
    events, _, hrirs = dataset_dirs
    manifest = build_dataset(micro_config(), events, None, tmp_path / "out", hrirs)
    for rel, record in manifest["files"].items():
        split = rel.split("/")[0]
        if split == "test-h":
            assert all(c["elevation"] == 0.0 for c in record["clips"])
            stem_az = int(re.match(r"test-a(\d{3})e", Path(rel).name).group(1))
            assert all(c["azimuth"] == stem_az for c in record["clips"])
        elif split == "test-v":
            assert all(c["azimuth"] == 0.0 for c in record["clips"])


def test_build_dataset_is_deterministic(tmp_path, dataset_dirs):
    events, _, hrirs = dataset_dirs
    first, second = tmp_path / "a", tmp_path / "b"
    build_dataset(micro_config(), events, None, first, hrirs)
    build_dataset(micro_config(), events, None, second, hrirs)
    assert ((first / "manifest.json").read_bytes()
            == (second / "manifest.json").read_bytes())
    rel = "train/train_mix001.wav"
    assert (first / rel).read_bytes() == (second / rel).read_bytes()


def test_build_dataset_workers_match_serial(tmp_path, dataset_dirs):
    events, _, hrirs = dataset_dirs
    serial, parallel = tmp_path / "s", tmp_path / "p"
    build_dataset(micro_config(), events, None, serial, hrirs, workers=1)
    build_dataset(micro_config(), events, None, parallel, hrirs, workers=3)
    assert ((serial / "manifest.json").read_bytes()
            == (parallel / "manifest.json").read_bytes())
    for rel in ("valid/valid_mix002.wav", "test-v/test-a000e+00_mix1.csv"):
        assert (serial / rel).read_bytes() == (parallel / rel).read_bytes()


def test_build_dataset_noise_variant_names_and_records(tmp_path, dataset_dirs):
    events, noise, hrirs = dataset_dirs
    out = tmp_path / "out"
    manifest = build_dataset(micro_config(snr_db=10.0), events, noise, out, hrirs)
    assert manifest["counts"]["train"] == 4
    assert "train/train_street_mix001.wav" in manifest["files"]
    assert "test-h/test-a090e+00_street_mix1.wav" in manifest["files"]
    for record in manifest["files"].values():
        assert record["noise"]["file"] == "street"
        assert record["noise"]["offset"] >= 0


def test_build_dataset_noise_requires_directory(tmp_path, dataset_dirs):
    events, _, hrirs = dataset_dirs
    with pytest.raises(BiseldError, match="noise directory"):
        build_dataset(micro_config(snr_db=10.0), events, None,
                      tmp_path / "out", hrirs)


def test_build_dataset_reports_short_classes(tmp_path, dataset_dirs):
    events, _, hrirs = dataset_dirs
    (events / "dog3.wav").unlink()
    with pytest.raises(BiseldError, match="'Dog' has 3"):
        build_dataset(micro_config(), events, None, tmp_path / "out", hrirs)


def test_build_dataset_reports_missing_hrir(tmp_path, dataset_dirs):
    events, _, hrirs = dataset_dirs
    (hrirs / "a090e+00.txt").unlink()
    with pytest.raises(BiseldError, match="missing HRIR"):
        build_dataset(micro_config(), events, None, tmp_path / "out", hrirs)


def test_event_inventory_sorts_numerically(tmp_path, dataset_dirs):
    events, _, hrirs = dataset_dirs
    # numeric sort keeps 0,1,2 ahead of 10 (lexicographic would pick 10)
    write_event_wavs(events, "alarm", 1, 1000, 500.0)
    (events / "alarm0.wav").rename(events / "alarm10.wav")
    write_event_wavs(events, "alarm", 3, 1000, 150.0)
    (events / "dog3.wav").unlink()
    config = micro_config(samples_per_class=3, split=(1, 1, 1))
    manifest = build_dataset(config, events, None, tmp_path / "out", hrirs)
    used = set()
    for split_view in manifest["samples"].values():
        used.update(split_view["Alarm"])
    assert used == {"alarm0.wav", "alarm1.wav", "alarm2.wav"}
