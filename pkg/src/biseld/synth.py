"""Binaural dataset synthesis.

Sound-event clips are resampled, convolved with a measured HRIR for one
of the 48 grid directions (12 azimuths x 4 elevations), placed into
twelve consecutive 5-second slots of a 60-second mixture, optionally
mixed over background noise at a target SNR, and written as stereo WAV
plus a deci-second label CSV. Counts follow a 14:3:3 per-class sample
split: every (sample, direction) combination is used exactly once, so
the clean set holds 672/144/144 train/valid/test mixtures plus 36
horizontal-plane and 12 median-plane single-direction test files.

All randomness comes from one seeded generator that draws the complete
plan up front; rendering is a pure function of the plan, so outputs and
the manifest are reproducible byte for byte.
"""

from __future__ import annotations

import json
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

import numpy as np
from scipy.io import wavfile
from scipy.signal import fftconvolve, resample_poly

from .errors import BiseldError
from .hrtf import Direction, HrirPair, direction_to_filename, load_hrir_pair

DEFAULT_CLASSES = ("Alarm", "Baby", "Cough", "Crash", "Dog", "Female Scream",
                   "Female Speech", "Fire", "Knock", "Male Scream",
                   "Male Speech", "Phone")

PEAK_DBFS = -1.0  # headroom left when normalizing a mixture


def class_prefix(name: str) -> str:
    return name.lower().replace(" ", "")


@dataclass(frozen=True)
class EventLabel:
    frame_ds: int  # deci-second index
    class_idx: int
    azimuth_deg: float
    elevation_deg: float


@dataclass(frozen=True)
class SynthConfig:
    fs: float = 32000.0
    classes: tuple[str, ...] = DEFAULT_CLASSES
    samples_per_class: int = 20
    split: tuple[int, int, int] = (14, 3, 3)  # train/valid/test
    azimuths: tuple[float, ...] = tuple(range(0, 360, 30))
    elevations: tuple[float, ...] = (-30.0, 0.0, 30.0, 60.0)
    segment_s: float = 5.0
    mixture_s: float = 60.0
    snr_db: float | None = None
    seed: int = 0
    hrir_fs: float = 48000.0

    def __post_init__(self) -> None:
        if self.fs <= 0 or self.hrir_fs <= 0:
            raise BiseldError("sample rates must be positive", field="fs")
        if sum(self.split) != self.samples_per_class:
            raise BiseldError(
                f"split {self.split} does not sum to samples_per_class "
                f"({self.samples_per_class})", field="split")
        if abs(self.mixture_s - len(self.classes) * self.segment_s) > 1e-9:
            raise BiseldError(
                f"mixture_s ({self.mixture_s}) must equal "
                f"{len(self.classes)} x segment_s ({self.segment_s})",
                field="mixture_s")
        fps = self.segment_s * 10.0
        if abs(fps - round(fps)) > 1e-9:
            raise BiseldError("segment_s must be a whole number of deci-seconds",
                              field="segment_s")

    @property
    def segment_samples(self) -> int:
        return int(round(self.segment_s * self.fs))

    @property
    def frames_per_segment(self) -> int:
        return int(round(self.segment_s * 10.0))

    def directions(self) -> list[Direction]:
        return [Direction(az, el) for az in self.azimuths for el in self.elevations]

    @classmethod
    def from_json(cls, path) -> "SynthConfig":
        try:
            raw = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise BiseldError(f"invalid JSON: {exc.msg}", path=str(path),
                              line=exc.lineno) from exc
        if not isinstance(raw, dict):
            raise BiseldError("config must be a JSON object", path=str(path))
        known = set(cls.__dataclass_fields__)
        unknown = set(raw) - known
        if unknown:
            raise BiseldError(f"unknown config fields: {sorted(unknown)}",
                              path=str(path), field=sorted(unknown)[0])
        for key in ("classes", "split", "azimuths", "elevations"):
            if key in raw:
                raw[key] = tuple(raw[key])
        return cls(**raw)

    def to_dict(self) -> dict:
        return {"fs": self.fs, "classes": list(self.classes),
                "samples_per_class": self.samples_per_class,
                "split": list(self.split), "azimuths": list(self.azimuths),
                "elevations": list(self.elevations), "segment_s": self.segment_s,
                "mixture_s": self.mixture_s, "snr_db": self.snr_db,
                "seed": self.seed, "hrir_fs": self.hrir_fs}


def resample(x, fs_in: float, fs_out: float = 32000.0) -> np.ndarray:
    """Band-limited polyphase resampling; identity when the rates match."""
    if fs_in <= 0 or fs_out <= 0:
        raise BiseldError("sample rates must be positive")
    x = np.asarray(x, dtype=float)
    if fs_in == fs_out:
        return x
    ratio = Fraction(int(round(fs_out)), int(round(fs_in)))
    return resample_poly(x, ratio.numerator, ratio.denominator, axis=-1)


def spatialize(mono, hrir: HrirPair, fs: float) -> np.ndarray:
    """Convolve a mono clip with both HRIR ears; output keeps the input length."""
    if hrir.fs != fs:
        raise BiseldError(f"HRIR rate {hrir.fs} Hz does not match signal rate {fs} Hz")
    mono = np.asarray(mono, dtype=float).ravel()
    n = mono.size
    left = fftconvolve(mono, hrir.left)[:n]
    right = fftconvolve(mono, hrir.right)[:n]
    return np.stack([left, right])


def _joint_rms(x: np.ndarray) -> float:
    return float(np.sqrt(np.mean(np.square(x))))


def mix_at_snr(event: np.ndarray, noise: np.ndarray, snr_db: float) -> np.ndarray:
    """Scale the event so its joint-channel rms sits snr_db above the noise."""
    event = np.asarray(event, dtype=float)
    noise = np.asarray(noise, dtype=float)
    if event.shape != noise.shape:
        raise BiseldError(f"shape mismatch: event {event.shape} vs noise {noise.shape}")
    rms_e = _joint_rms(event)
    rms_n = _joint_rms(noise)
    if rms_e == 0.0:
        raise BiseldError("event has zero power; SNR scaling undefined")
    if rms_n == 0.0:
        raise BiseldError("noise has zero power; SNR scaling undefined")
    gain = rms_n / rms_e * 10.0 ** (snr_db / 20.0)
    return event * gain + noise


@dataclass(frozen=True)
class BinauralClip:
    audio: np.ndarray  # (2, segment samples)
    class_idx: int
    azimuth_deg: float
    elevation_deg: float


def build_mixture(clips: list[BinauralClip], fs: float, segment_s: float,
                  slot_order=None, noise: np.ndarray | None = None,
                  snr_db: float | None = None,
                  rng: np.random.Generator | None = None
                  ) -> tuple[np.ndarray, list[EventLabel]]:
    """Place one clip per class into shuffled consecutive slots.

    Without noise the result is the bare concatenation of the placed
    clips (no normalization here; that happens at write time). With
    noise, each slot's clip is SNR-scaled against its own noise span.
    """
    n_slots = len(clips)
    classes = sorted(c.class_idx for c in clips)
    if classes != list(range(n_slots)):
        raise BiseldError(
            f"need exactly one clip per class 0..{n_slots - 1}, got {classes}")
    seg_n = int(round(segment_s * fs))
    for c in clips:
        if c.audio.shape != (2, seg_n):
            raise BiseldError(
                f"clip for class {c.class_idx} has shape {c.audio.shape}, "
                f"expected (2, {seg_n})")
    if slot_order is None:
        if rng is None:
            rng = np.random.default_rng(0)
        slot_order = rng.permutation(n_slots)
    slot_order = [int(s) for s in slot_order]
    if sorted(slot_order) != list(range(n_slots)):
        raise BiseldError(f"slot_order must permute 0..{n_slots - 1}")
    total = n_slots * seg_n
    if noise is not None:
        noise = np.asarray(noise, dtype=float)
        if noise.shape != (2, total):
            raise BiseldError(f"noise shape {noise.shape}, expected (2, {total})")
        if snr_db is None:
            raise BiseldError("noise given without an SNR target", field="snr_db")
    out = np.zeros((2, total))
    labels: list[EventLabel] = []
    fps = int(round(segment_s * 10.0))
    by_class = sorted(clips, key=lambda c: c.class_idx)
    for class_idx, slot in enumerate(slot_order):
        clip = by_class[class_idx]
        lo, hi = slot * seg_n, (slot + 1) * seg_n
        if noise is None:
            out[:, lo:hi] = clip.audio
        else:
            out[:, lo:hi] = mix_at_snr(clip.audio, noise[:, lo:hi], snr_db)
        for k in range(fps):
            labels.append(EventLabel(slot * fps + k, clip.class_idx,
                                     clip.azimuth_deg, clip.elevation_deg))
    labels.sort(key=lambda e: (e.frame_ds, e.class_idx))
    return out, labels


def write_label_csv(labels, path) -> None:
    """Header-less rows `frame,class,azimuth,elevation`, all integers."""
    rows = sorted(labels, key=lambda e: (e.frame_ds, e.class_idx))
    lines = [f"{e.frame_ds},{e.class_idx},{int(round(e.azimuth_deg))},"
             f"{int(round(e.elevation_deg))}" for e in rows]
    Path(path).write_text("".join(line + "\n" for line in lines))


def write_wav(path, audio: np.ndarray, fs: float) -> float:
    """Peak-normalize to the headroom target and write 16-bit PCM stereo.

    Returns the applied scale factor (recorded in the manifest).
    """
    peak = float(np.max(np.abs(audio)))
    scale = 10.0 ** (PEAK_DBFS / 20.0) / peak if peak > 0.0 else 1.0
    scaled = np.clip(audio * scale, -1.0, 1.0)
    pcm = np.round(scaled.T * 32767.0).astype(np.int16)
    wavfile.write(str(path), int(round(fs)), pcm)
    return scale


def read_wav(path, expect_fs: float | None = None) -> tuple[np.ndarray, float]:
    """Read a WAV as float (2, n) in [-1, 1]; mono becomes two equal channels."""
    try:
        fs, data = wavfile.read(str(path))
    except FileNotFoundError:
        raise BiseldError("no such file", path=str(path)) from None
    except ValueError as exc:
        raise BiseldError(f"unreadable WAV: {exc}", path=str(path)) from exc
    if data.dtype == np.int16:
        audio = data.astype(float) / 32768.0
    elif data.dtype == np.int32:
        audio = data.astype(float) / 2147483648.0
    elif data.dtype == np.uint8:
        audio = (data.astype(float) - 128.0) / 128.0
    else:
        audio = data.astype(float)
    if audio.ndim == 1:
        audio = np.stack([audio, audio])
    else:
        audio = audio.T
    if audio.shape[0] > 2:
        raise BiseldError(f"expected mono or stereo, got {audio.shape[0]} channels",
                          path=str(path))
    if audio.shape[0] == 1:
        audio = np.vstack([audio, audio])
    if expect_fs is not None and fs != expect_fs:
        raise BiseldError(f"sample rate {fs} Hz, expected {expect_fs} Hz",
                          path=str(path))
    return audio, float(fs)


@dataclass(frozen=True)
class _PlannedMixture:
    split: str  # train/valid/test/test-h/test-v
    stem: str  # file name without extension
    clips: tuple  # (class_idx, sample_name, Direction) triples
    slot_order: tuple
    noise_name: str | None
    noise_offset: int


def _inventory_events(event_dir: Path, config: SynthConfig) -> dict[int, list[str]]:
    files: dict[int, list[str]] = {}
    for idx, name in enumerate(config.classes):
        prefix = class_prefix(name)
        pattern = re.compile(re.escape(prefix) + r"(\d+)\.wav$")
        found = []
        for p in sorted(event_dir.iterdir()):
            m = pattern.fullmatch(p.name)
            if m:
                found.append((int(m.group(1)), p.name))
        if len(found) < config.samples_per_class:
            raise BiseldError(
                f"class {name!r} has {len(found)} clips under {event_dir}, "
                f"need {config.samples_per_class}", field=prefix)
        found.sort()
        files[idx] = [name for _, name in found[:config.samples_per_class]]
    return files


def _load_hrirs(hrir_dir: Path, config: SynthConfig) -> dict[Direction, HrirPair]:
    pairs = {}
    for direction in config.directions():
        path = hrir_dir / direction_to_filename(direction)
        if not path.exists():
            raise BiseldError("missing HRIR for the direction grid", path=str(path))
        raw = load_hrir_pair(path, config.hrir_fs)
        left = resample(raw.left, config.hrir_fs, config.fs)
        right = resample(raw.right, config.hrir_fs, config.fs)
        pairs[direction] = HrirPair(left, right, config.fs)
    return pairs


def _prepare_clip(path: Path, config: SynthConfig) -> np.ndarray:
    audio, fs = read_wav(path)
    mono = audio.mean(axis=0)
    mono = resample(mono, fs, config.fs)
    n = config.segment_samples
    if mono.size >= n:
        return mono[:n]
    return np.concatenate([mono, np.zeros(n - mono.size)])


def _plan(config: SynthConfig, events: dict[int, list[str]],
          noise_names: list[str]) -> list[_PlannedMixture]:
    rng = np.random.default_rng(config.seed)
    n_classes = len(config.classes)
    directions = config.directions()
    n_train, n_valid, n_test = config.split

    split_samples: dict[str, dict[int, list[str]]] = {"train": {}, "valid": {}, "test": {}}
    for idx in range(n_classes):
        order = list(rng.permutation(config.samples_per_class))
        names = events[idx]
        split_samples["train"][idx] = [names[i] for i in order[:n_train]]
        split_samples["valid"][idx] = [names[i] for i in order[n_train:n_train + n_valid]]
        split_samples["test"][idx] = [names[i] for i in order[n_train + n_valid:]]

    def draw_noise() -> tuple[str | None, int]:
        if config.snr_db is None:
            return None, 0
        name = noise_names[int(rng.integers(len(noise_names)))]
        return name, int(rng.integers(2 ** 31))

    plans: list[_PlannedMixture] = []
    for split in ("train", "valid", "test"):
        pools = {}
        for idx in range(n_classes):
            combos = [(s, d) for s in split_samples[split][idx] for d in directions]
            pools[idx] = [combos[i] for i in rng.permutation(len(combos))]
        n_mix = len(pools[0])
        for m in range(n_mix):
            clips = tuple((idx, pools[idx][m][0], pools[idx][m][1])
                          for idx in range(n_classes))
            slot_order = tuple(int(s) for s in rng.permutation(n_classes))
            noise_name, offset = draw_noise()
            tag = f"_{noise_name}" if noise_name else ""
            plans.append(_PlannedMixture(split, f"{split}{tag}_mix{m + 1:03d}",
                                         clips, slot_order, noise_name, offset))

    # single-direction checks: every class plays the n-th test sample from
    # one fixed direction per file
    for direction in [Direction(az, 0.0) for az in config.azimuths]:
        for n in range(n_test):
            clips = tuple((idx, split_samples["test"][idx][n], direction)
                          for idx in range(n_classes))
            slot_order = tuple(int(s) for s in rng.permutation(n_classes))
            noise_name, offset = draw_noise()
            tag = f"_{noise_name}" if noise_name else ""
            stem = direction_to_filename(direction)[:-4]
            plans.append(_PlannedMixture("test-h", f"test-{stem}{tag}_mix{n + 1}",
                                         clips, slot_order, noise_name, offset))
    for direction in [Direction(0.0, el) for el in config.elevations]:
        for n in range(n_test):
            clips = tuple((idx, split_samples["test"][idx][n], direction)
                          for idx in range(n_classes))
            slot_order = tuple(int(s) for s in rng.permutation(n_classes))
            noise_name, offset = draw_noise()
            tag = f"_{noise_name}" if noise_name else ""
            stem = direction_to_filename(direction)[:-4]
            plans.append(_PlannedMixture("test-v", f"test-{stem}{tag}_mix{n + 1}",
                                         clips, slot_order, noise_name, offset))
    return plans


def _noise_span(noise: np.ndarray, offset: int, need: int) -> np.ndarray:
    total = noise.shape[1]
    if total < need:
        reps = -(-need // total)
        noise = np.tile(noise, (1, reps))
        total = noise.shape[1]
    start = offset % (total - need + 1)
    return noise[:, start:start + need]


def build_dataset(config: SynthConfig, event_dir, noise_dir, out_dir, hrir_dir,
                  workers: int = 1) -> dict:
    """Render every planned mixture and return (and write) the manifest."""
    event_dir = Path(event_dir)
    out_dir = Path(out_dir)
    hrir_dir = Path(hrir_dir)
    if config.snr_db is not None:
        if noise_dir is None:
            raise BiseldError("snr_db is set but no noise directory was given",
                              field="noise_dir")
        noise_dir = Path(noise_dir)
        noise_files = sorted(p for p in noise_dir.iterdir() if p.suffix == ".wav")
        if not noise_files:
            raise BiseldError("no .wav noise files found", path=str(noise_dir))
        noise_audio = {}
        for p in noise_files:
            audio, fs = read_wav(p)
            noise_audio[p.stem] = resample(audio, fs, config.fs)
        noise_names = sorted(noise_audio)
    else:
        noise_audio = {}
        noise_names = []

    events = _inventory_events(event_dir, config)
    hrirs = _load_hrirs(hrir_dir, config)
    plans = _plan(config, events, noise_names)

    clip_cache: dict[str, np.ndarray] = {}
    for names in events.values():
        for name in names:
            if name not in clip_cache:
                clip_cache[name] = _prepare_clip(event_dir / name, config)

    for split in ("train", "valid", "test", "test-h", "test-v"):
        (out_dir / split).mkdir(parents=True, exist_ok=True)

    total_n = len(config.classes) * config.segment_samples

    def render(plan: _PlannedMixture) -> tuple[str, dict]:
        clips = [BinauralClip(spatialize(clip_cache[sample], hrirs[d], config.fs),
                              idx, d.azimuth_deg, d.elevation_deg)
                 for idx, sample, d in plan.clips]
        noise = None
        if plan.noise_name is not None:
            noise = _noise_span(noise_audio[plan.noise_name], plan.noise_offset,
                                total_n)
        audio, labels = build_mixture(clips, config.fs, config.segment_s,
                                      slot_order=plan.slot_order, noise=noise,
                                      snr_db=config.snr_db)
        wav_rel = f"{plan.split}/{plan.stem}.wav"
        csv_rel = f"{plan.split}/{plan.stem}.csv"
        scale = write_wav(out_dir / wav_rel, audio, config.fs)
        write_label_csv(labels, out_dir / csv_rel)
        record = {
            "labels": csv_rel,
            "slots": list(plan.slot_order),
            "clips": [{"class": idx, "sample": sample,
                       "azimuth": d.azimuth_deg, "elevation": d.elevation_deg}
                      for idx, sample, d in plan.clips],
            "scale": scale,
        }
        if plan.noise_name is not None:
            record["noise"] = {"file": plan.noise_name, "offset": plan.noise_offset}
        return wav_rel, record

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rendered = list(pool.map(render, plans))
    else:
        rendered = [render(p) for p in plans]

    counts: dict[str, int] = {}
    for plan in plans:
        counts[plan.split] = counts.get(plan.split, 0) + 1
    manifest = {
        "config": config.to_dict(),
        "counts": counts,
        "files": {rel: record for rel, record in rendered},
        "samples": {split: {config.classes[i]: names for i, names in per.items()}
                    for split, per in _split_samples_view(config, events).items()},
    }
    (out_dir / "manifest.json").write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return manifest


def _split_samples_view(config: SynthConfig,
                        events: dict[int, list[str]]) -> dict[str, dict[int, list[str]]]:
    # mirror of the split drawn inside _plan (same seed, same draw order)
    rng = np.random.default_rng(config.seed)
    n_train, n_valid, _ = config.split
    view: dict[str, dict[int, list[str]]] = {"train": {}, "valid": {}, "test": {}}
    for idx in range(len(config.classes)):
        order = list(rng.permutation(config.samples_per_class))
        names = events[idx]
        view["train"][idx] = [names[i] for i in order[:n_train]]
        view["valid"][idx] = [names[i] for i in order[n_train:n_train + n_valid]]
        view["test"][idx] = [names[i] for i in order[n_train + n_valid:]]
    return view
