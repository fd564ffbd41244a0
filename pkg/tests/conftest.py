"""Shared fixtures: synthetic impulse responses, label scenes, tiny graphs."""

from __future__ import annotations

import math

import numpy as np
import pytest

from biseld.hrtf import Direction, HrirPair, direction_to_filename
from biseld.metrics import FrameEvents, direction_vector
from biseld.net import GraphSpec, LayerSpec


def make_hrir(length: int, peak_index: int, gain: float = 1.0,
              fs: float = 48000.0, seed: int = 0) -> np.ndarray:
    """A plausible impulse response: main spike plus a short decaying tail."""
    rng = np.random.default_rng(seed)
    ir = np.zeros(length)
    ir[peak_index] = gain
    tail = min(length - peak_index - 1, 64)
    if tail > 0:
        decay = np.exp(-np.arange(1, tail + 1) / 12.0)
        ir[peak_index + 1:peak_index + 1 + tail] = (
            0.25 * gain * decay * rng.standard_normal(tail))
    return ir


def make_delay_pair(delay_samples: int, fs: float = 48000.0,
                    length: int = 512, base: int = 64,
                    right_gain: float = 1.0, seed: int = 0) -> HrirPair:
    """Left/right: one prototype waveform, offset by delay_samples.

    Positive delay means the left channel arrives later (source on the
    right); the shared shape keeps the correlation peak exactly on the
    constructed lag.
    """
    proto = make_hrir(length, base, fs=fs, seed=seed)
    left = np.roll(proto, max(0, delay_samples))
    right = np.roll(proto, max(0, -delay_samples)) * right_gain
    return HrirPair(left, right, fs)


def synthetic_grid_pair(direction: Direction, fs: float, length: int) -> HrirPair:
    """Direction-consistent pair: ITD and level follow the azimuth sign."""
    az = math.radians(direction.azimuth_deg)
    el = math.radians(direction.elevation_deg)
    max_delay = max(2, int(length / 16))
    delay = int(round(max_delay * math.sin(az) * math.cos(el)))
    base = max(2, length // 8)
    shade = 10.0 ** (math.sin(az) * 0.25)  # right ear louder for +azimuth
    seed = (int(direction.azimuth_deg) * 7 + int(direction.elevation_deg)) & 0xFFFF
    proto = make_hrir(length, base, fs=fs, seed=seed)
    left = np.roll(proto, max(0, delay)) / shade
    right = np.roll(proto, max(0, -delay)) * shade
    return HrirPair(left, right, fs, direction)


def write_hrir_grid(dir_path, azimuths, elevations, fs: float = 48000.0,
                    length: int = 512) -> int:
    """Write a<AAA>e<+EE>.txt files for the full direction grid."""
    dir_path.mkdir(parents=True, exist_ok=True)
    count = 0
    for az in azimuths:
        for el in elevations:
            d = Direction(az, el)
            pair = synthetic_grid_pair(d, fs, length)
            lines = [f"{l:.10e} {r:.10e}" for l, r in zip(pair.left, pair.right)]
            (dir_path / direction_to_filename(d)).write_text("\n".join(lines) + "\n")
            count += 1
    return count


def random_scene(rng: np.random.Generator, n_classes: int = 4,
                 max_frames: int = 35) -> tuple[list, list, int]:
    """(ref_events, pred_events, n_frames) with events as plain tuples."""
    n_frames = int(rng.integers(1, max_frames + 1))

    def events(p_active: float) -> list:
        out = []
        for frame in range(n_frames):
            for cls in range(n_classes):
                draws = 0
                u = rng.random()
                if u < p_active:
                    draws = 1
                elif u < p_active + 0.05:
                    draws = 2
                for _ in range(draws):
                    az = float(rng.integers(-35, 37) * 5)
                    el = float(rng.integers(-18, 19) * 5)
                    out.append((frame, cls, az, el))
        return out

    return events(0.25), events(0.25), n_frames


def scene_to_frame_events(events: list, n_frames: int) -> FrameEvents:
    """Load (frame, class, az, el) tuples into a stream with a fixed length."""
    fe = FrameEvents()
    for frame, cls, az, el in events:
        fe.add(frame, cls, direction_vector(az, el))
    fe.n_frames = max(fe.n_frames, n_frames)
    return fe


def linear_tail_graph(n_bins: int = 6, n_channels: int = 3,
                      n_classes: int = 2) -> GraphSpec:
    """Pivot followed by a purely linear tail (reshape + dense)."""
    layers = (
        LayerSpec("input", "input", (), {"shape": [None, n_bins, n_channels]}),
        LayerSpec("mix", "conv", ("input",),
                  {"in_channels": n_channels, "out_channels": 4}),
        LayerSpec("reshape", "reshape", ("mix",)),
        LayerSpec("head", "dense", ("reshape",),
                  {"in_features": n_bins * 4, "out_features": 3 * n_classes}),
    )
    return GraphSpec(layers, pivots=("mix",))


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240817)
