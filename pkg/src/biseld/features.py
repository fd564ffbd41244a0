"""Binaural time-frequency feature (BTFF) extraction.

A stereo waveform becomes a T x 64 x 8 tensor: left/right mel
spectrograms, their temporal velocity maps, an ITD-map (interaural phase
below 1.5 kHz converted to seconds), an ILD-map (level difference above
5 kHz), and left/right spectral-cue maps (the high band itself).

Channel order is fixed: MS_L, MS_R, V_L, V_R, ITD, ILD, SC_L, SC_R.
Swapping the input channels swaps the L/R pairs and negates the ITD and
ILD channels exactly; the arithmetic below is arranged (differences of
values, antisymmetric cross products) so the negation holds bit for bit.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.signal import get_window

from .errors import BiseldError

CHANNEL_NAMES = ("ms_l", "ms_r", "v_l", "v_r", "itd", "ild", "sc_l", "sc_r")

AMP_FLOOR = 1e-8  # before the log, so silence maps to -160 dB

_BTFF_MAGIC = b"BTFF"


def hz_to_mel(f):
    """Mel value for a frequency in Hz (1000 Hz sits at 1000 mel)."""
    f = np.asarray(f, dtype=float)
    if np.any(f < 0):
        raise BiseldError("frequency must be nonnegative", field="f")
    out = 1127.0 * np.log1p(f / 700.0)
    return float(out) if out.ndim == 0 else out


def mel_to_hz(m):
    m = np.asarray(m, dtype=float)
    if np.any(m < 0):
        raise BiseldError("mel value must be nonnegative", field="m")
    out = 700.0 * np.expm1(m / 1127.0)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class StftParams:
    """Analysis geometry.

    The defaults (32 kHz, 1024-sample window, 640-sample hop) make one
    frame 20 ms, so a network that pools time by 5 emits 100 ms frames
    aligned with deci-second labels.
    """

    fs: float = 32000.0
    win_length: int = 1024
    hop: int = 640
    n_fft: int = 1024

    def __post_init__(self) -> None:
        if self.fs <= 0:
            raise BiseldError("fs must be positive", field="fs")
        if not (0 < self.hop <= self.win_length <= self.n_fft):
            raise BiseldError(
                f"need 0 < hop <= win_length <= n_fft, got "
                f"hop={self.hop}, win_length={self.win_length}, n_fft={self.n_fft}")

    @property
    def n_bins(self) -> int:
        return self.n_fft // 2 + 1

    @property
    def frame_hop_s(self) -> float:
        return self.hop / self.fs

    def bin_frequencies(self) -> np.ndarray:
        return np.arange(self.n_bins) * self.fs / self.n_fft


def frame_count(n_samples: int, p: StftParams) -> int:
    if n_samples < p.win_length:
        return 1
    return (n_samples - p.win_length) // p.hop + 1


def stft(x, p: StftParams = StftParams()) -> np.ndarray:
    """Complex frames, shape (T, n_fft//2 + 1), normalized by 1/n_fft."""
    x = np.asarray(x, dtype=float).ravel()
    if x.size == 0:
        raise BiseldError("empty signal")
    t = frame_count(x.size, p)
    need = (t - 1) * p.hop + p.win_length
    if need > x.size:  # only a sub-window input needs padding
        x = np.concatenate([x, np.zeros(need - x.size)])
    frames = np.lib.stride_tricks.sliding_window_view(x, p.win_length)[::p.hop][:t]
    window = get_window("hann", p.win_length, fftbins=True)
    return np.fft.rfft(frames * window, n=p.n_fft, axis=1) / p.n_fft


def db_magnitude(p_frames: np.ndarray, amp_floor: float = AMP_FLOOR) -> np.ndarray:
    return 20.0 * np.log10(np.maximum(np.abs(p_frames), amp_floor))


@dataclass(frozen=True)
class MelBank:
    """Row-normalized triangular averaging matrix over one frequency band.

    Each of the 64 rows is a weighted average (rows sum to 1), so the
    bank can act on any value matrix: dB levels, seconds, differences.
    Rows too narrow to catch an FFT bin fall back to their nearest bin,
    and in-band bins missed by every triangle are attached to the row
    with the nearest center, so no in-band bin is ever dropped.
    """

    f_lo: float
    f_hi: float
    weights: np.ndarray = field(repr=False)  # (n_mels, n_fft_bins)
    centers_hz: np.ndarray = field(repr=False)

    @property
    def n_mels(self) -> int:
        return self.weights.shape[0]

    @classmethod
    def build(cls, p: StftParams, f_lo: float, f_hi: float,
              n_mels: int = 64) -> "MelBank":
        if not 0.0 <= f_lo < f_hi:
            raise BiseldError(f"invalid band [{f_lo}, {f_hi}] Hz")
        if f_hi > p.fs / 2 + 1e-9:
            raise BiseldError(f"band edge {f_hi} Hz above Nyquist {p.fs / 2} Hz")
        freqs = p.bin_frequencies()
        edges = mel_to_hz(np.linspace(hz_to_mel(f_lo), hz_to_mel(f_hi), n_mels + 2))
        centers = edges[1:-1]
        weights = np.zeros((n_mels, freqs.size))
        for i in range(n_mels):
            lo, center, hi = edges[i], edges[i + 1], edges[i + 2]
            rising = (freqs - lo) / (center - lo)
            falling = (hi - freqs) / (hi - center)
            weights[i] = np.clip(np.minimum(rising, falling), 0.0, None)
        for i in range(n_mels):
            if weights[i].sum() == 0.0:
                weights[i, int(np.argmin(np.abs(freqs - centers[i])))] = 1.0
        in_band = (freqs >= f_lo) & (freqs <= f_hi)
        for k in np.nonzero(in_band & (weights.sum(axis=0) == 0.0))[0]:
            weights[int(np.argmin(np.abs(centers - freqs[k]))), k] = 1.0
        weights /= weights.sum(axis=1, keepdims=True)
        return cls(float(f_lo), float(f_hi), weights, centers)


def mel_map(matrix: np.ndarray, bank: MelBank) -> np.ndarray:
    """Apply the bank to a (T, K) value matrix, giving (T, n_mels)."""
    matrix = np.asarray(matrix, dtype=float)
    if matrix.ndim != 2 or matrix.shape[1] != bank.weights.shape[1]:
        raise BiseldError(
            f"matrix shape {matrix.shape} does not match bank with "
            f"{bank.weights.shape[1]} frequency bins")
    return matrix @ bank.weights.T


def v_map(s: np.ndarray) -> np.ndarray:
    """Temporal derivative of a spectrogram-like matrix.

    Forward difference at the first frame, central difference inside,
    backward difference at the last frame.
    """
    s = np.asarray(s, dtype=float)
    if s.ndim != 2:
        raise BiseldError(f"expected a 2-D matrix, got shape {s.shape}")
    if s.shape[0] < 2:
        raise BiseldError("need at least two frames for a temporal difference")
    return np.gradient(s, axis=0)


def itd_map(p_l: np.ndarray, p_r: np.ndarray, p: StftParams = StftParams(),
            band: tuple[float, float] = (0.0, 1500.0), n_mels: int = 64,
            bank: MelBank | None = None) -> np.ndarray:
    """Per-bin interaural delay in seconds, mel-averaged over ``band``.

    The delay comes from the interaural cross product, so no phase
    unwrapping is needed; values are bounded by half a period per bin.
    Positive values mean the left channel lags (source on the right).
    """
    p_l = np.asarray(p_l)
    p_r = np.asarray(p_r)
    if p_l.shape != p_r.shape:
        raise BiseldError(f"frame shape mismatch: {p_l.shape} vs {p_r.shape}")
    if p_l.ndim != 2 or p_l.shape[1] != p.n_bins:
        raise BiseldError(
            f"expected (T, {p.n_bins}) frames for n_fft={p.n_fft}, got {p_l.shape}")
    z_re = p_l.real * p_r.real + p_l.imag * p_r.imag
    z_im = p_l.real * p_r.imag - p_l.imag * p_r.real
    tau = np.arctan2(z_im, z_re)
    omega = 2.0 * np.pi * p.bin_frequencies()
    tau[:, 0] = 0.0  # DC carries no delay information
    tau[:, 1:] /= omega[1:]
    if bank is None:
        bank = MelBank.build(p, band[0], band[1], n_mels)
    return mel_map(tau, bank)


def ild_map(s_l: np.ndarray, s_r: np.ndarray, p: StftParams = StftParams(),
            band: tuple[float, float | None] = (5000.0, None), n_mels: int = 64,
            bank: MelBank | None = None) -> np.ndarray:
    """Right-minus-left level difference (dB), mel-averaged over the high band."""
    s_l = np.asarray(s_l, dtype=float)
    s_r = np.asarray(s_r, dtype=float)
    if s_l.shape != s_r.shape:
        raise BiseldError(f"spectrogram shape mismatch: {s_l.shape} vs {s_r.shape}")
    if bank is None:
        f_hi = p.fs / 2 if band[1] is None else band[1]
        bank = MelBank.build(p, band[0], f_hi, n_mels)
    return mel_map(s_r - s_l, bank)


def sc_map(s: np.ndarray, p: StftParams = StftParams(),
           band: tuple[float, float | None] = (5000.0, None), n_mels: int = 64,
           bank: MelBank | None = None) -> np.ndarray:
    """One ear's high-band levels (dB), mel-averaged; carries pinna notches."""
    s = np.asarray(s, dtype=float)
    if bank is None:
        f_hi = p.fs / 2 if band[1] is None else band[1]
        bank = MelBank.build(p, band[0], f_hi, n_mels)
    return mel_map(s, bank)


@dataclass
class Btff:
    tensor: np.ndarray  # (T, n_mels, 8)
    frame_hop_s: float

    def __post_init__(self) -> None:
        self.tensor = np.asarray(self.tensor, dtype=float)
        if self.tensor.ndim != 3 or self.tensor.shape[2] != len(CHANNEL_NAMES):
            raise BiseldError(
                f"expected (T, bins, {len(CHANNEL_NAMES)}), got {self.tensor.shape}")
        if not np.isfinite(self.tensor).all():
            raise BiseldError("feature tensor contains non-finite values")

    @property
    def n_frames(self) -> int:
        return self.tensor.shape[0]

    @property
    def n_bins(self) -> int:
        return self.tensor.shape[1]

    def channel(self, name: str) -> np.ndarray:
        try:
            return self.tensor[:, :, CHANNEL_NAMES.index(name)]
        except ValueError:
            raise BiseldError(
                f"unknown channel {name!r}; valid: {', '.join(CHANNEL_NAMES)}") from None


def extract_btff(stereo, p: StftParams = StftParams(), n_mels: int = 64,
                 standardize: bool = False) -> Btff:
    """Assemble all eight channels from a (2, samples) waveform."""
    arr = np.asarray(stereo, dtype=float)
    if arr.ndim != 2 or arr.shape[0] != 2:
        raise BiseldError(f"expected a (2, samples) stereo array, got {arr.shape}")
    left, right = arr[0], arr[1]
    p_l = stft(left, p)
    p_r = stft(right, p)
    s_l = db_magnitude(p_l)
    s_r = db_magnitude(p_r)
    full_band = MelBank.build(p, 0.0, p.fs / 2, n_mels)
    low_band = MelBank.build(p, 0.0, 1500.0, n_mels)
    high_band = MelBank.build(p, 5000.0, p.fs / 2, n_mels)
    channels = [
        mel_map(s_l, full_band),
        mel_map(s_r, full_band),
        mel_map(v_map(s_l), full_band),
        mel_map(v_map(s_r), full_band),
        itd_map(p_l, p_r, p, bank=low_band),
        ild_map(s_l, s_r, p, bank=high_band),
        mel_map(s_l, high_band),
        mel_map(s_r, high_band),
    ]
    btff = Btff(np.stack(channels, axis=2), p.frame_hop_s)
    return standardize_btff(btff) if standardize else btff


def standardize_btff(btff: Btff) -> Btff:
    """Optional per-channel zero-mean, unit-variance pass (off by default)."""
    out = np.empty_like(btff.tensor)
    for c in range(btff.tensor.shape[2]):
        ch = btff.tensor[:, :, c]
        std = ch.std()
        out[:, :, c] = (ch - ch.mean()) / (std if std > 0.0 else 1.0)
    return Btff(out, btff.frame_hop_s)


def write_btff(path, btff: Btff) -> None:
    """Little-endian binary: "BTFF", u32 T, u32 bins, u32 channels, f32 hop, data."""
    header = struct.pack("<4sIIIf", _BTFF_MAGIC, btff.n_frames, btff.n_bins,
                         btff.tensor.shape[2], btff.frame_hop_s)
    payload = np.ascontiguousarray(btff.tensor, dtype="<f4").tobytes()
    Path(path).write_bytes(header + payload)


def read_btff(path) -> Btff:
    raw = Path(path).read_bytes()
    if len(raw) < 20 or raw[:4] != _BTFF_MAGIC:
        raise BiseldError("not a BTFF file (bad magic)", path=str(path))
    t, bins, channels = struct.unpack_from("<III", raw, 4)
    hop_s = struct.unpack_from("<f", raw, 16)[0]
    expected = 20 + t * bins * channels * 4
    if channels != len(CHANNEL_NAMES):
        raise BiseldError(f"expected {len(CHANNEL_NAMES)} channels, file has {channels}",
                          path=str(path))
    if len(raw) != expected:
        raise BiseldError(
            f"truncated feature file: {len(raw)} bytes, header implies {expected}",
            path=str(path))
    data = np.frombuffer(raw, dtype="<f4", offset=20).reshape(t, bins, channels)
    return Btff(data.astype(float), float(hop_s))
