"""Binaural localization cues extracted from HRIR/HRTF pairs.

Interaural time difference (cross-correlation of low-passed, upsampled
impulse responses), narrowband and wideband interaural level differences,
pinna-related transfer functions with their spectral peaks and notches,
and horizontal-plane directivity beam patterns.

Sign conventions: positive ITD means the left channel lags the right
(source on the right); ILD is right over left, so a louder right ear is
positive.  Both negate exactly under a left/right swap, which is why the
level differences below are computed as differences of logs rather than
logs of ratios.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.signal import filtfilt, find_peaks, firwin

from .errors import BiseldError
from .hrtf import ComplexSpectrum, HrirPair


@dataclass(frozen=True)
class SpectralFeature:
    """A PRTF peak or notch inside the analysis band."""

    kind: str  # "peak" or "notch"
    frequency_hz: float
    level_db: float
    elevation_deg: float = float("nan")


@dataclass
class BeamPattern:
    """Per-azimuth level at one frequency, normalized to the front."""

    frequency_hz: float
    levels: dict[float, float]  # azimuth_deg -> dB


def _zero_phase_lowpass(x: np.ndarray, fs: float, cutoff_hz: float,
                        numtaps: int) -> np.ndarray:
    # forward-backward FIR so no group delay biases the correlation peak
    taps = firwin(numtaps, cutoff_hz, fs=fs)
    padlen = min(3 * numtaps, x.size - 1)
    return filtfilt(taps, [1.0], x, padlen=padlen)


def _upsample(x: np.ndarray, factor: int, numtaps: int) -> np.ndarray:
    # zero-stuffing plus an anti-image low-pass at the original Nyquist
    if factor == 1:
        return x
    stuffed = np.zeros(x.size * factor)
    stuffed[::factor] = x
    taps = firwin(numtaps * factor + 1, 1.0 / factor) * factor
    padlen = min(3 * taps.size, stuffed.size - 1)
    return filtfilt(taps, [1.0], stuffed, padlen=padlen)


def itd(pair: HrirPair, max_lag_us: float = 1000.0, lpf_cutoff_hz: float = 1500.0,
        upsample: int = 4, numtaps: int = 101) -> float:
    """ITD in seconds from the normalized cross-correlation peak.

    Both channels are low-passed at ``lpf_cutoff_hz`` and upsampled by
    ``upsample`` (resolution ~5.2 us at 48 kHz with the default factor 4);
    the returned lag maximizes the normalized cross-correlation within
    |tau| <= max_lag_us, ties broken toward the smallest |tau|.
    """
    if not np.any(pair.left) or not np.any(pair.right):
        raise BiseldError("all-zero channel: normalized correlation undefined")
    fs_up = pair.fs * upsample
    l = _upsample(_zero_phase_lowpass(pair.left, pair.fs, lpf_cutoff_hz, numtaps),
                  upsample, numtaps)
    r = _upsample(_zero_phase_lowpass(pair.right, pair.fs, lpf_cutoff_hz, numtaps),
                  upsample, numtaps)
    denom = np.sqrt(np.dot(l, l) * np.dot(r, r))
    if denom == 0.0:
        raise BiseldError("all-zero channel after filtering")
    corr = np.correlate(l, r, mode="full") / denom
    lags = np.arange(-(l.size - 1), l.size)
    max_lag = int(np.floor(max_lag_us * 1e-6 * fs_up))
    if max_lag < 1:
        raise BiseldError(
            f"max_lag_us ({max_lag_us}) is below one sample at the upsampled rate",
            field="max_lag_us")
    if max_lag >= l.size:
        raise BiseldError(
            f"max_lag_us ({max_lag_us}) exceeds the sequence length after upsampling",
            field="max_lag_us")
    keep = np.abs(lags) <= max_lag
    corr, lags = corr[keep], lags[keep]
    # scan in order of growing |lag| so equal maxima resolve to the smallest
    order = np.argsort(np.abs(lags), kind="stable")
    best = order[int(np.argmax(corr[order]))]
    return lags[best] / fs_up


def hrtf_pair_spectra(pair: HrirPair, pad_to: int = 4800) -> tuple[ComplexSpectrum, ComplexSpectrum]:
    """Zero-pad both HRIRs to ``pad_to`` and transform (10 Hz bins at 48 kHz)."""
    if pad_to < len(pair.left):
        raise BiseldError(f"pad_to ({pad_to}) shorter than HRIR ({len(pair.left)})")
    return (ComplexSpectrum(np.fft.fft(pair.left, pad_to), pair.fs),
            ComplexSpectrum(np.fft.fft(pair.right, pad_to), pair.fs))


def _checked_log_mags(left: ComplexSpectrum, right: ComplexSpectrum,
                      idx: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    ml = np.abs(left.bins[idx])
    mr = np.abs(right.bins[idx])
    for name, m in (("left", ml), ("right", mr)):
        zero = np.nonzero(m == 0.0)[0]
        if zero.size:
            raise BiseldError(
                f"zero-magnitude {name} bin in band", field=f"bin {idx[zero[0]]}")
    return np.log10(ml), np.log10(mr)


def ild_narrowband(left: ComplexSpectrum, right: ComplexSpectrum) -> np.ndarray:
    """Per-bin 20 log10(|H_R| / |H_L|) in dB over all bins."""
    if len(left) != len(right):
        raise BiseldError(f"bin count mismatch: {len(left)} vs {len(right)}")
    idx = np.arange(len(left))
    log_l, log_r = _checked_log_mags(left, right, idx)
    return 20.0 * (log_r - log_l)


def ild_narrowband_from_hrirs(pair: HrirPair, pad_to: int = 4800) -> np.ndarray:
    l, r = hrtf_pair_spectra(pair, pad_to)
    return ild_narrowband(l, r)


def ild_wideband(left: ComplexSpectrum, right: ComplexSpectrum,
                 f_lo: float = 20.0, f_hi: float = 20000.0) -> float:
    """10 log10 of the in-band energy ratio (right over left) in dB."""
    if len(left) != len(right):
        raise BiseldError(f"bin count mismatch: {len(left)} vs {len(right)}")
    if f_hi > left.fs / 2:
        raise BiseldError(f"band edge {f_hi} Hz above Nyquist {left.fs / 2} Hz")
    freqs = left.bin_frequencies()
    half = len(left) // 2
    idx = np.nonzero((freqs[:half + 1] >= f_lo) & (freqs[:half + 1] <= f_hi))[0]
    if idx.size == 0:
        raise BiseldError("no bins inside the requested band")
    e_l = float(np.sum(np.abs(left.bins[idx]) ** 2))
    e_r = float(np.sum(np.abs(right.bins[idx]) ** 2))
    if e_l == 0.0 or e_r == 0.0:
        raise BiseldError("zero in-band energy")
    return 10.0 * (np.log10(e_r) - np.log10(e_l))


def ild_wideband_from_hrirs(pair: HrirPair, f_lo: float = 20.0,
                            f_hi: float = 20000.0, pad_to: int = 4800) -> float:
    l, r = hrtf_pair_spectra(pair, pad_to)
    return ild_wideband(l, r, f_lo, f_hi)


def extract_prtf(hrir, fs: float, window_ms: float = 2.0) -> ComplexSpectrum:
    """Pinna-related transfer function: raised-cosine window around the peak, then FFT.

    The window spans ``window_ms`` centered on the maximum-magnitude sample
    and is zero outside; a window reaching past the sequence is truncated
    with a warning.
    """
    ir = np.asarray(hrir, dtype=float)
    if ir.size == 0:
        raise BiseldError("empty impulse response")
    length = int(round(window_ms * 1e-3 * fs))
    if length < 1:
        raise BiseldError("window shorter than one sample", field="window_ms")
    win = np.hanning(length)
    peak = int(np.argmax(np.abs(ir)))
    start = peak - (length - 1) // 2
    windowed = np.zeros_like(ir)
    lo = max(0, start)
    hi = min(ir.size, start + length)
    if lo > start or hi < start + length:
        warnings.warn("PRTF window truncated at the sequence boundary", stacklevel=2)
    windowed[lo:hi] = ir[lo:hi] * win[lo - start:hi - start]
    return ComplexSpectrum(np.fft.fft(windowed), fs)


def find_spectral_features(prtf: ComplexSpectrum, band: tuple[float, float] = (5000.0, 16000.0),
                           min_prominence_db: float = 3.0,
                           elevation_deg: float = float("nan")) -> list[SpectralFeature]:
    """Peaks and notches of the PRTF dB magnitude inside ``band``, sorted by frequency."""
    if band[1] > prtf.fs / 2:
        raise BiseldError(f"band edge {band[1]} Hz above Nyquist {prtf.fs / 2} Hz")
    freqs = prtf.bin_frequencies()
    half = len(prtf) // 2
    idx = np.nonzero((freqs[:half + 1] >= band[0]) & (freqs[:half + 1] <= band[1]))[0]
    if idx.size < 3:
        return []
    mag = np.abs(prtf.bins[idx])
    db = 20.0 * np.log10(np.maximum(mag, 1e-12))
    features = []
    peaks, _ = find_peaks(db, prominence=min_prominence_db)
    for p in peaks:
        features.append(SpectralFeature("peak", float(freqs[idx[p]]), float(db[p]),
                                        elevation_deg))
    notches, _ = find_peaks(-db, prominence=min_prominence_db)
    for n in notches:
        features.append(SpectralFeature("notch", float(freqs[idx[n]]), float(db[n]),
                                        elevation_deg))
    features.sort(key=lambda f: f.frequency_hz)
    return features


def hpd(horizontal_hrtfs: dict[float, ComplexSpectrum], frequency_hz: float) -> BeamPattern:
    """Horizontal-plane directivity: each azimuth normalized by the front HRTF.

    Level at azimuth 0 is 0 dB exactly by construction.
    """
    if 0.0 not in horizontal_hrtfs:
        raise BiseldError("horizontal map must contain azimuth 0", field="azimuth 0")
    front = horizontal_hrtfs[0.0]
    k = int(round(frequency_hz * len(front) / front.fs))
    k = min(max(k, 0), len(front) - 1)
    front_mag = np.abs(front.bins[k])
    if front_mag == 0.0:
        raise BiseldError(f"front HRTF magnitude is zero at bin {k}", field=f"bin {k}")
    log_front = np.log10(front_mag)
    levels: dict[float, float] = {}
    for az, spec in horizontal_hrtfs.items():
        if len(spec) != len(front):
            raise BiseldError(f"bin count mismatch at azimuth {az}")
        mag = np.abs(spec.bins[k])
        if mag == 0.0:
            raise BiseldError(f"zero HRTF magnitude at azimuth {az}, bin {k}")
        levels[float(az)] = 20.0 * (np.log10(mag) - log_front)
    return BeamPattern(float(frequency_hz), levels)
