"""HRIR/HRTF data model and post-processing.

Covers the measurement post-processing chain for a binaural impulse
response database: loading two-column HRIR text files, time-windowing
raw impulse responses, deriving head-related transfer functions by
dividing ear spectra by the origin (head-absent) spectrum, and
compensating the non-causal advance that the division introduces on
the far ear by a circular shift.

Conventions
-----------
* Azimuth is measured from the front (y-axis) toward the right ear
  (x-axis): +90 deg is the right, -90 deg the left.  Stored range is
  (-180, +180].
* Database file names encode direction as ``a<AAA>e<+EE|-EE>`` with
  AAA in [000, 359] counted the same way, so ``a270e+30`` is azimuth
  -90 deg, elevation +30 deg.
* HRIR text files hold one sample per line, two whitespace-separated
  columns: left then right.
"""

from __future__ import annotations

import re
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import BiseldError

DEFAULT_HRIR_LEN = 512


@dataclass(frozen=True)
class Direction:
    """Source direction; azimuth normalized to (-180, 180], elevation clamped to [-90, 90]."""

    azimuth_deg: float
    elevation_deg: float

    def __post_init__(self):
        az = float(self.azimuth_deg) % 360.0
        if az > 180.0:
            az -= 360.0
        elif az == -180.0:
            az = 180.0
        el = min(90.0, max(-90.0, float(self.elevation_deg)))
        object.__setattr__(self, "azimuth_deg", az)
        object.__setattr__(self, "elevation_deg", el)


@dataclass
class HrirPair:
    """A left/right impulse-response pair for one direction."""

    left: np.ndarray
    right: np.ndarray
    fs: float
    direction: Direction | None = None

    def __post_init__(self):
        self.left = np.asarray(self.left, dtype=float)
        self.right = np.asarray(self.right, dtype=float)
        if self.left.ndim != 1 or self.right.ndim != 1:
            raise BiseldError("HRIR channels must be one-dimensional")
        if len(self.left) != len(self.right):
            raise BiseldError(
                f"HRIR channels differ in length: {len(self.left)} vs {len(self.right)}")
        if self.fs <= 0:
            raise BiseldError(f"sample rate must be positive, got {self.fs}", field="fs")
        if not (np.all(np.isfinite(self.left)) and np.all(np.isfinite(self.right))):
            raise BiseldError("HRIR contains non-finite samples")

    def swapped(self) -> "HrirPair":
        return HrirPair(self.right.copy(), self.left.copy(), self.fs, self.direction)


@dataclass
class ComplexSpectrum:
    """Full-length DFT bins (bin 0 = DC) with their sample rate."""

    bins: np.ndarray
    fs: float

    def __post_init__(self):
        self.bins = np.asarray(self.bins, dtype=complex)
        if not np.all(np.isfinite(self.bins)):
            raise BiseldError("spectrum contains non-finite bins")

    def __len__(self) -> int:
        return len(self.bins)

    def bin_frequencies(self) -> np.ndarray:
        return np.arange(len(self.bins)) * (self.fs / len(self.bins))


@dataclass(frozen=True)
class WindowParams:
    """Time-window geometry for trimming raw impulse responses."""

    pre_peak_ms: float = 1.0
    min_post_peak_ms: float = 2.5
    pad_to: int = DEFAULT_HRIR_LEN

    def __post_init__(self):
        if self.pre_peak_ms <= 0:
            raise BiseldError("pre_peak_ms must be positive", field="pre_peak_ms")
        if self.min_post_peak_ms <= 0:
            raise BiseldError("min_post_peak_ms must be positive", field="min_post_peak_ms")
        if self.pad_to < 1:
            raise BiseldError("pad_to must be at least 1", field="pad_to")


@dataclass(frozen=True)
class HeadGeometry:
    """Head radius and speed of sound controlling the non-causal advance bound."""

    head_radius_m: float = 0.0875
    speed_of_sound: float = 343.0

    def __post_init__(self):
        if self.head_radius_m < 0:
            raise BiseldError("head_radius_m must be nonnegative", field="head_radius_m")
        if self.speed_of_sound <= 0:
            raise BiseldError("speed_of_sound must be positive", field="speed_of_sound")


@dataclass
class WindowedIr:
    """apply_time_window result: the padded segment plus where it came from."""

    samples: np.ndarray
    start_index: int
    stop_index: int  # exclusive end of the kept segment in the source IR
    zero_crossing_found: bool = True


_NAME_RE = re.compile(r"a(\d{3})e([+-]\d{2})$")


def parse_hrir_filename(name: str) -> Direction:
    """Parse a database file name like ``a270e+30`` (or ``.../a270e+30.txt``).

    Azimuth digits are mapped from [0, 360) to (-180, +180], so 270 -> -90.
    """
    stem = name.replace("\\", "/").rsplit("/", 1)[-1]
    if stem.endswith(".txt"):
        stem = stem[:-4]
    m = _NAME_RE.fullmatch(stem)
    if m is None:
        raise BiseldError(f"file name {name!r} does not match a<AAA>e<+EE|-EE>")
    az = int(m.group(1))
    if az >= 360:
        raise BiseldError(f"azimuth {az:03d} out of range [000, 359]", field="azimuth")
    el = int(m.group(2))
    if az > 180:
        az -= 360
    return Direction(float(az), float(el))


def direction_to_filename(direction: Direction) -> str:
    """Inverse of parse_hrir_filename, with the .txt extension."""
    az = int(round(direction.azimuth_deg)) % 360
    el = int(round(direction.elevation_deg))
    return f"a{az:03d}e{el:+03d}.txt"


def load_hrir_pair(path, fs: float, direction: Direction | None = None,
                   expected_len: int | None = DEFAULT_HRIR_LEN) -> HrirPair:
    """Load a two-column HRIR text file (column 1 = left, column 2 = right).

    Accepts spaces or tabs and plain or scientific decimal notation.  When
    ``direction`` is None it is parsed from the file name.  ``expected_len``
    (default 512) guards against truncated files; pass None to accept any
    length.
    """
    left: list[float] = []
    right: list[float] = []
    try:
        with open(path, "r", encoding="ascii") as fh:
            for lineno, raw in enumerate(fh, start=1):
                line = raw.strip()
                if not line:
                    continue
                parts = line.split()
                if len(parts) != 2:
                    raise BiseldError(
                        f"expected two columns, found {len(parts)}",
                        path=path, line=lineno)
                try:
                    l, r = float(parts[0]), float(parts[1])
                except ValueError:
                    raise BiseldError(
                        f"malformed number in {line!r}", path=path, line=lineno) from None
                left.append(l)
                right.append(r)
    except OSError as exc:
        raise BiseldError(f"cannot read HRIR file: {exc}", path=path) from exc
    if not left:
        raise BiseldError("empty HRIR file", path=path)
    if expected_len is not None and len(left) != expected_len:
        raise BiseldError(
            f"expected {expected_len} samples, found {len(left)}", path=path)
    if direction is None:
        try:
            direction = parse_hrir_filename(str(path))
        except BiseldError:
            direction = None
    return HrirPair(np.array(left), np.array(right), fs, direction)


def save_hrir_pair(path, pair: HrirPair) -> None:
    """Write a pair back in the two-column text format."""
    with open(path, "w", encoding="ascii") as fh:
        for l, r in zip(pair.left, pair.right):
            fh.write(f"{l:.10e} {r:.10e}\n")


def window_start_index(reference_ir: np.ndarray, fs: float,
                       params: WindowParams = WindowParams()) -> int:
    """Global window start: pre_peak_ms before the reference IR's peak.

    The reference is the ipsilateral 90-degree response, whose peak is the
    earliest arrival in the database; the same start is then used for every
    direction.
    """
    ir = np.asarray(reference_ir, dtype=float)
    peak = int(np.argmax(np.abs(ir)))
    pre = int(round(params.pre_peak_ms * 1e-3 * fs))
    return max(0, peak - pre)


def apply_time_window(ir, fs: float, start_index: int,
                      params: WindowParams = WindowParams()) -> WindowedIr:
    """Trim ``ir`` to [start_index, first qualifying zero crossing] and zero-pad.

    The segment ends at the first zero-crossing sample located more than
    ``min_post_peak_ms`` after this IR's own maximum-magnitude sample
    (2.5 ms = 120 samples at 48 kHz).  If no crossing exists before the end
    of the IR the full tail is kept and the result is flagged.
    """
    ir = np.asarray(ir, dtype=float)
    if ir.size == 0:
        raise BiseldError("empty impulse response")
    if not 0 <= start_index < ir.size:
        raise BiseldError(f"start_index {start_index} outside [0, {ir.size})")
    peak = int(np.argmax(np.abs(ir)))
    min_end = peak + int(round(params.min_post_peak_ms * 1e-3 * fs))
    found = True
    stop = ir.size  # exclusive
    # first sign change (or exact zero) strictly after min_end
    crossed = False
    for j in range(max(min_end + 1, 1), ir.size):
        if ir[j] == 0.0 or (ir[j - 1] != 0.0 and (ir[j - 1] > 0) != (ir[j] > 0)):
            stop = j + 1  # keep the crossing sample
            crossed = True
            break
    if not crossed:
        found = False
        warnings.warn("no zero crossing after the post-peak cutoff; keeping full tail",
                      stacklevel=2)
    segment = ir[start_index:stop]
    if segment.size > params.pad_to:
        raise BiseldError(
            f"windowed segment ({segment.size} samples) exceeds pad_to ({params.pad_to})")
    out = np.zeros(params.pad_to)
    out[:segment.size] = segment
    return WindowedIr(out, start_index, stop, found)


def forward_fft(x, n_fft: int) -> "ComplexSpectrum | np.ndarray":
    """DFT of ``x`` zero-padded to n_fft bins (plain array in, plain array out)."""
    x = np.asarray(x, dtype=float)
    if n_fft < x.size:
        raise BiseldError(f"n_fft ({n_fft}) smaller than signal length ({x.size})")
    return np.fft.fft(x, n_fft)


def spectrum(x, n_fft: int, fs: float) -> ComplexSpectrum:
    """forward_fft wrapped with its sample rate."""
    return ComplexSpectrum(forward_fft(x, n_fft), fs)


def inverse_fft(S) -> np.ndarray:
    """Inverse DFT back to a real sequence."""
    bins = S.bins if isinstance(S, ComplexSpectrum) else np.asarray(S, dtype=complex)
    return np.fft.ifft(bins).real


def derive_hrtf(btf: ComplexSpectrum, otf: ComplexSpectrum,
                eps_rel: float = 1e-12) -> ComplexSpectrum:
    """Element-wise H = G / G0 (ear spectrum over origin spectrum).

    Guards every bin of the origin spectrum against near-zero magnitude
    (threshold eps_rel * max|G0|) and reports the first offending bin.
    """
    if len(btf) != len(otf):
        raise BiseldError(
            f"bin count mismatch: {len(btf)} vs {len(otf)}")
    if btf.fs != otf.fs:
        raise BiseldError(f"sample rate mismatch: {btf.fs} vs {otf.fs}")
    mag = np.abs(otf.bins)
    eps = eps_rel * mag.max()
    bad = np.nonzero(mag <= eps)[0]
    if bad.size:
        raise BiseldError(
            f"origin spectrum magnitude below threshold at bin {bad[0]}",
            field=f"bin {bad[0]}")
    return ComplexSpectrum(btf.bins / otf.bins, btf.fs)


def max_noncausal_delay(geom: HeadGeometry = HeadGeometry()) -> float:
    """Largest possible non-causal advance tau_max = l / c, in seconds."""
    return geom.head_radius_m / geom.speed_of_sound


def min_compensation_shift(geom: HeadGeometry, fs: float) -> int:
    """Smallest integer shift strictly greater than tau_max * fs (13 at 48 kHz

    with the default geometry)."""
    return int(np.floor(max_noncausal_delay(geom) * fs)) + 1


def compensate_noncausality(hrir, shift_samples: int) -> np.ndarray:
    """Circular shift: out[n] = in[(n - shift) mod N].

    Leaves the per-bin magnitude spectrum untouched; the caller picks a
    shift strictly greater than tau_max * fs so the advanced portion is
    moved back into causal time.
    """
    hrir = np.asarray(hrir, dtype=float)
    if not 0 <= shift_samples < hrir.size:
        raise BiseldError(
            f"shift {shift_samples} outside [0, {hrir.size})")
    return np.roll(hrir, shift_samples)
