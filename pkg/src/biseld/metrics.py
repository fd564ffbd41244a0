"""Location-aware sound-event detection and localization metrics.

Reference and predicted event streams are deci-second frame lists of
(class, unit direction vector). Detection quality is scored on
one-second segments with a 20-degree location gate (F-score and error
rate built from per-segment substitutions, deletions, and insertions);
localization quality is scored on class-matched frame pairs (mean
angular error) and a frame-level recall. The three composite errors
average the normalized pieces.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import BiseldError

FRAMES_PER_SEGMENT = 10  # deci-second frames per one-second segment


def direction_vector(azimuth_deg: float, elevation_deg: float) -> np.ndarray:
    """Unit vector with x to the right ear, y to the front, z up."""
    az = math.radians(azimuth_deg)
    el = math.radians(elevation_deg)
    return np.array([math.cos(el) * math.sin(az),
                     math.cos(el) * math.cos(az),
                     math.sin(el)])


def angular_error(u, v) -> float:
    """Great-circle angle in degrees via the chord length, range [0, 180].

    The clip boundaries return exactly 0 and 180 so identical and
    antipodal directions never suffer rounding.
    """
    u = _unit(np.asarray(u, dtype=float))
    v = _unit(np.asarray(v, dtype=float))
    half_chord = float(np.clip(np.linalg.norm(u - v) / 2.0, 0.0, 1.0))
    if half_chord >= 1.0:
        return 180.0
    if half_chord <= 0.0:
        return 0.0
    return math.degrees(2.0 * math.asin(half_chord))


def _unit(v: np.ndarray) -> np.ndarray:
    norm = float(np.linalg.norm(v))
    if norm == 0.0:
        raise BiseldError("zero-length direction vector")
    if abs(norm - 1.0) < 1e-12:
        return v
    return v / norm


@dataclass
class FrameEvents:
    """Events per deci-second frame: frame index -> [(class, unit vector)]."""

    events: dict[int, list[tuple[int, np.ndarray]]] = field(default_factory=dict)
    n_frames: int = 0

    def add(self, frame: int, class_idx: int, vec: np.ndarray) -> None:
        if frame < 0:
            raise BiseldError(f"negative frame index {frame}")
        self.events.setdefault(frame, []).append((class_idx, _unit(vec)))
        self.n_frames = max(self.n_frames, frame + 1)

    def classes(self) -> set[int]:
        return {c for evs in self.events.values() for c, _ in evs}

    def at(self, frame: int) -> list[tuple[int, np.ndarray]]:
        return self.events.get(frame, [])


def read_label_csv(path) -> FrameEvents:
    """Parse `frame,class,azimuth,elevation` rows into a frame-event stream."""
    fe = FrameEvents()
    try:
        text = Path(path).read_text()
    except FileNotFoundError:
        raise BiseldError("no such file", path=str(path)) from None
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        parts = line.split(",")
        if len(parts) != 4:
            raise BiseldError(f"expected 4 comma-separated fields, got {len(parts)}",
                              path=str(path), line=lineno)
        try:
            frame, class_idx = int(parts[0]), int(parts[1])
            az, el = float(parts[2]), float(parts[3])
        except ValueError:
            raise BiseldError(f"malformed number in {line!r}",
                              path=str(path), line=lineno) from None
        fe.add(frame, class_idx, direction_vector(az, el))
    return fe


def concat_frame_events(streams: list[FrameEvents]) -> FrameEvents:
    """Join streams end to end on segment boundaries (no segment straddles files)."""
    joined = FrameEvents()
    offset = 0
    for fe in streams:
        for frame, evs in fe.events.items():
            for class_idx, vec in evs:
                joined.add(offset + frame, class_idx, vec)
        segs = -(-max(fe.n_frames, 1) // FRAMES_PER_SEGMENT)
        offset += segs * FRAMES_PER_SEGMENT
    joined.n_frames = max(joined.n_frames, offset)
    return joined


@dataclass(frozen=True)
class SegmentCounts:
    tp: int
    fp: int
    fn: int
    n: int  # reference-active class count


def _segment_class_vectors(fe: FrameEvents, seg: int) -> dict[int, list[np.ndarray]]:
    by_class: dict[int, list[np.ndarray]] = {}
    for frame in range(seg * FRAMES_PER_SEGMENT, (seg + 1) * FRAMES_PER_SEGMENT):
        for class_idx, vec in fe.at(frame):
            by_class.setdefault(class_idx, []).append(vec)
    return by_class


def segment_counts(ref: FrameEvents, pred: FrameEvents,
                   angle_thresh_deg: float = 20.0,
                   class_filter: int | None = None) -> list[SegmentCounts]:
    """Per-segment TP/FP/FN/N with the location gate.

    A class active in both streams within a segment counts as TP only
    when its best-matching ref/pred angular error beats the threshold;
    otherwise it costs one FP and one FN together.
    """
    n_frames = max(ref.n_frames, pred.n_frames, 1)
    n_segments = -(-n_frames // FRAMES_PER_SEGMENT)
    out = []
    for seg in range(n_segments):
        ref_vecs = _segment_class_vectors(ref, seg)
        pred_vecs = _segment_class_vectors(pred, seg)
        classes = set(ref_vecs) | set(pred_vecs)
        if class_filter is not None:
            classes &= {class_filter}
            ref_active = 1 if class_filter in ref_vecs else 0
        else:
            ref_active = len(ref_vecs)
        tp = fp = fn = 0
        for c in sorted(classes):
            in_ref, in_pred = c in ref_vecs, c in pred_vecs
            if in_ref and in_pred:
                best = min(angular_error(r, p)
                           for r in ref_vecs[c] for p in pred_vecs[c])
                if best < angle_thresh_deg:
                    tp += 1
                else:
                    fp += 1
                    fn += 1
            elif in_pred:
                fp += 1
            else:
                fn += 1
        out.append(SegmentCounts(tp, fp, fn, ref_active))
    return out


def f_score(counts: list[SegmentCounts]) -> float:
    tp = sum(c.tp for c in counts)
    fp = sum(c.fp for c in counts)
    fn = sum(c.fn for c in counts)
    denom = 2 * tp + fp + fn
    if denom == 0:
        return 1.0  # nothing to detect, nothing detected
    return 2.0 * tp / denom


def error_rate(counts: list[SegmentCounts]) -> float:
    """Substitutions, deletions, insertions summed over segments, over total N."""
    total_n = sum(c.n for c in counts)
    if total_n == 0:
        raise BiseldError("error rate undefined: reference has no active events")
    total = 0
    for c in counts:
        s = min(c.fn, c.fp)
        d = max(0, c.fn - c.fp)
        i = max(0, c.fp - c.fn)
        total += s + d + i
    return total / total_n


def class_matched_pairs(ref: FrameEvents, pred: FrameEvents,
                        class_filter: int | None = None) -> list[float]:
    """Frame-level same-class angular errors, matched greedily smallest-first."""
    pairs: list[float] = []
    n_frames = max(ref.n_frames, pred.n_frames)
    for frame in range(n_frames):
        by_class_ref: dict[int, list[np.ndarray]] = {}
        by_class_pred: dict[int, list[np.ndarray]] = {}
        for c, vec in ref.at(frame):
            by_class_ref.setdefault(c, []).append(vec)
        for c, vec in pred.at(frame):
            by_class_pred.setdefault(c, []).append(vec)
        for c in sorted(set(by_class_ref) & set(by_class_pred)):
            if class_filter is not None and c != class_filter:
                continue
            r_vecs, p_vecs = by_class_ref[c], by_class_pred[c]
            cross = sorted(
                (angular_error(r, p), i, j)
                for i, r in enumerate(r_vecs) for j, p in enumerate(p_vecs))
            used_r: set[int] = set()
            used_p: set[int] = set()
            for angle, i, j in cross:
                if i in used_r or j in used_p:
                    continue
                used_r.add(i)
                used_p.add(j)
                pairs.append(angle)
    return pairs


def localization_error(pairs: list[float]) -> tuple[float, bool]:
    """Mean matched angular error; (180, flagged) when nothing matched."""
    if not pairs:
        return 180.0, True
    return float(np.mean(pairs)), False


def localization_recall(ref: FrameEvents, pred: FrameEvents,
                        class_filter: int | None = None) -> float:
    """Frame-level recall: a reference frame-class counts as found when the
    prediction carries the same number of instances of that class."""
    tp = fn = 0
    for frame in range(ref.n_frames):
        ref_counts: dict[int, int] = {}
        for c, _ in ref.at(frame):
            ref_counts[c] = ref_counts.get(c, 0) + 1
        pred_counts: dict[int, int] = {}
        for c, _ in pred.at(frame):
            pred_counts[c] = pred_counts.get(c, 0) + 1
        for c, n_ref in ref_counts.items():
            if class_filter is not None and c != class_filter:
                continue
            if pred_counts.get(c, 0) == n_ref:
                tp += 1
            else:
                fn += 1
    if tp + fn == 0:
        return 1.0
    return tp / (tp + fn)


def composite_errors(er: float, f: float, le_deg: float,
                     lr: float) -> tuple[float, float, float]:
    sed = (er + (1.0 - f)) / 2.0
    doa = (le_deg / 180.0 + (1.0 - lr)) / 2.0
    return sed, doa, (sed + doa) / 2.0


@dataclass
class MetricReport:
    er20: float
    f20: float
    le_cd: float  # degrees
    lr_cd: float
    sed_error: float
    doa_error: float
    seld_error: float
    le_unmatched: bool = False
    per_class: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"er20": self.er20, "f20": self.f20, "le_cd": self.le_cd,
                "lr_cd": self.lr_cd, "sed_error": self.sed_error,
                "doa_error": self.doa_error, "seld_error": self.seld_error,
                "le_unmatched": self.le_unmatched, "per_class": self.per_class}


def evaluate(ref: FrameEvents, pred: FrameEvents,
             angle_thresh_deg: float = 20.0) -> MetricReport:
    """All seven metrics plus per-class breakdowns for one aligned pair."""
    counts = segment_counts(ref, pred, angle_thresh_deg)
    er = error_rate(counts)
    f = f_score(counts)
    le, unmatched = localization_error(class_matched_pairs(ref, pred))
    lr = localization_recall(ref, pred)
    sed, doa, seld = composite_errors(er, f, le, lr)
    per_class = {}
    for c in sorted(ref.classes() | pred.classes()):
        c_counts = segment_counts(ref, pred, angle_thresh_deg, class_filter=c)
        c_le, c_unmatched = localization_error(class_matched_pairs(ref, pred, c))
        try:
            c_er = error_rate(c_counts)
        except BiseldError:
            c_er = None
        per_class[c] = {"er20": c_er, "f20": f_score(c_counts),
                        "le_cd": None if c_unmatched else c_le,
                        "lr_cd": localization_recall(ref, pred, class_filter=c)}
    return MetricReport(er, f, le, lr, sed, doa, seld, unmatched, per_class)
