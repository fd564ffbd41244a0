"""Independent oracles used only by the tests.

Everything here reaches the target quantity by a different route than
the library (quadrature, closed-form layer tables, naive loops over
plain tuples), so agreement between the two is evidence, not tautology.
None of the library's numerical code is imported.
"""

from __future__ import annotations

import math

import numpy as np
from scipy import integrate, special


# ---------------------------------------------------------------------------
# Special functions


def struve_h1_quad(x: float) -> float:
    """Struve H1 via its finite integral representation."""
    val, _ = integrate.quad(lambda t: math.sqrt(1.0 - t * t) * math.sin(x * t),
                            0.0, 1.0, limit=200)
    return 2.0 * x / math.pi * val


def bessel_j1_quad(x: float) -> float:
    """Bessel J1 via the cosine integral representation."""
    val, _ = integrate.quad(lambda t: math.cos(t - x * math.sin(t)),
                            0.0, math.pi, limit=200)
    return val / math.pi


def struve_h1_ref(x):
    return special.struve(1, x)


def bessel_j1_ref(x):
    return special.j1(x)


# ---------------------------------------------------------------------------
# Parameter counting: closed-form per-layer table


def layer_param_counts(kind: str, attrs: dict) -> tuple[int, int]:
    """(trainable, non_trainable) for one layer, from first principles."""
    if kind == "conv":
        kh, kw = attrs.get("kernel", (1, 1))
        cin, cout = attrs["in_channels"], attrs["out_channels"]
        return cout * cin * kh * kw + cout, 0
    if kind == "dsep_conv":
        cin, cout = attrs["in_channels"], attrs["out_channels"]
        return cin * 9 + cout * cin + cout, 0
    if kind == "batch_norm":
        c = attrs["channels"]
        return 2 * c, 2 * c
    if kind == "dense":
        i, o = attrs["in_features"], attrs["out_features"]
        return i * o + o, 0
    if kind == "gru":
        d, h = attrs["input_size"], attrs["hidden"]
        per_direction = d * 3 * h + h * 3 * h + 3 * h
        n = 2 if attrs.get("bidirectional", True) else 1
        return n * per_direction, 0
    return 0, 0


def graph_param_counts(layer_specs) -> tuple[int, int]:
    """Totals over (kind, attrs) pairs."""
    trainable = frozen = 0
    for kind, attrs in layer_specs:
        t, f = layer_param_counts(kind, attrs)
        trainable += t
        frozen += f
    return trainable, frozen


# ---------------------------------------------------------------------------
# Naive detection/localization scorer
#
# Events are plain tuples (frame, class, azimuth_deg, elevation_deg).


def _vec(az: float, el: float) -> np.ndarray:
    azr, elr = math.radians(az), math.radians(el)
    return np.array([math.cos(elr) * math.sin(azr),
                     math.cos(elr) * math.cos(azr),
                     math.sin(elr)])


def _angle(u: np.ndarray, v: np.ndarray) -> float:
    un = u / np.linalg.norm(u)
    vn = v / np.linalg.norm(v)
    half = np.linalg.norm(un - vn) / 2.0
    if half >= 1.0:
        return 180.0
    if half <= 0.0:
        return 0.0
    return math.degrees(2.0 * math.asin(half))


def naive_evaluate(ref, pred, n_frames: int, angle_deg: float = 20.0) -> dict:
    """Brute-force scores over tuple events; loops only, no shared code."""
    by_frame_ref: dict[int, list] = {}
    by_frame_pred: dict[int, list] = {}
    for frame, cls, az, el in ref:
        by_frame_ref.setdefault(frame, []).append((cls, _vec(az, el)))
    for frame, cls, az, el in pred:
        by_frame_pred.setdefault(frame, []).append((cls, _vec(az, el)))

    n_segments = (n_frames + 9) // 10
    tp = fp = fn = n_total = 0
    subs = dels = ins = 0
    for seg in range(n_segments):
        frames = range(seg * 10, min((seg + 1) * 10, n_frames))
        ref_cls: dict[int, list] = {}
        pred_cls: dict[int, list] = {}
        for f in frames:
            for cls, vec in by_frame_ref.get(f, []):
                ref_cls.setdefault(cls, []).append(vec)
            for cls, vec in by_frame_pred.get(f, []):
                pred_cls.setdefault(cls, []).append(vec)
        n_total += len(ref_cls)
        seg_fp = seg_fn = 0
        for cls in set(ref_cls) | set(pred_cls):
            in_ref, in_pred = cls in ref_cls, cls in pred_cls
            if in_ref and in_pred:
                best = min(_angle(u, v) for u in ref_cls[cls]
                           for v in pred_cls[cls])
                if best < angle_deg:
                    tp += 1
                else:
                    seg_fp += 1
                    seg_fn += 1
            elif in_pred:
                seg_fp += 1
            else:
                seg_fn += 1
        fp += seg_fp
        fn += seg_fn
        subs += min(seg_fn, seg_fp)
        dels += max(0, seg_fn - seg_fp)
        ins += max(0, seg_fp - seg_fn)

    denom = 2 * tp + fp + fn
    f_score = 1.0 if denom == 0 else 2.0 * tp / denom
    if n_total == 0:
        raise ZeroDivisionError("no reference activity")
    er = (subs + dels + ins) / n_total

    # frame-level class-matched greedy pairs for LE
    angles: list[float] = []
    for f in range(n_frames):
        ref_f: dict[int, list] = {}
        pred_f: dict[int, list] = {}
        for cls, vec in by_frame_ref.get(f, []):
            ref_f.setdefault(cls, []).append(vec)
        for cls, vec in by_frame_pred.get(f, []):
            pred_f.setdefault(cls, []).append(vec)
        for cls in sorted(set(ref_f) & set(pred_f)):
            cand = sorted(
                (_angle(u, v), i, j)
                for i, u in enumerate(ref_f[cls])
                for j, v in enumerate(pred_f[cls]))
            used_i: set[int] = set()
            used_j: set[int] = set()
            for ang, i, j in cand:
                if i in used_i or j in used_j:
                    continue
                used_i.add(i)
                used_j.add(j)
                angles.append(ang)
    if angles:
        le, le_unmatched = sum(angles) / len(angles), False
    else:
        le, le_unmatched = 180.0, True

    # localization recall: per frame x class with reference activity
    lr_tp = lr_total = 0
    for f in range(n_frames):
        ref_f = {}
        pred_f = {}
        for cls, _ in by_frame_ref.get(f, []):
            ref_f[cls] = ref_f.get(cls, 0) + 1
        for cls, _ in by_frame_pred.get(f, []):
            pred_f[cls] = pred_f.get(cls, 0) + 1
        for cls, count in ref_f.items():
            lr_total += 1
            if pred_f.get(cls, 0) == count:
                lr_tp += 1
    lr = 1.0 if lr_total == 0 else lr_tp / lr_total

    sed = (er + (1.0 - f_score)) / 2.0
    doa = (le / 180.0 + (1.0 - lr)) / 2.0
    return {"er": er, "f": f_score, "le": le, "le_unmatched": le_unmatched,
            "lr": lr, "sed": sed, "doa": doa, "seld": (sed + doa) / 2.0}


# ---------------------------------------------------------------------------
# Linear-tail saliency gradient


def linear_tail_gradient(weight: np.ndarray, bias: np.ndarray,
                         flat_act: np.ndarray, class_idx: int) -> np.ndarray:
    """d|v_c|/da for v = W a + b with v_c = v[3c:3c+3]; returns a-shaped grad."""
    rows = weight[3 * class_idx:3 * class_idx + 3, :]
    v = rows @ flat_act + bias[3 * class_idx:3 * class_idx + 3]
    norm = np.linalg.norm(v)
    if norm == 0.0:
        return np.zeros_like(flat_act)
    return rows.T @ (v / norm)
