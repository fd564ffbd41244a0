"""Vector activation maps: regression saliency for one class's DOA vector.

The network is forward-only, so gradients of the class vector norm with
respect to a pivot layer's activations come from central finite
differences, re-evaluating just the graph tail per perturbed element.
The gradients are globally average-pooled into per-channel weights, the
pivot activation is channel-weighted and rectified, and the map is
bilinearly upscaled to the input feature plane.

For a sequence output the objective is the norm summed over output
frames, so the map highlights what supports the class's localization
anywhere in the clip.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import BiseldError
from .net import GraphSpec, downstream_of, forward, tail_forward

KINK_NORM = 1e-9  # below this the norm's gradient is ill-defined


def vector_norm(vec36, class_idx: int) -> float:
    """Euclidean norm of one class's (x, y, z) slice of a 36-value frame."""
    vec = np.asarray(vec36, dtype=float).ravel()
    if vec.size % 3 != 0:
        raise BiseldError(f"output length {vec.size} is not a multiple of 3")
    n_classes = vec.size // 3
    if not 0 <= class_idx < n_classes:
        raise BiseldError(f"class {class_idx} out of range 0..{n_classes - 1}",
                          field="class_idx")
    x, y, z = vec[3 * class_idx:3 * class_idx + 3]
    return float(np.sqrt(x * x + y * y + z * z))


def _objective(output: np.ndarray, class_idx: int) -> float:
    out = np.asarray(output, dtype=float)
    if out.ndim == 1:
        return vector_norm(out, class_idx)
    return float(sum(vector_norm(frame, class_idx) for frame in out))


def pivot_gradients_fd(graph: GraphSpec, params: dict, cache: dict, pivot: str,
                       class_idx: int, step: float | None = None,
                       workers: int = 1) -> np.ndarray:
    """Central-difference d(objective)/d(pivot element), element by element.

    ``cache`` is a capture from forward(); ``step`` defaults to 1e-3 of
    the pivot activation's rms (or 1e-3 outright for a silent pivot).
    """
    chain = downstream_of(graph, pivot)  # validates the pivot name
    if pivot not in cache:
        raise BiseldError(f"capture holds no activation for {pivot!r}",
                          field="pivot")
    base = np.asarray(cache[pivot], dtype=float)
    if step is None:
        rms = float(np.sqrt(np.mean(base ** 2)))
        step = 1e-3 * rms if rms > 0.0 else 1e-3
    if step <= 0.0:
        raise BiseldError("finite-difference step must be positive", field="step")

    flat_indices = list(np.ndindex(base.shape))

    def one(idx) -> float:
        bumped = base.copy()
        bumped[idx] = base[idx] + step
        up = _objective(tail_forward(graph, params, cache, pivot, bumped, chain),
                        class_idx)
        bumped[idx] = base[idx] - step
        down = _objective(tail_forward(graph, params, cache, pivot, bumped, chain),
                          class_idx)
        if not (np.isfinite(up) and np.isfinite(down)):
            raise BiseldError(f"non-finite tail output while perturbing {idx}")
        return (up - down) / (2.0 * step)

    grads = np.empty(base.shape)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            values = list(pool.map(one, flat_indices))
        for idx, val in zip(flat_indices, values):
            grads[idx] = val
    else:
        for idx in flat_indices:
            grads[idx] = one(idx)
    return grads


def gap_weights(grads: np.ndarray) -> np.ndarray:
    """Global average pooling: one weight per channel (last axis)."""
    grads = np.asarray(grads, dtype=float)
    if grads.ndim != 3:
        raise BiseldError(f"expected (T, F, C) gradients, got shape {grads.shape}")
    return grads.mean(axis=(0, 1))


def weighted_sum_relu(pivot_act: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """Channel-weighted sum of the activation, rectified."""
    pivot_act = np.asarray(pivot_act, dtype=float)
    weights = np.asarray(weights, dtype=float).ravel()
    if pivot_act.ndim != 3 or pivot_act.shape[2] != weights.size:
        raise BiseldError(
            f"activation {pivot_act.shape} does not take {weights.size} "
            f"channel weights")
    return np.maximum(pivot_act @ weights, 0.0)


def upscale_to_input(vam_map: np.ndarray, t_target: int, f_target: int) -> np.ndarray:
    """Endpoint-aligned bilinear resize to (t_target, f_target)."""
    m = np.asarray(vam_map, dtype=float)
    if m.ndim != 2:
        raise BiseldError(f"expected a 2-D map, got shape {m.shape}")
    if t_target < 1 or f_target < 1:
        raise BiseldError("target dimensions must be positive")
    t_src, f_src = m.shape
    if (t_src, f_src) == (t_target, f_target):
        return m.copy()
    src_t = np.linspace(0.0, 1.0, t_src)
    dst_t = np.linspace(0.0, 1.0, t_target)
    tmp = np.empty((t_target, f_src))
    for j in range(f_src):
        tmp[:, j] = np.interp(dst_t, src_t, m[:, j])
    src_f = np.linspace(0.0, 1.0, f_src)
    dst_f = np.linspace(0.0, 1.0, f_target)
    out = np.empty((t_target, f_target))
    for i in range(t_target):
        out[i] = np.interp(dst_f, src_f, tmp[i])
    return out


@dataclass
class VamResult:
    map: np.ndarray  # pivot-resolution, nonnegative
    upscaled: np.ndarray  # input-resolution
    class_idx: int
    vector_norm: float  # objective at the unperturbed forward pass
    at_kink: bool = False  # some output frame sat at |v_c| ~ 0


def compute_vam(graph: GraphSpec, params: dict, x: np.ndarray, class_idx: int,
                pivot: str | None = None, step: float | None = None,
                workers: int = 1) -> VamResult:
    """Full pipeline: forward, FD gradients at the pivot, GAP, weighted ReLU."""
    x = np.asarray(x, dtype=float)
    if pivot is None:
        if not graph.pivots:
            raise BiseldError("graph declares no pivot layers; pass one by name",
                              field="pivot")
        pivot = graph.pivots[0]
    output, cache = forward(graph, params, x, capture=True)
    out2d = np.atleast_2d(np.asarray(output, dtype=float))
    norms = [vector_norm(frame, class_idx) for frame in out2d]
    at_kink = any(n < KINK_NORM for n in norms)
    grads = pivot_gradients_fd(graph, params, cache, pivot, class_idx,
                               step=step, workers=workers)
    weights = gap_weights(grads)
    vam_map = weighted_sum_relu(cache[pivot], weights)
    upscaled = upscale_to_input(vam_map, x.shape[0], x.shape[1])
    return VamResult(vam_map, upscaled, class_idx, float(sum(norms)), at_kink)
