"""Declarative network graph with forward inference and parameter counting.

A graph is an ordered list of named layers (depthwise separable and plain
convolutions, inference batch norm, activations, pooling, concat, skip
add, reshape, GRU, dense). The stock architecture stacks ten Trinity
modules, whose output channels are split across three depthwise-separable
branches with 3x3, 5x5, and 7x7 receptive fields, then two bidirectional
GRU layers and a dense head that emits one 3-vector per class squashed
by tanh.

Forward passes are inference-only (float64, single input); saliency
gradients are obtained elsewhere by finite differences, which is why
forward() can capture every activation and tail_forward() re-evaluates
only the layers downstream of a chosen pivot.

GRU gate variant (documented choice): update and reset gates from input
and previous state, reset applied to the state before the candidate
matmul, one shared bias per gate stack:
    z = sigmoid(x W_z + h U_z + b_z)
    r = sigmoid(x W_r + h U_r + b_r)
    n = tanh(x W_n + (r * h) U_n + b_n)
    h' = z * h + (1 - z) * n
Weights pack as W (D, 3H), U (H, 3H), b (3H,) in [z | r | n] order.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import BiseldError

BN_EPS = 1e-5
BCE_CLAMP = 1e-7

KINDS = ("input", "dsep_conv", "conv", "batch_norm", "relu", "tanh", "sigmoid",
         "max_pool", "concat", "add", "reshape", "gru", "dense")


def relu(x):
    return np.maximum(x, 0.0)


def sigmoid(x):
    return 1.0 / (1.0 + np.exp(-np.asarray(x, dtype=float)))


def tanh_act(x):
    return np.tanh(x)


@dataclass(frozen=True)
class LayerSpec:
    name: str
    kind: str
    inputs: tuple[str, ...] = ()
    attrs: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise BiseldError(f"unknown layer kind {self.kind!r}", field=self.name)

    def attr(self, key):
        if key not in self.attrs:
            raise BiseldError(f"layer {self.name!r} missing attribute {key!r}",
                              field=key)
        return self.attrs[key]


@dataclass(frozen=True)
class GraphSpec:
    layers: tuple[LayerSpec, ...]
    pivots: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        seen: set[str] = set()
        n_inputs = 0
        for layer in self.layers:
            if layer.name in seen:
                raise BiseldError(f"duplicate layer name {layer.name!r}")
            if layer.kind == "input":
                n_inputs += 1
                if layer.inputs:
                    raise BiseldError("input layer cannot have inputs",
                                      field=layer.name)
            else:
                if not layer.inputs:
                    raise BiseldError(f"layer {layer.name!r} has no inputs")
                for src in layer.inputs:
                    if src not in seen:
                        raise BiseldError(
                            f"layer {layer.name!r} reads {src!r} before it is "
                            f"defined")
            seen.add(layer.name)
        if n_inputs != 1:
            raise BiseldError(f"graph must have exactly one input layer, "
                              f"found {n_inputs}")
        for pivot in self.pivots:
            if pivot not in seen:
                raise BiseldError(f"pivot {pivot!r} is not a layer name")

    def layer(self, name: str) -> LayerSpec:
        for layer in self.layers:
            if layer.name == name:
                return layer
        raise BiseldError(f"no layer named {name!r}")

    @property
    def output_name(self) -> str:
        return self.layers[-1].name


def save_graph(graph: GraphSpec, path) -> None:
    doc = {"layers": [{"name": l.name, "kind": l.kind, "inputs": list(l.inputs),
                       **l.attrs} for l in graph.layers],
           "pivots": list(graph.pivots)}
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def load_graph(path) -> GraphSpec:
    try:
        doc = json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise BiseldError("no such file", path=str(path)) from None
    except json.JSONDecodeError as exc:
        raise BiseldError(f"invalid JSON: {exc.msg}", path=str(path),
                          line=exc.lineno) from exc
    if not isinstance(doc, dict) or "layers" not in doc:
        raise BiseldError("graph file must hold an object with a 'layers' list",
                          path=str(path))
    layers = []
    for i, raw in enumerate(doc["layers"]):
        if not isinstance(raw, dict) or "name" not in raw or "kind" not in raw:
            raise BiseldError(f"layer {i} must carry 'name' and 'kind'",
                              path=str(path), field=f"layers[{i}]")
        attrs = {k: v for k, v in raw.items() if k not in ("name", "kind", "inputs")}
        layers.append(LayerSpec(raw["name"], raw["kind"],
                                tuple(raw.get("inputs", ())), attrs))
    return GraphSpec(tuple(layers), tuple(doc.get("pivots", ())))


# ---------------------------------------------------------------------------
# Trinity kernel allocation

@dataclass(frozen=True)
class KernelAllocation:
    """Per-branch output channels and internal stage widths.

    c_out splits as b1 = b2 = floor(c_out/3), b3 = the remainder-absorbing
    rest. Stage widths follow the halving ladder; zero-width stages are
    simply absent from the built module (they hold no kernels).
    """

    b1: int
    b2: int
    b3: int

    @property
    def branch_widths(self) -> tuple[tuple[int, ...], ...]:
        return ((self.b1,), (self.b2 // 2, self.b2),
                (self.b3 // 4, self.b3 // 2, self.b3))

    @property
    def c_out(self) -> int:
        return self.b1 + self.b2 + self.b3

    @property
    def total_kernels(self) -> int:
        return sum(sum(ws) for ws in self.branch_widths)


def trinity_allocation(c_out: int) -> KernelAllocation:
    if c_out < 3:
        raise BiseldError(f"Trinity module needs at least 3 output channels, "
                          f"got {c_out}", field="c_out")
    third = c_out // 3
    return KernelAllocation(third, third, c_out - 2 * third)


# ---------------------------------------------------------------------------
# Layer forwards

def dsep_conv_forward(x: np.ndarray, depthwise: np.ndarray, pointwise: np.ndarray,
                      bias: np.ndarray) -> np.ndarray:
    """Per-channel 3x3 'same' convolution, then 1x1 channel mixing plus bias."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 3:
        raise BiseldError(f"expected (T, F, C) input, got shape {x.shape}")
    t, f, c = x.shape
    if depthwise.shape != (c, 3, 3):
        raise BiseldError(f"depthwise kernels {depthwise.shape}, expected ({c}, 3, 3)")
    if pointwise.ndim != 2 or pointwise.shape[1] != c:
        raise BiseldError(f"pointwise matrix {pointwise.shape} does not take "
                          f"{c} channels")
    if bias.shape != (pointwise.shape[0],):
        raise BiseldError(f"bias {bias.shape}, expected ({pointwise.shape[0]},)")
    padded = np.zeros((t + 2, f + 2, c))
    padded[1:-1, 1:-1, :] = x
    depth = np.zeros_like(x)
    for dt in range(3):
        for df in range(3):
            depth += padded[dt:dt + t, df:df + f, :] * depthwise[:, dt, df]
    return depth @ pointwise.T + bias


def conv_forward(x: np.ndarray, weight: np.ndarray, bias: np.ndarray) -> np.ndarray:
    """Full convolution ('same', stride 1) with a (C_out, C_in, kh, kw) kernel."""
    x = np.asarray(x, dtype=float)
    t, f, c = x.shape
    c_out, c_in, kh, kw = weight.shape
    if c_in != c:
        raise BiseldError(f"kernel takes {c_in} channels, input has {c}")
    pt, pf = kh // 2, kw // 2
    padded = np.zeros((t + 2 * pt, f + 2 * pf, c))
    padded[pt:pt + t, pf:pf + f, :] = x
    out = np.zeros((t, f, c_out))
    for dt in range(kh):
        for df in range(kw):
            out += padded[dt:dt + t, df:df + f, :] @ weight[:, :, dt, df].T
    return out + bias


def batch_norm_forward(x: np.ndarray, gamma, beta, mean, var,
                       eps: float = BN_EPS) -> np.ndarray:
    return (x - mean) / np.sqrt(var + eps) * gamma + beta


def max_pool_forward(x: np.ndarray, pool_t: int, pool_f: int) -> np.ndarray:
    t, f, c = x.shape
    t2, f2 = t // pool_t, f // pool_f
    if t2 == 0 or f2 == 0:
        raise BiseldError(f"input {x.shape[:2]} too small for pool "
                          f"({pool_t}, {pool_f})")
    trimmed = x[:t2 * pool_t, :f2 * pool_f, :]
    return trimmed.reshape(t2, pool_t, f2, pool_f, c).max(axis=(1, 3))


def _gru_direction(seq: np.ndarray, w: np.ndarray, u: np.ndarray,
                   b: np.ndarray) -> np.ndarray:
    t, d = seq.shape
    h_size = u.shape[0]
    if w.shape != (d, 3 * h_size) or u.shape != (h_size, 3 * h_size) \
            or b.shape != (3 * h_size,):
        raise BiseldError(
            f"GRU weight shapes W{w.shape} U{u.shape} b{b.shape} inconsistent "
            f"with input width {d}")
    xw = seq @ w + b
    h = np.zeros(h_size)
    out = np.zeros((t, h_size))
    for i in range(t):
        gates = sigmoid(xw[i, :2 * h_size] + h @ u[:, :2 * h_size])
        z, r = gates[:h_size], gates[h_size:]
        n = np.tanh(xw[i, 2 * h_size:] + (r * h) @ u[:, 2 * h_size:])
        h = z * h + (1.0 - z) * n
        out[i] = h
    return out


def gru_forward(seq: np.ndarray, params: dict, bidirectional: bool = True,
                prefix: str = "") -> np.ndarray:
    """Run the recurrence over a (T, D) sequence; bidirectional gives (T, 2H)."""
    seq = np.asarray(seq, dtype=float)
    if seq.ndim != 2:
        raise BiseldError(f"expected a (T, D) sequence, got shape {seq.shape}")
    fwd = _gru_direction(seq, params[prefix + "w_f"], params[prefix + "u_f"],
                         params[prefix + "b_f"])
    if not bidirectional:
        return fwd
    bwd = _gru_direction(seq[::-1], params[prefix + "w_b"], params[prefix + "u_b"],
                         params[prefix + "b_b"])[::-1]
    return np.concatenate([fwd, bwd], axis=1)


# ---------------------------------------------------------------------------
# Graph execution

def _param(params: dict, layer: str, name: str) -> np.ndarray:
    key = f"{layer}/{name}"
    if key not in params:
        raise BiseldError(f"missing parameter {key!r}")
    return params[key]


def _layer_forward(layer: LayerSpec, inputs: list[np.ndarray],
                   params: dict) -> np.ndarray:
    kind = layer.kind
    if kind == "dsep_conv":
        return dsep_conv_forward(inputs[0], _param(params, layer.name, "depthwise"),
                                 _param(params, layer.name, "pointwise"),
                                 _param(params, layer.name, "bias"))
    if kind == "conv":
        return conv_forward(inputs[0], _param(params, layer.name, "weight"),
                            _param(params, layer.name, "bias"))
    if kind == "batch_norm":
        return batch_norm_forward(inputs[0], _param(params, layer.name, "gamma"),
                                  _param(params, layer.name, "beta"),
                                  _param(params, layer.name, "mean"),
                                  _param(params, layer.name, "var"))
    if kind == "relu":
        return relu(inputs[0])
    if kind == "tanh":
        return np.tanh(inputs[0])
    if kind == "sigmoid":
        return sigmoid(inputs[0])
    if kind == "max_pool":
        pool = layer.attr("pool")
        return max_pool_forward(inputs[0], int(pool[0]), int(pool[1]))
    if kind == "concat":
        return np.concatenate(inputs, axis=-1)
    if kind == "add":
        a, b = inputs
        if a.shape != b.shape:
            raise BiseldError(f"add inputs differ in shape: {a.shape} vs {b.shape}",
                              field=layer.name)
        return a + b
    if kind == "reshape":
        x = inputs[0]
        return x.reshape(x.shape[0], -1)
    if kind == "gru":
        return gru_forward(inputs[0], params,
                           bidirectional=bool(layer.attrs.get("bidirectional", True)),
                           prefix=layer.name + "/")
    if kind == "dense":
        w = _param(params, layer.name, "weight")
        b = _param(params, layer.name, "bias")
        return inputs[0] @ w.T + b
    raise BiseldError(f"kind {kind!r} has no forward rule", field=layer.name)


def forward(graph: GraphSpec, params: dict, x: np.ndarray,
            capture: bool = False):
    """Run the graph on one input tensor.

    Returns the output, or (output, activations) when ``capture`` is set;
    activations maps every layer name to its value.
    """
    x = np.asarray(x, dtype=float)
    acts: dict[str, np.ndarray] = {}
    for layer in graph.layers:
        if layer.kind == "input":
            shape = layer.attrs.get("shape")
            if shape is not None:
                want = tuple(shape[1:])
                if x.shape[1:] != want:
                    raise BiseldError(
                        f"input shape {x.shape} does not end in {want}",
                        field=layer.name)
            acts[layer.name] = x
        else:
            acts[layer.name] = _layer_forward(
                layer, [acts[src] for src in layer.inputs], params)
    out = acts[graph.output_name]
    return (out, acts) if capture else out


def downstream_of(graph: GraphSpec, pivot: str) -> list[LayerSpec]:
    """Layers whose value depends on the pivot, in evaluation order."""
    graph.layer(pivot)  # existence check
    tainted = {pivot}
    chain = []
    for layer in graph.layers:
        if layer.name == pivot:
            continue
        if any(src in tainted for src in layer.inputs):
            tainted.add(layer.name)
            chain.append(layer)
    return chain


def tail_forward(graph: GraphSpec, params: dict, cache: dict, pivot: str,
                 pivot_value: np.ndarray,
                 chain: list[LayerSpec] | None = None) -> np.ndarray:
    """Re-evaluate only the layers downstream of ``pivot``.

    ``cache`` holds a full-forward activation capture; untouched layers
    are read from it, so the cost is the tail alone.
    """
    if chain is None:
        chain = downstream_of(graph, pivot)
    acts = dict(cache)
    acts[pivot] = pivot_value
    for layer in chain:
        acts[layer.name] = _layer_forward(
            layer, [acts[src] for src in layer.inputs], params)
    return acts[graph.output_name]


# ---------------------------------------------------------------------------
# Shape inference (T stays symbolic; pooling tracks its divisor)

def infer_shapes(graph: GraphSpec) -> dict[str, tuple]:
    """Static shapes as ('map', F, C) or ('seq', D); T is left symbolic.

    Raises when declared layer attributes cannot chain.
    """
    shapes: dict[str, tuple] = {}
    for layer in graph.layers:
        kind = layer.kind
        if kind == "input":
            shape = layer.attr("shape")
            shapes[layer.name] = ("map", int(shape[1]), int(shape[2]))
            continue
        src = [shapes[s] for s in layer.inputs]
        if kind == "dsep_conv":
            tag, f, c = src[0]
            if tag != "map" or c != int(layer.attr("in_channels")):
                raise BiseldError(f"{layer.name}: expects {layer.attr('in_channels')} "
                                  f"channels, input has {src[0]}")
            shapes[layer.name] = ("map", f, int(layer.attr("out_channels")))
        elif kind == "conv":
            tag, f, c = src[0]
            if tag != "map" or c != int(layer.attr("in_channels")):
                raise BiseldError(f"{layer.name}: channel mismatch {src[0]}")
            shapes[layer.name] = ("map", f, int(layer.attr("out_channels")))
        elif kind == "batch_norm":
            tag, *rest = src[0]
            c = rest[-1]
            if c != int(layer.attr("channels")):
                raise BiseldError(f"{layer.name}: normalizes "
                                  f"{layer.attr('channels')} channels, input has {c}")
            shapes[layer.name] = src[0]
        elif kind in ("relu", "tanh", "sigmoid"):
            shapes[layer.name] = src[0]
        elif kind == "max_pool":
            tag, f, c = src[0]
            pool = layer.attr("pool")
            f2 = f // int(pool[1])
            if tag != "map" or f2 == 0:
                raise BiseldError(f"{layer.name}: cannot pool {src[0]} by {pool}")
            shapes[layer.name] = ("map", f2, c)
        elif kind == "concat":
            tag, f, _ = src[0]
            if any(s[:2] != (tag, f) for s in src):
                raise BiseldError(f"{layer.name}: concat inputs disagree: {src}")
            shapes[layer.name] = (tag, f, sum(s[2] for s in src))
        elif kind == "add":
            if src[0] != src[1]:
                raise BiseldError(f"{layer.name}: add inputs disagree: {src}")
            shapes[layer.name] = src[0]
        elif kind == "reshape":
            tag, f, c = src[0]
            shapes[layer.name] = ("seq", f * c)
        elif kind == "gru":
            if src[0][0] != "seq":
                raise BiseldError(f"{layer.name}: GRU needs a sequence, got {src[0]}")
            d = src[0][1]
            if d != int(layer.attr("input_size")):
                raise BiseldError(f"{layer.name}: declared input_size "
                                  f"{layer.attr('input_size')}, input is {d}")
            width = int(layer.attr("hidden"))
            if layer.attrs.get("bidirectional", True):
                width *= 2
            shapes[layer.name] = ("seq", width)
        elif kind == "dense":
            tag, d = src[0]
            if tag != "seq" or d != int(layer.attr("in_features")):
                raise BiseldError(f"{layer.name}: dense expects "
                                  f"{layer.attr('in_features')} features, got {src[0]}")
            shapes[layer.name] = ("seq", int(layer.attr("out_features")))
        else:
            raise BiseldError(f"no shape rule for kind {kind!r}", field=layer.name)
    return shapes


# ---------------------------------------------------------------------------
# Parameters

def _param_shapes(layer: LayerSpec) -> dict[str, tuple]:
    kind = layer.kind
    if kind == "dsep_conv":
        c_in = int(layer.attr("in_channels"))
        c_out = int(layer.attr("out_channels"))
        return {"depthwise": (c_in, 3, 3), "pointwise": (c_out, c_in),
                "bias": (c_out,)}
    if kind == "conv":
        c_in = int(layer.attr("in_channels"))
        c_out = int(layer.attr("out_channels"))
        kh, kw = layer.attrs.get("kernel", (1, 1))
        return {"weight": (c_out, c_in, int(kh), int(kw)), "bias": (c_out,)}
    if kind == "batch_norm":
        c = int(layer.attr("channels"))
        return {"gamma": (c,), "beta": (c,), "mean": (c,), "var": (c,)}
    if kind == "gru":
        d = int(layer.attr("input_size"))
        h = int(layer.attr("hidden"))
        shapes = {"w_f": (d, 3 * h), "u_f": (h, 3 * h), "b_f": (3 * h,)}
        if layer.attrs.get("bidirectional", True):
            shapes.update({"w_b": (d, 3 * h), "u_b": (h, 3 * h), "b_b": (3 * h,)})
        return shapes
    if kind == "dense":
        d_in = int(layer.attr("in_features"))
        d_out = int(layer.attr("out_features"))
        return {"weight": (d_out, d_in), "bias": (d_out,)}
    return {}


_ZERO_INIT = ("bias", "beta", "mean", "b_f", "b_b")
_ONE_INIT = ("gamma", "var")


def init_params(graph: GraphSpec, seed: int = 0, scale: float = 0.05) -> dict:
    """Random-normal weights, zero biases, identity norm statistics."""
    infer_shapes(graph)  # validate chaining before allocating
    rng = np.random.default_rng(seed)
    params: dict[str, np.ndarray] = {}
    for layer in graph.layers:
        for pname, shape in _param_shapes(layer).items():
            key = f"{layer.name}/{pname}"
            if pname in _ZERO_INIT:
                params[key] = np.zeros(shape)
            elif pname in _ONE_INIT:
                params[key] = np.ones(shape)
            else:
                params[key] = rng.normal(0.0, scale, shape)
    return params


def count_params(graph: GraphSpec) -> dict:
    """Analytic totals: {trainable, non_trainable, total}."""
    infer_shapes(graph)
    trainable = 0
    frozen = 0
    for layer in graph.layers:
        for pname, shape in _param_shapes(layer).items():
            n = int(np.prod(shape))
            if layer.kind == "batch_norm" and pname in ("mean", "var"):
                frozen += n
            else:
                trainable += n
    return {"trainable": trainable, "non_trainable": frozen,
            "total": trainable + frozen}


def param_breakdown(graph: GraphSpec) -> list[tuple[str, int]]:
    rows = []
    for layer in graph.layers:
        n = sum(int(np.prod(s)) for s in _param_shapes(layer).values())
        if n:
            rows.append((layer.name, n))
    return rows


# ---------------------------------------------------------------------------
# Weight file: "BWF1", u32 count, then per array
# u16 name bytes, name, u8 ndim, u32 dims..., f32 data (little-endian)

_WEIGHTS_MAGIC = b"BWF1"


def save_params(path, params: dict) -> None:
    chunks = [_WEIGHTS_MAGIC, struct.pack("<I", len(params))]
    for name in sorted(params):
        arr = np.ascontiguousarray(params[name], dtype="<f4")
        encoded = name.encode("utf-8")
        chunks.append(struct.pack("<H", len(encoded)))
        chunks.append(encoded)
        chunks.append(struct.pack("<B", arr.ndim))
        chunks.append(struct.pack(f"<{arr.ndim}I", *arr.shape))
        chunks.append(arr.tobytes())
    Path(path).write_bytes(b"".join(chunks))


def load_params(path) -> dict:
    raw = Path(path).read_bytes()
    if len(raw) < 8 or raw[:4] != _WEIGHTS_MAGIC:
        raise BiseldError("not a weight file (bad magic)", path=str(path))
    count = struct.unpack_from("<I", raw, 4)[0]
    offset = 8
    params: dict[str, np.ndarray] = {}
    for _ in range(count):
        try:
            name_len = struct.unpack_from("<H", raw, offset)[0]
            offset += 2
            name = raw[offset:offset + name_len].decode("utf-8")
            offset += name_len
            ndim = struct.unpack_from("<B", raw, offset)[0]
            offset += 1
            shape = struct.unpack_from(f"<{ndim}I", raw, offset)
            offset += 4 * ndim
            n = int(np.prod(shape)) if ndim else 1
            arr = np.frombuffer(raw, dtype="<f4", count=n, offset=offset)
            offset += 4 * n
        except (struct.error, ValueError) as exc:
            raise BiseldError(f"truncated weight file: {exc}", path=str(path)) from exc
        params[name] = arr.reshape(shape).astype(float)
    if offset != len(raw):
        raise BiseldError(f"{len(raw) - offset} trailing bytes after the last array",
                          path=str(path))
    return params


# ---------------------------------------------------------------------------
# Stock architecture

def _add_trinity(layers: list[LayerSpec], index: int, src: str, c_in: int,
                 c_out: int) -> str:
    name = f"tri{index}"
    alloc = trinity_allocation(c_out)
    branch_ends = []
    for bi, widths in enumerate(alloc.branch_widths, start=1):
        prev, prev_c = src, c_in
        stage = 0
        for width in widths:
            if width == 0:
                continue
            stage += 1
            lname = f"{name}_b{bi}s{stage}"
            layers.append(LayerSpec(lname, "dsep_conv", (prev,),
                                    {"in_channels": prev_c, "out_channels": width}))
            prev, prev_c = lname, width
        branch_ends.append(prev)
    concat_name = f"concat{index}"
    layers.append(LayerSpec(concat_name, "concat", tuple(branch_ends)))
    skip = src
    if c_in != c_out:
        skip = f"{name}_proj"
        layers.append(LayerSpec(skip, "conv", (src,),
                                {"in_channels": c_in, "out_channels": c_out,
                                 "kernel": [1, 1]}))
    layers.append(LayerSpec(f"{name}_add", "add", (concat_name, skip)))
    layers.append(LayerSpec(f"{name}_bn", "batch_norm", (f"{name}_add",),
                            {"channels": c_out}))
    layers.append(LayerSpec(f"{name}_relu", "relu", (f"{name}_bn",)))
    return f"{name}_relu"


TRINITY_CHANNELS = (32, 64, 64, 128, 128, 256, 256, 256, 512, 512)


def biseldnet_v4(n_bins: int = 64, n_channels: int = 8,
                 n_classes: int = 12) -> GraphSpec:
    """The stock ten-module graph: stem, Trinity stack, BiGRUs, dense head.

    Time pools once by 5 (20 ms frames become deci-seconds) and frequency
    halves five times (64 mel bins down to 2) before the recurrent stage.
    """
    layers: list[LayerSpec] = [
        LayerSpec("input", "input", (), {"shape": [None, n_bins, n_channels]}),
        LayerSpec("stem", "dsep_conv", ("input",),
                  {"in_channels": n_channels, "out_channels": 32}),
        LayerSpec("stem_bn", "batch_norm", ("stem",), {"channels": 32}),
        LayerSpec("stem_relu", "relu", ("stem_bn",)),
    ]
    src, c_in = "stem_relu", 32
    pool_after = {2: (5, 2), 4: (1, 2), 6: (1, 2), 8: (1, 2), 10: (1, 2)}
    freq = n_bins
    for i, c_out in enumerate(TRINITY_CHANNELS, start=1):
        src = _add_trinity(layers, i, src, c_in, c_out)
        c_in = c_out
        if i in pool_after:
            pool = pool_after[i]
            layers.append(LayerSpec(f"pool{i}", "max_pool", (src,),
                                    {"pool": list(pool)}))
            src = f"pool{i}"
            freq //= pool[1]
    layers.append(LayerSpec("reshape", "reshape", (src,)))
    d = freq * TRINITY_CHANNELS[-1]
    layers.append(LayerSpec("gru1", "gru", ("reshape",),
                            {"input_size": d, "hidden": 128, "bidirectional": True}))
    layers.append(LayerSpec("gru2", "gru", ("gru1",),
                            {"input_size": 256, "hidden": 128, "bidirectional": True}))
    layers.append(LayerSpec("fc1", "dense", ("gru2",),
                            {"in_features": 256, "out_features": 128}))
    layers.append(LayerSpec("fc1_relu", "relu", ("fc1",)))
    layers.append(LayerSpec("fc2", "dense", ("fc1_relu",),
                            {"in_features": 128, "out_features": 128}))
    layers.append(LayerSpec("fc2_relu", "relu", ("fc2",)))
    layers.append(LayerSpec("fc3", "dense", ("fc2_relu",),
                            {"in_features": 128, "out_features": 3 * n_classes}))
    layers.append(LayerSpec("out_tanh", "tanh", ("fc3",)))
    return GraphSpec(tuple(layers), pivots=("concat8",))


def trinity_forward(x: np.ndarray, params: dict, alloc: KernelAllocation,
                    name: str = "tri1") -> np.ndarray:
    """Run one Trinity module standalone (parameters named as in the builder)."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 3:
        raise BiseldError(f"expected (T, F, C) input, got {x.shape}")
    c_in = x.shape[2]
    index = int(name[3:]) if name.startswith("tri") and name[3:].isdigit() else 1
    layers: list[LayerSpec] = [
        LayerSpec("input", "input", (), {"shape": [None, x.shape[1], c_in]})]
    _add_trinity(layers, index, "input", c_in, alloc.c_out)
    graph = GraphSpec(tuple(layers))
    return forward(graph, params, x)


# ---------------------------------------------------------------------------
# Output decoding

def decode_output(vec36, threshold: float = 0.5) -> list[tuple[int, float, float, float]]:
    """Active classes with their directions from one 36-value frame.

    Each class owns (x, y, z) pointing right/front/up; it is active when
    the vector norm exceeds the threshold. Azimuth is atan2(x, y) so +90
    is the right ear; elevation is the angle above the horizontal plane.
    """
    vec = np.asarray(vec36, dtype=float).ravel()
    if vec.size % 3 != 0:
        raise BiseldError(f"output length {vec.size} is not a multiple of 3")
    events = []
    for c in range(vec.size // 3):
        x, y, z = vec[3 * c:3 * c + 3]
        mag = float(np.sqrt(x * x + y * y + z * z))
        if mag > threshold:
            az = float(np.degrees(np.arctan2(x, y)))
            el = float(np.degrees(np.arctan2(z, np.hypot(x, y))))
            events.append((c, az, el, mag))
    return events


# ---------------------------------------------------------------------------
# Losses and optimizer steps

def loss_mse(y, y_hat) -> float:
    y = np.asarray(y, dtype=float)
    y_hat = np.asarray(y_hat, dtype=float)
    if y.shape != y_hat.shape:
        raise BiseldError(f"shape mismatch: {y.shape} vs {y_hat.shape}")
    return float(np.mean((y - y_hat) ** 2))


def loss_bce(y, y_hat) -> float:
    y = np.asarray(y, dtype=float)
    y_hat = np.asarray(y_hat, dtype=float)
    if y.shape != y_hat.shape:
        raise BiseldError(f"shape mismatch: {y.shape} vs {y_hat.shape}")
    clamped = np.clip(y_hat, BCE_CLAMP, 1.0 - BCE_CLAMP)
    return float(-np.mean(y * np.log(clamped) + (1.0 - y) * np.log(1.0 - clamped)))


def sgd_momentum_step(w, grad, m, alpha: float, beta1: float = 0.9):
    """Momentum update: m' = b1 m + (1-b1) g; w' = w - a m'."""
    w = np.asarray(w, dtype=float)
    grad = np.asarray(grad, dtype=float)
    m = np.asarray(m, dtype=float)
    if not (w.shape == grad.shape == m.shape):
        raise BiseldError(f"shape mismatch: w{w.shape} g{grad.shape} m{m.shape}")
    m_new = beta1 * m + (1.0 - beta1) * grad
    return w - alpha * m_new, m_new


@dataclass
class AdamState:
    m: np.ndarray
    v: np.ndarray
    t: int = 0

    @classmethod
    def zeros_like(cls, w) -> "AdamState":
        w = np.asarray(w, dtype=float)
        return cls(np.zeros_like(w), np.zeros_like(w), 0)


def adam_step(w, grad, state: AdamState, alpha: float, beta1: float = 0.9,
              beta2: float = 0.999, eps: float = 1e-8):
    """Adam without bias correction: w' = w - a m' / (sqrt(v') + eps)."""
    w = np.asarray(w, dtype=float)
    grad = np.asarray(grad, dtype=float)
    if w.shape != grad.shape or w.shape != np.shape(state.m):
        raise BiseldError(f"shape mismatch: w{w.shape} g{grad.shape}")
    m_new = beta1 * state.m + (1.0 - beta1) * grad
    v_new = beta2 * state.v + (1.0 - beta2) * grad ** 2
    w_new = w - alpha * m_new / (np.sqrt(v_new) + eps)
    return w_new, AdamState(m_new, v_new, state.t + 1)
