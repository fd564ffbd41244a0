"""Batch command line front end.

One binary, nine subcommands, no interactivity. Every command reads its
inputs, writes delimited text or JSON under the requested output path,
prints a one-line summary, and exits 0. Malformed inputs exit 1 with a
message naming the file (and, where known, the line or field); usage
errors exit 2. Identical arguments, config, and inputs produce
byte-identical outputs, including JSON key order.

``--plot`` on the reporting commands additionally renders a PNG next to
the delimited output (pass a path to override the default location).
``BISELD_THREADS`` caps the worker count of every parallel section.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
import warnings
from pathlib import Path

import numpy as np

from . import __version__
from .config import load_config
from .cues import (
    BeamPattern,
    extract_prtf,
    find_spectral_features,
    hpd,
    hrtf_pair_spectra,
    ild_narrowband_from_hrirs,
    ild_wideband_from_hrirs,
    itd,
)
from .errors import BiseldError
from .features import CHANNEL_NAMES, extract_btff, read_btff, write_btff
from .hrtf import (
    Direction,
    HeadGeometry,
    HrirPair,
    WindowParams,
    apply_time_window,
    compensate_noncausality,
    derive_hrtf,
    direction_to_filename,
    inverse_fft,
    load_hrir_pair,
    min_compensation_shift,
    parse_hrir_filename,
    save_hrir_pair,
    spectrum,
    window_start_index,
)
from .metrics import concat_frame_events, read_label_csv
from .metrics import evaluate as evaluate_metrics
from .net import (
    biseldnet_v4,
    count_params,
    decode_output,
    forward,
    load_graph,
    load_params,
    param_breakdown,
)
from .speaker import TspSet, default_frequency_grid, find_rolloff, response
from .synth import EventLabel, build_dataset, resample, read_wav, write_label_csv
from .vam import compute_vam


# ---------------------------------------------------------------------------
# Shared plumbing


def _require_file(path) -> Path:
    p = Path(path)
    if not p.is_file():
        raise BiseldError("no such file", path=str(path))
    return p


def _require_dir(path) -> Path:
    p = Path(path)
    if not p.is_dir():
        raise BiseldError("no such directory", path=str(path))
    return p


def _out_dir(path) -> Path:
    p = Path(path)
    p.mkdir(parents=True, exist_ok=True)
    return p


def _workers(requested: int | None) -> int:
    """Requested worker count, capped by the BISELD_THREADS environment knob."""
    count = 1 if requested is None else int(requested)
    raw = os.environ.get("BISELD_THREADS", "").strip()
    if raw:
        try:
            cap = int(raw)
        except ValueError:
            raise BiseldError(
                f"BISELD_THREADS must be an integer, got {raw!r}",
                field="BISELD_THREADS") from None
        if cap >= 1:
            count = min(count, cap)
    return max(1, count)


def _write_json(path, obj) -> None:
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _write_csv(path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        if header is not None:
            writer.writerow(header)
        writer.writerows(rows)


def _plot_target(arg, default) -> Path | None:
    # --plot was given with no value -> render at the default location
    if arg is None:
        return None
    return Path(arg) if arg else Path(default)


def _load_hrir_dir(hrir_dir: Path, fs: float) -> list[tuple[Direction, HrirPair]]:
    out = []
    for path in sorted(hrir_dir.iterdir()):
        if path.suffix != ".txt":
            continue
        try:
            direction = parse_hrir_filename(path.stem)
        except BiseldError:
            continue
        out.append((direction, load_hrir_pair(path, fs, direction, expected_len=None)))
    if not out:
        raise BiseldError("no a<AAA>e<+EE>.txt impulse-response files found",
                          path=str(hrir_dir))
    out.sort(key=lambda t: (t[0].elevation_deg, t[0].azimuth_deg))
    return out


# ---------------------------------------------------------------------------
# derive-hrtf


def cmd_derive_hrtf(args) -> int:
    bir_dir = _require_dir(args.bir)
    oir_path = _require_file(args.oir)
    out_dir = _out_dir(args.out)
    fs = args.fs
    params = WindowParams()
    geom = HeadGeometry()

    measured = _load_hrir_dir(bir_dir, fs)
    oir = load_hrir_pair(oir_path, fs, expected_len=None)

    global_start = None
    if not args.no_window:
        ref_name = direction_to_filename(Direction(90.0, 0.0))
        ref_path = bir_dir / ref_name
        if ref_path.is_file():
            ref = load_hrir_pair(ref_path, fs, expected_len=None)
            global_start = window_start_index(ref.right, fs, params)
        else:
            warnings.warn(
                f"{ref_name} not found; window start taken per file", stacklevel=1)

    def prepare(ir: np.ndarray) -> np.ndarray:
        if args.no_window:
            out = np.zeros(params.pad_to)
            n = min(ir.size, params.pad_to)
            out[:n] = ir[:n]
            return out
        start = global_start
        if start is None:
            start = window_start_index(ir, fs, params)
        return apply_time_window(ir, fs, start, params).samples

    otf = tuple(spectrum(prepare(ir), params.pad_to, fs)
                for ir in (oir.left, oir.right))
    shift = min_compensation_shift(geom, fs)

    first_before = first_after = None
    for direction, pair in measured:
        ears = []
        for ir, ref_spec in zip((pair.left, pair.right), otf):
            hrtf_spec = derive_hrtf(spectrum(prepare(ir), params.pad_to, fs), ref_spec)
            ears.append(compensate_noncausality(inverse_fft(hrtf_spec), shift))
        result = HrirPair(ears[0], ears[1], fs, direction)
        save_hrir_pair(out_dir / direction_to_filename(direction), result)
        if first_before is None:
            first_before = (pair.left, pair.right)
            first_after = (result.left, result.right)

    target = _plot_target(args.plot, out_dir / "derive_hrtf.png")
    if target is not None:
        from .plots import plot_hrir_pair

        plot_hrir_pair(first_before, first_after, fs, target)
    print(f"derived {len(measured)} HRTF pairs -> {out_dir}")
    return 0


# ---------------------------------------------------------------------------
# analyze-cues


def cmd_analyze_cues(args) -> int:
    hrir_dir = _require_dir(args.hrirs)
    out_dir = _out_dir(args.out)
    fs = args.fs
    pairs = _load_hrir_dir(hrir_dir, fs)
    horizontal = [(d, p) for d, p in pairs if d.elevation_deg == 0.0]
    median = [(d, p) for d, p in pairs if d.azimuth_deg == 0.0]

    itd_rows = []
    for d, pair in pairs:
        tau_us = itd(pair) * 1e6
        itd_rows.append((f"{d.azimuth_deg:g}", f"{d.elevation_deg:g}",
                         f"{tau_us:.3f}"))
    _write_csv(out_dir / "itd.csv", ("azimuth", "elevation", "itd_us"), itd_rows)

    ild_rows = []
    for d, pair in pairs:
        wide = ild_wideband_from_hrirs(pair)
        ild_rows.append(("wide", f"{d.azimuth_deg:g}", f"{d.elevation_deg:g}",
                         "", f"{wide:.6f}"))
    for d, pair in horizontal:
        left, right = hrtf_pair_spectra(pair)
        narrow = ild_narrowband_from_hrirs(pair)
        for freq, value in zip(left.bin_frequencies(), narrow):
            ild_rows.append(("narrow", f"{d.azimuth_deg:g}", f"{d.elevation_deg:g}",
                             f"{freq:.3f}", f"{value:.6f}"))
    _write_csv(out_dir / "ild.csv",
               ("band", "azimuth", "elevation", "frequency_hz", "ild_db"), ild_rows)

    sc_rows = []
    for d, pair in median:
        for ear, ir in (("left", pair.left), ("right", pair.right)):
            prtf = extract_prtf(ir, fs)
            for feat in find_spectral_features(prtf, elevation_deg=d.elevation_deg):
                sc_rows.append((f"{d.elevation_deg:g}", ear, feat.kind,
                                f"{feat.frequency_hz:.3f}", f"{feat.level_db:.6f}"))
    _write_csv(out_dir / "sc.csv",
               ("elevation", "ear", "kind", "frequency_hz", "level_db"), sc_rows)

    hpd_rows = []
    beams: list[BeamPattern] = []
    if horizontal:
        spectra = {d.azimuth_deg: hrtf_pair_spectra(p) for d, p in horizontal}
        ear_idx = 0 if args.ear == "left" else 1
        per_ear = {az: s[ear_idx] for az, s in spectra.items()}
        for freq in args.hpd_freqs:
            beam = hpd(per_ear, freq)
            beams.append(beam)
            for az in sorted(beam.levels):
                hpd_rows.append((f"{beam.frequency_hz:g}", f"{az:g}",
                                 f"{beam.levels[az]:.6f}"))
    _write_csv(out_dir / "hpd.csv", ("frequency_hz", "azimuth", "level_db"), hpd_rows)

    target = _plot_target(args.plot, out_dir / "cues.png")
    if target is not None:
        from .plots import plot_cues

        curve = [(d.azimuth_deg, itd(p) * 1e6) for d, p in horizontal]
        plot_cues(curve, beams, target)
    print(f"analyzed {len(pairs)} directions -> {out_dir} "
          f"(itd.csv ild.csv sc.csv hpd.csv)")
    return 0


# ---------------------------------------------------------------------------
# extract-btff


def cmd_extract_btff(args) -> int:
    cfg = load_config(args.config)
    stft_params = cfg.stft
    audio, fs = read_wav(_require_file(args.input))
    if fs != stft_params.fs:
        audio = resample(audio, fs, stft_params.fs)
    btff = extract_btff(audio, stft_params, standardize=args.standardize)
    out_path = Path(args.output)
    if out_path.parent != Path(""):
        out_path.parent.mkdir(parents=True, exist_ok=True)
    write_btff(out_path, btff)

    if args.csv:
        for idx, name in enumerate(CHANNEL_NAMES):
            rows = [[f"{v:.8e}" for v in row] for row in btff.tensor[:, :, idx]]
            _write_csv(out_path.with_name(f"{out_path.stem}_{name}.csv"), None, rows)
    target = _plot_target(args.plot, out_path.with_suffix(".png"))
    if target is not None:
        from .plots import plot_btff

        plot_btff(btff, target)
    print(f"wrote {btff.n_frames} frames x {btff.n_bins} bands x "
          f"{len(CHANNEL_NAMES)} channels -> {out_path}")
    return 0


# ---------------------------------------------------------------------------
# synth-dataset


def cmd_synth_dataset(args) -> int:
    cfg = load_config(args.config, seed_override=args.seed)
    events = _require_dir(args.events)
    noise = _require_dir(args.noise) if args.noise else None
    hrirs = _require_dir(args.hrirs)
    out_dir = Path(args.out)
    manifest = build_dataset(cfg.synth, events, noise, out_dir, hrirs,
                             workers=_workers(args.workers))
    counts = manifest["counts"]
    summary = " ".join(f"{split}={counts[split]}" for split in sorted(counts))
    print(f"synthesized {sum(counts.values())} mixtures ({summary}) -> {out_dir}")
    return 0


# ---------------------------------------------------------------------------
# simulate-speaker


def cmd_simulate_speaker(args) -> int:
    tsp = TspSet.from_json(_require_file(args.tsp))
    if args.fmin <= 0 or args.fmax <= args.fmin:
        raise BiseldError("need 0 < fmin < fmax", field="fmin")
    freqs = default_frequency_grid(args.points, args.fmin, args.fmax)
    table = response(tsp, args.veg, args.vbox, args.r, freqs)
    rolloff = find_rolloff(table, ref_freq_hz=None)

    out_path = Path(args.out)
    if out_path.parent != Path(""):
        out_path.parent.mkdir(parents=True, exist_ok=True)
    rows = [
        (f"{f:.6f}", f"{x * 1e3:.9f}", f"{u:.9e}", f"{spl:.6f}")
        for f, x, u, spl in zip(table.freqs_hz, table.excursion_m,
                                table.volume_velocity, table.spl_db)
    ]
    _write_csv(out_path, ("frequency_hz", "excursion_mm", "volume_velocity",
                          "spl_db"), rows)

    peak_x = int(np.argmax(table.excursion_m))
    peak_u = int(np.argmax(table.volume_velocity))
    peak_spl = int(np.argmax(table.spl_db))
    summary = {
        "distance_m": args.r,
        "excursion_peak_hz": float(table.freqs_hz[peak_x]),
        "excursion_peak_mm": float(table.excursion_m[peak_x] * 1e3),
        "max_spl_db": float(table.spl_db[peak_spl]),
        "max_spl_hz": float(table.freqs_hz[peak_spl]),
        "points": len(freqs),
        "rolloff_hz": float(rolloff),
        "v_box_cc": args.vbox,
        "v_eg": args.veg,
        "volume_velocity_max": float(table.volume_velocity[peak_u]),
        "volume_velocity_max_hz": float(table.freqs_hz[peak_u]),
    }
    _write_json(out_path.with_suffix(".json"), summary)

    target = _plot_target(args.plot, out_path.with_suffix(".png"))
    if target is not None:
        from .plots import plot_speaker_response

        plot_speaker_response(table, rolloff, target)
    print(f"rolloff {rolloff:.2f} Hz, max SPL {summary['max_spl_db']:.2f} dB "
          f"at {args.r:g} m -> {out_path}")
    return 0


# ---------------------------------------------------------------------------
# count-params


def cmd_count_params(args) -> int:
    if args.graph is None and not args.stock:
        raise BiseldError("pass a graph JSON file or --stock", field="graph")
    if args.graph is not None and args.stock:
        raise BiseldError("pass either a graph JSON file or --stock, not both",
                          field="graph")
    graph = biseldnet_v4() if args.stock else load_graph(_require_file(args.graph))
    counts = count_params(graph)
    for name, n in param_breakdown(graph):
        print(f"{name} {n}")
    print(f"trainable {counts['trainable']}")
    print(f"non_trainable {counts['non_trainable']}")
    print(f"total {counts['total']}")
    return 0


# ---------------------------------------------------------------------------
# infer


def cmd_infer(args) -> int:
    cfg = load_config(args.config)
    threshold = cfg.decode_threshold if args.threshold is None else args.threshold
    graph = load_graph(_require_file(args.graph))
    params = load_params(_require_file(args.weights))
    btff = read_btff(_require_file(args.features))
    output = np.atleast_2d(forward(graph, params, btff.tensor))
    if output.ndim != 2 or output.shape[1] % 3 != 0:
        raise BiseldError(
            f"graph output shape {output.shape} is not a frame-wise vector grid",
            field="graph")
    pool = max(1, round(btff.n_frames / output.shape[0]))
    frame_s = btff.frame_hop_s * pool

    labels = []
    for i, frame in enumerate(output):
        frame_ds = int(round(i * frame_s * 10.0))
        for class_idx, az, el, _mag in decode_output(frame, threshold):
            labels.append(EventLabel(frame_ds, class_idx,
                                     int(round(az)), int(round(el))))
    labels.sort(key=lambda e: (e.frame_ds, e.class_idx))
    out_path = Path(args.out)
    if out_path.parent != Path(""):
        out_path.parent.mkdir(parents=True, exist_ok=True)
    write_label_csv(labels, out_path)
    print(f"decoded {len(labels)} events from {output.shape[0]} frames -> {out_path}")
    return 0


# ---------------------------------------------------------------------------
# evaluate


def cmd_evaluate(args) -> int:
    ref_dir = _require_dir(args.ref)
    pred_dir = _require_dir(args.pred)
    ref_names = sorted(p.name for p in ref_dir.iterdir() if p.suffix == ".csv")
    pred_names = sorted(p.name for p in pred_dir.iterdir() if p.suffix == ".csv")
    if not ref_names:
        raise BiseldError("no reference label files (*.csv)", path=str(ref_dir))
    missing = sorted(set(ref_names) - set(pred_names))
    if missing:
        raise BiseldError(f"missing prediction files: {missing}",
                          path=str(pred_dir))
    extra = sorted(set(pred_names) - set(ref_names))
    if extra:
        raise BiseldError(f"prediction files without references: {extra}",
                          path=str(pred_dir))
    ref = concat_frame_events([read_label_csv(ref_dir / n) for n in ref_names])
    pred = concat_frame_events([read_label_csv(pred_dir / n) for n in ref_names])
    report = evaluate_metrics(ref, pred, angle_thresh_deg=args.angle)
    out_path = Path(args.out)
    if out_path.parent != Path(""):
        out_path.parent.mkdir(parents=True, exist_ok=True)
    _write_json(out_path, report.to_dict())

    target = _plot_target(args.plot, out_path.with_suffix(".png"))
    if target is not None:
        from .plots import plot_metric_report

        plot_metric_report(report, target)
    le_txt = "unmatched" if report.le_unmatched else f"{report.le_cd:.2f} deg"
    print(f"SELD {report.seld_error:.4f} (ER {report.er20:.4f}, "
          f"F {report.f20:.4f}, LE {le_txt}, LR {report.lr_cd:.4f}) -> {out_path}")
    return 0


# ---------------------------------------------------------------------------
# vam


def cmd_vam(args) -> int:
    graph = load_graph(_require_file(args.graph))
    params = load_params(_require_file(args.weights))
    btff = read_btff(_require_file(args.features))
    result = compute_vam(graph, params, btff.tensor, args.class_idx,
                         pivot=args.pivot, step=args.step,
                         workers=_workers(args.workers))
    out_path = Path(args.out)
    if out_path.parent != Path(""):
        out_path.parent.mkdir(parents=True, exist_ok=True)
    rows = [[f"{v:.8e}" for v in row] for row in result.upscaled]
    _write_csv(out_path, None, rows)

    output = np.atleast_2d(forward(graph, params, btff.tensor))
    events = []
    if output.shape[1] % 3 == 0:
        for i, frame in enumerate(output):
            for class_idx, az, el, mag in decode_output(frame, args.threshold):
                events.append({"azimuth_deg": az, "class_idx": class_idx,
                               "elevation_deg": el, "frame": i,
                               "magnitude": mag})
    pivot = args.pivot if args.pivot else (graph.pivots[0] if graph.pivots else None)
    sidecar = {
        "at_kink": result.at_kink,
        "class_idx": result.class_idx,
        "events": events,
        "map_shape": [int(result.upscaled.shape[0]), int(result.upscaled.shape[1])],
        "pivot": pivot,
        "vector_norm": result.vector_norm,
    }
    _write_json(out_path.with_suffix(".json"), sidecar)

    target = _plot_target(args.plot, out_path.with_suffix(".png"))
    if target is not None:
        from .plots import plot_vam

        plot_vam(result.upscaled, result.class_idx, target)
    print(f"|v_{result.class_idx}| = {result.vector_norm:.6f}, "
          f"map {result.upscaled.shape[0]}x{result.upscaled.shape[1]} -> {out_path}")
    return 0


# ---------------------------------------------------------------------------
# Parser


def _comma_floats(text: str) -> list[float]:
    try:
        return [float(tok) for tok in text.split(",") if tok.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated float list: {text!r}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="biseld",
        description="Binaural sound-event localization and detection toolkit.")
    parser.add_argument("--version", action="version",
                        version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="command", required=True)

    def add_plot(p):
        p.add_argument("--plot", nargs="?", const="", default=None, metavar="PNG",
                       help="render a figure next to the output "
                            "(optionally at PNG)")

    p = sub.add_parser("derive-hrtf",
                       help="divide measured responses by the origin response")
    p.add_argument("--bir", required=True, metavar="DIR",
                   help="directory of measured a<AAA>e<+EE>.txt pairs")
    p.add_argument("--oir", required=True, metavar="FILE",
                   help="origin (no-head) impulse-response file")
    p.add_argument("--out", required=True, metavar="DIR")
    p.add_argument("--fs", type=float, default=48000.0)
    p.add_argument("--no-window", action="store_true",
                   help="skip reflection windowing (first samples are kept as-is)")
    add_plot(p)
    p.set_defaults(func=cmd_derive_hrtf)

    p = sub.add_parser("analyze-cues",
                       help="tabulate ITD, ILD, spectral cues, and directivity")
    p.add_argument("--hrirs", required=True, metavar="DIR")
    p.add_argument("--out", required=True, metavar="DIR")
    p.add_argument("--fs", type=float, default=48000.0)
    p.add_argument("--ear", choices=("left", "right"), default="left",
                   help="ear used for the directivity table")
    p.add_argument("--hpd-freqs", type=_comma_floats,
                   default=[500.0, 1000.0, 2000.0, 4000.0, 8000.0],
                   metavar="F1,F2,...")
    add_plot(p)
    p.set_defaults(func=cmd_analyze_cues)

    p = sub.add_parser("extract-btff",
                       help="turn a stereo wav into the binaural feature tensor")
    p.add_argument("input", metavar="in.wav")
    p.add_argument("output", metavar="out.bin")
    p.add_argument("--csv", action="store_true",
                   help="also write one CSV per feature channel")
    p.add_argument("--standardize", action="store_true")
    p.add_argument("--config", metavar="cfg.json")
    add_plot(p)
    p.set_defaults(func=cmd_extract_btff)

    p = sub.add_parser("synth-dataset",
                       help="render the spatialized mixture corpus")
    p.add_argument("--config", metavar="cfg.json")
    p.add_argument("--events", required=True, metavar="DIR")
    p.add_argument("--noise", metavar="DIR")
    p.add_argument("--hrirs", required=True, metavar="DIR")
    p.add_argument("--out", required=True, metavar="DIR")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--workers", type=int, default=None)
    p.set_defaults(func=cmd_synth_dataset)

    p = sub.add_parser("simulate-speaker",
                       help="predict excursion, volume velocity, and SPL")
    p.add_argument("--tsp", required=True, metavar="tsp.json")
    p.add_argument("--veg", required=True, type=float,
                   help="generator voltage [V]")
    p.add_argument("--vbox", required=True, type=float,
                   help="enclosure volume [cc]")
    p.add_argument("--r", required=True, type=float,
                   help="listening distance [m]")
    p.add_argument("--out", default="speaker_response.csv", metavar="CSV")
    p.add_argument("--points", type=int, default=200)
    p.add_argument("--fmin", type=float, default=20.0)
    p.add_argument("--fmax", type=float, default=20000.0)
    add_plot(p)
    p.set_defaults(func=cmd_simulate_speaker)

    p = sub.add_parser("count-params",
                       help="count trainable and frozen parameters of a graph")
    p.add_argument("graph", nargs="?", metavar="graph.json")
    p.add_argument("--stock", action="store_true",
                   help="use the built-in detection network")
    p.set_defaults(func=cmd_count_params)

    p = sub.add_parser("infer", help="run a graph over features and decode events")
    p.add_argument("graph", metavar="graph.json")
    p.add_argument("weights", metavar="weights.bin")
    p.add_argument("features", metavar="btff.bin")
    p.add_argument("--out", required=True, metavar="events.csv")
    p.add_argument("--threshold", type=float, default=None)
    p.add_argument("--config", metavar="cfg.json")
    p.set_defaults(func=cmd_infer)

    p = sub.add_parser("evaluate", help="score predictions against references")
    p.add_argument("--ref", required=True, metavar="DIR")
    p.add_argument("--pred", required=True, metavar="DIR")
    p.add_argument("--out", required=True, metavar="report.json")
    p.add_argument("--angle", type=float, default=20.0,
                   help="detection angle threshold [deg]")
    add_plot(p)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("vam", help="visual attention map for one class")
    p.add_argument("graph", metavar="graph.json")
    p.add_argument("weights", metavar="weights.bin")
    p.add_argument("features", metavar="btff.bin")
    p.add_argument("--class", dest="class_idx", required=True, type=int)
    p.add_argument("--pivot", default=None,
                   help="pivot layer name (defaults to the graph's declared pivot)")
    p.add_argument("--out", default="vam.csv", metavar="CSV")
    p.add_argument("--step", type=float, default=None,
                   help="finite-difference step (defaults to a scaled step)")
    p.add_argument("--threshold", type=float, default=0.5,
                   help="decode threshold for the sidecar event list")
    p.add_argument("--workers", type=int, default=None)
    add_plot(p)
    p.set_defaults(func=cmd_vam)

    return parser


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except BiseldError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(run(sys.argv[1:]))


if __name__ == "__main__":
    main()
