"""Figure rendering for the report paths of the command line tools.

Every function writes one PNG next to the delimited output it
illustrates and returns the path it wrote. The Agg backend is forced so
the renderers work in headless batch jobs.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .features import CHANNEL_NAMES


def _finish(fig, path) -> str:
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return str(path)


def plot_hrir_pair(before, after, fs: float, path) -> str:
    """Raw and processed impulse response pair on a shared time axis."""
    fig, axes = plt.subplots(2, 1, figsize=(8, 6), sharex=False)
    for ax, (left, right), title in (
        (axes[0], before, "measured"),
        (axes[1], after, "derived"),
    ):
        t = np.arange(len(left)) / fs * 1e3
        ax.plot(t, left, label="left", linewidth=0.8)
        ax.plot(t, right, label="right", linewidth=0.8)
        ax.set_title(title)
        ax.set_xlabel("time [ms]")
        ax.set_ylabel("amplitude")
        ax.legend(loc="upper right")
    return _finish(fig, path)


def plot_cues(itd_rows, beams, path) -> str:
    """Horizontal-plane interaural delay curve plus directivity patterns.

    itd_rows: iterable of (azimuth_deg, itd_us) for elevation 0.
    beams: iterable of BeamPattern.
    """
    fig = plt.figure(figsize=(10, 4.5))
    ax = fig.add_subplot(1, 2, 1)
    rows = sorted(itd_rows)
    if rows:
        az = [r[0] for r in rows]
        us = [r[1] for r in rows]
        ax.plot(az, us, marker="o", markersize=3)
    ax.set_xlabel("azimuth [deg]")
    ax.set_ylabel("ITD [us]")
    ax.set_title("horizontal-plane ITD")
    ax.grid(True, linewidth=0.3)

    ax = fig.add_subplot(1, 2, 2, projection="polar")
    ax.set_theta_zero_location("N")
    ax.set_theta_direction(-1)
    for beam in beams:
        pairs = sorted(beam.levels.items())
        theta = np.radians([p[0] for p in pairs] + [pairs[0][0] + 360.0])
        level = [p[1] for p in pairs] + [pairs[0][1]]
        ax.plot(theta, level, linewidth=0.9,
                label=f"{beam.frequency_hz / 1e3:g} kHz")
    ax.set_title("level re front [dB]")
    ax.legend(loc="lower left", bbox_to_anchor=(1.02, 0.0), fontsize=7)
    return _finish(fig, path)


def plot_btff(btff, path) -> str:
    """One panel per feature channel, frames on the horizontal axis."""
    names = list(CHANNEL_NAMES)
    fig, axes = plt.subplots(2, 4, figsize=(14, 6))
    for idx, (ax, name) in enumerate(zip(axes.ravel(), names)):
        img = btff.tensor[:, :, idx].T
        ax.imshow(img, aspect="auto", origin="lower", interpolation="nearest")
        ax.set_title(name)
        ax.set_xlabel("frame")
        ax.set_ylabel("band")
    return _finish(fig, path)


def plot_speaker_response(table, rolloff_hz: float | None, path) -> str:
    """Pressure level, diaphragm excursion, and volume velocity vs frequency."""
    fig, axes = plt.subplots(3, 1, figsize=(8, 9), sharex=True)
    f = table.freqs_hz
    axes[0].semilogx(f, table.spl_db)
    axes[0].set_ylabel("SPL [dB]")
    if rolloff_hz is not None:
        axes[0].axvline(rolloff_hz, color="r", linewidth=0.8, linestyle="--",
                        label=f"-6 dB at {rolloff_hz:.1f} Hz")
        axes[0].legend(loc="lower right")
    axes[1].semilogx(f, table.excursion_m * 1e3)
    axes[1].set_ylabel("excursion [mm]")
    axes[2].semilogx(f, table.volume_velocity)
    axes[2].set_ylabel("volume velocity [m^3/s]")
    axes[2].set_xlabel("frequency [Hz]")
    for ax in axes:
        ax.grid(True, which="both", linewidth=0.3)
    return _finish(fig, path)


def plot_vam(upscaled, class_idx: int, path) -> str:
    """Saliency map over input frames and bands."""
    fig, ax = plt.subplots(figsize=(9, 4))
    im = ax.imshow(upscaled.T, aspect="auto", origin="lower",
                   interpolation="nearest", cmap="magma")
    fig.colorbar(im, ax=ax, label="attention")
    ax.set_xlabel("frame")
    ax.set_ylabel("band")
    ax.set_title(f"class {class_idx} saliency")
    return _finish(fig, path)


def plot_metric_report(report, path) -> str:
    """Headline metrics plus the per-class detection score."""
    fig, axes = plt.subplots(1, 2, figsize=(11, 4))
    names = ["ER", "1-F", "LE/180", "1-LR", "SED", "DOA", "SELD"]
    values = [
        report.er20,
        1.0 - report.f20,
        (report.le_cd or 0.0) / 180.0,
        1.0 - report.lr_cd,
        report.sed_error,
        report.doa_error,
        report.seld_error,
    ]
    axes[0].bar(range(len(names)), values, color="steelblue")
    axes[0].set_xticks(range(len(names)), names, rotation=30)
    axes[0].set_title("error components (lower is better)")
    axes[0].grid(True, axis="y", linewidth=0.3)

    classes = sorted(report.per_class)
    scores = [report.per_class[c].get("f20", 0.0) for c in classes]
    axes[1].bar(range(len(classes)), scores, color="darkorange")
    axes[1].set_xticks(range(len(classes)), [str(c) for c in classes])
    axes[1].set_xlabel("class")
    axes[1].set_title("per-class F-score")
    axes[1].set_ylim(0.0, 1.05)
    axes[1].grid(True, axis="y", linewidth=0.3)
    return _finish(fig, path)
