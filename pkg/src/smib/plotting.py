"""SVG line plots of trajectory channels, one file per channel, byte-stable for a given input."""

from __future__ import annotations

import io
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from ._io import atomic_write_text  # noqa: E402
from .sim import Trajectory  # noqa: E402

WIDTH_PX, HEIGHT_PX = 800, 500
DPI = 100
MAX_SAMPLES = 1200

UNITS = {"delta": "rad", "t": "time"}


class UnknownChannel(KeyError):
    def __init__(self, missing: list[str], known: tuple):
        super().__init__(missing)
        self.missing = list(missing)
        self.known = tuple(known)

    def __str__(self) -> str:
        return f"unknown channel(s) {', '.join(self.missing)}; available: {', '.join(self.known)}"


def decimate(t: np.ndarray, y: np.ndarray, max_samples: int = MAX_SAMPLES) -> tuple[np.ndarray, np.ndarray]:
    """Evenly strided subsample that always keeps the first and last points."""
    n = len(t)
    if n <= max_samples:
        return t, y
    idx = np.unique(np.linspace(0, n - 1, max_samples).round().astype(int))
    return t[idx], y[idx]


def render_svg(t: np.ndarray, y: np.ndarray, channel: str, title: str = "") -> str:
    td, yd = decimate(np.asarray(t, dtype=float), np.asarray(y, dtype=float))
    with plt.rc_context({"svg.hashsalt": "smib", "svg.fonttype": "none", "path.simplify": False}):
        fig, ax = plt.subplots(figsize=(WIDTH_PX / DPI, HEIGHT_PX / DPI), dpi=DPI)
        try:
            ax.plot(td, yd, lw=1.2, color="C0")
            ax.set_xlabel("time (p.u.)")
            unit = UNITS.get(channel, "p.u.")
            ax.set_ylabel(f"{channel} ({unit})")
            ax.set_title(title or channel)
            ax.grid(True, lw=0.4, alpha=0.6)
            ax.ticklabel_format(axis="y", useOffset=False)
            fig.tight_layout()
            buf = io.StringIO()
            fig.savefig(buf, format="svg", metadata={"Date": None, "Creator": None})
        finally:
            plt.close(fig)
    return buf.getvalue()


def plot_channels(tr: Trajectory, channels: list[str] | None, out_dir: str | Path,
                  prefix: str = "") -> list[Path]:
    """Write ``<out_dir>/<prefix><channel>.svg`` for each channel; an empty list means all."""
    known = tr.unique_channels
    wanted = list(channels) if channels else list(known)
    missing = [c for c in wanted if c not in known]
    if missing:
        raise UnknownChannel(missing, known)
    out = Path(out_dir)
    paths = []
    title_base = tr.meta.get("scenario", "")
    for name in wanted:
        svg = render_svg(tr.t, tr.channel(name), name, f"{title_base}: {name}" if title_base else name)
        path = out / f"{prefix}{name}.svg"
        atomic_write_text(path, svg)
        paths.append(path)
    return paths


def plot_csv(csv_path: str | Path, channels: list[str] | None = None, out_dir: str | Path | None = None) -> list[Path]:
    path = Path(csv_path)
    tr = Trajectory.from_csv(path.read_text())
    return plot_channels(tr, channels, out_dir if out_dir is not None else path.parent)
