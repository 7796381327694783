"""File artifacts: 16-bit PGM images, coverage CSV and an SVG coverage plot."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

__all__ = [
    "write_pgm",
    "read_pgm",
    "save_scaled_pgm",
    "load_scaled_pgm",
    "write_coverage_csv",
    "read_coverage_csv",
    "coverage_svg",
]

MAXVAL = 65535
CSV_HEADER = "method,level,empirical,n_trials"


def write_pgm(path, pixels) -> None:
    """Binary P5 PGM with 16-bit big-endian samples."""
    arr = np.asarray(pixels)
    if arr.ndim != 2:
        raise ValueError(f"PGM needs a 2-D array, got shape {arr.shape}")
    if not np.issubdtype(arr.dtype, np.integer) or arr.min(initial=0) < 0 or arr.max(initial=0) > MAXVAL:
        raise ValueError("PGM pixels must be integers in [0, 65535]")
    h, w = arr.shape
    header = f"P5\n{w} {h}\n{MAXVAL}\n".encode("ascii")
    Path(path).write_bytes(header + arr.astype(">u2").tobytes())


def read_pgm(path) -> np.ndarray:
    data = Path(path).read_bytes()
    tokens = []
    pos = 0
    while len(tokens) < 4:
        while pos < len(data) and data[pos:pos + 1].isspace():
            pos += 1
        if data[pos:pos + 1] == b"#":
            pos = data.index(b"\n", pos) + 1
            continue
        start = pos
        while pos < len(data) and not data[pos:pos + 1].isspace():
            pos += 1
        tokens.append(data[start:pos].decode("ascii"))
    if tokens[0] != "P5":
        raise ValueError(f"{path}: not a binary PGM (magic {tokens[0]!r})")
    w, h, maxval = (int(t) for t in tokens[1:])
    pos += 1  # single whitespace byte before the raster
    dtype = ">u2" if maxval > 255 else "u1"
    raster = np.frombuffer(data, dtype=dtype, count=w * h, offset=pos)
    return raster.reshape(h, w).astype(np.int64)


def save_scaled_pgm(path, image) -> dict:
    """Min-max scale a float image to 16 bits; the scale goes to ``<stem>.json``."""
    img = np.asarray(image, dtype=np.float64)
    lo, hi = float(img.min()), float(img.max())
    span = hi - lo
    if span > 0:
        ints = np.rint((img - lo) / span * MAXVAL).astype(np.int64)
    else:
        ints = np.zeros(img.shape, dtype=np.int64)
    write_pgm(path, ints)
    scale = {"min": lo, "max": hi, "maxval": MAXVAL}
    Path(path).with_suffix(".json").write_text(json.dumps(scale, indent=2) + "\n")
    return scale


def load_scaled_pgm(path) -> np.ndarray:
    """Invert ``save_scaled_pgm`` up to quantisation."""
    ints = read_pgm(path)
    scale = json.loads(Path(path).with_suffix(".json").read_text())
    return scale["min"] + ints / scale["maxval"] * (scale["max"] - scale["min"])


def write_coverage_csv(path, curves) -> None:
    lines = [CSV_HEADER]
    for curve in curves:
        for method, level, emp, n in curve.rows():
            lines.append(f"{method},{level!r},{emp!r},{n}")
    Path(path).write_text("\n".join(lines) + "\n")


def read_coverage_csv(path) -> dict[str, list[tuple[float, float, int]]]:
    lines = Path(path).read_text().splitlines()
    if not lines or lines[0] != CSV_HEADER:
        raise ValueError(f"{path}: unexpected header")
    out: dict[str, list[tuple[float, float, int]]] = {}
    for line in lines[1:]:
        method, level, emp, n = line.split(",")
        out.setdefault(method, []).append((float(level), float(emp), int(n)))
    return out


_COLORS = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"]


def coverage_svg(curves, title: str = "coverage", size: int = 360) -> str:
    """Self-contained SVG: one polyline per curve plus the diagonal."""
    pad = 40
    span = size - 2 * pad

    def px(u, v):
        return f"{pad + u * span:.2f},{size - pad - v * span:.2f}"

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" '
        f'viewBox="0 0 {size} {size}">',
        f'<rect width="{size}" height="{size}" fill="white"/>',
        f'<text x="{size / 2:.0f}" y="20" text-anchor="middle" font-size="13">{_escape(title)}</text>',
        f'<polyline points="{px(0, 0)} {px(1, 0)}" stroke="black" fill="none"/>',
        f'<polyline points="{px(0, 0)} {px(0, 1)}" stroke="black" fill="none"/>',
        f'<polyline points="{px(0, 0)} {px(1, 1)}" stroke="gray" stroke-dasharray="4,3" fill="none"/>',
    ]
    for tick in (0.0, 0.25, 0.5, 0.75, 1.0):
        x, y = pad + tick * span, size - pad - tick * span
        parts.append(f'<text x="{x:.1f}" y="{size - pad + 14}" text-anchor="middle" font-size="10">{tick:g}</text>')
        parts.append(f'<text x="{pad - 6}" y="{y + 3:.1f}" text-anchor="end" font-size="10">{tick:g}</text>')
    parts.append(f'<text x="{size / 2:.0f}" y="{size - 8}" text-anchor="middle" font-size="11">nominal level</text>')
    parts.append(f'<text x="12" y="{size / 2:.0f}" text-anchor="middle" font-size="11" '
                 f'transform="rotate(-90 12 {size / 2:.0f})">empirical coverage</text>')
    for i, curve in enumerate(curves):
        color = _COLORS[i % len(_COLORS)]
        pts = " ".join(px(lv, e) for lv, e in zip(curve.levels, curve.empirical))
        parts.append(f'<polyline points="{pts}" stroke="{color}" stroke-width="2" fill="none"/>')
        ly = pad + 14 * i
        parts.append(f'<text x="{pad + 8}" y="{ly + 4}" font-size="11" fill="{color}">'
                     f'{_escape(curve.method_tag)}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def _escape(s: str) -> str:
    return s.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")
