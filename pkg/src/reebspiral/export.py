"""Deterministic CSV/JSON output, key=value config files and minimal SVG plots."""

from __future__ import annotations

import json
import math
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np


def format_value(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def config_line(config: dict) -> str:
    return "# config: " + json.dumps(config, sort_keys=True, default=format_value)


def write_csv(path, header: Sequence[str], rows: Iterable[Sequence], config: dict) -> int:
    """Write a comment line with ``config``, the header, then rows; returns the row count."""
    n = 0
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(config_line(config) + "\n")
        fh.write(",".join(header) + "\n")
        for row in rows:
            if len(row) != len(header):
                raise ValueError(f"row has {len(row)} fields, header has {len(header)}")
            fh.write(",".join(format_value(v) for v in row) + "\n")
            n += 1
    return n


def read_csv(path) -> tuple:
    """(config dict, header, rows of strings) from a file written by :func:`write_csv`."""
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if not lines or not lines[0].startswith("# config: "):
        raise ValueError(f"{path} does not start with a config line")
    config = json.loads(lines[0][len("# config: "):])
    header = lines[1].split(",")
    return config, header, [ln.split(",") for ln in lines[2:] if ln]


def dump_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2, default=format_value, allow_nan=True)


def read_config(path) -> dict:
    """Plain ``key = value`` lines; blank lines and ``#`` comments are ignored."""
    out = {}
    for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        if not key:
            raise ValueError(f"{path}:{lineno}: empty key")
        out[key.replace("_", "-")] = value
    return out


# ---------------------------------------------------------------------------
# SVG

_W, _H, _PAD = 640, 480, 56
_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e")


def _ticks(lo: float, hi: float, n: int = 5) -> list:
    if hi <= lo:
        return [lo]
    return [lo + (hi - lo) * i / (n - 1) for i in range(n)]


class _Frame:
    def __init__(self, xs, ys):
        xs = np.asarray([x for x in xs if math.isfinite(x)], dtype=float)
        ys = np.asarray([y for y in ys if math.isfinite(y)], dtype=float)
        self.x0, self.x1 = (float(xs.min()), float(xs.max())) if xs.size else (0.0, 1.0)
        self.y0, self.y1 = (float(ys.min()), float(ys.max())) if ys.size else (0.0, 1.0)
        if self.x1 == self.x0:
            self.x0, self.x1 = self.x0 - 1, self.x1 + 1
        if self.y1 == self.y0:
            self.y0, self.y1 = self.y0 - 1, self.y1 + 1

    def px(self, x):
        return _PAD + (x - self.x0) / (self.x1 - self.x0) * (_W - 2 * _PAD)

    def py(self, y):
        return _H - _PAD - (y - self.y0) / (self.y1 - self.y0) * (_H - 2 * _PAD)


def _axes(fr: _Frame, title: str, xlabel: str, ylabel: str) -> list:
    out = [f'<rect x="{_PAD}" y="{_PAD}" width="{_W - 2 * _PAD}" height="{_H - 2 * _PAD}" '
           'fill="none" stroke="#444"/>',
           f'<text x="{_W / 2:.1f}" y="{_PAD / 2:.1f}" text-anchor="middle" font-size="15">{title}</text>',
           f'<text x="{_W / 2:.1f}" y="{_H - 12}" text-anchor="middle" font-size="13">{xlabel}</text>',
           f'<text x="16" y="{_H / 2:.1f}" text-anchor="middle" font-size="13" '
           f'transform="rotate(-90 16 {_H / 2:.1f})">{ylabel}</text>']
    for t in _ticks(fr.x0, fr.x1):
        out.append(f'<text x="{fr.px(t):.1f}" y="{_H - _PAD + 16}" text-anchor="middle" '
                   f'font-size="11">{t:.3g}</text>')
    for t in _ticks(fr.y0, fr.y1):
        out.append(f'<text x="{_PAD - 6}" y="{fr.py(t) + 4:.1f}" text-anchor="end" '
                   f'font-size="11">{t:.3g}</text>')
    return out


def _document(body: list) -> str:
    head = (f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" height="{_H}" '
            f'viewBox="0 0 {_W} {_H}">')
    return "\n".join([head, '<rect width="100%" height="100%" fill="white"/>', *body, "</svg>"]) + "\n"


def svg_lines(series: Sequence[tuple], title: str, xlabel: str, ylabel: str) -> str:
    """Polylines; ``series`` holds (label, xs, ys) triples."""
    fr = _Frame(np.concatenate([np.asarray(s[1], float) for s in series]),
                np.concatenate([np.asarray(s[2], float) for s in series]))
    body = _axes(fr, title, xlabel, ylabel)
    for i, (label, xs, ys) in enumerate(series):
        color = _COLORS[i % len(_COLORS)]
        pts = " ".join(f"{fr.px(x):.2f},{fr.py(y):.2f}" for x, y in zip(xs, ys)
                       if math.isfinite(x) and math.isfinite(y))
        body.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.2" points="{pts}"/>')
        body.append(f'<text x="{_W - _PAD - 4}" y="{_PAD + 16 + 16 * i}" text-anchor="end" '
                    f'font-size="12" fill="{color}">{label}</text>')
    return _document(body)


def svg_loglog(x, series: Sequence[tuple], title: str, xlabel: str) -> str:
    """Log-log scatter with fitted lines; ``series`` holds (label, ys, slope, intercept)."""
    x = np.asarray(x, dtype=float)
    lx = np.log10(x)
    all_y = []
    for _, ys, _, _ in series:
        ys = np.asarray(ys, dtype=float)
        all_y.extend(np.log10(ys[ys > 0]).tolist())
    fr = _Frame(lx, all_y)
    body = _axes(fr, title, f"log10 {xlabel}", "log10 error")
    for i, (label, ys, slope, intercept) in enumerate(series):
        color = _COLORS[i % len(_COLORS)]
        ys = np.asarray(ys, dtype=float)
        for xv, yv in zip(lx, ys):
            if yv > 0:
                body.append(f'<circle cx="{fr.px(xv):.2f}" cy="{fr.py(math.log10(yv)):.2f}" r="3.5" '
                            f'fill="{color}"/>')
        if math.isfinite(slope) and math.isfinite(intercept):
            # fits are in natural logs
            y_a = (slope * math.log(x.min()) + intercept) / math.log(10)
            y_b = (slope * math.log(x.max()) + intercept) / math.log(10)
            body.append(f'<line x1="{fr.px(lx.min()):.2f}" y1="{fr.py(y_a):.2f}" '
                        f'x2="{fr.px(lx.max()):.2f}" y2="{fr.py(y_b):.2f}" stroke="{color}" '
                        'stroke-dasharray="5,3"/>')
            label = f"{label} slope {slope:.3f}"
        body.append(f'<text x="{_W - _PAD - 4}" y="{_PAD + 16 + 16 * i}" text-anchor="end" '
                    f'font-size="12" fill="{color}">{label}</text>')
    return _document(body)


def write_text(path, text: str) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
