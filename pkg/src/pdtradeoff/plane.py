"""Comparing algorithms on the perception-distortion plane.

Every algorithm is a point (distortion, perceptual index), both lower is
better.  An algorithm dominates another when it is strictly better in both
coordinates; the admissible algorithms of a group are those no other member
dominates.  Exact ties therefore never dominate each other.  The weak
variant (no worse in both, better in one) is available via ``weak=True``.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Sequence
from xml.sax.saxutils import escape

from .errors import DuplicateName, InvalidRecord, IoFailure


@dataclass(frozen=True)
class AlgorithmRecord:
    name: str
    distortion: float
    perception: float
    metadata: dict = field(default_factory=dict, compare=False, hash=False)

    def __post_init__(self):
        for label in ("distortion", "perception"):
            v = getattr(self, label)
            if not isinstance(v, (int, float)) or not math.isfinite(v):
                raise InvalidRecord(f"{self.name}: {label} must be a finite number, got {v!r}")
        if not str(self.name):
            raise InvalidRecord("record name must be non-empty")

    @property
    def point(self) -> tuple:
        return (self.distortion, self.perception)

    def scaled(self, sd: float, sp: float) -> "AlgorithmRecord":
        return AlgorithmRecord(self.name, self.distortion * sd, self.perception * sp,
                               self.metadata)


def dominates(a: AlgorithmRecord, b: AlgorithmRecord, weak: bool = False) -> bool:
    """Whether ``a`` dominates ``b``.

    Strict (default): a is strictly better in both coordinates.  Weak: a is
    no worse in both and strictly better in at least one.
    """
    if weak:
        return (a.distortion <= b.distortion and a.perception <= b.perception
                and (a.distortion < b.distortion or a.perception < b.perception))
    return a.distortion < b.distortion and a.perception < b.perception


def _check_names(records: Sequence[AlgorithmRecord]) -> None:
    seen = set()
    for r in records:
        if r.name in seen:
            raise DuplicateName(f"duplicate algorithm name {r.name!r}")
        seen.add(r.name)


def admissible_set(records: Iterable[AlgorithmRecord], weak: bool = False) -> list:
    """Records not dominated by any other record, in input order.

    Sorting by distortion lets each record be checked against the best
    perception among strictly smaller distortions, so the cost is
    O(n log n).
    """
    records = list(records)
    if not records:
        raise ValueError("need at least one record")
    _check_names(records)
    order = sorted(range(len(records)), key=lambda i: records[i].distortion)
    keep = [True] * len(records)
    best_before = math.inf  # min perception over strictly smaller distortion
    best_tied = math.inf    # min perception over records with equal distortion
    k = 0
    while k < len(order):
        j = k
        d = records[order[k]].distortion
        while j < len(order) and records[order[j]].distortion == d:
            j += 1
        group = order[k:j]
        best_tied = min(records[i].perception for i in group)
        for i in group:
            p = records[i].perception
            if p > best_before:
                keep[i] = False
            elif weak and (p == best_before or p > best_tied):
                # weak: an earlier record with equal perception, or a tied
                # distortion with strictly lower perception, dominates
                keep[i] = False
        best_before = min(best_before, best_tied)
        k = j
    return [r for r, ok in zip(records, keep) if ok]


def pareto_front(records: Iterable[AlgorithmRecord]) -> list:
    """Staircase through the admissible set, sorted by distortion.

    Within equal distortion only the lowest perception is kept, and a point
    is dropped unless it strictly lowers the perception reached so far, so
    the perception sequence along the front is strictly decreasing.
    """
    adm = admissible_set(records)
    front = []
    best = math.inf
    for r in sorted(adm, key=lambda r: (r.distortion, r.perception)):
        if r.perception < best:
            front.append(r)
            best = r.perception
    return front


# --- tables ---------------------------------------------------------------------

def _num(x: float) -> str:
    return repr(float(x))


def emit_table(records: Sequence[AlgorithmRecord], path=None) -> str:
    """CSV with columns name,distortion,perception,admissible (1/0)."""
    records = list(records)
    adm = {r.name for r in admissible_set(records)} if records else set()
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["name", "distortion", "perception", "admissible"])
    for r in records:
        w.writerow([r.name, _num(r.distortion), _num(r.perception), int(r.name in adm)])
    text = buf.getvalue()
    if path is not None:
        _write(path, text)
    return text


def parse_records(text: str, source: str = "<records>") -> list:
    """Parse ``name,distortion,perception[,...]`` CSV text."""
    if not text.strip():
        raise InvalidRecord(f"{source}: file is empty")
    reader = csv.reader(io.StringIO(text))
    rows = [row for row in reader if row and any(c.strip() for c in row)]
    header = [h.strip() for h in rows[0]]
    if header[:3] != ["name", "distortion", "perception"]:
        raise InvalidRecord(f"{source}: header must start with name,distortion,perception")
    out = []
    for lineno, row in enumerate(rows[1:], start=2):
        if len(row) < 3:
            raise InvalidRecord(f"{source}:{lineno}: expected at least 3 fields")
        try:
            d, p = float(row[1]), float(row[2])
        except ValueError:
            raise InvalidRecord(f"{source}:{lineno}: non-numeric score") from None
        meta = {k: v for k, v in zip(header[3:], row[3:])}
        out.append(AlgorithmRecord(row[0].strip(), d, p, meta))
    _check_names(out)
    return out


def read_records(path) -> list:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc.strerror or exc}") from exc
    return parse_records(text, str(path))


def _write(path, text: str) -> None:
    try:
        Path(path).write_text(text, encoding="utf-8")
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc.strerror or exc}") from exc


# --- SVG scatter ------------------------------------------------------------------

WIDTH, HEIGHT = 640, 480
LEFT, RIGHT, TOP, BOTTOM = 80, 30, 30, 60


def _nice_ticks(lo: float, hi: float, n: int = 5) -> list:
    span = hi - lo
    raw = span / n
    mag = 10 ** math.floor(math.log10(raw))
    step = min((m * mag for m in (1, 2, 2.5, 5, 10) if m * mag >= raw), default=10 * mag)
    start = math.ceil(lo / step - 1e-9) * step
    ticks = []
    t = start
    while t <= hi + 1e-9 * step:
        ticks.append(round(t, 12))
        t += step
    return ticks


def _range(values: Sequence[float]) -> tuple:
    lo, hi = min(values), max(values)
    if hi == lo:
        pad = abs(lo) * 0.1 or 1.0
        return lo - pad, hi + pad
    pad = 0.05 * (hi - lo)
    return lo - pad, hi + pad


def _fmt_tick(t: float) -> str:
    return format(t, ".6g")


def emit_scatter(records: Sequence[AlgorithmRecord],
                 front: Optional[Sequence[AlgorithmRecord]] = None, path=None,
                 title: str = "") -> str:
    """Deterministic SVG 1.1 scatter of the records.

    Admissible records are filled circles, dominated ones hollow; the front
    is drawn as a polyline when it has at least two points.
    """
    records = list(records)
    if not records:
        raise ValueError("need at least one record")
    adm = {r.name for r in admissible_set(records)}
    if front is None:
        front = pareto_front(records)
    xlo, xhi = _range([r.distortion for r in records])
    ylo, yhi = _range([r.perception for r in records])
    pw, ph = WIDTH - LEFT - RIGHT, HEIGHT - TOP - BOTTOM

    def sx(x):
        return LEFT + (x - xlo) / (xhi - xlo) * pw

    def sy(y):
        return TOP + ph - (y - ylo) / (yhi - ylo) * ph

    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{WIDTH}" '
        f'height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">',
        '<rect x="0" y="0" width="100%" height="100%" fill="white"/>',
        f'<g stroke="black" stroke-width="1"><line x1="{LEFT}" y1="{TOP + ph}" '
        f'x2="{LEFT + pw}" y2="{TOP + ph}"/><line x1="{LEFT}" y1="{TOP}" x2="{LEFT}" '
        f'y2="{TOP + ph}"/></g>',
    ]
    ticks = ['<g font-family="sans-serif" font-size="11" fill="black">']
    for t in _nice_ticks(xlo, xhi):
        x = sx(t)
        ticks.append(f'<line x1="{x:.2f}" y1="{TOP + ph}" x2="{x:.2f}" y2="{TOP + ph + 5}" '
                     f'stroke="black"/><text x="{x:.2f}" y="{TOP + ph + 18}" '
                     f'text-anchor="middle">{_fmt_tick(t)}</text>')
    for t in _nice_ticks(ylo, yhi):
        y = sy(t)
        ticks.append(f'<line x1="{LEFT - 5}" y1="{y:.2f}" x2="{LEFT}" y2="{y:.2f}" '
                     f'stroke="black"/><text x="{LEFT - 8}" y="{y + 4:.2f}" '
                     f'text-anchor="end">{_fmt_tick(t)}</text>')
    ticks.append("</g>")
    out.extend(ticks)
    out.append(f'<text x="{LEFT + pw / 2:.2f}" y="{HEIGHT - 15}" font-family="sans-serif" '
               f'font-size="14" text-anchor="middle">Distortion</text>')
    out.append(f'<text x="20" y="{TOP + ph / 2:.2f}" font-family="sans-serif" font-size="14" '
               f'text-anchor="middle" transform="rotate(-90 20 {TOP + ph / 2:.2f})">'
               f'Perceptual index</text>')
    if title:
        out.append(f'<text x="{WIDTH / 2:.2f}" y="18" font-family="sans-serif" '
                   f'font-size="14" text-anchor="middle">{escape(title)}</text>')
    if len(front) >= 2:
        pts = " ".join(f"{sx(r.distortion):.2f},{sy(r.perception):.2f}" for r in front)
        out.append(f'<polyline class="front" points="{pts}" fill="none" stroke="#1f77b4" '
                   f'stroke-width="1.5"/>')
    for r in records:
        x, y = sx(r.distortion), sy(r.perception)
        if r.name in adm:
            out.append(f'<circle class="admissible" cx="{x:.2f}" cy="{y:.2f}" r="5" '
                       f'fill="#d62728" stroke="black"/>')
        else:
            out.append(f'<circle class="dominated" cx="{x:.2f}" cy="{y:.2f}" r="5" '
                       f'fill="none" stroke="black"/>')
        out.append(f'<text x="{x + 8:.2f}" y="{y - 6:.2f}" font-family="sans-serif" '
                   f'font-size="12">{escape(r.name)}</text>')
    out.append("</svg>")
    text = "\n".join(out) + "\n"
    if path is not None:
        _write(path, text)
    return text


def four_point_fixture() -> list:
    """Four algorithms: A is dominated by B; B, C and D are admissible."""
    return [
        AlgorithmRecord("A", 3.0, 4.0),
        AlgorithmRecord("B", 2.0, 3.0),
        AlgorithmRecord("C", 1.0, 5.0),
        AlgorithmRecord("D", 4.0, 1.0),
    ]


__all__ = ["AlgorithmRecord", "dominates", "admissible_set", "pareto_front", "emit_table",
           "emit_scatter", "parse_records", "read_records", "four_point_fixture"]
