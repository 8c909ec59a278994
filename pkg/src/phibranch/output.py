"""Branch logs (CSV) and bifurcation diagrams (SVG).

Both writers are deterministic: identical branches give byte-identical
files.  Floats in the CSV use 17 significant digits, so every value reads
back bit-exactly.
"""

from __future__ import annotations

import csv
import io
from collections.abc import Sequence
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .continuation import Branch, DomainSpec, Quantity
from .errors import IoError
from .model import norms

CSV_COLUMNS = ("index", "lambda", "sup_x", "sup_xprime", "c1_norm", "residual", "arclength", "flags")
FLOAT_FORMAT = ".17g"


def _fmt(x: float) -> str:
    return format(float(x), FLOAT_FORMAT)


def branch_rows(branch: Branch) -> list[list[str]]:
    if branch.phi is None:
        raise IoError("branch carries no operator; norms cannot be evaluated")
    rows = []
    for i, (pair, arc, flags) in enumerate(zip(branch.points, branch.arclengths, branch.flags)):
        nrm = norms(pair.state, branch.phi)
        rows.append(
            [
                str(i),
                _fmt(pair.lam),
                _fmt(nrm.sup_x),
                _fmt(nrm.sup_xprime),
                _fmt(pair.c1_norm),
                _fmt(pair.residual_sup),
                _fmt(arc),
                ";".join(flags),
            ]
        )
    return rows


def branch_csv_text(branch: Branch) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    writer.writerows(branch_rows(branch))
    return buf.getvalue()


def write_branch_csv(branch: Branch, path) -> Path:
    """One row per branch point, in branch order (index 0 is the backward end)."""
    if len(branch) == 0:
        raise IoError("empty branch")
    text = branch_csv_text(branch)
    path = Path(path)
    try:
        path.write_text(text, encoding="utf-8")
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc
    return path


@dataclass(frozen=True)
class BranchTable:
    """Columns of a branch CSV read back from disk."""

    index: np.ndarray
    lambdas: np.ndarray
    sup_x: np.ndarray
    sup_xprime: np.ndarray
    c1_norms: np.ndarray
    residuals: np.ndarray
    arclengths: np.ndarray
    flags: tuple[tuple[str, ...], ...]
    source: str = ""

    def __len__(self):
        return self.lambdas.size


def read_branch_csv(path) -> BranchTable:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    reader = csv.reader(io.StringIO(text))
    header = next(reader, None)
    if header is None or tuple(header) != CSV_COLUMNS:
        raise IoError(f"{path}: unexpected header {header}")
    cols = [[] for _ in CSV_COLUMNS]
    for lineno, row in enumerate(reader, start=2):
        if len(row) != len(CSV_COLUMNS):
            raise IoError(f"{path}:{lineno}: expected {len(CSV_COLUMNS)} fields, got {len(row)}")
        for c, v in zip(cols, row):
            c.append(v)
    try:
        floats = [np.array([float(v) for v in c]) for c in cols[1:7]]
        index = np.array([int(v) for v in cols[0]], dtype=int)
    except ValueError as exc:
        raise IoError(f"{path}: {exc}") from exc
    flags = tuple(tuple(f.split(";")) if f else () for f in cols[7])
    return BranchTable(index, *floats, flags=flags, source=str(path))


# SVG

WIDTH, HEIGHT = 640, 440
MARGIN_LEFT, MARGIN_RIGHT, MARGIN_TOP, MARGIN_BOTTOM = 70, 20, 20, 55
COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")
DASH = "6,4"


def _num(x: float) -> str:
    s = f"{x:.3f}"
    return "0.000" if s == "-0.000" else s


def _tick_values(lo: float, hi: float, count: int = 5) -> list[float]:
    return [lo + (hi - lo) * k / (count - 1) for k in range(count)]


def _tick_label(v: float) -> str:
    if abs(v) < 1e-12:
        return "0"
    return f"{v:.3g}"


def _lambda_hats(branches) -> list[float]:
    hats = set()
    for b in branches:
        for m in getattr(b, "monitors", ()):
            if m.quantity is Quantity.ABS_LAMBDA:
                hats.add(float(m.bound(0.0)))
    return sorted(hats)


def diagram_svg_text(
    branches: Sequence,
    c1_ceiling: float | None = None,
    lambda_interval: tuple[float, float] | None = None,
    lambda_hats: Sequence[float] | None = None,
    title: str = "",
) -> str:
    """SVG source of a lambda vs C1-norm diagram.

    ``branches`` are :class:`Branch` or :class:`BranchTable` objects (anything
    with ``lambdas`` and ``c1_norms``).
    """
    if not branches:
        raise IoError("no branches to draw")
    if lambda_interval is None:
        lambda_interval = getattr(branches[0], "lambda_interval", (-np.inf, np.inf))
    if lambda_hats is None:
        lambda_hats = _lambda_hats(branches)
    vguides = [("guide-interval", float(e)) for e in lambda_interval if np.isfinite(e)]
    for h in lambda_hats:
        vguides += [("guide-lambda-hat", -float(h)), ("guide-lambda-hat", float(h))]

    lams = np.concatenate([np.asarray(b.lambdas, dtype=float) for b in branches])
    c1s = np.concatenate([np.asarray(b.c1_norms, dtype=float) for b in branches])
    xs = np.concatenate([lams, [g[1] for g in vguides]])
    x_lo, x_hi = float(xs.min()), float(xs.max())
    if x_hi - x_lo < 1e-12:
        x_lo, x_hi = x_lo - 1.0, x_hi + 1.0
    y_top = float(c1s.max()) if c1s.size else 1.0
    if c1_ceiling is not None and np.isfinite(c1_ceiling):
        y_top = max(y_top, float(c1_ceiling))
    y_hi = 1.05 * y_top if y_top > 0 else 1.0
    y_lo = 0.0

    pw = WIDTH - MARGIN_LEFT - MARGIN_RIGHT
    ph = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM

    def px(lam):
        return MARGIN_LEFT + (lam - x_lo) / (x_hi - x_lo) * pw

    def py(c):
        return MARGIN_TOP + ph - (c - y_lo) / (y_hi - y_lo) * ph

    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}">',
        f"<title>{title or 'branches of nontrivial solution pairs'}</title>",
        f'<rect class="frame" x="{MARGIN_LEFT}" y="{MARGIN_TOP}" width="{pw}" height="{ph}" '
        'fill="none" stroke="#000000" stroke-width="1"/>',
    ]
    for v in _tick_values(x_lo, x_hi):
        x = _num(px(v))
        out.append(f'<line class="tick" x1="{x}" y1="{_num(MARGIN_TOP + ph)}" x2="{x}" y2="{_num(MARGIN_TOP + ph + 5)}" stroke="#000000"/>')
        out.append(f'<text x="{x}" y="{_num(MARGIN_TOP + ph + 19)}" font-size="11" text-anchor="middle">{_tick_label(v)}</text>')
    for v in _tick_values(y_lo, y_hi):
        y = _num(py(v))
        out.append(f'<line class="tick" x1="{MARGIN_LEFT - 5}" y1="{y}" x2="{MARGIN_LEFT}" y2="{y}" stroke="#000000"/>')
        out.append(f'<text x="{MARGIN_LEFT - 8}" y="{_num(py(v) + 4)}" font-size="11" text-anchor="end">{_tick_label(v)}</text>')
    out.append(
        f'<text class="axis-label" x="{_num(MARGIN_LEFT + pw / 2)}" y="{HEIGHT - 12}" font-size="14" '
        'text-anchor="middle">λ</text>'
    )
    yl = _num(MARGIN_TOP + ph / 2)
    out.append(
        f'<text class="axis-label" x="18" y="{yl}" font-size="14" text-anchor="middle" '
        f'transform="rotate(-90 18 {yl})">‖x‖<tspan baseline-shift="sub" font-size="10">C¹</tspan></text>'
    )
    for cls, v in vguides:
        x = _num(px(v))
        out.append(
            f'<line class="guide {cls}" data-lambda="{_fmt(v)}" x1="{x}" y1="{MARGIN_TOP}" x2="{x}" '
            f'y2="{MARGIN_TOP + ph}" stroke="#555555" stroke-dasharray="{DASH}"/>'
        )
    if c1_ceiling is not None and np.isfinite(c1_ceiling):
        y = _num(py(c1_ceiling))
        out.append(
            f'<line class="guide guide-ceiling" data-c1="{_fmt(c1_ceiling)}" x1="{MARGIN_LEFT}" y1="{y}" '
            f'x2="{MARGIN_LEFT + pw}" y2="{y}" stroke="#555555" stroke-dasharray="{DASH}"/>'
        )
    for k, b in enumerate(branches):
        pts = " ".join(
            f"{_num(px(l))},{_num(py(c))}"
            for l, c in zip(np.asarray(b.lambdas, dtype=float), np.asarray(b.c1_norms, dtype=float))
        )
        out.append(
            f'<polyline class="branch" data-branch="{k}" points="{pts}" fill="none" '
            f'stroke="{COLORS[k % len(COLORS)]}" stroke-width="1.5"/>'
        )
    out.append("</svg>")
    return "\n".join(out) + "\n"


def render_diagram_svg(
    branches: Sequence,
    spec: DomainSpec | None,
    path,
    lambda_interval: tuple[float, float] | None = None,
    lambda_hats: Sequence[float] | None = None,
    title: str = "",
    c1_ceiling: float | None = None,
) -> Path:
    """Write the diagram; guides come from the lambda interval, lambda-hat monitors and the C1 ceiling.

    The ceiling is taken from ``spec`` when given, else from ``c1_ceiling``.
    Nothing is written if there is no branch.
    """
    ceiling = spec.c1_ceiling if spec is not None else c1_ceiling
    text = diagram_svg_text(branches, ceiling, lambda_interval, lambda_hats, title)
    path = Path(path)
    try:
        path.write_text(text, encoding="utf-8")
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc
    return path




def write_solution_csv(pair, phi, path) -> Path:
    """Nodal values of one solution: ``t, x_1..x_n, xprime_1..xprime_n``."""
    s = pair.state
    xprime = phi.inverse(s.x2.values)
    n = s.dim
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["t"] + [f"x_{i + 1}" for i in range(n)] + [f"xprime_{i + 1}" for i in range(n)])
    for t, x, y in zip(s.grid.nodes, s.x1.values, xprime):
        writer.writerow([_fmt(t)] + [_fmt(v) for v in x] + [_fmt(v) for v in y])
    path = Path(path)
    try:
        path.write_text(buf.getvalue(), encoding="utf-8")
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc
    return path


__all__ = [
    "CSV_COLUMNS",
    "BranchTable",
    "branch_csv_text",
    "diagram_svg_text",
    "read_branch_csv",
    "render_diagram_svg",
    "write_branch_csv",
    "write_solution_csv",
]
