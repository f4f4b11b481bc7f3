# utils/svg_plot.py
# Static SVG line charts rendered with QPainter on a QSvgGenerator (no display needed).
import math
import os
from dataclasses import dataclass
from typing import List, Optional, Sequence

# must be set before the first Qt application object exists
os.environ.setdefault("QT_QPA_PLATFORM", "offscreen")

from PySide6.QtCore import QPointF, QRectF, QSize, Qt
from PySide6.QtGui import QColor, QFont, QGuiApplication, QPainter, QPainterPath, QPen
from PySide6.QtSvg import QSvgGenerator

WIDTH, HEIGHT = 720, 480
MARGIN_L, MARGIN_R, MARGIN_T, MARGIN_B = 78, 170, 44, 58

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#17becf", "#7f7f7f")


@dataclass
class LineSeries:
    label: str
    x: Sequence[float]
    y: Sequence[float]
    dashed: bool = False
    markers: bool = True


def _app():
    app = QGuiApplication.instance()
    if app is None:
        app = QGuiApplication([])
    return app


def _nice_ticks(lo: float, hi: float, count: int = 6) -> List[float]:
    if not (math.isfinite(lo) and math.isfinite(hi)):
        return []
    if hi <= lo:
        hi = lo + 1.0
    raw = (hi - lo) / max(count - 1, 1)
    mag = 10 ** math.floor(math.log10(raw))
    step = next(m * mag for m in (1, 2, 2.5, 5, 10) if m * mag >= raw)
    first = math.ceil(lo / step - 1e-9) * step
    ticks = []
    v = first
    while v <= hi + 1e-9 * step:
        ticks.append(round(v, 12))
        v += step
    return ticks


def _finite_pairs(s: LineSeries, log_y: bool):
    for x, y in zip(s.x, s.y):
        if x is None or y is None:
            continue
        x, y = float(x), float(y)
        if not (math.isfinite(x) and math.isfinite(y)):
            continue
        if log_y and y <= 0:
            continue
        yield x, (math.log10(y) if log_y else y)


def write_line_chart(path: str, title: str, xlabel: str, ylabel: str, series: Sequence[LineSeries],
                     log_y: bool = False, y_range: Optional[Sequence[float]] = None) -> str:
    """Render ``series`` into ``path`` and return the path."""
    _app()
    pts = [list(_finite_pairs(s, log_y)) for s in series]
    xs = [p[0] for ps in pts for p in ps]
    ys = [p[1] for ps in pts for p in ps]
    if not xs:
        raise ValueError("nothing to plot")
    x0, x1 = min(xs), max(xs)
    y0, y1 = (min(ys), max(ys)) if y_range is None else (float(y_range[0]), float(y_range[1]))
    if x1 == x0:
        x0, x1 = x0 - 0.5, x1 + 0.5
    if y1 == y0:
        y0, y1 = y0 - 0.5, y1 + 0.5
    pad = 0.04 * (y1 - y0)
    y0, y1 = y0 - pad, y1 + pad

    plot = QRectF(MARGIN_L, MARGIN_T, WIDTH - MARGIN_L - MARGIN_R, HEIGHT - MARGIN_T - MARGIN_B)

    def px(x):
        return plot.left() + (x - x0) / (x1 - x0) * plot.width()

    def py(y):
        return plot.bottom() - (y - y0) / (y1 - y0) * plot.height()

    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    gen = QSvgGenerator()
    gen.setFileName(path)
    gen.setSize(QSize(WIDTH, HEIGHT))
    gen.setViewBox(QRectF(0, 0, WIDTH, HEIGHT))
    gen.setTitle(title)

    p = QPainter(gen)
    try:
        p.setRenderHint(QPainter.Antialiasing, True)
        p.fillRect(QRectF(0, 0, WIDTH, HEIGHT), QColor("#ffffff"))
        font = QFont("DejaVu Sans", 9)
        p.setFont(font)

        grid = QPen(QColor("#dddddd"))
        grid.setWidthF(0.6)
        axis = QPen(QColor("#333333"))
        axis.setWidthF(1.0)
        for t in _nice_ticks(x0, x1):
            p.setPen(grid)
            p.drawLine(QPointF(px(t), plot.top()), QPointF(px(t), plot.bottom()))
            p.setPen(axis)
            p.drawText(QRectF(px(t) - 30, plot.bottom() + 4, 60, 16), Qt.AlignHCenter | Qt.AlignTop, f"{t:g}")
        for t in _nice_ticks(y0, y1):
            p.setPen(grid)
            p.drawLine(QPointF(plot.left(), py(t)), QPointF(plot.right(), py(t)))
            p.setPen(axis)
            label = f"1e{t:g}" if log_y else f"{t:g}"
            p.drawText(QRectF(plot.left() - 64, py(t) - 8, 58, 16), Qt.AlignRight | Qt.AlignVCenter, label)
        p.setPen(axis)
        p.setBrush(Qt.NoBrush)
        p.drawRect(plot)

        p.drawText(QRectF(plot.left(), plot.bottom() + 26, plot.width(), 18), Qt.AlignHCenter, xlabel)
        p.save()
        p.translate(16, plot.center().y())
        p.rotate(-90)
        p.drawText(QRectF(-plot.height() / 2, 0, plot.height(), 18), Qt.AlignHCenter, ylabel)
        p.restore()
        bold = QFont(font)
        bold.setBold(True)
        bold.setPointSize(11)
        p.setFont(bold)
        p.drawText(QRectF(0, 10, WIDTH, 22), Qt.AlignHCenter, title)
        p.setFont(font)

        p.setClipRect(plot)
        for i, (s, ps) in enumerate(zip(series, pts)):
            if not ps:
                continue
            pen = QPen(QColor(PALETTE[i % len(PALETTE)]))
            pen.setWidthF(1.6)
            if s.dashed:
                pen.setStyle(Qt.DashLine)
            p.setPen(pen)
            path_ = QPainterPath(QPointF(px(ps[0][0]), py(ps[0][1])))
            for x, y in ps[1:]:
                path_.lineTo(px(x), py(y))
            p.drawPath(path_)
            if s.markers:
                p.setBrush(QColor(PALETTE[i % len(PALETTE)]))
                for x, y in ps:
                    p.drawEllipse(QPointF(px(x), py(y)), 2.4, 2.4)
                p.setBrush(Qt.NoBrush)
        p.setClipping(False)

        # legend
        ly = plot.top() + 4
        for i, s in enumerate(series):
            pen = QPen(QColor(PALETTE[i % len(PALETTE)]))
            pen.setWidthF(1.6)
            if s.dashed:
                pen.setStyle(Qt.DashLine)
            p.setPen(pen)
            lx = plot.right() + 10
            p.drawLine(QPointF(lx, ly + 7), QPointF(lx + 22, ly + 7))
            p.setPen(axis)
            p.drawText(QRectF(lx + 28, ly, MARGIN_R - 40, 16), Qt.AlignLeft | Qt.AlignVCenter, s.label)
            ly += 18
    finally:
        p.end()
    return path
