"""SVG figures rendered from Django templates.

Coordinates are computed here and written with two decimals, so the same
inputs always produce the same bytes.
"""
import logging
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from django.template.loader import render_to_string

from nn.models import Activation

logger = logging.getLogger(__name__)

PALETTE = ('#1b9e77', '#d95f02', '#7570b3', '#e7298a', '#66a61e', '#e6ab02', '#a6761d', '#666666')

# Curves of the activation figure, in legend order.
FIGURE_ACTIVATIONS = (
    Activation('sigmoid'),
    Activation('tanh'),
    Activation('elu'),
    Activation('relu'),
    Activation('selu'),
)


def _num(value):
    return f"{value:.2f}"


def nice_ticks(low, high, count=5):
    """Round tick positions covering [low, high]"""
    span = high - low
    if span <= 0:
        return [low]
    raw = span / max(count - 1, 1)
    magnitude = 10 ** math.floor(math.log10(raw))
    step = min((m * magnitude for m in (1, 2, 2.5, 5, 10) if m * magnitude >= raw), default=raw)
    start = math.ceil(low / step - 1e-9) * step
    ticks = []
    value = start
    while value <= high + 1e-9 * step:
        ticks.append(round(value, 10))
        value += step
    return ticks


@dataclass(frozen=True)
class Frame:
    """Maps data coordinates onto an SVG plotting area"""
    x_min: float
    x_max: float
    y_min: float
    y_max: float
    width: int = 640
    height: int = 400
    left: int = 60
    right: int = 170
    top: int = 40
    bottom: int = 50

    @property
    def plot_right(self):
        return self.width - self.right

    @property
    def plot_bottom(self):
        return self.height - self.bottom

    def x(self, value):
        span = (self.x_max - self.x_min) or 1.0
        return self.left + (value - self.x_min) / span * (self.plot_right - self.left)

    def y(self, value):
        span = (self.y_max - self.y_min) or 1.0
        return self.plot_bottom - (value - self.y_min) / span * (self.plot_bottom - self.top)

    def path(self, xs, ys):
        points = [f"{_num(self.x(x))},{_num(self.y(y))}" for x, y in zip(xs, ys)]
        return 'M' + ' L'.join(points)

    def axes(self, x_label, y_label):
        x_ticks = [{'pos': _num(self.x(t)), 'label': f"{t:g}"} for t in nice_ticks(self.x_min, self.x_max)]
        y_ticks = [{'pos': _num(self.y(t)), 'label': f"{t:g}"} for t in nice_ticks(self.y_min, self.y_max)]
        return {
            'width': self.width,
            'height': self.height,
            'left': self.left,
            'top': self.top,
            'plot_right': self.plot_right,
            'plot_bottom': self.plot_bottom,
            'label_x': _num((self.left + self.plot_right) / 2),
            'label_y': _num((self.top + self.plot_bottom) / 2),
            'x_label': x_label,
            'y_label': y_label,
            'x_ticks': x_ticks,
            'y_ticks': y_ticks,
            'zero_y': _num(self.y(0.0)) if self.y_min < 0.0 < self.y_max else None,
        }


def _legend(frame, labels):
    return [
        {
            'label': label,
            'color': PALETTE[index % len(PALETTE)],
            'x1': frame.plot_right + 15,
            'x2': frame.plot_right + 40,
            'text_x': frame.plot_right + 46,
            'y': frame.top + 10 + 18 * index,
            'text_y': frame.top + 14 + 18 * index,
        }
        for index, label in enumerate(labels)
    ]


def write_svg(template, context, path):
    path = Path(path)
    path.write_text(render_to_string(template, context), encoding='utf-8')
    logger.info(f"Wrote {path}")
    return path


def activation_context(u_min=-4.0, u_max=4.0, points=161, activations=FIGURE_ACTIVATIONS):
    u = np.linspace(u_min, u_max, points)
    values = [activation(u) for activation in activations]
    low = math.floor(min(float(v.min()) for v in values))
    high = math.ceil(max(float(v.max()) for v in values))
    frame = Frame(u_min, u_max, low, high)
    curves = [
        {'d': frame.path(u, v), 'color': PALETTE[index % len(PALETTE)], 'label': activation.label()}
        for index, (activation, v) in enumerate(zip(activations, values))
    ]
    return {
        'title': 'Activation functions',
        'frame': frame,
        'axes': frame.axes('u', 'sigma(u)'),
        'curves': curves,
        'legend': _legend(frame, [curve['label'] for curve in curves]),
    }


def bar_chart_context(report, title=None):
    scores = np.asarray(report.scores, dtype=float)
    values = [scores, [0.0]]
    if report.has_intervals:
        values += [report.ci_low, report.ci_high]
    if report.baseline is not None and report.method == 'permutation':
        values.append([report.baseline])
    low = min(float(np.min(v)) for v in values)
    high = max(float(np.max(v)) for v in values)
    pad = 0.05 * ((high - low) or 1.0)
    frame = Frame(0.0, 1.0, low - pad if low < 0 else 0.0, high + pad, right=30)
    slot = (frame.plot_right - frame.left - 20) / max(len(scores), 1)
    bars = []
    for index, (name, score) in enumerate(zip(report.feature_names, scores)):
        x = frame.left + 10 + index * slot
        top, base = frame.y(max(score, 0.0)), frame.y(min(score, 0.0))
        bar = {
            'name': name,
            'x': _num(x + 0.2 * slot),
            'width': _num(0.6 * slot),
            'y': _num(top),
            'height': _num(max(base - top, 0.5)),
            'label_x': _num(x + 0.5 * slot),
            'color': PALETTE[0] if score >= 0 else PALETTE[1],
        }
        if report.has_intervals:
            bar['whisker_low'] = _num(frame.y(float(report.ci_low[index])))
            bar['whisker_high'] = _num(frame.y(float(report.ci_high[index])))
        bars.append(bar)
    axes = frame.axes(report.method, report.metric or 'score')
    axes['x_ticks'] = []
    return {
        'title': title or f"{report.method} importance",
        'axes': axes,
        'bars': bars,
        'intervals': report.has_intervals,
        'baseline_y': _num(frame.y(report.baseline))
        if report.baseline is not None and report.method == 'permutation' else None,
    }


def lek_context(profile):
    frame = Frame(float(profile.grid[0]), float(profile.grid[-1]), 0.0, 1.0)
    labels = [f"others at q={q:g}" for q in profile.quantiles]
    curves = [
        {'d': frame.path(profile.grid, row), 'color': PALETTE[index % len(PALETTE)], 'label': labels[index]}
        for index, row in enumerate(profile.probabilities)
    ]
    return {
        'title': f"Lek profile of {profile.feature}",
        'axes': frame.axes(profile.feature, 'P(diseased)'),
        'curves': curves,
        'legend': _legend(frame, labels),
    }
