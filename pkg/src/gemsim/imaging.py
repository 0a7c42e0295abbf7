"""Input patterns and gated camera frames.

Bar charts
----------
A chart is ``n_lines`` (odd, default 3) opaque bars of width ``a`` with
bright lines of width ``a`` between and around them, so the profile
across the bars reads bright/dark/.../bright over ``(2 n + 1) a``. The
center of the pattern is the center dark bar (``x = 0``); the nearest
bright line is centered at ``x = a``. Bars have length ``extent``.

Pixel registration: ``a`` is snapped to a whole number of pixels
``a_px``. The pattern is centered on column ``W // 2`` when its pixel
width is odd; when even, its center falls on the boundary between
columns ``W // 2 - 1`` and ``W // 2``. Vertical charts have bars along
y (profile along x); horizontal charts are the transpose.

Letters
-------
Stroke glyphs with aspect ratio 1:1.2 (width:height) and stroke width 15 %
of the height, in letter coordinates with the origin at the letter center
and y pointing up (``w = h / 1.2``, ``s = 0.15 h``):

* ``T``: top bar ``|x| <= w/2, h/2 - s <= y <= h/2``; stem ``|x| <= s/2``.
* ``N``: side bars ``-w/2 <= x <= -w/2 + s`` and ``w/2 - s <= x <= w/2``;
  diagonal of horizontal thickness ``s`` whose center line runs from
  ``(-w/2 + s/2, h/2)`` to ``(w/2 - s/2, -h/2)``.

A pixel is lit when its center is inside a stroke.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Protocol, Sequence

import numpy as np

from .core.image import Frame, FrameSet, ImageField
from .diffusion import SpectralPropagator


@dataclass(frozen=True)
class BarChart:
    a: float
    n_lines: int = 3
    orientation: str = "vertical"
    extent: float | None = None
    periodic: bool = False

    def __post_init__(self):
        if not self.a > 0:
            raise ValueError("bar width must be > 0")
        if self.n_lines < 1 or self.n_lines % 2 == 0:
            raise ValueError("n_lines must be odd so the pattern has a center dark bar")
        if self.orientation not in ("vertical", "horizontal"):
            raise ValueError(f"orientation must be vertical or horizontal, got {self.orientation!r}")

    @property
    def spatial_frequency(self) -> float:
        """Line pairs per meter."""
        return 1.0 / (2.0 * self.a)

    @property
    def bar_length(self) -> float:
        return self.extent if self.extent is not None else 5.0 * self.a

    def a_px(self, pitch: float) -> int:
        n = int(round(self.a / pitch))
        if self.a < 4 * pitch or n < 4:
            raise ValueError(f"bar width {self.a:.3e} m is under-resolved at pitch {pitch:.3e} m (need a >= 4 pitch)")
        return n

    def width_px(self, pitch: float) -> int:
        return (2 * self.n_lines + 1) * self.a_px(pitch)

    def center(self, size: int, pitch: float) -> float:
        """Continuous pixel coordinate of the center dark bar along the profile axis."""
        if self.periodic:
            return float(size // 2) if self.a_px(pitch) % 2 else size // 2 - 0.5
        T = self.width_px(pitch)
        return size // 2 - T // 2 + (T - 1) / 2

    def bright_edges(self, size: int, pitch: float) -> list[tuple[float, float]]:
        """Bright segments ``[lo, hi]`` along the profile axis, in continuous pixel coordinates."""
        a = self.a_px(pitch)
        c = self.center(size, pitch)
        if self.periodic:
            k0 = -int(math.ceil((c + 1) / (2 * a))) - 1
            k1 = int(math.ceil((size - c) / (2 * a))) + 1
            segs = [(c + (2 * k + 0.5) * a, c + (2 * k + 1.5) * a) for k in range(k0, k1)]
            return [(max(lo, -0.5), min(hi, size - 0.5)) for lo, hi in segs if hi > -0.5 and lo < size - 0.5]
        n = self.n_lines
        return [(c + (2 * k - n - 0.5) * a, c + (2 * k - n + 0.5) * a) for k in range(n + 1)]

    def profile_mask(self, size: int, pitch: float) -> np.ndarray:
        x = np.arange(size)
        out = np.zeros(size)
        for lo, hi in self.bright_edges(size, pitch):
            out[(x > lo) & (x < hi)] = 1.0
        return out

    def rows(self, size: int, pitch: float) -> slice:
        """Pixel range covered by the bar length across the profile axis."""
        if self.periodic:
            return slice(0, size)
        n = max(1, int(round(self.bar_length / pitch)))
        start = size // 2 - n // 2
        if start < 0:
            raise ValueError("bar length does not fit the image")
        return slice(start, start + n)

    def sample_positions(self, size: int, pitch: float) -> tuple[float, float]:
        """(x = 0 dark center, x = a bright center) as continuous pixel coordinates."""
        c = self.center(size, pitch)
        return c, c + self.a_px(pitch)


def make_barchart(spec: BarChart, pitch: float, shape: tuple[int, int] = (256, 256)) -> ImageField:
    h, w = shape
    along = w if spec.orientation == "vertical" else h
    across = h if spec.orientation == "vertical" else w
    if not spec.periodic and spec.width_px(pitch) > along:
        raise ValueError("chart does not fit the image")
    prof = spec.profile_mask(along, pitch)
    rows = spec.rows(across, pitch)
    img = np.zeros((across, along))
    img[rows, :] = prof[None, :]
    if spec.orientation == "horizontal":
        img = img.T
    return ImageField(img, pitch)


@dataclass(frozen=True)
class LetterMask:
    glyph: str
    height: float
    stroke_width: float | None = None
    aspect: float = 1.0 / 1.2

    @property
    def stroke(self) -> float:
        return self.stroke_width if self.stroke_width is not None else 0.15 * self.height

    @property
    def width(self) -> float:
        return self.aspect * self.height

    @property
    def bounding_box(self) -> tuple[float, float]:
        return self.width, self.height


GLYPHS = ("N", "T")


def make_letter(glyph: str, spec: LetterMask | float, pitch: float, shape: tuple[int, int] = (256, 256)) -> ImageField:
    """Binary stroke glyph centered in an image of ``shape``."""
    if isinstance(spec, (int, float)):
        spec = LetterMask(glyph, float(spec))
    if glyph not in GLYPHS:
        raise ValueError(f"unsupported glyph {glyph!r}; available: {', '.join(GLYPHS)}")
    s, w, h = spec.stroke, spec.width, spec.height
    if s < 3 * pitch:
        raise ValueError(f"stroke width {s:.3e} m is under 3 pixels at pitch {pitch:.3e} m")
    H, W = shape
    if w > W * pitch or h > H * pitch:
        raise ValueError("letter does not fit the image")
    x = ((np.arange(W) - W // 2) * pitch)[None, :]
    y = (-(np.arange(H) - H // 2) * pitch)[:, None]
    inside = (np.abs(y) <= h / 2) & (np.abs(x) <= w / 2)
    if glyph == "T":
        lit = (y >= h / 2 - s) | (np.abs(x) <= s / 2)
    else:
        x0, y0 = -w / 2 + s / 2, h / 2
        x1, y1 = w / 2 - s / 2, -h / 2
        x_line = x0 + (y - y0) * (x1 - x0) / (y1 - y0)
        lit = (x <= -w / 2 + s) | (x >= w / 2 - s) | (np.abs(x - x_line) <= s / 2)
    return ImageField((inside & lit).astype(float), pitch)


# --------------------------------------------------------------------------
# gated frames

class TimeResolvedImage(Protocol):
    """Image that varies in time, known at the samples ``t_grid``."""

    t_grid: np.ndarray

    def combine(self, weights: np.ndarray) -> ImageField:
        """``sum_i weights[i] * image(t_grid[i])``."""


@dataclass
class SampledImages:
    t_grid: np.ndarray
    images: Sequence[ImageField]

    def combine(self, weights):
        pitch = self.images[0].pitch
        acc = np.zeros(self.images[0].shape)
        for w, img in zip(weights, self.images):
            if w != 0:
                acc += w * img.values
        return ImageField(acc, pitch)


class RetrievedField:
    """Output image vs time as a sum of separable components.

    Each component is an intensity trace on ``t_grid`` times a transverse
    image diffused for the storage time of that instant. Components add in
    intensity.
    """

    def __init__(self, t_grid: np.ndarray):
        self.t_grid = np.asarray(t_grid, dtype=float)
        self._components: list[tuple[np.ndarray, SpectralPropagator, np.ndarray]] = []

    def add(self, intensity, propagator: SpectralPropagator, storage_time=None):
        intensity = np.asarray(intensity, dtype=float)
        if intensity.shape != self.t_grid.shape:
            raise ValueError("intensity trace must be sampled on t_grid")
        tau = np.zeros_like(self.t_grid) if storage_time is None else np.nan_to_num(np.asarray(storage_time), nan=0.0)
        self._components.append((intensity, propagator, np.maximum(tau, 0.0)))
        return self

    def combine(self, weights):
        weights = np.asarray(weights, dtype=float)
        idx = np.nonzero(weights)[0]
        out = None
        for intensity, prop, tau in self._components:
            img = prop.combine(weights[idx] * intensity[idx], tau[idx])
            out = img if out is None else ImageField(out.values + img.values, img.pitch)
        return out


def window_weights(t_grid: np.ndarray, a: float, b: float) -> np.ndarray:
    """Weights ``w`` with ``sum(w * f(t_grid))`` = integral over [a, b] of the piecewise-linear interpolant of f."""
    t = np.asarray(t_grid, dtype=float)
    if not (t[0] - 1e-15 <= a <= b <= t[-1] + 1e-15):
        raise ValueError(f"window [{a:.4e}, {b:.4e}] s lies outside the simulated span [{t[0]:.4e}, {t[-1]:.4e}] s")
    w = np.zeros_like(t)
    i0 = max(int(np.searchsorted(t, a, side="right")) - 1, 0)
    i1 = min(int(np.searchsorted(t, b, side="left")), len(t) - 1)
    for i in range(i0, i1):
        lo, hi = max(a, t[i]), min(b, t[i + 1])
        if hi <= lo:
            continue
        h = t[i + 1] - t[i]
        upper = ((hi - t[i]) ** 2 - (lo - t[i]) ** 2) / (2 * h)
        w[i + 1] += upper
        w[i] += (hi - lo) - upper
    return w


def gate_frames(field: TimeResolvedImage, frame_width: float, t0: float, n_frames: int,
                threads: int = 1) -> FrameSet:
    """Integrate ``field`` over ``n_frames`` contiguous windows of ``frame_width`` from ``t0``.

    Frames are independent, so ``threads > 1`` farms them out to a pool;
    each frame is computed the same way either way and results keep their order.
    """
    if not frame_width > 0:
        raise ValueError("frame width must be > 0")

    def one(k):
        a = t0 + k * frame_width
        w = window_weights(field.t_grid, a, a + frame_width)
        return Frame(a, frame_width, field.combine(w))

    if threads <= 1:
        return FrameSet(tuple(one(k) for k in range(n_frames)))
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return FrameSet(tuple(pool.map(one, range(n_frames))))
