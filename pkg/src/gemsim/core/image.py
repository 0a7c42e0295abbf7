from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class ImageField:
    """2D real intensity grid with a physical pixel pitch (meters/pixel).

    ``values`` is indexed ``[row, column]`` i.e. ``[y, x]``. The array is
    copied and frozen on construction so instances can be shared freely.
    """

    values: np.ndarray
    pitch: float

    def __post_init__(self):
        arr = np.array(self.values, dtype=float, copy=True)
        if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValueError(f"ImageField needs a non-empty 2D array, got shape {arr.shape}")
        if not (self.pitch > 0 and np.isfinite(self.pitch)):
            raise ValueError(f"pitch must be positive, got {self.pitch}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("ImageField values must be finite")
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)
        object.__setattr__(self, "pitch", float(self.pitch))

    @property
    def width_px(self) -> int:
        return self.values.shape[1]

    @property
    def height_px(self) -> int:
        return self.values.shape[0]

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    @property
    def total_power(self) -> float:
        return float(self.values.sum() * self.pitch**2)

    def with_values(self, values: np.ndarray) -> "ImageField":
        return ImageField(values, self.pitch)

    def scaled(self, factor: float) -> "ImageField":
        return ImageField(self.values * factor, self.pitch)

    def x_coords(self) -> np.ndarray:
        """Pixel-center x positions relative to the center column ``width // 2``."""
        return (np.arange(self.width_px) - self.width_px // 2) * self.pitch

    def y_coords(self) -> np.ndarray:
        return (np.arange(self.height_px) - self.height_px // 2) * self.pitch


def resample(img: ImageField, magnification: float) -> ImageField:
    """Image ``img`` through optics of the given magnification.

    The pixel grid is kept and the pitch rescaled; intensities are divided by
    ``magnification**2`` so the total power is unchanged.
    """
    if not magnification > 0:
        raise ValueError(f"magnification must be positive, got {magnification}")
    if magnification == 1:
        return img
    return ImageField(img.values / magnification**2, img.pitch * magnification)


@dataclass(frozen=True)
class Frame:
    t_start: float
    duration: float
    image: ImageField

    @property
    def t_end(self) -> float:
        return self.t_start + self.duration

    @property
    def t_mid(self) -> float:
        return self.t_start + 0.5 * self.duration


@dataclass(frozen=True)
class FrameSet:
    """Time-gated camera frames, times in seconds after the gradient flip."""

    frames: tuple[Frame, ...] = field(default_factory=tuple)

    def __post_init__(self):
        frames = tuple(self.frames)
        object.__setattr__(self, "frames", frames)
        if not frames:
            return
        shape, pitch = frames[0].image.shape, frames[0].image.pitch
        for prev, cur in zip(frames, frames[1:]):
            if cur.t_start < prev.t_end - 1e-15:
                raise ValueError("frames overlap")
        for f in frames:
            if f.image.shape != shape or f.image.pitch != pitch:
                raise ValueError("all frames must share one shape and pitch")

    def __len__(self):
        return len(self.frames)

    def __getitem__(self, i):
        return self.frames[i]

    def __iter__(self):
        return iter(self.frames)

    @property
    def t_starts(self) -> np.ndarray:
        return np.array([f.t_start for f in self.frames])

    @property
    def t_mids(self) -> np.ndarray:
        return np.array([f.t_mid for f in self.frames])
