"""Observables: similarity, contrast, distinguishability, MTF and the fixed-D model."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
from scipy.special import erf

from .core.image import FrameSet, ImageField
from .diffusion import propagate
from .imaging import BarChart, make_barchart

DISTINGUISH_THRESHOLD = 0.5


@dataclass(frozen=True)
class SimilarityResult:
    S: float
    reference_id: str = ""
    frame_index: int | None = None


def similarity(frame: ImageField, ref: ImageField, reference_id: str = "", frame_index: int | None = None) -> SimilarityResult:
    """Normalized cross-correlation: sum(A B) / sqrt(sum(A^2) sum(B^2)).

    A frame with no power has similarity 0.
    """
    if frame.shape != ref.shape:
        raise ValueError(f"shape mismatch: frame {frame.shape} vs reference {ref.shape}")
    # scale each image to unit peak first so tiny intensities cannot underflow when squared
    mb = float(np.max(np.abs(ref.values)))
    if mb == 0:
        raise ValueError("reference image has no power")
    ma = float(np.max(np.abs(frame.values)))
    if ma == 0:
        return SimilarityResult(0.0, reference_id, frame_index)
    a, b = frame.values / ma, ref.values / mb
    na, nb = float(np.sum(a * a)), float(np.sum(b * b))
    s = float(np.sum(a * b)) / math.sqrt(na * nb)
    return SimilarityResult(min(s, 1.0), reference_id, frame_index)


def distinguishability(s_n: float, s_t: float) -> float:
    return abs(s_n - s_t)


# --------------------------------------------------------------------------
# contrast

def _sample(profile: np.ndarray, pos: float, columns: int = 1) -> float:
    offsets = (0.0,) if columns == 1 else (-1.0, 0.0, 1.0)
    xs = np.arange(profile.size)
    return float(np.mean([np.interp(pos + o, xs, profile) for o in offsets]))


def chart_profile(frame: ImageField, chart: BarChart) -> np.ndarray:
    """Intensity across the bars, summed along the bars over the chart's extent."""
    v = frame.values if chart.orientation == "vertical" else frame.values.T
    rows = chart.rows(v.shape[0], frame.pitch)
    return v[rows, :].sum(axis=0)


def contrast_from_profile(profile: np.ndarray, chart: BarChart, pitch: float, columns: int = 1) -> float:
    x_dark, x_bright = chart.sample_positions(profile.size, pitch)
    i_dark = _sample(profile, x_dark, columns)
    i_bright = _sample(profile, x_bright, columns)
    total = i_bright + i_dark
    if total == 0:
        raise ValueError("contrast undefined: no light at either sample line")
    return (i_bright - i_dark) / total


def contrast(frame: ImageField, chart: BarChart, columns: int = 1) -> float:
    """(I(a) - I(0)) / (I(a) + I(0)) at the chart's registered center lines.

    ``I`` is the profile summed along the bars; ``x = 0`` is the center dark
    bar and ``x = a`` the adjacent bright line. Negative once diffusion has
    moved more light onto the dark bar than is left on the bright line.
    """
    return contrast_from_profile(chart_profile(frame, chart), chart, frame.pitch, columns)


def analytic_profile(chart: BarChart, size: int, pitch: float, D: float, t: float) -> np.ndarray:
    """Exact diffused profile of the ideal chart (continuous Gaussian acting on the bright segments)."""
    if D < 0 or t < 0:
        raise ValueError("D and t must be >= 0")
    x = np.arange(size, dtype=float)
    segs = chart.bright_edges(size, pitch)
    if D * t == 0:
        return chart.profile_mask(size, pitch)
    width = math.sqrt(4.0 * D * t) / pitch
    out = np.zeros(size)
    for lo, hi in segs:
        out += 0.5 * (erf((hi - x) / width) - erf((lo - x) / width))
    return out


def predicted_contrast(chart: BarChart, D: float, t: float, C0: float = 1.0, size: int = 4096,
                       pitch: float | None = None, columns: int = 1) -> float:
    """Model contrast of the ideal chart after diffusing for ``t``, times ``C0``.

    Finite charts use the closed-form erf profile sampled with the same
    registration as :func:`contrast`; periodic charts use the Fourier series.
    """
    if chart.periodic:
        return C0 * periodic_contrast(chart.a, D, t)
    pitch = chart.a / 25 if pitch is None else pitch
    prof = analytic_profile(chart, size, pitch, D, t)
    return C0 * contrast_from_profile(prof, chart, pitch, columns)


def periodic_contrast(a: float, D: float, t: float, tol: float = 1e-12) -> float:
    """Contrast of an infinite square grating of half-period ``a`` after diffusion.

    The grating's odd harmonics k_m = (2m+1) pi / a decay as exp(-D k_m^2 t):
    C = (4/pi) sum_m (-1)^m / (2m+1) exp(-D k_m^2 t).
    """
    if D < 0 or t < 0:
        raise ValueError("D and t must be >= 0")
    if D * t == 0:
        return 1.0
    total, m = 0.0, 0
    while True:
        k = (2 * m + 1) * math.pi / a
        term = (-1) ** m / (2 * m + 1) * math.exp(-D * k * k * t)
        total += term
        if abs(term) < tol:
            break
        m += 1
    return 4.0 / math.pi * total


# --------------------------------------------------------------------------
# curves and tables

@dataclass
class ContrastCurve:
    a: float
    C0: float
    t_storage: np.ndarray
    C: np.ndarray
    C_pred: np.ndarray | None = None
    label: str = ""

    def rms_residual(self) -> float:
        if self.C_pred is None:
            raise ValueError("no model values attached")
        return float(np.sqrt(np.mean((self.C - self.C_pred) ** 2)))


def rms(a, b) -> float:
    a, b = np.asarray(a, float), np.asarray(b, float)
    return float(np.sqrt(np.mean((a - b) ** 2)))


def mtf(charts: Sequence[BarChart], D: float, t_list: Sequence[float], pitch: float,
        shape: tuple[int, int] = (64, 1024), C0: float = 1.0, method: str = "spectral") -> list[tuple[float, float, float, float]]:
    """Rows ``(spatial frequency, t, C, C_model)`` for every chart and time.

    ``C`` comes from diffusing the rendered chart numerically; ``C_model``
    from the closed-form profile.
    """
    if len(charts) < 2 or len(t_list) < 1:
        raise ValueError("need >= 2 spatial frequencies and >= 1 time")
    rows = []
    for chart in charts:
        base = make_barchart(chart, pitch, shape)
        for t in t_list:
            img = propagate(base, D, t, method=method)
            c = C0 * contrast(img, chart)
            c_model = predicted_contrast(chart, D, t, C0, size=shape[1], pitch=pitch)
            rows.append((chart.spatial_frequency, t, c, c_model))
    return rows


@dataclass
class SimilaritySeries:
    frame_index: np.ndarray
    t: np.ndarray
    S: dict[str, np.ndarray]
    names: tuple[str, str]

    @property
    def D(self) -> np.ndarray:
        a, b = self.names
        return np.abs(self.S[a] - self.S[b])

    def classify(self) -> list[str]:
        a, b = self.names
        return [a if sa >= sb else b for sa, sb in zip(self.S[a], self.S[b])]

    def crossings(self) -> list[int]:
        """Positions ``i`` where the leading reference changes between frames ``i`` and ``i+1``."""
        a, b = self.names
        sign = np.sign(self.S[a] - self.S[b])
        return [i for i in range(len(sign) - 1) if sign[i] != sign[i + 1] and sign[i + 1] != 0]

    def overlap_frames(self, threshold: float = 0.15) -> list[int]:
        return [int(i) for i in np.nonzero(self.D < threshold)[0]]

    def rows(self):
        a, b = self.names
        for i in range(len(self.t)):
            yield (int(self.frame_index[i]), self.t[i], self.S[a][i], self.S[b][i], self.D[i])


def similarity_decay(frames: FrameSet, refs: Mapping[str, ImageField], names: tuple[str, str] | None = None) -> SimilaritySeries:
    """Similarity of every frame against each reference, plus their difference."""
    names = tuple(names or list(refs)[:2])
    if len(names) != 2:
        raise ValueError("need exactly two references")
    S = {n: np.array([similarity(f.image, refs[n], n, i).S for i, f in enumerate(frames)]) for n in names}
    idx = np.arange(1, len(frames) + 1)
    return SimilaritySeries(idx, frames.t_mids, S, names)
