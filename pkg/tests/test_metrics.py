import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from gemsim.core import Frame, FrameSet, ImageField
from gemsim.diffusion import fd_oracle, propagate
from gemsim.imaging import BarChart, make_barchart
from gemsim.metrics import (
    ContrastCurve,
    analytic_profile,
    contrast,
    distinguishability,
    mtf,
    periodic_contrast,
    predicted_contrast,
    similarity,
    similarity_decay,
)

D = 1.05e-2
PITCH = 15e-6
pos_images = arrays(np.float64, (5, 5), elements=st.floats(0, 10))


@settings(max_examples=60, deadline=None)
@given(pos_images, pos_images, st.floats(1e-3, 1e3))
def test_similarity_properties(a, b, alpha):
    if not b.any() or not a.any():
        return
    A, B = ImageField(a, PITCH), ImageField(b, PITCH)
    s = similarity(A, B).S
    assert 0.0 <= s <= 1.0
    assert similarity(A.scaled(alpha), B).S == pytest.approx(s, rel=1e-12, abs=1e-15)
    assert similarity(A, A).S == pytest.approx(1.0)


def test_similarity_edge_cases():
    ref = ImageField(np.eye(4), PITCH)
    assert similarity(ImageField(np.zeros((4, 4)), PITCH), ref).S == 0.0
    with pytest.raises(ValueError, match="no power"):
        similarity(ref, ImageField(np.zeros((4, 4)), PITCH))
    with pytest.raises(ValueError, match="shape"):
        similarity(ref, ImageField(np.eye(3), PITCH))
    assert distinguishability(0.7, 0.4) == pytest.approx(0.3)


def test_contrast_goes_negative_for_finite_chart():
    chart = BarChart(375e-6)
    assert predicted_contrast(chart, D, 20e-6, pitch=PITCH, size=512) < 0


@settings(max_examples=30, deadline=None)
@given(st.floats(0, 2e-5))
def test_contrast_bounded(t):
    chart = BarChart(240e-6)
    c = predicted_contrast(chart, D, t, pitch=PITCH, size=256)
    assert -1.0 <= c <= 1.0


def test_numeric_matches_closed_form_profile():
    chart = BarChart(285e-6)
    pitch = 5e-6
    img = make_barchart(chart, pitch, (400, 600))
    for t in (0.5e-6, 2e-6):
        c = contrast(propagate(img, D, t), chart)
        assert c == pytest.approx(predicted_contrast(chart, D, t, size=600, pitch=pitch), abs=1e-3)


def test_periodic_three_way_agreement():
    # odd pixel count per bar puts both sample lines on pixel centers
    a = 25 * PITCH
    chart = BarChart(a, periodic=True)
    img = make_barchart(chart, PITCH, (32, 400))
    for t in (0.02 * a * a / D, 0.05 * a * a / D, 0.2 * a * a / D):
        c_series = predicted_contrast(chart, D, t)
        c_prop = contrast(propagate(img, D, t), chart)
        c_fd = contrast(fd_oracle(img, D, t), chart)
        assert abs(c_series - c_prop) < 1e-3
        assert abs(c_series - c_fd) < 1e-3
        assert abs(c_prop - c_fd) < 1e-3


def test_periodic_series_limits():
    assert periodic_contrast(1e-4, D, 0.0) == 1.0
    # long times: only the fundamental survives
    a, t = 1e-4, 2e-6
    k = np.pi / a
    assert periodic_contrast(a, D, t) == pytest.approx(4 / np.pi * np.exp(-D * k * k * t), rel=1e-6)


def test_analytic_profile_conserves_light():
    chart = BarChart(300e-6)
    p0 = analytic_profile(chart, 800, PITCH, D, 0.0)
    p1 = analytic_profile(chart, 800, PITCH, D, 3e-6)
    assert p1.sum() == pytest.approx(p0.sum(), rel=1e-9)


def test_mtf_monotone():
    charts = [BarChart(a) for a in (375e-6, 330e-6, 285e-6, 240e-6)]
    rows = mtf(charts, D, [0.5e-6, 1e-6, 2e-6], PITCH, shape=(140, 300))
    for t in {r[1] for r in rows}:
        cs = [r[2] for r in sorted((r for r in rows if r[1] == t), key=lambda r: r[0])]
        assert all(x >= y - 1e-12 for x, y in zip(cs, cs[1:]) if y >= 0)
    for r in rows:
        assert abs(r[2] - r[3]) < 2e-3


def test_contrast_curve_rms():
    c = ContrastCurve(1e-4, 1.0, np.zeros(3), np.array([1.0, 0.5, 0.2]), np.array([1.0, 0.5, 0.23]))
    assert c.rms_residual() == pytest.approx(0.03 / np.sqrt(3))
    with pytest.raises(ValueError):
        ContrastCurve(1e-4, 1.0, np.zeros(1), np.zeros(1)).rms_residual()


def test_similarity_series_crossing():
    A = ImageField(np.array([[1.0, 0.0]]), PITCH)
    B = ImageField(np.array([[0.0, 1.0]]), PITCH)
    mix = [0.0, 0.2, 0.45, 0.8, 1.0]
    frames = FrameSet(tuple(Frame(i * 1e-7, 1e-7, ImageField(np.array([[1 - m, m]]), PITCH))
                            for i, m in enumerate(mix)))
    s = similarity_decay(frames, {"T": A, "N": B}, ("N", "T"))
    assert s.classify() == ["T", "T", "T", "N", "N"]
    assert s.crossings() == [2]
    assert s.overlap_frames(0.15) == [2]
    assert list(s.frame_index) == [1, 2, 3, 4, 5]
