import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gemsim.core import ImageField
from gemsim.diffusion import SpectralPropagator
from gemsim.imaging import (
    BarChart,
    LetterMask,
    RetrievedField,
    SampledImages,
    gate_frames,
    make_barchart,
    make_letter,
    window_weights,
)
from gemsim.metrics import contrast

PITCH = 15e-6


def test_chart_layout():
    chart = BarChart(375e-6)
    img = make_barchart(chart, PITCH, (200, 256))
    prof = img.values[100]
    a = chart.a_px(PITCH)
    assert a == 25
    # 3 dark bars inside 4 bright lines
    assert prof.sum() == 4 * a
    c0, c1 = chart.sample_positions(256, PITCH)
    assert prof[int(c0)] == 0 and prof[int(c1)] == 1
    assert img.values.sum(axis=1).max() == 4 * a
    assert chart.spatial_frequency == pytest.approx(1 / 750e-6)


def test_horizontal_is_transpose():
    v = make_barchart(BarChart(240e-6), PITCH, (128, 160))
    h = make_barchart(BarChart(240e-6, orientation="horizontal"), PITCH, (160, 128))
    assert np.array_equal(v.values, h.values.T)


def test_binary_chart_contrast_is_one():
    for a in (60e-6, 240e-6, 375e-6):
        for cols in (1, 3):
            chart = BarChart(a)
            assert contrast(make_barchart(chart, PITCH, (128, 256)), chart, cols) == pytest.approx(1.0)


def test_chart_rules():
    with pytest.raises(ValueError, match="4 pitch"):
        BarChart(50e-6).a_px(PITCH)
    with pytest.raises(ValueError):
        BarChart(375e-6, n_lines=2)
    with pytest.raises(ValueError, match="fit"):
        make_barchart(BarChart(375e-6), PITCH, (64, 64))


def test_letters():
    n = make_letter("N", LetterMask("N", 2.4e-3), PITCH)
    t = make_letter("T", 2.4e-3, PITCH)
    assert set(np.unique(n.values)) == {0.0, 1.0}
    # T is left-right symmetric, N is point symmetric
    assert np.array_equal(t.values[:, 1:], t.values[:, 1:][:, ::-1])
    inner = n.values[1:, 1:]
    # up to rounding of pixels that sit exactly on the diagonal edge
    assert np.sum(inner != inner[::-1, ::-1]) <= 4
    with pytest.raises(ValueError, match="unsupported"):
        make_letter("Q", 2.4e-3, PITCH)
    with pytest.raises(ValueError, match="3 pixels"):
        make_letter("T", 0.2e-3, PITCH)


@settings(max_examples=50, deadline=None)
@given(st.floats(0, 1), st.floats(0, 1), st.floats(-2, 2), st.floats(-2, 2))
def test_window_weights_exact_for_linear(u, v, p, q):
    t = np.linspace(0.0, 1.0, 11)
    a, b = sorted((u, v))
    w = window_weights(t, a, b)
    f = p * t + q
    assert np.dot(w, f) == pytest.approx(p * (b * b - a * a) / 2 + q * (b - a), abs=1e-12)


def test_window_outside_span():
    with pytest.raises(ValueError, match="outside"):
        window_weights(np.linspace(0, 1, 5), 0.5, 1.5)


def test_frames_add_up():
    t = np.linspace(0, 1, 101)
    imgs = [ImageField(np.full((2, 2), ti**2), PITCH) for ti in t]
    src = SampledImages(t, imgs)
    fs = gate_frames(src, 0.25, 0.0, 4)
    total = sum(f.image.values for f in fs)
    whole = gate_frames(src, 1.0, 0.0, 1)[0].image.values
    assert np.allclose(total, whole, atol=1e-14)
    assert whole[0, 0] == pytest.approx(1 / 3, abs=1e-4)


def test_threads_give_identical_frames():
    rng = np.random.default_rng(1)
    img = ImageField(rng.random((32, 32)), PITCH)
    t = np.linspace(0, 2e-6, 401)
    field = RetrievedField(t).add(np.sin(t * 3e6) ** 2, SpectralPropagator(img, 1.05e-2, 2e-6), t)
    a = gate_frames(field, 1e-7, 1e-7, 12)
    b = gate_frames(field, 1e-7, 1e-7, 12, threads=4)
    assert all(np.array_equal(x.image.values, y.image.values) for x, y in zip(a, b))
