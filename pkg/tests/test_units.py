import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from gemsim.core import UnitError, from_si, to_si, unit_convert, zeeman_slope


def test_lab_units():
    assert to_si(105, "cm^2/s") == pytest.approx(1.05e-2)
    assert to_si(1.1, "us") == pytest.approx(1.1e-6)
    assert to_si(15, "uT/cm") == pytest.approx(1.5e-3)
    assert unit_convert(375, "um", "mm") == pytest.approx(0.375)
    assert to_si(1, "MHz") == pytest.approx(2 * math.pi * 1e6)


def test_micro_sign_alias():
    assert to_si(2, "µm") == to_si(2, "um")


def test_incompatible_units():
    with pytest.raises(UnitError):
        unit_convert(1, "m", "s")
    with pytest.raises(UnitError):
        to_si(1, "furlong")


@given(st.floats(min_value=-1e6, max_value=1e6, allow_nan=False))
def test_round_trip(x):
    for u in ("um", "cm^2/s", "us", "uT/cm", "lp/mm"):
        assert from_si(to_si(x, u), u) == pytest.approx(x, rel=1e-12, abs=1e-300)


def test_zeeman_slope_scales_linearly():
    a = zeeman_slope(1.5e-3, 2.0)
    assert zeeman_slope(3e-3, 2.0) == pytest.approx(2 * a)
    assert zeeman_slope(1.5e-3, 1.0) == pytest.approx(a / 2)
    # 15 uT/cm with g = 2 over 5 cm spans about 2.1 MHz
    assert a * 0.05 / (2 * math.pi) == pytest.approx(2.0989e6, rel=1e-3)
