"""Unit conversion at the edges of the package.

Everything inside gemsim is SI. Config files and the CLI accept the
lab units the experiment is described in (cm, µm, µs, cm²/s, µT/cm, ...)
and go through :func:`unit_convert` exactly once.
"""

from __future__ import annotations

import math

# name -> (dimension, factor to SI)
_UNITS: dict[str, tuple[str, float]] = {
    # length
    "m": ("length", 1.0),
    "cm": ("length", 1e-2),
    "mm": ("length", 1e-3),
    "um": ("length", 1e-6),
    "nm": ("length", 1e-9),
    # time
    "s": ("time", 1.0),
    "ms": ("time", 1e-3),
    "us": ("time", 1e-6),
    "ns": ("time", 1e-9),
    # diffusivity
    "m^2/s": ("area/time", 1.0),
    "cm^2/s": ("area/time", 1e-4),
    "mm^2/s": ("area/time", 1e-6),
    # rates and frequencies
    "1/s": ("rate", 1.0),
    "rad/s": ("rate", 1.0),
    "Hz": ("rate", 2.0 * math.pi),
    "kHz": ("rate", 2.0 * math.pi * 1e3),
    "MHz": ("rate", 2.0 * math.pi * 1e6),
    # magnetic field
    "T": ("field", 1.0),
    "mT": ("field", 1e-3),
    "uT": ("field", 1e-6),
    "G": ("field", 1e-4),
    # magnetic field gradient
    "T/m": ("field/length", 1.0),
    "uT/cm": ("field/length", 1e-6 / 1e-2),
    "G/cm": ("field/length", 1e-4 / 1e-2),
    # detuning slope
    "rad/s/m": ("rate/length", 1.0),
    "MHz/cm": ("rate/length", 2.0 * math.pi * 1e6 / 1e-2),
    # spatial frequency
    "1/m": ("1/length", 1.0),
    "lp/mm": ("1/length", 1e3),
    # dimensionless
    "1": ("dimensionless", 1.0),
    "%": ("dimensionless", 1e-2),
}

_ALIASES = {"µm": "um", "μm": "um", "µs": "us", "μs": "us", "µT/cm": "uT/cm", "μT/cm": "uT/cm",
            "cm2/s": "cm^2/s", "m2/s": "m^2/s", "mm2/s": "mm^2/s", "s^-1": "1/s", "": "1"}

# Bohr magneton over hbar, rad s^-1 T^-1 (CODATA 2018)
BOHR_RAD_PER_S_T = 2.0 * math.pi * 13.996244936e9


class UnitError(ValueError):
    """Unknown unit or dimensionally incompatible conversion."""


def _lookup(unit: str) -> tuple[str, float]:
    key = _ALIASES.get(unit, unit)
    try:
        return _UNITS[key]
    except KeyError:
        raise UnitError(f"unknown unit {unit!r}") from None


def dimension(unit: str) -> str:
    return _lookup(unit)[0]


def unit_convert(value: float, from_unit: str, to_unit: str) -> float:
    """Convert ``value`` between two dimensionally compatible units.

    >>> unit_convert(105, "cm^2/s", "m^2/s")
    0.0105
    """
    dim_a, fa = _lookup(from_unit)
    dim_b, fb = _lookup(to_unit)
    if dim_a != dim_b:
        raise UnitError(f"cannot convert {from_unit} ({dim_a}) to {to_unit} ({dim_b})")
    if fa == fb:
        return value
    return value * fa / fb


def to_si(value: float, unit: str) -> float:
    return value * _lookup(unit)[1]


def from_si(value: float, unit: str) -> float:
    return value / _lookup(unit)[1]


def zeeman_slope(field_gradient: float, g_factor: float) -> float:
    """Detuning slope in rad s^-1 m^-1 for a field gradient in T/m."""
    return g_factor * BOHR_RAD_PER_S_T * field_gradient
