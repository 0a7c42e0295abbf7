"""Physical configuration types and config-file ingestion.

The config file is INI-style (``[section]`` + ``key = value``). Every key
carries its unit in its name; :data:`SCHEMA` lists every accepted key with
its type, unit and allowed range, and is the single source of truth for
loading, ``--set`` overrides and ``gemsim validate``.
"""

from __future__ import annotations

import configparser
import math
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path
from typing import Any, Callable, Iterable

import numpy as np

from .image import ImageField
from .units import to_si, zeeman_slope


class ConfigError(ValueError):
    """Invalid configuration; ``problems`` lists ``(key, message)`` pairs."""

    def __init__(self, problems: list[tuple[str, str]]):
        self.problems = problems
        super().__init__("; ".join(f"{k}: {m}" for k, m in problems))


@dataclass(frozen=True)
class MemoryConfig:
    """All physical parameters of the memory, SI units.

    ``optical_depth`` is the effective two-photon (Raman) optical depth of
    the gradient-broadened line: in-band light is transmitted with
    intensity ``exp(-optical_depth)`` in a single pass.
    """

    cell_length: float = 0.05
    gradient_write: float = 0.0
    gradient_read: float = 0.0
    flip_time: float = 0.0
    flip_duration: float = 1e-6
    step_flip: bool = False
    optical_depth: float = -math.log(1 - 0.30)
    diffusion_D: float = 1.05e-2
    decoherence_rate: float = 0.0
    longitudinal_lifetime: float = math.inf
    n_z: int = 512
    dt: float | None = None

    def __post_init__(self):
        problems = []
        if not self.cell_length > 0:
            problems.append(("cell_length", "must be > 0"))
        if not self.diffusion_D >= 0:
            problems.append(("diffusion_D", "must be >= 0"))
        if not self.optical_depth >= 0:
            problems.append(("optical_depth", "must be >= 0"))
        if not self.decoherence_rate >= 0:
            problems.append(("decoherence_rate", "must be >= 0"))
        if not self.flip_duration >= 0:
            problems.append(("flip_duration", "must be >= 0"))
        if not self.longitudinal_lifetime > 0:
            problems.append(("longitudinal_lifetime", "must be > 0"))
        if self.gradient_write == 0 or self.gradient_read == 0:
            problems.append(("gradient", "write and read gradients must be nonzero"))
        elif np.sign(self.gradient_write) == np.sign(self.gradient_read):
            problems.append(("gradient", "write and read gradients must have opposite signs"))
        if self.n_z < 8:
            problems.append(("n_z", "need at least 8 z-cells"))
        if self.dt is not None and not self.dt > 0:
            problems.append(("dt", "must be > 0"))
        if problems:
            raise ConfigError(problems)

    @classmethod
    def from_lab(
        cls,
        cell_length_cm: float = 5.0,
        field_gradient_uT_per_cm: float = 15.0,
        g_factor: float = 2.0,
        expansion_ratio: float = 1.0,
        absorption: float = 0.30,
        diffusion_cm2_per_s: float = 105.0,
        **kw,
    ) -> "MemoryConfig":
        if not expansion_ratio > 0:
            raise ConfigError([("expansion_ratio", "must be > 0")])
        if not 0 <= absorption < 1:
            raise ConfigError([("absorption", "must be in [0, 1)")])
        slope = zeeman_slope(to_si(field_gradient_uT_per_cm, "uT/cm"), g_factor)
        return cls(
            cell_length=to_si(cell_length_cm, "cm"),
            gradient_write=slope,
            gradient_read=-slope / expansion_ratio,
            optical_depth=-math.log1p(-absorption),
            diffusion_D=to_si(diffusion_cm2_per_s, "cm^2/s"),
            **kw,
        )

    @property
    def expansion_ratio(self) -> float:
        return abs(self.gradient_write) / abs(self.gradient_read)

    @property
    def bandwidth(self) -> float:
        """Write-in spectral width of the broadened line, rad/s."""
        return abs(self.gradient_write) * self.cell_length

    @property
    def coupling(self) -> float:
        """Light-atom coupling g with dE/dz = i g s and ds/dt = i g E + ...

        For a linear gradient the single-pass intensity transmission is
        exp(-2 pi g^2 / |gradient|), hence g^2 = d |gradient| / (2 pi).
        """
        return math.sqrt(self.optical_depth * abs(self.gradient_write) / (2 * math.pi))

    @property
    def max_stable_dt(self) -> float:
        return 0.1 / (max(abs(self.gradient_write), abs(self.gradient_read)) * self.cell_length)

    def with_expansion(self, r: float) -> "MemoryConfig":
        if not r > 0:
            raise ValueError(f"expansion ratio must be > 0, got {r}")
        return replace(self, gradient_read=-np.sign(self.gradient_write) * abs(self.gradient_write) / r)

    def replace(self, **kw) -> "MemoryConfig":
        return replace(self, **kw)


@dataclass(frozen=True)
class Pulse:
    """Gaussian input pulse; ``width_1e2`` is the intensity full width at 1/e^2."""

    peak_time: float
    width_1e2: float
    amplitude: float = 1.0
    image: ImageField | None = None
    label: str = ""

    def __post_init__(self):
        if not self.width_1e2 > 0:
            raise ValueError("pulse width must be > 0")

    def field(self, t):
        # intensity exp(-8 t^2 / W^2) -> amplitude exp(-4 t^2 / W^2)
        return self.amplitude * np.exp(-4.0 * (np.asarray(t) - self.peak_time) ** 2 / self.width_1e2**2)


@dataclass(frozen=True)
class PulseSequence:
    pulses: tuple[Pulse, ...] = field(default_factory=tuple)

    def __post_init__(self):
        ps = tuple(self.pulses)
        if any(b.peak_time < a.peak_time for a, b in zip(ps, ps[1:])):
            raise ValueError("pulses must be sorted by peak_time")
        object.__setattr__(self, "pulses", ps)

    def __len__(self):
        return len(self.pulses)

    def __iter__(self):
        return iter(self.pulses)

    def __getitem__(self, i):
        return self.pulses[i]

    def field(self, t):
        t = np.asarray(t, dtype=float)
        out = np.zeros(t.shape)
        for p in self.pulses:
            out = out + p.field(t)
        return out

    def check_inputs(self, flip_time: float) -> None:
        for p in self.pulses:
            if not p.peak_time < flip_time:
                raise ValueError(f"input pulse at {p.peak_time} s does not precede the flip at {flip_time} s")


# --------------------------------------------------------------------------
# config files

def _float_list(text: str) -> tuple[float, ...]:
    return tuple(float(v) for v in text.replace(";", ",").split(",") if v.strip())


def _bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


@dataclass(frozen=True)
class Key:
    parse: Callable[[str], Any]
    check: Callable[[Any], bool] = lambda v: True
    rule: str = ""
    doc: str = ""


def _pos(v):
    return v > 0


def _nonneg(v):
    return v >= 0


def _all_pos(vs):
    return len(vs) > 0 and all(v > 0 for v in vs)


SCHEMA: dict[str, dict[str, Key]] = {
    "memory": {
        "cell_length_cm": Key(float, _pos, "> 0", "memory cell length"),
        "field_gradient_uT_per_cm": Key(float, _pos, "> 0", "write-in magnetic field gradient"),
        "g_factor": Key(float, _pos, "> 0", "effective Zeeman g-factor of the Raman line"),
        "expansion_ratio": Key(float, _pos, "> 0", "|write gradient| / |read gradient|"),
        "flip_time_us": Key(float, lambda v: True, "", "center of the gradient flip (defines t = 0)"),
        "flip_duration_us": Key(float, _nonneg, ">= 0", "length of the linear gradient ramp"),
        "step_flip": Key(_bool, doc="instantaneous flip instead of a ramp"),
        "absorption": Key(float, lambda v: 0 <= v < 1, "in [0, 1)", "target single-pass absorption"),
        "optical_depth": Key(float, _nonneg, ">= 0", "explicit Raman optical depth (skips calibration)"),
        "diffusion_cm2_per_s": Key(float, _nonneg, ">= 0", "transverse diffusion coefficient"),
        "decoherence_rate_per_s": Key(float, _nonneg, ">= 0", "ground-state decoherence rate"),
        "longitudinal_lifetime_us": Key(float, _pos, "> 0", "loss time constant from longitudinal diffusion"),
    },
    "solver": {
        "n_z": Key(int, lambda v: v >= 8, ">= 8", "number of z-cells"),
        "dt_ns": Key(float, _pos, "> 0", "time step"),
        "calibrate": Key(_bool, doc="tune optical depth so simulated absorption hits `absorption`"),
    },
    "imaging": {
        "magnification": Key(float, _pos, "> 0", "mask-to-cell imaging magnification"),
        "pitch_um": Key(float, _pos, "> 0", "pixel pitch in the cell"),
        "grid_px": Key(int, lambda v: v >= 16, ">= 16", "image width and height in pixels"),
        "frame_width_ns": Key(float, _pos, "> 0", "camera gate width"),
        "first_frame_ns": Key(float, _nonneg, ">= 0", "start of the first frame after the flip"),
        "contrast_columns": Key(int, lambda v: v in (1, 3), "1 or 3", "columns averaged per contrast sample"),
    },
    "movie": {
        "pulse_width_us": Key(float, _pos, "> 0", "1/e^2 intensity full width of each pulse"),
        "first_peak_us": Key(float, lambda v: True, "", "peak time of the first (N) pulse"),
        "spacing_us": Key(float, _pos, "> 0", "delay between the two pulses"),
        "n_frames": Key(int, _pos, "> 0", "number of retrieval frames"),
        "letter_height_mm": Key(float, _pos, "> 0", "letter height in the cell"),
        "include_direct": Key(_bool, doc="add the light transmitted during write-in to the frames"),
    },
    "delay": {
        "peaks_us": Key(_float_list, lambda vs: len(vs) > 0 and all(v < 0 for v in vs), "all < 0",
                        "input pulse peak times"),
        "pulse_width_us": Key(float, _pos, "> 0", "1/e^2 intensity full width"),
        "line_width_um": Key(float, _pos, "> 0", "bar width a in the cell"),
        "n_frames": Key(int, _pos, "> 0", "number of retrieval frames"),
        "pitch_um": Key(float, _pos, "> 0", "pixel pitch for the chart images"),
    },
    "mtf": {
        "line_widths_um": Key(_float_list, lambda vs: len(vs) >= 2 and all(v > 0 for v in vs), ">= 2 values > 0",
                              "bar widths a in the cell"),
        "peak_us": Key(float, lambda v: v < 0, "< 0", "input pulse peak time"),
        "pulse_width_us": Key(float, _pos, "> 0", "1/e^2 intensity full width"),
        "n_frames": Key(int, _pos, "> 0", "number of retrieval frames"),
        "times_us": Key(_float_list, lambda vs: len(vs) >= 1 and all(v >= 0 for v in vs), ">= 1 values >= 0",
                        "storage times for the MTF table"),
        "pitch_um": Key(float, _pos, "> 0", "pixel pitch for the chart images"),
    },
}

OPTIONAL = {("memory", "optical_depth")}


def default_config_text() -> str:
    return resources.files("gemsim").joinpath("data/default.ini").read_text()


@dataclass
class Settings:
    """Parsed config file: ``values[section][key]`` holds typed values."""

    values: dict[str, dict[str, Any]]
    source: str = "<default>"

    def __getitem__(self, section: str) -> dict[str, Any]:
        return self.values[section]

    def get(self, dotted: str, default=None):
        section, _, key = dotted.partition(".")
        return self.values.get(section, {}).get(key, default)

    def to_ini(self) -> str:
        lines = []
        for section, keys in self.values.items():
            lines.append(f"[{section}]")
            for key, v in keys.items():
                if v is None:
                    text = ""
                elif isinstance(v, tuple):
                    text = ", ".join(repr(x) for x in v)
                elif isinstance(v, bool):
                    text = "true" if v else "false"
                else:
                    text = repr(v)
                lines.append(f"{key} = {text}")
            lines.append("")
        return "\n".join(lines)

    # builders --------------------------------------------------------------

    def memory(self) -> MemoryConfig:
        m, s = self["memory"], self["solver"]
        cfg = MemoryConfig.from_lab(
            cell_length_cm=m["cell_length_cm"],
            field_gradient_uT_per_cm=m["field_gradient_uT_per_cm"],
            g_factor=m["g_factor"],
            expansion_ratio=m["expansion_ratio"],
            absorption=m["absorption"],
            diffusion_cm2_per_s=m["diffusion_cm2_per_s"],
            flip_time=to_si(m["flip_time_us"], "us"),
            flip_duration=to_si(m["flip_duration_us"], "us"),
            step_flip=m["step_flip"],
            decoherence_rate=m["decoherence_rate_per_s"],
            longitudinal_lifetime=to_si(m["longitudinal_lifetime_us"], "us"),
            n_z=s["n_z"],
            dt=to_si(s["dt_ns"], "ns"),
        )
        if m.get("optical_depth") is not None:
            cfg = cfg.replace(optical_depth=m["optical_depth"])
        return cfg


def parse_config(text: str, overrides: Iterable[str] = (), source: str = "<string>") -> Settings:
    """Parse config text on top of the shipped defaults, then apply ``key=value`` overrides.

    Unknown sections/keys, unparsable values and out-of-range values are
    all collected and raised together as one :class:`ConfigError`.
    """
    problems: list[tuple[str, str]] = []
    raw: dict[str, dict[str, str]] = {}
    for label, body in (("<default>", default_config_text()), (source, text)):
        cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"), interpolation=None)
        cp.optionxform = str
        try:
            cp.read_string(body, source=label)
        except configparser.Error as exc:
            raise ConfigError([(label, str(exc).splitlines()[0])]) from None
        for section in cp.sections():
            raw.setdefault(section, {}).update(cp[section])
    for item in overrides:
        dotted, sep, value = item.partition("=")
        section, dot, key = dotted.strip().partition(".")
        if not sep or not dot:
            problems.append((item, "override must look like section.key=value"))
            continue
        raw.setdefault(section, {})[key] = value.strip()

    values: dict[str, dict[str, Any]] = {}
    for section, keys in raw.items():
        if section not in SCHEMA:
            problems.append((section, "unknown section"))
            continue
        for key, text in keys.items():
            name = f"{section}.{key}"
            spec = SCHEMA[section].get(key)
            if spec is None:
                problems.append((name, "unknown key"))
                continue
            if text == "" and (section, key) in OPTIONAL:
                values.setdefault(section, {})[key] = None
                continue
            try:
                v = spec.parse(text)
            except ValueError:
                problems.append((name, f"cannot parse {text!r}"))
                continue
            if not spec.check(v):
                problems.append((name, f"{v!r} violates {spec.rule}"))
                continue
            values.setdefault(section, {})[key] = v
    for section, keys in SCHEMA.items():
        for key in keys:
            if key not in values.get(section, {}) and (section, key) not in OPTIONAL:
                if not any(p[0] == f"{section}.{key}" for p in problems):
                    problems.append((f"{section}.{key}", "missing"))
    if problems:
        raise ConfigError(problems)
    # keep schema order for a stable manifest echo
    ordered = {s: {k: values[s].get(k) for k in SCHEMA[s] if k in values[s]} for s in SCHEMA}
    return Settings(ordered, source)


def load_config(path: str | Path | None = None, overrides: Iterable[str] = ()) -> Settings:
    if path is None:
        return parse_config("", overrides, "<default>")
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError([(str(path), f"unreadable: {exc.strerror}")]) from None
    return parse_config(text, overrides, str(path))
