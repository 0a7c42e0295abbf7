from .config import ConfigError, MemoryConfig, Pulse, PulseSequence, Settings, load_config, parse_config
from .image import Frame, FrameSet, ImageField, resample
from .io import read_csv, read_pgm, write_csv, write_pgm
from .units import UnitError, from_si, to_si, unit_convert, zeeman_slope

__all__ = [
    "ConfigError", "Frame", "FrameSet", "ImageField", "MemoryConfig", "Pulse", "PulseSequence",
    "Settings", "UnitError", "from_si", "load_config", "parse_config", "read_csv", "read_pgm",
    "resample", "to_si", "unit_convert", "write_csv", "write_pgm", "zeeman_slope",
]
