"""Image and table I/O.

Images are written as 16-bit binary PGM (P5, big-endian) plus a sidecar
``<name>.pgm.meta`` text file::

    # gemsim image metadata
    pitch_m = 1.5e-05
    scale = 3.0517578125e-05
    units = arbitrary

Physical intensity is ``raw * scale``. ``scale`` is always a power of two,
so a file read back and written again is byte-identical.
"""

from __future__ import annotations

import csv
import math
import re
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .image import ImageField

_PGM_HEADER = re.compile(
    rb"^P5\s(?:\s*#.*[\r\n])*\s*(\d+)\s(?:\s*#.*[\r\n])*\s*(\d+)\s(?:\s*#.*[\r\n])*\s*(\d+)\s"
)
MAXVAL = 65535


def _power_of_two_scale(vmax: float) -> float:
    if vmax <= 0:
        return 1.0
    # smallest power of two with vmax / scale <= MAXVAL
    _, exp = math.frexp(vmax / MAXVAL)
    scale = math.ldexp(1.0, exp)
    while vmax / scale > MAXVAL:
        scale *= 2.0
    while vmax / (scale / 2.0) <= MAXVAL:
        scale /= 2.0
    return scale


def quantize(img: ImageField) -> tuple[np.ndarray, float]:
    v = img.values
    vmax = float(v.max())
    if v.min() < -1e-9 * max(vmax, 0.0):
        raise ValueError("stored images must be non-negative")
    scale = _power_of_two_scale(vmax)
    raw = np.rint(np.clip(v, 0.0, None) / scale)
    return np.clip(raw, 0, MAXVAL).astype(np.uint16), scale


def write_pgm(path: str | Path, img: ImageField, units: str = "arbitrary") -> Path:
    path = Path(path)
    raw, scale = quantize(img)
    h, w = raw.shape
    with open(path, "wb") as f:
        f.write(f"P5\n{w} {h}\n{MAXVAL}\n".encode("ascii"))
        f.write(raw.astype(">u2").tobytes())
    write_metadata(meta_path(path), {"pitch_m": repr(img.pitch), "scale": repr(scale), "units": units})
    return path


def read_pgm_raw(path: str | Path) -> np.ndarray:
    buf = Path(path).read_bytes()
    m = _PGM_HEADER.match(buf)
    if m is None:
        raise ValueError(f"not a binary PGM file: {path}")
    w, h, maxval = (int(g) for g in m.groups())
    dtype = "u1" if maxval < 256 else ">u2"
    data = np.frombuffer(buf, dtype=dtype, count=w * h, offset=m.end())
    return data.reshape(h, w).astype(np.uint16)


def read_pgm(path: str | Path) -> ImageField:
    path = Path(path)
    meta = read_metadata(meta_path(path))
    raw = read_pgm_raw(path)
    return ImageField(raw * float(meta["scale"]), float(meta["pitch_m"]))


def meta_path(path: str | Path) -> Path:
    path = Path(path)
    return path.with_name(path.name + ".meta")


def write_metadata(path: str | Path, items: dict[str, str]) -> None:
    lines = ["# gemsim image metadata"] + [f"{k} = {v}" for k, v in items.items()]
    Path(path).write_text("\n".join(lines) + "\n")


def read_metadata(path: str | Path) -> dict[str, str]:
    out = {}
    for line in Path(path).read_text().splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ValueError(f"malformed metadata line: {line!r}")
        out[key.strip()] = value.strip()
    for key in ("pitch_m", "scale"):
        if key not in out:
            raise ValueError(f"metadata file {path} is missing {key!r}")
    return out


def fmt(x) -> str:
    """Fixed text form used for every float in CSV output."""
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return str(int(x))
    if isinstance(x, str):
        return x
    return format(float(x), ".12g")


def write_csv(path: str | Path, header: Sequence[str], rows: Iterable[Sequence]) -> Path:
    path = Path(path)
    with open(path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in row])
    return path


def read_csv(path: str | Path) -> tuple[list[str], list[dict[str, str]]]:
    with open(path, newline="") as f:
        reader = csv.DictReader(f)
        rows = list(reader)
        return list(reader.fieldnames or []), rows
