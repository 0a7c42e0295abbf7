"""End-to-end runs: GEM write/read -> transverse diffusion -> gated frames -> metrics.

Each transverse pixel runs the same linear longitudinal memory, so the
retrieved light factorizes into the 1D output intensity of each pulse
times that pulse's transverse image, diffused for the storage time of the
instant it leaves the cell. Light that went straight through during
write-in is carried as a separate, undiffused component.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import gem1d
from .core.config import MemoryConfig, Pulse, PulseSequence, Settings
from .core.image import FrameSet, ImageField, resample
from .core.io import read_csv, write_csv, write_pgm
from .core.units import to_si
from .diffusion import SpectralPropagator
from .imaging import (
    BarChart,
    LetterMask,
    RetrievedField,
    gate_frames,
    make_barchart,
    make_letter,
    window_weights,
)
from .metrics import (
    ContrastCurve,
    analytic_profile,
    contrast,
    contrast_from_profile,
    mtf,
    predicted_contrast,
    rms,
    similarity,
    similarity_decay,
)

log = logging.getLogger(__name__)

SCENARIOS = ("two_image_movie", "delay_independence", "mtf_study")

# reference pulse used to calibrate the optical depth
CALIBRATION_PEAK = -1.1e-6


def memory_for(settings: Settings, width: float) -> MemoryConfig:
    mem = settings.memory()
    m = settings["memory"]
    if settings["solver"]["calibrate"] and m.get("optical_depth") is None and m["absorption"] > 0:
        probe = PulseSequence((Pulse(mem.flip_time + CALIBRATION_PEAK, width),))
        mem = gem1d.calibrate_optical_depth(mem, probe, m["absorption"])
        log.info("optical depth calibrated to %.6f", mem.optical_depth)
    return mem


def _mask_to_cell(img: ImageField, magnification: float) -> ImageField:
    return resample(img, magnification)


def _t_max(traces) -> float:
    tau = np.concatenate([np.nan_to_num(tr.storage_time, nan=0.0) for tr in traces])
    return float(tau.max()) if tau.size else 0.0


# --------------------------------------------------------------------------
# two-image movie

@dataclass
class MovieResult:
    frames: FrameSet
    series: object
    references: dict
    joint: gem1d.EchoTrace
    echo_peaks: np.ndarray
    input_peaks: np.ndarray
    memory: MemoryConfig
    summary: dict = field(default_factory=dict)


def run_two_image_movie(settings: Settings, threads: int = 1, pulses: tuple[str, ...] = ("N", "T")) -> MovieResult:
    """Store N then T one ``spacing`` apart, read both out and follow S_N and S_T frame by frame.

    ``pulses`` selects which of the two letters are actually sent (both by
    default); the similarity references are always both letters.
    """
    mv, im = settings["movie"], settings["imaging"]
    W = to_si(mv["pulse_width_us"], "us")
    mem = memory_for(settings, W)
    mag = im["magnification"]
    pitch = to_si(im["pitch_um"], "um")
    shape = (im["grid_px"], im["grid_px"])
    height = to_si(mv["letter_height_mm"], "mm")
    refs = {
        g: _mask_to_cell(make_letter(g, LetterMask(g, height / mag), pitch / mag, shape), mag)
        for g in ("N", "T")
    }
    t_first = mem.flip_time + to_si(mv["first_peak_us"], "us")
    peaks = {"N": t_first, "T": t_first + to_si(mv["spacing_us"], "us")}
    seq_all = PulseSequence(tuple(Pulse(peaks[g], W, label=g) for g in ("N", "T") if g in pulses))
    span = gem1d.default_span(mem, PulseSequence(tuple(Pulse(peaks[g], W) for g in ("N", "T"))))

    _, joint = gem1d.evolve(mem, seq_all, t_span=span, record_every=10**9)
    traces = {}
    for g in pulses:
        traces[g] = gem1d.split_direct_echo(mem, PulseSequence((Pulse(peaks[g], W, label=g),)), t_span=span)
    t_grid = joint.t_grid
    field_ = RetrievedField(t_grid)
    t_max = _t_max([e for _, e in traces.values()])
    for g, (direct, echo) in traces.items():
        prop = SpectralPropagator(refs[g], mem.diffusion_D, t_max)
        if mv["include_direct"]:
            field_.add(direct.intensity, prop)
        field_.add(echo.intensity * _longitudinal(echo.storage_time, mem), prop, echo.storage_time)

    frame_w = to_si(im["frame_width_ns"], "ns")
    t0 = mem.flip_time + to_si(im["first_frame_ns"], "ns")
    frames = gate_frames(field_, frame_w, t0, mv["n_frames"], threads)
    series = similarity_decay(frames, refs, names=("N", "T"))

    echo_peak_times = gem1d.echo_peaks(joint, n=len(pulses))
    summary = _movie_summary(series, refs, joint, echo_peak_times, seq_all, mem)
    return MovieResult(frames, series, refs, joint, echo_peak_times,
                       np.array([p.peak_time for p in seq_all]), mem, summary)


def _longitudinal(storage_time, mem: MemoryConfig):
    if math.isinf(mem.longitudinal_lifetime):
        return 1.0
    return np.exp(-np.nan_to_num(storage_time, nan=0.0) / mem.longitudinal_lifetime)


def _movie_summary(series, refs, joint, echo_peak_times, seq, mem) -> dict:
    S_N, S_T = series.S["N"], series.S["T"]
    cls = series.classify()
    cross = series.crossings()
    overlap = series.overlap_frames(0.15)
    out = {
        "similarity_T_vs_N_inputs": similarity(refs["T"], refs["N"]).S,
        "optical_depth": mem.optical_depth,
        "efficiency": joint.efficiency,
        "absorbed_fraction": joint.absorbed_fraction,
        "echo_peak_times_s": [float(t) for t in echo_peak_times],
        "input_peak_times_s": [float(p.peak_time) for p in seq],
        "first_frame_class": cls[0],
        "last_frame_class": cls[-1],
        "crossing_after_frames": [int(series.frame_index[i]) for i in cross],
        "overlap_frames": [int(series.frame_index[i]) for i in overlap],
        "S_T_first": float(S_T[0]),
        "S_N_first": float(S_N[0]),
        "S_N_last": float(S_N[-1]),
    }
    return out


def write_movie(result: MovieResult, out_dir: Path, images: bool = True) -> list[Path]:
    out_dir.mkdir(parents=True, exist_ok=True)
    written = [
        write_csv(out_dir / "similarity.csv", ["frame_index", "t", "S_N", "S_T", "D"], result.series.rows()),
        result.joint.to_csv(out_dir / "echo.csv"),
    ]
    if images:
        for g, img in result.references.items():
            written.append(write_pgm(out_dir / f"input_{g}.pgm", img))
        for i, fr in enumerate(result.frames, start=1):
            written.append(write_pgm(out_dir / f"frame_{i:02d}.pgm", fr.image))
    written.append(_write_json(out_dir / "summary.json", result.summary))
    return written


# --------------------------------------------------------------------------
# bar-chart studies

@dataclass
class ChartRun:
    chart: BarChart
    frames: FrameSet
    curve: ContrastCurve
    echo: gem1d.EchoTrace
    peak: float
    image: ImageField


def _chart_shape(chart: BarChart, pitch: float, margin: int = 8) -> tuple[int, int]:
    along = chart.width_px(pitch) + 2 * margin
    across = int(round(chart.bar_length / pitch)) + 2 * margin
    return (across, along) if chart.orientation == "vertical" else (along, across)


def run_chart(settings: Settings, mem: MemoryConfig, chart: BarChart, peak: float, width: float,
              n_frames: int, pitch: float, threads: int = 1) -> ChartRun:
    """Store one bar chart, read it out, and measure contrast frame by frame.

    Model values attached to the curve are the closed-form profile pushed
    through the same gate weights and echo intensity as the simulation,
    with ``D`` and ``C0`` fixed (no fitted parameters).
    """
    im = settings["imaging"]
    mag = im["magnification"]
    cols = im["contrast_columns"]
    shape = _chart_shape(chart, pitch)
    mask = make_barchart(BarChart(chart.a / mag, chart.n_lines, chart.orientation, chart.bar_length / mag),
                         pitch / mag, shape)
    img = _mask_to_cell(mask, mag)
    C0 = contrast(img, chart, cols)

    seq = PulseSequence((Pulse(peak, width),))
    _, echo = gem1d.split_direct_echo(mem, seq)
    field_ = RetrievedField(echo.t_grid)
    tau = np.nan_to_num(echo.storage_time, nan=0.0)
    intensity = echo.intensity * _longitudinal(echo.storage_time, mem)
    prop = SpectralPropagator(img, mem.diffusion_D, _t_max([echo]))
    field_.add(intensity, prop, echo.storage_time)

    frame_w = to_si(im["frame_width_ns"], "ns")
    t0 = mem.flip_time + to_si(im["first_frame_ns"], "ns")
    frames = gate_frames(field_, frame_w, t0, n_frames, threads)

    sched = gem1d.GradientSchedule.from_config(mem)
    along = shape[1] if chart.orientation == "vertical" else shape[0]
    C, C_gated, C_point, t_store = [], [], [], []
    for fr in frames:
        C.append(contrast(fr.image, chart, cols))
        ts = float(sched.storage_time(fr.t_mid))
        t_store.append(ts)
        C_point.append(predicted_contrast(chart, mem.diffusion_D, ts, C0, size=along, pitch=pitch, columns=cols))
        w = window_weights(echo.t_grid, fr.t_start, fr.t_end) * intensity
        idx = np.nonzero(w)[0]
        prof = sum(w[i] * analytic_profile(chart, along, pitch, mem.diffusion_D, tau[i]) for i in idx)
        C_gated.append(C0 * contrast_from_profile(prof, chart, pitch, cols))
    curve = ContrastCurve(chart.a, C0, np.array(t_store), np.array(C), np.array(C_gated),
                          label=f"{chart.orientation} a={chart.a * 1e6:.0f}um")
    curve.C_point = np.array(C_point)
    return ChartRun(chart, frames, curve, echo, peak, img)


@dataclass
class DelayResult:
    runs: list[ChartRun]
    orientation_runs: tuple[ChartRun, ChartRun]
    delay_rms: float
    orientation_max_diff: float
    memory: MemoryConfig


def run_delay_independence(settings: Settings, threads: int = 1) -> DelayResult:
    """Same chart stored with several pulse-to-flip delays; contrast should track storage time only."""
    d = settings["delay"]
    W = to_si(d["pulse_width_us"], "us")
    mem = memory_for(settings, W)
    pitch = to_si(d["pitch_um"], "um")
    a = to_si(d["line_width_um"], "um")
    chart = BarChart(a)
    runs = [run_chart(settings, mem, chart, mem.flip_time + to_si(p, "us"), W, d["n_frames"], pitch, threads)
            for p in d["peaks_us"]]
    ref = runs[len(runs) // 2]
    horiz = run_chart(settings, mem, BarChart(a, orientation="horizontal"), ref.peak, W, d["n_frames"], pitch, threads)
    delay_rms = max(rms(r.curve.C, ref.curve.C) for r in runs)
    orient = float(np.max(np.abs(horiz.curve.C - ref.curve.C)))
    return DelayResult(runs, (ref, horiz), delay_rms, orient, mem)


def write_delay(result: DelayResult, out_dir: Path, images: bool = True) -> list[Path]:
    out_dir.mkdir(parents=True, exist_ok=True)
    rows = []
    for r in list(result.runs) + [result.orientation_runs[1]]:
        c = r.curve
        for i, (t, C, Cp) in enumerate(zip(c.t_storage, c.C, c.C_pred), start=1):
            rows.append((r.chart.orientation, r.peak, c.a, i, t, C, Cp))
    written = [write_csv(out_dir / "contrast.csv",
                         ["orientation", "input_peak", "a", "frame_index", "t", "C", "C_pred"], rows)]
    if images:
        ref = result.orientation_runs[0]
        for i, fr in enumerate(ref.frames, start=1):
            written.append(write_pgm(out_dir / f"frame_{i:02d}.pgm", fr.image))
    written.append(_write_json(out_dir / "summary.json", {
        "delay_rms": result.delay_rms,
        "orientation_max_diff": result.orientation_max_diff,
        "optical_depth": result.memory.optical_depth,
    }))
    return written


@dataclass
class MTFResult:
    runs: list[ChartRun]
    table: list[tuple[float, float, float, float]]
    residuals: dict
    overall_rms: float
    memory: MemoryConfig


def run_mtf_study(settings: Settings, threads: int = 1) -> MTFResult:
    """Contrast decay for several line widths against the fixed-D model, plus an MTF table."""
    m = settings["mtf"]
    W = to_si(m["pulse_width_us"], "us")
    mem = memory_for(settings, W)
    pitch = to_si(m["pitch_um"], "um")
    peak = mem.flip_time + to_si(m["peak_us"], "us")
    charts = [BarChart(to_si(a, "um")) for a in m["line_widths_um"]]
    runs = [run_chart(settings, mem, c, peak, W, m["n_frames"], pitch, threads) for c in charts]
    residuals = {r.chart.a: r.curve.rms_residual() for r in runs}
    all_c = np.concatenate([r.curve.C for r in runs])
    all_p = np.concatenate([r.curve.C_pred for r in runs])
    times = [to_si(t, "us") for t in m["times_us"]]
    big = max(charts, key=lambda c: c.a)
    table = mtf(charts, mem.diffusion_D, times, pitch, shape=_chart_shape(big, pitch))
    return MTFResult(runs, table, residuals, rms(all_c, all_p), mem)


def write_mtf(result: MTFResult, out_dir: Path, images: bool = True) -> list[Path]:
    out_dir.mkdir(parents=True, exist_ok=True)
    rows = []
    for r in result.runs:
        c = r.curve
        for i, (t, C, Cp, Cpt) in enumerate(zip(c.t_storage, c.C, c.C_pred, c.C_point), start=1):
            rows.append((c.a, i, t, C, Cp, Cpt))
    written = [
        write_csv(out_dir / "contrast.csv", ["a", "frame_index", "t", "C", "C_pred", "C_point"], rows),
        write_csv(out_dir / "mtf.csv", ["f_lp_per_mm", "t", "C", "C_model"],
                  ((f * 1e-3, t, C, Cm) for f, t, C, Cm in result.table)),
    ]
    if images:
        for r in result.runs:
            tag = f"a{r.chart.a * 1e6:.0f}um"
            written.append(write_pgm(out_dir / f"input_{tag}.pgm", r.image))
            written.append(write_pgm(out_dir / f"last_{tag}.pgm", r.frames[len(r.frames) - 1].image))
    written.append(_write_json(out_dir / "summary.json", {
        "rms_residual_by_a": {f"{a * 1e6:.0f}um": v for a, v in result.residuals.items()},
        "rms_residual": result.overall_rms,
        "optical_depth": result.memory.optical_depth,
    }))
    return written


def _write_json(path: Path, obj) -> Path:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")
    return path


# --------------------------------------------------------------------------
# preflight

@dataclass(frozen=True)
class Check:
    rule: str
    ok: bool
    detail: str

    def line(self) -> str:
        return f"{'PASS' if self.ok else 'FAIL'}  {self.rule}: {self.detail}"


# time-step budget per scenario run
MAX_STEPS = 10_000


def preflight(settings: Settings) -> list[Check]:
    """Constraint checks beyond per-key ranges: stability, step budget, resolution, frame windows."""
    checks = []
    try:
        mem = settings.memory()
    except ValueError as exc:
        return [Check("memory.build", False, str(exc))]
    checks.append(Check("memory.build", True, f"bandwidth {mem.bandwidth / (2 * math.pi) * 1e-6:.3f} MHz"))

    dt = mem.dt
    phase = dt * max(abs(mem.gradient_write), abs(mem.gradient_read)) * mem.cell_length
    checks.append(Check("solver.phase_step", phase < 0.1,
                        f"dt = {dt * 1e9:.4g} ns winds {phase:.4f} rad per step; "
                        f"bound dt < {mem.max_stable_dt * 1e9:.4g} ns"))

    im, mv, dl, mt = settings["imaging"], settings["movie"], settings["delay"], settings["mtf"]
    frame_w = to_si(im["frame_width_ns"], "ns")
    t0 = mem.flip_time + to_si(im["first_frame_ns"], "ns")
    plans = {
        "two_image_movie": ([to_si(mv["first_peak_us"], "us"), to_si(mv["first_peak_us"] + mv["spacing_us"], "us")],
                            to_si(mv["pulse_width_us"], "us"), mv["n_frames"]),
        "delay_independence": ([to_si(p, "us") for p in dl["peaks_us"]], to_si(dl["pulse_width_us"], "us"),
                               dl["n_frames"]),
        "mtf_study": ([to_si(mt["peak_us"], "us")], to_si(mt["pulse_width_us"], "us"), mt["n_frames"]),
    }
    for name, (peaks, W, n_frames) in plans.items():
        seqs = [PulseSequence(tuple(Pulse(mem.flip_time + p, W) for p in sorted(peaks)))]
        if name == "delay_independence":
            seqs = [PulseSequence((Pulse(mem.flip_time + p, W),)) for p in peaks]
        spans = [gem1d.default_span(mem, q) for q in seqs]
        steps = max(int(math.ceil((b - a) / dt)) for a, b in spans)
        checks.append(Check(f"{name}.step_budget", steps <= MAX_STEPS, f"{steps} steps (limit {MAX_STEPS})"))
        end = t0 + n_frames * frame_w
        span_end = min(b for _, b in spans)
        checks.append(Check(f"{name}.frames_in_span", end <= span_end,
                            f"last frame ends {end * 1e6:.3f} us, simulation ends {span_end * 1e6:.3f} us"))
        need = 8.0 / W
        checks.append(Check(f"{name}.bandwidth", mem.bandwidth >= need,
                            f"memory {mem.bandwidth / (2 * math.pi) * 1e-6:.3f} MHz vs pulse "
                            f"{need / (2 * math.pi) * 1e-6:.3f} MHz (1/e^2 full width)"))
        try:
            q = seqs[0]
            q.check_inputs(mem.flip_time)
            checks.append(Check(f"{name}.inputs_before_flip", True, "all pulses peak before the flip"))
        except ValueError as exc:
            checks.append(Check(f"{name}.inputs_before_flip", False, str(exc)))

    for name, widths, pitch_um in (("delay_independence", [dl["line_width_um"]], dl["pitch_um"]),
                                   ("mtf_study", mt["line_widths_um"], mt["pitch_um"])):
        worst = min(widths)
        checks.append(Check(f"{name}.resolution", worst >= 4 * pitch_um,
                            f"narrowest line a = {worst:g} um vs 4 x pitch = {4 * pitch_um:g} um"))

    pitch = to_si(im["pitch_um"], "um")
    letter = LetterMask("N", to_si(mv["letter_height_mm"], "mm"))
    stroke_px = letter.stroke / pitch
    checks.append(Check("two_image_movie.letter_stroke", stroke_px >= 3,
                        f"stroke {stroke_px:.1f} px (need >= 3)"))
    fits = letter.height <= im["grid_px"] * pitch
    checks.append(Check("two_image_movie.letter_fits", fits,
                        f"letter {letter.height * 1e3:.2f} mm in a {im['grid_px'] * pitch * 1e3:.2f} mm field"))
    return checks


RUNNERS = {
    "two_image_movie": (run_two_image_movie, write_movie),
    "delay_independence": (run_delay_independence, write_delay),
    "mtf_study": (run_mtf_study, write_mtf),
}


def run(name: str, settings: Settings, out_dir: Path | None = None, threads: int = 1, images: bool = True):
    if name not in RUNNERS:
        raise KeyError(f"unknown scenario {name!r}; choose from {', '.join(SCENARIOS)}")
    runner, writer = RUNNERS[name]
    result = runner(settings, threads=threads)
    written = writer(result, Path(out_dir), images) if out_dir is not None else []
    return result, written


# --------------------------------------------------------------------------
# golden files

GOLDEN_CSVS = {
    "two_image_movie": ("similarity.csv", "echo.csv"),
    "delay_independence": ("contrast.csv",),
    "mtf_study": ("contrast.csv", "mtf.csv"),
}


def save_golden(name: str, out_dir: Path, golden_root: Path) -> list[Path]:
    dest = Path(golden_root) / name
    dest.mkdir(parents=True, exist_ok=True)
    saved = []
    for f in GOLDEN_CSVS[name]:
        target = dest / f
        target.write_bytes((Path(out_dir) / f).read_bytes())
        saved.append(target)
    return saved


def compare_golden(name: str, out_dir: Path, golden_root: Path, rtol: float = 1e-9, atol: float = 1e-12) -> list[str]:
    """Differences between fresh CSVs and the stored goldens; empty when they agree.

    Text columns must match exactly, numbers within ``rtol``/``atol`` so the
    goldens survive a change of BLAS or platform.
    """
    problems = []
    for f in GOLDEN_CSVS[name]:
        gold = Path(golden_root) / name / f
        if not gold.exists():
            problems.append(f"{gold}: missing golden file")
            continue
        new, ref = (read_csv(p) for p in (Path(out_dir) / f, gold))
        if new[0] != ref[0]:
            problems.append(f"{f}: header {new[0]} != {ref[0]}")
            continue
        if len(new[1]) != len(ref[1]):
            problems.append(f"{f}: {len(new[1])} rows, golden has {len(ref[1])}")
            continue
        for i, (a, b) in enumerate(zip(new[1], ref[1]), start=2):
            bad = [k for k in ref[0] if not _same(a[k], b[k], rtol, atol)]
            if bad:
                problems.append(f"{f} line {i}: {', '.join(bad)} differ ({a[bad[0]]} vs {b[bad[0]]})")
                break
    return problems


def _same(x: str, y: str, rtol: float, atol: float) -> bool:
    if x == y:
        return True
    try:
        return math.isclose(float(x), float(y), rel_tol=rtol, abs_tol=atol)
    except ValueError:
        return False
