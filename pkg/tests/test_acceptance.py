"""Acceptance criteria 1-9.

Each test prints one ``criterion N: PASS|FAIL`` line (shown with ``-s``)
and records it for the summary printed at the end of the run.
"""

import time

import numpy as np
import pytest
from scipy.ndimage import gaussian_filter

from conftest import ACCEPTANCE
from gemsim import gem1d, scenarios
from gemsim.core import ImageField, MemoryConfig, Pulse, PulseSequence, load_config
from gemsim.diffusion import fd_oracle, propagate
from gemsim.imaging import BarChart
from gemsim.metrics import mtf

W = 1.1e-6
D = 1.05e-2


def report(n: int, ok: bool, detail: str, elapsed: float, limit: float | None):
    within = limit is None or elapsed < limit
    timing = f"{elapsed:.1f} s" + (f" (limit {limit:g} s)" if limit else "")
    ACCEPTANCE[n] = (ok and within, f"{detail}; {timing}")
    print(f"\ncriterion {n}: {'PASS' if ok and within else 'FAIL'}  {detail}; {timing}")
    assert ok, detail
    assert within, f"runtime {elapsed:.1f} s over {limit} s"


def calibrated(r: float = 1.0) -> MemoryConfig:
    mem = MemoryConfig.from_lab(5.0, 15.0, 2.0, r, 0.30, 105.0)
    return gem1d.calibrate_optical_depth(mem, PulseSequence((Pulse(-1.1e-6, W),)), 0.30)


def test_1_efficiency_bound():
    t0 = time.perf_counter()
    mem = calibrated()
    _, tr = gem1d.evolve(mem, PulseSequence((Pulse(-1.1e-6, W),)))
    eta, A = tr.efficiency, tr.absorbed_fraction
    ok = 0.07 <= eta <= 0.09 + 1e-3 and abs(A - 0.30) < 1e-3
    report(1, ok, f"absorption {A:.4f}, efficiency {eta:.4f} (bound A^2 = {A * A:.4f}, window [0.07, 0.091])",
           time.perf_counter() - t0, 30)


def test_2_echo_timing():
    t0 = time.perf_counter()
    mem = calibrated()
    seq = PulseSequence((Pulse(-1.1e-6, W),))
    _, sym = gem1d.split_direct_echo(mem, seq)
    t_sym = gem1d.echo_peaks(sym, n=1)[0]
    _, exp = gem1d.split_direct_echo(mem.with_expansion(1.4), seq)
    t_exp = gem1d.echo_peaks(exp, n=1)[0]
    after = exp.t_grid > mem.flip_time
    width, _ = gem1d.pulse_width(exp.t_grid[after], exp.intensity[after])
    dt = sym.dt
    ok = (abs(t_sym - 1.1e-6) <= dt
          and abs(t_exp - 1.54e-6) <= 0.05 * 1.54e-6
          and abs(width - 1.4 * W) <= 0.05 * 1.4 * W)
    report(2, ok, f"r=1 peak {t_sym * 1e6:.4f} us (target 1.1 +/- {dt * 1e6:.3f}); r=1.4 peak {t_exp * 1e6:.4f} us "
                  f"(target 1.54 +/- 5%), width {width * 1e6:.4f} us (target {1.4 * W * 1e6:.3f} +/- 5%)",
           time.perf_counter() - t0, 30)


def test_3_filo_ordering():
    t0 = time.perf_counter()
    failures, tested = [], 0
    for r in (1.0, 1.4):
        mem = calibrated(r)
        for spacing in (1.0 * W, 1.4 * W, 2.0 * W):
            p2 = -0.75e-6
            pulses = (Pulse(p2 - spacing, W, label="first"), Pulse(p2, W, label="second"))
            seq = PulseSequence(pulses)
            span = gem1d.default_span(mem, seq)
            _, joint = gem1d.evolve(mem, seq, t_span=span, record_every=10**9)
            peaks = gem1d.echo_peaks(joint, n=2)
            own = []
            for p in pulses:
                _, e = gem1d.split_direct_echo(mem, PulseSequence((p,)), t_span=span)
                own.append(gem1d.echo_peaks(e, n=1)[0])
            tested += 1
            # second pulse in must come out first, and the joint output must show both echoes in that order
            ok = own[1] < own[0] and len(peaks) == 2 and np.allclose(peaks, [own[1], own[0]], atol=0.1e-6)
            if not ok:
                failures.append(f"r={r} spacing={spacing * 1e6:.2f}us echoes {np.round(peaks * 1e6, 3)}")
    report(3, not failures, f"{tested - len(failures)}/{tested} (r, spacing) cases reversed"
           + (f"; failing {failures}" if failures else ""), time.perf_counter() - t0, 60)


def smooth_instance(seed: int, n: int = 64, pitch: float = 15e-6) -> ImageField:
    rng = np.random.default_rng(seed)
    v = gaussian_filter(rng.random((n, n)), 3.5, mode="wrap")
    y, x = np.mgrid[:n, :n] - (n - 1) / 2
    v = (v - v.min()) * np.exp(-(x * x + y * y) / (2 * 14.0**2))
    return ImageField(v, pitch)


def test_4_diffusion_oracle():
    t0 = time.perf_counter()
    worst_err = worst_mass = worst_sg = 0.0
    for seed in range(5):
        img = smooth_instance(seed)
        for s in (1, 10, 100):
            t = s * img.pitch**2 / D
            a, f = propagate(img, D, t), fd_oracle(img, D, t)
            worst_err = max(worst_err, np.linalg.norm(a.values - f.values) / np.linalg.norm(f.values))
            full = propagate(img, D, 2 * t, expand=True)
            worst_mass = max(worst_mass, abs(full.total_power / img.total_power - 1))
            twice = propagate(propagate(img, D, t, expand=True), D, t, expand=True)
            k = (twice.shape[0] - full.shape[0]) // 2
            c = twice.values[k: k + full.shape[0], k: k + full.shape[1]]
            worst_sg = max(worst_sg, np.max(np.abs(c - full.values)) / full.values.max())
    ok = worst_err < 1e-3 and worst_mass < 1e-6 and worst_sg < 1e-6
    report(4, ok, f"L2 rel error {worst_err:.2e} (< 1e-3), mass {worst_mass:.1e} (< 1e-6), "
                  f"semigroup {worst_sg:.1e} (< 1e-6) over 5 images x Dt/pitch^2 in {{1, 10, 100}}",
           time.perf_counter() - t0, 60)


def test_5_delay_independence():
    t0 = time.perf_counter()
    res = scenarios.run_delay_independence(load_config())
    ok = res.delay_rms < 0.01 and res.orientation_max_diff < 1e-3
    report(5, ok, f"delay curves RMS {res.delay_rms:.2e} (< 1e-2), "
                  f"orientation max diff {res.orientation_max_diff:.1e} (< 1e-3)",
           time.perf_counter() - t0, 60)


def test_6_zero_free_parameter_fit():
    t0 = time.perf_counter()
    res = scenarios.run_mtf_study(load_config())
    per = ", ".join(f"{a * 1e6:.0f}um {v:.1e}" for a, v in res.residuals.items())
    point = max(np.sqrt(np.mean((r.curve.C - r.curve.C_point) ** 2)) for r in res.runs)
    ok = len(res.runs) == 4 and res.overall_rms < 1e-3 and max(res.residuals.values()) < 1e-3
    report(6, ok, f"RMS residual {res.overall_rms:.2e} (< 1e-3); per width {per}; "
                  f"frame-midpoint model would give {point:.1e}", time.perf_counter() - t0, 60)


def test_7_mtf_monotone():
    t0 = time.perf_counter()
    charts = [BarChart(a * 1e-6) for a in (375, 330, 285, 240)]
    times = [k * 0.25e-6 for k in range(17)]
    rows = mtf(charts, D, times, 5e-6, shape=(420, 560))
    C = {(f, t): c for f, t, c, _ in rows}
    freqs = sorted({f for f, _, _, _ in rows})
    bad = []
    for t in times:
        cs = [C[(f, t)] for f in freqs]
        bad += [f"t={t * 1e6:.2f}us" for x, y in zip(cs, cs[1:]) if y >= 0 and y > x + 1e-12]
    for f in freqs:
        cs = [C[(f, t)] for t in times]
        bad += [f"f={f * 1e-3:.2f}lp/mm" for x, y in zip(cs, cs[1:]) if y > x + 1e-12]
    report(7, not bad, f"{len(freqs)} frequencies x {len(times)} times checked"
           + (f"; violations at {sorted(set(bad))}" if bad else ""), time.perf_counter() - t0, 30)


def test_8_movie_structure():
    t0 = time.perf_counter()
    res = scenarios.run_two_image_movie(load_config())
    s = res.series
    cls = s.classify()
    cross = s.crossings()
    d = s.D
    problems = []
    if not (cls[0] == "T" and cls[-1] == "N"):
        problems.append(f"classification {cls[0]}..{cls[-1]}")
    if len(cross) != 1:
        problems.append(f"{len(cross)} crossings")
    else:
        first_echo = s.S["T"][: cross[0] + 1]
        if np.any(np.diff(first_echo) > 0):
            problems.append("S_T rises during the first echo")
        low = np.nonzero(d < 0.15)[0]
        contiguous = low.size > 0 and np.all(np.diff(low) == 1)
        flanked = contiguous and low[0] > 0 and low[-1] < len(d) - 1 and d[low[0] - 1] > 0.15 and d[low[-1] + 1] > 0.15
        if not flanked:
            problems.append(f"overlap frames {list(s.frame_index[low])} not a single flanked region")
    low = [int(i) for i in s.frame_index[d < 0.15]]
    report(8, not problems, f"first frame {cls[0]}, last frame {cls[-1]}, overlap frames {low} "
                            f"(D min {d.min():.3f})" + (f"; problems: {problems}" if problems else ""),
           time.perf_counter() - t0, 120)


@pytest.mark.parametrize("threads", [3])
def test_9_determinism(tmp_path, threads):
    t0 = time.perf_counter()
    settings = load_config()
    mismatched = []
    for name in scenarios.SCENARIOS:
        runs = []
        for k, n in enumerate((1, threads)):
            out = tmp_path / f"{name}_{k}"
            scenarios.run(name, settings, out, threads=n, images=False)
            runs.append({f: (out / f).read_bytes() for f in scenarios.GOLDEN_CSVS[name]})
        mismatched += [f"{name}/{f}" for f in runs[0] if runs[0][f] != runs[1][f]]
    report(9, not mismatched, f"CSV bytes identical for threads 1 vs {threads} across {len(scenarios.SCENARIOS)} scenarios"
           + (f"; differing {mismatched}" if mismatched else ""), time.perf_counter() - t0, None)
