"""Longitudinal gradient echo memory dynamics.

Linear two-field model in the co-moving frame::

    ds/dt = -[i eta(t) (z - L/2) + gamma] s + i g E
    dE/dz = i g s

``s(z, t)`` is the ground-state coherence, ``E(z, t)`` the signal field
(|E|^2 is power, sum |s|^2 dz is stored energy), ``eta(t)`` the detuning
gradient and ``g`` the coupling fixed by the optical depth (see
:attr:`MemoryConfig.coupling`).

Time stepping is Strang split: an exact half-step phase rotation for the
gradient and decay, then a Crank-Nicolson step of the coupling with the
field following the coherence instantly along z, then the second half
rotation. The z-integral uses the midpoint cumulative sum, which makes
the discrete energy balance exact: every joule that enters is either
transmitted, retrieved, still stored or removed by ``gamma``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.optimize import brentq
from scipy.signal import find_peaks, lfilter

from .core.config import MemoryConfig, Pulse, PulseSequence
from .core.io import write_csv


class UnstableStepError(ValueError):
    pass


@dataclass(frozen=True)
class GradientSchedule:
    """Detuning gradient vs time: write value, linear ramp centered on the flip, read value."""

    write: float
    read: float
    flip_time: float
    ramp: float
    flip: bool = True

    @classmethod
    def from_config(cls, config: MemoryConfig, flip: bool = True) -> "GradientSchedule":
        ramp = 0.0 if config.step_flip else config.flip_duration
        return cls(config.gradient_write, config.gradient_read, config.flip_time, ramp, flip)

    @property
    def ramp_start(self) -> float:
        return self.flip_time - 0.5 * self.ramp

    @property
    def ramp_end(self) -> float:
        return self.flip_time + 0.5 * self.ramp

    @property
    def zero_crossing(self) -> float:
        """Time at which the gradient passes through zero."""
        if self.ramp == 0:
            return self.flip_time
        return self.ramp_start + self.ramp * self.write / (self.write - self.read)

    def eta(self, t):
        t = np.asarray(t, dtype=float)
        if not self.flip:
            return np.full(t.shape, self.write)
        if self.ramp == 0:
            return np.where(t < self.flip_time, self.write, self.read)
        u = np.clip((t - self.ramp_start) / self.ramp, 0.0, 1.0)
        return self.write + (self.read - self.write) * u

    def phase(self, t):
        """Accumulated phase slope, integral of eta from the flip time to ``t`` (rad/m)."""
        t = np.asarray(t, dtype=float)
        if not self.flip:
            return self.write * (t - self.flip_time)
        if self.ramp == 0:
            return np.where(t < self.flip_time, self.write, self.read) * (t - self.flip_time)
        a = self.ramp_start
        u = np.clip(t - a, 0.0, self.ramp)
        in_ramp = self.write * (a - self.flip_time) + self.write * u + (self.read - self.write) * u**2 / (2 * self.ramp)
        return np.where(t <= a, self.write * (t - self.flip_time),
                        np.where(t >= self.ramp_end, self.read * (t - self.flip_time), in_ramp))

    def write_time(self, t_out):
        """Write-in time whose coherence rephases at ``t_out``; NaN before the zero crossing."""
        t_out = np.asarray(t_out, dtype=float)
        sgn = np.sign(self.write)
        target = sgn * self.phase(t_out)
        w, r = sgn * self.write, sgn * self.read
        t_in = self.flip_time + target / w
        if self.ramp > 0:
            a = self.ramp_start
            phi_a = w * (a - self.flip_time)
            # quadratic inside the ramp: phi_a + w u + (r - w) u^2 / (2 ramp) = target
            qa = (r - w) / (2 * self.ramp)
            disc = np.maximum(w**2 - 4 * qa * (phi_a - target), 0.0)
            u = (-w + np.sqrt(disc)) / (2 * qa)
            t_in = np.where(target <= phi_a, t_in, a + u)
        valid = t_out > self.zero_crossing
        return np.where(valid, t_in, np.nan)

    def storage_time(self, t_out):
        return np.asarray(t_out, dtype=float) - self.write_time(t_out)


@dataclass
class SpinWave:
    z_grid: np.ndarray
    s: np.ndarray
    slice_tags: np.ndarray | None = None

    @property
    def energy(self) -> float:
        dz = self.z_grid[1] - self.z_grid[0]
        return float(np.sum(np.abs(self.s) ** 2) * dz)


@dataclass
class SpinWaveHistory:
    times: np.ndarray
    z_grid: np.ndarray
    s: np.ndarray  # (n_times, n_z)
    slice_tags: np.ndarray | None = None

    def at(self, t: float) -> SpinWave:
        i = int(np.argmin(np.abs(self.times - t)))
        return SpinWave(self.z_grid, self.s[i], self.slice_tags)

    @property
    def final(self) -> SpinWave:
        return SpinWave(self.z_grid, self.s[-1], self.slice_tags)


@dataclass
class EchoTrace:
    t_grid: np.ndarray
    field: np.ndarray
    input_field: np.ndarray
    dt: float
    flip_time: float
    input_energy: float
    transmitted_energy: float
    retrieved_energy: float
    stored_energy: float
    decayed_energy: float
    storage_time: np.ndarray = field(repr=False, default=None)

    @property
    def intensity(self) -> np.ndarray:
        return np.abs(self.field) ** 2

    @property
    def absorbed_fraction(self) -> float:
        if self.input_energy == 0:
            return 0.0
        return float(np.clip(1.0 - self.transmitted_energy / self.input_energy, 0.0, 1.0))

    @property
    def efficiency(self) -> float:
        if self.input_energy == 0:
            return 0.0
        return float(np.clip(self.retrieved_energy / self.input_energy, 0.0, 1.0))

    @property
    def energy_residual(self) -> float:
        """Relative mismatch of input vs transmitted + retrieved + stored + decayed."""
        out = self.transmitted_energy + self.retrieved_energy + self.stored_energy + self.decayed_energy
        return (out - self.input_energy) / self.input_energy if self.input_energy else 0.0

    def to_csv(self, path) -> Path:
        return write_csv(path, ["t_seconds", "intensity"], zip(self.t_grid, self.intensity))


def default_span(config: MemoryConfig, seq: PulseSequence) -> tuple[float, float]:
    W = max(p.width_1e2 for p in seq)
    first = min(p.peak_time for p in seq)
    r = config.expansion_ratio
    start = first - 1.5 * W
    end = config.flip_time + r * (config.flip_time - first + 1.5 * W)
    return start, end


def check_step(config: MemoryConfig, dt: float) -> None:
    phase = dt * max(abs(config.gradient_write), abs(config.gradient_read)) * config.cell_length
    if phase >= 0.1:
        raise UnstableStepError(
            f"dt = {dt:.3e} s winds {phase:.3f} rad across the cell per step; "
            f"need < 0.1 rad, i.e. dt < {config.max_stable_dt:.3e} s"
        )


def evolve(
    config: MemoryConfig,
    seq: PulseSequence,
    t_span: tuple[float, float] | None = None,
    dt: float | None = None,
    flip: bool = True,
    record_every: int = 1,
) -> tuple[SpinWaveHistory, EchoTrace]:
    """Write ``seq`` into the memory, flip the gradient and read the echo out.

    Returns the spin-wave history (every ``record_every`` steps) and the
    output field sampled at step midpoints. With ``flip=False`` the write
    gradient is held and only the transmitted light comes out.
    """
    if len(seq) == 0:
        raise ValueError("empty pulse sequence")
    seq.check_inputs(config.flip_time)
    if dt is None:
        dt = config.dt if config.dt is not None else 0.5 * config.max_stable_dt
    check_step(config, dt)
    t0, t1 = t_span if t_span is not None else default_span(config, seq)
    n_steps = int(math.ceil((t1 - t0) / dt - 1e-9))
    sched = GradientSchedule.from_config(config, flip)

    L, nz = config.cell_length, config.n_z
    dz = L / nz
    z = (np.arange(nz) + 0.5) * dz
    zc = z - 0.5 * L
    g = config.coupling
    gam = config.decoherence_rate

    # CN coupling step: (1 + a K) s' = (1 - a K) s + i g dt Ebar, a = g^2 dt / 2,
    # K s = dz (cumsum(s) - s/2). The solve is a first-order recurrence.
    a = 0.5 * g * g * dt
    c = a * dz
    diag = 1.0 + 0.5 * c
    rho = (1.0 - 0.5 * c) / diag

    n_pulses = len(seq)
    deposits = np.zeros((n_pulses, nz))
    s = np.zeros(nz, dtype=complex)
    out = np.empty(n_steps, dtype=complex)
    e_in = np.empty(n_steps)
    decayed = 0.0
    rec_t, rec_s = [t0], [s.copy()]

    times = t0 + dt * np.arange(n_steps + 1)
    e_nodes = seq.field(times)
    phases = sched.phase(np.concatenate([times, times[:-1] + 0.5 * dt]))
    phase_nodes, phase_mids = phases[: n_steps + 1], phases[n_steps + 1:]
    decay_half = math.exp(-0.5 * gam * dt)
    before_flip = times[:-1] + 0.5 * dt < config.flip_time
    if n_pulses > 1:
        dominant = np.argmax(np.abs(np.stack([p.field(times[:-1] + 0.5 * dt) for p in seq])), axis=0)
    else:
        dominant = np.zeros(n_steps, dtype=int)

    for k in range(n_steps):
        s = s * (np.exp(-1j * (phase_mids[k] - phase_nodes[k]) * zc) * decay_half)
        if gam:
            decayed += (1 - decay_half**2) * np.sum(np.abs(s) ** 2) / decay_half**2 * dz
        ebar = 0.5 * (e_nodes[k] + e_nodes[k + 1])
        rhs = s - a * dz * (np.cumsum(s) - 0.5 * s) + 1j * g * dt * ebar
        csum = lfilter([1.0], [1.0, -rho], rhs / diag)
        s_new = (rhs - c * np.concatenate(([0.0], csum[:-1]))) / diag
        sbar = 0.5 * (s + s_new)
        out[k] = ebar + 1j * g * dz * sbar.sum()
        e_in[k] = ebar
        if before_flip[k]:
            deposits[dominant[k]] += np.abs(s_new - s)
        s = s_new * (np.exp(-1j * (phase_nodes[k + 1] - phase_mids[k]) * zc) * decay_half)
        if gam:
            decayed += (1 - decay_half**2) * np.sum(np.abs(s) ** 2) / decay_half**2 * dz
        if (k + 1) % record_every == 0 or k == n_steps - 1:
            rec_t.append(times[k + 1])
            rec_s.append(s.copy())

    t_mid = times[:-1] + 0.5 * dt
    intensity = np.abs(out) ** 2
    pre = t_mid < config.flip_time
    tags = np.where(deposits.max(axis=0) > 0, np.argmax(deposits, axis=0), -1)
    trace = EchoTrace(
        t_grid=t_mid,
        field=out,
        input_field=e_in,
        dt=dt,
        flip_time=config.flip_time,
        input_energy=float(np.sum(e_in**2) * dt),
        transmitted_energy=float(np.sum(intensity[pre]) * dt),
        retrieved_energy=float(np.sum(intensity[~pre]) * dt),
        stored_energy=float(np.sum(np.abs(s) ** 2) * dz),
        decayed_energy=float(decayed),
        storage_time=sched.storage_time(t_mid) if flip else np.full(n_steps, np.nan),
    )
    history = SpinWaveHistory(np.array(rec_t), z, np.array(rec_s), tags)
    return history, trace


def export_spinwave(history: SpinWaveHistory, times, path) -> Path:
    """CSV of ``t, z, Re s, Im s`` for the recorded snapshots nearest to ``times``."""
    rows = []
    for t in times:
        sw = history.at(t)
        i = int(np.argmin(np.abs(history.times - t)))
        for zz, v in zip(sw.z_grid, sw.s):
            rows.append((history.times[i], zz, v.real, v.imag))
    return write_csv(path, ["t_seconds", "z", "re_s", "im_s"], rows)


def expansion_retrieval(config: MemoryConfig, seq: PulseSequence, r: float, **kw) -> EchoTrace:
    """Retrieve with the read gradient reduced by ``r`` (``|write| = r |read|``)."""
    if not r > 0:
        raise ValueError(f"expansion ratio must be > 0, got {r}")
    return evolve(config.with_expansion(r), seq, **kw)[1]


def efficiency_bound(absorbed_fraction: float) -> float:
    """Best forward-retrieval efficiency given the single-pass absorption.

    Read-out mirrors write-in, so the echo is attenuated by the same factor
    that captured the input: the bound is the absorption squared.
    """
    if not 0.0 <= absorbed_fraction <= 1.0:
        raise ValueError(f"absorbed fraction must lie in [0, 1], got {absorbed_fraction}")
    return absorbed_fraction**2


def storage_time(flip_delay: float, r: float = 1.0) -> float:
    """Time a slice written ``flip_delay`` before the flip spends in the memory.

    It rephases ``r * flip_delay`` after the flip, so the total is
    ``flip_delay * (1 + r)``; ``2 * flip_delay`` for symmetric read-out.
    """
    if not flip_delay > 0 or not r > 0:
        raise ValueError("flip_delay and r must be > 0")
    return flip_delay * (1.0 + r)


def storage_time_from_output(t_out: float, r: float = 1.0) -> float:
    """Storage time of the slice emitted ``t_out`` after the flip."""
    if not t_out > 0 or not r > 0:
        raise ValueError("t_out and r must be > 0")
    return t_out * (1.0 + 1.0 / r)


def measured_absorption(config: MemoryConfig, seq: PulseSequence, dt: float | None = None) -> float:
    """Single-pass absorbed fraction with the write gradient held (no read-out)."""
    t0, _ = default_span(config, seq)
    _, tr = evolve(config, seq, t_span=(t0, config.flip_time), dt=dt, flip=False, record_every=10**9)
    return tr.absorbed_fraction


def calibrate_optical_depth(
    config: MemoryConfig, seq: PulseSequence, target: float, dt: float | None = None, xtol: float = 1e-7
) -> MemoryConfig:
    """Return ``config`` with the optical depth tuned so ``seq`` is absorbed by ``target``."""
    if not 0 < target < 1:
        raise ValueError(f"target absorption must be in (0, 1), got {target}")

    def miss(d):
        return measured_absorption(config.replace(optical_depth=d), seq, dt) - target

    d0 = -math.log1p(-target)
    lo, hi = 0.5 * d0, 2.0 * d0
    while miss(hi) < 0:
        hi *= 2.0
    d = brentq(miss, lo, hi, xtol=xtol)
    return config.replace(optical_depth=d)


def echo_peaks(trace: EchoTrace, n: int | None = None, after: float | None = None) -> np.ndarray:
    """Peak times of the output intensity after ``after`` (default: the flip), in time order.

    Peaks are refined by a parabola through the three samples around each
    maximum. With ``n`` given, the ``n`` most prominent peaks are kept.
    """
    after = trace.flip_time if after is None else after
    mask = trace.t_grid > after
    t = trace.t_grid[mask]
    y = trace.intensity[mask]
    if y.size < 3 or y.max() <= 0:
        return np.array([])
    idx, props = find_peaks(y, prominence=1e-3 * y.max())
    if n is not None and len(idx) > n:
        keep = np.argsort(props["prominences"])[::-1][:n]
        idx = idx[np.sort(keep)]
    out = []
    for i in idx:
        y0, y1, y2 = y[i - 1], y[i], y[i + 1]
        den = y0 - 2 * y1 + y2
        off = 0.5 * (y0 - y2) / den if den != 0 else 0.0
        out.append(t[i] + off * (t[1] - t[0]))
    return np.array(out)


def pulse_width(t: np.ndarray, intensity: np.ndarray) -> tuple[float, float]:
    """(1/e^2 full width, centroid) from the second moment; exact for Gaussians (width = 4 std)."""
    w = intensity / intensity.sum()
    mu = float(np.sum(t * w))
    return 4.0 * math.sqrt(float(np.sum((t - mu) ** 2 * w))), mu


def split_direct_echo(config: MemoryConfig, seq: PulseSequence, **kw) -> tuple[EchoTrace, EchoTrace]:
    """Separate the output into light that went straight through and light caused by the flip.

    The direct part is the output of an identical run with the write gradient
    held; the echo part is the difference of the two (linear) output fields.
    """
    _, full = evolve(config, seq, record_every=10**9, **kw)
    span = (full.t_grid[0] - 0.5 * full.dt, full.t_grid[-1] + 0.5 * full.dt)
    kw = {k: v for k, v in kw.items() if k not in ("t_span", "dt")}
    _, direct = evolve(config, seq, t_span=span, flip=False, record_every=10**9, dt=full.dt)
    echo_field = full.field - direct.field
    echo = EchoTrace(
        t_grid=full.t_grid, field=echo_field, input_field=full.input_field, dt=full.dt,
        flip_time=full.flip_time, input_energy=full.input_energy,
        transmitted_energy=0.0, retrieved_energy=float(np.sum(np.abs(echo_field) ** 2) * full.dt),
        stored_energy=full.stored_energy, decayed_energy=full.decayed_energy,
        storage_time=full.storage_time,
    )
    return direct, echo
