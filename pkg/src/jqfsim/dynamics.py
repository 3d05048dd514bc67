"""Steady states, piecewise-constant time evolution, truncation convergence.

Time evolution uses exact matrix-exponential propagators per constant
segment; continuous (Gaussian) envelopes are sampled piecewise-constant at
``sample_dt`` with amplitudes quantized for propagator caching.  For
long time-independent stretches the spectral decomposition of the
Liouvillian evaluates the state at arbitrary times directly, which is what
makes slow qubit decays (tens of microseconds) next to a fast ancilla
(nanoseconds) cheap: the stiffness is handled exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import linalg, model
from .errors import DegenerateSteadyStateError, PositivityError, TruncationError

__all__ = [
    "PulseSegment",
    "PulseSchedule",
    "Trajectory",
    "steady_state",
    "steady_state_liouvillian",
    "expectation",
    "expectation_weight",
    "evolve",
    "observable_trajectory",
    "convergence_check",
    "ground_state",
    "excited_state",
    "qubit_population_op",
    "qubit_xbasis_op",
]

POSITIVITY_FLOOR = -1e-8


@dataclass(frozen=True)
class PulseSegment:
    duration: float
    amplitude_scale: float = 1.0
    phase: float = 0.0

    def __post_init__(self):
        if self.duration <= 0:
            raise ValueError("segment duration must be positive")
        if self.amplitude_scale < 0:
            raise ValueError("amplitude_scale must be >= 0")


@dataclass(frozen=True)
class PulseSchedule:
    """Ordered piecewise-constant drive segments."""

    segments: tuple[PulseSegment, ...]
    sample_dt: float = 1e-9

    def __post_init__(self):
        if self.sample_dt <= 0:
            raise ValueError("sample_dt must be positive")
        object.__setattr__(self, "segments", tuple(self.segments))

    @property
    def total_duration(self) -> float:
        return float(sum(s.duration for s in self.segments))

    @staticmethod
    def constant(duration: float, amplitude_scale: float = 1.0, phase: float = 0.0):
        return PulseSchedule((PulseSegment(duration, amplitude_scale, phase),))

    @staticmethod
    def from_samples(amplitudes, dt: float, phase: float = 0.0, quantize_levels: int = 64):
        """Piecewise-constant schedule from envelope samples.

        Amplitudes are quantized to ``quantize_levels`` steps of the maximum
        so equal-amplitude segments share cached propagators; pass
        ``quantize_levels=0`` to keep exact sample values.  Consecutive
        equal amplitudes are merged into one segment.
        """
        amplitudes = np.asarray(amplitudes, dtype=float)
        if amplitudes.size == 0:
            raise ValueError("need at least one sample")
        if quantize_levels:
            peak = amplitudes.max()
            if peak > 0:
                q = peak / quantize_levels
                amplitudes = np.round(amplitudes / q) * q
        segments = []
        run_amp, run_len = amplitudes[0], 1
        for a in amplitudes[1:]:
            if a == run_amp:
                run_len += 1
            else:
                segments.append(PulseSegment(run_len * dt, run_amp, phase))
                run_amp, run_len = a, 1
        segments.append(PulseSegment(run_len * dt, run_amp, phase))
        return PulseSchedule(tuple(segments), sample_dt=dt)

    @staticmethod
    def gaussian(
        sigma: float,
        truncation: float = 2.0,
        peak_scale: float = 1.0,
        phase: float = 0.0,
        sample_dt: float = 1e-9,
        quantize_levels: int = 64,
    ):
        """Gaussian envelope truncated at +-truncation*sigma, offset to zero at the edges."""
        half = truncation * sigma
        n = max(2, int(round(2 * half / sample_dt)))
        t = (np.arange(n) + 0.5) * sample_dt - half
        env = np.exp(-0.5 * (t / sigma) ** 2)
        edge = math.exp(-0.5 * truncation**2)
        env = np.clip((env - edge) / (1.0 - edge), 0.0, None) * peak_scale
        return PulseSchedule.from_samples(env, sample_dt, phase, quantize_levels)

    @staticmethod
    def flat_top(
        duration: float,
        edge_sigma: float,
        truncation: float = 2.0,
        amplitude_scale: float = 1.0,
        phase: float = 0.0,
        sample_dt: float = 1e-9,
        quantize_levels: int = 64,
    ):
        """Square pulse of length ``duration`` with Gaussian rise and fall edges."""
        half = truncation * edge_sigma
        n_edge = max(1, int(round(half / sample_dt)))
        t = (np.arange(n_edge) + 0.5) * sample_dt - half
        rise = np.exp(-0.5 * (t / edge_sigma) ** 2)
        edge = math.exp(-0.5 * truncation**2)
        rise = np.clip((rise - edge) / (1.0 - edge), 0.0, None)
        segments = list(
            PulseSchedule.from_samples(
                rise * amplitude_scale, sample_dt, phase, quantize_levels
            ).segments
        )
        if duration > 0:
            segments.append(PulseSegment(duration, amplitude_scale, phase))
        segments.extend(
            PulseSchedule.from_samples(
                rise[::-1] * amplitude_scale, sample_dt, phase, quantize_levels
            ).segments
        )
        return PulseSchedule(tuple(segments), sample_dt=sample_dt)


@dataclass
class Trajectory:
    """Sampled density matrices along an evolution."""

    times: np.ndarray
    states: list[np.ndarray] = field(default_factory=list)

    def expect(self, op: np.ndarray) -> np.ndarray:
        return np.array([expectation(rho, op) for rho in self.states])


def expectation(rho: np.ndarray, op: np.ndarray) -> complex:
    """tr[op rho] with shape checking."""
    if rho.shape != op.shape:
        raise ValueError(f"shape mismatch: rho {rho.shape}, op {op.shape}")
    return complex(np.trace(op @ rho))


def expectation_weight(op: np.ndarray) -> np.ndarray:
    """Row vector w with w . vec(rho) = tr[op rho] (column-stacking layout)."""
    return linalg.vec(op.T)


def steady_state_liouvillian(lv: np.ndarray, residual_rtol: float = 1e-10) -> np.ndarray:
    """Null vector of a trace-preserving Liouvillian, normalized to unit trace.

    One row of L is replaced by the trace constraint and the linear system
    solved directly; the residual ||L vec(rho)|| must come out below
    ``residual_rtol * ||L||`` or the kernel is deemed degenerate.
    """
    d2 = lv.shape[0]
    d = int(round(math.sqrt(d2)))
    a = lv.copy()
    trace_row = linalg.vec(linalg.identity(d))
    a[0, :] = trace_row
    rhs = np.zeros(d2, dtype=complex)
    rhs[0] = 1.0
    try:
        sol = np.linalg.solve(a, rhs)
    except np.linalg.LinAlgError as exc:
        raise DegenerateSteadyStateError(f"steady-state solve failed: {exc}") from exc
    scale = np.linalg.norm(lv)
    residual = np.linalg.norm(lv @ sol)
    if not np.isfinite(residual) or residual > residual_rtol * max(scale, 1e-300):
        raise DegenerateSteadyStateError(
            f"steady-state residual {residual:.3e} exceeds {residual_rtol:.1e} * ||L||"
        )
    rho = linalg.unvec(sol)
    rho = 0.5 * (rho + rho.conj().T)
    return rho / np.trace(rho).real


def steady_state(
    device: model.DeviceModel,
    drive: model.DriveParams | None = None,
    omega_frame: float | None = None,
) -> np.ndarray:
    """Steady state of the full master equation (dρ/dt -> 0)."""
    lv = model.full_liouvillian(device, drive, omega_frame=omega_frame)
    return steady_state_liouvillian(lv)


def _check_positive(rho: np.ndarray, t: float) -> None:
    lo = np.linalg.eigvalsh(0.5 * (rho + rho.conj().T)).min()
    if lo < POSITIVITY_FLOOR:
        raise PositivityError(f"density matrix eigenvalue {lo:.3e} at t={t:.3e} s", time=t)


def evolve(
    device: model.DeviceModel,
    drive: model.DriveParams | None,
    rho0: np.ndarray,
    sample_times,
    omega_frame: float | None = None,
    check_positivity: bool = True,
) -> Trajectory:
    """Integrate the master equation under a piecewise-constant schedule.

    The drive envelope (``drive.envelope``) is walked segment by segment;
    each (amplitude, phase, dt) propagator is cached, so quantized Gaussian
    envelopes cost one matrix exponential per distinct amplitude level.
    After the schedule ends the drive is off.  ``sample_times`` must be
    sorted and non-negative.
    """
    times = np.asarray(sample_times, dtype=float)
    if times.size and (np.any(np.diff(times) < 0) or times[0] < 0):
        raise ValueError("sample_times must be sorted and non-negative")

    lv_free = model.full_liouvillian(device, None, omega_frame=omega_frame
                                     if omega_frame is not None
                                     else (drive.omega_d if drive else None))
    has_drive = drive is not None and drive.photon_flux > 0
    if has_drive:
        hx, hy = model.drive_quadratures(device, drive)
        lx = -1j * (linalg.spre(hx) - linalg.spost(hx))
        ly = -1j * (linalg.spre(hy) - linalg.spost(hy))
        schedule = drive.envelope
        if schedule is None:
            end = times[-1] if times.size else 0.0
            schedule = PulseSchedule.constant(max(end, 1e-30))
    else:
        schedule = PulseSchedule.constant(max(times[-1], 1e-30) if times.size else 1e-30)

    def segment_lv(seg: PulseSegment) -> np.ndarray:
        if not has_drive or seg.amplitude_scale == 0.0:
            return lv_free
        return lv_free + seg.amplitude_scale * (
            math.cos(seg.phase) * lx + math.sin(seg.phase) * ly
        )

    prop_cache: dict[tuple, np.ndarray] = {}

    def prop(seg_key, lv, dt: float) -> np.ndarray:
        key = (seg_key, round(dt, 15))
        got = prop_cache.get(key)
        if got is None:
            got = linalg.propagator(lv, dt)
            prop_cache[key] = got
        return got

    v = linalg.vec(np.asarray(rho0, dtype=complex))
    traj = Trajectory(times=times)
    t_cursor = 0.0
    sample_idx = 0

    def emit_samples_until(t_target: float, lv, seg_key):
        nonlocal v, t_cursor, sample_idx
        tol = 1e-12 * max(abs(t_target), 1e-6)
        while sample_idx < times.size and times[sample_idx] <= t_target + tol:
            dt = times[sample_idx] - t_cursor
            if dt > 0:
                v = prop(seg_key, lv, dt) @ v
                t_cursor = times[sample_idx]
            rho = linalg.unvec(v)
            if check_positivity:
                _check_positive(rho, t_cursor)
            traj.states.append(rho)
            sample_idx += 1

    for seg in schedule.segments:
        seg_end = t_cursor + seg.duration
        key = (seg.amplitude_scale, seg.phase)
        lv = segment_lv(seg)
        emit_samples_until(seg_end, lv, key)
        if t_cursor < seg_end - 1e-18:
            v = prop(key, lv, seg_end - t_cursor) @ v
            t_cursor = seg_end
    if sample_idx < times.size:
        emit_samples_until(times[-1], lv_free, (0.0, 0.0))
    return traj


def observable_trajectory(
    lv: np.ndarray, rho0: np.ndarray, op: np.ndarray, times
) -> np.ndarray:
    """Real part of tr[op rho(t)] under a constant Liouvillian (spectral path)."""
    spec = linalg.SpectralPropagator(lv)
    vals = spec.observable(linalg.vec(rho0), expectation_weight(op), np.asarray(times, float))
    return vals.real


def ground_state(dims) -> np.ndarray:
    dim = int(np.prod(dims))
    rho = np.zeros((dim, dim), dtype=complex)
    rho[0, 0] = 1.0
    return rho


def excited_state(device: model.DeviceModel, jqf_state: np.ndarray | None = None) -> np.ndarray:
    """Qubit in |1>, ancilla (if any) in its drive-free steady state."""
    q = np.zeros((device.qubit.levels, device.qubit.levels), dtype=complex)
    q[1, 1] = 1.0
    if device.jqf is None:
        return q
    if jqf_state is None:
        jqf_state = _jqf_rest_state(device)
    return np.kron(q, jqf_state)


def _jqf_rest_state(device: model.DeviceModel) -> np.ndarray:
    """Drive-free steady state of the ancilla alone (ground state when cold)."""
    tm = device.jqf
    if tm.gamma_in * tm.n_th == 0:
        rho = np.zeros((tm.levels, tm.levels), dtype=complex)
        rho[0, 0] = 1.0
        return rho
    lv = model.single_transmon_liouvillian(tm, tm.omega, 0.0)
    return steady_state_liouvillian(lv)


def qubit_population_op(device: model.DeviceModel, level: int = 1) -> np.ndarray:
    """Projector onto qubit level ``level`` (identity on the ancilla)."""
    proj = np.zeros((device.qubit.levels, device.qubit.levels), dtype=complex)
    proj[level, level] = 1.0
    return linalg.embed(proj, 0, device.dims)


def qubit_xbasis_op(device: model.DeviceModel) -> np.ndarray:
    """Projector onto (|0> + |1>)/sqrt(2) of the qubit."""
    d = device.qubit.levels
    proj = np.zeros((d, d), dtype=complex)
    proj[0, 0] = proj[1, 1] = proj[0, 1] = proj[1, 0] = 0.5
    return linalg.embed(proj, 0, device.dims)


def convergence_check(
    device: model.DeviceModel,
    drive: model.DriveParams | None,
    observable,
    start_levels: tuple[int, int] | int = (3, 3),
    rtol: float = 0.005,
    max_levels: int = 8,
) -> tuple[tuple[int, int], float]:
    """Grow truncation until ``observable(device, drive)`` is stable to ``rtol``.

    The ancilla truncation is raised first (it is the strongly driven
    subsystem), then the qubit's.  Returns ((qubit_levels, jqf_levels),
    converged value).  Raises TruncationError at ``max_levels``.
    """
    if isinstance(start_levels, int):
        start_levels = (start_levels, start_levels)
    q_levels, f_levels = start_levels
    if q_levels < 2 or f_levels < 2:
        raise ValueError("start_levels must be >= 2")

    def run(ql: int, fl: int) -> float:
        dev = device.replace(qubit=device.qubit.replace(levels=ql))
        if device.jqf is not None:
            dev = dev.replace(jqf=device.jqf.replace(levels=fl))
        return float(observable(dev, drive))

    value = run(q_levels, f_levels)
    if device.jqf is not None:
        while True:
            nxt = run(q_levels, f_levels + 1)
            if abs(nxt - value) <= rtol * max(abs(value), 1e-300):
                break
            value = nxt
            f_levels += 1
            if f_levels >= max_levels:
                raise TruncationError(f"no convergence up to {max_levels} ancilla levels")
    while True:
        nxt = run(q_levels + 1, f_levels)
        if abs(nxt - value) <= rtol * max(abs(value), 1e-300):
            break
        value = nxt
        q_levels += 1
        if q_levels >= max_levels:
            raise TruncationError(f"no convergence up to {max_levels} qubit levels")
    return (q_levels, f_levels), value
