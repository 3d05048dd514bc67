"""Damped nonlinear least squares and the fit models used by the experiments.

Complex traces are fitted on stacked real/imaginary residuals so that
amplitude and phase constrain the parameters jointly.  Every model fit
derives its own initial guesses (peak finding for resonances, an FFT peak
for oscillation frequencies, log-linear regression for decay times) and
accepts explicit overrides.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np
import scipy.optimize

__all__ = [
    "FitResult",
    "least_squares",
    "fit_exponential",
    "fit_damped_sinusoid",
    "fit_linear",
    "fit_rb_decay",
    "fit_reflection_qubit",
    "fit_reflection_resonator",
]


@dataclass
class FitResult:
    """Converged parameters, uncertainties and residual of a named model."""

    model: str
    params: dict[str, float]
    stderr: dict[str, float] | None
    residual_norm: float
    converged: bool
    iterations: int
    message: str = ""

    def __getitem__(self, name: str) -> float:
        return self.params[name]

    def to_json(self) -> str:
        return json.dumps(
            {
                "model": self.model,
                "params": self.params,
                "stderr": self.stderr,
                "residual_norm": self.residual_norm,
                "converged": self.converged,
                "iterations": self.iterations,
            },
            indent=2,
            sort_keys=True,
        )


def _stack_complex(arr: np.ndarray) -> np.ndarray:
    arr = np.asarray(arr)
    if np.iscomplexobj(arr):
        return np.concatenate([arr.real, arr.imag])
    return arr.astype(float)


def least_squares(
    model_fn,
    initial: dict[str, float],
    xdata,
    ydata,
    bounds: dict[str, tuple[float, float]] | None = None,
    model_name: str = "custom",
    max_iter: int = 500,
) -> FitResult:
    """Damped least-squares fit of ``model_fn(x, **params)`` to data.

    Gauss-Newton steps with adaptive diagonal regularization (trust-region
    reflective / Levenberg-Marquardt via scipy) iterate until the relative
    step falls below 1e-10 or the relative residual change below 1e-12.
    Complex data is fitted as stacked real/imaginary residuals.  A singular
    Jacobian is handled by the damping; non-convergence is reported through
    ``converged=False`` rather than an exception.
    """
    names = list(initial)
    x0 = np.array([initial[n] for n in names], dtype=float)
    if not np.all(np.isfinite(x0)):
        raise ValueError("initial parameters must be finite")
    y = _stack_complex(ydata)

    def residuals(p):
        vals = model_fn(xdata, **dict(zip(names, p)))
        return _stack_complex(vals) - y

    if bounds:
        lo = np.array([bounds.get(n, (-np.inf, np.inf))[0] for n in names])
        hi = np.array([bounds.get(n, (-np.inf, np.inf))[1] for n in names])
        if np.any(x0 < lo) or np.any(x0 > hi):
            raise ValueError("initial parameters lie outside the bounds")
        scipy_bounds = (lo, hi)
        method = "trf"
    else:
        scipy_bounds = (-np.inf, np.inf)
        method = "lm" if y.size >= x0.size else "trf"

    # x_scale from the initial magnitudes keeps rad/s rates and second-scale
    # times conditioned in the same solve.
    x_scale = np.where(np.abs(x0) > 0, np.abs(x0), 1.0)
    try:
        sol = scipy.optimize.least_squares(
            residuals,
            x0,
            bounds=scipy_bounds,
            method=method,
            xtol=1e-10,
            ftol=1e-12,
            gtol=None if method == "trf" else 1e-14,
            x_scale=x_scale,
            max_nfev=max_iter * max(1, x0.size),
        )
    except ValueError as exc:
        return FitResult(model_name, dict(initial), None, math.inf, False, 0, str(exc))

    params = dict(zip(names, sol.x.tolist()))
    residual_norm = float(np.linalg.norm(sol.fun))
    converged = bool(sol.success)
    stderr = None
    if converged:
        stderr = _stderr_from_jacobian(sol.jac, sol.fun, names)
    return FitResult(
        model_name,
        params,
        stderr,
        residual_norm,
        converged,
        int(sol.nfev),
        str(sol.message),
    )


def _stderr_from_jacobian(jac: np.ndarray, resid: np.ndarray, names) -> dict[str, float]:
    m, n = jac.shape
    dof = max(m - n, 1)
    s_sq = float(resid @ resid) / dof
    try:
        cov = np.linalg.pinv(jac.T @ jac) * s_sq
        err = np.sqrt(np.clip(np.diag(cov), 0.0, None))
    except np.linalg.LinAlgError:
        err = np.full(n, np.nan)
    return dict(zip(names, err.tolist()))


def _require_points(x, n_params: int) -> np.ndarray:
    x = np.asarray(x)
    if x.size < 2 * n_params:
        raise ValueError(
            f"under-determined fit: {x.size} points for {n_params} parameters"
        )
    return x


# ----------------------------------------------------------------------
# scalar decay models


def _exponential_model(t, a, tau, c):
    return a * np.exp(-np.asarray(t) / tau) + c


def fit_exponential(t, y, initial: dict | None = None) -> FitResult:
    """Fit A exp(-t/T) + C; params {A, T, C}."""
    t = _require_points(t, 3).astype(float)
    y = np.asarray(y, dtype=float)
    guess = {"A": None, "T": None, "C": None}
    if initial:
        guess.update(initial)
    if guess["C"] is None:
        guess["C"] = float(np.mean(y[-max(3, y.size // 10):]))
    if guess["A"] is None:
        guess["A"] = float(y[0] - guess["C"])
    if guess["T"] is None:
        guess["T"] = _decay_time_guess(t, y - guess["C"])
    result = least_squares(
        lambda x, A, T, C: _exponential_model(x, A, T, C),
        {"A": guess["A"], "T": guess["T"], "C": guess["C"]},
        t,
        y,
        model_name="exponential",
    )
    return result


def _decay_time_guess(t: np.ndarray, y0: np.ndarray) -> float:
    mag = np.abs(y0)
    top = mag.max()
    mask = mag > max(top * 1e-3, 1e-30)
    if mask.sum() >= 3 and top > 0:
        slope, _ = np.polyfit(t[mask], np.log(mag[mask]), 1)
        if slope < 0:
            return float(-1.0 / slope)
    return float((t[-1] - t[0]) / 3.0 or 1.0)


def _damped_sinusoid_model(t, a, tau, omega, phi, c):
    t = np.asarray(t)
    return a * np.exp(-t / tau) * np.cos(omega * t + phi) + c


def fit_damped_sinusoid(t, y, initial: dict | None = None) -> FitResult:
    """Fit A exp(-t/T) cos(Omega t + phi) + C; params {A, T, Omega, phi, C}."""
    t = _require_points(t, 5).astype(float)
    y = np.asarray(y, dtype=float)
    guess = dict.fromkeys(("A", "T", "Omega", "phi", "C"))
    if initial:
        guess.update(initial)
    if guess["C"] is None:
        guess["C"] = float(np.mean(y))
    detrended = y - guess["C"]
    if guess["Omega"] is None:
        guess["Omega"] = _fft_peak_angular_frequency(t, detrended)
    if guess["A"] is None or guess["phi"] is None:
        # linear projection onto the cos/sin quadratures at the guessed frequency
        cos_part = np.cos(guess["Omega"] * t)
        sin_part = np.sin(guess["Omega"] * t)
        basis = np.column_stack([cos_part, sin_part])
        coef, *_ = np.linalg.lstsq(basis, detrended, rcond=None)
        amp = float(np.hypot(*coef))
        phi = float(math.atan2(-coef[1], coef[0]))
        if guess["A"] is None:
            guess["A"] = amp if amp > 0 else float(np.abs(detrended).max())
        if guess["phi"] is None:
            guess["phi"] = phi
    if guess["T"] is None:
        guess["T"] = float(t[-1] - t[0]) / 2.0

    return least_squares(
        lambda x, A, T, Omega, phi, C: _damped_sinusoid_model(x, A, T, Omega, phi, C),
        {k: float(guess[k]) for k in ("A", "T", "Omega", "phi", "C")},
        t,
        y,
        model_name="damped_sinusoid",
    )


def _fft_peak_angular_frequency(t: np.ndarray, y: np.ndarray) -> float:
    dt = float(np.median(np.diff(t)))
    n = max(len(t), 256)
    spec = np.abs(np.fft.rfft(y, n=n))
    freqs = np.fft.rfftfreq(n, d=dt)
    spec[0] = 0.0  # drop DC
    idx = int(np.argmax(spec))
    if freqs[idx] <= 0:
        return 2.0 * math.pi / (t[-1] - t[0] + dt)
    return float(2.0 * math.pi * freqs[idx])


def fit_linear(x, y) -> FitResult:
    """Closed-form straight line; params {slope, intercept}."""
    x = _require_points(x, 1).astype(float)
    y = np.asarray(y, dtype=float)
    design = np.column_stack([x, np.ones_like(x)])
    coef, res, *_ = np.linalg.lstsq(design, y, rcond=None)
    pred = design @ coef
    residual = float(np.linalg.norm(pred - y))
    dof = max(x.size - 2, 1)
    s_sq = residual**2 / dof
    cov = np.linalg.pinv(design.T @ design) * s_sq
    stderr = np.sqrt(np.clip(np.diag(cov), 0.0, None))
    return FitResult(
        "linear",
        {"slope": float(coef[0]), "intercept": float(coef[1])},
        {"slope": float(stderr[0]), "intercept": float(stderr[1])},
        residual,
        True,
        1,
    )


def fit_rb_decay(m, survival, initial: dict | None = None) -> FitResult:
    """Fit A p^m + B to sequence-averaged survival; adds r = (1-p)/2.

    Raises ValueError if the converged p falls outside (0, 1].
    """
    m = _require_points(m, 3).astype(float)
    survival = np.asarray(survival, dtype=float)
    guess = dict.fromkeys(("A", "p", "B"))
    if initial:
        guess.update(initial)
    if guess["B"] is None:
        guess["B"] = float(min(survival[-1], 0.95))
    if guess["A"] is None:
        guess["A"] = float(np.clip(survival[0] - guess["B"], 0.05, 1.0))
    if guess["p"] is None:
        guess["p"] = _rb_p_guess(m, survival, guess["A"], guess["B"])
    result = least_squares(
        lambda x, A, p, B: A * np.power(p, np.asarray(x)) + B,
        {"A": guess["A"], "p": guess["p"], "B": guess["B"]},
        m,
        survival,
        bounds={"A": (0.0, 1.5), "p": (1e-9, 1.0), "B": (-0.5, 1.5)},
        model_name="rb_decay",
    )
    p = result.params["p"]
    if result.converged and not 0.0 < p <= 1.0:
        raise ValueError(f"fitted depolarizing parameter p={p} outside (0, 1]")
    result.params["r"] = (1.0 - p) / 2.0
    if result.stderr is not None:
        result.stderr["r"] = result.stderr["p"] / 2.0
    return result


def _rb_p_guess(m, survival, a, b) -> float:
    ratio = np.clip((survival - b) / max(a, 1e-9), 1e-6, None)
    mask = ratio < 1.0
    if mask.sum() >= 2:
        slope, _ = np.polyfit(m[mask], np.log(ratio[mask]), 1)
        return float(np.clip(math.exp(slope), 1e-6, 0.999999))
    return 0.99


# ----------------------------------------------------------------------
# complex reflection models


def _delay_factor(omega, omega_center, phi0, tau):
    return np.exp(1j * (phi0 + (np.asarray(omega) - omega_center) * tau))


def _remove_delay_estimate(freqs: np.ndarray, values: np.ndarray) -> tuple[float, float]:
    """Rough (phi0, tau) from the unwrapped phase at the trace edges."""
    phase = np.unwrap(np.angle(values))
    k = max(3, freqs.size // 10)
    edge_f = np.concatenate([freqs[:k], freqs[-k:]])
    edge_p = np.concatenate([phase[:k], phase[-k:]])
    tau, phi_at_center = np.polyfit(edge_f - freqs.mean(), edge_p, 1)
    return float(phi_at_center), float(tau)


def fit_reflection_qubit(freqs, values, initial: dict | None = None) -> FitResult:
    """Weak-probe qubit reflection with measurement-chain phase terms.

    Model: [1 - gamma_eff / (gamma_2 - i (w - omega_q))] * e^{i(phi0 + (w - w_c) tau)}
    with w_c the center of the frequency grid.  Params
    {omega_q, gamma_eff, gamma_2, phi0, tau}.
    """
    freqs = _require_points(freqs, 5).astype(float)
    values = np.asarray(values, dtype=complex)
    center = float(freqs.mean())

    guess = dict.fromkeys(("omega_q", "gamma_eff", "gamma_2", "phi0", "tau"))
    if initial:
        guess.update(initial)
    phi0_est, tau_est = _remove_delay_estimate(freqs, values)
    if guess["phi0"] is None:
        guess["phi0"] = phi0_est
    if guess["tau"] is None:
        guess["tau"] = tau_est
    flat = values * np.exp(-1j * (guess["phi0"] + (freqs - center) * guess["tau"]))
    depth = np.abs(1.0 - flat)
    idx = int(np.argmax(depth))
    if guess["omega_q"] is None:
        guess["omega_q"] = float(freqs[idx])
    if guess["gamma_2"] is None:
        half = depth >= depth[idx] / 2.0
        width = freqs[half][-1] - freqs[half][0] if half.sum() > 1 else (freqs[1] - freqs[0])
        guess["gamma_2"] = float(max(width / 2.0, (freqs[1] - freqs[0]) / 2.0))
    if guess["gamma_eff"] is None:
        guess["gamma_eff"] = float(depth[idx] * guess["gamma_2"])

    def mdl(w, omega_q, gamma_eff, gamma_2, phi0, tau):
        s11 = 1.0 - gamma_eff / (gamma_2 - 1j * (np.asarray(w) - omega_q))
        return s11 * _delay_factor(w, center, phi0, tau)

    return least_squares(
        mdl,
        {k: float(guess[k]) for k in ("omega_q", "gamma_eff", "gamma_2", "phi0", "tau")},
        freqs,
        values,
        model_name="reflection_qubit",
    )


# The two readout dips only pin kappa_in and p_th independently when they
# are actually resolved; the nominal criterion kappa_ex + kappa_in <= 2*chi
# is applied with a 1.25 resolvability margin so that marginally resolved
# doublets remain fittable.
_RESOLVABILITY_MARGIN = 1.25


def fit_reflection_resonator(
    freqs,
    values,
    initial: dict | None = None,
    allow_unresolved: bool = False,
) -> FitResult:
    """Thermally mixed two-dip resonator reflection with phase terms.

    Params {omega_r, kappa_ex, kappa_in, chi, p_th, phi0, tau}.  Refuses to
    free both kappa_in and p_th when the estimated linewidth exceeds the
    dispersive splitting beyond the resolvability margin (override with
    ``allow_unresolved=True`` or by fixing one of them via ``initial``).
    """
    freqs = _require_points(freqs, 7).astype(float)
    values = np.asarray(values, dtype=complex)
    center = float(freqs.mean())

    guess = dict.fromkeys(("omega_r", "kappa_ex", "kappa_in", "chi", "p_th", "phi0", "tau"))
    if initial:
        guess.update(initial)
    phi0_est, tau_est = _remove_delay_estimate(freqs, values)
    if guess["phi0"] is None:
        guess["phi0"] = phi0_est
    if guess["tau"] is None:
        guess["tau"] = tau_est
    flat = values * np.exp(-1j * (guess["phi0"] + (freqs - center) * guess["tau"]))
    amp = np.abs(flat)
    dips = _find_dips(freqs, amp)
    main = dips[0]
    if guess["kappa_ex"] is None or guess["chi"] is None:
        width = _dip_width(freqs, amp, main)
        if guess["kappa_ex"] is None:
            guess["kappa_ex"] = 0.9 * width
        if guess["chi"] is None:
            guess["chi"] = (main - dips[1]) / 2.0 if len(dips) > 1 else width
    if guess["omega_r"] is None:
        guess["omega_r"] = float(main - guess["chi"])
    if guess["kappa_in"] is None:
        guess["kappa_in"] = 0.05 * guess["kappa_ex"]
    if guess["p_th"] is None:
        guess["p_th"] = 0.05

    linewidth = guess["kappa_ex"] + guess["kappa_in"]
    if (
        not allow_unresolved
        and (initial is None or not {"kappa_in", "p_th"} & set(initial))
        and linewidth > _RESOLVABILITY_MARGIN * 2.0 * abs(guess["chi"])
    ):
        raise ValueError(
            "kappa_in and p_th are not independently identifiable: "
            f"kappa_ex + kappa_in = {linewidth:.3e} exceeds the dispersive "
            f"splitting 2|chi| = {2 * abs(guess['chi']):.3e}; fix one of them "
            "or pass allow_unresolved=True"
        )

    def mdl(w, omega_r, kappa_ex, kappa_in, chi, p_th, phi0, tau):
        w = np.asarray(w)
        ground = -(((kappa_ex - kappa_in) / 2.0) + 1j * (w - omega_r - chi)) / (
            ((kappa_ex + kappa_in) / 2.0) - 1j * (w - omega_r - chi)
        )
        excited = -(((kappa_ex - kappa_in) / 2.0) + 1j * (w - omega_r + chi)) / (
            ((kappa_ex + kappa_in) / 2.0) - 1j * (w - omega_r + chi)
        )
        s11 = (1.0 - p_th) * ground + p_th * excited
        return s11 * _delay_factor(w, center, phi0, tau)

    span = freqs[-1] - freqs[0]
    return least_squares(
        mdl,
        {k: float(guess[k]) for k in ("omega_r", "kappa_ex", "kappa_in", "chi", "p_th", "phi0", "tau")},
        freqs,
        values,
        bounds={
            "kappa_ex": (0.0, np.inf),
            "kappa_in": (0.0, np.inf),
            "p_th": (0.0, 0.5),
            "omega_r": (freqs[0] - span, freqs[-1] + span),
        },
        model_name="reflection_resonator",
    )


def _find_dips(freqs: np.ndarray, amp: np.ndarray) -> list[float]:
    """Frequencies of local amplitude minima, deepest first."""
    interior = np.flatnonzero((amp[1:-1] < amp[:-2]) & (amp[1:-1] <= amp[2:])) + 1
    if interior.size == 0:
        return [float(freqs[int(np.argmin(amp))])]
    order = interior[np.argsort(amp[interior])]
    return [float(freqs[i]) for i in order[:2]]


def _dip_width(freqs: np.ndarray, amp: np.ndarray, dip_freq: float) -> float:
    idx = int(np.argmin(np.abs(freqs - dip_freq)))
    baseline = np.median(amp)
    half = baseline - (baseline - amp[idx]) / 2.0
    lo = idx
    while lo > 0 and amp[lo] < half:
        lo -= 1
    hi = idx
    while hi < amp.size - 1 and amp[hi] < half:
        hi += 1
    width = freqs[hi] - freqs[lo]
    return float(max(width, freqs[1] - freqs[0]))
