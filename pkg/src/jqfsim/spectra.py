"""Reflection coefficients and power conversions for the control line.

The probe line is reflection-only: a transmon at distance r from the open
end responds with S11(omega) = 1 - i sqrt(gamma_ex/ndot) cos(omega_n r)
<b>_ss, evaluated on the steady state of the single-transmon master
equation at the probe parameters.  Powers are expressed in dBm at the
package boundary and as photon flux (photons/s) internally.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import dynamics, linalg, model

HBAR = 1.054571817e-34  # J s

__all__ = [
    "HBAR",
    "ResonatorParams",
    "ComplexTrace",
    "photon_flux_from_dbm",
    "dbm_from_photon_flux",
    "single_photon_power_dbm",
    "reflection_numeric",
    "reflection_qubit_analytic",
    "reflection_qubit_weak_probe",
    "resonator_reflection_bare",
    "resonator_reflection",
    "effective_rate_correction",
    "sweep_reflection_numeric",
    "sweep_resonator_reflection",
]


@dataclass(frozen=True)
class ResonatorParams:
    """Readout resonator with a qubit-state dependent dispersive shift.

    The resonance sits at omega_r + chi with the qubit in its ground state
    and omega_r - chi in the excited state; ``chi`` is signed.
    """

    omega_r: float
    kappa_ex: float
    kappa_in: float
    chi: float

    def __post_init__(self):
        if self.kappa_ex < 0 or self.kappa_in < 0:
            raise ValueError("kappa_ex and kappa_in must be >= 0")


@dataclass(frozen=True)
class ComplexTrace:
    """Complex response sampled on a strictly increasing frequency grid (rad/s)."""

    frequencies: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        freqs = np.asarray(self.frequencies, dtype=float)
        vals = np.asarray(self.values, dtype=complex)
        if freqs.shape != vals.shape:
            raise ValueError("frequencies and values must have equal length")
        if freqs.size > 1 and np.any(np.diff(freqs) <= 0):
            raise ValueError("frequencies must be strictly increasing")
        object.__setattr__(self, "frequencies", freqs)
        object.__setattr__(self, "values", vals)

    def columns(self) -> dict[str, np.ndarray]:
        """CSV layout: freq_hz, re, im, amp, phase_rad."""
        return {
            "freq_hz": self.frequencies / (2.0 * math.pi),
            "re": self.values.real,
            "im": self.values.imag,
            "amp": np.abs(self.values),
            "phase_rad": np.angle(self.values),
        }


def photon_flux_from_dbm(power_dbm: float, omega: float) -> float:
    """Photon flux ndot = P / (hbar omega) for a power in dBm."""
    if omega <= 0:
        raise ValueError("omega must be positive")
    watts = 1e-3 * 10.0 ** (power_dbm / 10.0)
    return watts / (HBAR * omega)


def dbm_from_photon_flux(photon_flux: float, omega: float) -> float:
    """Inverse of :func:`photon_flux_from_dbm`."""
    if photon_flux <= 0:
        raise ValueError("photon_flux must be positive")
    watts = photon_flux * HBAR * omega
    return 10.0 * math.log10(watts / 1e-3)


def single_photon_power_dbm(omega: float, gamma_ex: float, gamma_in: float = 0.0) -> float:
    """Power that would hold one photon in the equivalently coupled linear mode.

    hbar omega (gamma_ex + gamma_in)^2 / (4 gamma_ex), in dBm.
    """
    if gamma_ex <= 0:
        raise ValueError("gamma_ex must be positive")
    watts = HBAR * omega * (gamma_ex + gamma_in) ** 2 / (4.0 * gamma_ex)
    return 10.0 * math.log10(watts / 1e-3)


def reflection_numeric(
    transmon: model.TransmonParams,
    omega_probe: float,
    photon_flux: float,
    geometry: model.WaveguideGeometry | None = None,
) -> complex:
    """S11 of one transmon from the steady state of its master equation.

    ``geometry=None`` places the transmon at the open end (geometric factor
    1, the qubit); with a geometry the factor is cos(theta(omega_n)) (the
    filter ancilla at distance d).  The drive coefficient is held at the
    transmon frequency across the probe sweep.
    """
    if photon_flux <= 0:
        raise ValueError("photon_flux must be positive")
    c = 1.0 if geometry is None else math.cos(geometry.phase(transmon.omega))
    lv = model.single_transmon_liouvillian(transmon, omega_probe, photon_flux, coupling_cos=c)
    rho = dynamics.steady_state_liouvillian(lv)
    b = linalg.annihilation(transmon.levels)
    b_ss = np.trace(b @ rho)
    return complex(1.0 - 1j * math.sqrt(transmon.gamma_ex / photon_flux) * c * b_ss)


def _two_level_rates(params: model.TransmonParams) -> tuple[float, float, float]:
    """(n_eff, gamma_1, gamma_2) of the two-level reduction.

    gamma_2 carries the gamma_phi/2 coherence contribution of the
    gamma_phi D(b+b) dephasing term, keeping this closed form exact for
    the two-level master equation.
    """
    if params.gamma_ex + params.gamma_in > 0:
        n_eff = params.gamma_in * params.n_th / (params.gamma_ex + params.gamma_in)
    else:
        n_eff = 0.0
    gamma_1 = params.gamma_ex + (2.0 * params.n_th + 1.0) * params.gamma_in
    gamma_2 = 0.5 * gamma_1 + 0.5 * params.gamma_phi
    return n_eff, gamma_1, gamma_2


def reflection_qubit_analytic(
    params: model.TransmonParams, omega_probe: float, photon_flux: float
) -> complex:
    """Closed-form two-level S11 including probe-power saturation.

    S11 = 1 - g_ex / ((2 n_eff + 1) g_2) * (1 + i d/g_2)
              / (1 + (d/g_2)^2 + 4 g_ex ndot / (g_1 g_2)),  d = omega - omega_q.
    """
    n_eff, gamma_1, gamma_2 = _two_level_rates(params)
    delta = (omega_probe - params.omega) / gamma_2
    saturation = 4.0 * params.gamma_ex * photon_flux / (gamma_1 * gamma_2)
    num = 1.0 + 1j * delta
    den = 1.0 + delta**2 + saturation
    return complex(1.0 - params.gamma_ex / ((2.0 * n_eff + 1.0) * gamma_2) * num / den)


def reflection_qubit_weak_probe(params: model.TransmonParams, omega_probe: float) -> complex:
    """Weak-probe limit: S11 = 1 - gamma_eff / (gamma_2 - i (omega - omega_q))."""
    n_eff, _, gamma_2 = _two_level_rates(params)
    gamma_eff = params.gamma_ex / (2.0 * n_eff + 1.0)
    return complex(1.0 - gamma_eff / (gamma_2 - 1j * (omega_probe - params.omega)))


def resonator_reflection_bare(
    omega: float, omega_r: float, kappa_ex: float, kappa_in: float
) -> complex:
    """One-port resonator reflection at a fixed resonance frequency."""
    delta = omega - omega_r
    return complex(
        -((kappa_ex - kappa_in) / 2.0 + 1j * delta)
        / ((kappa_ex + kappa_in) / 2.0 - 1j * delta)
    )


def resonator_reflection(res: ResonatorParams, p_th: float, omega_probe: float) -> complex:
    """Thermally mixed dispersive readout spectrum.

    The qubit hops between ground and excited during the (slow) measurement,
    so the trace is the classical mixture
    (1 - p) S11(omega_r + chi) + p S11(omega_r - chi).
    """
    if not 0.0 <= p_th <= 1.0:
        raise ValueError("p_th must lie in [0, 1]")
    ground = resonator_reflection_bare(omega_probe, res.omega_r + res.chi, res.kappa_ex, res.kappa_in)
    excited = resonator_reflection_bare(omega_probe, res.omega_r - res.chi, res.kappa_ex, res.kappa_in)
    return complex((1.0 - p_th) * ground + p_th * excited)


def effective_rate_correction(p_th: float, gamma_eff: float) -> float:
    """Undo the thermal reduction of a fitted coupling rate.

    n_eff = p/(1-2p) and gamma_ex = (2 n_eff + 1) gamma_eff; valid for
    thermal populations below one half.
    """
    if not 0.0 <= p_th < 0.5:
        raise ValueError("p_th must lie in [0, 0.5)")
    n_eff = p_th / (1.0 - 2.0 * p_th)
    return (2.0 * n_eff + 1.0) * gamma_eff


def sweep_reflection_numeric(
    transmon: model.TransmonParams,
    omegas,
    photon_flux: float,
    geometry: model.WaveguideGeometry | None = None,
) -> ComplexTrace:
    omegas = np.asarray(omegas, dtype=float)
    vals = [reflection_numeric(transmon, w, photon_flux, geometry) for w in omegas]
    return ComplexTrace(omegas, np.array(vals))


def sweep_resonator_reflection(res: ResonatorParams, p_th: float, omegas) -> ComplexTrace:
    omegas = np.asarray(omegas, dtype=float)
    vals = [resonator_reflection(res, p_th, w) for w in omegas]
    return ComplexTrace(omegas, np.array(vals))
