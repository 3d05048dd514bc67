"""Physical model: device parameters, waveguide-mediated rates, Liouvillians.

All frequencies and rates are stored as angular quantities (rad/s).
Configuration files carry /2pi values in Hz and are converted on load.

The composite Hilbert space is ordered (qubit, filter); the filter ancilla
sits a distance ``d_frac`` qubit wavelengths from the open waveguide end
while the qubit sits at the end itself, so every propagation phase reduces
to theta(omega) = 2*pi*d_frac*(omega/omega_q).
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import linalg

TWO_PI = 2.0 * math.pi

__all__ = [
    "TransmonParams",
    "WaveguideGeometry",
    "DriveParams",
    "CouplingRates",
    "BrightDarkModes",
    "DeviceModel",
    "coupling_rates",
    "bright_dark_modes",
    "system_hamiltonian",
    "drive_hamiltonian",
    "drive_quadratures",
    "effective_coupling_hamiltonian",
    "full_liouvillian",
    "single_transmon_liouvillian",
    "two_level_approx_liouvillian",
]


@dataclass(frozen=True)
class TransmonParams:
    """One transmon: frequency, anharmonicity, decay rates, thermal quanta.

    ``omega`` and ``alpha`` are angular (rad/s); ``alpha <= 0`` for a
    transmon.  ``n_th`` is the thermal quanta of the intrinsic loss channel
    only; the waveguide is taken to be cold.
    """

    omega: float
    alpha: float = 0.0
    gamma_ex: float = 0.0
    gamma_in: float = 0.0
    gamma_phi: float = 0.0
    n_th: float = 0.0
    levels: int = 3

    def __post_init__(self):
        if self.omega <= 0:
            raise ValueError("omega must be positive")
        if self.alpha > 0:
            raise ValueError("alpha must be <= 0 for a transmon")
        if abs(self.alpha) >= self.omega:
            raise ValueError("|alpha| must be smaller than omega")
        for name in ("gamma_ex", "gamma_in", "gamma_phi", "n_th"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        if self.levels < 2:
            raise ValueError("levels must be >= 2")

    def detuned(self, delta: float) -> "TransmonParams":
        """Copy with the frequency shifted by ``delta`` (rad/s)."""
        return replace(self, omega=self.omega + delta)

    def replace(self, **kwargs) -> "TransmonParams":
        return replace(self, **kwargs)


@dataclass(frozen=True)
class WaveguideGeometry:
    """Qubit-filter separation in qubit wavelengths, plus the reference frequency.

    ``phase(omega)`` is the propagation phase omega*d with unit velocity,
    i.e. 2*pi*d_frac*(omega/omega_ref); d_frac = 0.5 is exactly the
    half-wavelength condition at the reference frequency.
    """

    d_frac: float
    omega_ref: float

    def __post_init__(self):
        if self.d_frac <= 0:
            raise ValueError("d_frac must be positive")
        if self.omega_ref <= 0:
            raise ValueError("omega_ref must be positive")

    def phase(self, omega: float) -> float:
        return TWO_PI * self.d_frac * (omega / self.omega_ref)


@dataclass(frozen=True)
class DriveParams:
    """Coherent drive: frequency, photon flux, optional pulse envelope.

    ``envelope`` is a ``dynamics.PulseSchedule`` (or None for a constant
    drive); its per-segment amplitude scale multiplies the field amplitude,
    so the instantaneous flux is ``photon_flux * scale**2``.
    """

    omega_d: float
    photon_flux: float
    envelope: object | None = None

    def __post_init__(self):
        if self.photon_flux < 0:
            raise ValueError("photon_flux must be >= 0")

    def replace(self, **kwargs) -> "DriveParams":
        return replace(self, **kwargs)


@dataclass(frozen=True)
class CouplingRates:
    """Waveguide-mediated exchange coupling and radiative decay rates."""

    coupling_j: complex
    gamma_qq: float
    gamma_ff: float
    gamma_qf: complex
    gamma_bright: float
    gamma_dark: float


@dataclass(frozen=True)
class BrightDarkModes:
    """Normalized eigenmodes of the collective 2x2 decay matrix."""

    bright_coeffs: tuple[complex, complex]
    dark_coeffs: tuple[complex, complex]
    gamma_bright: float
    gamma_dark: float
    degenerate: bool = False


@dataclass(frozen=True)
class DeviceModel:
    """Qubit plus optional filter ancilla and readout resonator."""

    qubit: TransmonParams
    jqf: TransmonParams | None = None
    geometry: WaveguideGeometry | None = None
    resonator: object | None = None  # spectra.ResonatorParams

    def __post_init__(self):
        if self.jqf is not None and self.geometry is None:
            raise ValueError("geometry is required when the filter ancilla is present")

    @property
    def dims(self) -> tuple[int, ...]:
        if self.jqf is None:
            return (self.qubit.levels,)
        return (self.qubit.levels, self.jqf.levels)

    @property
    def dim(self) -> int:
        return int(np.prod(self.dims))

    @property
    def transmons(self) -> tuple[TransmonParams, ...]:
        return (self.qubit,) if self.jqf is None else (self.qubit, self.jqf)

    def lowering(self, slot: int) -> np.ndarray:
        """Embedded annihilation operator of subsystem ``slot``."""
        return linalg.embed(linalg.annihilation(self.dims[slot]), slot, self.dims)

    def with_jqf_detuning(self, delta: float) -> "DeviceModel":
        if self.jqf is None:
            raise ValueError("device has no filter ancilla to detune")
        return replace(self, jqf=self.jqf.detuned(delta - (self.jqf.omega - self.qubit.omega)))

    def replace(self, **kwargs) -> "DeviceModel":
        return replace(self, **kwargs)


def coupling_rates(
    qubit: TransmonParams, jqf: TransmonParams, geometry: WaveguideGeometry
) -> CouplingRates:
    """Exchange coupling J and the individual/correlated radiative decay rates.

    With the qubit at the open end and the ancilla a phase theta_f away::

        J        = sqrt(g_q g_f)/2 * (e^{i th_f} - e^{-i th_q}) / (2i)
        gamma_qq = g_q
        gamma_ff = g_f cos^2(th_f)
        gamma_qf = sqrt(g_q g_f) * (e^{i th_f} + e^{-i th_q}) / 2

    and the bright/dark rates are the eigenvalues of the Hermitian matrix
    [[gamma_qq, gamma_qf], [gamma_qf*, gamma_ff]].
    """
    th_q = geometry.phase(qubit.omega)
    th_f = geometry.phase(jqf.omega)
    root = math.sqrt(qubit.gamma_ex * jqf.gamma_ex)
    j = (root / 2.0) * (cmath.exp(1j * th_f) - cmath.exp(-1j * th_q)) / 2j
    gamma_qq = qubit.gamma_ex
    gamma_ff = jqf.gamma_ex * math.cos(th_f) ** 2
    gamma_qf = root * (cmath.exp(1j * th_f) + cmath.exp(-1j * th_q)) / 2.0
    half_sum = 0.5 * (gamma_qq + gamma_ff)
    split = math.hypot(0.5 * (gamma_qq - gamma_ff), abs(gamma_qf))
    return CouplingRates(
        coupling_j=j,
        gamma_qq=gamma_qq,
        gamma_ff=gamma_ff,
        gamma_qf=gamma_qf,
        gamma_bright=half_sum + split,
        gamma_dark=half_sum - split,
    )


def bright_dark_modes(rates: CouplingRates) -> BrightDarkModes:
    """Collective-decay eigenmodes b_B, b_D of the 2x2 decay matrix.

    The mode with the larger eigenvalue is bright.  Requires a physical
    (positive semidefinite) decay matrix; a slightly detuned ancilla can
    push |gamma_qf|^2 marginally above gamma_qq*gamma_ff, which is rejected
    here beyond a small relative tolerance.
    """
    scale = max(rates.gamma_qq, rates.gamma_ff, 1e-300)
    defect = abs(rates.gamma_qf) ** 2 - rates.gamma_qq * rates.gamma_ff
    if defect > 1e-9 * scale**2:
        raise ValueError(
            "decay matrix is not positive semidefinite "
            f"(|gamma_qf|^2 - gamma_qq*gamma_ff = {defect:.3e})"
        )
    if abs(rates.gamma_qf) <= 1e-15 * scale:
        if abs(rates.gamma_qq - rates.gamma_ff) <= 1e-12 * scale:
            # fully degenerate: any basis diagonalizes; report the canonical one
            return BrightDarkModes(
                (1.0, 0.0), (0.0, 1.0), rates.gamma_qq, rates.gamma_ff, degenerate=True
            )
        if rates.gamma_qq >= rates.gamma_ff:
            return BrightDarkModes((1.0, 0.0), (0.0, 1.0), rates.gamma_qq, rates.gamma_ff)
        return BrightDarkModes((0.0, 1.0), (1.0, 0.0), rates.gamma_ff, rates.gamma_qq)

    def mode(gamma_mode: float) -> tuple[complex, complex]:
        cq = gamma_mode - rates.gamma_ff
        cf = rates.gamma_qf
        norm = math.sqrt(abs(cq) ** 2 + abs(cf) ** 2)
        return (cq / norm, cf / norm)

    return BrightDarkModes(
        bright_coeffs=mode(rates.gamma_bright),
        dark_coeffs=mode(rates.gamma_dark),
        gamma_bright=rates.gamma_bright,
        gamma_dark=rates.gamma_dark,
    )


def system_hamiltonian(device: DeviceModel, omega_d: float) -> np.ndarray:
    """Transmon Hamiltonian in the frame rotating at ``omega_d``.

    Sum over transmons of (omega_n - omega_d) b+b + (alpha_n/2) b+^2 b^2.
    """
    dims = device.dims
    h = np.zeros((device.dim, device.dim), dtype=complex)
    for slot, tm in enumerate(device.transmons):
        b = device.lowering(slot)
        n_op = b.conj().T @ b
        h += (tm.omega - omega_d) * n_op
        h += 0.5 * tm.alpha * (b.conj().T @ b.conj().T @ b @ b)
    return h


def drive_quadratures(device: DeviceModel, drive: DriveParams) -> tuple[np.ndarray, np.ndarray]:
    """In-phase and quadrature drive Hamiltonians at unit amplitude scale.

    The drive with field phase phi is cos(phi)*HX + sin(phi)*HY where
    HX = sum_n c_n sqrt(g_n ndot) (b_n + b_n+) and HY uses i(b_n - b_n+).
    The qubit geometric factor c_q is 1 (it sits at the open end); the
    ancilla factor is cos(theta(omega_d)).
    """
    hx = np.zeros((device.dim, device.dim), dtype=complex)
    hy = np.zeros_like(hx)
    amps = [math.sqrt(device.qubit.gamma_ex * drive.photon_flux)]
    if device.jqf is not None:
        c_f = math.cos(device.geometry.phase(drive.omega_d))
        amps.append(math.sqrt(device.jqf.gamma_ex * drive.photon_flux) * c_f)
    for slot, amp in enumerate(amps):
        b = device.lowering(slot)
        hx += amp * (b + b.conj().T)
        hy += amp * 1j * (b - b.conj().T)
    return hx, hy


def drive_hamiltonian(
    device: DeviceModel,
    drive: DriveParams,
    amplitude_scale: float = 1.0,
    phase: float = 0.0,
) -> np.ndarray:
    """Coherent-drive Hamiltonian for one constant-amplitude segment."""
    hx, hy = drive_quadratures(device, drive)
    return amplitude_scale * (math.cos(phase) * hx + math.sin(phase) * hy)


def effective_coupling_hamiltonian(device: DeviceModel) -> np.ndarray:
    """Waveguide-mediated exchange J b_q+ b_f + J* b_f+ b_q (zero without ancilla)."""
    if device.jqf is None:
        return np.zeros((device.dim, device.dim), dtype=complex)
    rates = coupling_rates(device.qubit, device.jqf, device.geometry)
    b_q = device.lowering(0)
    b_f = device.lowering(1)
    j = rates.coupling_j
    return j * (b_q.conj().T @ b_f) + np.conj(j) * (b_f.conj().T @ b_q)


def _intrinsic_dissipators(device: DeviceModel) -> np.ndarray:
    """Intrinsic loss, thermal excitation, and pure dephasing of each transmon.

    The dephasing term is gamma_phi D(b+b), under which the 0-1 coherence
    of a two-level transmon decays at gamma_1/2 + gamma_phi/2; the analytic
    reflection model uses the same total dephasing rate.
    """
    dim = device.dim
    out = np.zeros((dim * dim, dim * dim), dtype=complex)
    for slot, tm in enumerate(device.transmons):
        b = device.lowering(slot)
        if tm.gamma_in > 0:
            out += tm.gamma_in * (1.0 + tm.n_th) * linalg.dissipator_matrix(b)
            if tm.n_th > 0:
                out += tm.gamma_in * tm.n_th * linalg.dissipator_matrix(b.conj().T)
        if tm.gamma_phi > 0:
            out += tm.gamma_phi * linalg.dissipator_matrix(b.conj().T @ b)
    return out


def full_liouvillian(
    device: DeviceModel,
    drive: DriveParams | None = None,
    amplitude_scale: float = 1.0,
    phase: float = 0.0,
    omega_frame: float | None = None,
) -> np.ndarray:
    """Generator of the composite qubit(+ancilla) master equation.

    Unitary part: system + drive + exchange Hamiltonians in the rotating
    frame (the drive frequency if a drive is given, else ``omega_frame``,
    else the qubit frequency).  Radiative part: the 2x2 matrix of
    individual and correlated decay rates acting through correlated
    dissipators.  Intrinsic part: per-transmon loss/thermal/dephasing.
    """
    if omega_frame is None:
        omega_frame = drive.omega_d if drive is not None else device.qubit.omega
    h = system_hamiltonian(device, omega_frame)
    if drive is not None and drive.photon_flux > 0 and amplitude_scale != 0.0:
        h = h + drive_hamiltonian(device, drive, amplitude_scale, phase)
    lv = np.zeros((device.dim**2, device.dim**2), dtype=complex)

    b_q = device.lowering(0)
    if device.jqf is None:
        if device.qubit.gamma_ex > 0:
            lv += device.qubit.gamma_ex * linalg.dissipator_matrix(b_q)
    else:
        h = h + effective_coupling_hamiltonian(device)
        rates = coupling_rates(device.qubit, device.jqf, device.geometry)
        b_f = device.lowering(1)
        lv += rates.gamma_qq * linalg.dissipator_matrix(b_q, b_q)
        lv += rates.gamma_ff * linalg.dissipator_matrix(b_f, b_f)
        lv += rates.gamma_qf * linalg.dissipator_matrix(b_q, b_f)
        lv += np.conj(rates.gamma_qf) * linalg.dissipator_matrix(b_f, b_q)

    lv += linalg.commutator_superop(h)
    lv += _intrinsic_dissipators(device)
    return lv


def single_transmon_liouvillian(
    transmon: TransmonParams,
    omega_d: float,
    photon_flux: float,
    coupling_cos: float = 1.0,
) -> np.ndarray:
    """Master-equation generator for one transmon on the semi-infinite line.

    ``coupling_cos`` is the geometric factor cos(omega_n r_n) of the
    transmon's position: 1 at the open end, cos(theta(omega_f)) for a
    transmon a distance d from it.  It scales the radiative decay by its
    square and the drive amplitude linearly; the drive coefficient is held
    at the transmon frequency for swept-probe spectra.
    """
    b = linalg.annihilation(transmon.levels)
    n_op = b.conj().T @ b
    h = (transmon.omega - omega_d) * n_op
    h += 0.5 * transmon.alpha * (b.conj().T @ b.conj().T @ b @ b)
    if photon_flux > 0:
        amp = math.sqrt(transmon.gamma_ex * photon_flux) * coupling_cos
        h = h + amp * (b + b.conj().T)
    lv = linalg.commutator_superop(h)
    gamma_rad = transmon.gamma_ex * coupling_cos**2
    if gamma_rad > 0:
        lv += gamma_rad * linalg.dissipator_matrix(b)
    if transmon.gamma_in > 0:
        lv += transmon.gamma_in * (1.0 + transmon.n_th) * linalg.dissipator_matrix(b)
        if transmon.n_th > 0:
            lv += transmon.gamma_in * transmon.n_th * linalg.dissipator_matrix(b.conj().T)
    if transmon.gamma_phi > 0:
        lv += transmon.gamma_phi * linalg.dissipator_matrix(n_op)
    return lv


def two_level_approx_liouvillian(device: DeviceModel, drive: DriveParams) -> np.ndarray:
    """Secular-approximation generator valid for the ideal resonant geometry.

    Both transmons are treated as two-level systems at d = lambda_q/2 with
    omega_f = omega_q.  The single collapse operator is
    sqrt(g_f) s_f - sqrt(g_q) (1 + s_z^f) s_q and the drive is
    -(Omega_f/2) s_x^f + (Omega_q/2) (1 + s_z^f) s_x^q, which encodes that
    the qubit only couples to the line while the ancilla is excited.
    """
    if device.jqf is None:
        raise ValueError("approximative model requires the filter ancilla")
    if device.qubit.levels != 2 or device.jqf.levels != 2:
        raise ValueError("approximative model is defined for two-level transmons")
    if abs(device.jqf.omega - device.qubit.omega) > 1e-9 * device.qubit.omega:
        raise ValueError("approximative model requires omega_f = omega_q")
    if abs(device.geometry.d_frac - 0.5) > 1e-12:
        raise ValueError("approximative model requires d = lambda_q/2")
    if abs(drive.omega_d - device.qubit.omega) > 1e-9 * device.qubit.omega:
        raise ValueError("approximative model requires a resonant drive")

    dims = (2, 2)
    s_q = device.lowering(0)
    s_f = device.lowering(1)
    sx_q = s_q + s_q.conj().T
    sx_f = s_f + s_f.conj().T
    sz_f = linalg.embed(np.diag([-1.0, 1.0]).astype(complex), 1, dims)
    one = linalg.identity(4)

    omega_q = 2.0 * math.sqrt(device.qubit.gamma_ex * drive.photon_flux)
    omega_f = 2.0 * math.sqrt(device.jqf.gamma_ex * drive.photon_flux)
    h = -0.5 * omega_f * sx_f + 0.5 * omega_q * ((one + sz_f) @ sx_q)

    collapse = math.sqrt(device.jqf.gamma_ex) * s_f - math.sqrt(device.qubit.gamma_ex) * (
        (one + sz_f) @ s_q
    )
    lv = linalg.commutator_superop(h) + linalg.dissipator_matrix(collapse)
    lv += _intrinsic_dissipators(device)
    return lv
