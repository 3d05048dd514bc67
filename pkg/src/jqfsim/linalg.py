"""Dense operator and superoperator algebra on small multi-transmon Hilbert spaces.

Operators are plain complex ndarrays.  A composite space is described by a
list of per-subsystem level counts ``dims`` (subsystem 0 leftmost in the
Kronecker order).  Density matrices are vectorized by column stacking,
``vec(rho) = rho.reshape(-1, order="F")``, so that
``vec(A @ X @ B) == kron(B.T, A) @ vec(X)``.
Every superoperator in this package follows that convention; changing it
silently breaks all of them.
"""

from __future__ import annotations

import numpy as np
from scipy.linalg import expm as _expm

from .errors import DegenerateSteadyStateError

__all__ = [
    "annihilation",
    "identity",
    "embed",
    "vec",
    "unvec",
    "spre",
    "spost",
    "commutator_superop",
    "dissipator_matrix",
    "propagator",
    "ptrace",
    "SpectralPropagator",
    "trace_preservation_defect",
    "assert_density_matrix",
]


def annihilation(levels: int) -> np.ndarray:
    """Truncated ladder lowering operator: entries sqrt(k) at (k-1, k)."""
    if levels < 2:
        raise ValueError(f"annihilation operator needs at least 2 levels, got {levels}")
    return np.diag(np.sqrt(np.arange(1, levels, dtype=float)), 1).astype(complex)


def identity(dim: int) -> np.ndarray:
    return np.eye(dim, dtype=complex)


def embed(op: np.ndarray, slot: int, dims: list[int] | tuple[int, ...]) -> np.ndarray:
    """Tensor ``op`` into the composite space at position ``slot``.

    Returns I ⊗ ... ⊗ op ⊗ ... ⊗ I with identities on every other subsystem.
    """
    if not 0 <= slot < len(dims):
        raise ValueError(f"slot {slot} out of range for {len(dims)} subsystems")
    if op.shape != (dims[slot], dims[slot]):
        raise ValueError(
            f"operator shape {op.shape} does not match dims[{slot}]={dims[slot]}"
        )
    out = np.array([[1.0 + 0j]])
    for k, d in enumerate(dims):
        out = np.kron(out, op if k == slot else identity(d))
    return out


def vec(rho: np.ndarray) -> np.ndarray:
    """Column-stack a matrix into a vector."""
    return rho.reshape(-1, order="F")


def unvec(v: np.ndarray) -> np.ndarray:
    """Inverse of :func:`vec`."""
    d = int(round(np.sqrt(v.size)))
    if d * d != v.size:
        raise ValueError(f"vector of length {v.size} is not a vectorized square matrix")
    return v.reshape((d, d), order="F")


def spre(a: np.ndarray) -> np.ndarray:
    """Superoperator of left multiplication: vec(a @ rho)."""
    d = a.shape[0]
    return np.kron(identity(d), a)


def spost(a: np.ndarray) -> np.ndarray:
    """Superoperator of right multiplication: vec(rho @ a)."""
    d = a.shape[0]
    return np.kron(a.T, identity(d))


def commutator_superop(h: np.ndarray, atol: float = 1e-10) -> np.ndarray:
    """Superoperator of -i[H, rho] for a Hermitian H."""
    defect = np.abs(h - h.conj().T).max() if h.size else 0.0
    if defect > atol:
        raise ValueError(f"Hamiltonian is not Hermitian (max |H - H^+| = {defect:.3e})")
    return -1j * (spre(h) - spost(h))


def dissipator_matrix(a: np.ndarray, b: np.ndarray | None = None) -> np.ndarray:
    """Superoperator of the (possibly correlated) decay term.

    Implements D(A, B) rho = B rho A^+ - (A^+ B rho + rho A^+ B) / 2; the
    single-operator dissipator is D(A) = D(A, A).
    """
    if b is None:
        b = a
    if a.shape != b.shape:
        raise ValueError(f"operator shapes differ: {a.shape} vs {b.shape}")
    ab = a.conj().T @ b
    return np.kron(a.conj(), b) - 0.5 * (spre(ab) + spost(ab))


def propagator(liouvillian: np.ndarray, t: float) -> np.ndarray:
    """exp(L t) by scaling-and-squaring Pade approximation."""
    if t < 0:
        raise ValueError(f"propagation time must be non-negative, got {t}")
    if t == 0.0:
        return identity(liouvillian.shape[0])
    return _expm(liouvillian * t)


def ptrace(rho: np.ndarray, dims: list[int] | tuple[int, ...], keep: int) -> np.ndarray:
    """Partial trace keeping subsystem ``keep``."""
    dims = tuple(dims)
    n = len(dims)
    if not 0 <= keep < n:
        raise ValueError(f"keep={keep} out of range")
    tensor = rho.reshape(dims + dims)
    for k in reversed(range(n)):
        if k == keep:
            continue
        # current number of remaining row indices
        m = tensor.ndim // 2
        tensor = np.trace(tensor, axis1=k, axis2=k + m)
    return tensor


class SpectralPropagator:
    """Eigendecomposition of a time-independent Liouvillian.

    Lets trajectories be evaluated at arbitrary times for the cost of one
    non-Hermitian eigendecomposition; rate ratios of 10^3 between subsystems
    cost nothing, unlike explicit time stepping.  Falls back to dense
    ``expm`` stepping only if the eigenvector matrix is near-defective.
    """

    def __init__(self, liouvillian: np.ndarray, cond_limit: float = 1e12):
        self.liouvillian = liouvillian
        w, v = np.linalg.eig(liouvillian)
        cond = np.linalg.cond(v)
        self.diagonalizable = bool(np.isfinite(cond) and cond < cond_limit)
        if self.diagonalizable:
            self._eigenvalues = w
            self._v = v
            self._vinv = np.linalg.inv(v)

    def states(self, rho0_vec: np.ndarray, times: np.ndarray) -> np.ndarray:
        """Vectorized states at ``times``; shape (len(times), D^2)."""
        times = np.asarray(times, dtype=float)
        if not self.diagonalizable:
            return np.stack([propagator(self.liouvillian, t) @ rho0_vec for t in times])
        coeff = self._vinv @ rho0_vec
        phases = np.exp(np.outer(times, self._eigenvalues))
        return (phases * coeff) @ self._v.T

    def observable(
        self, rho0_vec: np.ndarray, weight_vec: np.ndarray, times: np.ndarray
    ) -> np.ndarray:
        """tr[W rho(t)] for weight row-vector vec(W^+)^+; shape (len(times),)."""
        times = np.asarray(times, dtype=float)
        if not self.diagonalizable:
            return np.array(
                [weight_vec @ (propagator(self.liouvillian, t) @ rho0_vec) for t in times]
            )
        coeff = self._vinv @ rho0_vec
        amps = (weight_vec @ self._v) * coeff
        return np.exp(np.outer(times, self._eigenvalues)) @ amps

    def dominant_decay_rate(self, rho0_vec: np.ndarray, weight_vec: np.ndarray) -> float:
        """Decay rate of the largest-amplitude decaying mode of an observable.

        Used to auto-scale delay grids before fitting; not a measurement.
        """
        if not self.diagonalizable:
            raise DegenerateSteadyStateError("Liouvillian is not diagonalizable")
        coeff = self._vinv @ rho0_vec
        amps = np.abs((weight_vec @ self._v) * coeff)
        rates = -self._eigenvalues.real
        decaying = rates > 1e-6 * rates.max() if rates.max() > 0 else rates > 0
        if not np.any(decaying):
            raise DegenerateSteadyStateError("observable has no decaying component")
        idx = np.argmax(np.where(decaying, amps, 0.0))
        return float(rates[idx])


def trace_preservation_defect(liouvillian: np.ndarray) -> float:
    """max |vec(I)^+ L|; zero for a trace-preserving generator."""
    d = int(round(np.sqrt(liouvillian.shape[0])))
    tr_row = vec(identity(d)).conj()
    return float(np.abs(tr_row @ liouvillian).max())


def assert_density_matrix(
    rho: np.ndarray,
    trace_atol: float = 1e-10,
    herm_atol: float = 1e-10,
    eig_floor: float = -1e-8,
) -> None:
    """Raise ValueError unless rho has unit trace, is Hermitian and positive."""
    tr = np.trace(rho)
    if abs(tr - 1.0) > trace_atol:
        raise ValueError(f"trace deviates from 1 by {abs(tr - 1.0):.3e}")
    herm = np.abs(rho - rho.conj().T).max()
    if herm > herm_atol:
        raise ValueError(f"Hermiticity defect {herm:.3e}")
    lo = np.linalg.eigvalsh((rho + rho.conj().T) / 2).min()
    if lo < eig_floor:
        raise ValueError(f"negative eigenvalue {lo:.3e}")
