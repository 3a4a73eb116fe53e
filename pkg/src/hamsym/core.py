"""Complex/real state correspondence and the Kähler structures.

A complex amplitude vector psi of length N is realified to z = (q, p) with
q = Re psi and p = Im psi. Operators lift to real 2N x 2N block matrices
[[A_R, -A_I], [A_I, A_R]].
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

DEFAULT_TOL = 1e-10
NORM_TOL = 1e-12


class StructureError(ValueError):
    """A real matrix does not have the block structure an operation needs."""


@dataclass(frozen=True)
class QuantumState:
    amplitudes: np.ndarray

    def __post_init__(self):
        a = np.array(self.amplitudes, dtype=complex).reshape(-1)
        if a.size < 1:
            raise ValueError("state needs at least one amplitude")
        a.setflags(write=False)
        object.__setattr__(self, "amplitudes", a)

    @property
    def dim(self) -> int:
        return self.amplitudes.size

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    @property
    def normalized(self) -> bool:
        # a flag only; states are never silently rescaled
        return abs(self.norm - 1.0) <= NORM_TOL


@dataclass(frozen=True)
class KahlerVector:
    q: np.ndarray
    p: np.ndarray

    def __post_init__(self):
        q = np.array(self.q, dtype=float).reshape(-1)
        p = np.array(self.p, dtype=float).reshape(-1)
        if q.shape != p.shape:
            raise ValueError(f"q and p differ in length: {q.size} vs {p.size}")
        q.setflags(write=False)
        p.setflags(write=False)
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "p", p)

    @property
    def dim(self) -> int:
        return self.q.size

    def as_array(self) -> np.ndarray:
        return np.concatenate([self.q, self.p])

    @classmethod
    def from_array(cls, z) -> "KahlerVector":
        z = np.asarray(z, dtype=float).reshape(-1)
        if z.size % 2:
            raise ValueError("phase-space vector must have even length")
        n = z.size // 2
        return cls(z[:n], z[n:])


def complex_structure(n: int) -> np.ndarray:
    """Matrix of J, acting as J(q, p) = (-p, q)."""
    eye, zero = np.eye(n), np.zeros((n, n))
    return np.block([[zero, -eye], [eye, zero]])


def symplectic_matrix(n: int) -> np.ndarray:
    """Matrix of the canonical symplectic form, w(a, b) = a^T Omega b."""
    eye, zero = np.eye(n), np.zeros((n, n))
    return np.block([[zero, eye], [-eye, zero]])


def _as_state(x) -> QuantumState:
    return x if isinstance(x, QuantumState) else QuantumState(x)


def strocchi_map(state) -> KahlerVector:
    psi = _as_state(state).amplitudes
    return KahlerVector(psi.real, psi.imag)


def strocchi_inverse(z: KahlerVector) -> QuantumState:
    return QuantumState(z.q + 1j * z.p)


def metric(za: KahlerVector, zb: KahlerVector) -> float:
    return float(za.q @ zb.q + za.p @ zb.p)


def symplectic_form(za: KahlerVector, zb: KahlerVector) -> float:
    return float(za.q @ zb.p - za.p @ zb.q)


def inner_product_decompose(phi, psi) -> tuple[float, float]:
    """Split <phi|psi> into its metric and symplectic parts (g, w)."""
    phi, psi = _as_state(phi), _as_state(psi)
    if phi.dim != psi.dim:
        raise ValueError(f"dimension mismatch: {phi.dim} vs {psi.dim}")
    za, zb = strocchi_map(phi), strocchi_map(psi)
    return metric(za, zb), symplectic_form(za, zb)


def apply_complex_structure(z: KahlerVector) -> KahlerVector:
    return KahlerVector(-z.p, z.q)


def lift_operator(a) -> np.ndarray:
    """Real 2N x 2N representation of a complex N x N operator."""
    a = np.asarray(a, dtype=complex)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"operator must be square, got shape {a.shape}")
    ar, ai = a.real, a.imag
    return np.block([[ar, -ai], [ai, ar]])


def unlift_operator(m) -> np.ndarray:
    """Inverse of lift_operator; raises StructureError if m does not commute with J."""
    m = _check_even_square(m)
    n = m.shape[0] // 2
    defect = commutator_defect(m)
    if defect > DEFAULT_TOL:
        raise StructureError(f"matrix does not commute with J (defect {defect:.3e})")
    return m[:n, :n] + 1j * m[n:, :n]


def _check_even_square(m) -> np.ndarray:
    m = np.asarray(m, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"matrix must be square, got shape {m.shape}")
    if m.shape[0] % 2:
        raise StructureError(f"matrix dimension {m.shape[0]} is odd")
    return m


def commutator_defect(m) -> float:
    """max |M J - J M| over entries."""
    m = _check_even_square(m)
    j = complex_structure(m.shape[0] // 2)
    return float(np.max(np.abs(m @ j - j @ m), initial=0.0))


class LiftClass(NamedTuple):
    complex_compatible: bool
    observable: bool
    unitary: bool


def classify_lift(m, tol: float = DEFAULT_TOL) -> LiftClass:
    """Which quantum operator class a real 2N x 2N matrix represents.

    All comparisons use the entrywise max norm.
    """
    m = _check_even_square(m)
    n = m.shape[0] // 2
    compatible = commutator_defect(m) <= tol
    symmetric = np.max(np.abs(m - m.T)) <= tol
    omega = symplectic_matrix(n)
    orthogonal = np.max(np.abs(m.T @ m - np.eye(2 * n))) <= tol
    symplectic = np.max(np.abs(m.T @ omega @ m - omega)) <= tol
    return LiftClass(
        complex_compatible=bool(compatible),
        observable=bool(compatible and symmetric),
        unitary=bool(compatible and orthogonal and symplectic),
    )
