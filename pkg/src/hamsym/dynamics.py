"""Canonical Hamiltonian systems, reference integrators and flow diagnostics."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .core import KahlerVector, QuantumState, symplectic_matrix

METHODS = ("verlet", "yoshida4", "rk4_reference")

# Yoshida's fourth-order triple-jump weights
_CBRT2 = 2.0 ** (1.0 / 3.0)
YOSHIDA_W1 = 1.0 / (2.0 - _CBRT2)
YOSHIDA_W0 = -_CBRT2 / (2.0 - _CBRT2)


class IntegrationError(RuntimeError):
    def __init__(self, step: int, message: str = "non-finite state"):
        super().__init__(f"{message} at step {step}")
        self.step = step


@dataclass(frozen=True)
class CanonicalSystem:
    """A Hamiltonian H(q, p, t) with n degrees of freedom.

    Arrays have the degrees of freedom on the last axis, so leading axes
    batch independent trajectories. The explicit symplectic methods need
    the split H = T(p) + V(q, t) + R(q, p), given through ``kinetic_grad``,
    ``potential_grad`` and, when R is present, its exact flow ``extra_flow``.
    """

    n: int
    hamiltonian: Callable
    gradient: Optional[Callable] = None
    kinetic_grad: Optional[Callable] = None
    potential_grad: Optional[Callable] = None
    extra_flow: Optional[Callable] = None
    name: str = "system"

    @property
    def splittable(self) -> bool:
        return self.kinetic_grad is not None and self.potential_grad is not None

    def grad(self, q, p, t=0.0):
        if self.gradient is not None:
            return self.gradient(q, p, t)
        return fd_gradient(self.hamiltonian, q, p, t)

    def vector_field(self, q, p, t=0.0):
        dq, dp = self.grad(q, p, t)
        return dp, -dq


def fd_gradient(hamiltonian, q, p, t=0.0, h=1e-6):
    q = np.asarray(q, dtype=float)
    p = np.asarray(p, dtype=float)
    dq = np.empty(np.broadcast(q, p).shape)
    dp = np.empty_like(dq)
    for i in range(q.shape[-1]):
        e = np.zeros(q.shape[-1])
        e[i] = h
        dq[..., i] = (hamiltonian(q + e, p, t) - hamiltonian(q - e, p, t)) / (2 * h)
        dp[..., i] = (hamiltonian(q, p + e, t) - hamiltonian(q, p - e, t)) / (2 * h)
    return dq, dp


def gradient_consistency(system: CanonicalSystem, n_probes: int = 20, seed: int = 0,
                         scale: float = 1.0) -> float:
    """Largest relative gap between the analytic gradient and central differences."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_probes):
        q = rng.normal(scale=scale, size=system.n)
        p = rng.normal(scale=scale, size=system.n)
        t = rng.uniform(0, 1)
        aq, ap = system.grad(q, p, t)
        nq, np_ = fd_gradient(system.hamiltonian, q, p, t)
        a = np.concatenate([aq, ap])
        b = np.concatenate([nq, np_])
        worst = max(worst, float(np.max(np.abs(a - b)) / max(1.0, np.max(np.abs(b)))))
    return worst


@dataclass(frozen=True)
class Trajectory:
    times: np.ndarray
    states: np.ndarray  # shape (n_points, ..., 2n)

    @property
    def n(self) -> int:
        return self.states.shape[-1] // 2

    @property
    def q(self) -> np.ndarray:
        return self.states[..., : self.n]

    @property
    def p(self) -> np.ndarray:
        return self.states[..., self.n:]

    @property
    def final(self) -> np.ndarray:
        return self.states[-1]


def _verlet(system, q, p, t, h):
    if system.extra_flow is not None:
        q, p = system.extra_flow(q, p, 0.5 * h)
    p = p - 0.5 * h * system.potential_grad(q, t)
    q = q + h * system.kinetic_grad(p)
    p = p - 0.5 * h * system.potential_grad(q, t + h)
    if system.extra_flow is not None:
        q, p = system.extra_flow(q, p, 0.5 * h)
    return q, p


def _yoshida4(system, q, p, t, h):
    q, p = _verlet(system, q, p, t, YOSHIDA_W1 * h)
    t1 = t + YOSHIDA_W1 * h
    q, p = _verlet(system, q, p, t1, YOSHIDA_W0 * h)
    t2 = t1 + YOSHIDA_W0 * h
    return _verlet(system, q, p, t2, YOSHIDA_W1 * h)


def _rk4(system, q, p, t, h):
    k1q, k1p = system.vector_field(q, p, t)
    k2q, k2p = system.vector_field(q + 0.5 * h * k1q, p + 0.5 * h * k1p, t + 0.5 * h)
    k3q, k3p = system.vector_field(q + 0.5 * h * k2q, p + 0.5 * h * k2p, t + 0.5 * h)
    k4q, k4p = system.vector_field(q + h * k3q, p + h * k3p, t + h)
    q = q + h / 6.0 * (k1q + 2 * k2q + 2 * k3q + k4q)
    p = p + h / 6.0 * (k1p + 2 * k2p + 2 * k3p + k4p)
    return q, p


_STEPPERS = {"verlet": _verlet, "yoshida4": _yoshida4, "rk4_reference": _rk4}


def stepper(system: CanonicalSystem, method: str) -> Callable:
    """One-step map (q, p, t, h) -> (q, p) for the chosen method."""
    if method not in _STEPPERS:
        raise ValueError(f"unknown method {method!r}; choose from {METHODS}")
    if method != "rk4_reference" and not system.splittable:
        raise ValueError(f"{method} needs a split Hamiltonian; {system.name} has none")
    fn = _STEPPERS[method]
    return lambda q, p, t, h: fn(system, q, p, t, h)


def _split_z0(z0, n):
    if isinstance(z0, KahlerVector):
        z0 = z0.as_array()
    z0 = np.asarray(z0, dtype=float)
    if z0.shape[-1] != 2 * n:
        raise ValueError(f"initial state needs last axis 2n={2 * n}, got {z0.shape}")
    return z0[..., :n].copy(), z0[..., n:].copy()


def step_count(T: float, dt: float) -> int:
    if dt <= 0:
        raise ValueError("dt must be positive")
    if T < 0:
        raise ValueError("T must be non-negative")
    return int(math.ceil(T / dt - 1e-9)) if T > 0 else 0


def integrate(system: CanonicalSystem, z0, T: float, dt: float, method: str = "verlet",
              t0: float = 0.0, record_every: int = 1) -> Trajectory:
    """Integrate from t0 to t0 + T.

    Takes ceil(T/dt) uniform steps of size T/ceil(T/dt) <= dt, so the last
    sample lands exactly on t0 + T.
    """
    n_steps = step_count(T, dt)
    step = stepper(system, method)
    q, p = _split_z0(z0, system.n)
    h = T / n_steps if n_steps else 0.0
    times = [t0]
    states = [np.concatenate([q, p], axis=-1)]
    for i in range(1, n_steps + 1):
        q, p = step(q, p, t0 + (i - 1) * h, h)
        if not (np.all(np.isfinite(q)) and np.all(np.isfinite(p))):
            raise IntegrationError(i)
        if i % record_every == 0 or i == n_steps:
            times.append(t0 + i * h)
            states.append(np.concatenate([q, p], axis=-1))
    return Trajectory(np.array(times), np.array(states))


# bundled systems

def harmonic_system(omega: float = 1.0) -> CanonicalSystem:
    def ham(q, p, t=0.0):
        return 0.5 * omega * (np.sum(q * q, axis=-1) + np.sum(p * p, axis=-1))

    return CanonicalSystem(
        n=1,
        hamiltonian=ham,
        gradient=lambda q, p, t=0.0: (omega * q, omega * p),
        kinetic_grad=lambda p: omega * p,
        potential_grad=lambda q, t=0.0: omega * q,
        name="harmonic",
    )


def pendulum_system() -> CanonicalSystem:
    """H = p^2/2 + 1 - cos(phi); the separatrix sits at H = 2."""

    def ham(q, p, t=0.0):
        return np.sum(0.5 * p * p + 1.0 - np.cos(q), axis=-1)

    return CanonicalSystem(
        n=1,
        hamiltonian=ham,
        gradient=lambda q, p, t=0.0: (np.sin(q), p),
        kinetic_grad=lambda p: p,
        potential_grad=lambda q, t=0.0: np.sin(q),
        name="pendulum",
    )


def driven_pendulum_system(eps: float, drive_freq: float = 1.0) -> CanonicalSystem:
    """Pendulum plus a travelling wave, eps * (1 - cos(phi - drive_freq * t)).

    The wave resonance at p = drive_freq overlaps the pendulum resonance for
    eps of order one, giving a chaotic layer.
    """

    def ham(q, p, t=0.0):
        return np.sum(0.5 * p * p + 1.0 - np.cos(q) + eps * (1.0 - np.cos(q - drive_freq * t)),
                      axis=-1)

    def pot(q, t=0.0):
        return np.sin(q) + eps * np.sin(q - drive_freq * t)

    return CanonicalSystem(
        n=1,
        hamiltonian=ham,
        gradient=lambda q, p, t=0.0: (pot(q, t), p),
        kinetic_grad=lambda p: p,
        potential_grad=pot,
        name="driven_pendulum",
    )


SYSTEMS = {
    "harmonic": harmonic_system,
    "pendulum": pendulum_system,
}


# quantum reference propagation

def _check_hermitian(h, tol=1e-10) -> np.ndarray:
    h = np.asarray(h, dtype=complex)
    if h.ndim != 2 or h.shape[0] != h.shape[1]:
        raise ValueError(f"Hamiltonian must be square, got shape {h.shape}")
    scale = max(1.0, float(np.max(np.abs(h), initial=0.0)))
    if np.max(np.abs(h - h.conj().T), initial=0.0) > tol * scale:
        raise ValueError("Hamiltonian is not Hermitian")
    return h


def schrodinger_series(hq, psi0, times) -> np.ndarray:
    """Exact psi(t) = W exp(-i Lambda t) W^dagger psi0 for each t; shape (len(times), N)."""
    hq = _check_hermitian(hq)
    psi0 = psi0.amplitudes if isinstance(psi0, QuantumState) else np.asarray(psi0, dtype=complex)
    lam, w = np.linalg.eigh(hq)
    c = w.conj().T @ psi0
    times = np.atleast_1d(np.asarray(times, dtype=float))
    out = (np.exp(-1j * np.outer(times, lam)) * c) @ w.T
    out[times == 0.0] = psi0  # identity propagator, exactly
    return out


def schrodinger_exact(hq, psi0, t: float) -> QuantumState:
    return QuantumState(schrodinger_series(hq, psi0, [t])[0])


# diagnostics

def jacobian_fd(flowmap: Callable, z0, h_fd: float = 1e-5) -> np.ndarray:
    z0 = np.asarray(z0, dtype=float)
    d = z0.size
    jac = np.empty((d, d))
    for i in range(d):
        e = np.zeros(d)
        e[i] = h_fd
        jac[:, i] = (np.asarray(flowmap(z0 + e)) - np.asarray(flowmap(z0 - e))) / (2 * h_fd)
    return jac


def symplectic_defect(flowmap: Callable, z0, h_fd: float = 1e-5) -> float:
    """max |J^T Omega J - Omega| with J the central-difference Jacobian of flowmap at z0."""
    if h_fd <= 0:
        raise ValueError("h_fd must be positive")
    jac = jacobian_fd(flowmap, z0, h_fd)
    omega = symplectic_matrix(jac.shape[0] // 2)
    return float(np.max(np.abs(jac.T @ omega @ jac - omega)))


def one_step_map(system: CanonicalSystem, method: str, dt: float, t: float = 0.0) -> Callable:
    step = stepper(system, method)
    n = system.n

    def flow(z):
        q, p = step(z[:n], z[n:], t, dt)
        return np.concatenate([q, p])

    return flow


@dataclass(frozen=True)
class LyapunovResult:
    exponent: float
    times: np.ndarray
    running: np.ndarray


def lyapunov_exponent(system: CanonicalSystem, z0, T: float, dt: float, renorm_every: int = 10,
                      method: str = "yoshida4", d0: float = 1e-8, seed: int = 0) -> LyapunovResult:
    """Maximal finite-time Lyapunov exponent by Benettin renormalisation.

    A shadow trajectory at distance d0 is advanced alongside the base one and
    pulled back to distance d0 every ``renorm_every`` steps.
    """
    n_steps = step_count(T, dt)
    if n_steps // renorm_every < 100:
        raise ValueError("T/dt too short for 100 renormalisations")
    step = stepper(system, method)
    q, p = _split_z0(z0, system.n)
    rng = np.random.default_rng(seed)
    v = rng.normal(size=2 * system.n)
    v *= d0 / np.linalg.norm(v)
    z = np.stack([np.concatenate([q, p]), np.concatenate([q, p]) + v])
    n = system.n
    qq, pp = z[:, :n], z[:, n:]
    h = T / n_steps
    log_sum = 0.0
    times, running = [], []
    for i in range(1, n_steps + 1):
        qq, pp = step(qq, pp, (i - 1) * h, h)
        if not (np.all(np.isfinite(qq)) and np.all(np.isfinite(pp))):
            raise IntegrationError(i)
        if i % renorm_every == 0:
            sep = np.concatenate([qq[1] - qq[0], pp[1] - pp[0]])
            d = float(np.linalg.norm(sep))
            log_sum += math.log(d / d0)
            sep *= d0 / d
            qq = np.stack([qq[0], qq[0] + sep[:n]])
            pp = np.stack([pp[0], pp[0] + sep[n:]])
            times.append(i * h)
            running.append(log_sum / (i * h))
    return LyapunovResult(running[-1], np.array(times), np.array(running))
