"""Action-angle charts, KvN encoding and unitary evolution of phase-space ensembles."""
from __future__ import annotations

import math
import warnings
from functools import lru_cache
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Optional

import numpy as np
from scipy import integrate as spi
from scipy import optimize

from .core import QuantumState
from .dynamics import CanonicalSystem

TWO_PI = 2.0 * math.pi


class SeparatrixError(ValueError):
    """The energy contour through a point does not close (infinite period)."""


# ---------------------------------------------------------------------------
# action-angle charts

@dataclass(frozen=True)
class ActionAngleChart:
    action: Callable
    angle: Callable
    frequency: Callable
    inverse: Callable
    energy: Callable
    regime: str

    def to_action_angle(self, z):
        return self.action(z), self.angle(z)


def harmonic_chart(omega: float = 1.0) -> ActionAngleChart:
    """Closed-form chart of H = omega (q^2 + p^2) / 2, with q = sqrt(2I) cos(theta)."""

    def action(z):
        q, p = z
        return 0.5 * (q * q + p * p)

    def angle(z):
        q, p = z
        return math.atan2(-p, q) % TWO_PI

    def inverse(i, theta):
        r = math.sqrt(2.0 * i)
        return np.array([r * math.cos(theta), -r * math.sin(theta)])

    return ActionAngleChart(action, angle, lambda i: omega, inverse, lambda i: omega * i,
                            "libration")


@dataclass(frozen=True)
class ChartHints:
    """Where to look for energy contours.

    For libration, ``center`` is the elliptic point and turning points are
    searched inside ``window``. For rotation, the coordinate is periodic with
    ``period`` and the reference angle sits at ``center - period / 2``.
    """

    regime: str = "libration"
    center: float = 0.0
    window: tuple = (-math.pi, math.pi)
    period: float = TWO_PI
    grid: int = 4001


_QUAD = dict(epsabs=1e-13, epsrel=1e-12, limit=400)


class _NaturalContours:
    """Energy-contour quadratures for H = p^2/2 + V(q)."""

    def __init__(self, system: CanonicalSystem, hints: ChartHints):
        if system.n != 1:
            raise ValueError("numeric charts are one degree of freedom only")
        probe_q, probe_p = np.array([0.3]), np.array([0.7])
        kin = system.hamiltonian(probe_q, probe_p) - system.hamiltonian(probe_q, 0 * probe_p)
        if abs(float(kin) - 0.245) > 1e-9:
            raise ValueError("numeric charts need kinetic energy p^2/2")
        if hints.regime not in ("libration", "rotation"):
            raise ValueError(f"unknown regime {hints.regime!r}")
        self.system = system
        self.hints = hints
        self.turning_points = lru_cache(maxsize=256)(self._turning_points)
        self.period = lru_cache(maxsize=256)(self._period)

    def V(self, q):
        return float(self.system.hamiltonian(np.array([q]), np.zeros(1)))

    def V_grid(self, grid):
        return np.asarray(self.system.hamiltonian(grid[:, None], np.zeros((grid.size, 1))),
                          dtype=float)

    def dV(self, q, h=1e-6):
        return (self.V(q + h) - self.V(q - h)) / (2 * h)

    def speed(self, q, energy):
        return math.sqrt(max(2.0 * (energy - self.V(q)), 0.0))

    # libration -------------------------------------------------------------

    def _turning_point(self, energy, lo, hi):
        grid = np.linspace(lo, hi, self.hints.grid)
        vals = self.V_grid(grid) - energy
        hits = np.nonzero(vals >= 0)[0]
        if hits.size == 0 or hits[0] == 0:
            raise SeparatrixError(f"no turning point for E={energy} in [{lo}, {hi}]")
        i = hits[0]
        root = grid[i] if vals[i] == 0 else optimize.brentq(
            lambda x: self.V(x) - energy, grid[i - 1], grid[i], xtol=1e-15, rtol=1e-15)
        if abs(self.dV(root)) < 1e-7 * max(1.0, abs(energy)):
            raise SeparatrixError(f"degenerate turning point at q={root:.6g} for E={energy}")
        return root

    def _turning_points(self, energy):
        c = self.hints.center
        lo, hi = self.hints.window
        if energy <= self.V(c):
            raise ValueError(f"energy {energy} is below the well bottom {self.V(c)}")
        return self._turning_point(energy, c, lo), self._turning_point(energy, c, hi)

    def _lib_integral(self, energy, fn, u_lo=-math.pi / 2, u_hi=math.pi / 2):
        qm, qp = self.turning_points(energy)
        mid, half = 0.5 * (qp + qm), 0.5 * (qp - qm)

        def integrand(u):
            q = mid + half * math.sin(u)
            s = self.speed(q, energy)
            return fn(s) * half * math.cos(u)

        with warnings.catch_warnings():
            # roundoff-limited at tiny energies; judged by err below instead
            warnings.simplefilter("ignore", spi.IntegrationWarning)
            val, err = spi.quad(integrand, u_lo, u_hi, **_QUAD)
        if not math.isfinite(val) or err > 1e-8 * max(1.0, abs(val)):
            raise SeparatrixError(f"contour quadrature failed at E={energy}")
        return val

    def _inv_speed(self, s):
        return 1.0 / s if s > 0 else 0.0

    def _u_of(self, q, energy):
        qm, qp = self.turning_points(energy)
        mid, half = 0.5 * (qp + qm), 0.5 * (qp - qm)
        return math.asin(min(1.0, max(-1.0, (q - mid) / half)))

    # rotation --------------------------------------------------------------

    def _rot_bounds(self):
        start = self.hints.center - 0.5 * self.hints.period
        return start, start + self.hints.period

    def _rot_check(self, energy):
        a, b = self._rot_bounds()
        vmax = self.barrier()
        if energy <= vmax * (1 + 1e-12):
            raise SeparatrixError(f"E={energy} does not exceed the barrier {vmax}")

    def barrier(self):
        a, b = self._rot_bounds()
        return float(np.max(self.V_grid(np.linspace(a, b, self.hints.grid))))

    def _rot_integral(self, energy, fn, a=None, b=None):
        self._rot_check(energy)
        lo, hi = self._rot_bounds()
        a = lo if a is None else a
        b = hi if b is None else b
        val, _ = spi.quad(lambda q: fn(self.speed(q, energy)), a, b, **_QUAD)
        return val

    # common ----------------------------------------------------------------

    def action_of_energy(self, energy):
        if self.hints.regime == "libration":
            return self._lib_integral(energy, lambda s: s) / math.pi
        return self._rot_integral(energy, lambda s: s) / TWO_PI

    def _period(self, energy):
        if self.hints.regime == "libration":
            return 2.0 * self._lib_integral(energy, self._inv_speed)
        return self._rot_integral(energy, self._inv_speed)

    def energy_range(self):
        if self.hints.regime == "libration":
            lo, hi = self.hints.window
            bottom = self.V(self.hints.center)
            return bottom, min(self.V(lo), self.V(hi))
        return self.barrier(), math.inf

    def energy_of_action(self, action):
        lo, hi = self.energy_range()
        span = (hi - lo) if math.isfinite(hi) else 1.0
        e_lo = lo + 1e-12 * span
        if not math.isfinite(hi):
            e_lo = lo + 1e-6 * (1.0 + abs(lo))
            hi = lo + 1.0
            while self.action_of_energy(hi) < action:
                hi = lo + 2.0 * (hi - lo)
        else:
            hi = hi - 1e-9 * span
        if self.hints.regime == "libration" and action <= 0:
            return lo
        return optimize.brentq(lambda e: self.action_of_energy(e) - action, e_lo, hi,
                               xtol=1e-14, rtol=1e-14)

    def time_of_flight(self, q, p, energy):
        """Time from the theta = 0 reference point to (q, p) along the orbit."""
        if self.hints.regime == "libration":
            t_down = self._lib_integral(energy, self._inv_speed, u_lo=self._u_of(q, energy))
            return t_down if p <= 0 else self.period(energy) - t_down
        a, b = self._rot_bounds()
        qq = a + (q - a) % self.hints.period
        if p > 0:
            return self._rot_integral(energy, self._inv_speed, a, qq)
        return self._rot_integral(energy, self._inv_speed, qq, b)

    def reference_point(self, energy, direction=1.0):
        if self.hints.regime == "libration":
            return np.array([self.turning_points(energy)[1], 0.0])
        a, _ = self._rot_bounds()
        if direction < 0:
            a = a + self.hints.period
        return np.array([a, math.copysign(self.speed(a, energy), direction)])


def build_chart_numeric(system: CanonicalSystem, hints: Optional[ChartHints] = None) -> ActionAngleChart:
    """Action-angle chart for a natural 1-DOF system H = p^2/2 + V(q).

    Actions come from contour quadrature, angles from time of flight measured
    from the reference point (the right turning point for libration), and the
    inverse integrates the flow from that reference point.
    """
    hints = hints or ChartHints()
    c = _NaturalContours(system, hints)

    def energy_at(z):
        return float(system.hamiltonian(np.array([z[0]]), np.array([z[1]])))

    def action(z):
        return c.action_of_energy(energy_at(z))

    def angle(z):
        e = energy_at(z)
        return (TWO_PI * c.time_of_flight(z[0], z[1], e) / c.period(e)) % TWO_PI

    def frequency(i):
        return TWO_PI / c.period(c.energy_of_action(i))

    def inverse(i, theta, direction=1.0):
        e = c.energy_of_action(i)
        t = (theta % TWO_PI) / TWO_PI * c.period(e)
        z0 = c.reference_point(e, direction)
        if t == 0.0:
            return z0
        sol = spi.solve_ivp(
            lambda _t, z: np.concatenate(system.vector_field(z[:1], z[1:], _t)),
            (0.0, t), z0, method="DOP853", rtol=1e-12, atol=1e-13,
        )
        return sol.y[:, -1]

    return ActionAngleChart(action, angle, frequency, inverse, c.energy_of_action, hints.regime)


# ---------------------------------------------------------------------------
# KvN encoding

def kvn_encode(actions, angles) -> tuple[QuantumState, float]:
    """psi_k = sqrt(I_k / c) exp(-i theta_k) with c = sum_k I_k."""
    i = np.asarray(actions, dtype=float)
    th = np.asarray(angles, dtype=float)
    if np.any(i < 0):
        raise ValueError("actions must be non-negative")
    c = float(np.sum(i))
    if c <= 0:
        raise ValueError("action vector is all zero")
    return QuantumState(np.sqrt(i / c) * np.exp(-1j * th)), c


def kvn_decode(state, scale: float = 1.0) -> tuple[np.ndarray, np.ndarray]:
    psi = state.amplitudes if isinstance(state, QuantumState) else np.asarray(state)
    return np.abs(psi) ** 2 * scale, np.mod(-np.angle(psi), TWO_PI)


def diagonal_unitary(omega, dt: float) -> np.ndarray:
    return np.exp(-1j * np.asarray(omega, dtype=float) * dt)


@dataclass(frozen=True)
class ActionAngleEnsemble:
    actions: np.ndarray  # (n_traj, n_modes)
    angles: np.ndarray
    scales: np.ndarray = field(init=False)

    def __post_init__(self):
        i = np.array(self.actions, dtype=float, ndmin=2)
        th = np.array(self.angles, dtype=float, ndmin=2)
        if i.shape != th.shape:
            raise ValueError(f"actions {i.shape} and angles {th.shape} differ")
        if np.any(i < 0):
            raise ValueError("actions must be non-negative")
        th = np.mod(th, TWO_PI)
        for a in (i, th):
            a.setflags(write=False)
        object.__setattr__(self, "actions", i)
        object.__setattr__(self, "angles", th)
        object.__setattr__(self, "scales", i.sum(axis=1))

    @property
    def n_traj(self) -> int:
        return self.actions.shape[0]

    @property
    def n_modes(self) -> int:
        return self.actions.shape[1]


@dataclass(frozen=True)
class EncodedState:
    """Separable: amplitudes (n_traj, n_modes), one unit state per row.
    Entangled: amplitudes (n_traj * n_modes,), block j at j*N .. j*N + N - 1.
    """

    kind: str
    amplitudes: np.ndarray
    scales: np.ndarray
    n_modes: int

    @property
    def n_traj(self) -> int:
        return self.scales.size

    def blocks(self) -> np.ndarray:
        """Per-trajectory unit states as an (n_traj, n_modes) array."""
        if self.kind == "separable":
            return self.amplitudes
        return self.amplitudes.reshape(self.n_traj, self.n_modes) * math.sqrt(self.n_traj)

    def state(self) -> QuantumState:
        if self.kind != "entangled":
            raise ValueError("a separable encoding is a product of states; use blocks()")
        return QuantumState(self.amplitudes)


KINDS = ("separable", "entangled")


def encode_ensemble(ens: ActionAngleEnsemble, kind: str = "entangled") -> EncodedState:
    if kind not in KINDS:
        raise ValueError(f"unknown encoding {kind!r}")
    if np.any(ens.scales <= 0):
        bad = int(np.nonzero(ens.scales <= 0)[0][0])
        raise ValueError(f"trajectory {bad} has all-zero actions")
    blocks = np.sqrt(ens.actions / ens.scales[:, None]) * np.exp(-1j * ens.angles)
    if kind == "entangled":
        amps = blocks.reshape(-1) / math.sqrt(ens.n_traj)
    else:
        amps = blocks
    return EncodedState(kind, amps, ens.scales.copy(), ens.n_modes)


def decode_ensemble(enc: EncodedState) -> ActionAngleEnsemble:
    b = enc.blocks()
    i, th = kvn_decode(b)
    return ActionAngleEnsemble(i * enc.scales[:, None], th)


def _frequency_table(enc: EncodedState, omega) -> np.ndarray:
    w = np.asarray(omega, dtype=float)
    if w.shape == (enc.n_modes,):
        w = np.broadcast_to(w, (enc.n_traj, enc.n_modes))
    if w.shape != (enc.n_traj, enc.n_modes):
        raise ValueError(f"frequencies shape {w.shape} does not match encoding "
                         f"({enc.n_traj}, {enc.n_modes})")
    return w


def evolve_encoded(enc: EncodedState, omega, dt: float, steps: int = 1) -> EncodedState:
    """Apply the diagonal unitary exp(-i omega dt) ``steps`` times to every block.

    Each application is a pure phase rotation, so the kernel works in polar
    form: moduli are untouched and phases accumulate with compensated
    summation. Repeated complex multiplication would leak ~1e-16 of modulus
    per step.
    """
    if steps < 0:
        raise ValueError("steps must be non-negative")
    if steps == 0:
        return enc
    w = _frequency_table(enc, omega)
    if enc.kind == "entangled":
        w = w.reshape(-1)
    amps = enc.amplitudes
    modulus = np.abs(amps)
    phase = np.angle(amps)
    comp = np.zeros_like(phase)
    delta = -w * dt
    for _ in range(steps):
        y = delta - comp
        t = phase + y
        comp = (t - phase) - y
        phase = t
    phase = np.mod(phase - comp, TWO_PI)
    return EncodedState(enc.kind, modulus * np.exp(1j * phase), enc.scales, enc.n_modes)


class ResourceEstimate(NamedTuple):
    qubits: int
    depth: int
    gate_units: int


def _log2_ceil(x: int) -> int:
    if x < 1:
        raise ValueError("sizes must be positive")
    return int(math.ceil(math.log2(x))) if x > 1 else 0


def resource_estimate(n_modes: int, n_traj: int, n_steps: int = 1,
                      kind: str = "entangled") -> ResourceEstimate:
    """Formula-level circuit resources for N_t steps of ensemble evolution.

    A diagonal unitary on N amplitudes costs N gate units at depth N. The
    separable layout runs N_s copies side by side; the entangled layout
    applies one copy on the mode register.
    """
    if kind not in KINDS:
        raise ValueError(f"unknown encoding {kind!r}")
    mode_qubits = _log2_ceil(n_modes)
    depth = n_steps * n_modes
    if kind == "separable":
        return ResourceEstimate(n_traj * mode_qubits, depth, n_traj * n_steps * n_modes)
    return ResourceEstimate(mode_qubits + _log2_ceil(n_traj), depth, n_steps * n_modes)
