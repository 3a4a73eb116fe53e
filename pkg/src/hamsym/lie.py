"""First-order Lie canonical perturbation theory on near-integrable systems.

A system is H(I, theta, t) = H0(I) + eps * sum_k H1_k(I_k, theta_k, t) with a
separable integrable part and, on every mode k, a one-dimensional Fourier
perturbation H1_k = sum_m A_m(I_k) exp(i(m theta_k - omega_m t)).

Poisson brackets use {f, g} = f_theta g_I - f_I g_theta, so the first-order
generator solves dW/dt + omega0 dW/dtheta = -H1 and the new variables are
I_bar = I - eps dW/dtheta, theta_bar = theta + eps dW/dI.

The generator comes in three flavours:

* ``w1``: the along-orbit integral as a function of the initial angle
  theta0 at time t0, integrated up to t.
* ``w1_field``: the same integral as a field on the current (I, theta, t),
  with a fixed lower limit ``reference``; this is what the transforms use.
* the stationary field (``reference=STATIONARY``), the reference pushed to
  the far past with the transient dropped. It needs every |Omega_m| > 0.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, replace
from typing import Callable, NamedTuple, Optional, Union

import numpy as np
import scipy.special

from .dynamics import CanonicalSystem, lyapunov_exponent, step_count, stepper
from .integrable import TWO_PI

SWITCH_THRESHOLD = 1e-4
EPS_PRIME_LIMIT = 0.1
STATIONARY = "stationary"
REALITY_TOL = 1e-10


class NegativeActionError(ValueError):
    def __init__(self, index: int, value: float):
        super().__init__(f"transformed action {value:.3e} < 0 on trajectory {index}; "
                         "eps is too large for this orbit")
        self.index = index
        self.value = value


class SingularActionError(ValueError):
    pass


class MissingDerivativeError(ValueError):
    pass


class ResonanceError(ValueError):
    pass


def _as_fn(x) -> Callable:
    if callable(x):
        return x
    c = complex(x)
    return lambda i: np.full(np.shape(i), c, dtype=complex)


@dataclass(frozen=True)
class FourierMode:
    """A_m(I) exp(i(m theta - omega t)). ``amplitude`` may be a constant."""

    m: int
    amplitude: Union[complex, Callable]
    omega: float = 0.0
    d_amplitude: Optional[Callable] = None

    def __post_init__(self):
        if int(self.m) != self.m or self.m == 0:
            raise ValueError(f"mode number must be a nonzero integer, got {self.m}")

    @property
    def constant(self) -> bool:
        return not callable(self.amplitude)

    def amp(self, i):
        return np.asarray(_as_fn(self.amplitude)(i), dtype=complex)

    def damp(self, i):
        if self.constant:
            return np.zeros(np.shape(i), dtype=complex)
        if self.d_amplitude is None:
            raise MissingDerivativeError(f"mode m={self.m} has no dA/dI")
        return np.asarray(self.d_amplitude(i), dtype=complex)


@dataclass(frozen=True)
class FourierPerturbation:
    """One-dimensional perturbation as a sum of conjugate Fourier pairs.

    ``smoothness`` p says the coefficients decay like |m|^-(p+1).
    """

    modes: tuple
    smoothness: int = 1

    def __post_init__(self):
        object.__setattr__(self, "modes", tuple(self.modes))
        if not self.modes:
            raise ValueError("perturbation needs at least one mode")
        if self.smoothness < 1:
            raise ValueError("smoothness must be at least 1")
        rng = np.random.default_rng(0)
        i = rng.uniform(0.1, 3.0, 16)
        th = rng.uniform(0, TWO_PI, 16)
        t = rng.uniform(-5, 5, 16)
        val = self._complex_value(i, th, t)
        if np.any(np.abs(val.imag) > REALITY_TOL * np.maximum(1.0, np.abs(val.real))):
            raise ValueError("perturbation is not real; every mode m needs a partner -m "
                             "with conjugate amplitude and opposite frequency")

    @property
    def autonomous(self) -> bool:
        return all(md.omega == 0 for md in self.modes)

    @property
    def constant_amplitudes(self) -> bool:
        return all(md.constant for md in self.modes)

    def _complex_value(self, i, theta, t):
        out = 0.0
        for md in self.modes:
            out = out + md.amp(i) * np.exp(1j * (md.m * theta - md.omega * t))
        return out

    def value(self, i, theta, t=0.0):
        return np.real(self._complex_value(i, theta, t))

    def d_theta(self, i, theta, t=0.0):
        out = 0.0
        for md in self.modes:
            out = out + 1j * md.m * md.amp(i) * np.exp(1j * (md.m * theta - md.omega * t))
        return np.real(out)

    def d_action(self, i, theta, t=0.0):
        out = 0.0
        for md in self.modes:
            out = out + md.damp(i) * np.exp(1j * (md.m * theta - md.omega * t))
        return np.real(out)


def cosine_perturbation(amplitude: float = 1.0, m: int = 1, omega: float = 0.0,
                        smoothness: int = 1) -> FourierPerturbation:
    """amplitude * cos(m theta - omega t) as one conjugate pair."""
    half = 0.5 * amplitude
    return FourierPerturbation((FourierMode(m, half, omega), FourierMode(-m, half, -omega)),
                               smoothness)


@dataclass(frozen=True)
class NearIntegrableSystem:
    """H0 separable in the actions; ``domega0`` returns the diagonal d omega0_k / d I_k."""

    h0: Callable
    omega0: Callable
    perturbations: tuple
    eps: float
    domega0: Optional[Callable] = None
    name: str = "near_integrable"

    def __post_init__(self):
        object.__setattr__(self, "perturbations", tuple(self.perturbations))
        if not 0.0 <= self.eps <= 1.0:
            raise ValueError(f"eps must lie in [0, 1], got {self.eps}")

    @property
    def n_modes(self) -> int:
        return len(self.perturbations)

    @property
    def autonomous(self) -> bool:
        return all(p.autonomous for p in self.perturbations)

    @property
    def smoothness(self) -> int:
        return min(p.smoothness for p in self.perturbations)

    def with_eps(self, eps: float) -> "NearIntegrableSystem":
        return replace(self, eps=eps)

    def dw0(self, i):
        if self.domega0 is None:
            raise MissingDerivativeError(f"{self.name} has no d omega0 / dI")
        return np.asarray(self.domega0(i), dtype=float)

    def hamiltonian(self, i, theta, t=0.0):
        i = np.asarray(i, dtype=float)
        theta = np.asarray(theta, dtype=float)
        h1 = sum(p.value(i[..., k], theta[..., k], t) for k, p in enumerate(self.perturbations))
        return self.h0(i) + self.eps * h1

    def as_canonical(self) -> CanonicalSystem:
        """Canonical system with q = theta and p = I."""
        perts = self.perturbations
        eps = self.eps

        def grad(q, p, t=0.0):
            q = np.asarray(q, dtype=float)
            p = np.asarray(p, dtype=float)
            dq = np.stack([pt.d_theta(p[..., k], q[..., k], t) for k, pt in enumerate(perts)],
                          axis=-1)
            dp = np.stack([pt.d_action(p[..., k], q[..., k], t) for k, pt in enumerate(perts)],
                          axis=-1)
            return eps * dq, np.asarray(self.omega0(p), dtype=float) + eps * dp

        split = all(pt.constant_amplitudes for pt in perts)
        return CanonicalSystem(
            n=self.n_modes,
            hamiltonian=lambda q, p, t=0.0: self.hamiltonian(p, q, t),
            gradient=grad,
            kinetic_grad=(lambda p: np.asarray(self.omega0(p), dtype=float)) if split else None,
            potential_grad=(lambda q, t=0.0: grad(q, np.ones_like(q), t)[0]) if split else None,
            name=self.name,
        )


def twist_system(eps: float, n_modes: int = 1, drive: float = 1.0, amplitude: float = 1.0,
                 m: int = 1) -> NearIntegrableSystem:
    """H0 = sum I_k^2 / 2 with amplitude * cos(m theta_k - drive t) on every mode.

    Resonant where m I_k = drive. ``drive=0`` gives an autonomous perturbation.
    """
    pert = cosine_perturbation(amplitude, m, drive)
    return NearIntegrableSystem(
        h0=lambda i: 0.5 * np.sum(np.asarray(i) ** 2, axis=-1),
        omega0=lambda i: np.asarray(i, dtype=float),
        domega0=lambda i: np.ones(np.shape(i)),
        perturbations=(pert,) * n_modes,
        eps=eps,
        name="twist",
    )


# generating function

class W1Value(NamedTuple):
    value: np.ndarray      # (...)
    d_theta: np.ndarray    # (..., N)
    d_action: np.ndarray   # (..., N)


def phi1(z):
    """(e^z - 1)/z and its derivative, switching to a Taylor branch for |z| < SWITCH_THRESHOLD."""
    z = np.asarray(z, dtype=complex)
    small = np.abs(z) < SWITCH_THRESHOLD
    zs = np.where(small, 1.0, z)
    em1 = np.expm1(zs)
    f = np.where(small, 1.0 + z / 2 + z * z / 6, em1 / zs)
    df = np.where(small, 0.5 + z / 3 + z * z / 8, (zs * (em1 + 1.0) - em1) / (zs * zs))
    return f, df


def _mode_sums(pert: FourierPerturbation, i, ang, w0, dw0, tau, span, sign, partials):
    """Sum over modes of -A e^{i(m ang - w tau)} g(Omega) and its partials.

    sign=+1: g = (e^{i Omega span} - 1)/(i Omega); sign=-1: g = (1 - e^{-i Omega span})/(i Omega);
    span=None: the stationary g = 1/(i Omega).
    """
    val = dth = dac = 0.0
    for md in pert.modes:
        big_omega = md.m * w0 - md.omega
        phase = np.exp(1j * (md.m * ang - md.omega * tau))
        a = md.amp(i)
        if span is None:
            if np.any(np.abs(big_omega) < 1e-12):
                raise ResonanceError(f"mode m={md.m} is resonant; the stationary generator "
                                     "does not exist")
            g = 1.0 / (1j * big_omega)
            g_omega = 1j / big_omega ** 2
        else:
            f, df = phi1(sign * 1j * big_omega * span)
            g = span * f
            g_omega = sign * 1j * span * span * df
        val = val - a * phase * g
        dth = dth - 1j * md.m * a * phase * g
        if partials:
            dac = dac - (md.damp(i) * phase * g + a * phase * g_omega * md.m * dw0)
    return val, dth, dac


def _assemble(sys: NearIntegrableSystem, i, ang, tau, span, sign, partials=True) -> W1Value:
    i = np.asarray(i, dtype=float)
    ang = np.asarray(ang, dtype=float)
    if i.shape[-1] != sys.n_modes or ang.shape != i.shape:
        raise ValueError(f"need actions and angles with last axis {sys.n_modes}")
    w0 = np.asarray(sys.omega0(i), dtype=float)
    dw0 = sys.dw0(i) if partials else np.zeros_like(i)
    value = np.zeros(i.shape[:-1])
    dth = np.zeros(i.shape)
    dac = np.zeros(i.shape)
    for k, pert in enumerate(sys.perturbations):
        v, a, b = _mode_sums(pert, i[..., k], ang[..., k], w0[..., k], dw0[..., k], tau,
                             span, sign, partials)
        value = value + np.real(v)
        dth[..., k] = np.real(a)
        dac[..., k] = np.real(b)
    return W1Value(value, dth, dac if partials else None)


def w1(sys: NearIntegrableSystem, i, theta0, t0: float, t: float, partials: bool = True) -> W1Value:
    """Along-orbit integral -int_{t0}^{t} H1(I, theta0 + omega0 (s - t0), s) ds.

    Partials are taken with respect to theta0 and I at fixed theta0.
    """
    if t < t0:
        raise ValueError("need t >= t0")
    return _assemble(sys, i, theta0, t0, t - t0, +1, partials)


def w1_field(sys: NearIntegrableSystem, i, theta, t: float, reference=0.0,
             partials: bool = True) -> W1Value:
    """The generator as a field on the current (I, theta) at time t.

    ``reference`` is the lower limit of the orbit integral, or STATIONARY.
    Partials are at fixed current angle.
    """
    if isinstance(reference, str):
        if reference != STATIONARY:
            raise ValueError(f"unknown reference {reference!r}")
        return _assemble(sys, i, theta, t, None, -1, partials)
    return _assemble(sys, i, theta, t, t - reference, -1, partials)


def w1_stationary(sys: NearIntegrableSystem, i, theta, t: float = 0.0,
                  partials: bool = True) -> W1Value:
    return w1_field(sys, i, theta, t, STATIONARY, partials)


def w2_numeric(sys: NearIntegrableSystem, i, theta, t: float, reference: float,
               nodes: int = 64) -> np.ndarray:
    """Second-order generator with K1 = K2 = 0: -int {W1, H1} along the unperturbed orbit.

    Gauss-Legendre quadrature from ``reference`` to t; W1 uses the same reference.
    Optional extension, not used by the stepping scheme.
    """
    i = np.asarray(i, dtype=float)
    theta = np.asarray(theta, dtype=float)
    span = t - reference
    if span == 0:
        return np.zeros(i.shape[:-1])
    x, w = np.polynomial.legendre.leggauss(nodes)
    s_nodes = reference + 0.5 * span * (x + 1.0)
    w0 = np.asarray(sys.omega0(i), dtype=float)
    total = np.zeros(i.shape[:-1])
    for s, wt in zip(s_nodes, w):
        th_s = theta - w0 * (t - s)
        wv = w1_field(sys, i, th_s, s, reference)
        bracket = 0.0
        for k, pert in enumerate(sys.perturbations):
            bracket = bracket + (wv.d_theta[..., k] * pert.d_action(i[..., k], th_s[..., k], s)
                                 - wv.d_action[..., k] * pert.d_theta(i[..., k], th_s[..., k], s))
        total = total + wt * bracket
    return -0.5 * span * total


def effective_epsilon(eps: float, dt: float, p: int = 1) -> float:
    """Per-step error scale 2 eps dt zeta(p + 1) for coefficients decaying like |m|^-(p+1)."""
    if int(p) != p or p < 1:
        raise ValueError("smoothness p must be an integer >= 1")
    if dt < 0:
        raise ValueError("dt must be non-negative")
    return float(2.0 * eps * dt * scipy.special.zeta(p + 1.0))


# transforms and stepping

def _check_actions(i):
    bad = np.argwhere(i < 0)
    if bad.size:
        idx = tuple(bad[0])
        raise NegativeActionError(int(idx[0]), float(i[idx]))


def transform(sys: NearIntegrableSystem, i, theta, t: float, reference=0.0):
    """(I, theta) -> (I_bar, theta_bar) to first order."""
    i = np.asarray(i, dtype=float)
    theta = np.asarray(theta, dtype=float)
    if sys.eps == 0:
        return i.copy(), theta.copy()
    wv = w1_field(sys, i, theta, t, reference)
    ib = i - sys.eps * wv.d_theta
    _check_actions(np.atleast_2d(ib))
    return ib, theta + sys.eps * wv.d_action


def inverse_transform(sys: NearIntegrableSystem, ib, thb, t: float, reference=0.0):
    """Sign-flipped first-order map with the generator evaluated at the barred point."""
    ib = np.asarray(ib, dtype=float)
    thb = np.asarray(thb, dtype=float)
    if sys.eps == 0:
        return ib.copy(), thb.copy()
    wv = w1_field(sys, ib, thb, t, reference)
    i = ib + sys.eps * wv.d_theta
    _check_actions(np.atleast_2d(i))
    return i, thb - sys.eps * wv.d_action


def wrap_angle(x):
    """Map to (-pi, pi]."""
    return -np.mod(-np.asarray(x) + math.pi, TWO_PI) + math.pi


@dataclass(frozen=True)
class LieStepReport:
    t: float
    eps_prime: float
    eps_total: float
    action_drift: float
    angle_residual: float


class LieStep(NamedTuple):
    actions: np.ndarray
    angles: np.ndarray
    report: LieStepReport


def lie_step(sys: NearIntegrableSystem, i, theta, t: float, dt: float, reference=None) -> LieStep:
    """Transform at t, drift theta_bar by omega0(I_bar) dt, transform back at t + dt.

    By default the generator's lower limit is the step start, so the forward
    transform is the identity and the generator stays bounded by dt even at
    resonance. Angles are not wrapped.
    """
    ref = t if reference is None else reference
    eps_p = effective_epsilon(sys.eps, dt, sys.smoothness)
    if eps_p > EPS_PRIME_LIMIT:
        warnings.warn(f"effective eps' = {eps_p:.3g} exceeds {EPS_PRIME_LIMIT}", RuntimeWarning,
                      stacklevel=2)
    i = np.asarray(i, dtype=float)
    theta = np.asarray(theta, dtype=float)
    if ref == t:
        ib, thb = i, theta
    else:
        ib, thb = transform(sys, i, theta, t, ref)
    thb = thb + np.asarray(sys.omega0(ib), dtype=float) * dt
    i1, th1 = inverse_transform(sys, ib, thb, t + dt, ref)
    drift = float(np.max(np.abs(i1 - i), initial=0.0))
    resid = float(np.max(np.abs(wrap_angle(th1 - theta - sys.omega0(i) * dt)), initial=0.0))
    return LieStep(i1, th1, LieStepReport(t + dt, eps_p, eps_p, drift, resid))


@dataclass(frozen=True)
class LieRun:
    times: np.ndarray
    actions: np.ndarray        # (n_records, n_traj, N)
    angles: np.ndarray
    eps_prime: np.ndarray
    eps_total: np.ndarray
    action_drift: np.ndarray   # barred-action drift from the start
    angle_residual: np.ndarray  # barred-angle deviation from linear drift


def lie_evolve(sys: NearIntegrableSystem, i0, theta0, T: float, dt: float, t0: float = 0.0,
               monitor=None, record_every: int = 1) -> LieRun:
    """Chain lie_step over [t0, t0 + T] with uniform steps T / ceil(T / dt).

    Barred variables for the drift diagnostics come from ``transform`` with
    lower limit ``monitor`` (default t0, or STATIONARY).
    """
    ref = t0 if monitor is None else monitor
    i = np.atleast_2d(np.asarray(i0, dtype=float))
    th = np.atleast_2d(np.asarray(theta0, dtype=float))
    n = step_count(T, dt)
    h = T / n if n else 0.0
    ib0, thb0 = transform(sys, i, th, t0, ref)
    w_bar = np.asarray(sys.omega0(ib0), dtype=float)
    times, acts, angs, eps_p, eps_t, drift, resid = [t0], [i], [th], [0.0], [0.0], [0.0], [0.0]
    total = 0.0
    for step in range(1, n + 1):
        t = t0 + (step - 1) * h
        res = lie_step(sys, i, th, t, h)
        i, th = res.actions, res.angles
        total += res.report.eps_prime
        if step % record_every == 0 or step == n:
            tn = t0 + step * h
            ib, thb = transform(sys, i, th, tn, ref)
            times.append(tn)
            acts.append(i)
            angs.append(th)
            eps_p.append(res.report.eps_prime)
            eps_t.append(total)
            drift.append(float(np.max(np.abs(ib - ib0))))
            resid.append(float(np.max(np.abs(wrap_angle(thb - thb0 - w_bar * (tn - t0))))))
    return LieRun(np.array(times), np.array(acts), np.array(angs), np.array(eps_p),
                  np.array(eps_t), np.array(drift), np.array(resid))


def reference_flow(sys: NearIntegrableSystem, i0, theta0, t0: float, span: float,
                   dt_ref: float):
    """rk4_reference integration of the full Hamiltonian in (theta, I) coordinates."""
    canon = sys.as_canonical()
    step = stepper(canon, "rk4_reference")
    q = np.array(theta0, dtype=float)
    p = np.array(i0, dtype=float)
    n = step_count(span, dt_ref)
    h = span / n if n else 0.0
    for k in range(n):
        q, p = step(q, p, t0 + k * h, h)
    return p, q


def phase_distance(i_a, th_a, i_b, th_b) -> np.ndarray:
    """Euclidean distance in (I, theta) with angle differences wrapped, per trajectory."""
    di = np.asarray(i_a) - np.asarray(i_b)
    dth = wrap_angle(np.asarray(th_a) - np.asarray(th_b))
    return np.sqrt(np.sum(di * di + dth * dth, axis=-1))


def one_step_error(sys: NearIntegrableSystem, i, theta, t: float, dt: float,
                   dt_ref: Optional[float] = None) -> float:
    """Largest deviation of one lie_step from the reference flow over the same dt."""
    dt_ref = dt / 64 if dt_ref is None else dt_ref
    res = lie_step(sys, i, theta, t, dt)
    ir, thr = reference_flow(sys, i, theta, t, dt, dt_ref)
    return float(np.max(phase_distance(res.actions, res.angles, ir, thr)))


def fit_power_law(x, y) -> tuple[float, float]:
    """Least-squares (exponent, prefactor) for y = C x^a on log data."""
    lx, ly = np.log(np.asarray(x, dtype=float)), np.log(np.asarray(y, dtype=float))
    a, b = np.polyfit(lx, ly, 1)
    return float(a), float(math.exp(b))


@dataclass(frozen=True)
class GlobalErrorProbe:
    times: np.ndarray
    errors: np.ndarray
    slope: float


def global_error_probe(sys: NearIntegrableSystem, i0, theta0, T: float, dt: float,
                       checkpoints: int = 8, dt_ref: Optional[float] = None,
                       t0: float = 0.0) -> GlobalErrorProbe:
    """Deviation between chained lie_step and the reference flow at evenly spaced times.

    The slope is the log-log growth rate of the error with elapsed time.
    """
    dt_ref = dt / 16 if dt_ref is None else dt_ref
    n = step_count(T, dt)
    h = T / n
    marks = sorted({max(1, round(n * (c + 1) / checkpoints)) for c in range(checkpoints)})
    i = np.atleast_2d(np.asarray(i0, dtype=float))
    th = np.atleast_2d(np.asarray(theta0, dtype=float))
    ir, thr = i.copy(), th.copy()
    sub = max(1, math.ceil(h / dt_ref - 1e-9))
    ref_step = stepper(sys.as_canonical(), "rk4_reference")
    times, errors = [], []
    for step in range(1, n + 1):
        t = t0 + (step - 1) * h
        i, th = lie_step(sys, i, th, t, h)[:2]
        for k in range(sub):
            thr, ir = ref_step(thr, ir, t + k * h / sub, h / sub)
        if step in marks:
            times.append(step * h)
            errors.append(float(np.max(phase_distance(i, th, ir, thr))))
    times, errors = np.array(times), np.array(errors)
    ok = errors > 0
    slope = fit_power_law(times[ok], errors[ok])[0] if ok.sum() >= 2 else float("nan")
    return GlobalErrorProbe(times, errors, slope)


def lie_lyapunov(sys: NearIntegrableSystem, i0, theta0, T: float, dt: float, **kw) -> float:
    """Finite-time maximal Lyapunov exponent of the full flow from (I0, theta0)."""
    z0 = np.concatenate([np.atleast_1d(theta0), np.atleast_1d(i0)]).astype(float)
    kw.setdefault("method", "rk4_reference")
    return lyapunov_exponent(sys.as_canonical(), z0, T, dt, **kw).exponent


# complexity

@dataclass(frozen=True)
class ComplexityRecord:
    quantum_width: float
    quantum_depth: float
    classical_memory: float
    classical_cost: float
    n_steps: float
    eps_total: float
    branch: str


def complexity_table(n_modes: int, n_traj: int, eps: float, eps_t: float, nu: float,
                     kappa: float, T: float, n_steps: Optional[float] = None,
                     branch: str = "auto") -> ComplexityRecord:
    """Formula-level quantum versus classical cost for evolving an ensemble over time T.

    Root branch (nu > 1): N_t = (eps T^nu / eps_t)^(1/(nu-1)).
    Linear branch (nu = 1): N_t is given and the accumulated error is eps T.
    The classical per-step polynomial in N is pinned to N^3.
    """
    for name, v in (("n_modes", n_modes), ("n_traj", n_traj), ("eps", eps), ("eps_t", eps_t),
                    ("nu", nu), ("kappa", kappa), ("T", T)):
        if not v > 0:
            raise ValueError(f"{name} must be positive, got {v}")
    if nu < 1:
        raise ValueError("nu must be >= 1")
    if branch == "auto":
        branch = "linear" if nu == 1 else "root"
    if branch == "root":
        if nu == 1:
            raise ValueError("the root branch needs nu > 1; use the linear branch at nu = 1")
        n_t = (eps * T ** nu / eps_t) ** (1.0 / (nu - 1.0))
        total = eps_t
    elif branch == "linear":
        if n_steps is None or n_steps <= 0:
            raise ValueError("the linear branch needs a positive n_steps")
        n_t = float(n_steps)
        total = eps * T
    else:
        raise ValueError(f"unknown branch {branch!r}")
    return ComplexityRecord(
        quantum_width=math.log2(n_modes * n_traj),
        quantum_depth=math.sqrt(n_traj) * n_modes * n_t,
        classical_memory=2.0 * n_modes * n_traj,
        classical_cost=n_traj * n_modes ** 3 * T / eps_t ** (1.0 / kappa),
        n_steps=n_t,
        eps_total=total,
        branch=branch,
    )


# observables in transformed variables

def _blocks(f) -> np.ndarray:
    return np.asarray(f.blocks if hasattr(f, "blocks") else f, dtype=complex)


def observable_transformed(f, ib, thb) -> float:
    """(1/N_s) sum_j sum_km f_km^j sqrt(I_k I_m) e^{-i(theta_m - theta_k)} at barred variables."""
    b = _blocks(f)
    ib = np.atleast_2d(np.asarray(ib, dtype=float))
    thb = np.atleast_2d(np.asarray(thb, dtype=float))
    if b.shape != ib.shape + (ib.shape[-1],):
        raise ValueError(f"observable {b.shape} does not match ensemble {ib.shape}")
    amp = np.sqrt(ib) * np.exp(-1j * thb)
    terms = np.einsum("jk,jkm,jm->j", amp.conj(), b, amp)
    return float(np.sum(terms.real) / ib.shape[0])


def _summands(b, i, theta, wv: W1Value):
    """F0 and F1 with barred summand = F0 - eps F1, as (N_s, N, N) arrays."""
    n = i.shape[-1]
    off = ~np.eye(n, dtype=bool)
    zero = i <= 0
    pair_zero = zero[:, :, None] | zero[:, None, :]
    if np.any((b != 0) & off[None] & pair_zero):
        j, k, m = np.argwhere((b != 0) & off[None] & pair_zero)[0]
        raise SingularActionError(f"trajectory {j}: action zero on off-diagonal entry ({k}, {m})")
    phase = np.exp(-1j * (theta[:, None, :] - theta[:, :, None]))  # e^{-i(theta_m - theta_k)}
    root = np.sqrt(i[:, :, None] * i[:, None, :])
    f0 = b * root * phase
    safe = np.where(zero, 1.0, i)
    ratio = np.sqrt(safe[:, :, None] / safe[:, None, :])  # sqrt(I_k / I_m)
    wth, wi = wv.d_theta, wv.d_action
    # F0 * [ (I_k W_th_m + I_m W_th_k) / (2 I_k I_m) + i (W_I_m - W_I_k) ], regular at k = m
    amp_part = 0.5 * (ratio * wth[:, None, :] + wth[:, :, None] / ratio)
    f1 = b * phase * (amp_part + 1j * root * (wi[:, None, :] - wi[:, :, None]))
    diag = np.arange(n)
    f1[:, diag, diag] = b[:, diag, diag] * wth
    return f0, f1


def first_order_pullback(f, i, theta, sys: NearIntegrableSystem, t: float = 0.0,
                         reference=0.0) -> float:
    """Transformed observable expanded to first order in eps at the original variables."""
    b = _blocks(f)
    i = np.atleast_2d(np.asarray(i, dtype=float))
    theta = np.atleast_2d(np.asarray(theta, dtype=float))
    wv = w1_field(sys, i, theta, t, reference)
    f0, f1 = _summands(b, i, theta, wv)
    return float(np.sum((f0 - sys.eps * f1).real) / i.shape[0])


def observable_rhs(f, i, theta, sys: NearIntegrableSystem) -> float:
    """d/dt of the first-order observable for an autonomous perturbation.

    Uses the stationary (time-independent) generator. The frequency-shift
    term multiplies the zeroth-order summand, as a first-order expansion of
    -i (omega_bar_m - omega_bar_k) (F0 - eps F1) requires.
    """
    if not sys.autonomous:
        raise ValueError("observable_rhs needs a time-independent generator; "
                         "the perturbation depends on time")
    b = _blocks(f)
    i = np.atleast_2d(np.asarray(i, dtype=float))
    theta = np.atleast_2d(np.asarray(theta, dtype=float))
    dw0 = sys.dw0(i)
    w0 = np.asarray(sys.omega0(i), dtype=float)
    wv = w1_stationary(sys, i, theta)
    f0, f1 = _summands(b, i, theta, wv)
    dw = w0[:, None, :] - w0[:, :, None]                      # omega_m - omega_k
    shift = (wv.d_theta * dw0)[:, None, :] - (wv.d_theta * dw0)[:, :, None]
    total = -1j * dw * f0 + 1j * sys.eps * dw * f1 + 1j * sys.eps * shift * f0
    return float(np.sum(total).real / i.shape[0])
