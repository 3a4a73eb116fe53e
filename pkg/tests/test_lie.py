import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hamsym import lie
from hamsym.dynamics import symplectic_defect
from hamsym.lie import (FourierMode, FourierPerturbation, NearIntegrableSystem,
                        NegativeActionError, ResonanceError, SingularActionError,
                        cosine_perturbation, twist_system)

I0 = np.array([[2.5]])
TH0 = np.array([[0.4]])


def test_phi1_branches_agree_at_switch():
    z = lie.SWITCH_THRESHOLD * np.exp(1j * np.linspace(0, 2 * np.pi, 9))
    lo, dlo = lie.phi1(z * (1 - 1e-9))
    hi, dhi = lie.phi1(z * (1 + 1e-9))
    assert np.max(np.abs(lo - hi)) < 1e-12
    assert np.max(np.abs(dlo - dhi)) < 1e-9
    f, _ = lie.phi1(np.array([1j * math.pi]))
    assert f[0] == pytest.approx(2j / math.pi)


@settings(max_examples=30, deadline=None)
@given(st.floats(0.3, 3.0), st.floats(0, 6.28), st.floats(-3, 3), st.floats(0.05, 4.0))
def test_field_generator_solves_the_homological_equation(i, th, t, span):
    # d_t W + omega0 d_theta W = -H1 along the field form with fixed lower limit
    sys_ = twist_system(0.1)
    ref = t - span
    h = 1e-5
    ii, tt = np.array([[i]]), np.array([[th]])
    w = lie.w1_field(sys_, ii, tt, t, ref)
    dwdt = (lie.w1_field(sys_, ii, tt, t + h, ref).value
            - lie.w1_field(sys_, ii, tt, t - h, ref).value) / (2 * h)
    lhs = dwdt + i * w.d_theta[..., 0]
    rhs = -sys_.perturbations[0].value(i, th, t)
    assert lhs[0] == pytest.approx(rhs, abs=1e-7)
    assert lie.w1_field(sys_, ii, tt, ref, ref).value[0] == pytest.approx(0.0, abs=1e-15)


def test_partials_match_finite_differences():
    amp = FourierMode(2, lambda i: 0.3 * i, 0.5, d_amplitude=lambda i: 0.3 + 0 * i)
    pert = FourierPerturbation((amp, FourierMode(-2, lambda i: 0.3 * i, -0.5,
                                                 d_amplitude=lambda i: 0.3 + 0 * i)))
    sys_ = NearIntegrableSystem(h0=lambda i: np.sum(i ** 3 / 3, axis=-1),
                                omega0=lambda i: np.asarray(i) ** 2,
                                perturbations=(pert,), eps=0.05,
                                domega0=lambda i: 2 * np.asarray(i))
    i, th, h = np.array([[1.3]]), np.array([[0.7]]), 1e-6
    w = lie.w1(sys_, i, th, 0.2, 1.9)
    d_th = (lie.w1(sys_, i, th + h, 0.2, 1.9).value - lie.w1(sys_, i, th - h, 0.2, 1.9).value) / (2 * h)
    d_i = (lie.w1(sys_, i + h, th, 0.2, 1.9).value - lie.w1(sys_, i - h, th, 0.2, 1.9).value) / (2 * h)
    assert w.d_theta[0, 0] == pytest.approx(d_th[0], abs=1e-8)
    assert w.d_action[0, 0] == pytest.approx(d_i[0], abs=1e-8)


def test_stationary_generator_and_resonance_error():
    sys_ = twist_system(0.1, drive=0.0)
    w = lie.w1_stationary(sys_, I0, TH0)
    assert (2.5 * w.d_theta)[0, 0] == pytest.approx(-math.cos(0.4))
    with pytest.raises(ResonanceError):
        lie.w1_stationary(twist_system(0.1), np.array([[1.0]]), TH0)


def test_perturbation_validation():
    with pytest.raises(ValueError):
        FourierPerturbation((FourierMode(1, 1.0, 0.0),))
    with pytest.raises(ValueError):
        FourierMode(0, 1.0)
    with pytest.raises(lie.MissingDerivativeError):
        FourierMode(1, lambda i: i).damp(1.0)
    with pytest.raises(ValueError):
        NearIntegrableSystem(h0=lambda i: i, omega0=lambda i: i,
                             perturbations=(cosine_perturbation(),), eps=1.5)
    p = cosine_perturbation(2.0, 3, 1.0)
    assert p.value(1.0, 0.2, 0.5) == pytest.approx(2.0 * math.cos(0.6 - 0.5))
    assert p.d_theta(1.0, 0.2, 0.5) == pytest.approx(-6.0 * math.sin(0.6 - 0.5))


def test_transform_roundtrip_is_second_order():
    res = []
    for eps in (0.02, 0.01):
        s = twist_system(eps)
        ib, thb = lie.transform(s, I0, TH0, 1.1)
        i1, th1 = lie.inverse_transform(s, ib, thb, 1.1)
        res.append(lie.phase_distance(i1, th1, I0, TH0)[0])
    assert res[0] / res[1] == pytest.approx(4.0, rel=0.05)
    same = lie.transform(twist_system(0.0), I0, TH0, 1.0)
    assert np.array_equal(same[0], I0)


def test_negative_action_is_reported():
    with pytest.raises(NegativeActionError) as info:
        lie.transform(twist_system(1.0, amplitude=5.0, drive=0.0), np.array([[0.01]]),
                      np.array([[math.pi]]), 0.0, lie.STATIONARY)
    assert info.value.index == 0 and info.value.value < 0


def test_lie_step_tracks_the_reference_flow():
    s = twist_system(0.02)
    step = lie.lie_step(s, I0, TH0, 0.3, 0.1)
    ir, thr = lie.reference_flow(s, I0, TH0, 0.3, 0.1, 0.1 / 64)
    assert lie.phase_distance(step.actions, step.angles, ir, thr)[0] < 1e-6
    assert step.report.eps_prime == pytest.approx(lie.effective_epsilon(0.02, 0.1))
    assert step.report.t == pytest.approx(0.4)


def test_lie_step_is_symplectic_to_second_order():
    defects = []
    for eps in (0.04, 0.02):
        s = twist_system(eps)

        def flow(z):
            r = lie.lie_step(s, z[1:], z[:1], 0.0, 0.1)
            return np.concatenate([r.angles, r.actions])

        defects.append(symplectic_defect(flow, np.array([0.4, 2.5]), 1e-5))
    assert defects[0] / defects[1] == pytest.approx(4.0, rel=0.2)


def test_large_effective_eps_warns():
    assert lie.effective_epsilon(0.5, 0.1, 1) == pytest.approx(0.1 * math.pi ** 2 / 6)
    with pytest.warns(RuntimeWarning):
        lie.lie_step(twist_system(0.5), I0, TH0, 0.0, 0.2)
    with pytest.raises(ValueError):
        lie.effective_epsilon(0.1, 0.1, 0)


def test_lie_evolve_records_and_bounds_drift():
    run = lie.lie_evolve(twist_system(0.01), I0, TH0, 20.0, 0.1, monitor=lie.STATIONARY,
                         record_every=50)
    assert run.times[-1] == pytest.approx(20.0)
    assert run.actions.shape == (len(run.times), 1, 1)
    assert run.action_drift.max() < 1e-4
    assert run.eps_total[-1] == pytest.approx(200 * lie.effective_epsilon(0.01, 0.1))


def test_w2_numeric_vanishes_on_zero_span():
    s = twist_system(0.1)
    assert lie.w2_numeric(s, I0, TH0, 1.0, 1.0)[0] == 0.0
    assert np.isfinite(lie.w2_numeric(s, I0, TH0, 1.0, 0.0)[0])


def test_fit_power_law():
    a, c = lie.fit_power_law([1, 2, 4], [3, 12, 48])
    assert a == pytest.approx(2.0) and c == pytest.approx(3.0)


def test_complexity_branches():
    rec = lie.complexity_table(4, 1024, 0.1, 0.01, 2.0, 4.0, 100.0)
    assert rec.branch == "root"
    assert rec.n_steps == pytest.approx(0.1 * 100.0 ** 2 / 0.01)
    assert rec.quantum_width == 12.0
    assert rec.classical_cost == pytest.approx(1024 * 64 * 100 / 0.01 ** 0.25)
    lin = lie.complexity_table(4, 16, 0.1, 0.01, 1.0, 4.0, 10.0, n_steps=50)
    assert lin.branch == "linear" and lin.eps_total == pytest.approx(1.0)
    with pytest.raises(ValueError):
        lie.complexity_table(4, 16, 0.1, 0.01, 1.0, 4.0, 10.0)
    with pytest.raises(ValueError):
        lie.complexity_table(4, 16, 0.1, 0.01, 1.0, 4.0, 10.0, n_steps=5, branch="root")


def test_transformed_observable_and_pullback():
    f = np.array([[[1.0, 0.5j], [-0.5j, 2.0]]])
    i, th = np.array([[1.0, 2.0]]), np.array([[0.3, 1.1]])
    direct = (1.0 + 4.0 + 2 * (0.5j * math.sqrt(2.0) * np.exp(-1j * (1.1 - 0.3))).real)
    assert lie.observable_transformed(f, i, th) == pytest.approx(direct)
    s = twist_system(0.0, n_modes=2)
    assert lie.first_order_pullback(f, i, th, s) == pytest.approx(direct)
    with pytest.raises(SingularActionError):
        lie.first_order_pullback(f, np.array([[0.0, 2.0]]), th, twist_system(0.1, n_modes=2))
    with pytest.raises(ValueError):
        lie.observable_rhs(f, i, th, twist_system(0.1, n_modes=2))


def test_lyapunov_separates_resonant_and_regular_orbits():
    s = twist_system(0.2)
    assert lie.lie_lyapunov(s, 1.0, 1e-6, 20.0, 0.01) > 0.25
    assert lie.lie_lyapunov(s, 2.5, 0.3, 20.0, 0.01) < 0.2
