import numpy as np
import pytest

from fastrons.integrators import (
    IntegrationError,
    IntegratorConfig,
    MaxStepsExceeded,
    StepSizeUnderflow,
    integrate,
)

METHODS = ["dopri54", "adams"]


def decay(t, q):
    return -q


def oscillator(t, y):
    return np.array([y[1], -y[0]])


@pytest.mark.parametrize("method", METHODS)
def test_exponential_decay(method):
    tr = integrate(decay, [1.0], (0.0, 1.0), IntegratorConfig(method, rtol=1e-9, atol=1e-12))
    assert abs(tr.q[-1, 0] - np.exp(-1.0)) <= 1e-8
    np.testing.assert_array_equal(tr.t, [0.0, 1.0])


@pytest.mark.parametrize("method", METHODS)
def test_error_scales_with_tolerance(method):
    errs = []
    for tol in (1e-4, 1e-6, 1e-8, 1e-10):
        tr = integrate(decay, [1.0], (0.0, 1.0), IntegratorConfig(method, rtol=tol, atol=tol))
        errs.append(abs(tr.q[-1, 0] - np.exp(-1.0)))
    ratios = np.array(errs) / np.array([1e-4, 1e-6, 1e-8, 1e-10])
    assert ratios.max() < 10.0
    assert errs[-1] < errs[0] * 1e-4


@pytest.mark.parametrize("method", METHODS)
def test_zero_field_single_step(method):
    tr = integrate(lambda t, q: np.zeros_like(q), [1.0, 2.0], (0.0, 5.0), IntegratorConfig(method))
    assert tr.n_accepted == 1
    np.testing.assert_array_equal(tr.q[-1], [1.0, 2.0])


@pytest.mark.parametrize("method", METHODS)
def test_zero_field_max_step_split(method):
    tr = integrate(lambda t, q: np.zeros_like(q), [1.0], (0.0, 5.0), IntegratorConfig(method, max_step=1.0))
    assert tr.n_accepted == 5


@pytest.mark.parametrize("method", METHODS)
def test_oscillator_energy(method):
    T = 100 * 2 * np.pi
    tr = integrate(oscillator, [1.0, 0.0], (0.0, T), IntegratorConfig(method, rtol=1e-10, atol=1e-12),
                   t_eval=np.linspace(0.0, T, 201))
    energy = 0.5 * (tr.q**2).sum(axis=1)
    assert np.abs(energy - 0.5).max() < 1e-6


@pytest.mark.parametrize("method", METHODS)
def test_dense_output_matches_reintegration(method):
    cfg = IntegratorConfig(method, rtol=1e-8, atol=1e-10)
    fun = lambda t, q: np.array([np.cos(t) * q[0]])
    ts = np.linspace(0.0, 3.0, 13)
    dense = integrate(fun, [1.0], (0.0, 3.0), cfg, t_eval=ts).q[:, 0]
    for t, v in zip(ts[1:], dense[1:]):
        direct = integrate(fun, [1.0], (0.0, t), cfg).q[-1, 0]
        assert abs(v - direct) <= 10 * 1e-8 * 3
    np.testing.assert_allclose(dense, np.exp(np.sin(ts)), rtol=1e-6)


@pytest.mark.parametrize("method", METHODS)
def test_deterministic(method):
    cfg = IntegratorConfig(method, rtol=1e-7)
    a = integrate(oscillator, [1.0, 0.5], (0.0, 10.0), cfg, t_eval=np.linspace(0, 10, 11))
    b = integrate(oscillator, [1.0, 0.5], (0.0, 10.0), cfg, t_eval=np.linspace(0, 10, 11))
    assert a.q.tobytes() == b.q.tobytes()
    assert (a.n_accepted, a.n_rejected) == (b.n_accepted, b.n_rejected)


@pytest.mark.parametrize("method", METHODS)
def test_backward_in_time(method):
    tr = integrate(decay, [np.exp(-1.0)], (1.0, 0.0), IntegratorConfig(method, rtol=1e-10, atol=1e-12))
    assert abs(tr.q[-1, 0] - 1.0) < 1e-8


@pytest.mark.parametrize("method", METHODS)
def test_callback_diagnostics(method):
    tr = integrate(decay, [1.0], (0.0, 1.0), IntegratorConfig(method), callback=lambda t, q: t)
    assert len(tr.diagnostics) == tr.n_accepted
    assert np.all(np.diff(tr.diagnostics) > 0)


@pytest.mark.parametrize("method", METHODS)
def test_max_steps(method):
    with pytest.raises(MaxStepsExceeded) as info:
        integrate(oscillator, [1.0, 0.0], (0.0, 100.0), IntegratorConfig(method, rtol=1e-10, max_steps=20),
                  t_eval=np.linspace(0, 100, 101))
    tr = info.value.trajectory
    assert tr is not None and tr.t.size >= 1 and tr.t[-1] < 100.0


@pytest.mark.parametrize("method", METHODS)
def test_step_underflow_on_singularity(method):
    # q' = q^2 blows up at t = 1
    with pytest.raises(IntegrationError):
        integrate(lambda t, q: q**2, [1.0], (0.0, 2.0), IntegratorConfig(method))


def test_underflow_is_integration_error():
    assert issubclass(StepSizeUnderflow, IntegrationError)


@pytest.mark.parametrize("kw", [dict(method="rk4"), dict(rtol=0.0), dict(atol=-1.0), dict(h0=2.0, max_step=1.0),
                                dict(max_order=13)])
def test_config_validation(kw):
    with pytest.raises(ValueError):
        IntegratorConfig(**kw)


@pytest.mark.parametrize("t_eval", [[0.0, 0.5, 0.5], [0.0, 2.0], [0.5, 0.2]])
def test_bad_sample_times(t_eval):
    with pytest.raises(ValueError):
        integrate(decay, [1.0], (0.0, 1.0), t_eval=t_eval)


def test_empty_span():
    with pytest.raises(ValueError):
        integrate(decay, [1.0], (1.0, 1.0))


@pytest.mark.parametrize("method", METHODS)
def test_non_finite_rhs(method):
    with pytest.raises((FloatingPointError, IntegrationError)):
        integrate(lambda t, q: q * np.nan, [1.0], (0.0, 1.0), IntegratorConfig(method))


def test_adams_variable_order_beats_low_order():
    T = 4 * np.pi
    hi = integrate(oscillator, [1.0, 0.0], (0.0, T), IntegratorConfig("adams", rtol=1e-7, atol=1e-9))
    lo = integrate(oscillator, [1.0, 0.0], (0.0, T), IntegratorConfig("adams", rtol=1e-7, atol=1e-9, max_order=2))
    assert hi.n_evals < lo.n_evals
