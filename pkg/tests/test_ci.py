import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pathlip.ci import (Functional, check_nonanticipative, ci_derivatives_fd, clip_schedule,
                        default_schedule, dini_directional, dini_quotients, random_tails)
from pathlip.paths import Horizon, path_from_function, stop, zero_path


@pytest.fixture
def hz():
    return Horizon(2, 1.0, 0.5, 0.001)


def affine(t, x):
    # dt = 3, grad = (1, -2)
    v = x(x.horizon.times[x.horizon.index(t)])
    return 3.0 * t + v[0] - 2.0 * v[1] + float(np.sum(x.values[: x.horizon.zero_index + 1, 0]))


def test_fd_exact_for_affine(hz):
    x = path_from_function(hz, lambda t: np.stack([np.sin(t), t * t], axis=-1))
    est = ci_derivatives_fd(Functional(affine), 0.3, x, 0.01)
    assert est.dt == pytest.approx(3.0, abs=1e-8)
    np.testing.assert_allclose(est.grad, [1.0, -2.0], atol=1e-8)
    assert est.residual < 1e-9
    assert est.probe_step == pytest.approx(0.01)


def test_fd_quadratic_first_order(hz):
    # phi = |x(t)|^2: grad 2 x(t), dt 0, forward-difference error O(delta)
    phi = Functional(lambda t, y: float(np.sum(y(t) ** 2)))
    x = path_from_function(hz, lambda t: np.stack([1 + t, -t], axis=-1))
    errs = [np.linalg.norm(ci_derivatives_fd(phi, 0.2, x, d).grad - 2 * x(0.2)) for d in (0.02, 0.01)]
    assert errs[1] == pytest.approx(errs[0] / 2, rel=1e-6)


def test_fd_rejects_step_past_T(hz):
    x = zero_path(hz)
    with pytest.raises(ValueError):
        ci_derivatives_fd(Functional(affine), 0.995, x, 0.01)


def test_schedule_and_quotients(hz):
    sch = default_schedule(hz)
    np.testing.assert_allclose(sch, hz.dt * np.array([64, 32, 16, 8, 4, 2, 1]))
    assert clip_schedule(sch, hz, 1.0 - 10 * hz.dt).max() <= 10 * hz.dt + 1e-15
    x = path_from_function(hz, lambda t: np.stack([np.cos(t), np.sin(t)], axis=-1))
    q = dini_quotients(Functional(affine), 0.5, x, np.array([1.0, 1.0]), sch)
    np.testing.assert_allclose(q, 3.0 + 1.0 - 2.0, atol=1e-8)
    lo, hi = dini_directional(Functional(affine), 0.5, x, np.array([0.0, 1.0]), sch)
    assert lo == pytest.approx(1.0) and hi == pytest.approx(1.0)
    with pytest.raises(ValueError):
        dini_quotients(Functional(affine), 0.5, x, np.zeros(2), [])
    with pytest.raises(ValueError):
        dini_quotients(Functional(affine), 0.99, x, np.zeros(2), sch)


def test_dini_of_kink():
    # phi = |x(t)| at x(t) = 0: quotient along f is |f| for every step
    hz = Horizon(1, 1.0, 0.0, 0.01)
    x = path_from_function(hz, lambda t: 0.0 * t)
    phi = Functional(lambda t, y: float(abs(y(t)[0])))
    for f in (-2.0, 0.5):
        lo, hi = dini_directional(phi, 0.3, x, np.array([f]), default_schedule(hz))
        assert lo == pytest.approx(abs(f)) and hi == pytest.approx(abs(f))


def test_nonanticipative_contract(hz):
    x = path_from_function(hz, lambda t: np.stack([t, 1 - t], axis=-1))
    good = Functional(lambda t, y: float(np.sum(stop(y, t).values ** 2)))
    bad = Functional(lambda t, y: float(y.values[-1, 0]), nonanticipative=False)
    assert check_nonanticipative(good, 0.4, x, 20, seed=1) == 0.0
    assert check_nonanticipative(bad, 0.4, x, 20, seed=1) > 0.0
    assert check_nonanticipative(bad, 0.4, x, 0) == 0.0


@given(st.integers(0, 10 ** 6), st.integers(0, 999))
@settings(max_examples=30, deadline=None)
def test_tails_keep_history(seed, k):
    hz = Horizon(1, 1.0, 0.2, 0.01)
    x = path_from_function(hz, lambda t: np.sin(7 * t))
    t = (k % 100) * 0.01
    i = hz.index(t)
    for y in random_tails(x, t, 3, seed):
        assert np.array_equal(y.values[: i + 1], x.values[: i + 1])
