import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pathlip import lk
from pathlip.paths import Horizon, SampledPath, make_path, path_from_function, stopped_sup_norm, zero_path

# high-precision values computed once with mpmath (50 digits) from the
# closed forms; see notes for the derivation
A_UNIFORM_0 = 30.035652894201375403     # lambda_H = lambda_sigma = T = 1
LAMBDA_PHI = 42.476827677710289636
A_SPECIAL_0 = 478.96952135545939995     # J = 1, lambda_H = lambda_sigma = T = 1
LAMBDA_PHI_STAR = 1071.00840890134443


def uniform_ctx(**kw):
    d = dict(T=1.0, c_H=1.0, lambda_H=1.0, lambda_sigma=1.0)
    d.update(kw)
    return lk.LKContext("uniform", **d)


def special_ctx(**kw):
    d = dict(T=1.0, c_H=1.0, lambda_H=1.0, lambda_sigma=1.0, h=0.5, lags=(0.5,))
    d.update(kw)
    return lk.LKContext("special", **d)


def test_kappa():
    assert lk.KAPPA == pytest.approx(0.3819660112501051, rel=1e-15)
    # kappa solves k^2 - 3k + 1 = 0
    assert lk.KAPPA ** 2 - 3 * lk.KAPPA + 1 == pytest.approx(0.0, abs=1e-15)


def test_frozen_uniform_constants():
    ctx = uniform_ctx()
    assert float(ctx.a(0.0)) == pytest.approx(A_UNIFORM_0, rel=1e-13)
    assert ctx.lambda_phi == pytest.approx(LAMBDA_PHI, rel=1e-13)


def test_frozen_special_constants():
    ctx = special_ctx()
    assert ctx.omega == 4.0
    assert float(ctx.a(0.0)) == pytest.approx(A_SPECIAL_0, rel=1e-13)
    assert lk.lipschitz_constants(ctx) == {"lambda_phi_star": pytest.approx(LAMBDA_PHI_STAR, rel=1e-13)}


def test_omega_small_sigma():
    ctx = special_ctx(lambda_H=0.5, lambda_sigma=0.1, lags=(0.2, 0.5))
    assert ctx.omega == pytest.approx(4 * 2 * 0.5 / (math.sqrt(2) * 0.1))


def test_boundary_values():
    for lam_s in (1e-3, 0.7, 5.0):
        assert float(uniform_ctx(lambda_sigma=lam_s).a(1.0)) == pytest.approx(lam_s / math.sqrt(lk.KAPPA), rel=1e-12)
        assert float(special_ctx(lambda_sigma=lam_s).a(1.0)) == pytest.approx(math.sqrt(2) * lam_s, rel=1e-12)


@pytest.mark.parametrize("make", [uniform_ctx, special_ctx])
def test_analytic_derivative_matches_ode(make):
    ctx = make(lambda_H=0.3, lambda_sigma=0.8)
    ts = np.linspace(0, 1, 11)
    step = 1e-6
    fd = (ctx.a(ts + step) - ctx.a(ts - step)) / (2 * step)
    np.testing.assert_allclose(ctx.a_dot(ts), fd, rtol=1e-7)


@pytest.mark.parametrize("kw", [dict(lambda_H=0.0), dict(T=-1.0), dict(lambda_sigma=-1.0), dict(epsilon=0.0)])
def test_context_rejects_nonpositive(kw):
    with pytest.raises(ValueError):
        uniform_ctx(**kw)


def test_special_context_needs_lags():
    with pytest.raises(ValueError):
        special_ctx(lags=())
    with pytest.raises(ValueError):
        special_ctx(lags=(0.7,))


def test_context_dict_roundtrip():
    ctx = special_ctx(lags=(0.25, 0.5))
    d = ctx.to_dict()
    assert lk.LKContext.from_dict(d) == ctx
    assert "lambda_phi_star" in d and d["omega"] == ctx.omega


def test_lambda_phi_time():
    assert lk.lambda_phi_time(1.0, 2.0, 0.5, 0.25, 3.0) == pytest.approx(0.25 + 2.0 * (3.0 * 1.5 + 1.0))
    assert lk.lambda_phi_time(0.0, 0.0, 0.0, 0.0, 0.0) == 0.0
    with pytest.raises(ValueError):
        lk.lambda_phi_time(-1.0, 1.0, 0.0, 0.0, 1.0)


def test_zhou_examples():
    hz = Horizon(1, 1.0, 1.0, 0.5)
    assert lk.gamma_uniform(0.5, zero_path(hz)) == 0.0
    # running max |x| = 2 on [-1, 0.5], current value 1: (4 - 1)^2 / 4 + 1
    x = make_path(hz, [2.0, 0.0, 0.0, 1.0, 0.0])
    assert lk.gamma_uniform(0.5, x) == pytest.approx(9 / 4 + 1)
    # current value attains the max: gamma = M^2
    assert lk.gamma_uniform(0.0, make_path(hz, [0.0, 0.0, 3.0, 0.0, 0.0])) == 9.0
    assert np.array_equal(lk.grad_gamma_uniform(0.5, zero_path(hz)), [0.0])


def test_gamma_special_constant_path():
    # x = c on [-h, t]: c^2 + omega J lag c^2 + (t + h) c^2
    hz = Horizon(1, 1.0, 0.5, 0.01)
    ctx = special_ctx()
    x = make_path(hz, np.full(hz.num_nodes, 2.0))
    assert lk.gamma_special(0.3, x, ctx) == pytest.approx(4 * (1 + 4 * 0.5 + 0.8), rel=1e-12)


def test_gamma_special_window_interpolated():
    # lag not on the grid: the window integral uses an interpolated lower end
    hz = Horizon(1, 1.0, 0.5, 0.1)
    ctx = special_ctx(lags=(0.25,))
    x = path_from_function(hz, lambda t: t)
    i = hz.index(0.5)
    val = lk._integral_from(x.values, hz, lk.cumulative_sq(x.values, hz.dt), 0.25, i)
    # exact trapezoid on [0.25, 0.3] plus the grid pieces up to 0.5
    expect = 0.5 * 0.05 * (0.25 ** 2 + 0.3 ** 2) + sum(0.5 * 0.1 * (a * a + b * b) for a, b in
                                                     ((0.3, 0.4), (0.4, 0.5)))
    assert val == pytest.approx(expect, rel=1e-12)
    full = lk._integral_from(x.values, hz, lk.cumulative_sq(x.values, hz.dt), -0.5, i)
    assert lk.gamma_special(0.5, x, ctx) == pytest.approx(0.25 + ctx.omega * val + full, rel=1e-12)


def test_trace_matches_pointwise():
    hz = Horizon(2, 1.0, 0.5, 0.05)
    rng = np.random.default_rng(3)
    x = SampledPath(hz, rng.normal(size=(hz.num_nodes, 2)))
    ctx = special_ctx(lags=(0.2, 0.5))
    trace = lk.gamma_special_trace(x.values, hz, ctx)
    for t in (0.0, 0.35, 1.0):
        assert trace[hz.index(t)] == pytest.approx(lk.gamma_special(t, x, ctx), rel=1e-13)
    assert np.all(np.isnan(trace[: hz.zero_index]))
    batch = np.stack([x.values, 2 * x.values])
    at = lk.gamma_special_at(batch, hz, ctx, hz.index(0.35))
    assert at[1] == pytest.approx(4 * at[0], rel=1e-12)


def test_special_coefficient_nonpositive():
    for lam_H, lam_s in ((0.1, 0.1), (1.0, 1.0), (3.0, 0.05)):
        ctx = special_ctx(lambda_H=lam_H, lambda_sigma=lam_s)
        assert np.all(lk.special_coefficient(ctx, np.linspace(0, 1, 101)) <= 1e-12)


def test_nu_and_gradient_bound():
    hz = Horizon(1, 1.0, 0.5, 0.01)
    ctx = uniform_ctx(lambda_H=0.2)
    x = path_from_function(hz, lambda t: np.cos(5 * t))
    tt = 0.4
    assert lk.nu(tt, x, ctx) == pytest.approx(float(ctx.a(tt)) * math.sqrt(ctx.epsilon + lk.gamma_uniform(tt, x)))
    assert np.linalg.norm(lk.grad_nu(tt, x, ctx)) <= lk.nu_gradient_bound(tt, ctx)


# ---------------------------------------------------------------- properties

@st.composite
def random_paths(draw):
    n = draw(st.integers(1, 3))
    h = draw(st.sampled_from([0.0, 0.2, 0.5, 1.0]))
    seed = draw(st.integers(0, 2 ** 32 - 1))
    scale = draw(st.sampled_from([1e-3, 1.0, 1e3]))
    hz = Horizon(n, 1.0, h, 0.05)
    return SampledPath(hz, scale * np.random.default_rng(seed).normal(size=(hz.num_nodes, n)))


@given(random_paths(), st.integers(0, 20))
@settings(max_examples=100, deadline=None)
def test_zhou_two_sided_bound(x, i):
    t = i * 0.05
    M2 = stopped_sup_norm(x, t) ** 2
    g = lk.gamma_uniform(t, x)
    assert lk.KAPPA * M2 <= g * (1 + 1e-12)
    assert g <= 2 * M2 * (1 + 1e-12)


@given(random_paths(), st.integers(0, 20))
@settings(max_examples=100, deadline=None)
def test_gradient_norm_bound(x, i):
    t = i * 0.05
    g = lk.grad_gamma_uniform(t, x)
    assert np.linalg.norm(g) <= 2 * np.linalg.norm(x(t)) * (1 + 1e-12)
    ctx = uniform_ctx()
    assert np.linalg.norm(lk.grad_nu(t, x, ctx)) <= lk.nu_gradient_bound(t, ctx) * (1 + 1e-12)


@given(random_paths(), st.integers(0, 20), st.floats(0.01, 100.0))
@settings(max_examples=60, deadline=None)
def test_gamma_homogeneous_of_degree_two(x, i, c):
    t = i * 0.05
    y = x * c
    assert lk.gamma_uniform(t, y) == pytest.approx(c * c * lk.gamma_uniform(t, x), rel=1e-10)


@given(st.floats(0.01, 3.0), st.floats(0.01, 3.0), st.floats(0.1, 2.0))
@settings(max_examples=60, deadline=None)
def test_weights_decrease_and_positive(lam_H, lam_s, T):
    for ctx in (uniform_ctx(lambda_H=lam_H, lambda_sigma=lam_s, T=T),
                special_ctx(lambda_H=lam_H, lambda_sigma=lam_s, T=T)):
        ts = np.linspace(0, T, 50)
        a = ctx.a(ts)
        assert np.all(a > 0)
        assert np.all(np.diff(a) < 0)
        assert np.all(ctx.a_dot(ts) < 0)
