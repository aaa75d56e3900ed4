import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pathlip.hamiltonian import (BENCHMARKS, BellmanHamiltonian, _sq_integral_pl, default_horizon, eval_H,
                                 estimate_structural_constants, make_benchmark, node_features)
from pathlip.paths import CompactSetSpec, Horizon, make_path, path_from_function, sample_compact_set, zero_path


def velocity(t, feat, u):
    return u


def zero_cost(t, feat, u):
    return np.zeros(feat.size)


def test_b1_hamiltonian_is_minus_abs():
    bench = make_benchmark("B1")
    x = zero_path(bench.horizon)
    for s in (-2.0, -0.3, 0.0, 0.7, 3.0):
        assert eval_H(bench.H, 0.4, x, [s]) == pytest.approx(-abs(s))


def test_argmin_ties_lowest_index():
    H = BellmanHamiltonian(np.array([[-1.0], [0.0], [1.0]]), velocity, zero_cost, c_H=1.0)
    hz = Horizon(1, 1.0, 0.0, 0.1)
    feat = H.features(np.zeros((1, hz.num_nodes, 1)), hz, 3)
    vals, idx = H.batch(feat, np.zeros((1, 1)))
    assert vals[0] == 0.0 and idx[0] == 0


def test_empty_controls_rejected():
    with pytest.raises(ValueError):
        BellmanHamiltonian(np.zeros((0, 1)), velocity, zero_cost, c_H=1.0)


def test_features_read_lags_by_interpolation():
    hz = Horizon(1, 1.0, 0.5, 0.1)
    x = path_from_function(hz, lambda t: t)
    feat = node_features(x.values[None], hz, hz.index(0.6), lags=(0.25, 0.5), integral=True)
    np.testing.assert_allclose(feat.delayed[0, :, 0], [0.35, 0.1])
    # trapezoid integral of t over [-0.5, 0.6] is exact for linear functions
    assert feat.integral[0, 0] == pytest.approx((0.6 ** 2 - 0.25) / 2)


def test_features_are_nonanticipative():
    hz = Horizon(1, 1.0, 0.5, 0.1)
    rng = np.random.default_rng(0)
    v = rng.normal(size=(2, hz.num_nodes, 1))
    i = hz.index(0.4)
    v[1, : i + 1] = v[0, : i + 1]
    f = node_features(v, hz, i, lags=(0.5,), integral=True)
    assert np.array_equal(f.current[0], f.current[1])
    assert np.array_equal(f.delayed[0], f.delayed[1])
    assert np.array_equal(f.integral[0], f.integral[1])


def test_benchmark_catalogue():
    assert BENCHMARKS == ("B1", "B2", "B3")
    with pytest.raises(ValueError, match="unknown benchmark"):
        make_benchmark("B9")
    with pytest.raises(ValueError):
        make_benchmark("B1", Horizon(2, 1.0, 0.5, 0.1))
    with pytest.raises(ValueError):
        make_benchmark("B1", Horizon(1, 1.0, 0.0, 0.1))
    b2 = make_benchmark("B2")
    assert b2.classes == ("uniform",)
    assert "special" in make_benchmark("B3").classes


def test_closed_forms_at_terminal_time():
    hz = default_horizon()
    x = path_from_function(hz, lambda t: np.sin(4 * t))
    for name in BENCHMARKS:
        b = make_benchmark(name)
        assert b.closed_form(x, hz.T) == pytest.approx(b.sigma(x))
    b1 = make_benchmark("B1")
    assert b1.closed_form(x, 0.3) == pytest.approx(float(x(0.3)[0]) - 0.7)


def test_b2_branches_continuous():
    hz = default_horizon()
    b2 = make_benchmark("B2")
    x = path_from_function(hz, lambda t: 0.3 * t)
    # both formulas agree at t = T - h
    t = hz.T - hz.h
    left = 2 * 0.3 * t - 0 - hz.h
    right = 0.3 * t + 0.3 * t - (hz.T - t)
    assert left == pytest.approx(right)
    assert b2.closed_form(x, t) == pytest.approx(left)


def test_sq_integral_piecewise_linear():
    t = np.array([0.0, 0.5, 1.0])
    assert _sq_integral_pl(t, t) == pytest.approx(1 / 3)
    assert _sq_integral_pl(t, np.ones(3)) == pytest.approx(1.0)


def test_structural_constants_b1():
    b = make_benchmark("B1")
    D = sample_compact_set(CompactSetSpec(1.0, 12, 0), b.horizon)
    s = np.linspace(-2, 2, 5)[:, None]
    est = estimate_structural_constants(b.H, b.sigma, D, s, "uniform")
    # H = -|s| ignores the path; sigma = x(T) is 1-Lipschitz in sup norm
    assert est.lambda_H == 0.0
    assert 0 < est.lambda_sigma <= 1.0 + 1e-12
    assert est.c_H <= 1.0 + 1e-12
    assert not est.degenerate


def test_structural_constants_b3_special_and_degenerate():
    b = make_benchmark("B3")
    D = sample_compact_set(CompactSetSpec(1.0, 10, 1), b.horizon)
    s = np.linspace(-2, 2, 5)[:, None]
    est = estimate_structural_constants(b.H, b.sigma, D, s, "special")
    assert est.lambda_H > 0
    one = estimate_structural_constants(b.H, b.sigma, D[:1], s, "special")
    assert one.degenerate and one.lambda_H == 0.0 and one.warnings
    with pytest.raises(ValueError):
        estimate_structural_constants(b.H, b.sigma, [], s)


@given(st.floats(-5, 5), st.floats(-5, 5), st.floats(0, 1))
@settings(max_examples=50, deadline=None)
def test_hamiltonian_lipschitz_in_s(s1, s2, t):
    """|H(s1) - H(s2)| <= c_H (1 + sup norm) |s1 - s2| for the benchmarks."""
    hz = default_horizon()
    x = make_path(hz, np.linspace(-0.5, 0.5, hz.num_nodes))
    t = round(t, 2)
    for name in BENCHMARKS:
        H = make_benchmark(name).H
        d = abs(eval_H(H, t, x, [s1]) - eval_H(H, t, x, [s2]))
        assert d <= H.c_H * 1.5 * abs(s1 - s2) + 1e-12
