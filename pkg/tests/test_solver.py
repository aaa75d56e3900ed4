import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pathlip.ci import check_nonanticipative
from pathlip.hamiltonian import BellmanHamiltonian, make_benchmark
from pathlip.paths import CompactSetSpec, Horizon, path_from_function, sample_compact_set, zero_path
from pathlip.solver import (ControlSignal, SolverParams, ValueQuery, integrate_delay_ode, simulate, solve,
                            value_exhaustive, value_functional, value_refined, write_values_csv)


@pytest.fixture(scope="module")
def b1():
    return make_benchmark("B1", Horizon(1, 1.0, 0.5, 0.02))


def test_control_signal_validation():
    with pytest.raises(ValueError):
        ControlSignal((0.0, 1.0), (0, 1))
    with pytest.raises(ValueError):
        ControlSignal((0.0, 0.5, 0.5), (0, 1))
    u = ControlSignal.uniform(0.0, 1.0, [2, 0])
    assert u.switch_times == (0.0, 0.5, 1.0)


def test_solver_params_validation():
    with pytest.raises(ValueError):
        SolverParams(control_intervals=0)
    with pytest.raises(ValueError):
        SolverParams(method="grid")


def test_euler_constant_controls(b1):
    hz = b1.horizon
    x = path_from_function(hz, lambda t: 0.5 * t)
    y = integrate_delay_ode(b1.H, 0.2, x, ControlSignal.uniform(0.2, 1.0, [0, 2]))
    i = hz.index(0.2)
    assert np.array_equal(y.values[: i + 1], x.values[: i + 1])
    assert y(0.6)[0] == pytest.approx(0.1 - 0.4)
    assert y(1.0)[0] == pytest.approx(0.1)


def test_uneven_switch_times(b1):
    x = zero_path(b1.horizon)
    y = integrate_delay_ode(b1.H, 0.0, x, ControlSignal((0.0, 0.3, 1.0), (2, 1)))
    assert y(1.0)[0] == pytest.approx(0.3)
    with pytest.raises(ValueError):
        integrate_delay_ode(b1.H, 0.0, x, ControlSignal((0.1, 1.0), (0,)))


def test_simulate_checks_velocity_bound():
    H = make_benchmark("B1").H
    fast = BellmanHamiltonian(np.array([[5.0]]), lambda t, f, u: u, lambda t, f, u: np.zeros(f.size), c_H=1.0)
    x = zero_path(Horizon(1, 1.0, 0.5, 0.1))
    with pytest.raises(ValueError, match="exceeds"):
        simulate(fast, 0.0, x, [[0]])
    simulate(H, 0.0, x, [[0]])


def test_exhaustive_b1_exact(b1):
    D = sample_compact_set(CompactSetSpec(1.0, 5, 0), b1.horizon)
    for x in D:
        for t in (0.0, 0.37, 0.9):
            q = ValueQuery(t, x, b1.H, b1.sigma, control_intervals=3)
            assert value_exhaustive(q) == pytest.approx(b1.closed_form(x, t), abs=1e-12)


def test_exhaustive_returns_control_and_sigma_at_T(b1):
    x = zero_path(b1.horizon)
    val, u = value_exhaustive(ValueQuery(0.0, x, b1.H, b1.sigma, 2), return_control=True)
    assert val == pytest.approx(-1.0)
    assert u.indices == (0, 0)
    assert value_exhaustive(ValueQuery(1.0, x, b1.H, b1.sigma)) == 0.0


def test_enumeration_cap(b1):
    q = ValueQuery(0.0, zero_path(b1.horizon), b1.H, b1.sigma, control_intervals=8, enumeration_cap=100)
    with pytest.raises(ValueError, match="enumeration cap"):
        value_exhaustive(q)
    # auto falls back to the refined search
    assert solve(q, SolverParams(control_intervals=8, enumeration_cap=100)) == pytest.approx(-1.0)


def test_refined_trace_monotone(b1):
    b3 = make_benchmark("B3", b1.horizon)
    x = path_from_function(b1.horizon, lambda t: 0.3 * np.cos(3 * t))
    trace = []
    q = ValueQuery(0.1, x, b3.H, b3.sigma, control_intervals=5)
    val = value_refined(q, budget=6, n_random=4, seed=1, trace=trace)
    assert all(b <= a for a, b in zip(trace, trace[1:]))
    assert val == trace[-1]
    assert val >= value_exhaustive(q) - 1e-12


def test_substeps_reduce_b3_error():
    hz = Horizon(1, 1.0, 0.5, 0.02)
    b3 = make_benchmark("B3", hz)
    x = path_from_function(hz, lambda t: 0.5 + 0.2 * t)
    exact = b3.closed_form(x, 0.0)
    errs = [abs(value_exhaustive(ValueQuery(0.0, x, b3.H, b3.sigma, 2, hz.dt / s)) - exact) for s in (1, 4)]
    assert errs[1] < errs[0] / 2


def test_value_functional_is_nonanticipative(b1):
    phi = value_functional(b1.H, b1.sigma, SolverParams(control_intervals=2))
    x = path_from_function(b1.horizon, lambda t: np.sin(2 * t))
    assert check_nonanticipative(phi, 0.4, x, 10, seed=3) == 0.0
    assert phi(1.0, x) == b1.sigma(x)


def test_values_csv(tmp_path):
    p = tmp_path / "v.csv"
    write_values_csv([("q0", 0.1, 1 / 3)], p)
    lines = p.read_text().splitlines()
    assert lines[0] == "query,t,value"
    assert float(lines[1].split(",")[2]) == 1 / 3


@given(st.integers(0, 10 ** 6), st.integers(0, 49))
@settings(max_examples=25, deadline=None)
def test_b2_value_matches_closed_form(seed, k):
    hz = Horizon(1, 1.0, 0.5, 0.02)
    b2 = make_benchmark("B2", hz)
    x = sample_compact_set(CompactSetSpec(1.0, 1, seed), hz)[0]
    t = k * 0.02
    q = ValueQuery(t, x, b2.H, b2.sigma, control_intervals=4)
    assert value_exhaustive(q) == pytest.approx(b2.closed_form(x, t), abs=4 * hz.dt)
