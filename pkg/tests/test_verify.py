import json

import numpy as np
import pytest

from pathlip import lk
from pathlip.ci import Functional
from pathlip.hamiltonian import make_benchmark
from pathlip.paths import CompactSetSpec, Horizon, sample_compact_set, special_seminorm, stopped_sup_norm
from pathlip.verify import (VerificationReport, bump, bump_pairs, criterion_at_point, estimate_R,
                            lk_internal_checks, ode_residuals, probe_special_class, random_pairs,
                            state_violator, time_violator, verify_infinitesimal_criterion,
                            verify_special_lipschitz, verify_time_lipschitz, verify_uniform_lipschitz,
                            write_reports_json, write_summary_csv)


@pytest.fixture(scope="module")
def b1():
    return make_benchmark("B1", Horizon(1, 1.0, 0.5, 0.02))


@pytest.fixture(scope="module")
def D(b1):
    return sample_compact_set(CompactSetSpec(1.0, 12, 0), b1.horizon)


def closed(bench):
    return Functional(lambda t, x: bench.closed_form(x, t), f"closed[{bench.name}]")


def uctx(**kw):
    d = dict(T=1.0, c_H=1.0, lambda_H=1e-3, lambda_sigma=1.0)
    d.update(kw)
    return lk.LKContext("uniform", **d)


def test_report_pass_logic_and_json(tmp_path):
    r = VerificationReport("x", {"a": np.float64(1.5)}, {"n": 3}, 1.0, 2.0, 0.0, details={"v": np.nan})
    assert r.passed and r.margin == 1.0
    assert not VerificationReport("x", {}, {}, 2.0 + 1e-6, 2.0, 1e-9).passed
    assert VerificationReport("x", {}, {}, 2.0 + 1e-10, 2.0, 1e-9).passed
    d = r.to_dict()
    assert "runtime" not in d and d["details"]["v"] == "nan"
    write_reports_json([r], tmp_path / "r.json")
    assert json.loads((tmp_path / "r.json").read_text())["reports"][0]["constants_used"]["a"] == 1.5
    write_summary_csv([r], tmp_path / "s.csv")
    assert (tmp_path / "s.csv").read_text().splitlines()[0].startswith("theorem_id,worst_ratio")
    assert r.summary_line().startswith("PASS x")


def test_bump_shape():
    hz = Horizon(2, 1.0, 0.5, 0.1)
    b = bump(hz, 0.2, 0.2, [1.0, -2.0])
    np.testing.assert_allclose(b[hz.index(0.2)], [1.0, -2.0], rtol=1e-12)
    assert np.all(b[hz.index(0.4):] == 0) and np.all(b[: hz.index(0.0) + 1] == 0)


def test_pair_samplers(D):
    pairs = random_pairs(D, 10, seed=1)
    assert len(pairs) == 10 and all(a is not b for a, b in pairs)
    assert random_pairs(D[:1], 5) == []
    bp = bump_pairs(D, 8, [0.0, 0.5], seed=2)
    for x, y in bp:
        assert stopped_sup_norm(y - x, 1.0) <= 0.2 + 1e-12
    assert bump_pairs(D, 0, [0.0]) == []


def test_uniform_lipschitz_closed_forms(b1, D):
    ctx = uctx()
    pairs = random_pairs(D, 30) + bump_pairs(D, 20, [0.0, 0.5])
    rep = verify_uniform_lipschitz(closed(b1), D, [0.0, 0.5], ctx, pairs)
    # B1 value is x(t) - (T - t): its ratio never exceeds 1
    assert rep.passed and rep.worst_ratio <= 1.0 + 1e-12 and rep.margin > 0
    bad = verify_uniform_lipschitz(state_violator(ctx.lambda_phi), D, [0.0, 0.5], ctx, pairs)
    assert not bad.passed
    with pytest.raises(ValueError):
        verify_uniform_lipschitz(closed(b1), D, [0.0], lk.LKContext("special", 1.0, 1.0, 1.0, 1.0,
                                                                   h=0.5, lags=(0.5,)))


def test_special_lipschitz_and_probe(b1, D):
    ctx = lk.LKContext("special", 1.0, 1.0, 1e-3, 1.0, h=0.5, lags=(0.5,))
    pairs = random_pairs(D, 30) + bump_pairs(D, 20, [0.0, 0.5])
    rep = verify_special_lipschitz(closed(b1), D, [0.0, 0.5], ctx, pairs, sigma=b1.sigma)
    assert rep.passed and not rep.warnings
    assert rep.bound == pytest.approx(float(ctx.a(0.0)) * np.sqrt(ctx.omega + 1))
    # x(T) + x(T - h) is not bounded by |dx(T)| + L2 norm
    b2 = make_benchmark("B2", b1.horizon)
    probe = probe_special_class(b2.sigma, b1.horizon)
    assert probe["diverging"]
    assert not probe_special_class(b1.sigma, b1.horizon)["diverging"]
    rep2 = verify_special_lipschitz(closed(b1), D, [0.0], ctx, pairs[:5], sigma=b2.sigma)
    assert rep2.warnings
    bad = verify_special_lipschitz(state_violator(rep.bound), D, [0.5], ctx, pairs)
    assert not bad.passed


def test_state_violator_ratio_is_twice_bound(D):
    phi = state_violator(3.0)
    x, y = D[0], D[1]
    t = 0.5
    r = abs(phi(t, x) - phi(t, y)) / special_seminorm(y - x, t)
    assert r <= 2 * 3.0
    assert phi(t, x) == pytest.approx(6.0 * x(t)[0])


def test_time_lipschitz(b1, D):
    ctx = uctx()
    R1, R2 = estimate_R(b1.H, D)
    assert R2 == 0.0 and R1 <= 1.0
    rep = verify_time_lipschitz(closed(b1), 1.0, ctx, D, 10, R1, R2)
    # |d/dt (x(t) - (T - t))| <= lambda_x + 1
    assert rep.worst_ratio <= 2.0 + 1e-12 and rep.passed
    assert rep.constants_used["lambda_phi_time"] == pytest.approx(
        lk.lambda_phi_time(1.0, ctx.lambda_phi, R1, R2, ctx.c_H))
    bad = verify_time_lipschitz(time_violator(rep.bound), 1.0, ctx, D[:2], 5, R1, R2)
    assert not bad.passed


def test_criterion_holds_for_closed_form(b1, D):
    pts = [(0.0, D[0]), (0.3, D[1])]
    s = np.array([[-1.0], [0.0], [2.0]])
    rep = verify_infinitesimal_criterion(closed(b1), b1.H, 1.0, pts, s, directions=8, radii=8)
    assert rep.passed and rep.worst_ratio <= 1e-9
    res = criterion_at_point(closed(b1), b1.H, 1.0, 0.0, D[0], s, radii=8)
    assert len(res) == 3
    assert res[1]["min_expr"] <= 1e-9 and res[1]["max_expr"] >= -1e-9


def test_criterion_negative_control(b1, D):
    zero = Functional(lambda t, x: 0.0, "zero")
    pts = [(0.0, D[0])]
    rep = verify_infinitesimal_criterion(zero, lambda t, x, s: 1.0, 1.0, pts, [[0.0], [1.0]], radii=4)
    assert not rep.passed and rep.details["flagged_samples"] >= 1


def test_lk_internal_checks():
    fine = sample_compact_set(CompactSetSpec(1.0, 6, 4), Horizon(1, 1.0, 0.5, 1e-4))
    rep = lk_internal_checks(uctx(lambda_H=0.5), fine, [0.0, 0.3, 0.6], delta=1e-4)
    assert rep.passed, rep.details
    assert np.max(ode_residuals(uctx(lambda_H=0.5), np.linspace(0, 1, 50))) < 1e-5
