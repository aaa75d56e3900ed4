"""Characteristic trajectories, the minimax identity residual and the comparison triples.

Two pieces of machinery live here.

* Characteristics: for a co-state s, a trajectory y extending x from t along
  which ``phi(tau, y) - phi(t, x)`` equals the integral of
  ``<s, y'> - H(xi, y, s)``. :func:`minimax_residual` measures the gap and
  :func:`characteristic_search` looks for a trajectory closing it.
* Comparison triples (y1, y2, z): two admissible trajectories plus a scalar
  bookkeeping state whose rate is
  ``chi = <grad nu(dy), f2 - f1> + H(y1, grad nu) - H(y2, grad nu)``.
  Along any such triple ``mu = nu(tau, y1 - y2) + z - eps (tau - t)`` should
  not increase when the constants in the context are valid.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from . import lk
from .hamiltonian import BellmanHamiltonian
from .paths import Horizon, SampledPath, stopped_sup_norm
from .solver import VELOCITY_TOL, simulate


def velocity_radius(t: float, x: SampledPath, c_H: float) -> float:
    """c_H (1 + sup norm of the stopped path)."""
    return c_H * (1.0 + stopped_sup_norm(x, t))


def _check_history(x: SampledPath, y: SampledPath, i: int):
    if x.horizon != y.horizon:
        raise ValueError("paths live on different horizons")
    if not np.array_equal(x.values[: i + 1], y.values[: i + 1]):
        raise ValueError("trajectory does not agree with the initial history on [-h, t]")


def _check_speed(values: np.ndarray, i0: int, dt: float, c_H: float, upto: int | None = None):
    """Raise if a step of a single trajectory (N, n) exceeds the admissible speed."""
    upto = values.shape[0] - 1 if upto is None else upto
    speed = np.linalg.norm(np.diff(values[i0: upto + 1], axis=0), axis=1) / dt
    sup = np.maximum.accumulate(np.linalg.norm(values[: upto + 1], axis=1))[i0:upto]
    bound = c_H * (1.0 + sup)
    # rounding in the difference quotient is relative to the state, not the speed
    slack = VELOCITY_TOL * bound + 4e-16 * (1.0 + sup) / dt
    bad = speed > bound + slack
    if np.any(bad):
        k = int(np.argmax(bad))
        raise ValueError(f"step {k} has speed {speed[k]:.6g} above the admissible {bound[k]:.6g}")


def hamiltonian_along(H: BellmanHamiltonian, y: SampledPath, i0: int, s, upto: int | None = None) -> np.ndarray:
    """H(tau_k, y, s) at nodes k = i0 .. upto - 1 (left endpoints)."""
    hz = y.horizon
    upto = hz.num_nodes - 1 if upto is None else upto
    s = np.asarray(s, dtype=float)[None]
    vals = np.empty(upto - i0)
    v = y.values[None]
    for j, k in enumerate(range(i0, upto)):
        vals[j] = H.batch(H.features(v, hz, k), s)[0][0]
    return vals


def identity_errors(phi, t: float, x: SampledPath, s, y: SampledPath, H: BellmanHamiltonian,
                    nodes=None, base: float | None = None, H_vals=None) -> np.ndarray:
    """Signed gaps ``phi(tau, y) - phi(t, x) - sum (<s, dy> - H dt)`` at the given nodes."""
    hz = x.horizon
    i0 = hz.index(t, lo=0.0)
    t0 = hz.times[i0]
    s = np.asarray(s, dtype=float)
    nodes = np.arange(i0, hz.num_nodes) if nodes is None else np.asarray(nodes, dtype=int)
    upto = int(nodes.max())
    if H_vals is None:
        H_vals = hamiltonian_along(H, y, i0, s, upto)
    base = phi(t0, x) if base is None else base
    incr = np.diff(y.values[i0: upto + 1], axis=0) @ s - H_vals[: upto - i0] * hz.dt
    rhs = np.concatenate([[0.0], np.cumsum(incr)])
    errs = np.empty(len(nodes))
    for j, k in enumerate(nodes):
        lhs = (phi(hz.times[k], y) if k > i0 else phi(t0, y)) - base
        errs[j] = lhs - rhs[k - i0]
    return errs


def minimax_residual(phi, t: float, x: SampledPath, s, y: SampledPath, H: BellmanHamiltonian,
                     c_H: float | None = None, nodes=None) -> float:
    """Largest gap in the minimax identity over grid times tau in [t, T].

    The integral is a left-endpoint sum with per-step velocities, matching
    the Euler integrator. With `c_H` given, the speed bound of y is checked.
    """
    hz = x.horizon
    i0 = hz.index(t, lo=0.0)
    _check_history(x, y, i0)
    if c_H is not None:
        _check_speed(y.values, i0, hz.dt, c_H)
    if i0 == hz.num_nodes - 1:
        return 0.0
    return float(np.max(np.abs(identity_errors(phi, t, x, s, y, H, nodes))))


# ------------------------------------------------------------ search


def _piecewise_path(x: SampledPath, i0: int, bounds, velocities, upto: int | None = None) -> np.ndarray:
    """Node values of x stopped at i0 and continued with per-interval velocities."""
    hz = x.horizon
    v = x.values.copy()
    v[i0 + 1:] = v[i0]
    dt = hz.dt
    last = hz.num_nodes - 1 if upto is None else upto
    for (a, b), f in zip(zip(bounds[:-1], bounds[1:]), velocities):
        if a >= last:
            break
        b = min(b, last)
        v[a + 1: b + 1] = v[a] + np.arange(1, b - a + 1)[:, None] * dt * f
        v[b + 1:] = v[b]
    return v


def _ball_candidates(rng, n: int, radius: float, count: int) -> np.ndarray:
    if n == 1:
        return np.linspace(-radius, radius, count + 1)[:, None]
    d = rng.normal(size=(count, n))
    d /= np.linalg.norm(d, axis=1, keepdims=True)
    r = radius * rng.uniform(size=(count, 1)) ** (1.0 / n)
    r[: count // 4] = radius  # part of the budget on the sphere
    return np.vstack([np.zeros((1, n)), d * r])


def _clip_ball(f: np.ndarray, radius: float) -> np.ndarray:
    r = np.linalg.norm(f, axis=-1, keepdims=True)
    return np.where(r > radius, f * (radius / np.maximum(r, 1e-300)), f)


@dataclass
class SearchResult:
    y: SampledPath
    residual: float
    velocities: np.ndarray
    source: str


def characteristic_search(phi, t: float, x: SampledPath, s, H: BellmanHamiltonian, c_H: float,
                          budget: int = 2, intervals: int = 8, samples: int = 16,
                          refine_rounds: int = 6, warm_starts: bool = True, seed=0) -> SearchResult:
    """Search piecewise-constant-velocity trajectories for a small minimax residual.

    With ``budget >= 1`` an interval-by-interval march picks, on each
    interval, the admissible velocity that best closes the identity at the
    interval end (ball samples plus shrinking refinement); the remaining
    ``budget - 1`` passes are coordinate-descent sweeps on the max gap over
    interval ends. Constant-control trajectories of `H` enter as warm starts.
    With ``budget = 0`` and no warm starts the zero-velocity trajectory is
    returned. The reported residual is taken over every grid time.
    """
    hz = x.horizon
    n = hz.n
    i0 = hz.index(t, lo=0.0)
    t0 = hz.times[i0]
    s = np.asarray(s, dtype=float)
    rng = np.random.default_rng(seed)
    steps = hz.num_nodes - 1 - i0
    if steps == 0:
        return SearchResult(x, 0.0, np.zeros((0, n)), "terminal")
    L = max(1, min(intervals, steps))
    bounds = [i0 + (steps * j) // L for j in range(L + 1)]
    ends = np.array(bounds[1:])
    base = phi(t0, x)

    def objective(V, nodes):
        y = SampledPath(hz, _piecewise_path(x, i0, bounds, V))
        return float(np.max(np.abs(identity_errors(phi, t0, x, s, y, H, nodes, base)))), y

    candidates = []  # (objective over ends, V, source)
    zero = np.zeros((L, n))
    candidates.append((objective(zero, ends)[0], zero, "zero"))

    warm_V = []
    if warm_starts:
        for u in range(H.num_controls):
            vals, _ = simulate(H, t0, x, np.full((1, 1), u))
            # interval-average velocities reproduce the control trajectory at interval ends
            V = np.array([(vals[0, b] - vals[0, a]) / ((b - a) * hz.dt)
                          for a, b in zip(bounds[:-1], bounds[1:])])
            warm_V.append(V)
            candidates.append((objective(V, ends)[0], V, f"control[{u}]"))

    def radius_at(V, j):
        v = _piecewise_path(x, i0, bounds, V, upto=bounds[j])
        return c_H * (1.0 + np.max(np.linalg.norm(v[: bounds[j] + 1], axis=1)))

    if budget >= 1:
        V = np.zeros((L, n))
        for j in range(L):
            R = radius_at(V, j) * (1 - 1e-12)
            pool = [_ball_candidates(rng, n, R, samples)] + [W[j: j + 1] for W in warm_V]
            pool = _clip_ball(np.vstack(pool), R)
            node = np.array([bounds[j + 1]])

            def err_of(f):
                W = V.copy()
                W[j] = f
                return objective(W, node)[0]

            errs = np.array([err_of(f) for f in pool])
            best = pool[int(np.argmin(errs))].copy()
            best_err = float(errs.min())
            width = 2.0 * R / samples
            for _ in range(refine_rounds):
                if n == 1:
                    trial = best + np.array([[-width], [-0.5 * width], [0.5 * width], [width]])
                else:
                    trial = best + width * rng.normal(size=(2 * n + 2, n)) / np.sqrt(n)
                trial = _clip_ball(trial, R)
                e = np.array([err_of(f) for f in trial])
                if e.min() < best_err:
                    best_err, best = float(e.min()), trial[int(np.argmin(e))].copy()
                width *= 0.5
            V[j] = best
        candidates.append((objective(V, ends)[0], V.copy(), "march"))

        for _ in range(budget - 1):
            improved = False
            cur = V.copy()
            cur_obj = objective(cur, ends)[0]
            for j in range(L):
                R = radius_at(cur, j) * (1 - 1e-12)
                width = 2.0 * R / samples
                trial = _clip_ball(cur[j] + width * np.vstack([np.eye(n), -np.eye(n)]), R)
                for f in trial:
                    W = cur.copy()
                    W[j] = f
                    # later velocities may leave the ball once the radius shifts
                    ok = all(np.linalg.norm(W[k]) <= radius_at(W, k) for k in range(j, L))
                    if not ok:
                        continue
                    o = objective(W, ends)[0]
                    if o < cur_obj:
                        cur, cur_obj, improved = W, o, True
            V = cur
            candidates.append((cur_obj, V.copy(), "sweep"))
            if not improved:
                break

    if budget == 0 and not warm_starts:
        chosen = candidates[0]
    else:
        chosen = min(candidates, key=lambda c: c[0])
    y = SampledPath(hz, _piecewise_path(x, i0, bounds, chosen[1]))
    residual = minimax_residual(phi, t0, x, s, y, H, c_H)
    return SearchResult(y, residual, chosen[1], chosen[2])


# ------------------------------------------------------------ reachable set


def integrate_policy(x_values: np.ndarray, horizon: Horizon, t: float, policy, c_H: float,
                     features=None) -> np.ndarray:
    """Trajectories (B, N, n) from histories (B, N, n) driven by a velocity policy.

    `policy(tau, current, radius)` returns (B, n) velocities; they must lie in
    the admissible ball of radius c_H (1 + running sup norm).
    """
    i0 = horizon.index(t, lo=0.0)
    v = np.array(x_values, dtype=float, copy=True)
    v[:, i0 + 1:] = v[:, i0: i0 + 1]
    sup = np.linalg.norm(v[:, : i0 + 1], axis=-1).max(axis=1)
    dt = horizon.dt
    for k in range(i0, horizon.num_nodes - 1):
        radius = c_H * (1.0 + sup)
        f = np.asarray(policy(horizon.times[k], v[:, k], radius), dtype=float)
        if np.any(np.linalg.norm(f, axis=1) > radius * (1 + VELOCITY_TOL)):
            raise ValueError("policy emitted an inadmissible velocity")
        v[:, k + 1] = v[:, k] + f * dt
        sup = np.maximum(sup, np.linalg.norm(v[:, k + 1], axis=1))
    return v


class RandomPolicy:
    """Velocity = direction * fraction * radius, piecewise constant in time.

    Directions and fractions are drawn once per row and coarse interval, so
    the same policy can drive a trajectory on grids of different spacing.
    """

    def __init__(self, rows: int, n: int, t: float, T: float, intervals: int = 8, seed=0,
                 max_fraction: float = 1.0):
        rng = np.random.default_rng(seed)
        d = rng.normal(size=(rows, intervals, n))
        self.directions = d / np.linalg.norm(d, axis=-1, keepdims=True)
        self.fractions = max_fraction * rng.uniform(size=(rows, intervals))
        self.t, self.T, self.intervals = float(t), float(T), intervals

    def _interval(self, tau):
        span = max(self.T - self.t, 1e-300)
        return min(int((tau - self.t) / span * self.intervals + 1e-9), self.intervals - 1)

    def __call__(self, tau, current, radius):
        j = self._interval(tau)
        return self.directions[:, j] * (self.fractions[:, j] * radius * (1 - 1e-12))[:, None]


class OutwardPolicy:
    """Maximal speed pointing away from the origin (fastest growth of the norm)."""

    def __call__(self, tau, current, radius):
        r = np.linalg.norm(current, axis=1, keepdims=True)
        e = np.zeros_like(current)
        e[:, 0] = 1.0
        d = np.where(r > 0, current / np.maximum(r, 1e-300), e)
        return d * (radius * (1 - 1e-12))[:, None]


class ControlPolicy:
    """Velocities of a Bellman Hamiltonian under per-row control indices (B, K)."""

    def __init__(self, H: BellmanHamiltonian, indices, t: float, T: float, horizon: Horizon):
        self.H = H
        self.indices = np.atleast_2d(np.asarray(indices, dtype=int))
        self.t, self.T, self.horizon = float(t), float(T), horizon
        self._values = None

    def bind(self, values):
        """Trajectory arrays the dynamics read their features from."""
        self._values = values

    def __call__(self, tau, current, radius):
        K = self.indices.shape[1]
        span = max(self.T - self.t, 1e-300)
        j = min(int((tau - self.t) / span * K + 1e-9), K - 1)
        hz = self.horizon
        k = hz.index(tau)
        if self._values is None:
            raise RuntimeError("ControlPolicy needs bind() before use")
        feat = self.H.features(self._values, hz, k)
        return self.H.velocities(feat, self.indices[:, j])


def sample_reachable_hull(D: list, c_H: float, t_samples=None, per_path: int = 2, seed=0,
                          intervals: int = 4) -> list:
    """Paths of the set K(D): admissible extensions of members of D from several times.

    For every start time and path of D, `per_path` random admissible
    extensions plus one maximal-speed outward extension are generated.
    """
    if not D:
        return []
    hz = D[0].horizon
    if t_samples is None:
        t_samples = np.linspace(0.0, hz.T, 5)
    base = np.stack([x.values for x in D])
    out = list(D)
    for a, t in enumerate(t_samples):
        t = float(t)
        rows = np.repeat(base, per_path, axis=0)
        pol = RandomPolicy(len(rows), hz.n, t, hz.T, intervals, seed=(seed, a))
        vals = integrate_policy(rows, hz, t, pol, c_H)
        out.extend(SampledPath(hz, v) for v in vals)
        vals = integrate_policy(base, hz, t, OutwardPolicy(), c_H)
        out.extend(SampledPath(hz, v) for v in vals)
    return out


# ------------------------------------------------------------ triples


@dataclass(frozen=True, eq=False)
class CharacteristicTriple:
    y1: SampledPath
    y2: SampledPath
    z: SampledPath
    start_t: float
    band: str = "center"


def _band_offset(band: str, eps: float) -> float:
    return {"center": 0.0, "upper": eps, "lower": -eps}[band]


def _nu_grad_step(ctx: lk.LKContext, k: int, hz: Horizon, d, q, cum, M2):
    """gamma and grad gamma of the difference at node k from running state."""
    if ctx.variant == lk.UNIFORM:
        g = lk.zhou_from_norms(M2, q[:, k])
        grad = lk.zhou_gradient(d[:, k], M2)
    else:
        g = lk.gamma_special_at(d, hz, ctx, k, cum, q)
        grad = 2.0 * d[:, k]
    return g, grad


def build_F_triples(H: BellmanHamiltonian, ctx: lk.LKContext, t: float, x1s, x2s, policy1, policy2,
                    z0=None, phi=None, band: str = "center") -> list:
    """Integrate batches of comparison triples from pairs of histories.

    Parameters
    ----------
    x1s, x2s : lists of SampledPath (same length B)
    policy1, policy2 : callables (tau, current (B, n), radius (B,)) -> (B, n)
        A :class:`ControlPolicy` is bound to its trajectory automatically.
    z0 : array (B,), optional
        Initial bookkeeping value phi(t, x2) - phi(t, x1); computed with
        `phi` when omitted. (mu increments do not depend on it.)
    band : "center", "upper" or "lower"
        Where z' sits inside the admissible band [chi - eps, chi + eps].
    """
    hz = x1s[0].horizon
    B = len(x1s)
    if len(x2s) != B:
        raise ValueError("x1s and x2s differ in length")
    i0 = hz.index(t, lo=0.0)
    t0 = hz.times[i0]
    if z0 is None:
        if phi is None:
            raise ValueError("need z0 or phi")
        z0 = np.array([phi(t0, b) - phi(t0, a) for a, b in zip(x1s, x2s)])
    z0 = np.broadcast_to(np.asarray(z0, dtype=float), (B,))
    offset = _band_offset(band, ctx.epsilon)
    y1 = np.stack([x.values for x in x1s]).copy()
    y2 = np.stack([x.values for x in x2s]).copy()
    y1[:, i0 + 1:] = y1[:, i0: i0 + 1]
    y2[:, i0 + 1:] = y2[:, i0: i0 + 1]
    for pol, arr in ((policy1, y1), (policy2, y2)):
        if isinstance(pol, ControlPolicy):
            pol.bind(arr)
    N, dt = hz.num_nodes, hz.dt
    z = np.empty((B, N))
    z[:, : i0 + 1] = z0[:, None]
    d = y1 - y2
    q = np.sum(d ** 2, axis=-1)
    cum = lk.cumulative_sq(d[:, : i0 + 1], dt)
    cum = np.concatenate([cum, np.zeros((B, N - i0 - 1))], axis=1)
    M2 = q[:, : i0 + 1].max(axis=1)
    sup1 = np.linalg.norm(y1[:, : i0 + 1], axis=-1).max(axis=1)
    sup2 = np.linalg.norm(y2[:, : i0 + 1], axis=-1).max(axis=1)
    for k in range(i0, N - 1):
        tau = hz.times[k]
        r1, r2 = H.c_H * (1 + sup1), H.c_H * (1 + sup2)
        f1 = np.asarray(policy1(tau, y1[:, k], r1), dtype=float)
        f2 = np.asarray(policy2(tau, y2[:, k], r2), dtype=float)
        if np.any(np.linalg.norm(f1, axis=1) > r1 * (1 + VELOCITY_TOL)) or \
                np.any(np.linalg.norm(f2, axis=1) > r2 * (1 + VELOCITY_TOL)):
            raise ValueError(f"policy emitted an inadmissible velocity at t = {tau:.6g}")
        g, grad = _nu_grad_step(ctx, k, hz, d, q, cum, M2)
        gn = ctx.a(tau) * grad / (2.0 * np.sqrt(ctx.epsilon + g))[:, None]
        H1 = H.batch(H.features(y1, hz, k), gn)[0]
        H2 = H.batch(H.features(y2, hz, k), gn)[0]
        chi = np.einsum("bn,bn->b", gn, f2 - f1) + H1 - H2
        z[:, k + 1] = z[:, k] + (chi + offset) * dt
        y1[:, k + 1] = y1[:, k] + f1 * dt
        y2[:, k + 1] = y2[:, k] + f2 * dt
        d[:, k + 1] = y1[:, k + 1] - y2[:, k + 1]
        q[:, k + 1] = np.sum(d[:, k + 1] ** 2, axis=-1)
        cum[:, k + 1] = cum[:, k] + 0.5 * dt * (q[:, k] + q[:, k + 1])
        M2 = np.maximum(M2, q[:, k + 1])
        sup1 = np.maximum(sup1, np.linalg.norm(y1[:, k + 1], axis=1))
        sup2 = np.maximum(sup2, np.linalg.norm(y2[:, k + 1], axis=1))
    zh = Horizon(1, hz.T, hz.h, hz.grid_step)
    return [CharacteristicTriple(SampledPath(hz, y1[b]), SampledPath(hz, y2[b]),
                                 SampledPath(zh, z[b]), float(t0), band) for b in range(B)]


def build_F_triple(H, ctx, t, x1, x2, policy1, policy2, z0=None, phi=None, band="center"):
    """Single-pair wrapper around :func:`build_F_triples`; policies act on one row."""
    return build_F_triples(H, ctx, t, [x1], [x2], policy1, policy2,
                           None if z0 is None else [z0], phi, band)[0]


def _difference_traces(triple: CharacteristicTriple, ctx: lk.LKContext):
    """gamma and grad gamma of y1 - y2 at every node from whole-path formulas."""
    hz = triple.y1.horizon
    d = triple.y1.values - triple.y2.values
    if ctx.variant == lk.UNIFORM:
        g = lk.gamma_uniform_trace(d)
        M2 = np.maximum.accumulate(np.sum(d ** 2, axis=-1))
        grad = lk.zhou_gradient(d, M2)
    else:
        g = lk.gamma_special_trace(d, hz, ctx)
        grad = 2.0 * d
    return g, grad


def mu_trace(triple: CharacteristicTriple, ctx: lk.LKContext) -> np.ndarray:
    """mu at nodes start_t .. T."""
    hz = triple.y1.horizon
    i0 = hz.index(triple.start_t, lo=0.0)
    g, _ = _difference_traces(triple, ctx)
    tau = hz.times[i0:]
    return ctx.a(tau) * np.sqrt(ctx.epsilon + g[i0:]) + triple.z.values[i0:, 0] \
        - ctx.epsilon * (tau - triple.start_t)


def mu_monotonicity_check(triple: CharacteristicTriple, ctx: lk.LKContext) -> float:
    """Largest per-step increment of mu (negative when mu strictly decreases)."""
    mu = mu_trace(triple, ctx)
    if mu.size < 2:
        return float("-inf")
    return float(np.max(np.diff(mu)))


@dataclass
class MembershipReport:
    max_speed_excess1: float
    max_speed_excess2: float
    max_band_slack: float
    ok: bool


def check_F_membership(triple: CharacteristicTriple, H: BellmanHamiltonian, ctx: lk.LKContext,
                       tol: float = 1e-9) -> MembershipReport:
    """Recompute velocities and chi from the stored trajectories and compare."""
    hz = triple.y1.horizon
    i0 = hz.index(triple.start_t, lo=0.0)
    dt = hz.dt
    g, grad = _difference_traces(triple, ctx)
    tau = hz.times[i0:-1]
    gn = ctx.a(tau)[:, None] * grad[i0:-1] / (2.0 * np.sqrt(ctx.epsilon + g[i0:-1]))[:, None]
    excess = []
    f = []
    for y in (triple.y1, triple.y2):
        fv = np.diff(y.values[i0:], axis=0) / dt
        sup = np.maximum.accumulate(y.norms())[i0:-1]
        bound = H.c_H * (1 + sup)
        excess.append(float(np.max(np.linalg.norm(fv, axis=1) / bound - 1.0)) if len(fv) else -1.0)
        f.append(fv)
    H1 = np.array([H.batch(H.features(triple.y1.values[None], hz, k), gn[j: j + 1])[0][0]
                   for j, k in enumerate(range(i0, hz.num_nodes - 1))])
    H2 = np.array([H.batch(H.features(triple.y2.values[None], hz, k), gn[j: j + 1])[0][0]
                   for j, k in enumerate(range(i0, hz.num_nodes - 1))])
    chi = np.einsum("kn,kn->k", gn, f[1] - f[0]) + H1 - H2
    zdot = np.diff(triple.z.values[i0:, 0]) / dt
    slack = float(np.max(np.abs(zdot - chi))) if len(chi) else 0.0
    # z is accumulated in steps of size dt, so compare at the rounding level of z
    zscale = 1.0 + float(np.max(np.abs(triple.z.values)))
    ok = excess[0] <= VELOCITY_TOL and excess[1] <= VELOCITY_TOL and \
        slack <= ctx.epsilon * (1 + tol) + 1e-12 * zscale / dt
    return MembershipReport(excess[0], excess[1], slack, bool(ok))


def write_triple_csv(triple: CharacteristicTriple, ctx: lk.LKContext, file) -> None:
    """Columns: time, y1 components, y2 components, z, mu (mu blank before start_t)."""
    hz = triple.y1.horizon
    i0 = hz.index(triple.start_t, lo=0.0)
    mu = np.full(hz.num_nodes, np.nan)
    mu[i0:] = mu_trace(triple, ctx)
    n = hz.n
    names = (["y1"] if n == 1 else [f"y1_{i + 1}" for i in range(n)]) + \
            (["y2"] if n == 1 else [f"y2_{i + 1}" for i in range(n)])
    with open(file, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["time"] + names + ["z", "mu"])
        for k in range(hz.num_nodes):
            row = [hz.times[k], *triple.y1.values[k], *triple.y2.values[k], triple.z.values[k, 0]]
            w.writerow([f"{v:.17g}" for v in row] + ["" if np.isnan(mu[k]) else f"{mu[k]:.17g}"])
