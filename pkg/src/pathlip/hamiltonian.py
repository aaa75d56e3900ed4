"""Bellman-form Hamiltonians of delay control systems and the built-in benchmarks.

``H(t, x, s) = min_u <s, f(t, x, u)> + g(t, x, u)`` over a finite list of
control samples. Dynamics and running cost see the path only through a
:class:`Features` record (current value, values at declared lags, and
optionally the running integral), all read from nodes at or before t, so H
is non-anticipative by construction.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .paths import Horizon, SampledPath, interpolate


@dataclass(frozen=True)
class Features:
    """Path reads available to dynamics and running costs, batched over rows."""

    t: float
    current: np.ndarray  # (B, n)
    delayed: np.ndarray  # (B, J, n)
    integral: np.ndarray | None = None  # (B, n), integral of x over [-h, t]

    @property
    def size(self) -> int:
        return self.current.shape[0]

    def repeat(self, k: int) -> "Features":
        """Each row repeated k times consecutively."""
        integ = None if self.integral is None else np.repeat(self.integral, k, axis=0)
        return Features(self.t, np.repeat(self.current, k, axis=0),
                        np.repeat(self.delayed, k, axis=0), integ)


def node_features(values: np.ndarray, horizon: Horizon, i: int, lags=(), integral: bool = False,
                  int_values: np.ndarray | None = None) -> Features:
    """Features at node `i` of batched node values (B, N, n).

    Only nodes 0..i are read (a lag of zero reads node i with weight one).
    `int_values` supplies a precomputed running integral (B, n); otherwise it
    is formed by the trapezoid rule when `integral` is set.
    """
    t = float(horizon.times[i])
    cur = values[:, i, :]
    if lags:
        delayed = np.stack([interpolate(values, horizon, t - lag) for lag in lags], axis=1)
    else:
        delayed = np.zeros((values.shape[0], 0, horizon.n))
    integ = None
    if integral:
        if int_values is not None:
            integ = int_values
        elif i == 0:
            integ = np.zeros_like(cur)
        else:
            seg = values[:, : i + 1, :]
            integ = horizon.dt * (seg.sum(axis=1) - 0.5 * (seg[:, 0] + seg[:, -1]))
    return Features(t, cur, delayed, integ)


def path_features(x: SampledPath, t: float, lags=(), integral: bool = False) -> Features:
    i = x.horizon.index(t, lo=0.0)
    return node_features(x.values[None], x.horizon, i, lags, integral)


@dataclass(frozen=True, eq=False)
class BellmanHamiltonian:
    """Finite-control Bellman Hamiltonian.

    Parameters
    ----------
    controls : array (U, m)
        Control samples; the min is taken over these rows, ties going to the
        lowest index.
    dynamics : callable(t, Features, u) -> (B, n)
        `u` has shape (B, m), one control per feature row.
    running_cost : callable(t, Features, u) -> (B,)
    c_H : float
        Declared growth constant: |f| <= c_H (1 + sup norm of the stopped path).
    lags : tuple
        Delays whose values the dynamics and cost read.
    integral : bool
        Whether the running integral feature is computed.
    """

    controls: np.ndarray
    dynamics: Callable
    running_cost: Callable
    c_H: float
    lags: tuple = ()
    integral: bool = False
    label: str = "bellman"

    def __post_init__(self):
        u = np.atleast_2d(np.asarray(self.controls, dtype=float))
        if u.shape[0] == 0 or u.size == 0:
            raise ValueError("empty control set")
        if u.ndim != 2:
            raise ValueError("controls must have shape (U, m)")
        u.flags.writeable = False
        object.__setattr__(self, "controls", u)
        object.__setattr__(self, "lags", tuple(float(v) for v in self.lags))

    @property
    def num_controls(self) -> int:
        return self.controls.shape[0]

    def features(self, values, horizon, i, int_values=None) -> Features:
        return node_features(values, horizon, i, self.lags, self.integral, int_values)

    def velocities(self, feat: Features, idx) -> np.ndarray:
        """Dynamics for per-row control indices (B,)."""
        return np.asarray(self.dynamics(feat.t, feat, self.controls[idx]), dtype=float)

    def costs(self, feat: Features, idx) -> np.ndarray:
        return np.asarray(self.running_cost(feat.t, feat, self.controls[idx]), dtype=float)

    def all_controls(self, feat: Features):
        """Velocities (B, U, n) and costs (B, U) for every control at every row."""
        B, U = feat.size, self.num_controls
        rep = feat.repeat(U)
        u = np.tile(self.controls, (B, 1))
        f = np.asarray(self.dynamics(feat.t, rep, u), dtype=float).reshape(B, U, -1)
        g = np.asarray(self.running_cost(feat.t, rep, u), dtype=float).reshape(B, U)
        return f, g

    def batch(self, feat: Features, s) -> tuple[np.ndarray, np.ndarray]:
        """H values (B,) and argmin control indices (B,) for co-states s (B, n)."""
        f, g = self.all_controls(feat)
        s = np.broadcast_to(np.asarray(s, dtype=float), (feat.size, f.shape[2]))
        vals = np.einsum("bun,bn->bu", f, s) + g
        idx = np.argmin(vals, axis=1)
        return vals[np.arange(feat.size), idx], idx

    def __call__(self, t: float, x: SampledPath, s) -> float:
        return eval_H(self, t, x, s)


def eval_H(spec: BellmanHamiltonian, t: float, x: SampledPath, s) -> float:
    feat = path_features(x, t, spec.lags, spec.integral)
    vals, _ = spec.batch(feat, np.asarray(s, dtype=float)[None])
    return float(vals[0])


@dataclass(frozen=True, eq=False)
class BoundaryFunctional:
    """Terminal functional sigma acting on whole paths.

    `evaluator(horizon, values)` maps node values (..., N, n) to (...).
    """

    evaluator: Callable
    declared_class: str = "uniform"
    label: str = "sigma"

    def batch(self, horizon: Horizon, values: np.ndarray) -> np.ndarray:
        return np.asarray(self.evaluator(horizon, values), dtype=float)

    def __call__(self, x: SampledPath) -> float:
        return float(self.batch(x.horizon, x.values))


# -------------------------------------------------------- constant estimation


@dataclass
class StructuralConstants:
    c_H: float
    lambda_H: float
    lambda_sigma: float
    mode: str
    degenerate: bool = False
    warnings: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"c_H": self.c_H, "lambda_H": self.lambda_H, "lambda_sigma": self.lambda_sigma,
                "mode": self.mode, "degenerate": self.degenerate, "warnings": list(self.warnings)}


def _pair_norms(values: np.ndarray, horizon: Horizon, i: int, mode: str, lags,
                block: int = 32) -> np.ndarray:
    """Pairwise difference norms (P, P) of paths at node i in the given mode."""
    P = values.shape[0]
    return np.concatenate([_pair_norms_block(values[a: a + block], values, horizon, i, mode, lags)
                           for a in range(0, P, block)], axis=0)


def _pair_norms_block(left, values, horizon, i, mode, lags):
    d = left[:, None, : i + 1, :] - values[None, :, : i + 1, :]
    r = np.linalg.norm(d, axis=-1)
    if mode == "uniform":
        return r.max(axis=-1)
    q = r ** 2
    integ = horizon.dt * (q.sum(axis=-1) - 0.5 * (q[..., 0] + q[..., -1])) if i > 0 else 0.0 * q[..., 0]
    out = r[..., -1] + np.sqrt(np.maximum(integ, 0.0))
    t = horizon.times[i]
    for lag in lags:
        pos = (t - lag + horizon.h) / horizon.dt
        j = min(int(math.floor(pos + 1e-9)), i)
        w = pos - j
        if w > 1e-9:
            out = out + np.linalg.norm((1 - w) * d[..., j, :] + w * d[..., j + 1, :], axis=-1)
        else:
            out = out + r[..., j]
    return out


def _max_ratio(num: np.ndarray, den: np.ndarray) -> tuple[float, bool]:
    mask = den > 1e-14
    if not np.any(mask):
        return 0.0, False
    return float(np.max(num[mask] / den[mask])), True


def estimate_structural_constants(spec: BellmanHamiltonian, sigma: BoundaryFunctional | None,
                                  D: list, s_samples, mode: str = "uniform",
                                  t_samples=None) -> StructuralConstants:
    """Largest empirical ratios behind c_H, lambda_H and lambda_sigma.

    These are lower bounds of the true suprema over the sampled set; callers
    inflate them before use. In the "special" mode, path differences are
    measured by |dx(t)| + sum_j |dx(t - lag_j)| + L2 norm on [-h, t], with
    the lags taken from `spec`.
    """
    if not D:
        raise ValueError("empty path set")
    s_samples = np.atleast_2d(np.asarray(s_samples, dtype=float))
    if s_samples.size == 0:
        raise ValueError("empty co-state sample set")
    hz = D[0].horizon
    values = np.stack([x.values for x in D])
    if t_samples is None:
        t_samples = np.linspace(0.0, hz.T, 5)
    warnings = []
    c_H = lam_H = 0.0
    any_pair = False
    lags = spec.lags if mode == "special" else ()
    S = s_samples.shape[0]
    for t in t_samples:
        i = hz.index(float(t), lo=0.0)
        feat = spec.features(values, hz, i)
        Hs = np.stack([spec.batch(feat, np.broadcast_to(s, (len(D), hz.n)))[0] for s in s_samples], axis=1)
        # growth in s, normalised by the stopped sup norm
        sup = np.linalg.norm(values[:, : i + 1], axis=-1).max(axis=1)
        if S > 1:
            ds = np.linalg.norm(s_samples[:, None] - s_samples[None], axis=-1)
            dH = np.abs(Hs[:, :, None] - Hs[:, None, :])
            den = ds[None] * (1.0 + sup)[:, None, None]
            c_H = max(c_H, _max_ratio(dH, den)[0])
        if len(D) > 1:
            norms = _pair_norms(values, hz, i, mode, lags)
            for k, s in enumerate(s_samples):
                dH = np.abs(Hs[:, None, k] - Hs[None, :, k])
                r, ok = _max_ratio(dH, (1.0 + np.linalg.norm(s)) * norms)
                lam_H = max(lam_H, r)
                any_pair |= ok
    lam_s = 0.0
    if sigma is not None and len(D) > 1:
        sv = sigma.batch(hz, values)
        last = hz.num_nodes - 1
        norms = _pair_norms(values, hz, last, mode, ())
        lam_s, ok = _max_ratio(np.abs(sv[:, None] - sv[None]), norms)
        any_pair |= ok
    degenerate = not any_pair
    if degenerate:
        warnings.append("no pair of distinct paths: lambda estimates reported as 0")
    return StructuralConstants(c_H, lam_H, lam_s, mode, degenerate, warnings)


# -------------------------------------------------------------- benchmarks


@dataclass(frozen=True, eq=False)
class Benchmark:
    """A named control problem with its Hamiltonian, terminal cost and known values."""

    name: str
    horizon: Horizon
    H: BellmanHamiltonian
    sigma: BoundaryFunctional
    classes: tuple
    lags: tuple
    closed_form: Callable | None = None
    params: dict = field(default_factory=dict)
    description: str = ""


def _velocity_u(t, feat, u):
    return u


def _zero_cost(t, feat, u):
    return np.zeros(feat.size)


def _b1_value(x: SampledPath, t: float) -> float:
    hz = x.horizon
    i = hz.index(t, lo=0.0)
    return float(x.values[i, 0] - (hz.T - hz.times[i]))


def _b2_value(x: SampledPath, t: float) -> float:
    hz = x.horizon
    i = hz.index(t, lo=0.0)
    ti, xt = hz.times[i], x.values[i, 0]
    if ti <= hz.T - hz.h + 1e-12 * hz.dt:
        return float(2 * xt - 2 * (hz.T - hz.h - ti) - hz.h)
    return float(x(hz.T - hz.h)[0] + xt - (hz.T - ti))


def _sq_integral_pl(times, vals) -> float:
    """Exact integral of the square of a piecewise-linear scalar function."""
    a, b = vals[:-1], vals[1:]
    return float(np.sum(np.diff(times) * (a * a + a * b + b * b) / 3.0))


def _b3_value(q: float):
    def value(x: SampledPath, t: float) -> float:
        hz = x.horizon
        i = hz.index(t, lo=0.0)
        ti = hz.times[i]
        # the u = -1 trajectory continued from the history is piecewise linear
        # on the same grid
        z = x.values[:, 0].copy()
        z[i + 1:] = z[i] - (hz.times[i + 1:] - ti)
        tail = slice(i, None)
        j0 = hz.index(ti - hz.h)
        j1 = hz.index(hz.T - hz.h)
        run = _sq_integral_pl(hz.times[tail], z[tail]) + _sq_integral_pl(hz.times[j0: j1 + 1], z[j0: j1 + 1])
        return float(z[-1] + q * run)
    return value


def default_horizon() -> Horizon:
    return Horizon(n=1, T=1.0, h=0.5, grid_step=0.01)


BENCHMARKS = ("B1", "B2", "B3")


def make_benchmark(name: str, horizon: Horizon | None = None, q: float = 0.1) -> Benchmark:
    """Built-in scalar benchmarks with controls u in {-1, 0, 1} and f = u.

    B1: sigma = x(T), no running cost; value x(t) - (T - t).
    B2: sigma = x(T) + x(T - h), no running cost (uniform class only).
    B3: sigma = x(T), running cost q (x(t)^2 + x(t - h)^2); u = -1 stays
        optimal while 4 q R T < 1 for a sup-norm bound R on the trajectories.
    """
    hz = default_horizon() if horizon is None else horizon
    if hz.n != 1:
        raise ValueError("built-in benchmarks are scalar (n = 1)")
    if hz.h <= 0:
        raise ValueError("built-in benchmarks need a positive delay depth h")
    controls = np.array([[-1.0], [0.0], [1.0]])
    terminal = BoundaryFunctional(lambda hz_, v: v[..., -1, 0], "special", "x(T)")
    if name == "B1":
        H = BellmanHamiltonian(controls, _velocity_u, _zero_cost, c_H=1.0, label="B1")
        return Benchmark("B1", hz, H, terminal, ("uniform", "special"), (hz.h,),
                         _b1_value, {}, "terminal cost x(T), no delay in the dynamics")
    if name == "B2":
        H = BellmanHamiltonian(controls, _velocity_u, _zero_cost, c_H=1.0, label="B2")
        j = hz.index(hz.T - hz.h)
        sigma = BoundaryFunctional(lambda hz_, v: v[..., -1, 0] + v[..., j, 0], "uniform",
                                   "x(T) + x(T - h)")
        return Benchmark("B2", hz, H, sigma, ("uniform",), (hz.h,), _b2_value, {},
                         "delayed terminal cost x(T) + x(T - h)")
    if name == "B3":
        def cost(t, feat, u):
            return q * (feat.current[:, 0] ** 2 + feat.delayed[:, 0, 0] ** 2)

        H = BellmanHamiltonian(controls, _velocity_u, cost, c_H=1.0, lags=(hz.h,), label="B3")
        return Benchmark("B3", hz, H, terminal, ("uniform", "special"), (hz.h,), _b3_value(q),
                         {"q": q}, "quadratic running cost on the current and delayed state")
    raise ValueError(f"unknown benchmark {name!r}; choose from {', '.join(BENCHMARKS)}")
