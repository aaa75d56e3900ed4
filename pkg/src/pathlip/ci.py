"""Finite-difference coinvariant calculus for functionals of (t, path).

A functional is probed along constant-velocity extensions of the stopped
path: for a velocity f and a step delta, ``y(tau) = x(t) + f (tau - t)`` on
[t, t + delta]. Affine fits over the probes give (dt, grad); min and max of
difference quotients over a step schedule stand in for the lower and upper
Dini derivatives.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .paths import Horizon, SampledPath, extend_const_velocity


@dataclass(frozen=True)
class Functional:
    """A map (t, path) -> real with a declared non-anticipativity contract."""

    evaluator: Callable[[float, SampledPath], float]
    label: str = "functional"
    nonanticipative: bool = True

    def __call__(self, t: float, x: SampledPath) -> float:
        return float(self.evaluator(t, x))


@dataclass(frozen=True)
class CiDerivativeEstimate:
    dt: float
    grad: np.ndarray
    probe_step: float
    residual: float


def _probe_directions(n: int) -> np.ndarray:
    eye = np.eye(n)
    return np.vstack([np.zeros((1, n)), eye, -eye])


def ci_derivatives_fd(phi, t: float, x: SampledPath, delta: float) -> CiDerivativeEstimate:
    """Least-squares fit of ``phi(t + delta, y_f) - phi(t, x) = delta (dt + <grad, f>)``.

    Probes use f in {0, +e_i, -e_i}. The residual is the largest deviation
    of the fitted affine model from the observed increments.
    """
    hz = x.horizon
    i = hz.index(t, lo=0.0)
    k = hz.steps(delta)
    if i + k > hz.num_nodes - 1:
        raise ValueError(f"probe step {delta} runs past T from t = {t}")
    t0 = hz.times[i]
    d = k * hz.dt
    base = phi(t0, x)
    F = _probe_directions(hz.n)
    incr = np.array([phi(t0 + d, extend_const_velocity(x, t0, f, d)) - base for f in F])
    A = d * np.hstack([np.ones((len(F), 1)), F])
    coef, *_ = np.linalg.lstsq(A, incr, rcond=None)
    residual = float(np.max(np.abs(A @ coef - incr)))
    return CiDerivativeEstimate(float(coef[0]), coef[1:], d, residual)


def default_schedule(horizon: Horizon, start_steps: int = 64, count: int = 7) -> np.ndarray:
    """Geometric schedule 64, 32, ..., 1 grid steps."""
    k = start_steps / 2.0 ** np.arange(count)
    k = k[k >= 1]
    return k * horizon.dt


def dini_quotients(phi, t: float, x: SampledPath, f, schedule, base: float | None = None) -> np.ndarray:
    """Difference quotients of `phi` along the f-extension, one per schedule entry."""
    schedule = np.asarray(schedule, dtype=float)
    if schedule.size == 0:
        raise ValueError("empty step schedule")
    hz = x.horizon
    i = hz.index(t, lo=0.0)
    t0 = hz.times[i]
    if base is None:
        base = phi(t0, x)
    out = np.empty(schedule.size)
    for j, delta in enumerate(schedule):
        k = hz.steps(delta)
        if i + k > hz.num_nodes - 1:
            raise ValueError(f"schedule step {delta} runs past T from t = {t}")
        d = k * hz.dt
        out[j] = (phi(t0 + d, extend_const_velocity(x, t0, f, d)) - base) / d
    return out


def clip_schedule(schedule, horizon: Horizon, t: float) -> np.ndarray:
    """Drop schedule entries that would run past T from time t."""
    room = horizon.T - horizon.times[horizon.index(t, lo=0.0)]
    s = np.asarray(schedule, dtype=float)
    return s[s <= room + 1e-9 * horizon.dt]


def dini_directional(phi, t: float, x: SampledPath, f, schedule) -> tuple[float, float]:
    """(lower, upper) Dini estimates: min and max quotient over the schedule."""
    q = dini_quotients(phi, t, x, f, schedule)
    return float(q.min()), float(q.max())


def random_tails(x: SampledPath, t: float, count: int, seed=0, scale: float = 1.0) -> list[SampledPath]:
    """Continuations of `x` after t, agreeing with x on [-h, t]."""
    hz = x.horizon
    i = hz.index(t, lo=0.0)
    rng = np.random.default_rng(seed)
    tails = []
    for _ in range(count):
        steps = rng.normal(scale=scale * np.sqrt(hz.dt), size=(hz.num_nodes - 1 - i, hz.n))
        v = x.values.copy()
        v[i + 1:] = v[i] + np.cumsum(steps, axis=0) + rng.normal(scale=scale, size=hz.n) * (
            hz.times[i + 1:, None] - hz.times[i])
        tails.append(SampledPath(hz, v))
    return tails


def check_nonanticipative(phi, t: float, x: SampledPath, tail_count: int, seed=0) -> float:
    """Largest |phi(t, x) - phi(t, x_tail)| over random continuations after t."""
    if tail_count == 0:
        return 0.0
    base = phi(t, x)
    return float(max(abs(phi(t, y) - base) for y in random_tails(x, t, tail_count, seed)))
