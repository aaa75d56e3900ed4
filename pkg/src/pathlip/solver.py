"""Value functionals of delay control problems by piecewise-constant control search.

Trajectories are built by explicit Euler on the path grid (optionally on a
refined grid), reading delayed values and the running integral from the
partially built trajectory. Costs use left-endpoint sums. The value at
(t, x) is the minimum over control signals that are constant on each of a
few equal intervals of [t, T]; small instances are enumerated exhaustively,
larger ones go through random restarts plus coordinate descent.
"""
from __future__ import annotations

import csv
import itertools
from dataclasses import dataclass

import numpy as np

from .ci import Functional
from .hamiltonian import BellmanHamiltonian, BoundaryFunctional
from .paths import SampledPath, resample

# relative slack on the velocity bound |f| <= c_H (1 + running sup norm)
VELOCITY_TOL = 1e-9
# rows simulated together; keeps (rows, N, n) arrays near a few tens of MB
_CHUNK = 4096


@dataclass(frozen=True)
class ControlSignal:
    """Control indices that are constant on consecutive intervals of [t, T]."""

    switch_times: tuple
    indices: tuple

    def __post_init__(self):
        sw = tuple(float(v) for v in self.switch_times)
        if len(sw) != len(self.indices) + 1:
            raise ValueError("need one more switch time than control indices")
        if any(b <= a for a, b in zip(sw, sw[1:])):
            raise ValueError("switch times must increase")
        object.__setattr__(self, "switch_times", sw)
        object.__setattr__(self, "indices", tuple(int(i) for i in self.indices))

    @classmethod
    def uniform(cls, t: float, T: float, indices) -> "ControlSignal":
        k = len(indices)
        return cls(tuple(np.linspace(t, T, k + 1)), tuple(indices))


@dataclass(frozen=True)
class SolverParams:
    control_intervals: int = 8
    integrator_substeps: int = 1
    enumeration_cap: int = 10 ** 6
    method: str = "auto"  # auto | exhaustive | refined
    budget: int = 4
    n_random: int = 16
    seed: int = 0

    def __post_init__(self):
        if self.control_intervals < 1:
            raise ValueError("control_intervals must be at least 1")
        if self.integrator_substeps < 1:
            raise ValueError("integrator_substeps must be at least 1")
        if self.method not in ("auto", "exhaustive", "refined"):
            raise ValueError(f"unknown solver method {self.method!r}")


@dataclass(frozen=True, eq=False)
class ValueQuery:
    t: float
    x: SampledPath
    spec: BellmanHamiltonian
    sigma: BoundaryFunctional
    control_intervals: int = 8
    integrator_step: float | None = None
    enumeration_cap: int = 10 ** 6

    def __post_init__(self):
        if self.control_intervals < 1:
            raise ValueError("control_intervals must be at least 1")
        if self.integrator_step is not None and self.integrator_step > self.x.horizon.grid_step * (1 + 1e-12):
            raise ValueError("integrator_step must not exceed the grid step")

    @property
    def substeps(self) -> int:
        if self.integrator_step is None:
            return 1
        return max(1, int(round(self.x.horizon.dt / self.integrator_step)))


def _interval_of_steps(i0: int, N: int, K: int) -> np.ndarray:
    """Control interval index of each Euler step k = i0 .. N-2."""
    steps = N - 1 - i0
    return (np.arange(steps) * K) // steps if steps else np.zeros(0, dtype=int)


def simulate(spec: BellmanHamiltonian, t: float, x: SampledPath, index_seqs, substeps: int = 1,
             check_velocity: bool = True):
    """Euler trajectories for a batch of control index sequences.

    Parameters
    ----------
    index_seqs : int array (S, K)
        Control index per interval; the K intervals split [t, T] into equal
        numbers of integrator steps (as equal as the grid allows).

    Returns
    -------
    values : array (S, N, n) on the horizon of `x`
    running : array (S,) left-endpoint sums of the running cost
    """
    seqs = np.atleast_2d(np.asarray(index_seqs, dtype=int))
    hz = x.horizon
    fine = hz.refine(substeps) if substeps > 1 else hz
    base = resample(x, fine).values if substeps > 1 else x.values
    i0 = fine.index(t, lo=0.0)
    N = fine.num_nodes
    S, K = seqs.shape
    if np.any(seqs < 0) or np.any(seqs >= spec.num_controls):
        raise ValueError("control index out of range")
    interval = _interval_of_steps(i0, N, K)
    v = np.empty((S, N, hz.n))
    v[:, : i0 + 1] = base[: i0 + 1]
    v[:, i0 + 1:] = base[i0]
    running = np.zeros(S)
    sup = np.full(S, np.max(np.linalg.norm(base[: i0 + 1], axis=1)))
    integ = None
    if spec.integral:
        seg = base[: i0 + 1]
        val = fine.dt * (seg.sum(axis=0) - 0.5 * (seg[0] + seg[-1])) if i0 > 0 else np.zeros(hz.n)
        integ = np.tile(val, (S, 1))
    dt = fine.dt
    for step, k in enumerate(range(i0, N - 1)):
        feat = spec.features(v, fine, k, integ)
        idx = seqs[:, interval[step]]
        f = spec.velocities(feat, idx)
        if check_velocity:
            speed = np.linalg.norm(f, axis=1)
            bound = spec.c_H * (1.0 + sup)
            if np.any(speed > bound * (1 + VELOCITY_TOL)):
                raise ValueError(
                    f"velocity {speed.max():.6g} exceeds c_H (1 + |y|) = {bound[speed.argmax()]:.6g} "
                    f"at t = {fine.times[k]:.6g}; the declared c_H = {spec.c_H} is inconsistent")
        running += spec.costs(feat, idx) * dt
        v[:, k + 1] = v[:, k] + f * dt
        sup = np.maximum(sup, np.linalg.norm(v[:, k + 1], axis=1))
        if integ is not None:
            integ = integ + 0.5 * dt * (v[:, k] + v[:, k + 1])
    if substeps > 1:
        v = v[:, ::substeps]
    return v, running


def integrate_delay_ode(spec: BellmanHamiltonian, t: float, x: SampledPath, u: ControlSignal,
                        step: float | None = None) -> SampledPath:
    """Euler trajectory of one control signal, equal to x on [-h, t]."""
    hz = x.horizon
    t0 = hz.times[hz.index(t, lo=0.0)]
    if abs(u.switch_times[0] - t0) > 1e-9 or abs(u.switch_times[-1] - hz.T) > 1e-9:
        raise ValueError("control signal must cover [t, T]")
    substeps = 1 if step is None else max(1, int(round(hz.dt / step)))
    fine = hz.refine(substeps) if substeps > 1 else hz
    i0 = fine.index(t0, lo=0.0)
    # per-step control index from the (possibly uneven) switch times
    mids = fine.times[i0:-1] + 0.5 * fine.dt
    where = np.clip(np.searchsorted(np.asarray(u.switch_times), mids, side="right") - 1,
                    0, len(u.indices) - 1)
    seq = np.asarray(u.indices)[where]
    # one interval per step reproduces arbitrary switch times exactly
    values, _ = simulate(spec, t0, x, seq[None, :] if seq.size else np.zeros((1, 1), int), substeps)
    return SampledPath(hz, values[0])


def _costs(spec, sigma, t, x, seqs, substeps):
    out = np.empty(len(seqs))
    for a in range(0, len(seqs), _CHUNK):
        v, run = simulate(spec, t, x, seqs[a: a + _CHUNK], substeps)
        out[a: a + _CHUNK] = sigma.batch(x.horizon, v) + run
    return out


def _effective_intervals(K: int, x: SampledPath, t: float, substeps: int) -> int:
    """Cap the interval count at the number of integrator steps left."""
    hz = x.horizon
    steps = (hz.num_nodes - 1 - hz.index(t, lo=0.0)) * substeps
    return max(1, min(K, steps))


def value_exhaustive(q: ValueQuery, return_control: bool = False):
    """Minimum cost over every control sequence on the switch grid."""
    hz = q.x.horizon
    i = hz.index(q.t, lo=0.0)
    t0 = hz.times[i]
    if i == hz.num_nodes - 1:
        val = q.sigma(q.x)
        return (val, None) if return_control else val
    K = _effective_intervals(q.control_intervals, q.x, t0, q.substeps)
    U = q.spec.num_controls
    if U ** K > q.enumeration_cap:
        raise ValueError(f"{U}^{K} control sequences exceed the enumeration cap {q.enumeration_cap}")
    seqs = np.array(list(itertools.product(range(U), repeat=K)), dtype=int)
    costs = _costs(q.spec, q.sigma, t0, q.x, seqs, q.substeps)
    best = int(np.argmin(costs))
    val = float(costs[best])
    if return_control:
        return val, ControlSignal.uniform(t0, hz.T, seqs[best])
    return val


def value_refined(q: ValueQuery, budget: int = 4, n_random: int = 16, seed=0,
                  return_control: bool = False, trace: list | None = None):
    """Coordinate descent over per-interval controls from the best random start.

    `budget` is the number of full sweeps; the search stops early once a
    sweep brings no improvement. Sweep-end values are appended to `trace`.
    """
    hz = q.x.horizon
    i = hz.index(q.t, lo=0.0)
    t0 = hz.times[i]
    if i == hz.num_nodes - 1:
        val = q.sigma(q.x)
        return (val, None) if return_control else val
    K = _effective_intervals(q.control_intervals, q.x, t0, q.substeps)
    U = q.spec.num_controls
    rng = np.random.default_rng(seed)
    starts = rng.integers(0, U, size=(max(1, n_random), K))
    costs = _costs(q.spec, q.sigma, t0, q.x, starts, q.substeps)
    j = int(np.argmin(costs))
    cur, val = starts[j].copy(), float(costs[j])
    if trace is not None:
        trace.append(val)
    for _ in range(budget):
        improved = False
        for pos in range(K):
            cand = np.repeat(cur[None], U, axis=0)
            cand[:, pos] = np.arange(U)
            c = _costs(q.spec, q.sigma, t0, q.x, cand, q.substeps)
            b = int(np.argmin(c))
            if c[b] < val:
                cur, val, improved = cand[b].copy(), float(c[b]), True
        if trace is not None:
            trace.append(val)
        if not improved:
            break
    if return_control:
        return val, ControlSignal.uniform(t0, hz.T, cur)
    return val


def solve(q: ValueQuery, params: SolverParams, return_control: bool = False):
    """Dispatch to the exhaustive or refined search per `params.method`."""
    method = params.method
    if method == "auto":
        K = _effective_intervals(q.control_intervals, q.x, q.t, q.substeps)
        method = "exhaustive" if q.spec.num_controls ** K <= q.enumeration_cap else "refined"
    if method == "exhaustive":
        return value_exhaustive(q, return_control)
    return value_refined(q, params.budget, params.n_random, params.seed, return_control)


def value_functional(spec: BellmanHamiltonian, sigma: BoundaryFunctional,
                     params: SolverParams | None = None, label: str | None = None) -> Functional:
    """The value of the control problem as a :class:`Functional` of (t, x).

    Only the stopped history of x enters the computation; at t = T the value
    is sigma(x).
    """
    params = SolverParams() if params is None else params

    def evaluate(t: float, x: SampledPath) -> float:
        hz = x.horizon
        if hz.index(t, lo=0.0) == hz.num_nodes - 1:
            return sigma(x)
        q = ValueQuery(t, x, spec, sigma, params.control_intervals,
                       hz.dt / params.integrator_substeps, params.enumeration_cap)
        return solve(q, params)

    return Functional(evaluate, label or f"value[{spec.label}]")


def write_values_csv(rows, file) -> None:
    """Rows of (label, t, value) written with 17 significant digits."""
    with open(file, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["query", "t", "value"])
        for label, t, val in rows:
            w.writerow([label, f"{t:.17g}", f"{val:.17g}"])
