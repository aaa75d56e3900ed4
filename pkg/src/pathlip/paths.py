"""Continuous paths on [-h, T] sampled on a uniform grid.

A path is stored as its values at the grid nodes and read between nodes by
linear interpolation, so norms and trapezoid integrals are exact functions of
the node values. All times handed to the operations below are snapped to the
nearest grid node.
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np

# relative slack when checking that grid_step divides T + h
_DIVISIBILITY_TOL = 1e-6
# absolute slack (in units of the grid step) for range checks on times
_RANGE_TOL = 1e-9


@dataclass(frozen=True)
class Horizon:
    """State dimension, time range [-h, T] and uniform grid step."""

    n: int
    T: float
    h: float
    grid_step: float

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise ValueError(f"state dimension must be a positive integer, got {self.n}")
        if not self.T > 0:
            raise ValueError(f"T must be positive, got {self.T}")
        if not self.h >= 0:
            raise ValueError(f"h must be nonnegative, got {self.h}")
        if not self.grid_step > 0:
            raise ValueError(f"grid_step must be positive, got {self.grid_step}")
        ratio = (self.T + self.h) / self.grid_step
        if abs(ratio - round(ratio)) > _DIVISIBILITY_TOL * max(1.0, ratio):
            raise ValueError(
                f"grid_step={self.grid_step} does not divide T + h = {self.T + self.h}"
            )
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "T", float(self.T))
        object.__setattr__(self, "h", float(self.h))
        object.__setattr__(self, "grid_step", float(self.grid_step))

    @property
    def num_nodes(self) -> int:
        return int(round((self.T + self.h) / self.grid_step)) + 1

    @property
    def dt(self) -> float:
        """Actual node spacing (equals grid_step up to rounding)."""
        return (self.T + self.h) / (self.num_nodes - 1)

    @cached_property
    def times(self) -> np.ndarray:
        t = np.linspace(-self.h, self.T, self.num_nodes)
        t.flags.writeable = False
        return t

    @property
    def zero_index(self) -> int:
        """Index of the node at time 0."""
        return int(round(self.h / self.dt))

    def index(self, t: float, lo: float | None = None) -> int:
        """Index of the grid node nearest to `t`.

        Raises ValueError if `t` lies outside [lo, T] (lo defaults to -h) by
        more than rounding slack.
        """
        lo = -self.h if lo is None else lo
        slack = _RANGE_TOL * self.dt
        if not (lo - slack <= t <= self.T + slack):
            raise ValueError(f"time {t} outside [{lo}, {self.T}]")
        i = int(round((t + self.h) / self.dt))
        return min(max(i, 0), self.num_nodes - 1)

    def steps(self, delta: float) -> int:
        """Number of grid steps nearest to a positive duration."""
        k = int(round(delta / self.dt))
        if k < 1:
            raise ValueError(f"duration {delta} is shorter than one grid step {self.dt}")
        return k

    def refine(self, factor: int) -> "Horizon":
        return Horizon(self.n, self.T, self.h, self.grid_step / int(factor))

    def to_dict(self) -> dict:
        return {"n": self.n, "T": self.T, "h": self.h, "grid_step": self.grid_step}


def interpolate(values: np.ndarray, horizon: Horizon, tau) -> np.ndarray:
    """Linear interpolation of node values at time(s) `tau`.

    `values` has nodes on axis -2, so batches of shape (B, N, n) work as well
    as single paths of shape (N, n). Times are clipped to [-h, T].
    """
    tau = np.asarray(tau, dtype=float)
    pos = np.clip((tau + horizon.h) / horizon.dt, 0.0, horizon.num_nodes - 1)
    i = np.minimum(np.floor(pos).astype(int), horizon.num_nodes - 2)
    w = pos - i
    if tau.ndim == 0:
        i = int(i)
        w = float(w)
        return (1.0 - w) * values[..., i, :] + w * values[..., i + 1, :]
    lo = np.take(values, i, axis=-2)
    hi = np.take(values, i + 1, axis=-2)
    return (1.0 - w)[:, None] * lo + w[:, None] * hi


@dataclass(frozen=True, eq=False)
class SampledPath:
    """A continuous, piecewise-linear function [-h, T] -> R^n."""

    horizon: Horizon
    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        N, n = self.horizon.num_nodes, self.horizon.n
        if v.ndim == 1 and n == 1:
            v = v[:, None]
        if v.ndim != 2 or v.shape[1] != n:
            raise ValueError(f"expected node values of shape ({N}, {n}), got {v.shape}")
        if v.shape[0] != N:
            raise ValueError(f"length mismatch: {v.shape[0]} values for {N} grid nodes")
        if not np.all(np.isfinite(v)):
            raise ValueError("path values must be finite")
        v.flags.writeable = False
        object.__setattr__(self, "values", v)

    @property
    def times(self) -> np.ndarray:
        return self.horizon.times

    def __call__(self, tau) -> np.ndarray:
        return interpolate(self.values, self.horizon, tau)

    def norms(self) -> np.ndarray:
        return np.linalg.norm(self.values, axis=1)

    def _check(self, other: "SampledPath"):
        if other.horizon != self.horizon:
            raise ValueError("paths live on different horizons")

    def __add__(self, other):
        if isinstance(other, SampledPath):
            self._check(other)
            return SampledPath(self.horizon, self.values + other.values)
        return SampledPath(self.horizon, self.values + np.asarray(other, dtype=float))

    def __sub__(self, other):
        if isinstance(other, SampledPath):
            self._check(other)
            return SampledPath(self.horizon, self.values - other.values)
        return SampledPath(self.horizon, self.values - np.asarray(other, dtype=float))

    def __mul__(self, c):
        return SampledPath(self.horizon, float(c) * self.values)

    __rmul__ = __mul__

    def __neg__(self):
        return SampledPath(self.horizon, -self.values)

    def equals(self, other: "SampledPath") -> bool:
        """Node-exact equality."""
        return self.horizon == other.horizon and np.array_equal(self.values, other.values)


def make_path(horizon: Horizon, values) -> SampledPath:
    return SampledPath(horizon, values)


def path_from_function(horizon: Horizon, fn) -> SampledPath:
    """Sample a callable taking the time array (N,) and returning (N,) or (N, n)."""
    return SampledPath(horizon, fn(horizon.times))


def zero_path(horizon: Horizon) -> SampledPath:
    return SampledPath(horizon, np.zeros((horizon.num_nodes, horizon.n)))


def resample(x: SampledPath, horizon: Horizon) -> SampledPath:
    """Evaluate `x` on the nodes of another horizon with the same [-h, T]."""
    if (horizon.n, horizon.T, horizon.h) != (x.horizon.n, x.horizon.T, x.horizon.h):
        raise ValueError("resampling needs the same dimension and time range")
    return SampledPath(horizon, x(horizon.times))


def stop(x: SampledPath, t: float) -> SampledPath:
    """The stopped path x(. ^ t): equal to x up to t, frozen at x(t) afterwards."""
    i = x.horizon.index(t, lo=0.0)
    v = x.values.copy()
    v[i + 1:] = v[i]
    return SampledPath(x.horizon, v)


def sup_norm(x: SampledPath) -> float:
    # The Euclidean norm is convex along a linear segment, so the maximum over
    # each segment sits at one of its endpoints.
    return float(np.max(x.norms()))


def stopped_sup_norm(x: SampledPath, t: float) -> float:
    """sup_norm(stop(x, t)) without building the stopped path."""
    i = x.horizon.index(t, lo=0.0)
    return float(np.max(np.linalg.norm(x.values[: i + 1], axis=1)))


def trapezoid_sq(x: SampledPath, t: float) -> float:
    """Composite trapezoid value of the integral of |x|^2 over [-h, t]."""
    i = x.horizon.index(t, lo=0.0)
    q = np.sum(x.values[: i + 1] ** 2, axis=1)
    if i == 0:
        return 0.0
    return float(x.horizon.dt * (q.sum() - 0.5 * (q[0] + q[-1])))


def special_seminorm(x: SampledPath, t: float) -> float:
    """|x(t)| plus the L2 norm of x over [-h, t]."""
    i = x.horizon.index(t, lo=0.0)
    return float(np.linalg.norm(x.values[i]) + np.sqrt(trapezoid_sq(x, t)))


def extend_const_velocity(x: SampledPath, t: float, f, delta: float) -> SampledPath:
    """Stop `x` at `t`, continue with velocity `f` for `delta`, then freeze."""
    hz = x.horizon
    i = hz.index(t, lo=0.0)
    k = hz.steps(delta)
    if i + k > hz.num_nodes - 1:
        raise ValueError(f"t + delta = {hz.times[i] + k * hz.dt} exceeds T = {hz.T}")
    f = np.broadcast_to(np.asarray(f, dtype=float), (hz.n,))
    v = x.values.copy()
    ramp = np.arange(1, k + 1)[:, None] * hz.dt
    v[i + 1: i + k + 1] = v[i] + ramp * f
    v[i + k + 1:] = v[i + k]
    return SampledPath(hz, v)


@dataclass(frozen=True)
class CompactSetSpec:
    """Sampling parameters for paths that are lambda_x-Lipschitz and bounded by lambda_x."""

    lambda_x: float
    count: int
    seed: int = 0

    def __post_init__(self):
        if not self.lambda_x > 0:
            raise ValueError("lambda_x must be positive")
        if self.count < 0:
            raise ValueError("count must be nonnegative")


def _project_ball(y: np.ndarray, radius: float) -> np.ndarray:
    """Row-wise projection onto the closed ball of the given radius."""
    r = np.linalg.norm(y, axis=-1, keepdims=True)
    return np.where(r > radius, y * (radius / np.maximum(r, 1e-300)), y)


def sample_compact_set(spec: CompactSetSpec, horizon: Horizon) -> list[SampledPath]:
    """Random members of D_{lambda_x}.

    Each path is a walk whose velocity follows a clipped Gaussian random walk
    (|velocity| <= lambda_x), and whose position is projected back onto the
    ball of radius lambda_x after every step. Projection onto a convex set is
    nonexpansive, so every increment stays within lambda_x * dt.
    """
    if spec.count == 0:
        return []
    rng = np.random.default_rng(spec.seed)
    lam, n, dt, m = spec.lambda_x, horizon.n, horizon.dt, spec.count
    # velocity diffusion chosen so the direction decorrelates over ~0.25 time units
    kick = lam * np.sqrt(dt / 0.25)
    # shrink factors absorb rounding so the bounds hold exactly in floating point
    lam_v, lam_y = lam * (1 - 1e-12), lam * (1 - 1e-15)
    y = np.empty((m, horizon.num_nodes, n))
    d = rng.normal(size=(m, n))
    d /= np.maximum(np.linalg.norm(d, axis=1, keepdims=True), 1e-300)
    y[:, 0] = d * lam_y * rng.uniform(size=(m, 1)) ** (1 / n)
    v = _project_ball(rng.normal(size=(m, n)) * lam, lam_v)
    noise = rng.normal(size=(horizon.num_nodes - 1, m, n))
    for k in range(1, horizon.num_nodes):
        v = _project_ball(v + kick * noise[k - 1], lam_v)
        y[:, k] = _project_ball(y[:, k - 1] + v * dt, lam_y)
    return [SampledPath(horizon, yi) for yi in y]


def lipschitz_ratio(x: SampledPath) -> float:
    """Largest |x(ti) - x(tj)| / |ti - tj| over pairs of grid nodes.

    For a piecewise-linear path this equals the largest slope of a segment.
    """
    d = np.linalg.norm(np.diff(x.values, axis=0), axis=1)
    return float(np.max(d) / x.horizon.dt) if d.size else 0.0


# ---------------------------------------------------------------- file formats


def write_path_csv(x: SampledPath, file) -> None:
    """One row per node: time followed by the n components, 17 significant digits."""
    with open(file, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["time"] + [f"x{i + 1}" for i in range(x.horizon.n)])
        for t, row in zip(x.times, x.values):
            w.writerow([f"{t:.17g}"] + [f"{v:.17g}" for v in row])


def read_path_csv(file, horizon: Horizon) -> SampledPath:
    with open(file, newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    if len(header) != horizon.n + 1:
        raise ValueError(f"expected {horizon.n + 1} columns, got {len(header)}")
    data = np.array([[float(v) for v in r] for r in body])
    if data.shape[0] != horizon.num_nodes:
        raise ValueError(f"length mismatch: {data.shape[0]} rows for {horizon.num_nodes} nodes")
    if not np.allclose(data[:, 0], horizon.times, rtol=0, atol=1e-9 * horizon.dt):
        raise ValueError("time column does not match the horizon grid")
    return SampledPath(horizon, data[:, 1:])


def save_path(x: SampledPath, stem) -> Path:
    """Write `<stem>.csv` plus a `<stem>.json` manifest; returns the manifest path."""
    stem = Path(stem)
    csv_path = stem.with_suffix(".csv")
    write_path_csv(x, csv_path)
    manifest = {"horizon": x.horizon.to_dict(), "csv": csv_path.name}
    man_path = stem.with_suffix(".json")
    man_path.write_text(json.dumps(manifest, indent=2, sort_keys=True))
    return man_path


def load_path(manifest) -> SampledPath:
    manifest = Path(manifest)
    meta = json.loads(manifest.read_text())
    horizon = Horizon(**meta["horizon"])
    return read_path_csv(manifest.parent / meta["csv"], horizon)
