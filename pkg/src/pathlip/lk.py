"""Lyapunov-Krasovskii functionals and the explicit Lipschitz constants.

Two majorants of a path difference are provided:

* the uniform-norm functional, built from the running maximum M of |x| over
  [-h, t] and the current value r = |x(t)|:
  ``(M^2 - r^2)^2 / M^2 + r^2`` (zero when M = 0);
* the delay-aware functional
  ``|x(t)|^2 + omega * sum_j int_{t-lag_j}^t |x|^2 + int_{-h}^t |x|^2``.

Each comes with a decreasing weight a(t) solving a linear ODE, and the
regularised functional ``nu = a(t) * sqrt(eps + gamma)`` whose derivatives
drive the comparison argument in :mod:`pathlip.characteristics`.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .paths import Horizon, SampledPath, interpolate

KAPPA = (3.0 - math.sqrt(5.0)) / 2.0

UNIFORM = "uniform"
SPECIAL = "special"


@dataclass(frozen=True)
class LKContext:
    """Constants of one verification instance.

    For ``variant="special"``, `lambda_H` and `lambda_sigma` are the
    special-norm constants and `lags` lists the concentrated delays.
    """

    variant: str
    T: float
    c_H: float
    lambda_H: float
    lambda_sigma: float
    epsilon: float = 1e-6
    h: float = 0.0
    lags: tuple = field(default=())

    def __post_init__(self):
        if self.variant not in (UNIFORM, SPECIAL):
            raise ValueError(f"unknown variant {self.variant!r}")
        for name in ("T", "c_H", "lambda_H", "lambda_sigma", "epsilon"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")
        object.__setattr__(self, "lags", tuple(float(v) for v in self.lags))
        if self.variant == SPECIAL:
            if not self.lags:
                raise ValueError("the special variant needs at least one lag")
            for lag in self.lags:
                if not (0 < lag <= self.h * (1 + 1e-12)):
                    raise ValueError(f"lag {lag} outside (0, h] with h = {self.h}")

    @property
    def kappa(self) -> float:
        return KAPPA

    @property
    def J(self) -> int:
        return len(self.lags)

    @property
    def omega(self) -> float:
        if self.variant != SPECIAL:
            return 0.0
        return 4 * self.J * self.lambda_H * max(1.0, 1.0 / (math.sqrt(2.0) * self.lambda_sigma))

    def a(self, t):
        return a_uniform(t, self) if self.variant == UNIFORM else a_special(t, self)

    def a_dot(self, t):
        return a_uniform_dot(t, self) if self.variant == UNIFORM else a_special_dot(t, self)

    @property
    def lambda_phi(self) -> float:
        return next(iter(lipschitz_constants(self).values()))

    def to_dict(self) -> dict:
        d = {
            "variant": self.variant,
            "T": self.T,
            "h": self.h,
            "c_H": self.c_H,
            "lambda_H": self.lambda_H,
            "lambda_sigma": self.lambda_sigma,
            "epsilon": self.epsilon,
            "lags": list(self.lags),
            "kappa": self.kappa,
            "omega": self.omega,
            "a0": float(self.a(0.0)),
        }
        d.update(lipschitz_constants(self))
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "LKContext":
        keys = ("variant", "T", "c_H", "lambda_H", "lambda_sigma", "epsilon", "h", "lags")
        return cls(**{k: d[k] for k in keys if k in d})


# ------------------------------------------------------------ weights a(t)


def a_uniform(t, ctx: LKContext):
    k = ctx.kappa
    e = np.exp(ctx.lambda_H * (ctx.T - np.asarray(t, dtype=float)) / k)
    return math.sqrt(k) * (e - 1.0) + ctx.lambda_sigma * e / math.sqrt(k)


def a_uniform_dot(t, ctx: LKContext):
    # from a' + lambda_H a / kappa + lambda_H / sqrt(kappa) = 0
    return -ctx.lambda_H * a_uniform(t, ctx) / ctx.kappa - ctx.lambda_H / math.sqrt(ctx.kappa)


def _special_rate(ctx: LKContext) -> float:
    return ctx.omega * ctx.J + 1.0 + 6.0 * ctx.lambda_H


def a_special(t, ctx: LKContext):
    c = _special_rate(ctx)
    e = np.exp(c * (ctx.T - np.asarray(t, dtype=float)) / 2.0)
    return 6.0 * ctx.lambda_H * (e - 1.0) / c + math.sqrt(2.0) * ctx.lambda_sigma * e


def a_special_dot(t, ctx: LKContext):
    # from 2 a' + (omega J + 1 + 6 lambda_H) a + 6 lambda_H = 0
    return -0.5 * (_special_rate(ctx) * a_special(t, ctx) + 6.0 * ctx.lambda_H)


def lipschitz_constants(ctx: LKContext) -> dict:
    """``{"lambda_phi": sqrt(2) a(0)}`` or ``{"lambda_phi_star": a(0) sqrt(omega J + 1)}``."""
    if ctx.variant == UNIFORM:
        return {"lambda_phi": float(math.sqrt(2.0) * a_uniform(0.0, ctx))}
    return {"lambda_phi_star": float(a_special(0.0, ctx) * math.sqrt(ctx.omega * ctx.J + 1.0))}


def lambda_phi_time(lambda_x: float, lambda_phi: float, R1: float, R2: float, c_H: float) -> float:
    """Time-Lipschitz constant ``R2 + lambda_phi * (c_H (1 + R1) + lambda_x)``."""
    for name, v in (("lambda_x", lambda_x), ("lambda_phi", lambda_phi), ("R1", R1),
                    ("R2", R2), ("c_H", c_H)):
        if v < 0:
            raise ValueError(f"{name} must be nonnegative")
    return R2 + lambda_phi * (c_H * (1.0 + R1) + lambda_x)


def special_coefficient(ctx: LKContext, times) -> np.ndarray:
    """``2 J lambda_H (1 + a) - omega a`` on the given times; nonpositive by the choice of omega."""
    a = ctx.a(times)
    return 2 * ctx.J * ctx.lambda_H * (1.0 + a) - ctx.omega * a


# ------------------------------------------------------ uniform functional


def zhou_from_norms(M2, r2):
    """Two-branch formula on squared running max and squared current norm."""
    M2 = np.asarray(M2, dtype=float)
    safe = np.where(M2 > 0, M2, 1.0)
    return np.where(M2 > 0, (M2 - r2) ** 2 / safe + r2, 0.0)


def gamma_uniform_trace(values: np.ndarray) -> np.ndarray:
    """Uniform functional at every node for node values of shape (..., N, n)."""
    r2 = np.sum(values ** 2, axis=-1)
    return zhou_from_norms(np.maximum.accumulate(r2, axis=-1), r2)


def gamma_uniform(t: float, x: SampledPath) -> float:
    i = x.horizon.index(t, lo=0.0)
    r2 = np.sum(x.values[: i + 1] ** 2, axis=1)
    return float(zhou_from_norms(r2.max(), r2[-1]))


def zhou_gradient(x_t, M2):
    x_t = np.asarray(x_t, dtype=float)
    M2 = np.asarray(M2, dtype=float)
    r2 = np.sum(x_t ** 2, axis=-1)
    safe = np.where(M2 > 0, M2, 1.0)
    factor = np.where(M2 > 0, 2.0 * (2.0 * r2 / safe - 1.0), 0.0)
    return factor[..., None] * x_t


def grad_gamma_uniform(t: float, x: SampledPath) -> np.ndarray:
    """``2 x(t) (2 |x(t)|^2 / M^2 - 1)``, obtained by differentiating with M held fixed.

    At M = r the same expression gives 2 x(t), which is also the gradient of
    the branch where the running max moves with |x(t)|. Zero when M = 0.
    """
    i = x.horizon.index(t, lo=0.0)
    M2 = np.max(np.sum(x.values[: i + 1] ** 2, axis=1))
    return zhou_gradient(x.values[i], M2)


# ------------------------------------------------------ special functional


def cumulative_sq(values: np.ndarray, dt: float) -> np.ndarray:
    """Cumulative trapezoid integral of |x|^2 from -h to each node, shape (..., N)."""
    q = np.sum(values ** 2, axis=-1)
    c = np.zeros_like(q)
    c[..., 1:] = np.cumsum(0.5 * dt * (q[..., 1:] + q[..., :-1]), axis=-1)
    return c


def _integral_from(values, horizon: Horizon, cum, lo, i, q=None):
    """Trapezoid integral of |x|^2 over [lo, t_i], with x(lo) read by interpolation.

    `cum` is :func:`cumulative_sq` of `values`; `lo` and `i` may be arrays
    of matching shape (one lower time per node index). Only nodes up to
    ``max(i)`` are read, so partially built arrays can be passed; `q` holds
    precomputed squared norms.
    """
    dt = horizon.dt
    lo = np.asarray(lo, dtype=float)
    pos = np.clip((lo + horizon.h) / dt, 0.0, horizon.num_nodes - 1)
    j = np.minimum(np.floor(pos + 1e-9).astype(int), horizon.num_nodes - 1)
    w = np.clip(pos - j, 0.0, 1.0)
    jn = np.minimum(j + 1, horizon.num_nodes - 1)
    if q is None:
        q = np.sum(values ** 2, axis=-1)
    x_lo = (1.0 - w)[..., None] * np.take(values, j, axis=-2) + w[..., None] * np.take(values, jn, axis=-2)
    q_lo = np.sum(x_lo ** 2, axis=-1)
    partial = np.where(w > 0, 0.5 * (q_lo + np.take(q, jn, axis=-1)) * (1.0 - w) * dt, 0.0)
    start = np.where(w > 0, jn, j)
    return partial + np.take(cum, i, axis=-1) - np.take(cum, start, axis=-1)


def gamma_special_trace(values: np.ndarray, horizon: Horizon, ctx: LKContext) -> np.ndarray:
    """Delay-aware functional at every node with time >= 0 (NaN before 0).

    Works on a single path (N, n) only; batches go through
    :func:`gamma_special_at`.
    """
    N = horizon.num_nodes
    i0 = horizon.zero_index
    idx = np.arange(i0, N)
    times = horizon.times[idx]
    cum = cumulative_sq(values, horizon.dt)
    r2 = np.sum(values[idx] ** 2, axis=-1)
    window = np.zeros(idx.shape)
    for lag in ctx.lags:
        window += _integral_from(values, horizon, cum, times - lag, idx)
    out = np.full(N, np.nan)
    out[i0:] = r2 + ctx.omega * window + cum[idx]
    return out


def gamma_special_at(values: np.ndarray, horizon: Horizon, ctx: LKContext, i: int,
                     cum: np.ndarray | None = None, q: np.ndarray | None = None) -> np.ndarray:
    """Delay-aware functional at node `i` for values of shape (..., N, n)."""
    if cum is None:
        cum = cumulative_sq(values, horizon.dt)
    t = horizon.times[i]
    val = np.sum(values[..., i, :] ** 2, axis=-1) + cum[..., i]
    for lag in ctx.lags:
        val = val + ctx.omega * _integral_from(values, horizon, cum, t - lag, i, q)
    return val


def gamma_special(t: float, x: SampledPath, ctx: LKContext) -> float:
    i = x.horizon.index(t, lo=0.0)
    return float(gamma_special_at(x.values, x.horizon, ctx, i))


def ci_derivatives_gamma_special(t: float, x: SampledPath, ctx: LKContext):
    """``((omega J + 1) |x(t)|^2 - omega sum_j |x(t - lag_j)|^2, 2 x(t))``."""
    i = x.horizon.index(t, lo=0.0)
    xt = x.values[i]
    tt = x.horizon.times[i]
    delayed = sum(float(np.sum(x(tt - lag) ** 2)) for lag in ctx.lags)
    dt = (ctx.omega * ctx.J + 1.0) * float(xt @ xt) - ctx.omega * delayed
    return dt, 2.0 * xt.copy()


# ------------------------------------------------------------------- nu


def gamma(t: float, x: SampledPath, ctx: LKContext) -> float:
    return gamma_uniform(t, x) if ctx.variant == UNIFORM else gamma_special(t, x, ctx)


def _gamma_derivatives(t, x, ctx):
    if ctx.variant == UNIFORM:
        return 0.0, grad_gamma_uniform(t, x)
    return ci_derivatives_gamma_special(t, x, ctx)


def nu(t: float, x: SampledPath, ctx: LKContext) -> float:
    tt = x.horizon.times[x.horizon.index(t, lo=0.0)]
    return float(ctx.a(tt) * math.sqrt(ctx.epsilon + gamma(t, x, ctx)))


def grad_nu(t: float, x: SampledPath, ctx: LKContext) -> np.ndarray:
    tt = x.horizon.times[x.horizon.index(t, lo=0.0)]
    _, g = _gamma_derivatives(t, x, ctx)
    return ctx.a(tt) * g / (2.0 * math.sqrt(ctx.epsilon + gamma(t, x, ctx)))


def dt_nu(t: float, x: SampledPath, ctx: LKContext) -> float:
    tt = x.horizon.times[x.horizon.index(t, lo=0.0)]
    root = math.sqrt(ctx.epsilon + gamma(t, x, ctx))
    dg, _ = _gamma_derivatives(t, x, ctx)
    return float(ctx.a_dot(tt) * root + ctx.a(tt) * dg / (2.0 * root))


def nu_gradient_bound(t: float, ctx: LKContext) -> float:
    """a(t) / sqrt(kappa) for the uniform variant, a(t) for the special one."""
    a = float(ctx.a(t))
    return a / math.sqrt(ctx.kappa) if ctx.variant == UNIFORM else a


def interpolate_sq(values, horizon, tau):
    return np.sum(interpolate(values, horizon, tau) ** 2, axis=-1)
