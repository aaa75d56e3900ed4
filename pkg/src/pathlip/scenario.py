"""Assembling verification instances: path sets, reachable hulls and constants."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import lk
from .characteristics import sample_reachable_hull
from .hamiltonian import Benchmark, estimate_structural_constants
from .paths import CompactSetSpec, sample_compact_set

DEFAULT_SAFETY = 1.25
# empirical constants can vanish (an H that ignores the path); the weights
# need strictly positive ones
DEFAULT_FLOOR = 1e-3


def default_s_samples(n: int, seed=0, count: int = 7, scale: float = 3.0) -> np.ndarray:
    if n == 1:
        return np.linspace(-scale, scale, count)[:, None]
    rng = np.random.default_rng(seed)
    return np.vstack([np.zeros((1, n)), scale * rng.normal(size=(count - 1, n))])


@dataclass
class ConstantsEstimate:
    """Context plus the raw numbers it was built from."""

    ctx: lk.LKContext
    empirical: dict
    inflated: dict
    hull_size: int
    warnings: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"context": self.ctx.to_dict(), "empirical": self.empirical,
                "inflated": self.inflated, "hull_size": self.hull_size,
                "warnings": list(self.warnings)}


def empirical_context(bench: Benchmark, D: list, variant: str, safety: float = DEFAULT_SAFETY,
                      floor: float = DEFAULT_FLOOR, epsilon: float = 1e-6, seed=0,
                      hull: list | None = None, s_samples=None, lags=None) -> ConstantsEstimate:
    """LKContext from constants estimated on the reachable hull of D.

    Each empirical ratio is multiplied by `safety` and raised to at least
    `floor`; c_H is the Hamiltonian's declared growth constant.
    """
    hz = bench.horizon
    if hull is None:
        hull = sample_reachable_hull(D, bench.H.c_H, seed=seed)
    if s_samples is None:
        s_samples = default_s_samples(hz.n, seed)
    est = estimate_structural_constants(bench.H, bench.sigma, hull, s_samples, variant)
    lam_H = max(est.lambda_H * safety, floor)
    lam_s = max(est.lambda_sigma * safety, floor)
    lags = bench.lags if lags is None else tuple(lags)
    ctx = lk.LKContext(variant, hz.T, bench.H.c_H, lam_H, lam_s, epsilon, hz.h,
                       lags if variant == lk.SPECIAL else ())
    warnings = list(est.warnings)
    if est.c_H > bench.H.c_H * (1 + 1e-9):
        warnings.append(f"sampled growth {est.c_H:.6g} exceeds the declared c_H {bench.H.c_H}")
    if variant not in bench.classes:
        warnings.append(f"{bench.name} is not declared in the {variant} class")
    return ConstantsEstimate(ctx, est.to_dict(), {"lambda_H": lam_H, "lambda_sigma": lam_s,
                                                  "safety_factor": safety, "floor": floor},
                             len(hull), warnings)


def sample_paths(horizon, lambda_x: float, count: int, seed=0) -> list:
    return sample_compact_set(CompactSetSpec(lambda_x, count, seed), horizon)
