"""Follow mu = nu(y1 - y2) + z - eps (tau - t) along random F-triples and show
that its per-step growth shrinks as the grid is refined.

Run: python demos/mu_monotonicity.py
"""
import numpy as np

from pathlip.characteristics import RandomPolicy, build_F_triples, mu_monotonicity_check, mu_trace
from pathlip.hamiltonian import make_benchmark
from pathlip.paths import Horizon, resample
from pathlip.scenario import empirical_context, sample_paths

coarse = make_benchmark("B3", Horizon(1, 1.0, 0.5, 0.01))
ctx = empirical_context(coarse, sample_paths(coarse.horizon, 1.0, 20, 0), "special").ctx
D = sample_paths(Horizon(1, 1.0, 0.5, 1e-3), 1.0, 40, 1)

for step in (4e-3, 2e-3, 1e-3, 5e-4):
    hz = Horizon(1, 1.0, 0.5, step)
    bench = make_benchmark("B3", hz)
    Dh = [resample(x, hz) for x in D]
    # time-based policies: the same controls on every grid
    p1, p2 = RandomPolicy(20, 1, 0.0, 1.0, seed=1), RandomPolicy(20, 1, 0.0, 1.0, seed=2)
    triples = build_F_triples(bench.H, ctx, 0.0, Dh[:20], Dh[20:], p1, p2, z0=np.zeros(20))
    worst = max(mu_monotonicity_check(tr, ctx) for tr in triples)
    drop = mu_trace(triples[0], ctx)
    print(f"step {step:.0e}: worst increment {worst:+.3e}   mu[0]={drop[0]:.4g} -> mu[T]={drop[-1]:.4g}")
