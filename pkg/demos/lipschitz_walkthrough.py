"""Estimate the Lipschitz constant of the B1 value functional and compare it
with the bound built from the uniform Lyapunov-Krasovskii weight.

Run: python demos/lipschitz_walkthrough.py
"""
from pathlip.hamiltonian import make_benchmark
from pathlip.paths import Horizon
from pathlip.scenario import empirical_context, sample_paths
from pathlip.solver import SolverParams, value_functional
from pathlip.verify import bump_pairs, random_pairs, state_violator, verify_uniform_lipschitz

hz = Horizon(n=1, T=1.0, h=0.5, grid_step=0.01)
bench = make_benchmark("B1", hz)

# 1. a compact set of Lipschitz histories and the constants seen on its hull
D = sample_paths(hz, lambda_x=1.0, count=30, seed=0)
est = empirical_context(bench, D, "uniform")
ctx = est.ctx
print(f"lambda_H={ctx.lambda_H:.4g}  lambda_sigma={ctx.lambda_sigma:.4g}  a(0)={float(ctx.a(0.0)):.4g}")
print(f"predicted constant lambda_phi = sqrt(2) a(0) = {ctx.lambda_phi:.4g}")

# 2. the value functional, by exhaustive search over bang-bang controls
phi = value_functional(bench.H, bench.sigma, SolverParams(control_intervals=4))

# 3. worst difference quotient over random pairs and localized bumps
times = [0.0, 0.25, 0.5]
pairs = random_pairs(D, 100, seed=1) + bump_pairs(D, 100, times, seed=2)
rep = verify_uniform_lipschitz(phi, D, times, ctx, pairs)
print(rep.summary_line())

# 4. a functional with twice the predicted constant must be caught
print(verify_uniform_lipschitz(state_violator(ctx.lambda_phi), D, times, ctx, pairs).summary_line())
