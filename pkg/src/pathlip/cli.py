"""Batch front-end.

Usage::

    pathlip SUBCOMMAND [--config PATH] [--set section.key=value ...]
                       [--seed N] [--out DIR] [--threads N]

Subcommands: ``lk-check``, ``solve``, ``characteristics``, ``verify``,
``constants``. Each run writes its resolved config, reports and tables into
the output directory; wall-clock data goes to ``metadata.json`` only, so
the other files are reproducible byte for byte. The exit status is 0 iff
every selected check passed.
"""
from __future__ import annotations

import argparse
import csv
import json
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from contextlib import contextmanager
from pathlib import Path

import numpy as np

from . import __version__, lk
from .characteristics import (RandomPolicy, build_F_triples, check_F_membership,
                              mu_monotonicity_check, mu_trace, sample_reachable_hull)
from .config import ConfigError, load_config
from .hamiltonian import make_benchmark
from .paths import Horizon
from .scenario import empirical_context, sample_paths
from .solver import SolverParams, value_functional, write_values_csv
from . import verify as V

SUBCOMMANDS = ("lk-check", "solve", "characteristics", "verify", "constants")


class Run:
    """Shared state of one invocation: config, benchmark, solver, output directory."""

    def __init__(self, cfg, map_fn):
        self.cfg = cfg
        self.map = map_fn
        self.seed = cfg["run"]["seed"]
        hz = cfg["horizon"]
        self.horizon = Horizon(hz["n"], hz["T"], hz["h"], hz["grid_step"])
        b = cfg["benchmark"]
        self.bench = make_benchmark(b["name"], self.horizon, b["q"])
        s = cfg["solver"]
        self.params = SolverParams(s["control_intervals"], s["integrator_substeps"],
                                   s["enumeration_cap"], s["method"], s["budget"], s["n_random"],
                                   self.seed)
        self.phi = value_functional(self.bench.H, self.bench.sigma, self.params)
        self.out = Path(cfg["run"]["out"])
        self.reports = []
        self.meta = {"version": __version__, "runtimes": {}}

    def context(self, variant, D):
        c = self.cfg["lk"]
        est = empirical_context(self.bench, D[: c["hull_paths"]], variant, c["safety_factor"],
                                c["floor"], c["epsilon"], seed=self.seed)
        if c["source"] == "declared":
            if c["lambda_H"] is None or c["lambda_sigma"] is None:
                raise ConfigError("lk.lambda_H and lk.lambda_sigma are required when lk.source = declared")
            ctx = lk.LKContext(variant, self.horizon.T, self.bench.H.c_H, c["lambda_H"],
                               c["lambda_sigma"], c["epsilon"], self.horizon.h,
                               self.bench.lags if variant == lk.SPECIAL else ())
            est.ctx = ctx
        return est

    def add(self, report):
        self.reports.append(report)
        self.meta["runtimes"][f"{len(self.reports) - 1}:{report.theorem_id}"] = report.runtime
        print(report.summary_line())
        self.flush()

    def flush(self):
        V.write_reports_json(self.reports, self.out / "reports.json")
        V.write_summary_csv(self.reports, self.out / "summary.csv")

    @property
    def ok(self) -> bool:
        return all(r.passed for r in self.reports)


# ------------------------------------------------------------ subcommands


def cmd_lk_check(run: Run) -> bool:
    cfg, hz = run.cfg, run.horizon
    # gradient checks need probe steps far below the run grid
    delta = 1e-4 * (hz.T + hz.h)
    fine = Horizon(hz.n, hz.T, hz.h, delta / 2)
    D = sample_paths(fine, cfg["verify"]["lambda_x"][0], cfg["verify"]["paths"], run.seed)
    ctx = run.context(cfg["lk"]["variant"], sample_paths(hz, cfg["verify"]["lambda_x"][0],
                                                         cfg["verify"]["paths"], run.seed)).ctx
    times = [t for t in cfg["verify"]["times"] if t < hz.T]
    run.add(V.lk_internal_checks(ctx, D, times, delta=delta, seed=run.seed))
    if ctx.variant == lk.SPECIAL:
        coef = float(np.max(lk.special_coefficient(ctx, np.linspace(0, hz.T, 1001))))
        run.add(V.VerificationReport("lk-internal", ctx.to_dict(), {"times": 1001}, coef, 0.0, 0.0,
                                     run.seed, details={"check": "special coefficient <= 0"}))
    return run.ok


def cmd_constants(run: Run) -> bool:
    cfg, hz = run.cfg, run.horizon
    D = sample_paths(hz, cfg["verify"]["lambda_x"][0], cfg["verify"]["paths"], run.seed)
    out = {"benchmark": run.bench.name, "kappa": lk.KAPPA}
    for variant in ("uniform", "special"):
        est = run.context(variant, D)
        out[variant] = est.to_dict()
    times = {}
    for lam in cfg["verify"]["lambda_x"]:
        Dl = sample_paths(hz, lam, cfg["verify"]["time_paths"], run.seed + 1)
        hull = sample_reachable_hull(Dl[: cfg["lk"]["hull_paths"]], run.bench.H.c_H, seed=run.seed)
        ctx = run.context("uniform", Dl).ctx
        R1, R2 = V.estimate_R(run.bench.H, hull)
        sf = cfg["lk"]["safety_factor"]
        times[repr(lam)] = {"R1": R1 * sf, "R2": R2 * sf, "lambda_phi": ctx.lambda_phi,
                            "lambda_phi_time": lk.lambda_phi_time(lam, ctx.lambda_phi, R1 * sf,
                                                                  R2 * sf, ctx.c_H)}
    out["time"] = times
    with open(run.out / "constants.json", "w") as fh:
        json.dump(V._clean(out), fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(f"kappa = (3 - sqrt(5))/2 = {lk.KAPPA:.17g}")
    u, s = out["uniform"]["context"], out["special"]["context"]
    print(f"uniform: a(0) = {u['a0']:.10g}, lambda_phi = sqrt(2) a(0) = {u['lambda_phi']:.10g}")
    print(f"special: omega = {s['omega']:.10g}, a(0) = {s['a0']:.10g}, "
          f"lambda_phi_star = a(0) sqrt(omega J + 1) = {s['lambda_phi_star']:.10g}")
    for lam, d in times.items():
        print(f"lambda_x = {lam}: lambda_phi_time = {d['lambda_phi_time']:.10g} "
              f"(R1 = {d['R1']:.6g}, R2 = {d['R2']:.6g})")
    return True


def cmd_solve(run: Run) -> bool:
    cfg, hz = run.cfg, run.horizon
    D = sample_paths(hz, cfg["solve"]["lambda_x"], cfg["solve"]["paths"], run.seed)
    times = cfg["solve"]["times"]
    rows = run.map(lambda p: [(p[0], t, run.phi(t, p[1])) for t in times], list(enumerate(D)))
    flat = [(f"path{i}", t, v) for r in rows for (i, t, v) in r]
    write_values_csv(flat, run.out / "values.csv")
    print(f"wrote {len(flat)} values to {run.out / 'values.csv'}")
    return True


def cmd_characteristics(run: Run) -> bool:
    cfg, hz = run.cfg, run.horizon
    c = cfg["characteristics"]
    B = c["triples"]
    D = sample_paths(hz, cfg["verify"]["lambda_x"][0], 2 * B, run.seed)
    est = run.context(cfg["lk"]["variant"], D)
    ctx = est.ctx
    t = c["t"]
    p1 = RandomPolicy(B, hz.n, t, hz.T, c["policy_intervals"], seed=(run.seed, 1))
    p2 = RandomPolicy(B, hz.n, t, hz.T, c["policy_intervals"], seed=(run.seed, 2))
    triples = build_F_triples(run.bench.H, ctx, t, D[:B], D[B:], p1, p2, phi=run.phi, band=c["band"])
    incs = [mu_monotonicity_check(tr, ctx) for tr in triples]
    member = [check_F_membership(tr, run.bench.H, ctx) for tr in triples]
    with open(run.out / "mu_summary.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["triple", "max_increment", "member", "band_slack"])
        for k, (inc, m) in enumerate(zip(incs, member)):
            w.writerow([k, f"{inc:.17g}", m.ok, f"{m.max_band_slack:.17g}"])
    with open(run.out / "triples_long.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["triple", "time", "component", "y1", "y2", "z", "mu"])
        i0 = hz.index(t, lo=0.0)
        for k, tr in enumerate(triples[: c["export"]]):
            mu = mu_trace(tr, ctx)
            for j in range(i0, hz.num_nodes):
                for comp in range(hz.n):
                    w.writerow([k, f"{hz.times[j]:.17g}", comp + 1, f"{tr.y1.values[j, comp]:.17g}",
                                f"{tr.y2.values[j, comp]:.17g}", f"{tr.z.values[j, 0]:.17g}",
                                f"{mu[j - i0]:.17g}"])
    worst = float(max(incs))
    details = {"members": int(sum(m.ok for m in member)), "band": c["band"]}
    if ctx.variant == lk.SPECIAL:
        details["special_coefficient_max"] = float(np.max(lk.special_coefficient(ctx, hz.times[i0:])))
    rep = V.VerificationReport("mu-monotonicity", ctx.to_dict(), {"triples": B}, worst, 0.0,
                               c["tolerance_steps"] * hz.dt, run.seed, est.warnings, details)
    ok_members = all(m.ok for m in member)
    if not ok_members:
        rep.warnings.append("a triple failed the membership re-check")
    run.add(rep)
    return run.ok and ok_members and details.get("special_coefficient_max", -1.0) <= 0


def cmd_verify(run: Run) -> bool:
    cfg, hz = run.cfg, run.horizon
    v = cfg["verify"]
    tol = v["tolerance"]
    times = [t for t in v["times"] if 0 <= t <= hz.T]
    for theorem in v["theorems"]:
        if theorem in ("uniform-lipschitz", "special-lipschitz"):
            variant = "uniform" if theorem == "uniform-lipschitz" else "special"
            D = sample_paths(hz, v["lambda_x"][0], v["paths"], run.seed)
            est = run.context(variant, D)
            pairs = V.random_pairs(D, v["pairs"], run.seed) + \
                V.bump_pairs(D, v["bump_pairs"], times, run.seed + 1)
            if variant == "uniform":
                rep = V.verify_uniform_lipschitz(run.phi, D, times, est.ctx, pairs, tol, run.seed, run.map)
            else:
                rep = V.verify_special_lipschitz(run.phi, D, times, est.ctx, pairs, run.bench.sigma,
                                                 tol, run.seed, run.map)
            rep.warnings.extend(est.warnings)
            run.add(rep)
        elif theorem == "time-lipschitz":
            sf = cfg["lk"]["safety_factor"]
            for k, lam in enumerate(v["lambda_x"]):
                Dl = sample_paths(hz, lam, v["time_paths"], run.seed + 1 + k)
                hull = sample_reachable_hull(Dl[: cfg["lk"]["hull_paths"]], run.bench.H.c_H, seed=run.seed)
                est = run.context("uniform", Dl)
                R1, R2 = V.estimate_R(run.bench.H, hull)
                rep = V.verify_time_lipschitz(run.phi, lam, est.ctx, Dl, v["time_pairs"], R1 * sf,
                                              R2 * sf, tolerance=tol, seed=run.seed, map_fn=run.map)
                rep.warnings.extend(est.warnings)
                run.add(rep)
        elif theorem == "infinitesimal-criterion":
            D = sample_paths(hz, v["lambda_x"][0], v["criterion_points"], run.seed)
            # leave room for the full step schedule; coarse grids get a clipped one
            t_max = max(hz.T - 64 * hz.dt, 0.5 * hz.T)
            rng = np.random.default_rng(run.seed)
            pts = [(float(hz.times[hz.index(rng.uniform(0, t_max), lo=0.0)]), x) for x in D]
            s = np.asarray(v["criterion_s"], dtype=float)
            s = s[:, None] if hz.n == 1 else np.outer(s, np.ones(hz.n))
            run.add(V.verify_infinitesimal_criterion(run.phi, run.bench.H, run.bench.H.c_H, pts, s,
                                                     tolerance=v["criterion_tolerance"],
                                                     seed=run.seed, map_fn=run.map))
        elif theorem == "lk-internal":
            cmd_lk_check(run)
    run.flush()
    return run.ok


COMMANDS = {"lk-check": cmd_lk_check, "constants": cmd_constants, "solve": cmd_solve,
            "characteristics": cmd_characteristics, "verify": cmd_verify}


# ------------------------------------------------------------ entry point


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="run configuration file")
    common.add_argument("--set", dest="overrides", action="append", default=[],
                        metavar="SECTION.KEY=VALUE", help="override one config value (repeatable)")
    common.add_argument("--seed", type=int, help="overrides run.seed")
    common.add_argument("--out", metavar="DIR", help="overrides run.out")
    common.add_argument("--threads", type=int, help="overrides run.threads")
    p = argparse.ArgumentParser(prog="pathlip", description=__doc__.split("\n\n")[0])
    sub = p.add_subparsers(dest="command", required=True)
    for name in SUBCOMMANDS:
        sub.add_parser(name, parents=[common])
    return p


@contextmanager
def _mapper(threads: int):
    if threads <= 1:
        yield map
        return
    with ThreadPoolExecutor(max_workers=threads) as ex:
        yield ex.map


def run(command: str, config_path=None, overrides=(), seed=None, out=None, threads=None) -> int:
    overrides = list(overrides)
    for key, val in (("run.seed", seed), ("run.out", out), ("run.threads", threads)):
        if val is not None:
            overrides.append(f"{key}={val}")
    try:
        cfg = load_config(config_path, overrides)
        with _mapper(cfg["run"]["threads"]) as map_fn:
            r = Run(cfg, map_fn)
            r.out.mkdir(parents=True, exist_ok=True)
            (r.out / "config.ini").write_text(cfg.to_ini())
            start = time.time()
            r.meta["started"] = start
            try:
                ok = COMMANDS[command](r)
            finally:
                r.meta.update({"command": command, "wall_seconds": time.time() - start})
                r.flush()
                (r.out / "metadata.json").write_text(json.dumps(V._clean(r.meta), indent=2, sort_keys=True))
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    except (ValueError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    return 0 if ok else 1


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return run(args.command, args.config, args.overrides, args.seed, args.out, args.threads)


if __name__ == "__main__":
    sys.exit(main())
