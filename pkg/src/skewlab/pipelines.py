"""Config-driven pipelines behind the command-line commands.

Each runner takes a validated config, an output directory and a RunContext,
writes its CSV / binary / text outputs, and returns a dict of named checks
(bool) for `--check`.  Nothing written depends on wall-clock time, so a
replay reproduces every file byte for byte.
"""
from __future__ import annotations

import time
from contextlib import contextmanager
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import io
from .config import build_integrator, build_ladder, build_sampler, build_system
from .errors import ConfigError
from .flows import BenchmarkCoupling, SlowOnly, ZeroCoupling, ZeroDrift
from .lab import ladder_checks, make_benchmark_drift, run_ladder
from .limit_laws import (
    check_window_bound,
    estimate_ldp,
    estimate_sigma_ensemble,
    estimate_sigma_green_kubo,
    relative_frobenius,
    wip_diagnostics,
)
from .measure import center_f0, ergodic_average, estimate_F, sample_mu
from .ode import integrate_skew
from .seeding import child_seed
from .stats import binomial_se

CENTER_CHAINS = 20


@dataclass
class RunContext:
    root_seed: int
    jobs: int = 1
    seeds: dict = field(default_factory=dict)
    timings: dict = field(default_factory=dict)

    def record_seed(self, tag: str, index: int = 0) -> None:
        self.seeds.setdefault(tag, []).append(child_seed(self.root_seed, tag, index))

    @contextmanager
    def timed(self, name: str):
        t0 = time.perf_counter()
        try:
            yield
        finally:
            self.timings[name] = round(time.perf_counter() - t0, 6)


def _mu(system, sampler, count, icfg, ctx, tag):
    ctx.record_seed(tag)
    return sample_mu(system, sampler, count, icfg, tag=tag).states


def prepare(cfg: dict, ctx: RunContext):
    """System, integrator and sampler from the config, with runtime centering of f0."""
    system = build_system(cfg)
    icfg = build_integrator(cfg)
    sampler = build_sampler(cfg)
    info = {}
    if cfg["system"]["f0"]["centering"] == "runtime":
        with ctx.timed("center_f0"):
            starts = _mu(system, sampler, CENTER_CHAINS, icfg, ctx, "center")
            system, avg = center_f0(system, cfg["system"]["f0"]["calibration_T"], starts, icfg)
        info["f0_mean"] = np.ravel(avg.value)
        info["f0_mean_se"] = np.ravel(avg.std_err)
    return system, icfg, sampler, info


def resolve_drift(system, cfg, sampler, icfg, ctx):
    """Averaged drift F as a picklable callable, plus what was estimated for it."""
    f = system.f
    if isinstance(f, ZeroCoupling):
        return ZeroDrift(), {}
    if isinstance(f, SlowOnly):
        return f.h, {}
    if isinstance(f, BenchmarkCoupling):
        starts = _mu(system, sampler, CENTER_CHAINS, icfg, ctx, "drift")
        with ctx.timed("drift"):
            avg = ergodic_average(system, f.y_observable, cfg["ladder"]["drift_T"], starts, icfg)
        mean_sin = float(np.ravel(avg.value)[0])
        return make_benchmark_drift(system, mean_sin), {"mean_sin": mean_sin, "mean_sin_se": float(np.ravel(avg.std_err)[0])}
    raise ConfigError(f"no drift rule for coupling {type(f).__name__}")


def run_simulate(cfg: dict, out: Path, ctx: RunContext) -> dict:
    system, icfg, sampler, info = prepare(cfg, ctx)
    sim = cfg["simulate"]
    if sim["eta"] is None:
        eta = _mu(system, sampler, 1, icfg, ctx, "simulate")[0]
    else:
        eta = np.asarray(sim["eta"], dtype=float)
    with ctx.timed("integrate"):
        xg, yg = integrate_skew(system, sim["xi"], eta, sim["T"], icfg, frame=cfg["integrator"]["frame"])
    d, ell = system.d, system.ell
    formats = set(sim["formats"])
    if "csv" in formats:
        io.write_trajectory_csv(out / "x.csv", xg, [f"x{i + 1}" for i in range(d)])
        io.write_trajectory_csv(out / "y.csv", yg, [f"y{i + 1}" for i in range(ell)])
    if "trj" in formats:
        io.write_trajectory_bin(out / "x.trj", xg)
        io.write_trajectory_bin(out / "y.trj", yg)
    io.write_mu_samples(out / "eta.mus", eta[None])
    report = {"system": system.name, "eps": system.eps, "T": sim["T"], "steps": len(xg) - 1, "x_T": xg.states[-1], **info}
    io.write_report(out / "report.txt", report)
    return {"finite": bool(np.isfinite(xg.states).all() and np.isfinite(yg.states).all())}


def _sigma_rows(est):
    s = np.atleast_2d(est.sigma)
    se = np.atleast_2d(est.std_err)
    return [(est.method, i, j, s[i, j], se[i, j]) for i in range(s.shape[0]) for j in range(s.shape[1])]


def run_estimate_sigma(cfg: dict, out: Path, ctx: RunContext) -> dict:
    system, icfg, sampler, info = prepare(cfg, ctx)
    sc = cfg["estimate"]["sigma"]
    gk = sc["green_kubo"]
    etas = _mu(system, sampler, sc["M"], icfg, ctx, "sigma-ensemble")
    with ctx.timed("sigma_ensemble"):
        ens, path = estimate_sigma_ensemble(system, sc["n"], sc["M"], sampler, icfg, T=sc["T"], etas=etas)
    diag = wip_diagnostics(path)
    starts = _mu(system, sampler, gk["chains"], icfg, ctx, "green-kubo")
    with ctx.timed("sigma_green_kubo"):
        gke = estimate_sigma_green_kubo(system, gk["T_corr"], gk["T_run"], starts, icfg, gk["sample_dt"])
    io.write_csv(out / "sigma.csv", ["method", "i", "j", "value", "std_err"], _sigma_rows(ens) + _sigma_rows(gke))
    gap = relative_frobenius(ens.sigma, gke.sigma) if np.linalg.norm(gke.sigma) > 0 else float(np.linalg.norm(ens.sigma))
    both = (ens, gke)
    checks = {
        "frobenius_agreement": gap <= sc["tolerance"],
        "symmetric": all(e.is_symmetric(0.0) for e in both),
        "psd": all(e.is_psd() for e in both),
        "var_ratio_T2": bool(diag.get("var_ratio_T2_ok", False)),
        "wip_mean": diag["mean_ok"],
        "wip_var_ratio": diag["var_ratio_ok"],
        "wip_increment_corr": diag["increment_corr_ok"],
    }
    io.write_report(
        out / "report.txt",
        {
            "sigma_ensemble": ens.sigma,
            "sigma_green_kubo": gke.sigma,
            "relative_frobenius": gap,
            "clipped_mass_ensemble": ens.clipped_mass,
            "clipped_mass_green_kubo": gke.clipped_mass,
            **{f"wip_{k}": v for k, v in diag.items()},
            **info,
            **{f"check_{k}": v for k, v in checks.items()},
        },
    )
    return checks


def _F_table(system, x_grid, cfg, sampler, icfg, ctx, T, tag):
    fc = cfg["estimate"]["F"]
    starts = _mu(system, sampler, fc["chains"], icfg, ctx, tag)
    with ctx.timed(tag):
        return estimate_F(system, np.asarray(x_grid, dtype=float), T, starts, icfg)


def run_estimate_F(cfg: dict, out: Path, ctx: RunContext) -> dict:
    system, icfg, sampler, info = prepare(cfg, ctx)
    fc = cfg["estimate"]["F"]
    x = np.asarray(fc["x_grid"], dtype=float)
    avg = _F_table(system, x, cfg, sampler, icfg, ctx, fc["T"], "F")
    d = system.d
    header = [f"x{i + 1}" for i in range(d)] + [f"F{i + 1}" for i in range(d)] + [f"se{i + 1}" for i in range(d)]
    value, se = np.asarray(avg.value), np.broadcast_to(avg.std_err, x.shape)
    io.write_csv(out / "F.csv", header, (list(a) + list(b) + list(c) for a, b, c in zip(x, value, se)))
    io.write_report(out / "report.txt", {"T": fc["T"], "batches": avg.n_batches, **info})
    return {"finite": bool(np.isfinite(value).all())}


def run_estimate_ldp(cfg: dict, out: Path, ctx: RunContext) -> dict:
    system, icfg, sampler, info = prepare(cfg, ctx)
    lc = cfg["estimate"]["ldp"]
    x = np.asarray(lc["x_grid"], dtype=float)
    F_hat = np.asarray(_F_table(system, x, cfg, sampler, icfg, ctx, lc["F_T"], "ldp-F").value)
    starts = _mu(system, sampler, lc["n_windows"], icfg, ctx, "ldp")
    with ctx.timed("ldp"):
        est = estimate_ldp(system, x, lc["a_grid"], lc["T_grid"], lc["n_windows"], F_hat, sampler, icfg, starts=starts)
    se = est.std_err
    rows = []
    for p in range(len(x)):
        for ia, a in enumerate(est.a_grid):
            for it, T in enumerate(est.T_grid):
                rows.append([*x[p], a, T, est.b_hat[p, ia, it], se[p, ia, it]])
    io.write_csv(out / "ldp.csv", [f"x{i + 1}" for i in range(system.d)] + ["a", "T", "b_hat", "std_err"], rows)

    pc = lc["window_bound"]
    p_starts = _mu(system, sampler, pc["n_windows"], icfg, ctx, "window_bound")
    prop = []
    with ctx.timed("window_bound"):
        for p in range(len(x)):
            r = check_window_bound(system, x[p], pc["a"], pc["T"], F_hat[p], pc["n_windows"], pc["shift_n"], sampler, icfg, starts=p_starts)
            prop.append(r)
    keys = ["lhs", "lhs_se", "rhs", "slack", "b_hat", "lhs_shifted", "lhs_shifted_se", "slack_ok", "stationary_ok"]
    io.write_csv(out / "window_bound.csv", [f"x{i + 1}" for i in range(system.d)] + keys, ([*x[p], *(int(r[k]) if isinstance(r[k], bool) else r[k] for k in keys)] for p, r in enumerate(prop)))

    checks = ldp_checks(est, system.f_sup)
    checks["window_bound_slack"] = all(r["slack_ok"] for r in prop)
    checks["window_bound_stationary"] = all(r["stationary_ok"] for r in prop)
    io.write_report(out / "report.txt", {"F_hat": F_hat, **info, **{f"check_{k}": v for k, v in checks.items()}})
    return checks


def ldp_checks(est, f_sup: float, a_ref: float = 0.1, n_se: float = 2.0) -> dict:
    """Shape checks on b_hat: monotone in a, decaying in T near a_ref, zero beyond 2|f|."""
    b = est.b_hat
    out = {"monotone_in_a": bool(np.all(np.diff(b, axis=1) <= 0))}
    ia = np.flatnonzero(np.isclose(est.a_grid, a_ref))
    if ia.size:
        row = b[:, ia[0], :]
        se = binomial_se(row, est.n_windows)
        step = row[:, 1:] - row[:, :-1]
        out["decay_in_T"] = bool(np.all(step <= n_se * np.sqrt(se[:, 1:] ** 2 + se[:, :-1] ** 2)))
    big = est.a_grid > 2 * f_sup
    out["zero_beyond_2f"] = bool(np.all(b[:, big, :] == 0)) if big.any() else True
    return out


def run_ladder_pipeline(cfg: dict, out: Path, ctx: RunContext) -> dict:
    system, icfg, sampler, info = prepare(cfg, ctx)
    lc = build_ladder(cfg)
    if cfg["ladder"]["sigma"] is None:
        sc = cfg["estimate"]["sigma"]
        etas = _mu(system, sampler, sc["M"], icfg, ctx, "sigma-ensemble")
        with ctx.timed("sigma_ensemble"):
            est, _ = estimate_sigma_ensemble(system, sc["n"], sc["M"], sampler, icfg, T=sc["T"], etas=etas)
        sigma = est.sigma
    else:
        sigma = np.atleast_2d(np.asarray(cfg["ladder"]["sigma"], dtype=float))
    F, drift_info = resolve_drift(system, cfg, sampler, icfg, ctx)
    etas = _mu(system, sampler, lc.M, icfg, ctx, "ladder")
    with ctx.timed("ladder"):
        report = run_ladder(lc, system, sigma, F, etas, ctx.root_seed, icfg, ctx.jobs)
    for tag, seeds in report.seeds.items():
        ctx.seeds[f"ladder/{tag}"] = list(seeds)

    scalar = ["eps", "delta", "Z_sup_mean", "Z_sup_se", "I0_sup_max", "I1_sup_max", "I2_sup_mean", "B0", "B1",
              "bounds_ok", "telescoping_max", "oracle_n", "oracle_max", "noise_floor"]
    io.write_csv(out / "ladder.csv", scalar, ([int(r[k]) if isinstance(r[k], bool) else r[k] for k in scalar] for r in report.rows))
    ks_rows = []
    for r in report.rows:
        for it, t in enumerate(lc.eval_times):
            for c in range(system.d):
                ks_rows.append([r["eps"], t, c + 1, r["ks"][it, c], r["energy"][it]])
    io.write_csv(out / "marginals.csv", ["eps", "t", "coord", "ks", "energy"], ks_rows)

    lchk = ladder_checks(report)
    checks = {
        "bounds": lchk["bounds_ok"],
        "oracle": lchk["oracle_max"] <= cfg_tol(cfg, "oracle", 1e-4),
        "oracle_count": all(r["oracle_n"] >= min(50, lc.M) for r in report.rows),
        "Z_strictly_decreasing": lchk["Z_strictly_decreasing"],
        "ks_nonincreasing": lchk["ks_nonincreasing_up_to_floor"],
        "ks_final": lchk["ks_final_max"] <= cfg_tol(cfg, "ks_final", 0.10),
    }
    io.write_report(
        out / "report.txt",
        {
            "sigma": sigma,
            **drift_info,
            **info,
            "sde_mean_x_T": report.sde["mean_x_T"],
            "sde_cov_x_T": report.sde["cov_x_T"],
            **{f"eps={r['eps']!r}_mean_x_T": r["mean_x_T"] for r in report.rows},
            **{f"eps={r['eps']!r}_cov_x_T": r["cov_x_T"] for r in report.rows},
            **{f"ladder_{k}": v for k, v in lchk.items()},
            **{f"check_{k}": v for k, v in checks.items()},
        },
    )
    return checks


def cfg_tol(cfg: dict, key: str, default: float) -> float:
    return float(cfg["tolerances"].get(key, default))


RUNNERS = {
    ("simulate", None): run_simulate,
    ("estimate", "sigma"): run_estimate_sigma,
    ("estimate", "F"): run_estimate_F,
    ("estimate", "ldp"): run_estimate_ldp,
    ("ladder", None): run_ladder_pipeline,
}
