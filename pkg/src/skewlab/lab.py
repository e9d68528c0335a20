"""The eps-ladder harness for the diffusion limit and its proof diagnostics.

For each eps on the ladder an ensemble of skew-product runs (fast start
drawn from mu, fixed slow start xi) is compared in distribution with an
Euler-Maruyama ensemble of the limiting SDE.  Each run is also taken apart
along the lines of the convergence proof:

    x(t) = xi + W(t) + Z(t) + int_0^t F(x(s)) ds,
    W(t) = int_0^t eps^-1 f0(y(s)) ds,   Z(t) = int_0^t (f - F)(x(s), y(s)) ds,

with Z(N delta) split over windows of length delta into a freezing error I1
and a window-average error I2, plus the remainder I0 on [N delta, t].
"""
from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from . import ode
from .errors import ConfigError, InputError, JobFailure
from .flows import FlowSystem
from .ode import IntegratorConfig, TrajectoryGrid
from .parallel import run_jobs
from .sde import NoisePath, SdeSpec, apply_G, euler_maruyama
from .seeding import child_seed
from .stats import cumtrapz, energy_distance, ks_2samp_statistic, ks_noise_floor, mean_and_se


@dataclass(frozen=True)
class LadderConfig:
    eps_ladder: tuple = (0.5, 0.25, 0.125)
    M: int = 2000
    T: float = 1.0
    eval_times: tuple = (0.25, 0.5, 1.0)
    delta_exponent: float = 1.5
    xi: tuple = (0.0,)
    sde_h: float = 1e-3
    chunk_size: int = 250
    oracle_count: int = 50

    def __post_init__(self):
        ladder = list(self.eps_ladder)
        if not ladder or any(not 0 < e <= 1 for e in ladder):
            raise ConfigError("eps_ladder entries must lie in (0, 1]")
        if any(b >= a for a, b in zip(ladder, ladder[1:])):
            raise ConfigError("eps_ladder must be strictly decreasing")
        if not self.T > 0 or any(not 0 < t <= self.T for t in self.eval_times):
            raise ConfigError("eval_times must lie in (0, T]")
        if self.M < 2 or self.chunk_size < 1:
            raise ConfigError("M must be >= 2 and chunk_size >= 1")
        if self.oracle_count < 0:
            raise ConfigError("oracle_count must be >= 0")

    def delta(self, eps: float) -> float:
        return eps**self.delta_exponent


@dataclass
class ZDecomposition:
    """Sup-norms over [0, T] per trajectory, with the deterministic bounds."""

    Z_sup: np.ndarray
    I0_sup: np.ndarray
    I1_sup: np.ndarray
    I2_sup: np.ndarray
    B0: float
    B1: float
    delta: float
    n_windows: int
    telescoping_residual: np.ndarray
    Z_path: np.ndarray = field(repr=False, default=None)

    def bounds_hold(self, tol: float = 1e-6) -> bool:
        return bool(np.all(self.I0_sup <= self.B0 + tol) and np.all(self.I1_sup <= self.B1 + tol))


def decompose_Z(
    x: TrajectoryGrid,
    y: TrajectoryGrid,
    system: FlowSystem,
    F,
    delta: float,
) -> ZDecomposition:
    """Split Z over windows [n delta, (n+1) delta] on the stored slow grid.

    delta is rounded to a whole number m >= 10 of grid steps so windows start
    on grid points; the bounds use the rounded delta.  All integrals are
    trapezoid sums on the grid, so Z(T) = I0 + I1 + I2 holds to roundoff.
    """
    if (
        x.time_frame != "slow"
        or y.time_frame != "slow"
        or len(x) != len(y)
        or abs(x.dt - y.dt) > 1e-12 * x.dt
        or x.t0 != y.t0
        or x.states.shape[:-1] != y.states.shape[:-1]
    ):
        raise InputError("x and y trajectories are not aligned on one slow grid")
    h = x.dt
    m = int(round(delta / h))
    if m < 10:
        raise InputError(f"delta={delta:.3g} is below 10 grid steps ({10 * h:.3g})")
    xs, ys = x.states, y.states
    n = len(x) - 1
    T = n * h
    d_eff = m * h
    g_vals = system.f(xs, ys) - F(xs)
    Z = cumtrapz(g_vals, h)
    norm = lambda a: np.linalg.norm(a, axis=-1)  # noqa: E731

    n_win = n // m
    batch = g_vals.shape[1:]
    I1 = np.zeros(batch)
    I2 = np.zeros(batch)
    I1_sup = np.zeros(batch[:-1])
    I2_sup = np.zeros(batch[:-1])
    for j in range(n_win):
        sl = slice(j * m, (j + 1) * m + 1)
        direct = np.trapezoid(g_vals[sl], dx=h, axis=0)
        xj = xs[j * m]
        frozen = system.f(xj[None], ys[sl]) - F(xj)[None]
        B = np.trapezoid(frozen, dx=h, axis=0)
        I1 = I1 + (direct - B)
        I2 = I2 + B
        I1_sup = np.maximum(I1_sup, norm(I1))
        I2_sup = np.maximum(I2_sup, norm(I2))
    # I0(t) = Z(t) - Z(N(t) delta)
    k = np.arange(n + 1)
    I0 = Z - Z[(k // m) * m]
    I0_sup = norm(I0).max(axis=0)
    tail = np.trapezoid(g_vals[n_win * m :], dx=h, axis=0) if n > n_win * m else np.zeros(batch)
    resid = norm(Z[-1] - (tail + I1 + I2))
    B0 = 2.0 * system.f_sup * d_eff
    B1 = 2.0 * system.lip_f * (system.f0_sup + system.f_sup) * T * d_eff / system.eps
    return ZDecomposition(norm(Z).max(axis=0), I0_sup, I1_sup, I2_sup, B0, B1, d_eff, n_win, resid, Z)


def two_sample_distance(a, b) -> dict:
    """Per-coordinate KS statistics and the energy distance of the joint marginal."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    a = a[:, None] if a.ndim == 1 else a
    b = b[:, None] if b.ndim == 1 else b
    if a.shape[0] == 0 or b.shape[0] == 0:
        raise InputError("samples must be nonempty")
    if a.shape[1] != b.shape[1]:
        raise InputError("samples have different dimensions")
    ks = np.array([ks_2samp_statistic(a[:, i], b[:, i]) for i in range(a.shape[1])])
    return {"ks": ks, "energy": energy_distance(a, b)}


def oracle_residual(x: TrajectoryGrid, W: TrajectoryGrid, Z: TrajectoryGrid, xi, F) -> np.ndarray:
    """sup_t |x(t) - G(W + Z)(t)| per trajectory."""
    v = apply_G(W.states + Z.states, np.asarray(xi, dtype=float), F, x.dt)
    return np.linalg.norm(x.states - v, axis=-1).max(axis=0)


@dataclass(frozen=True)
class _SlowIntegrand:
    kind: str
    system: FlowSystem
    F: object

    def __call__(self, x, y):
        if self.kind == "W":
            return self.system.f0(y) / self.system.eps
        return self.system.f(x, y) - self.F(x)


@dataclass(frozen=True)
class _ChunkJob:
    system: FlowSystem
    F: object
    xi: tuple
    etas: np.ndarray
    T: float
    delta: float
    eval_times: tuple
    cfg: IntegratorConfig
    oracle_n: int
    index: int
    seed: int


def _run_chunk(job: _ChunkJob) -> dict:
    try:
        integrands = {"W": _SlowIntegrand("W", job.system, job.F), "Z": _SlowIntegrand("Z", job.system, job.F)}
        xg, yg, ints = ode.integrate_skew_with_integrals(job.system, job.xi, job.etas, job.T, integrands, job.cfg)
        dec = decompose_Z(xg, yg, job.system, job.F, job.delta)
        out = {
            "marginals": np.stack([xg.at(t) for t in job.eval_times]),
            "x_T": xg.states[-1],
            "Z_sup": dec.Z_sup,
            "I0_sup": dec.I0_sup,
            "I1_sup": dec.I1_sup,
            "I2_sup": dec.I2_sup,
            "telescoping": dec.telescoping_residual,
            "B0": dec.B0,
            "B1": dec.B1,
            "delta": dec.delta,
        }
        if job.oracle_n > 0:
            sel = slice(0, job.oracle_n)
            member = lambda g: TrajectoryGrid(g.t0, g.dt, g.states[:, sel], g.time_frame)  # noqa: E731
            out["oracle"] = oracle_residual(member(xg), member(ints["W"]), member(ints["Z"]), job.xi, job.F)
        return out
    except Exception as exc:  # noqa: BLE001
        raise JobFailure(f"ladder chunk failed: {exc}", seed=job.seed, index=job.index) from exc


@dataclass(frozen=True)
class _SdeJob:
    spec: SdeSpec
    T: float
    h: float
    size: int
    seed: int
    index: int
    eval_times: tuple


def _run_sde_chunk(job: _SdeJob) -> dict:
    try:
        n = int(round(job.T / job.h))
        noise = NoisePath.generate(n, job.h, job.spec.d, (job.size,), seed=job.seed, tag="sde", index=job.index)
        path = euler_maruyama(job.spec, job.T, job.h, noise)
        return {"marginals": np.stack([path.at(t) for t in job.eval_times]), "x_T": path.states[-1]}
    except Exception as exc:  # noqa: BLE001
        raise JobFailure(f"SDE chunk failed: {exc}", seed=child_seed(job.seed, "sde", job.index), index=job.index) from exc


def _chunks(M, size):
    return [(s, min(s + size, M)) for s in range(0, M, size)]


@dataclass
class LadderReport:
    config: dict
    root_seed: int
    rows: list
    sde: dict
    seeds: dict

    def row(self, eps: float) -> dict:
        for r in self.rows:
            if abs(r["eps"] - eps) < 1e-15:
                return r
        raise KeyError(eps)


def simulate_sde_ensemble(spec: SdeSpec, config: LadderConfig, root_seed: int, jobs: int = 1) -> dict:
    sde_jobs = [
        _SdeJob(spec, config.T, config.sde_h, b - a, root_seed, i, tuple(config.eval_times))
        for i, (a, b) in enumerate(_chunks(config.M, config.chunk_size))
    ]
    parts = run_jobs(_run_sde_chunk, sde_jobs, jobs)
    return {
        "marginals": np.concatenate([p["marginals"] for p in parts], axis=1),
        "x_T": np.concatenate([p["x_T"] for p in parts], axis=0),
        "seeds": [child_seed(root_seed, "sde", j.index) for j in sde_jobs],
    }


def run_ladder(
    config: LadderConfig,
    system: FlowSystem,
    sigma,
    F,
    etas,
    root_seed: int = 0,
    cfg: IntegratorConfig = IntegratorConfig(),
    jobs: int = 1,
) -> LadderReport:
    """Skew-product ensembles along the eps ladder against one SDE ensemble.

    `etas` holds M fast starts drawn from mu (shared by every rung); `sigma`
    and `F` define the limiting SDE and F is also the drift used in Z.
    """
    etas = np.asarray(etas, dtype=float)
    if etas.shape != (config.M, system.ell):
        raise InputError(f"etas must have shape ({config.M}, {system.ell})")
    xi = tuple(np.broadcast_to(np.asarray(config.xi, dtype=float), (system.d,)).tolist())
    spec = SdeSpec.from_sigma(F, sigma, xi)
    sde = simulate_sde_ensemble(spec, config, root_seed, jobs)
    chunks = _chunks(config.M, config.chunk_size)
    floor = ks_noise_floor(config.M)
    rows = []
    seeds = {"sde": sde["seeds"]}
    for eps in config.eps_ladder:
        sys_e = system.with_eps(eps)
        jobs_e = []
        for i, (a, b) in enumerate(chunks):
            seed = child_seed(root_seed, f"ladder-eps={eps!r}", i)
            jobs_e.append(
                _ChunkJob(
                    sys_e, F, xi, etas[a:b], config.T, config.delta(eps), tuple(config.eval_times),
                    cfg, max(0, min(b, config.oracle_count) - a), i, seed,
                )
            )
        seeds[f"eps={eps!r}"] = [j.seed for j in jobs_e]
        parts = run_jobs(_run_chunk, jobs_e, jobs)
        cat = lambda key, axis=0: np.concatenate([p[key] for p in parts], axis=axis)  # noqa: E731
        marg = cat("marginals", 1)
        z_sup = cat("Z_sup")
        zm, zse = mean_and_se(z_sup) if z_sup.size > 1 else (z_sup.mean(), 0.0)
        ks = np.array([two_sample_distance(marg[i], sde["marginals"][i])["ks"] for i in range(len(config.eval_times))])
        energy = np.array([two_sample_distance(marg[i], sde["marginals"][i])["energy"] for i in range(len(config.eval_times))])
        x_T = cat("x_T")
        oracle = [p["oracle"] for p in parts if "oracle" in p]
        I0, I1 = cat("I0_sup"), cat("I1_sup")
        B0, B1 = parts[0]["B0"], parts[0]["B1"]
        rows.append(
            {
                "eps": float(eps),
                "delta": parts[0]["delta"],
                "Z_sup_mean": float(zm),
                "Z_sup_se": float(zse),
                "I0_sup_max": float(I0.max()),
                "I1_sup_max": float(I1.max()),
                "I2_sup_mean": float(cat("I2_sup").mean()),
                "B0": float(B0),
                "B1": float(B1),
                "bounds_ok": bool(np.all(I0 <= B0 + 1e-6) and np.all(I1 <= B1 + 1e-6)),
                "telescoping_max": float(cat("telescoping").max()),
                "oracle_n": int(sum(o.size for o in oracle)),
                "oracle_max": float(np.concatenate(oracle).max()) if oracle else float("nan"),
                "ks": ks,
                "energy": energy,
                "mean_x_T": x_T.mean(axis=0),
                "cov_x_T": np.atleast_2d(np.cov(x_T, rowvar=False)),
                "noise_floor": floor,
            }
        )
    sde_stats = {
        "mean_x_T": sde["x_T"].mean(axis=0),
        "cov_x_T": np.atleast_2d(np.cov(sde["x_T"], rowvar=False)),
        "sigma": np.atleast_2d(np.asarray(sigma, dtype=float)),
    }
    return LadderReport(asdict(config), int(root_seed), rows, sde_stats, seeds)


def ladder_checks(report: LadderReport) -> dict:
    """Trend checks along the ladder: Z-vanishing and KS monotone up to the noise floor."""
    rows = report.rows
    z = [r["Z_sup_mean"] for r in rows]
    floor = rows[0]["noise_floor"]
    ks = np.array([r["ks"] for r in rows])  # (eps, time, coord)
    ks_steps = ks[1:] - ks[:-1]
    b0 = [r["B0"] for r in rows]
    b1 = [r["B1"] for r in rows]
    return {
        "Z_strictly_decreasing": all(b < a for a, b in zip(z, z[1:])),
        "ks_nonincreasing_up_to_floor": bool(np.all(ks_steps <= floor)),
        "ks_final_max": float(ks[-1].max()),
        "bounds_ok": all(r["bounds_ok"] for r in rows),
        "bounds_shrink": all(b < a for a, b in zip(b0, b0[1:])) and all(b < a for a, b in zip(b1, b1[1:])),
        "oracle_max": max(r["oracle_max"] for r in rows),
        "noise_floor": floor,
    }


def make_benchmark_drift(system: FlowSystem, mean_sin: float):
    """Analytic F for the benchmark coupling given E sin(y1/10)."""
    averaged = getattr(system.f, "averaged", None)
    if averaged is None:
        raise ConfigError("system coupling has no analytic average")
    return averaged(mean_sin)

