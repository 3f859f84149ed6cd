"""Monte Carlo engine: Euler-Maruyama integration of the polar SDE,
first-exit and level-crossing sampling, random Poincare chains with
killing, linear first-passage validation, and the martingale sup bound
diagnostic.

Determinism contract: every path owns a counter-based stream keyed by
(master_seed, path_index, context); each step consumes exactly k Gaussian
draws (k = noise dimension), so samples are identical for any worker
count, batching, or scheduling.  Exit locations are refined by linear
interpolation between the bracketing steps; there is no Brownian-bridge
correction for the nonlinear exit detection in this version (the O(sqrt(dt))
first-passage bias is controlled by the dt-halving acceptance gate).  The
linear validator does use the exact per-step bridge crossing probability,
since its job is to reproduce a closed-form law to Monte Carlo accuracy.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence

import numpy as np

from . import rng
from .models import PolarModel, make_model

SCHEME = "euler-maruyama"

# stream contexts keep independent uses of one master seed disjoint
CTX_PATHS = 0
CTX_KERNEL_KS = 1
CTX_KERNEL_KU = 2
CTX_BERNSTEIN = 3
CTX_LINEAR = 4


class DomainEscape(RuntimeError):
    pass


@dataclass(frozen=True)
class SimConfig:
    sigma: float
    dt: float = 1e-3
    master_seed: int = 0
    path_budget: int = 10_000
    max_phase: float = 10_000.0
    delta: float = 0.1
    refine: bool = True
    exit_level: float = 1.0         # detect r >= exit_level (offset option)

    def validate(self, model: PolarModel) -> None:
        if self.sigma <= 0:
            raise ValueError("sigma must be positive")
        cap = min(model.T_plus, model.T_minus) / 200.0
        if self.dt > cap:
            raise ValueError(f"dt={self.dt} exceeds resolution floor {cap}")


@dataclass
class ExitSample:
    path_index: int
    phi_tau: float
    winding: int
    fraction: float
    tau_time: float
    phi_tau_minus: float            # nan if the level was never crossed
    censored: bool

    @classmethod
    def csv_header(cls) -> str:
        return "path_index,phi_tau,winding,fraction,phi_tau_minus,tau_time,censored"

    def csv_row(self) -> str:
        return (f"{self.path_index},{self.phi_tau:.17g},{self.winding},"
                f"{self.fraction:.17g},{self.phi_tau_minus:.17g},"
                f"{self.tau_time:.17g},{int(self.censored)}")


@dataclass
class ChainRecord:
    states: List[float]
    killed_at: Optional[int]
    cause: Optional[str]            # "exit" | "floor" | "level"


@dataclass
class ExitBatch:
    samples: List[ExitSample]
    summary: dict

    def to_csv(self, path: str) -> None:
        with open(path, "w") as f:
            f.write(ExitSample.csv_header() + "\n")
            for s in self.samples:
                f.write(s.csv_row() + "\n")


# ---------------------------------------------------------------------------
# vectorized core


def _draw_normals(keys: np.ndarray, counters: np.ndarray, k: int) -> np.ndarray:
    """(n, k) Gaussian increments; advances counters by k in place."""
    ctr = counters[:, None] + np.arange(k, dtype=np.uint64)[None, :]
    z = rng.normals(keys[:, None], ctr)
    counters += np.uint64(k)
    return z


def _draw_normals_at(keys: np.ndarray, ctrs: np.ndarray, sel: np.ndarray,
                     k: int) -> np.ndarray:
    """Draws for a fancy-indexed subset; counter advance is written back
    explicitly (fancy indexing yields copies)."""
    ctr = ctrs[sel][:, None] + np.arange(k, dtype=np.uint64)[None, :]
    z = rng.normals(keys[sel][:, None], ctr)
    ctrs[sel] += np.uint64(k)
    return z


def _exit_block(model: PolarModel, config: SimConfig, r0: float,
                path_indices: np.ndarray, context: int = CTX_PATHS,
                phi0: float = 0.0) -> List[ExitSample]:
    """Simulate one block of first-exit paths, vectorized across the block."""
    n = len(path_indices)
    keys = rng.stream_keys(config.master_seed, path_indices, context)
    ctrs = np.zeros(n, dtype=np.uint64)

    r = np.full(n, float(r0))
    phi = np.full(n, float(phi0))
    t = np.zeros(n)
    tau_minus = np.full(n, np.nan)
    level = 1.0 - config.delta

    out: dict[int, ExitSample] = {}
    idx = np.asarray(path_indices, dtype=np.int64)

    sdt = math.sqrt(config.dt)
    sig = config.sigma
    dt = config.dt
    k = model.k
    backsteps = 0
    total_steps = 0
    step = model.vector_step

    while n > 0:
        z = _draw_normals(keys, ctrs, k)
        if step is not None:
            r_new, phi_new = step(r, phi, z, sig, dt, sdt)
        else:
            gr = model.g_r(r, phi)
            gp = model.g_phi(r, phi)
            r_new = r + model.f_r(r, phi) * dt + sig * sdt * np.einsum("ij,ij->i", gr, z)
            phi_new = phi + model.f_phi(r, phi) * dt + sig * sdt * np.einsum("ij,ij->i", gp, z)
        t_new = t + dt
        total_steps += n
        backsteps += int(np.count_nonzero(phi_new <= phi))

        # first crossing of the level 1 - delta
        fresh = np.isnan(tau_minus) & (r_new >= level)
        if fresh.any():
            frac = (level - r[fresh]) / (r_new[fresh] - r[fresh])
            tau_minus[fresh] = phi[fresh] + frac * (phi_new[fresh] - phi[fresh]) \
                if config.refine else phi_new[fresh]

        exited = r_new >= config.exit_level
        censored = (~exited) & (phi_new >= config.max_phase)
        escaped = (~exited) & (np.abs(r_new) > model.L)
        if escaped.any():
            bad = idx[escaped][0]
            raise DomainEscape(f"path {bad} left |r| <= {model.L}")

        done = exited | censored
        if done.any():
            for j in np.nonzero(done)[0]:
                if exited[j] and config.refine:
                    w = (config.exit_level - r[j]) / (r_new[j] - r[j])
                    phi_tau = phi[j] + w * (phi_new[j] - phi[j])
                    tau_t = t[j] + w * dt
                else:
                    phi_tau = phi_new[j]
                    tau_t = t_new[j]
                winding = int(math.floor(phi_tau))
                out[int(idx[j])] = ExitSample(
                    path_index=int(idx[j]), phi_tau=float(phi_tau),
                    winding=winding, fraction=float(phi_tau - winding),
                    tau_time=float(tau_t),
                    phi_tau_minus=float(tau_minus[j]),
                    censored=bool(censored[j]))
            keep = ~done
            r, phi, t = r_new[keep], phi_new[keep], t_new[keep]
            keys, ctrs = keys[keep], ctrs[keep]
            tau_minus, idx = tau_minus[keep], idx[keep]
            n = len(idx)
        else:
            r, phi, t = r_new, phi_new, t_new

    samples = [out[int(i)] for i in sorted(out)]
    # attach step statistics through a side channel on the list
    samples_stats = {"backstep_fraction": backsteps / max(total_steps, 1),
                     "total_steps": total_steps}
    return samples, samples_stats


_WORKER = {}


def _init_worker(model_name, model_params, config, r0, context, phi0):
    _WORKER["model"] = make_model(model_name, **model_params)
    _WORKER["args"] = (config, r0, context, phi0)


def _run_chunk(chunk: np.ndarray):
    config, r0, context, phi0 = _WORKER["args"]
    return _exit_block(_WORKER["model"], config, r0, chunk, context, phi0)


def batch_sample(model: PolarModel, config: SimConfig, r0: float, n_paths: int,
                 workers: int = 1, context: int = CTX_PATHS,
                 phi0: float = 0.0, block: int = 16384) -> ExitBatch:
    """First-exit samples for paths 0..n_paths-1.

    The result multiset is identical for any worker count: per-path streams
    depend only on (master_seed, path_index, context).  Parallel execution
    requires the model to be registry-reconstructible.
    """
    config.validate(model)
    indices = np.arange(n_paths, dtype=np.int64)
    chunks = [indices[i:i + block] for i in range(0, n_paths, block)]

    results = []
    stats = []
    if workers > 1 and model.name and len(chunks) > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(
                max_workers=workers, initializer=_init_worker,
                initargs=(model.name, model.params, config, r0, context, phi0)) as ex:
            for res, st in ex.map(_run_chunk, chunks):
                results.extend(res)
                stats.append(st)
    else:
        for ch in chunks:
            res, st = _exit_block(model, config, r0, ch, context, phi0)
            results.extend(res)
            stats.append(st)

    results.sort(key=lambda s: s.path_index)
    exits = [s for s in results if not s.censored]
    windings = np.array([s.winding for s in exits], dtype=float)
    summary = {
        "n_paths": n_paths,
        "n_exits": len(exits),
        "censored_fraction": 1.0 - len(exits) / max(n_paths, 1),
        "mean_winding": float(windings.mean()) if len(exits) else float("nan"),
        "mean_phi_tau": float(np.mean([s.phi_tau for s in exits])) if exits else float("nan"),
        "backstep_fraction": float(np.mean([s["backstep_fraction"] for s in stats])),
        "scheme": SCHEME,
        "rng": rng.RNG_VARIANT,
    }
    return ExitBatch(samples=results, summary=summary)


def sample_exit(model: PolarModel, config: SimConfig, r0: float,
                seed: int, context: int = CTX_PATHS, phi0: float = 0.0) -> ExitSample:
    """Single first-exit sample; ``seed`` is the path index within the
    master-seed stream family."""
    config.validate(model)
    res, _ = _exit_block(model, config, r0, np.array([seed], dtype=np.int64),
                         context, phi0)
    return res[0]


# ---------------------------------------------------------------------------
# paths and chains


def integrate_path(model: PolarModel, config: SimConfig, seed: int, r0: float,
                   n_steps: int, phi0: float = 0.0,
                   context: int = CTX_PATHS) -> dict:
    """Plain Euler-Maruyama path record (no killing).  Draw accounting is
    identical to the exit sampler, so trajectories coincide step for step
    with chain/exit runs of the same (master_seed, seed, context)."""
    config.validate(model)
    keys = rng.stream_keys(config.master_seed, np.array([seed]), context)
    ctrs = np.zeros(1, dtype=np.uint64)
    sdt = math.sqrt(config.dt)

    rs = np.empty(n_steps + 1)
    phis = np.empty(n_steps + 1)
    rs[0], phis[0] = r0, phi0
    r = np.array([float(r0)])
    phi = np.array([float(phi0)])
    for i in range(n_steps):
        z = _draw_normals(keys, ctrs, model.k)
        gr = model.g_r(r, phi)
        gp = model.g_phi(r, phi)
        r = r + model.f_r(r, phi) * config.dt + config.sigma * sdt * np.einsum("ij,ij->i", gr, z)
        phi = phi + model.f_phi(r, phi) * config.dt + config.sigma * sdt * np.einsum("ij,ij->i", gp, z)
        if abs(float(r[0])) > model.L:
            raise DomainEscape(f"path left |r| <= {model.L} at step {i}")
        rs[i + 1], phis[i + 1] = float(r[0]), float(phi[0])
    return {"r": rs, "phi": phis, "t": np.arange(n_steps + 1) * config.dt}


def sample_poincare_chain(model: PolarModel, config: SimConfig, r0: float,
                          variant: str, seed: int, n_steps: int = 1000,
                          context: int = CTX_PATHS) -> ChainRecord:
    """Radial values at successive integer phases, killed per variant.

    Ks: state space [-L_chain, 1-delta], killed at the level 1-delta or at
    the lower edge.  Ku: recentred rho = 1 - r on (0, 2 delta), killed at
    the unstable orbit (rho <= 0) or at rho >= 2 delta; recorded states are
    the recentred values.
    """
    config.validate(model)
    keys = rng.stream_keys(config.master_seed, np.array([seed]), context)
    ctrs = np.zeros(1, dtype=np.uint64)
    sdt = math.sqrt(config.dt)
    delta = config.delta

    if variant == "Ks":
        lo, hi = -1.6, 1.0 - delta
        lo_cause, hi_cause = "floor", "level"
    elif variant == "Ku":
        lo, hi = 1.0 - 2.0 * delta, 1.0
        lo_cause, hi_cause = "level", "exit"
    else:
        raise ValueError("variant must be 'Ks' or 'Ku'")

    def record(rv):
        return 1.0 - rv if variant == "Ku" else rv

    r = float(r0) if variant == "Ks" else 1.0 - float(r0)
    phi, next_phase = 0.0, 1.0
    states = [record(r)]
    killed_at, cause = None, None
    ra = np.array([r])
    pa = np.array([phi])
    step = 0
    max_steps = int(n_steps * (model.T_plus / config.dt) * 4 + 1000)
    while len(states) <= n_steps and step < max_steps:
        z = _draw_normals(keys, ctrs, model.k)
        gr = model.g_r(ra, pa)
        gp = model.g_phi(ra, pa)
        r_new = float(ra[0] + model.f_r(ra, pa)[0] * config.dt
                      + config.sigma * sdt * float(np.dot(gr[0], z[0])))
        phi_new = float(pa[0] + model.f_phi(ra, pa)[0] * config.dt
                        + config.sigma * sdt * float(np.dot(gp[0], z[0])))
        step += 1
        if r_new >= hi:
            killed_at, cause = len(states), hi_cause
            break
        if r_new <= lo:
            killed_at, cause = len(states), lo_cause
            break
        if phi_new >= next_phase:
            w = (next_phase - pa[0]) / (phi_new - pa[0])
            r_at = float(ra[0] + w * (r_new - ra[0]))
            states.append(record(r_at))
            next_phase += 1.0
        ra[0], pa[0] = r_new, phi_new
    return ChainRecord(states=states, killed_at=killed_at, cause=cause)


def poincare_step_batch(model: PolarModel, config: SimConfig, r0s: np.ndarray,
                        path_indices: np.ndarray, variant: str,
                        context: int) -> tuple[np.ndarray, np.ndarray]:
    """One chain step for many starting points at once (kernel estimation).

    Returns (landing, cause) where landing is the radial value at phi = 1
    (nan when killed) and cause is 0 = survived, 1 = killed at the upper
    boundary, 2 = killed at the lower boundary.  Ku works in recentred
    coordinates rho = 1 - r.
    """
    config.validate(model)
    n = len(r0s)
    keys = rng.stream_keys(config.master_seed, path_indices, context)
    ctrs = np.zeros(n, dtype=np.uint64)
    sdt = math.sqrt(config.dt)
    delta = config.delta

    if variant == "Ks":
        lo, hi = -1.6, 1.0 - delta
        r = np.asarray(r0s, dtype=float).copy()
    elif variant == "Ku":
        lo, hi = 1.0 - 2.0 * delta, 1.0
        r = 1.0 - np.asarray(r0s, dtype=float)
    else:
        raise ValueError("variant must be 'Ks' or 'Ku'")

    phi = np.zeros(n)
    landing = np.full(n, np.nan)
    cause = np.zeros(n, dtype=np.int8)
    alive = np.arange(n)

    while len(alive) > 0:
        z = _draw_normals_at(keys, ctrs, alive, model.k)
        ra, pa = r[alive], phi[alive]
        if model.vector_step is not None:
            r_new, phi_new = model.vector_step(ra, pa, z, config.sigma, config.dt, sdt)
        else:
            gr = model.g_r(ra, pa)
            gp = model.g_phi(ra, pa)
            r_new = ra + model.f_r(ra, pa) * config.dt \
                + config.sigma * sdt * np.einsum("ij,ij->i", gr, z)
            phi_new = pa + model.f_phi(ra, pa) * config.dt \
                + config.sigma * sdt * np.einsum("ij,ij->i", gp, z)

        hit_hi = r_new >= hi
        hit_lo = r_new <= lo
        reached = (~hit_hi) & (~hit_lo) & (phi_new >= 1.0)
        if reached.any():
            w = (1.0 - pa[reached]) / (phi_new[reached] - pa[reached])
            landing[alive[reached]] = ra[reached] + w * (r_new[reached] - ra[reached])
        cause[alive[hit_hi]] = 1
        cause[alive[hit_lo]] = 2

        done = hit_hi | hit_lo | reached
        r[alive] = r_new
        phi[alive] = phi_new
        alive = alive[~done]

    if variant == "Ku":
        landing = 1.0 - landing
    return landing, cause


# ---------------------------------------------------------------------------
# linear first-passage validator


def linear_hitting_mc(lam: float, g0: Callable[[float], float], r0: float,
                      sigma: float, dt: float, checkpoints: Sequence[float],
                      n_paths: int, master_seed: int, bridge: bool = True,
                      context: int = CTX_LINEAR, block: int = 20000) -> dict:
    """Empirical first-hitting CDF of 0 for dr = lam r dt + sigma g0(t) dW,
    started at r0 > 0.

    Each step consumes one Gaussian and one uniform (the uniform drives the
    exact Brownian-bridge crossing test between grid points; it is drawn
    either way so the stream layout does not depend on the bridge flag).
    """
    t_max = float(max(checkpoints))
    n_steps = int(round(t_max / dt))
    cps = np.asarray(checkpoints, dtype=float)
    hits = np.zeros(len(cps), dtype=np.int64)

    for start in range(0, n_paths, block):
        idx = np.arange(start, min(start + block, n_paths), dtype=np.int64)
        keys = rng.stream_keys(master_seed, idx, context)
        ctrs = np.zeros(len(idx), dtype=np.uint64)
        r = np.full(len(idx), float(r0))
        hit_time = np.full(len(idx), np.inf)
        alive = np.ones(len(idx), dtype=bool)
        for i in range(n_steps):
            t0 = i * dt
            gval = float(g0(t0))
            if not alive.any():
                break
            z = rng.normals(keys, ctrs)
            ctrs += np.uint64(1)
            u = rng.uniforms(keys, ctrs)
            ctrs += np.uint64(1)
            r_new = r + lam * r * dt + sigma * gval * math.sqrt(dt) * z
            crossed = alive & (r_new <= 0.0)
            if bridge:
                both_pos = alive & (r_new > 0.0) & (r > 0.0)
                p_br = np.exp(-2.0 * r[both_pos] * r_new[both_pos]
                              / (sigma**2 * gval**2 * dt))
                br = np.zeros_like(alive)
                br[both_pos] = u[both_pos] < p_br
                crossed = crossed | br
            if crossed.any():
                w = np.where(r_new[crossed] <= 0,
                             r[crossed] / np.maximum(r[crossed] - r_new[crossed], 1e-300),
                             1.0)
                hit_time[crossed] = t0 + w * dt
                alive[crossed] = False
            r = r_new
        hits += (hit_time[None, :] <= cps[:, None]).sum(axis=1)

    cdf = hits / n_paths
    se = np.sqrt(np.maximum(cdf * (1 - cdf), 1e-12) / n_paths)
    return {"checkpoints": cps, "cdf": cdf, "se": se, "n_paths": n_paths, "dt": dt,
            "bridge": bridge}


# ---------------------------------------------------------------------------
# martingale sup bound diagnostic


class BoundViolated(RuntimeError):
    pass


def bernstein_diagnostic(model: Optional[PolarModel], config: SimConfig,
                         bound_fn: Callable[[float], float],
                         L_values: Sequence[float], t: float,
                         n_paths: int = 10000, r0: float = -1.0,
                         component: str = "phi",
                         context: int = CTX_BERNSTEIN) -> dict:
    """Empirical check of P(sup_{s<=t} M_s > L) <= exp(-L^2 / (2 V(t))) for
    M_t = int g dW along simulated paths, with g g^T <= G(s)^2 and
    V(t) = int_0^t G(s)^2 ds.

    model=None runs standard Brownian motion (g = 1).  Raises BoundViolated
    if any empirical frequency exceeds its bound by more than 3 standard
    errors.
    """
    from scipy.integrate import quad

    dt = config.dt
    n_steps = int(round(t / dt))
    sdt = math.sqrt(dt)
    V_t = quad(lambda s: bound_fn(s) ** 2, 0.0, t, limit=200)[0]

    sup_M = np.full(n_paths, -np.inf)
    block = 20000
    for start in range(0, n_paths, block):
        idx = np.arange(start, min(start + block, n_paths), dtype=np.int64)
        keys = rng.stream_keys(config.master_seed, idx, context)
        ctrs = np.zeros(len(idx), dtype=np.uint64)
        nloc = len(idx)
        M = np.zeros(nloc)
        smax = np.zeros(nloc)
        if model is None:
            for i in range(n_steps):
                z = rng.normals(keys, ctrs)
                ctrs += np.uint64(1)
                M = M + sdt * z
                smax = np.maximum(smax, M)
        else:
            r = np.full(nloc, float(r0))
            phi = np.zeros(nloc)
            for i in range(n_steps):
                z = _draw_normals(keys, ctrs, model.k)
                gr = model.g_r(r, phi)
                gp = model.g_phi(r, phi)
                gsel = gp if component == "phi" else gr
                dM = sdt * np.einsum("ij,ij->i", gsel, z)
                r = r + model.f_r(r, phi) * dt \
                    + config.sigma * sdt * np.einsum("ij,ij->i", gr, z)
                phi = phi + model.f_phi(r, phi) * dt \
                    + config.sigma * sdt * np.einsum("ij,ij->i", gp, z)
                M = M + dM
                smax = np.maximum(smax, M)
        sup_M[idx] = smax

    rows = []
    worst = 0.0
    for L in L_values:
        emp = float(np.mean(sup_M > L))
        se = math.sqrt(max(emp * (1 - emp), 1.0 / n_paths) / n_paths)
        bound = math.exp(-L * L / (2.0 * V_t))
        rows.append({"L": float(L), "empirical": emp, "se": se, "bound": bound})
        worst = max(worst, emp - bound - 3.0 * se)
    if worst > 0:
        raise BoundViolated(f"sup-exceedance beats the bound by {worst:.3g}")
    return {"t": t, "V_t": V_t, "rows": rows, "n_paths": n_paths}


# ---------------------------------------------------------------------------
# output


def write_meta(path: str, model: PolarModel, config: SimConfig, extra: dict = None) -> None:
    meta = {
        "model": model.name,
        "model_params": model.params,
        "sigma": config.sigma,
        "dt": config.dt,
        "master_seed": config.master_seed,
        "delta": config.delta,
        "max_phase": config.max_phase,
        "scheme": SCHEME,
        "rng": rng.RNG_VARIANT,
    }
    if extra:
        meta.update(extra)
    with open(path, "w") as f:
        json.dump(meta, f, indent=2, sort_keys=True)
        f.write("\n")
