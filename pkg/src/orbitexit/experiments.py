"""End-to-end experiments: cycling histograms, noise sweeps, kernel
spectra, minimizer runs, linear validation, and the martingale diagnostic.

Every experiment writes analysis-ready CSV/JSON into its output directory
with full provenance (config hash, seeds, versions) and returns a report
dict.  Assertion-bearing experiments raise typed errors instead of
silently passing.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from . import kernels, ldp, rng, sim, theory
from .config import ExperimentConfig
from .models import PolarModel, make_model


class InsufficientExits(RuntimeError):
    pass


class InsufficientData(RuntimeError):
    pass


class ToleranceExceeded(RuntimeError):
    pass


# in-process memo: the minimiser depends only on (model identity, delta)
_HET_CACHE: dict = {}


def heteroclinic_for(model: PolarModel, delta: float) -> ldp.HeteroclinicResult:
    key = (model.name, tuple(sorted(model.params.items())), delta)
    if key not in _HET_CACHE:
        _HET_CACHE[key] = ldp.find_heteroclinic(model, delta=delta)
    return _HET_CACHE[key]


def build_model(cfg: ExperimentConfig) -> PolarModel:
    return make_model(cfg.model_name, **cfg.model_params)


def provenance(cfg: ExperimentConfig, **extra) -> dict:
    import scipy

    out = {
        "config_hash": cfg.config_hash(),
        "master_seed": cfg.seed,
        "package_version": __version__,
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "rng": rng.RNG_VARIANT,
        "scheme": sim.SCHEME,
    }
    out.update(extra)
    return out


def _write_json(path: str, obj: dict) -> None:
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    with open(path, "w") as f:
        json.dump(obj, f, indent=2, sort_keys=True, default=float)
        f.write("\n")


# ---------------------------------------------------------------------------
# histogram helpers


def wrapped_histogram(values: np.ndarray, bin_width: float):
    n_bins = int(round(1.0 / bin_width))
    edges = np.arange(n_bins + 1) / n_bins
    counts, _ = np.histogram(np.asarray(values) % 1.0, bins=edges)
    mass = counts / max(len(values), 1)
    return edges, mass


def overlay_mass(ctx: theory.TheoryContext, sigma: float, edges: np.ndarray) -> np.ndarray:
    """Theory overlay on the same bins: Delta Q(|log sigma|/lamT - t),
    normalised to unit mass for shape comparison."""
    centers = 0.5 * (edges[:-1] + edges[1:])
    delta_bin = edges[1] - edges[0]
    raw = theory.wrapped_profile(ctx, sigma, centers, delta_bin)
    return raw / raw.sum()


def circular_shift_mass(mass: np.ndarray, shift: float) -> np.ndarray:
    """Shift a circular binned density by a fraction of the period using
    linear interpolation between bins."""
    n = len(mass)
    x = shift * n
    k = int(np.floor(x))
    frac = x - k
    rolled = np.roll(mass, k)
    return (1 - frac) * rolled + frac * np.roll(mass, k + 1)


def ks_binned(mass_a: np.ndarray, mass_b: np.ndarray) -> float:
    return float(np.max(np.abs(np.cumsum(mass_a - mass_b))))


def align_overlay(hist: np.ndarray, overlay: np.ndarray, max_shift: float,
                  n_scan: int = 480):
    """Best circular phase shift of the overlay within |shift| <= max_shift,
    fitted by minimising the binned KS distance."""
    shifts = np.linspace(-max_shift, max_shift, n_scan + 1)
    best = (np.inf, 0.0)
    for s in shifts:
        d = ks_binned(hist, circular_shift_mass(overlay, s))
        if d < best[0]:
            best = (d, float(s))
    return best[1], best[0]


def fit_winding_decay(windings: np.ndarray, n_min: int, n_max: int = None):
    """Weighted log-linear fit of the winding tail: counts_n ~ C lambda0^n.

    Returns (lambda0, se) from the Poisson-weighted regression over
    windings in [n_min, n_max]."""
    windings = np.asarray(windings, dtype=int)
    if n_max is None:
        n_max = int(np.quantile(windings, 0.998))
    ns = np.arange(n_min, n_max + 1)
    counts = np.array([(windings == n).sum() for n in ns], dtype=float)
    keep = counts >= 5
    if keep.sum() < 3:
        raise InsufficientData("not enough tail mass for a winding-decay fit")
    x = ns[keep].astype(float)
    y = np.log(counts[keep])
    w = counts[keep]                      # Poisson: Var(log c) ~ 1/c
    W = np.sum(w)
    xb = np.sum(w * x) / W
    yb = np.sum(w * y) / W
    sxx = np.sum(w * (x - xb) ** 2)
    slope = np.sum(w * (x - xb) * (y - yb)) / sxx
    se = math.sqrt(1.0 / sxx)
    return math.exp(slope), math.exp(slope) * se


def survival_ratio(windings: np.ndarray, lo: int, hi: int):
    """Mean per-period survival over the window [lo, hi): the geometric
    ratio #\\{W > n\\}/#\\{W >= n\\} pooled over the window, with a binomial
    standard error."""
    windings = np.asarray(windings, dtype=int)
    at_least = np.array([(windings >= n).sum() for n in range(lo, hi + 1)])
    surv = at_least[1:].sum()
    base = at_least[:-1].sum()
    if base < 20:
        raise InsufficientData("window too sparse for a survival ratio")
    p = surv / base
    se = math.sqrt(p * (1 - p) / base)
    return p, se


# ---------------------------------------------------------------------------
# cycling experiment


@dataclass
class CyclingReport:
    sigma: float
    n_exits: int
    censored_fraction: float
    edges: np.ndarray
    hist: np.ndarray
    overlay: np.ndarray
    ks_raw: float
    ks_aligned: float
    shift: float
    peak_location: float
    lambda0_fit: float
    lambda0_se: float
    C0_fit: float
    s_star: float
    j_proxy: np.ndarray = None
    low_confidence: bool = False
    summary: dict = field(default_factory=dict)

    def report_dict(self) -> dict:
        return {
            "sigma": self.sigma,
            "n_exits": self.n_exits,
            "censored_fraction": self.censored_fraction,
            "ks_raw": self.ks_raw,
            "ks_aligned": self.ks_aligned,
            "shift": self.shift,
            "peak_location": self.peak_location,
            "lambda0_fit": self.lambda0_fit,
            "lambda0_se": self.lambda0_se,
            "C0_fit": self.C0_fit,
            "s_star": self.s_star,
            "low_confidence": self.low_confidence,
            "summary": self.summary,
        }


def auto_max_phase(model: PolarModel, cfg: ExperimentConfig, sigma: float) -> float:
    """Censoring cap: 50/|log lambda0| from a pilot survival estimate when
    available, else 1e4 phases."""
    if cfg.max_phase:
        return cfg.max_phase
    pilot = sim.SimConfig(sigma=sigma, dt=cfg.dt, master_seed=cfg.seed + 999,
                          max_phase=10000.0, delta=cfg.delta)
    batch = sim.batch_sample(model, pilot, cfg.r0, n_paths=200)
    mw = batch.summary["mean_winding"]
    if not math.isfinite(mw):
        return 10000.0
    lam0_est = mw / (1.0 + mw)
    return min(10000.0, max(50.0, 50.0 / abs(math.log(lam0_est))))


def sample_exits(model: PolarModel, cfg: ExperimentConfig, sigma: float,
                 seed_offset: int = 0) -> sim.ExitBatch:
    mp = auto_max_phase(model, cfg, sigma)
    scfg = sim.SimConfig(sigma=sigma, dt=cfg.dt, master_seed=cfg.seed + seed_offset,
                         max_phase=mp, delta=cfg.delta)
    return sim.batch_sample(model, scfg, cfg.r0, cfg.paths, workers=cfg.workers)


def cycling_from_batch(model: PolarModel, cfg: ExperimentConfig, sigma: float,
                       batch: sim.ExitBatch) -> CyclingReport:
    het_s = cfg.s_star
    if het_s is None:
        het_s = heteroclinic_for(model, cfg.delta).s_star
    ctx = theory.TheoryContext.from_model(model, s_star=het_s, delta=cfg.delta)
    table = theory.HPerTable(ctx)

    exits = [s for s in batch.samples if not s.censored]
    censored_fraction = batch.summary["censored_fraction"]
    if censored_fraction > 0.10:
        raise InsufficientExits(
            f"censoring {censored_fraction:.1%} exceeds 10% at sigma={sigma}")

    phi_tau = np.array([s.phi_tau for s in exits])
    tvals = theory.theta(ctx, phi_tau, h=table) / ctx.lamT
    edges, hist = wrapped_histogram(tvals, cfg.bin_width)
    overlay = overlay_mass(ctx, sigma, edges)

    ks_raw = ks_binned(hist, overlay)
    shift, ks_aligned = align_overlay(hist, overlay, max_shift=3.0 * cfg.delta)

    centers = 0.5 * (edges[:-1] + edges[1:])
    fine = np.linspace(0.0, 1.0, 2048, endpoint=False)
    prof = theory.wrapped_profile(ctx, sigma, fine, cfg.bin_width)
    peak = float((fine[np.argmax(prof)] + shift) % 1.0)

    windings = np.array([s.winding for s in exits])
    n_min = int(math.ceil(5.0 * abs(math.log(sigma)) / ctx.lamT))
    try:
        lam0_fit, lam0_se = fit_winding_decay(windings, n_min)
    except InsufficientData:
        lam0_fit, lam0_se = float("nan"), float("nan")

    # C0 from normalisation of the leading-order unwrapped density
    C0 = float("nan")
    if math.isfinite(lam0_fit) and 0 < lam0_fit < 1:
        tgrid = np.arange(0.0, 400.0, cfg.bin_width)
        dens = theory.main_theorem_density(ctx, sigma, tgrid, lam0_fit, 1.0,
                                           cfg.bin_width)
        C0 = 1.0 / float(dens.sum())

    tau_minus = np.array([s.phi_tau_minus for s in batch.samples
                          if not math.isnan(s.phi_tau_minus)])
    j_proxy = None
    if len(tau_minus) > 100:
        _, mass = wrapped_histogram(tau_minus, 0.05)
        with np.errstate(divide="ignore"):
            j = -sigma**2 * np.log(np.maximum(mass, 1e-300))
        j_proxy = j - j.min()

    low_conf = len(exits) < 1000
    return CyclingReport(
        sigma=sigma, n_exits=len(exits), censored_fraction=censored_fraction,
        edges=edges, hist=hist, overlay=overlay, ks_raw=ks_raw,
        ks_aligned=ks_aligned, shift=shift, peak_location=peak,
        lambda0_fit=lam0_fit, lambda0_se=lam0_se, C0_fit=C0, s_star=het_s,
        j_proxy=j_proxy, low_confidence=low_conf, summary=batch.summary)


def run_cycling(cfg: ExperimentConfig, write: bool = True) -> CyclingReport:
    model = build_model(cfg)
    batch = sample_exits(model, cfg, cfg.sigma)
    report = cycling_from_batch(model, cfg, cfg.sigma, batch)
    if write:
        out = cfg.out_dir
        os.makedirs(out, exist_ok=True)
        batch.to_csv(os.path.join(out, "samples.csv"))
        with open(os.path.join(out, "histogram.csv"), "w") as f:
            f.write("bin_left,mass,theory_overlay\n")
            for i in range(len(report.hist)):
                f.write(f"{report.edges[i]:.17g},{report.hist[i]:.17g},"
                        f"{report.overlay[i]:.17g}\n")
        _write_json(os.path.join(out, "report.json"), report.report_dict())
        scfg = sim.SimConfig(sigma=cfg.sigma, dt=cfg.dt, master_seed=cfg.seed,
                             max_phase=cfg.max_phase or 0, delta=cfg.delta)
        sim.write_meta(os.path.join(out, "meta.json"), model, scfg,
                       extra=provenance(cfg))
    return report


# ---------------------------------------------------------------------------
# noise sweep


def run_sigma_sweep(cfg: ExperimentConfig, write: bool = True) -> dict:
    if len(cfg.sigmas) < 3:
        raise InsufficientData("sweep needs at least 3 noise values")
    model = build_model(cfg)
    lamT = model.lambda_plus * model.T_plus

    rows = []
    for i, sigma in enumerate(sorted(cfg.sigmas, reverse=True)):
        batch = sample_exits(model, cfg, sigma, seed_offset=i * 1000003)
        rep = cycling_from_batch(model, cfg, sigma, batch)
        rows.append({"sigma": sigma, "peak": rep.peak_location,
                     "ks_aligned": rep.ks_aligned, "n_exits": rep.n_exits,
                     "lambda0_fit": rep.lambda0_fit})

    # unwrap the peak sequence against the predicted |log sigma| drift
    xs = np.array([abs(math.log(r["sigma"])) / lamT for r in rows])
    wrapped = np.array([r["peak"] for r in rows])
    unwrapped = [wrapped[0]]
    for i in range(1, len(wrapped)):
        prev = unwrapped[-1] + (xs[i] - xs[i - 1])   # expected drift ~ slope 1
        step = wrapped[i] - prev
        unwrapped.append(prev + (step - round(step)))
    ys = np.array(unwrapped)

    A = np.vstack([xs, np.ones_like(xs)]).T
    coef, res_, *_ = np.linalg.lstsq(A, ys, rcond=None)
    slope = float(coef[0])
    resid = ys - A @ coef
    dof = max(len(xs) - 2, 1)
    s2 = float(resid @ resid) / dof
    sxx = float(np.sum((xs - xs.mean()) ** 2))
    slope_se = math.sqrt(s2 / sxx) if sxx > 0 else float("inf")

    report = {
        "rows": rows,
        "slope": slope,
        "slope_se": slope_se,
        "peaks_unwrapped": [float(v) for v in ys],
        "provenance": provenance(cfg),
    }
    if write:
        _write_json(os.path.join(cfg.out_dir, "sweep.json"), report)
    if abs(slope - 1.0) > 0.15:
        raise ToleranceExceeded(
            f"peak drift slope {slope:.3f} outside 1 +- 0.15")
    return report


# ---------------------------------------------------------------------------
# descent profile


def run_descent_profile(cfg: ExperimentConfig, write: bool = True) -> dict:
    model = build_model(cfg)
    sigma = cfg.sigma
    batch = sample_exits(model, cfg, sigma)
    tau_minus = np.array([s.phi_tau_minus for s in batch.samples
                          if not math.isnan(s.phi_tau_minus)])
    if len(tau_minus) < cfg.paths * 0.5:
        raise InsufficientExits("fewer than half the paths reached the level")

    edges, mass = wrapped_histogram(tau_minus, 0.05)
    # +-2 bin circular smoothing for the mode estimate
    kern = np.array([1.0, 2.0, 3.0, 2.0, 1.0])
    kern /= kern.sum()
    smooth = sum(w * np.roll(mass, k) for k, w in zip(range(-2, 3), kern))
    centers = 0.5 * (edges[:-1] + edges[1:])
    mode = float(centers[np.argmax(smooth)])
    flat_ratio = float(smooth.max() / max(smooth.min(), 1e-300))

    with np.errstate(divide="ignore"):
        j = -sigma**2 * np.log(np.maximum(mass, 1e-300))
    j_proxy = j - j.min()

    s_star = cfg.s_star
    if s_star is None:
        try:
            s_star = heteroclinic_for(model, cfg.delta).s_star
        except ldp.NoIntersection:
            s_star = float("nan")

    def circ_dist(a, b):
        d = abs(a - b) % 1.0
        return min(d, 1.0 - d)

    report = {
        "sigma": sigma,
        "n_crossings": int(len(tau_minus)),
        "mode": mode,
        "s_star": s_star,
        "mode_error": circ_dist(mode, s_star) if math.isfinite(s_star) else None,
        "flat_ratio": flat_ratio,
        "bin_left": [float(v) for v in edges[:-1]],
        "mass": [float(v) for v in mass],
        "j_proxy": [float(v) for v in j_proxy],
        "provenance": provenance(cfg),
    }
    if write:
        _write_json(os.path.join(cfg.out_dir, "descent.json"), report)
    return report


# ---------------------------------------------------------------------------
# linear validation


def run_linear_validation(cfg: ExperimentConfig, write: bool = True,
                          n_checkpoints: int = 20) -> dict:
    model = build_model(cfg)
    lam = model.lambda_plus
    d_rr = theory.TheoryContext.from_model(model).d_rr
    g0 = lambda t: math.sqrt(float(d_rr(t / model.T_plus)))
    sigma, r0 = cfg.lin_sigma, cfg.lin_r0
    checkpoints = np.linspace(cfg.lin_tmax / n_checkpoints, cfg.lin_tmax,
                              n_checkpoints)

    mc = sim.linear_hitting_mc(lam, g0, r0, sigma, cfg.dt, checkpoints,
                               cfg.paths, cfg.seed, bridge=True)
    cdf_theory = np.array([theory.reflection_cdf(r0, sigma, lam, d_rr, t,
                                                 model.T_plus)
                           for t in checkpoints])
    dev = np.abs(mc["cdf"] - cdf_theory) / np.maximum(mc["se"], 1e-12)
    sup_dev = float(dev.max())

    # dt-halving stability
    mc2 = sim.linear_hitting_mc(lam, g0, r0, sigma, cfg.dt / 2, checkpoints,
                                cfg.paths, cfg.seed + 1, bridge=True)
    shift = np.abs(mc2["cdf"] - mc["cdf"]) / np.maximum(
        np.sqrt(mc["se"] ** 2 + mc2["se"] ** 2), 1e-12)
    dt_shift = float(shift.max())

    report = {
        "sigma": sigma, "r0": r0, "dt": cfg.dt, "n_paths": cfg.paths,
        "checkpoints": [float(t) for t in checkpoints],
        "cdf_mc": [float(v) for v in mc["cdf"]],
        "cdf_theory": [float(v) for v in cdf_theory],
        "se": [float(v) for v in mc["se"]],
        "sup_deviation_se": sup_dev,
        "dt_halving_shift_se": dt_shift,
        "provenance": provenance(cfg),
    }
    if write:
        _write_json(os.path.join(cfg.out_dir, "linear_validation.json"), report)
    if sup_dev >= 3.0:
        raise ToleranceExceeded(
            f"MC/theory CDF deviation {sup_dev:.2f} standard errors >= 3; "
            "rerun at dt/2 to check integrator bias")
    return report


# ---------------------------------------------------------------------------
# kernels


def run_kernel(cfg: ExperimentConfig, write: bool = True) -> dict:
    model = build_model(cfg)
    scfg = sim.SimConfig(sigma=cfg.sigma, dt=cfg.dt, master_seed=cfg.seed,
                         delta=cfg.delta)
    variant = cfg.kernel_variant
    grid = kernels.default_grid(variant, cfg.delta, cfg.grid_cells)
    K = kernels.estimate_kernel(model, scfg, grid, variant, cfg.samples_per_row)
    spec = kernels.principal_eigs(K)

    n = K.n_cells
    if variant == "Ks":
        mids = K.midpoints
        A_cells = np.nonzero(np.abs(mids + 1.0) < 0.2)[0]
    else:
        A_cells = np.arange(n // 4, 3 * n // 4)

    sandwich = {}
    for nn in (1, 2, 4):
        lo, up, ok = kernels.eig_sandwich(K, A_cells, nn, lambda0=spec.lambda0)
        sandwich[nn] = {"lower": lo, "upper": up, "holds": ok}
    try:
        gb = kernels.gap_bound(K, A_cells, lambda0=spec.lambda0)
        gap = {"bound": gb.bound, "hypothesis_ok": gb.hypothesis_ok,
               "L": gb.L, "gamma_bar": gb.gamma_bar, "p_kill": gb.p_kill}
    except kernels.ZeroDensity as exc:
        gap = {"error": str(exc)}
    laplace_resid = kernels.laplace_identity(K, A_cells, 0.01)

    report = {
        "variant": variant, "sigma": cfg.sigma,
        "lambda0": spec.lambda0, "lambda1_mod": spec.lambda1_mod,
        "one_minus_lambda0": spec.one_minus_lambda0,
        "residuals": spec.residuals,
        "sandwich": sandwich, "gap_bound": gap,
        "laplace_residual": laplace_resid,
        "provenance": provenance(cfg),
    }
    if write:
        os.makedirs(cfg.out_dir, exist_ok=True)
        K.to_json(os.path.join(cfg.out_dir, f"kernel_{variant}.json"),
                  extra={"sigma": cfg.sigma, "delta": cfg.delta})
        spec.to_json(os.path.join(cfg.out_dir, f"spectral_{variant}.json"))
        _write_json(os.path.join(cfg.out_dir, "kernel_report.json"), report)
    return report


def run_kernel_trend(cfg: ExperimentConfig, write: bool = True) -> dict:
    """Ks principal-eigenvalue trend across a noise sweep: log(1 - lambda0)
    against 1/sigma^2 should fall on a decreasing line."""
    if len(cfg.sigmas) < 3:
        raise InsufficientData("trend needs at least 3 noise values")
    model = build_model(cfg)
    rows = []
    for i, sigma in enumerate(sorted(cfg.sigmas, reverse=True)):
        scfg = sim.SimConfig(sigma=sigma, dt=cfg.dt,
                             master_seed=cfg.seed + i * 7919, delta=cfg.delta)
        grid = kernels.default_grid("Ks", cfg.delta, cfg.grid_cells)
        K = kernels.estimate_kernel(model, scfg, grid, "Ks", cfg.samples_per_row)
        spec = kernels.principal_eigs(K)
        rows.append({"sigma": sigma, "lambda0": spec.lambda0,
                     "one_minus_lambda0": spec.one_minus_lambda0,
                     "inv_sigma2": 1.0 / sigma**2,
                     "log_one_minus": math.log(max(spec.one_minus_lambda0, 1e-300))})
    logs = [r["log_one_minus"] for r in rows]
    monotone = all(logs[i + 1] < logs[i] for i in range(len(logs) - 1))
    xs = np.array([r["inv_sigma2"] for r in rows])
    ys = np.array(logs)
    slope = float(np.polyfit(xs, ys, 1)[0])
    report = {"rows": rows, "monotone_decreasing": monotone, "slope": slope,
              "provenance": provenance(cfg)}
    if write:
        _write_json(os.path.join(cfg.out_dir, "kernel_trend.json"), report)
    return report


# ---------------------------------------------------------------------------
# minimiser, simulate, diagnostics, tables


def run_ldp(cfg: ExperimentConfig, write: bool = True) -> dict:
    model = build_model(cfg)
    het = heteroclinic_for(model, cfg.delta)
    gaps = {}
    ctx = theory.TheoryContext.from_model(model, s_star=het.s_star, delta=cfg.delta)
    table = theory.HPerTable(ctx)
    for phi_t in (2.0, 3.0, 4.0):
        res = ldp.finite_time_action(model, het, phi_t)
        pred = theory.rate_gap(ctx, phi_t, at=het.s_star, h=table)
        gaps[phi_t] = {"measured": res["gap"], "leading_term": pred,
                       "ratio": res["gap"] / pred}
    report = {
        "action_infinity": het.action_infinity,
        "s_star": het.s_star,
        "transversal": het.transversal,
        "crossing_slope": het.crossing_slope,
        "n_candidates": len(het.candidates),
        "section_points": [[float(a), float(b)] for a, b in het.section_points],
        "finite_time_gaps": gaps,
        "provenance": provenance(cfg),
    }
    if write:
        os.makedirs(cfg.out_dir, exist_ok=True)
        ldp.export_minimizer_csv(het, os.path.join(cfg.out_dir, "minimizer.csv"))
        _write_json(os.path.join(cfg.out_dir, "ldp.json"), report)
    return report


def run_simulate(cfg: ExperimentConfig, write: bool = True) -> dict:
    model = build_model(cfg)
    batch = sample_exits(model, cfg, cfg.sigma)
    if write:
        os.makedirs(cfg.out_dir, exist_ok=True)
        batch.to_csv(os.path.join(cfg.out_dir, "samples.csv"))
        scfg = sim.SimConfig(sigma=cfg.sigma, dt=cfg.dt, master_seed=cfg.seed,
                             delta=cfg.delta)
        sim.write_meta(os.path.join(cfg.out_dir, "meta.json"), model, scfg,
                       extra=provenance(cfg))
    return dict(batch.summary)


def run_bernstein(cfg: ExperimentConfig, write: bool = True) -> dict:
    model = build_model(cfg)
    scfg = sim.SimConfig(sigma=cfg.sigma, dt=cfg.dt, master_seed=cfg.seed,
                         delta=cfg.delta)
    eps_phi = math.sqrt(float(model.D_phiphi(0.0, 0.0)))
    bound = lambda s: eps_phi
    table = sim.bernstein_diagnostic(model, scfg, bound, cfg.bernstein_levels,
                                     cfg.bernstein_t, n_paths=cfg.paths)
    # standard Brownian motion control
    bm = sim.bernstein_diagnostic(None, scfg, lambda s: 1.0, [3.0], 1.0,
                                  n_paths=cfg.paths)
    report = {"model_sweep": table, "standard_bm": bm,
              "provenance": provenance(cfg)}
    if write:
        _write_json(os.path.join(cfg.out_dir, "bernstein.json"), report)
    return report


def run_orbit(cfg: ExperimentConfig, write: bool = True) -> dict:
    from . import floquet
    from .models import ring_field

    model = build_model(cfg)
    rows = {}
    for which in ("stable", "unstable"):
        orb = floquet.orbit_from_polar(model, which)
        lam = floquet.lyapunov_exponent(model, orb, which)
        U = floquet.monodromy(model, orb)
        div = floquet.divergence_integral(model, orb)
        det_err = abs(np.linalg.det(U) - math.exp(orb.period * div))
        rows[which] = {"period": orb.period, "lyapunov": lam,
                       "det_identity_error": det_err}
    report = {"model": model.name, "orbits": rows, "provenance": provenance(cfg)}
    if write:
        _write_json(os.path.join(cfg.out_dir, "orbit.json"), report)
    return report


def run_theory_table(cfg: ExperimentConfig, write: bool = True) -> dict:
    model = build_model(cfg)
    s_star = cfg.s_star
    if s_star is None:
        s_star = heteroclinic_for(model, cfg.delta).s_star
    ctx = theory.TheoryContext.from_model(model, s_star=s_star, delta=cfg.delta)
    theory.tabulate_theory(ctx, cfg.out_dir)
    return {"out_dir": cfg.out_dir, "s_star": s_star,
            "provenance": provenance(cfg)}


RUNNERS = {
    "cycling": run_cycling,
    "sweep": run_sigma_sweep,
    "descent": run_descent_profile,
    "validate-linear": run_linear_validation,
    "kernel": run_kernel,
    "kernel-trend": run_kernel_trend,
    "ldp": run_ldp,
    "simulate": run_simulate,
    "bernstein": run_bernstein,
    "orbit": run_orbit,
    "theory-table": run_theory_table,
}
