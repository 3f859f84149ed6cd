"""Closed-form objects of the exit law near an unstable periodic orbit.

Everything here is an explicit formula or a one-dimensional quadrature:

* the type-1 Gumbel density ``A(x) = exp(-2x - e^{-2x}/2)`` (mode
  ``-log(2)/2``, scale 1/2, variance pi^2/24) and its periodisation
  ``Q_lamT(x) = sum_n A(lamT (n - x))``, the universal cycling profile;

* the periodic transversal variance profile ``h_per`` solving
  ``dh/dphi = 2 lamT h - D_rr(1, phi)``, and the natural orbit
  parametrisation ``theta`` with ``theta' = D_rr / (2 h_per)`` in which the
  effective transversal noise is constant;

* linear first-passage laws through the reflection principle (variance
  accumulator ``v_t``, hitting CDF and density);

* the finite-time vs infinite-time rate-function gap, the stay-probability
  ceiling, and the leading-order exit-location density (unwrapped and
  wrapped).

The formulas take the growth-per-period ``lamT = lambda_+ T_+`` and the
profile ``D_rr(1, .)`` as the only model inputs; models normalised to
T_+ = 1 make them exact linearisations, which is the convention of the
built-in benchmark.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy.integrate import quad
from scipy.interpolate import CubicSpline
from scipy.special import ndtr

from .models import PolarModel, drr_profile

GUMBEL_MODE = -0.5 * math.log(2.0)


def gumbel_density(x):
    """A(x) = exp(-2x - e^{-2x}/2); integrates to 1 over the line."""
    x = np.asarray(x, dtype=float)
    expo = -2.0 * x
    with np.errstate(over="ignore"):
        inner = np.exp(expo)
    out = np.where(np.isfinite(inner), np.exp(expo - 0.5 * inner), 0.0)
    return out if out.ndim else float(out)


def gumbel_cdf(x):
    """Antiderivative exp(-e^{-2x}/2) of the density."""
    x = np.asarray(x, dtype=float)
    with np.errstate(over="ignore"):
        inner = np.exp(-2.0 * x)
    out = np.where(np.isfinite(inner), np.exp(-0.5 * inner), 0.0)
    return out if out.ndim else float(out)


def cycling_profile(lamT: float, x, tol: float = 1e-12):
    """Periodicised Gumbel profile Q_lamT(x) = sum_n A(lamT (n - x)).

    The sum is truncated with a certified tail bound: on the right
    A(y) <= e^{-2y}, so terms with n >= N contribute less than
    e^{-2 lamT (N - x)} / (1 - e^{-2 lamT}); on the left the double
    exponential kills terms once lamT (n - x) < -y0 where
    e^{2 y0}/2 - 2 y0 > -log(tol).
    """
    if lamT <= 0:
        raise ValueError("lamT must be positive")
    if tol <= 0:
        raise ValueError("tol must be positive")
    x = np.asarray(x, dtype=float)
    # left cutoff y0: solve e^{2y}/2 - 2y >= -log tol, generous closed form
    y0 = 0.5 * math.log(2.0 * (-math.log(tol) + 10.0)) + 1.0
    # right cutoff from the geometric bound
    n_hi = math.ceil((-math.log(tol * (1.0 - math.exp(-2.0 * lamT))) / (2.0 * lamT)) + float(np.max(x)))
    n_lo = math.floor(float(np.min(x)) - y0 / lamT)
    ns = np.arange(n_lo, n_hi + 1, dtype=float)
    vals = gumbel_density(lamT * (ns.reshape((-1,) + (1,) * x.ndim) - x))
    out = vals.sum(axis=0)
    return out if out.ndim else float(out)


# ---------------------------------------------------------------------------
# periodic variance profile and natural parametrisation


def periodic_exp_profile(rate: float, source: Callable, phi, tol: float = 1e-10,
                         forward: bool = True):
    """Periodic solution of h' = rate*h - source (forward=True) or of
    h' = -rate*h + source (forward=False), for rate > 0 and a 1-periodic
    source.

    forward=True:   h(phi) = e^{rate phi}/(1-e^{-rate}) * int_phi^{phi+1}
                    e^{-rate u} source(u) du
    forward=False:  h(phi) = e^{-rate phi}/(1-e^{-rate}) * int_{phi-1}^phi
                    e^{+rate u} source(u) du

    Both are evaluated in the shifted form int_0^1 e^{-rate s}
    source(phi +- s) ds / (1 - e^{-rate}) so no large exponentials appear.
    """
    if rate <= 0:
        raise ValueError("rate must be positive")
    sgn = 1.0 if forward else -1.0
    denom = 1.0 - math.exp(-rate)

    def single(p):
        val, _ = quad(lambda s: math.exp(-rate * s) * float(source(p + sgn * s)),
                      0.0, 1.0, epsabs=tol, epsrel=tol, limit=200)
        return val / denom

    phi_arr = np.asarray(phi, dtype=float)
    out = np.vectorize(single)(phi_arr)
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class TheoryContext:
    """Inputs of the closed-form exit law."""

    lamT: float                       # lambda_+ T_+ > 0, growth per period
    d_rr: Callable                    # phi -> D_rr(1, phi), 1-periodic, >= c1 > 0
    delta: float = 0.1                # level offset in (0, 1/2)
    s_star: float = 0.0               # crossing phase of the minimiser, in [0,1)
    quad_tol: float = 1e-10

    def __post_init__(self):
        if self.lamT <= 0:
            raise ValueError("lamT must be positive")
        if not (0.0 < self.delta < 0.5):
            raise ValueError("delta must lie in (0, 1/2)")

    @classmethod
    def from_model(cls, model: PolarModel, s_star: float = 0.0,
                   delta: float = 0.1, quad_tol: float = 1e-10) -> "TheoryContext":
        return cls(lamT=model.lambda_plus * model.T_plus,
                   d_rr=drr_profile(model), delta=delta,
                   s_star=s_star % 1.0, quad_tol=quad_tol)


def h_per(ctx: TheoryContext, phi):
    """Periodic solution of dh/dphi = 2 lamT h - D_rr(1, phi), by adaptive
    quadrature of the integral representation."""
    return periodic_exp_profile(2.0 * ctx.lamT, ctx.d_rr, phi, tol=ctx.quad_tol)


class HPerTable:
    """Spline-tabulated h_per for hot loops; cross-checked against the
    quadrature form in the tests."""

    def __init__(self, ctx: TheoryContext, n: int = 2048):
        grid = np.arange(n + 1) / n
        vals = h_per(ctx, grid)
        vals[-1] = vals[0]
        self._spline = CubicSpline(grid, vals, bc_type="periodic")
        self.ctx = ctx

    def __call__(self, phi):
        return self._spline(np.asarray(phi, dtype=float) % 1.0)

    def derivative(self, phi):
        return self._spline(np.asarray(phi, dtype=float) % 1.0, 1)


def theta(ctx: TheoryContext, phi, h: Optional[Callable] = None):
    """Natural parametrisation of the unstable orbit,

        theta(phi) = lamT*phi - (1/2) log[ (1/2) delta^2 h(phi) / h(s*)^2 ],

    satisfying theta(phi+1) = theta(phi) + lamT."""
    hf = h if h is not None else (lambda p: h_per(ctx, p))
    phi = np.asarray(phi, dtype=float)
    h_here = np.asarray(hf(phi % 1.0), dtype=float)
    h_star = float(hf(ctx.s_star))
    out = ctx.lamT * phi - 0.5 * np.log(0.5 * ctx.delta**2 * h_here / h_star**2)
    return out if out.ndim else float(out)


def theta_prime(ctx: TheoryContext, phi, h: Optional[Callable] = None):
    """theta'(phi) = D_rr(1, phi) / (2 h_per(phi)); strictly positive."""
    hf = h if h is not None else (lambda p: h_per(ctx, p))
    phi = np.asarray(phi, dtype=float)
    out = np.asarray(ctx.d_rr(phi % 1.0), dtype=float) / (2.0 * np.asarray(hf(phi % 1.0), dtype=float))
    return out if out.ndim else float(out)


# ---------------------------------------------------------------------------
# linear first-passage laws


def variance_accumulator(lam: float, t: float, d_rr: Callable, T_plus: float = 1.0,
                         tol: float = 1e-12) -> float:
    """v_t = int_0^t e^{-2 lam s} D_rr(1, s/T_+) ds.

    Uses one quadrature per full period summed geometrically, plus a
    remainder panel, so large t costs the same as one period.
    """
    if t < 0:
        raise ValueError("t must be nonnegative")
    if t == 0:
        return 0.0
    decay = math.exp(-2.0 * lam * T_plus)

    def integ(a, b):
        val, _ = quad(lambda s: math.exp(-2.0 * lam * s) * float(d_rr(s / T_plus)),
                      a, b, epsabs=tol, epsrel=tol, limit=200)
        return val

    n = int(t // T_plus)
    n = min(n, max(1, int(60.0 / (2.0 * lam * T_plus))) * 40)  # geometric tail exhausted
    I_T = integ(0.0, T_plus)
    if n == 0:
        return integ(0.0, t)
    geom = I_T * (1.0 - decay**n) / (1.0 - decay)
    rem = t - n * T_plus
    if rem > 0:
        geom += decay**n * integ(0.0, rem)
    return geom


def variance_limit(lam: float, d_rr: Callable, T_plus: float = 1.0,
                   tol: float = 1e-12) -> float:
    """v_infty = int_0^infty e^{-2 lam s} D_rr(1, s/T_+) ds, via the exact
    geometric series over periods."""
    decay = math.exp(-2.0 * lam * T_plus)
    val, _ = quad(lambda s: math.exp(-2.0 * lam * s) * float(d_rr(s / T_plus)),
                  0.0, T_plus, epsabs=tol, epsrel=tol, limit=200)
    return val / (1.0 - decay)


def reflection_cdf(r0: float, sigma: float, lam: float, d_rr: Callable, t,
                   T_plus: float = 1.0) -> float:
    """P(tau_0 <= t) = 2 Phi(-r0/(sigma sqrt(v_t))) for the linear radial
    process dr = lam r dt + sigma g_0(t) dW started at r0 > 0."""
    if r0 <= 0 or sigma <= 0:
        raise ValueError("r0 and sigma must be positive")
    t_arr = np.atleast_1d(np.asarray(t, dtype=float))
    out = np.empty_like(t_arr)
    for i, ti in enumerate(t_arr):
        if ti <= 0:
            out[i] = 0.0
        else:
            v = variance_accumulator(lam, float(ti), d_rr, T_plus)
            out[i] = 2.0 * ndtr(-r0 / (sigma * math.sqrt(v)))
    return out if np.ndim(t) else float(out[0])


def _peaked(u):
    return u * np.exp(-0.5 * u * u)


def hitting_density(r0: float, sigma: float, lam: float, d_rr: Callable, t,
                    T_plus: float = 1.0) -> float:
    """Density of the first-hitting time of 0 for the linear process,

        f_0(t) = D_rr(1, t/T_+) e^{-2 lam t} / (sqrt(2 pi) v_t) * F(r0/(sigma sqrt(v_t)))

    with F(u) = u e^{-u^2/2}.  Behaves like a periodically modulated
    exponential for large t."""
    if r0 <= 0 or sigma <= 0:
        raise ValueError("r0 and sigma must be positive")
    t_arr = np.atleast_1d(np.asarray(t, dtype=float))
    out = np.empty_like(t_arr)
    for i, ti in enumerate(t_arr):
        if ti <= 0:
            out[i] = 0.0
            continue
        v = variance_accumulator(lam, float(ti), d_rr, T_plus)
        out[i] = (float(d_rr(ti / T_plus)) * math.exp(-2.0 * lam * ti)
                  / (math.sqrt(2.0 * math.pi) * v)
                  * _peaked(r0 / (sigma * math.sqrt(v))))
    return out if np.ndim(t) else float(out[0])


def rate_gap(ctx: TheoryContext, phi: float, at: float = None,
             h: Optional[Callable] = None) -> float:
    """Leading term of I_phi - I_infty: the extra action for forcing the
    crossing after a phase lapse phi instead of infinite time,

        (1/2) delta^2 e^{-2 lamT phi} h(at + phi) / h(at)^2.
    """
    if phi <= 0:
        raise ValueError("phi must be positive")
    start = ctx.s_star if at is None else at
    hf = h if h is not None else (lambda p: h_per(ctx, p))
    h_end = float(hf((start + phi) % 1.0))
    h_start = float(hf(start % 1.0))
    return 0.5 * ctx.delta**2 * math.exp(-2.0 * ctx.lamT * phi) * h_end / h_start**2


def stay_prob_upper(r0: float, delta: float, sigma: float, lam: float,
                    d_rr: Callable, T: float, T_plus: float = 1.0) -> float:
    """Leading factor of the upper bound on P(stay in (0, delta) up to T):

        (1/sqrt(2 pi)) delta^2 r0 / (sigma^3 v_T^{3/2}) e^{-r0^2/(2 sigma^2 v_T)} e^{-2 lam T}.
    """
    if not (0.0 < r0 < delta):
        raise ValueError("need 0 < r0 < delta")
    if T <= 0:
        raise ValueError("T must be positive")
    v = variance_accumulator(lam, T, d_rr, T_plus)
    return (delta**2 * r0 / (math.sqrt(2.0 * math.pi) * sigma**3 * v**1.5)
            * math.exp(-r0**2 / (2.0 * sigma**2 * v)) * math.exp(-2.0 * lam * T))


# ---------------------------------------------------------------------------
# leading-order exit-location densities


def main_theorem_density(ctx: TheoryContext, sigma: float, t, lambda0: float,
                         C0: float, bin_width: float, tol: float = 1e-12):
    """Leading-order mass of theta(phi_tau)/lamT in [t, t+Delta]:

        Delta * C0 * lambda0^t * Q_lamT(|log sigma|/lamT - t).
    """
    if not (0.0 < sigma < 1.0):
        raise ValueError("sigma must lie in (0,1)")
    if not (0.0 < lambda0 < 1.0):
        raise ValueError("lambda0 must lie in (0,1)")
    if bin_width <= 0:
        raise ValueError("bin width must be positive")
    t = np.asarray(t, dtype=float)
    arg = abs(math.log(sigma)) / ctx.lamT - t
    out = bin_width * C0 * lambda0**t * cycling_profile(ctx.lamT, arg, tol)
    return out if out.ndim else float(out)


def wrapped_profile(ctx: TheoryContext, sigma: float, t, bin_width: float,
                    tol: float = 1e-12):
    """Winding-summed leading term Delta * Q_lamT(|log sigma|/lamT - t) of
    the wrapped exit-location distribution, t in [0, 1)."""
    if not (0.0 < sigma < 1.0):
        raise ValueError("sigma must lie in (0,1)")
    if bin_width <= 0:
        raise ValueError("bin width must be positive")
    t = np.asarray(t, dtype=float)
    arg = abs(math.log(sigma)) / ctx.lamT - t
    out = bin_width * cycling_profile(ctx.lamT, arg, tol)
    return out if out.ndim else float(out)


# ---------------------------------------------------------------------------
# tabulation


def tabulate_theory(ctx: TheoryContext, out_dir, n_phi: int = 256,
                    x_range=(-3.0, 3.0), n_x: int = 601) -> None:
    """Emit (phi, h_per, theta, theta') and (x, Q) tables as CSV with
    17-significant-digit floats."""
    import os

    os.makedirs(out_dir, exist_ok=True)
    table = HPerTable(ctx)
    phis = np.arange(n_phi) / n_phi
    hs = table(phis)
    ths = theta(ctx, phis, h=table)
    tps = theta_prime(ctx, phis, h=table)
    with open(os.path.join(out_dir, "orbit_parametrisation.csv"), "w") as f:
        f.write("phi,h_per,theta,theta_prime\n")
        for row in zip(phis, hs, ths, tps):
            f.write(",".join(f"{v:.17g}" for v in row) + "\n")

    xs = np.linspace(x_range[0], x_range[1], n_x)
    qs = cycling_profile(ctx.lamT, xs)
    with open(os.path.join(out_dir, "cycling_profile.csv"), "w") as f:
        f.write("x,Q\n")
        for row in zip(xs, qs):
            f.write(",".join(f"{v:.17g}" for v in row) + "\n")
