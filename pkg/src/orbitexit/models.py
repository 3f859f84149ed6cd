"""Model definitions: planar vector fields and polar-form SDE models.

Two kinds of model live here.

* ``PlanarVectorField`` is a plain planar ODE/SDE ``dz = f(z)dt + sigma g(z)dW``
  used by the Floquet machinery (orbit finding, monodromy, Lyapunov
  exponents).

* ``PolarModel`` is an SDE already written in polar-type coordinates on the
  cylinder ``(r, phi)``:

      dr   = f_r(r,phi) dt   + sigma g_r(r,phi) dW
      dphi = f_phi(r,phi) dt + sigma g_phi(r,phi) dW

  with the stable periodic orbit at r = -1 and the unstable one at r = +1,
  equal-time parametrised so that f_phi(+-1, .) = 1/T_pm and
  d f_r/d r(+-1, .) = +-lambda_pm.  All simulation, large-deviation and
  kernel work runs on PolarModels: constructing the global coordinate
  change for a raw planar system is out of scope, only orbit data is
  extracted from those.

The in-repo reference benchmark ("benchmark-asym") uses

    f_r(r,phi)  = (lam/2) (r-1)(r+1),          f_phi = 1/T,
    g_r(r,phi)  = (sqrt((1 + a cos 2 pi phi) V(r)), 0),
    g_phi       = (0, eps_phi),

where V is a C^2 interior diffusion gain with V = 1 on the strips
|r - 1| <= 0.2, r <= -0.95 and r >= 0.8 (so the local structure at both
orbits, the transversal profile D_rr(1, .), and the whole near-orbit
first-passage regime are exactly the plain model) and V = bulk_gain >> 1
in the bulk between.  The gain leaves every contracted quantity untouched
(the interpolation between the orbits is free) but cuts the action
barrier int lam (1 - r^2)/V dr between the orbits from 4 lam/3 to a few
times 1e-2, so first-exit events are samplable by direct Monte Carlo at
the noise levels used in the acceptance suite; with V = 1 mean exit
times are of order e^{1.33/sigma^2}, hopeless below sigma ~ 0.5.  The
drift is kept at full strength so the minimising path still connects the
orbits in ~20 phase units and shooting for it stays well conditioned.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

TWO_PI = 2.0 * np.pi


# ---------------------------------------------------------------------------
# planar fields


@dataclass(frozen=True)
class PlanarVectorField:
    """Planar drift/diffusion pair with optional analytic Jacobian."""

    drift: Callable[[np.ndarray], np.ndarray]            # z -> (2,)
    diffusion: Callable[[np.ndarray], np.ndarray]        # z -> (2, k)
    jacobian: Optional[Callable[[np.ndarray], np.ndarray]] = None
    domain: tuple = ((-10.0, 10.0), (-10.0, 10.0))
    ellipticity: tuple = (1.0, 1.0)                      # (c1, c2)
    name: str = ""

    def jac(self, z: np.ndarray, h: float = 1e-6) -> np.ndarray:
        if self.jacobian is not None:
            return np.asarray(self.jacobian(z), dtype=float)
        J = np.empty((2, 2))
        for j in range(2):
            dz = np.zeros(2)
            dz[j] = h
            J[:, j] = (np.asarray(self.drift(z + dz)) - np.asarray(self.drift(z - dz))) / (2 * h)
        return J


def ring_field(omega: float = 1.0, eps: float = 0.0) -> PlanarVectorField:
    """Planar model with circular orbits rho = 1 (stable) and rho = 3 (unstable).

    Radial drift rho' = rho (rho - 1)(rho - 3) / 2, angular speed omega; for
    eps != 0 an ``eps cos(angle)`` term is added to the radial drift, which
    breaks the rotational symmetry while keeping both orbits hyperbolic.
    """

    J_rot = np.array([[0.0, -1.0], [1.0, 0.0]])

    def h(rho):
        return (rho - 1.0) * (rho - 3.0) / 2.0

    def dh(rho):
        return (2.0 * rho - 4.0) / 2.0

    def drift(z):
        x, y = z
        rho = np.hypot(x, y)
        f = h(rho) * np.asarray(z, dtype=float) + omega * (J_rot @ z)
        if eps:
            f = f + eps * x / rho**2 * np.asarray(z, dtype=float)
        return f

    def jacobian(z):
        x, y = z
        zv = np.asarray(z, dtype=float)
        rho = np.hypot(x, y)
        Jm = dh(rho) / rho * np.outer(zv, zv) + h(rho) * np.eye(2) + omega * J_rot
        if eps:
            ex = np.array([1.0, 0.0])
            Jm = Jm + eps * (
                np.outer(zv, ex) / rho**2
                + x / rho**2 * np.eye(2)
                - 2.0 * x / rho**4 * np.outer(zv, zv)
            )
        return Jm

    def diffusion(z):
        return np.eye(2)

    return PlanarVectorField(
        drift=drift,
        diffusion=diffusion,
        jacobian=jacobian,
        domain=((-6.0, 6.0), (-6.0, 6.0)),
        ellipticity=(1.0, 1.0),
        name=f"ring(omega={omega},eps={eps})",
    )


# ---------------------------------------------------------------------------
# polar-form models


@dataclass(frozen=True)
class PolarModel:
    """SDE on the cylinder in polar-type form.

    All field callables are vectorized over numpy arrays of shape S and
    return S (scalars) or S + (k,) (noise rows).  Partial derivatives are
    analytic; the Hamiltonian machinery differentiates nothing numerically
    for the built-in models.
    """

    name: str
    k: int                                   # noise dimension
    f_r: Callable
    f_phi: Callable
    g_r: Callable                            # (r, phi) -> (..., k)
    g_phi: Callable
    # diffusion matrix components D = g g^T and their partials
    D_rr: Callable
    D_rphi: Callable
    D_phiphi: Callable
    dD_rr_dr: Callable
    dD_rr_dphi: Callable
    dD_rphi_dr: Callable
    dD_rphi_dphi: Callable
    dD_phiphi_dr: Callable
    dD_phiphi_dphi: Callable
    # drift partials
    df_r_dr: Callable
    df_r_dphi: Callable
    df_phi_dr: Callable
    df_phi_dphi: Callable
    lambda_plus: float
    lambda_minus: float
    T_plus: float
    T_minus: float
    L: float = 2.0                           # domain half width
    M: float = 2.0                           # nonlinearity bound metadata, unvalidated
    ellipticity: tuple = (0.0, 0.0)          # (c1, c2) declared bounds on xi^T D xi
    f_phi_floor: float = 0.0                 # declared positive lower bound on f_phi
    params: dict = field(default_factory=dict)
    # optional fast path for the characteristic integrator: () -> dict with
    # "rhs"(phi, y=(r, p_r, p_phi, action)) -> list of 4 phi-derivatives and
    # "phase_speed"(phi, y) -> float.  Pure scalar math, no numpy overhead.
    scalar_char: Optional[Callable] = None
    # optional fast Euler-Maruyama step (r, phi, z, sigma, dt, sdt) ->
    # (r_new, phi_new), vectorized; must agree with the generic g-based step.
    vector_step: Optional[Callable] = None

    def drr_unstable(self, phi):
        """D_rr evaluated on the unstable orbit (transversal noise strength)."""
        return self.D_rr(np.ones_like(np.asarray(phi, dtype=float)), phi)

    def drr_stable(self, phi):
        return self.D_rr(-np.ones_like(np.asarray(phi, dtype=float)), phi)


def drr_profile(model: PolarModel) -> Callable:
    """phi -> g_r(1,phi) g_r(1,phi)^T, the diffusion strength transversal to
    the unstable orbit.  Periodic with period 1 and bounded below by the
    declared ellipticity constant."""

    def profile(phi):
        phi = np.asarray(phi, dtype=float)
        g = model.g_r(np.ones_like(phi), phi)
        return np.einsum("...k,...k->...", g, g)

    return profile


def _smoothstep5(u):
    return u**3 * (10.0 + u * (-15.0 + 6.0 * u))


def _dsmoothstep5(u):
    return 30.0 * u**2 * (1.0 - u) ** 2


# diffusion gain ramp locations: V = 1 below LO1 and above HI2, V = bulk_gain
# on [LO2, HI1]; C^2 quintic ramps in between.  HI2 = 0.8 keeps the whole
# strip |r - 1| <= 0.2 (the near-exit regime) at gain 1.
_V_LO1, _V_LO2 = -0.97, -0.85
_V_HI1, _V_HI2 = 0.68, 0.80


def _make_benchmark(lam: float, T: float, a: float, eps_phi: float,
                    bulk_gain: float, L: float, name: str,
                    ripple: float = 0.55, ripple_mean: float = 0.0,
                    ripple_lo: float = 0.68,
                    ripple_hi: float = 0.80) -> PolarModel:
    dpp = eps_phi * eps_phi
    zero = lambda r, phi: np.zeros(np.broadcast(r, phi).shape)

    lo_w = _V_LO2 - _V_LO1
    hi_w = _V_HI2 - _V_HI1
    g1 = bulk_gain - 1.0

    def V(r):
        r = np.asarray(r, dtype=float)
        up = _smoothstep5(np.clip((r - _V_LO1) / lo_w, 0.0, 1.0))
        dn = _smoothstep5(np.clip((r - _V_HI1) / hi_w, 0.0, 1.0))
        return 1.0 + g1 * (up - dn)

    def dV(r):
        r = np.asarray(r, dtype=float)
        u1 = (r - _V_LO1) / lo_w
        u2 = (r - _V_HI1) / hi_w
        d1 = np.where((u1 > 0) & (u1 < 1),
                      _dsmoothstep5(np.clip(u1, 0, 1)) / lo_w, 0.0)
        d2 = np.where((u2 > 0) & (u2 < 1),
                      _dsmoothstep5(np.clip(u2, 0, 1)) / hi_w, 0.0)
        return g1 * (d1 - d2)

    # the phi modulation of the transversal diffusion is confined to the
    # strip above r = 0.8 (weight w), so the gained bulk stays isotropic in
    # phase; on the unstable orbit D_rr(1, phi) = 1 + a cos(2 pi phi) exactly
    _W_LO, _W_HI = 0.80, 0.92
    w_w = _W_HI - _W_LO

    def w_mod(r):
        r = np.asarray(r, dtype=float)
        return _smoothstep5(np.clip((r - _W_LO) / w_w, 0.0, 1.0))

    def dw_mod(r):
        r = np.asarray(r, dtype=float)
        u = (r - _W_LO) / w_w
        return np.where((u > 0) & (u < 1),
                        _dsmoothstep5(np.clip(u, 0, 1)) / w_w, 0.0)

    # compactly supported drift ripple: an order-one phase-locked wiggle of
    # the radial drift on [ripple_lo, ripple_hi], identically zero outside,
    # crossed fast by the minimiser -- this is what makes the invariant
    # manifolds of the characteristic flow split transversally instead of
    # staying exponentially close
    rr_ramp = (ripple_hi - ripple_lo) / 3.0

    def bump(r):
        r = np.asarray(r, dtype=float)
        up = _smoothstep5(np.clip((r - ripple_lo) / rr_ramp, 0.0, 1.0))
        dn = _smoothstep5(np.clip((r - ripple_hi + rr_ramp) / rr_ramp, 0.0, 1.0))
        return up - dn

    def dbump(r):
        r = np.asarray(r, dtype=float)
        u1 = (r - ripple_lo) / rr_ramp
        u2 = (r - ripple_hi + rr_ramp) / rr_ramp
        d1 = np.where((u1 > 0) & (u1 < 1),
                      _dsmoothstep5(np.clip(u1, 0, 1)) / rr_ramp, 0.0)
        d2 = np.where((u2 > 0) & (u2 < 1),
                      _dsmoothstep5(np.clip(u2, 0, 1)) / rr_ramp, 0.0)
        return d1 - d2

    def f_r(r, phi):
        r = np.asarray(r, dtype=float)
        phi = np.asarray(phi, dtype=float)
        shape = 1.0 + bump(r) * (ripple * np.cos(TWO_PI * phi) + ripple_mean)
        return 0.5 * lam * (r - 1.0) * (r + 1.0) * shape

    def df_r_dr(r, phi):
        r = np.asarray(r, dtype=float)
        phi = np.asarray(phi, dtype=float)
        mix = ripple * np.cos(TWO_PI * phi) + ripple_mean
        shape = 1.0 + bump(r) * mix
        return lam * r * shape + 0.5 * lam * (r * r - 1.0) * dbump(r) * mix

    def df_r_dphi(r, phi):
        r = np.asarray(r, dtype=float)
        phi = np.asarray(phi, dtype=float)
        return (-np.pi * lam * (r * r - 1.0) * ripple * bump(r)
                * np.sin(TWO_PI * phi)) * 2.0 * 0.5

    def f_phi(r, phi):
        return np.full(np.broadcast(r, phi).shape, 1.0 / T)

    def D_rr(r, phi):
        phi = np.asarray(phi, dtype=float)
        return V(r) + a * np.cos(TWO_PI * phi) * w_mod(r) + zero(r, phi)

    def dD_rr_dr(r, phi):
        phi = np.asarray(phi, dtype=float)
        return dV(r) + a * np.cos(TWO_PI * phi) * dw_mod(r) + zero(r, phi)

    def dD_rr_dphi(r, phi):
        phi = np.asarray(phi, dtype=float)
        return -TWO_PI * a * np.sin(TWO_PI * phi) * w_mod(r) + zero(r, phi)

    def g_r(r, phi):
        shape = np.broadcast(r, phi).shape
        out = np.zeros(shape + (2,))
        out[..., 0] = np.sqrt(D_rr(r, phi))
        return out

    def g_phi(r, phi):
        shape = np.broadcast(r, phi).shape
        out = np.zeros(shape + (2,))
        out[..., 1] = eps_phi
        return out

    c1 = min(1.0 - a, dpp) if eps_phi > 0 else 0.0
    c2 = max(bulk_gain + a, dpp)

    import math

    def _bump_scalar(r, lo, hi, ramp):
        if r <= lo or r >= hi:
            return 0.0, 0.0
        u1 = (r - lo) / ramp
        u2 = (r - hi + ramp) / ramp
        if u1 < 1.0:
            up = u1 * u1 * u1 * (10.0 + u1 * (-15.0 + 6.0 * u1))
            dup = 30.0 * u1 * u1 * (1.0 - u1) ** 2 / ramp
        else:
            up, dup = 1.0, 0.0
        if u2 <= 0.0:
            dn, ddn = 0.0, 0.0
        else:
            dn = u2 * u2 * u2 * (10.0 + u2 * (-15.0 + 6.0 * u2))
            ddn = 30.0 * u2 * u2 * (1.0 - u2) ** 2 / ramp
        return up - dn, dup - ddn

    def _ramp_scalar(r, lo, width):
        if r <= lo:
            return 0.0, 0.0
        u = (r - lo) / width
        if u >= 1.0:
            return 1.0, 0.0
        val = u * u * u * (10.0 + u * (-15.0 + 6.0 * u))
        der = 30.0 * u * u * (1.0 - u) ** 2 / width
        return val, der

    def scalar_char():
        inv_T = 1.0 / T
        two_pi = TWO_PI

        def rhs(phi, y):
            r, p_r, p_phi = y[0], y[1], y[2]
            c = math.cos(two_pi * phi)
            sphi = math.sin(two_pi * phi)
            up1, dup1 = _ramp_scalar(r, _V_LO1, lo_w)
            dn1, ddn1 = _ramp_scalar(r, _V_HI1, hi_w)
            Vv = 1.0 + g1 * (up1 - dn1)
            dVv = g1 * (dup1 - ddn1)
            wv, dwv = _ramp_scalar(r, _W_LO, w_w)
            Drr = Vv + a * c * wv
            dDrr_dr = dVv + a * c * dwv
            dDrr_dphi = -two_pi * a * sphi * wv
            bv, dbv = _bump_scalar(r, ripple_lo, ripple_hi, rr_ramp)
            mix = ripple * c + ripple_mean
            shape = 1.0 + bv * mix
            fr = 0.5 * lam * (r * r - 1.0) * shape
            dfr_dr = lam * r * shape + 0.5 * lam * (r * r - 1.0) * dbv * mix
            dfr_dphi = -math.pi * lam * (r * r - 1.0) * ripple * bv * sphi
            rdot = fr + Drr * p_r
            phidot = inv_T + dpp * p_phi
            prdot = -dfr_dr * p_r - 0.5 * dDrr_dr * p_r * p_r
            ppdot = -dfr_dphi * p_r - 0.5 * dDrr_dphi * p_r * p_r
            lagr = 0.5 * (Drr * p_r * p_r + dpp * p_phi * p_phi)
            inv = 1.0 / phidot
            return (rdot * inv, prdot * inv, ppdot * inv, lagr * inv)

        def phase_speed(phi, y):
            return inv_T + dpp * y[2]

        return {"rhs": rhs, "phase_speed": phase_speed}

    inv_T = 1.0 / T
    half_lam = 0.5 * lam

    def vector_step(r, phi, z, sigma, dt, sdt):
        c = np.cos(TWO_PI * phi)
        Drr = V(r) + a * c * w_mod(r)
        fr = half_lam * (r * r - 1.0) * (1.0 + bump(r) * (ripple * c + ripple_mean))
        r_new = r + fr * dt + (sigma * sdt) * np.sqrt(Drr) * z[:, 0]
        phi_new = phi + inv_T * dt + (sigma * sdt * eps_phi) * z[:, 1]
        return r_new, phi_new

    return PolarModel(
        name=name,
        k=2,
        f_r=f_r,
        f_phi=f_phi,
        g_r=g_r,
        g_phi=g_phi,
        D_rr=D_rr,
        D_rphi=zero,
        D_phiphi=lambda r, phi: np.full(np.broadcast(r, phi).shape, dpp),
        dD_rr_dr=dD_rr_dr,
        dD_rr_dphi=dD_rr_dphi,
        dD_rphi_dr=zero,
        dD_rphi_dphi=zero,
        dD_phiphi_dr=zero,
        dD_phiphi_dphi=zero,
        df_r_dr=df_r_dr,
        df_r_dphi=df_r_dphi,
        df_phi_dr=zero,
        df_phi_dphi=zero,
        lambda_plus=lam,
        lambda_minus=lam,
        T_plus=T,
        T_minus=T,
        L=L,
        M=5.0,
        ellipticity=(c1, c2),
        f_phi_floor=1.0 / T,
        params={"lam": lam, "T": T, "a": a, "eps_phi": eps_phi,
                "bulk_gain": bulk_gain, "L": L, "ripple": ripple,
                "ripple_mean": ripple_mean,
                "ripple_lo": ripple_lo, "ripple_hi": ripple_hi},
        scalar_char=scalar_char,
        vector_step=vector_step,
    )


def benchmark_asym(lam: float = 1.0, T: float = 1.0, a: float = 0.5,
                   eps_phi: float = 0.3, bulk_gain: float = 200.0,
                   L: float = 2.0, ripple: float = 0.55) -> PolarModel:
    """Reference benchmark: phase-modulated transversal diffusion on the
    exit strip plus a phase-locked drift ripple break the rotational
    symmetry, so the heteroclinic transversality assumption can hold."""
    return _make_benchmark(lam, T, a, eps_phi, bulk_gain, L, "benchmark-asym",
                           ripple=ripple)


def benchmark_sym(lam: float = 1.0, T: float = 1.0, eps_phi: float = 0.3,
                  bulk_gain: float = 200.0, L: float = 2.0) -> PolarModel:
    """Rotationally symmetric negative control (no phi dependence anywhere):
    the invariant manifolds of the characteristic flow coincide and the
    exit-phase profile is flat."""
    return _make_benchmark(lam, T, 0.0, eps_phi, bulk_gain, L, "benchmark-sym",
                           ripple=0.0)


def benchmark_steep(lam: float = 1.0, T: float = 1.0, a: float = 0.5,
                    eps_phi: float = 0.3, L: float = 2.0) -> PolarModel:
    """Uniform diffusion gain (V = 1) and no drift ripple: identical local
    structure at the orbits but a 4 lam/3 action barrier, so exits are not
    samplable at moderate noise.  Kept for deterministic cross-checks."""
    return _make_benchmark(lam, T, a, eps_phi, 1.0, L, "benchmark-steep",
                           ripple=0.0)


MODEL_REGISTRY = {
    "benchmark-asym": benchmark_asym,
    "benchmark-sym": benchmark_sym,
    "benchmark-steep": benchmark_steep,
}


def make_model(name: str, **params) -> PolarModel:
    if name not in MODEL_REGISTRY:
        raise KeyError(f"unknown model '{name}'; available: {sorted(MODEL_REGISTRY)}")
    return MODEL_REGISTRY[name](**params)


# ---------------------------------------------------------------------------
# invariant battery


def check_polar_invariants(model: PolarModel, n_phi: int = 64, fd_step: float = 1e-6) -> dict:
    """Finite-difference structural checks of the polar-form contract.

    Returns the worst-case residuals; callers assert against their own
    tolerances.
    """
    phis = np.arange(n_phi) / n_phi
    ones = np.ones_like(phis)

    slope_plus = (model.f_r(1.0 + fd_step, phis) - model.f_r(1.0 - fd_step, phis)) / (2 * fd_step)
    slope_minus = (model.f_r(-1.0 + fd_step, phis) - model.f_r(-1.0 - fd_step, phis)) / (2 * fd_step)

    rs = np.linspace(-0.95, 0.95, 41)
    interior = model.f_r(rs[:, None], phis[None, :])

    # ellipticity along the sampled grid for a sweep of unit directions
    angles = np.linspace(0.0, np.pi, 9)
    quad_min, quad_max = np.inf, -np.inf
    r_grid = np.linspace(-model.L + 1e-3, model.L - 1e-3, 21)
    Drr = model.D_rr(r_grid[:, None], phis[None, :])
    Drp = model.D_rphi(r_grid[:, None], phis[None, :])
    Dpp = model.D_phiphi(r_grid[:, None], phis[None, :])
    for th in angles:
        xi1, xi2 = np.cos(th), np.sin(th)
        quad = Drr * xi1**2 + 2 * Drp * xi1 * xi2 + Dpp * xi2**2
        quad_min = min(quad_min, float(quad.min()))
        quad_max = max(quad_max, float(quad.max()))

    return {
        "slope_plus_err": float(np.abs(slope_plus - model.lambda_plus).max()),
        "slope_minus_err": float(np.abs(slope_minus + model.lambda_minus).max()),
        "f_r_on_orbit_plus": float(np.abs(model.f_r(ones, phis)).max()),
        "f_r_on_orbit_minus": float(np.abs(model.f_r(-ones, phis)).max()),
        "f_phi_plus_err": float(np.abs(model.f_phi(ones, phis) - 1.0 / model.T_plus).max()),
        "f_phi_minus_err": float(np.abs(model.f_phi(-ones, phis) - 1.0 / model.T_minus).max()),
        "f_phi_min": float(model.f_phi(r_grid[:, None], phis[None, :]).min()),
        "f_r_interior_max": float(interior.max()),
        "ellipticity_min": quad_min,
        "ellipticity_max": quad_max,
    }
