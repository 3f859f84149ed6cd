"""Deterministic orbit data: shooting, monodromy, Lyapunov exponents,
Floquet vectors.

Works on two geometries: genuine planar fields (states z = (x, y)) and
polar models viewed as fields on the cylinder (states z = (r, phi), with
the periodic orbits sitting at r = +-1 by construction).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy.integrate import quad, solve_ivp

from .models import PlanarVectorField, PolarModel

ODE_RTOL = 1e-12
ODE_ATOL = 1e-12


class NoConvergence(RuntimeError):
    pass


class SectionNotTransversal(RuntimeError):
    pass


class IntegrationFailure(RuntimeError):
    pass


class MethodMismatch(RuntimeError):
    pass


class DegenerateEigenvalue(RuntimeError):
    pass


@dataclass(frozen=True)
class Section:
    """Line segment p0 + s * tangent used for Poincare shooting."""

    point: np.ndarray
    tangent: np.ndarray

    @property
    def normal(self) -> np.ndarray:
        t = self.tangent / np.linalg.norm(self.tangent)
        return np.array([-t[1], t[0]])


@dataclass
class OrbitData:
    """Equal-time parametrisation Gamma(phi) = gamma(T.phi) of a periodic
    orbit plus whatever has been computed for it so far."""

    gamma: Callable[[float], np.ndarray]
    period: float
    kind: str                      # "stable" | "unstable"
    residual: float
    cylinder: bool = False         # phi-component advances by 1 per period
    lam: Optional[float] = None
    u_vec: Optional[Callable] = None
    d_rr: Optional[Callable] = None


def _flow(field: PlanarVectorField, z0, t_span, events=None, dense=True, max_step=np.inf):
    sol = solve_ivp(lambda t, z: field.drift(z), t_span, np.asarray(z0, dtype=float),
                    method="DOP853", rtol=ODE_RTOL, atol=ODE_ATOL,
                    dense_output=dense, events=events, max_step=max_step)
    if not sol.success:
        raise IntegrationFailure(sol.message)
    return sol


def find_periodic_orbit(field: PlanarVectorField, section: Section,
                        initial_guess: np.ndarray, orbit_kind: str,
                        tol: float = 1e-12, max_iter: int = 50,
                        t_max: float = 100.0) -> OrbitData:
    """Newton shooting on the section return map.

    ``initial_guess`` is a point near the orbit; it is projected onto the
    section line first.  Unstable orbits are shot with the time-reversed
    field (where they attract, so the return map is well conditioned) and
    the dense parametrisation is flipped back afterwards.  Raises
    NoConvergence if the Newton residual stalls and SectionNotTransversal
    if the flow is tangent to the section.
    """
    if orbit_kind == "unstable":
        rev = PlanarVectorField(
            drift=lambda z: -np.asarray(field.drift(z), dtype=float),
            diffusion=field.diffusion,
            jacobian=(None if field.jacobian is None
                      else (lambda z: -np.asarray(field.jacobian(z), dtype=float))),
            domain=field.domain, ellipticity=field.ellipticity, name=field.name)
        orb_rev = find_periodic_orbit(rev, section, initial_guess, "stable",
                                      tol=tol, max_iter=max_iter, t_max=t_max)
        gamma_rev = orb_rev.gamma

        def gamma(phi):
            phi = np.asarray(phi, dtype=float)
            return gamma_rev(1.0 - (phi % 1.0))

        return OrbitData(gamma=gamma, period=orb_rev.period, kind="unstable",
                         residual=orb_rev.residual)

    p0 = np.asarray(section.point, dtype=float)
    tan = np.asarray(section.tangent, dtype=float)
    tan = tan / np.linalg.norm(tan)
    nrm = section.normal

    s0 = float(np.dot(np.asarray(initial_guess, dtype=float) - p0, tan))

    f_at = field.drift(p0 + s0 * tan)
    cross_speed = float(np.dot(f_at, nrm))
    if abs(cross_speed) < 1e-10 * (1.0 + np.linalg.norm(f_at)):
        raise SectionNotTransversal("flow is tangent to the section at the guess")
    direction = 1.0 if cross_speed > 0 else -1.0

    def event(t, z):
        return float(np.dot(z - p0, nrm))

    event.direction = direction
    event.terminal = True

    def return_map(s: float):
        z0 = p0 + s * tan
        # step off the section before arming the terminal event
        f0 = np.asarray(field.drift(z0), dtype=float)
        speed = np.linalg.norm(f0)
        if not np.isfinite(speed) or speed == 0.0:
            raise NoConvergence("stationary or invalid point on section")
        t_off = 1e-8 / max(speed, 1e-8)
        pre = _flow(field, z0, (0.0, t_off), dense=False)
        z_off = pre.y[:, -1]
        sol = _flow(field, z_off, (t_off, t_max), events=event)
        if len(sol.t_events[0]) == 0:
            raise NoConvergence("no section return within t_max")
        t_ret = float(sol.t_events[0][0])
        z_ret = sol.y_events[0][0]
        return float(np.dot(z_ret - p0, tan)), t_ret, sol

    s = s0
    scale = max(1.0, abs(s0))
    for _ in range(max_iter):
        try:
            g, t_ret, _ = return_map(s)
        except IntegrationFailure as exc:
            raise NoConvergence(f"flow integration failed during shooting: {exc}")
        res = g - s
        if abs(res) < tol * scale:
            break
        h = 1e-7 * scale
        gp, _, _ = return_map(s + h)
        gm, _, _ = return_map(s - h)
        dgds = (gp - gm) / (2 * h)
        denom = dgds - 1.0
        if abs(denom) < 1e-14:
            raise NoConvergence("degenerate Newton step (return map derivative = 1)")
        step = -res / denom
        # damped step to survive poor guesses
        if abs(step) > 0.5 * scale:
            step = 0.5 * scale * np.sign(step)
        s = s + step
    else:
        raise NoConvergence(f"Newton did not reach tol={tol} in {max_iter} iterations")

    g, period, sol = return_map(s)
    z_start = p0 + s * tan
    dense = _flow(field, z_start, (0.0, period))
    z_end = dense.sol(period)
    residual = float(np.linalg.norm(z_end - z_start))

    def gamma(phi):
        phi = np.asarray(phi, dtype=float) % 1.0
        return dense.sol(phi * period)

    return OrbitData(gamma=gamma, period=period, kind=orbit_kind, residual=residual)


def orbit_from_polar(model: PolarModel, which: str) -> OrbitData:
    """Orbit data for a polar model on the cylinder: the orbits are r = +-1
    with the equal-time parametrisation Gamma(phi) = (+-1, phi)."""
    r_orb = 1.0 if which == "unstable" else -1.0
    T = model.T_plus if which == "unstable" else model.T_minus

    def gamma(phi):
        phi = np.asarray(phi, dtype=float)
        return np.stack(np.broadcast_arrays(np.full_like(phi, r_orb), phi))

    def d_rr(phi):
        phi = np.asarray(phi, dtype=float)
        g = model.g_r(np.full_like(phi, r_orb), phi)
        return np.einsum("...k,...k->...", g, g)

    return OrbitData(gamma=gamma, period=T, kind=which, residual=0.0,
                     cylinder=True, d_rr=d_rr)


def cylinder_field(model: PolarModel) -> PlanarVectorField:
    """View a polar model as a planar field in (r, phi) coordinates."""

    def drift(z):
        r, phi = z
        return np.array([float(model.f_r(r, phi)), float(model.f_phi(r, phi))])

    def jacobian(z):
        r, phi = z
        return np.array([
            [float(model.df_r_dr(r, phi)), float(model.df_r_dphi(r, phi))],
            [float(model.df_phi_dr(r, phi)), float(model.df_phi_dphi(r, phi))],
        ])

    def diffusion(z):
        r, phi = z
        return np.stack([model.g_r(r, phi), model.g_phi(r, phi)])

    return PlanarVectorField(drift=drift, diffusion=diffusion, jacobian=jacobian,
                             domain=((-model.L, model.L), (-np.inf, np.inf)),
                             ellipticity=model.ellipticity, name=model.name)


def _field_for(orbit: OrbitData, field_or_model) -> PlanarVectorField:
    if isinstance(field_or_model, PolarModel):
        return cylinder_field(field_or_model)
    return field_or_model


def principal_solution(field_or_model, orbit: OrbitData, phi0: float,
                       phi1: float) -> np.ndarray:
    """U(phi1, phi0): solution of dU/dphi = T A(Gamma(phi)) U, U(phi0) = 1,
    with A the drift Jacobian along the orbit."""
    field = _field_for(orbit, field_or_model)
    T = orbit.period

    def rhs(phi, u):
        A = field.jac(_gamma_at(orbit, phi))
        return (T * A @ u.reshape(2, 2)).ravel()

    sol = solve_ivp(rhs, (phi0, phi1), np.eye(2).ravel(), method="DOP853",
                    rtol=ODE_RTOL, atol=ODE_ATOL)
    if not sol.success:
        raise IntegrationFailure(sol.message)
    return sol.y[:, -1].reshape(2, 2)


def _gamma_at(orbit: OrbitData, phi: float) -> np.ndarray:
    if orbit.cylinder:
        g = orbit.gamma(phi % 1.0)
        return np.array([float(g[0]), float(phi)])
    return np.asarray(orbit.gamma(phi % 1.0), dtype=float)


def monodromy(field_or_model, orbit: OrbitData, which: str = None,
              phi0: float = 0.0) -> np.ndarray:
    """Monodromy matrix U(phi0 + 1, phi0) of the linearisation along the
    orbit.  Satisfies det U = exp(T int Tr A dphi) and admits f(Gamma(phi0))
    as eigenvector with eigenvalue 1."""
    return principal_solution(field_or_model, orbit, phi0, phi0 + 1.0)


def divergence_integral(field_or_model, orbit: OrbitData, tol: float = 1e-12) -> float:
    """int_0^1 div f(Gamma(phi)) dphi."""
    field = _field_for(orbit, field_or_model)

    def trace_at(phi):
        A = field.jac(_gamma_at(orbit, phi))
        return A[0, 0] + A[1, 1]

    val, _ = quad(trace_at, 0.0, 1.0, epsabs=tol, epsrel=tol, limit=200)
    return val


def lyapunov_exponent(field_or_model, orbit: OrbitData, which: str,
                      tol: float = 1e-6) -> float:
    """Lyapunov exponent of the orbit, computed two ways (divergence
    integral and monodromy eigenvalue) with a cross-validation gate."""
    sign = 1.0 if which == "unstable" else -1.0
    div = divergence_integral(field_or_model, orbit)
    lam_div = sign * div

    U = monodromy(field_or_model, orbit, which)
    evals = np.linalg.eigvals(U)
    # the trivial eigenvalue is 1; take the other one
    idx = int(np.argmax(np.abs(evals - 1.0)))
    mu = evals[idx]
    if abs(mu - 1.0) < 1e-10:
        raise DegenerateEigenvalue("nontrivial monodromy eigenvalue too close to 1")
    lam_mono = sign * float(np.log(np.abs(mu))) / orbit.period

    if abs(lam_div - lam_mono) > tol:
        raise MethodMismatch(
            f"Lyapunov estimators disagree: divergence {lam_div:.12g} vs "
            f"monodromy {lam_mono:.12g}")
    if lam_div <= 0:
        raise MethodMismatch(f"{which} orbit produced nonpositive exponent {lam_div:.3g}")
    return lam_div


def floquet_vector(field_or_model, orbit: OrbitData, which: str,
                   phis: np.ndarray, degeneracy_tol: float = 1e-8):
    """Floquet eigenvector u(phi) = e^{-+ lam T phi} U(phi, 0) u(0) of the
    monodromy family, unit-normalised at phi = 0.

    Returns (us, lam) with us of shape (len(phis), 2).  u is 1-periodic up
    to sign conventions; the periodicity residual is checked in tests.
    """
    U1 = monodromy(field_or_model, orbit, which)
    evals, evecs = np.linalg.eig(U1)
    idx = int(np.argmax(np.abs(evals - 1.0)))
    if abs(evals[idx] - evals[1 - idx]) < degeneracy_tol:
        raise DegenerateEigenvalue("monodromy eigenvalues nearly coincide")
    mu = float(np.real(evals[idx]))
    u0 = np.real(evecs[:, idx])
    u0 = u0 / np.linalg.norm(u0)
    lamT = float(np.log(abs(mu)))  # = +- lam T depending on orbit kind

    us = np.empty((len(phis), 2))
    for i, phi in enumerate(np.asarray(phis, dtype=float)):
        U = principal_solution(field_or_model, orbit, 0.0, float(phi))
        us[i] = np.exp(-lamT * phi) * (U @ u0)
    return us, lamT / orbit.period


def find_orbit_cylinder(model: PolarModel, r_guess: float, orbit_kind: str,
                        tol: float = 1e-12, max_iter: int = 50) -> OrbitData:
    """Newton shooting for periodic orbits of a polar model on the cylinder,
    using the phase-1 return map of the radial coordinate."""
    field = cylinder_field(model)

    def hit_one(phi, z):
        return z[1] - 1.0

    hit_one.terminal = True
    hit_one.direction = 1.0

    def return_r(r0: float):
        sol = solve_ivp(lambda t, z: field.drift(z), (0.0, 50.0 * max(model.T_plus, model.T_minus)),
                        [r0, 0.0], method="DOP853", rtol=ODE_RTOL, atol=ODE_ATOL,
                        events=hit_one, dense_output=True)
        if not sol.success or len(sol.t_events[0]) == 0:
            raise NoConvergence("no phase-1 return")
        return float(sol.y_events[0][0][0]), float(sol.t_events[0][0]), sol

    r = r_guess
    for _ in range(max_iter):
        g, t_ret, sol = return_r(r)
        res = g - r
        if abs(res) < tol:
            break
        h = 1e-7
        gp, _, _ = return_r(r + h)
        gm, _, _ = return_r(r - h)
        denom = (gp - gm) / (2 * h) - 1.0
        if abs(denom) < 1e-14:
            raise NoConvergence("degenerate Newton step")
        r = r - res / denom
    else:
        raise NoConvergence(f"Newton did not reach tol={tol}")

    g, period, sol = return_r(r)

    def gamma(phi):
        phi = np.asarray(phi, dtype=float) % 1.0
        return sol.sol(phi * period)

    return OrbitData(gamma=gamma, period=period, kind=orbit_kind,
                     residual=abs(g - r), cylinder=True)
