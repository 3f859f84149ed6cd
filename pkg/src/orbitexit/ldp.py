"""Characteristics of the sample-path rate function.

The rate function I(gamma) = (1/2) int psi^T D(gamma) psi dt of the polar
SDE is minimised along solutions of the Hamilton equations generated by

    H(gamma, psi) = (1/2) psi^T D(gamma) psi + f(gamma)^T psi,

with conjugate momenta psi = (p_r, p_phi).  The plane psi = 0 is invariant
(deterministic flow), the two periodic orbits are hyperbolic in the
(r, p_r) Poincare section of the H = 0 level, and the minimising path
connecting them is the transversal heteroclinic intersection of the
unstable manifold of (-1, 0) with the stable manifold of (+1, 0).

phi is used as the integration time throughout (its speed is bounded away
from zero near the deterministic manifold), and the cumulative action is
carried as an extra state so every trajectory knows its cost.

Near the orbits the (r, p_r) linearisation in phi-time is

    d/dphi (r, p_r) = [[+-lam T, T D_rr(+-1, phi)], [0, -+lam T]] (r, p_r),

so the local manifolds are graphs r -+ 1 = -+ h(phi) p_r with h the
periodic solution of h' = +-(2 lam T h - T D_rr).  These relations seed
the shooting and close the action integrals analytically once a
trajectory is within ``tail_width`` of an orbit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence

import numpy as np
from scipy.integrate import solve_ivp
from scipy.interpolate import CubicSpline
from scipy.optimize import brentq

from .models import PolarModel
from .theory import periodic_exp_profile


class PhaseSpeedVanishes(RuntimeError):
    pass


class NoIntersection(RuntimeError):
    pass


class TangentialIntersection(RuntimeError):
    pass


class RootFindFailure(RuntimeError):
    pass


@dataclass(frozen=True)
class CharState:
    """Point of the characteristic system (phi unwrapped)."""

    r: float
    phi: float
    p_r: float
    p_phi: float

    def as_array(self) -> np.ndarray:
        return np.array([self.r, self.phi, self.p_r, self.p_phi])


def _diffusion_at(model: PolarModel, r, phi):
    return (float(model.D_rr(r, phi)), float(model.D_rphi(r, phi)),
            float(model.D_phiphi(r, phi)))


def hamiltonian(model: PolarModel, state: CharState) -> float:
    """H = (1/2) psi^T D psi + f^T psi; zero on the deterministic plane."""
    Drr, Drp, Dpp = _diffusion_at(model, state.r, state.phi)
    quad = 0.5 * (Drr * state.p_r**2 + 2 * Drp * state.p_r * state.p_phi
                  + Dpp * state.p_phi**2)
    lin = (float(model.f_r(state.r, state.phi)) * state.p_r
           + float(model.f_phi(state.r, state.phi)) * state.p_phi)
    return quad + lin


def hamilton_rhs(model: PolarModel, state: CharState) -> np.ndarray:
    """Time derivatives (r', phi', p_r', p_phi') of the characteristic flow.

    Reduces to (f_r, f_phi, 0, 0) on psi = 0.
    """
    r, phi, p_r, p_phi = state.r, state.phi, state.p_r, state.p_phi
    Drr, Drp, Dpp = _diffusion_at(model, r, phi)
    rdot = float(model.f_r(r, phi)) + Drr * p_r + Drp * p_phi
    phidot = float(model.f_phi(r, phi)) + Drp * p_r + Dpp * p_phi
    quad_r = (float(model.dD_rr_dr(r, phi)) * p_r**2
              + 2 * float(model.dD_rphi_dr(r, phi)) * p_r * p_phi
              + float(model.dD_phiphi_dr(r, phi)) * p_phi**2)
    quad_p = (float(model.dD_rr_dphi(r, phi)) * p_r**2
              + 2 * float(model.dD_rphi_dphi(r, phi)) * p_r * p_phi
              + float(model.dD_phiphi_dphi(r, phi)) * p_phi**2)
    prdot = (-float(model.df_r_dr(r, phi)) * p_r
             - float(model.df_phi_dr(r, phi)) * p_phi - 0.5 * quad_r)
    ppdot = (-float(model.df_r_dphi(r, phi)) * p_r
             - float(model.df_phi_dphi(r, phi)) * p_phi - 0.5 * quad_p)
    return np.array([rdot, phidot, prdot, ppdot])


def p_phi_on_shell(model: PolarModel, r: float, phi: float, p_r: float,
                   energy: float = 0.0) -> float:
    """Solve H(r, phi, p_r, p_phi) = energy for the root of p_phi that
    vanishes with p_r (the physical branch of the reduced dynamics)."""
    Drr, Drp, Dpp = _diffusion_at(model, r, phi)
    a = 0.5 * Dpp
    b = float(model.f_phi(r, phi)) + Drp * p_r
    c = 0.5 * Drr * p_r**2 + float(model.f_r(r, phi)) * p_r - energy
    if a == 0.0:
        return -c / b
    disc = b * b - 4.0 * a * c
    if disc < 0:
        raise ValueError("no real on-shell momentum (H level unreachable)")
    # root continuous in c at c=0: p_phi = -2c / (b + sqrt(disc)) for b > 0
    return -2.0 * c / (b + math.sqrt(disc))


@dataclass
class Trajectory:
    phis: np.ndarray            # independent variable (unwrapped phase)
    states: np.ndarray          # shape (n, 3): r, p_r, p_phi
    actions: np.ndarray         # cumulative action along the path
    sol: object                 # scipy OdeSolution over (r, p_r, p_phi, action)
    events: dict
    h_start: float
    h_drift: float              # max |H - H0| per unit phi

    @property
    def r(self):
        return self.states[:, 0]

    @property
    def p_r(self):
        return self.states[:, 1]

    @property
    def p_phi(self):
        return self.states[:, 2]

    def state_at(self, phi: float) -> CharState:
        y = self.sol(phi)
        return CharState(r=float(y[0]), phi=float(phi), p_r=float(y[1]),
                         p_phi=float(y[2]))

    def action_at(self, phi: float) -> float:
        return float(self.sol(phi)[3])


def integrate_characteristics(model: PolarModel, state0: CharState,
                              phi_span: Sequence[float], tol: float = 1e-10,
                              extra_events: Optional[list] = None,
                              phase_speed_floor: float = 1e-6,
                              n_dense: int = 0) -> Trajectory:
    """Integrate the characteristic system with phi as independent variable.

    The returned trajectory records (r, p_r, p_phi) and the cumulative
    action; energy drift is monitored and reported.  Raises
    PhaseSpeedVanishes if phi' drops below ``phase_speed_floor``.
    """

    if model.scalar_char is not None:
        fast = model.scalar_char()
        rhs = fast["rhs"]
        speed = fast["phase_speed"]

        def slow_phase(phi, y):
            return speed(phi, y) - phase_speed_floor

    else:
        def rhs(phi, y):
            st = CharState(r=y[0], phi=phi, p_r=y[1], p_phi=y[2])
            d = hamilton_rhs(model, st)
            phidot = d[1]
            Drr, Drp, Dpp = _diffusion_at(model, y[0], phi)
            lagr = 0.5 * (Drr * y[1] ** 2 + 2 * Drp * y[1] * y[2] + Dpp * y[2] ** 2)
            return np.array([d[0], d[2], d[3], lagr]) / phidot

        def slow_phase(phi, y):
            st = CharState(r=y[0], phi=phi, p_r=y[1], p_phi=y[2])
            return hamilton_rhs(model, st)[1] - phase_speed_floor

    slow_phase.terminal = True
    slow_phase.direction = -1.0

    events = [slow_phase] + list(extra_events or [])
    y0 = np.array([state0.r, state0.p_r, state0.p_phi, 0.0])
    sol = solve_ivp(rhs, (phi_span[0], phi_span[-1]), y0, method="DOP853",
                    rtol=tol, atol=tol, dense_output=True, events=events)
    if not sol.success and sol.status != 1:
        raise RuntimeError(f"characteristic integration failed: {sol.message}")
    if len(sol.t_events[0]) > 0:
        raise PhaseSpeedVanishes(
            f"phase speed fell below {phase_speed_floor} at phi={sol.t_events[0][0]:.6g}")

    if n_dense:
        phis = np.linspace(sol.t[0], sol.t[-1], n_dense)
        ys = sol.sol(phis)
    else:
        phis = sol.t
        ys = sol.y
    states = ys[:3].T
    actions = ys[3]

    h0 = hamiltonian(model, CharState(states[0, 0], phis[0], states[0, 1], states[0, 2]))
    drift = 0.0
    span = abs(phis[-1] - phis[0]) + 1e-300
    for i in range(0, len(phis), max(1, len(phis) // 64)):
        hi = hamiltonian(model, CharState(states[i, 0], phis[i], states[i, 1], states[i, 2]))
        drift = max(drift, abs(hi - h0))
    ev = {i: (sol.t_events[i], sol.y_events[i]) for i in range(len(events))}
    return Trajectory(phis=phis, states=states, actions=actions, sol=sol.sol,
                      events=ev, h_start=h0, h_drift=drift / span)


def action(phis: np.ndarray, states: np.ndarray, model: PolarModel,
           reduced: bool = False) -> float:
    """Trapezoidal action along a sampled path.

    Full form: (1/2) int psi^T D psi dt, written in phi using the exact
    Jacobian 1/phi'.  Reduced form: (1/2) int D_rr p_r^2 dphi, the leading
    approximation near the unstable orbit.
    """
    r, p_r, p_phi = states[:, 0], states[:, 1], states[:, 2]
    dens = np.empty(len(phis))
    for i in range(len(phis)):
        Drr, Drp, Dpp = _diffusion_at(model, r[i], phis[i])
        if reduced:
            dens[i] = 0.5 * Drr * p_r[i] ** 2
        else:
            quad = 0.5 * (Drr * p_r[i] ** 2 + 2 * Drp * p_r[i] * p_phi[i]
                          + Dpp * p_phi[i] ** 2)
            st = CharState(r[i], phis[i], p_r[i], p_phi[i])
            dens[i] = quad / hamilton_rhs(model, st)[1]
    return float(np.trapezoid(dens, phis))


# ---------------------------------------------------------------------------
# local manifold profiles


class ManifoldProfile:
    """Periodic variance profiles of the phi-time linearisation at the two
    orbits, spline-tabulated.

    plus:  h' = 2 lam_+ T_+ h - T_+ D_rr(+1, .);  W^s_+ is r - 1 = -h(phi) p_r
    minus: h' = -(2 lam_- T_- h - T_- D_rr(-1, .)); W^u_- is r + 1 = +h(phi) p_r
    """

    def __init__(self, model: PolarModel, n: int = 1024, tol: float = 1e-12):
        lamT_p = 2.0 * model.lambda_plus * model.T_plus
        lamT_m = 2.0 * model.lambda_minus * model.T_minus
        grid = np.arange(n + 1) / n
        src_p = lambda u: model.T_plus * float(model.D_rr(1.0, u))
        src_m = lambda u: model.T_minus * float(model.D_rr(-1.0, u))
        vp = np.array([periodic_exp_profile(lamT_p, src_p, g, tol=tol) for g in grid])
        vm = np.array([periodic_exp_profile(lamT_m, src_m, g, tol=tol, forward=False)
                       for g in grid])
        vp[-1], vm[-1] = vp[0], vm[0]
        self._sp = CubicSpline(grid, vp, bc_type="periodic")
        self._sm = CubicSpline(grid, vm, bc_type="periodic")

    def plus(self, phi):
        return self._sp(np.asarray(phi, dtype=float) % 1.0)

    def minus(self, phi):
        return self._sm(np.asarray(phi, dtype=float) % 1.0)


def linear_fundamental_matrix(lamT: float, h_plus: Callable, phi0: float,
                              phi1: float) -> np.ndarray:
    """Closed-form fundamental matrix of the (r, p_r) linearisation at the
    unstable orbit, in the form using the periodic profile:

        [[e^{L d},  e^{L d} h(phi0) - e^{-L d} h(phi1)],
         [0,        e^{-L d}]],    L = lamT, d = phi1 - phi0.
    """
    d = phi1 - phi0
    ep, em = math.exp(lamT * d), math.exp(-lamT * d)
    return np.array([[ep, ep * float(h_plus(phi0)) - em * float(h_plus(phi1))],
                     [0.0, em]])


def numeric_fundamental_matrix(model: PolarModel, phi0: float, phi1: float,
                               eta: float = 1e-6, tol: float = 1e-12) -> np.ndarray:
    """(r, p_r) fundamental matrix at the unstable orbit from the nonlinear
    characteristic flow, by central differences of on-shell trajectories."""
    cols = []
    for dr, dp in ((eta, 0.0), (0.0, eta)):
        ends = []
        for sgn in (1.0, -1.0):
            r0 = 1.0 + sgn * dr
            p0 = sgn * dp
            st = CharState(r=r0, phi=phi0, p_r=p0,
                           p_phi=p_phi_on_shell(model, r0, phi0, p0))
            traj = integrate_characteristics(model, st, (phi0, phi1), tol=tol)
            y = traj.sol(phi1)
            ends.append(np.array([y[0], y[1]]))
        cols.append((ends[0] - ends[1]) / (2.0 * eta))
    return np.stack(cols, axis=1)


# ---------------------------------------------------------------------------
# heteroclinic connection


@dataclass
class HeteroclinicResult:
    phis: np.ndarray
    states: np.ndarray               # (n, 3): r, p_r, p_phi
    actions: np.ndarray              # cumulative action including start tail
    action_infinity: float
    s_star: float                    # crossing phase of r = 1 - delta, mod 1
    s_star_unwrapped: float
    section_points: np.ndarray       # (m, 2): (r, p_r) at integer phi
    transversal: bool
    crossing_slope: float
    eps_star: float
    candidates: List[dict] = field(default_factory=list)
    delta: float = 0.1
    phi0: float = 0.0
    profiles: Optional[ManifoldProfile] = None
    traj: Optional[Trajectory] = None
    action_start_tail: float = 0.0

    def state_at_level_crossing(self) -> CharState:
        """Exact minimiser state at the last upcrossing of r = 1 - delta,
        from the dense solution at the recorded event phase."""
        y = self.traj.sol(self.s_star_unwrapped)
        return CharState(r=float(y[0]), phi=self.s_star_unwrapped,
                         p_r=float(y[1]), p_phi=float(y[2]))

    def action_to_level_crossing(self) -> float:
        return self.action_start_tail + float(self.traj.sol(self.s_star_unwrapped)[3])


def _shoot(model: PolarModel, profiles: ManifoldProfile, eps: float, phi0: float,
           phi_max: float, tol: float, delta: float, tail_width: float):
    """Integrate one unstable-subspace seed; classify overshoot/fallback.

    Returns (outcome, traj, chi_level, chi_tail): outcome is +1 (crossed
    r = 1), -1 (fell back), 0 (undecided); chi_* is the stable-manifold
    functional r - 1 + h_plus(phi) p_r evaluated at the last crossing of
    the level 1 - delta resp. of the tail strip 1 - tail_width.  Near the
    orbit the functional measures the miss distance to W^s exactly to
    leading order, so chi_tail ~ 0 for every seed signals coincident
    manifolds (the rotationally symmetric degenerate case).
    """
    h_m0 = float(profiles.minus(phi0))
    r0 = -1.0 + h_m0 * eps
    p0 = eps
    st = CharState(r=r0, phi=phi0, p_r=p0,
                   p_phi=p_phi_on_shell(model, r0, phi0, p0))

    def overshoot(phi, y):
        return y[0] - 1.2

    overshoot.terminal = True
    overshoot.direction = 1.0

    def fallback(phi, y):
        return y[0] - 0.0

    fallback.terminal = True
    fallback.direction = -1.0

    def level(phi, y):
        return y[0] - (1.0 - delta)

    level.terminal = False
    level.direction = 1.0

    def tail(phi, y):
        return y[0] - (1.0 - tail_width)

    tail.terminal = False
    tail.direction = 1.0

    traj = integrate_characteristics(model, st, (phi0, phi0 + phi_max), tol=tol,
                                     extra_events=[overshoot, fallback, level, tail])
    t_over = traj.events[1][0]
    t_fall = traj.events[2][0]
    t_level = traj.events[3][0]
    t_tail = traj.events[4][0]
    outcome = 0
    if len(t_over):
        outcome = 1
    elif len(t_fall):
        outcome = -1

    def chi_at(phi_c):
        y = traj.sol(phi_c)
        return float(y[0] - 1.0 + profiles.plus(phi_c) * y[1])

    chi_level = chi_at(float(t_level[-1])) if len(t_level) else None
    chi_tail = chi_at(float(t_tail[-1])) if len(t_tail) else None
    return outcome, traj, chi_level, chi_tail


def find_heteroclinic(model: PolarModel, delta: float = 0.1,
                      shooting_tol: float = 1e-13, ode_tol: float = 1e-11,
                      phi0: float = 0.0, n_sweep: int = 48,
                      seed_eps: float = 1e-6, phi_max: float = 60.0,
                      tail_width: float = 1e-3,
                      tangential_floor: float = 1e-5) -> HeteroclinicResult:
    """Shoot from the unstable subspace of the stable orbit and bisect the
    transversal crossing with the stable manifold of the unstable orbit.

    The seed offsets sweep one multiplicative fundamental domain of the
    return map, so every translate of the connection appears exactly once;
    among multiple sign changes the minimal-action crossing is returned and
    the rest are reported as candidates.
    """
    profiles = ManifoldProfile(model)
    lam_m = model.lambda_minus * model.T_minus

    eps_grid = seed_eps * np.exp(np.linspace(0.0, lam_m, n_sweep + 1) * 1.02)
    sweep_tol = max(1e-8, ode_tol)
    outcomes = []
    chi_tails = []
    for eps in eps_grid:
        out, _, _, chi_t = _shoot(model, profiles, float(eps), phi0, phi_max,
                                  sweep_tol, delta, tail_width)
        outcomes.append(out)
        chi_tails.append(chi_t)

    reached = [c for c in chi_tails if c is not None]
    if len(reached) >= len(eps_grid) // 2 and max(abs(c) for c in reached) < tangential_floor:
        raise NoIntersection(
            "stable and unstable manifolds coincide within tolerance "
            "(rotationally symmetric system?)")

    brackets = []
    for i in range(len(eps_grid) - 1):
        if outcomes[i] != 0 and outcomes[i + 1] != 0 and outcomes[i] != outcomes[i + 1]:
            brackets.append((float(eps_grid[i]), float(eps_grid[i + 1])))
    if not brackets:
        raise NoIntersection("no overshoot/fallback sign change across the seed sweep")

    candidates = []
    for lo, hi in brackets:
        a, b = lo, hi
        coarse_tol = max(1e-8, ode_tol)
        out_a, _, _, _ = _shoot(model, profiles, a, phi0, phi_max, coarse_tol, delta,
                                tail_width)
        for it in range(70):
            # coarse ODE tolerance while the bracket is wide, full accuracy
            # for the final refinement
            tol_it = coarse_tol if (b - a) > 1e-5 * b else ode_tol
            mid = math.sqrt(a * b)
            out_m, _, _, _ = _shoot(model, profiles, mid, phi0, phi_max, tol_it,
                                    delta, tail_width)
            if out_m == out_a or out_m == 0:
                a = mid
            else:
                b = mid
            if (b - a) < shooting_tol * b:
                break
        eps_star = math.sqrt(a * b)
        out, traj, chi, _ = _shoot(model, profiles, eps_star, phi0, phi_max, ode_tol,
                                   delta, tail_width)

        # terminate the converged path at its last entry into the tail strip
        t_tail = traj.events[4][0]
        t_level = traj.events[3][0]
        if len(t_tail) == 0 or len(t_level) == 0:
            continue
        phi_end = float(t_tail[-1])
        y_end = traj.sol(phi_end)
        p_end = float(y_end[1])
        a_start = 0.5 * eps_star**2 * float(profiles.minus(phi0))
        a_tail = 0.5 * p_end**2 * float(profiles.plus(phi_end))
        a_path = float(traj.sol(phi_end)[3])
        total = a_start + a_path + a_tail

        # crossing slope of chi at the reference level, over a wide bracket
        dchi = []
        for fac in (1.0 - 1e-4, 1.0 + 1e-4):
            _, _, c, _ = _shoot(model, profiles, eps_star * fac, phi0, phi_max,
                                ode_tol, delta, tail_width)
            dchi.append(c)
        slope = np.nan
        if all(c is not None for c in dchi):
            slope = (dchi[1] - dchi[0]) / (2e-4 * eps_star)

        candidates.append({
            "eps": eps_star,
            "action": total,
            "phi_end": phi_end,
            "s_star_unwrapped": float(t_level[-1]),
            "slope": float(slope) if np.isfinite(slope) else 0.0,
            "traj": traj,
            "a_start": a_start,
            "a_tail": a_tail,
        })

    if not candidates:
        raise NoIntersection("no candidate crossing could be resolved")

    best = min(candidates, key=lambda c: (c["action"], c["eps"]))
    traj = best["traj"]
    phi_end = best["phi_end"]

    mask = traj.phis <= phi_end
    phis = traj.phis[mask]
    states = traj.states[mask]
    actions = best["a_start"] + traj.actions[mask]

    n_sections = int(math.floor(phi_end - phi0))
    sec = np.array([[float(traj.sol(phi0 + k)[0]), float(traj.sol(phi0 + k)[1])]
                    for k in range(1, n_sections + 1)])

    slope = best["slope"]
    transversal = abs(slope * best["eps"]) > tangential_floor

    return HeteroclinicResult(
        phis=phis, states=states, actions=actions,
        action_infinity=best["action"],
        s_star=best["s_star_unwrapped"] % 1.0,
        s_star_unwrapped=best["s_star_unwrapped"],
        section_points=sec, transversal=transversal,
        crossing_slope=slope, eps_star=best["eps"],
        candidates=[{k: v for k, v in c.items() if k != "traj"} for c in candidates],
        delta=delta, phi0=phi0, profiles=profiles,
        traj=traj, action_start_tail=best["a_start"])


def finite_time_action(model: PolarModel, het: HeteroclinicResult,
                       phi_target: float, tol: float = 1e-12,
                       ode_tol: float = 1e-11) -> dict:
    """Action of the constrained path that starts on the minimiser at the
    level 1 - delta and reaches the unstable orbit after exactly
    ``phi_target`` units of phase, found by a one-dimensional root find on
    the initial transversal momentum.

    Returns the constrained action, the infinite-time action from the same
    starting point, and their gap (the quantity with the closed-form
    leading term (delta^2/2) e^{-2 lamT phi} h(s*+phi)/h(s*)^2).
    """
    if phi_target < 1.0:
        raise ValueError("phi_target must be >= 1")
    profiles = het.profiles if het.profiles is not None else ManifoldProfile(model)
    lamT = model.lambda_plus * model.T_plus

    # starting point: the minimiser's crossing of r = 1 - delta, from the
    # dense solution at the recorded event phase
    phi_s = het.s_star_unwrapped
    cross = het.state_at_level_crossing()
    r_s, p_s = cross.r, cross.p_r

    action_inf_from_cross = het.action_infinity - het.action_to_level_crossing()

    cap = phi_target + 8.0

    def hit_phase(q: float):
        p0 = p_s + q
        st = CharState(r=r_s, phi=phi_s, p_r=p0,
                       p_phi=p_phi_on_shell(model, r_s, phi_s, p0))

        def cross_one(phi, y):
            return y[0] - 1.0

        cross_one.terminal = True
        cross_one.direction = 1.0

        traj = integrate_characteristics(model, st, (phi_s, phi_s + cap),
                                         tol=ode_tol, extra_events=[cross_one])
        hits = traj.events[1][0]
        if len(hits) == 0:
            return cap, traj       # capped: no crossing inside the window
        return float(hits[0]) - phi_s, traj

    h_p = profiles.plus
    q_lin = (math.exp(-2.0 * lamT * phi_target)
             * float(h_p(phi_s + phi_target)) / float(h_p(phi_s)) * p_s)

    def g(q):
        lapse, _ = hit_phase(q)
        return lapse - phi_target

    lo, hi = q_lin / 16.0, q_lin * 16.0
    g_lo, g_hi = g(lo), g(hi)
    tries = 0
    while not g_lo > 0:
        lo /= 4.0
        g_lo = g(lo)
        tries += 1
        if tries > 8:
            raise RootFindFailure("could not bracket the crossing momentum (low side)")
    while not g_hi < 0:
        hi *= 4.0
        g_hi = g(hi)
        tries += 1
        if tries > 16:
            raise RootFindFailure("could not bracket the crossing momentum (high side)")

    q_star = brentq(g, lo, hi, xtol=tol * abs(q_lin), rtol=1e-14, maxiter=200)
    lapse, traj = hit_phase(q_star)
    phi_hit = phi_s + lapse
    act = float(traj.sol(phi_hit)[3])

    return {
        "action_constrained": act,
        "action_infinity": action_inf_from_cross,
        "gap": act - action_inf_from_cross,
        "q_star": q_star,
        "q_linear": q_lin,
        "phi_hit": phi_hit,
    }


def export_minimizer_csv(het: HeteroclinicResult, path: str) -> None:
    """Emit the minimiser path and its section points as CSV."""
    with open(path, "w") as f:
        f.write("phi,r,p_r,p_phi,cumulative_action\n")
        for i in range(len(het.phis)):
            row = (het.phis[i], het.states[i, 0], het.states[i, 1],
                   het.states[i, 2], het.actions[i])
            f.write(",".join(f"{v:.17g}" for v in row) + "\n")
