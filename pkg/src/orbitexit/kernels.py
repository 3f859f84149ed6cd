"""Discretized random Poincare kernels and their spectral analysis.

A kernel row is estimated by launching paths from the cell midpoint and
recording the cell of the radial position one phase later, or the killing
cause (harmonic-measure sampling).  The resulting substochastic matrix
K[i][j] ~ P(midpoint_i -> cell_j) is analysed directly: principal
eigenvalue/eigenfunctions, quasistationary distribution, the matrix-power
eigenvalue sandwich, the density-ratio spectral-gap bound, and the
Laplace-transform identity K H = e^{-u} G for hitting functionals.

Killing mass is tracked per row and the matrix is used substochastically
(no cemetery augmentation).  1 - lambda0 is also returned in the
cancellation-free form pi0 . kill, which stays accurate when the killing
is many orders below 1.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import rng, sim
from .models import PolarModel


class AllKilled(RuntimeError):
    pass


class NonConvergence(RuntimeError):
    pass


class ZeroDensity(RuntimeError):
    pass


class OutsideConvergenceRegion(RuntimeError):
    pass


@dataclass
class KernelEstimate:
    grid: np.ndarray                 # cell edges, len n+1
    matrix: np.ndarray               # (n, n) row-substochastic
    kill: np.ndarray                 # per-row killing mass
    n_samples: int                   # samples per row
    variant: str                     # "Ks" | "Ku"
    kill_hi: np.ndarray = None       # kill mass at the upper boundary
    kill_lo: np.ndarray = None       # kill mass at the lower boundary

    @property
    def n_cells(self) -> int:
        return len(self.grid) - 1

    @property
    def midpoints(self) -> np.ndarray:
        return 0.5 * (self.grid[:-1] + self.grid[1:])

    @property
    def widths(self) -> np.ndarray:
        return np.diff(self.grid)

    def entry_se(self) -> np.ndarray:
        p = self.matrix
        return np.sqrt(np.maximum(p * (1.0 - p), 1.0 / self.n_samples) / self.n_samples)

    def to_json(self, path: str, extra: dict = None) -> None:
        obj = {
            "variant": self.variant,
            "grid": [float(g) for g in self.grid],
            "matrix": [[float(v) for v in row] for row in self.matrix],
            "kill": [float(v) for v in self.kill],
            "n_samples": self.n_samples,
        }
        if extra:
            obj.update(extra)
        with open(path, "w") as f:
            json.dump(obj, f)
            f.write("\n")


@dataclass
class SpectralResult:
    lambda0: float
    lambda1_mod: float
    h0: np.ndarray                   # right eigenvector, positive
    h0_star: np.ndarray              # left eigenvector, positive
    pi0: np.ndarray                  # normalized h0_star
    residuals: dict
    one_minus_lambda0: float         # pi0 . kill, cancellation-free

    def to_json(self, path: str) -> None:
        obj = {
            "lambda0": self.lambda0,
            "lambda1_mod": self.lambda1_mod,
            "one_minus_lambda0": self.one_minus_lambda0,
            "h0": [float(v) for v in self.h0],
            "h0_star": [float(v) for v in self.h0_star],
            "pi0": [float(v) for v in self.pi0],
            "residuals": self.residuals,
        }
        with open(path, "w") as f:
            json.dump(obj, f)
            f.write("\n")


def default_grid(variant: str, delta: float, n_cells: int = 128) -> np.ndarray:
    """Ks: n cells over [-1.6, 1-delta]; Ku: n cells over (0, 2 delta) in
    the recentred coordinate rho = 1 - r."""
    if variant == "Ks":
        return np.linspace(-1.6, 1.0 - delta, n_cells + 1)
    if variant == "Ku":
        return np.linspace(0.0, 2.0 * delta, n_cells + 1)
    raise ValueError("variant must be 'Ks' or 'Ku'")


def estimate_kernel(model: PolarModel, config: sim.SimConfig, grid: np.ndarray,
                    variant: str, samples_per_row: int = 1000,
                    block: int = 65536) -> KernelEstimate:
    """Monte Carlo estimate of the one-step Poincare kernel on a grid.

    Row i launches ``samples_per_row`` paths from the cell midpoint; the
    landing cell at phase 1 (or the killing cause) is tallied.  Rows sum to
    one with the kill mass by construction.  Raises AllKilled when a row
    never survives (grid reaching into a forbidden region).
    """
    if samples_per_row < 1:
        raise ValueError("samples_per_row must be positive")
    grid = np.asarray(grid, dtype=float)
    n = len(grid) - 1
    mids = 0.5 * (grid[:-1] + grid[1:])
    context = sim.CTX_KERNEL_KS if variant == "Ks" else sim.CTX_KERNEL_KU

    counts = np.zeros((n, n), dtype=np.int64)
    kill_hi = np.zeros(n, dtype=np.int64)
    kill_lo = np.zeros(n, dtype=np.int64)
    out_of_grid = np.zeros(n, dtype=np.int64)

    total = n * samples_per_row
    for start in range(0, total, block):
        stop = min(start + block, total)
        flat = np.arange(start, stop, dtype=np.int64)
        rows = flat // samples_per_row
        r0s = mids[rows]
        landing, cause = sim.poincare_step_batch(model, config, r0s, flat,
                                                 variant, context)
        for row in np.unique(rows):
            mask = rows == row
            land = landing[mask]
            cs = cause[mask]
            kill_hi[row] += int(np.count_nonzero(cs == 1))
            kill_lo[row] += int(np.count_nonzero(cs == 2))
            ok = cs == 0
            if ok.any():
                cells = np.searchsorted(grid, land[ok], side="right") - 1
                inside = (cells >= 0) & (cells < n)
                out_of_grid[row] += int(np.count_nonzero(~inside))
                np.add.at(counts[row], cells[inside], 1)

    # landings outside the grid range count as killed at the nearer boundary;
    # with grids matching the killing levels this is a measure-zero event
    kill = (kill_hi + kill_lo + out_of_grid) / samples_per_row
    matrix = counts / samples_per_row
    if np.any(kill >= 1.0 - 1e-15):
        bad = int(np.argmax(kill))
        raise AllKilled(f"row {bad} (midpoint {mids[bad]:.4f}) never survives")
    return KernelEstimate(grid=grid, matrix=matrix, kill=kill,
                          n_samples=samples_per_row, variant=variant,
                          kill_hi=kill_hi / samples_per_row,
                          kill_lo=kill_lo / samples_per_row)


# ---------------------------------------------------------------------------
# spectral analysis


def principal_eigs(K, dense_limit: int = 512, tol: float = 1e-12,
                   max_iter: int = 100000) -> SpectralResult:
    """Principal eigenvalue and eigenfunctions of a (sub)stochastic matrix.

    Dense solve for small matrices, power iteration with deflated second
    eigenvalue otherwise.  h0 and h0_star are sign-fixed positive; raises
    NonConvergence if power iteration stalls (near-degenerate gap) and no
    dense fallback is possible.
    """
    A = K.matrix if hasattr(K, "matrix") else np.asarray(K, dtype=float)
    n = A.shape[0]
    if A.shape != (n, n):
        raise ValueError("matrix must be square")
    if np.any(A < 0):
        raise ValueError("matrix entries must be nonnegative")

    if n <= dense_limit:
        evals, evecs = np.linalg.eig(A)
        order = np.argsort(-np.abs(evals))
        lam0 = evals[order[0]]
        if abs(lam0.imag) > 1e-10 * max(abs(lam0), 1.0):
            raise NonConvergence("leading eigenvalue not real")
        lam0 = float(lam0.real)
        lam1 = float(np.abs(evals[order[1]])) if n > 1 else 0.0
        h0 = np.real(evecs[:, order[0]])
        evalsL, evecsL = np.linalg.eig(A.T)
        orderL = np.argsort(-np.abs(evalsL))
        h0s = np.real(evecsL[:, orderL[0]])
    else:
        h0 = np.ones(n)
        h0s = np.ones(n)
        lam0 = 0.0
        for it in range(max_iter):
            v = A @ h0
            w = A.T @ h0s
            lam_new = float(np.linalg.norm(v))
            v /= max(lam_new, 1e-300)
            w /= max(float(np.linalg.norm(w)), 1e-300)
            if np.linalg.norm(v - h0) < tol and abs(lam_new - lam0) < tol:
                h0, h0s, lam0 = v, w, lam_new
                break
            h0, h0s, lam0 = v, w, lam_new
        else:
            raise NonConvergence("power iteration did not converge")
        # deflated iteration for |lambda1|
        x = np.random.default_rng(0).standard_normal(n)
        x -= h0 * (h0s @ x) / max(float(h0s @ h0), 1e-300)
        lam1 = 0.0
        for it in range(max_iter):
            x = A @ x
            x -= h0 * (h0s @ x) / max(float(h0s @ h0), 1e-300)
            nrm = float(np.linalg.norm(x))
            if nrm == 0.0:
                break
            x /= nrm
            if it > 10 and abs(nrm - lam1) < tol:
                lam1 = nrm
                break
            lam1 = nrm

    # sign fix: Perron eigenvectors are positive on the support
    for vec in (h0, h0s):
        s = np.sign(vec[np.argmax(np.abs(vec))])
        vec *= s if s != 0 else 1.0
    h0 = np.where(np.abs(h0) < 1e-300, 0.0, h0)
    h0s = np.where(np.abs(h0s) < 1e-300, 0.0, h0s)

    pi0 = h0s / h0s.sum()
    if hasattr(K, "kill"):
        one_minus = float(pi0 @ K.kill)
    else:
        one_minus = float(pi0 @ (1.0 - A.sum(axis=1)))

    res = {
        "right": float(np.max(np.abs(A @ h0 - lam0 * h0))),
        "left": float(np.max(np.abs(A.T @ h0s - lam0 * h0s))),
    }
    return SpectralResult(lambda0=lam0, lambda1_mod=lam1, h0=h0, h0_star=h0s,
                          pi0=pi0, residuals=res, one_minus_lambda0=one_minus)


def qsd(result: SpectralResult) -> np.ndarray:
    """Quasistationary distribution: the normalized left principal
    eigenfunction."""
    if np.any(result.h0_star < -1e-12 * np.max(np.abs(result.h0_star))):
        raise ValueError("left eigenfunction is not positive")
    return result.pi0


def eig_sandwich(K, A_cells: np.ndarray, n: int, lambda0: Optional[float] = None,
                 slack: float = 0.0):
    """Matrix-power sandwich for the principal eigenvalue:

        [inf_{x in A} K_n(x, A)]^{1/n} <= lambda0 <= [sup_x K_n(x, E)]^{1/n}.

    Returns (lower, upper, holds).  ``slack`` loosens the comparison by the
    caller's Monte Carlo error estimate.
    """
    M = K.matrix if hasattr(K, "matrix") else np.asarray(K, dtype=float)
    A_cells = np.asarray(A_cells, dtype=int)
    if len(A_cells) == 0:
        raise ValueError("A must be nonempty")
    if n < 1:
        raise ValueError("n must be >= 1")
    Mn = np.linalg.matrix_power(M, n)
    lower = float(np.min(Mn[np.ix_(A_cells, A_cells)].sum(axis=1))) ** (1.0 / n)
    upper = float(np.max(Mn.sum(axis=1))) ** (1.0 / n)
    if lambda0 is None:
        lambda0 = principal_eigs(K).lambda0
    holds = (lower <= lambda0 + slack) and (lambda0 <= upper + slack)
    return lower, upper, bool(holds)


@dataclass
class GapBound:
    bound: float
    hypothesis_ok: bool
    L: float
    gamma_bar: float
    p_kill: float
    lambda0: float


def gap_bound(K, A_cells: np.ndarray, lambda0: Optional[float] = None) -> GapBound:
    """Density-ratio bound on the nonprincipal spectrum:

        |lambda| <= max(2 gbar, lambda0 L - 1 + p_kill + gbar L0)

    with L = max_{x,y in A} k(x,y)/min_{x in A} k(x,y), gbar the worst mass
    sent outside A, p_kill the worst killing in A, and
    L0 = (lambda0 L/(lambda0 L - 1)) (1 + 1/(lambda0 - gbar)).  Requires the
    density min to be positive on A (ZeroDensity otherwise) and the
    hypothesis lambda0 L > 1.
    """
    M = K.matrix if hasattr(K, "matrix") else np.asarray(K, dtype=float)
    kill = K.kill if hasattr(K, "kill") else 1.0 - M.sum(axis=1)
    A_cells = np.asarray(A_cells, dtype=int)
    sub = M[np.ix_(A_cells, A_cells)]
    m = sub.min(axis=0)
    if np.any(m <= 0.0):
        raise ZeroDensity("k(x, y) vanishes for some y in A; shrink A")
    L = float(np.max(sub / m[None, :]))
    all_idx = np.arange(M.shape[0])
    outside = np.setdiff1d(all_idx, A_cells)
    gamma_bar = float(np.max(M[:, outside].sum(axis=1))) if len(outside) else 0.0
    p_kill = float(np.max(kill[A_cells]))
    if lambda0 is None:
        lambda0 = principal_eigs(K).lambda0
    if gamma_bar < 1e-15:
        # the gamma term vanishes identically; the bound degenerates to
        # lambda0 L - 1 + p_kill and equality lambda0 L = 1 is admissible
        ok = lambda0 * L >= 1.0
        bound = lambda0 * L - 1.0 + p_kill if ok else float("inf")
    else:
        ok = lambda0 * L > 1.0 and lambda0 > gamma_bar
        if ok:
            main = (lambda0 * L - 1.0 + p_kill
                    + gamma_bar * (lambda0 * L / (lambda0 * L - 1.0))
                    * (1.0 + 1.0 / (lambda0 - gamma_bar)))
            bound = max(2.0 * gamma_bar, main)
        else:
            bound = float("inf")
    return GapBound(bound=bound, hypothesis_ok=bool(ok), L=L,
                    gamma_bar=gamma_bar, p_kill=p_kill, lambda0=lambda0)


def laplace_identity(K, A_cells: np.ndarray, u: float) -> float:
    """Residual of the hitting-functional identity K H = e^{-u} G.

    G(x) = E_x[e^{u tau_A}; tau_A < inf], H = 1 on A and G on the
    complement; G on the complement solves the linear system
    (I - e^u K_BB) g = e^u K_BA 1, which is a contraction iff
    e^{-u} > gamma(A) = sup_{x not in A} K(x, E \\ A).
    """
    M = K.matrix if hasattr(K, "matrix") else np.asarray(K, dtype=float)
    nn = M.shape[0]
    A_cells = np.asarray(A_cells, dtype=int)
    B = np.setdiff1d(np.arange(nn), A_cells)
    eu = math.exp(u)

    gamma_A = float(np.max(M[np.ix_(B, B)].sum(axis=1))) if len(B) else 0.0
    if math.exp(-u) <= gamma_A:
        raise OutsideConvergenceRegion(
            f"need e^-u > gamma(A) = {gamma_A:.6g}, got {math.exp(-u):.6g}")

    G = np.empty(nn)
    if len(B):
        K_BB = M[np.ix_(B, B)]
        K_BA = M[np.ix_(B, A_cells)]
        rhs = eu * K_BA.sum(axis=1)
        g_B = np.linalg.solve(np.eye(len(B)) - eu * K_BB, rhs)
        G[B] = g_B
    # one-step formula on A
    H = np.empty(nn)
    H[A_cells] = 1.0
    if len(B):
        H[B] = G[B]
    G[A_cells] = eu * (M[np.ix_(A_cells, A_cells)].sum(axis=1)
                       + (M[np.ix_(A_cells, B)] @ G[B] if len(B) else 0.0))

    resid = float(np.max(np.abs(M @ H - math.exp(-u) * G)))
    return resid


# ---------------------------------------------------------------------------
# synthetic kernels for exactness tests


def rank_one_kernel(lam: float, v: np.ndarray, w: np.ndarray) -> np.ndarray:
    """K = lam v w^T with v, w > 0 and w . v = 1: spectrum {lam, 0}."""
    v = np.asarray(v, dtype=float)
    w = np.asarray(w, dtype=float)
    w = w / float(w @ v)
    return lam * np.outer(v, w)
