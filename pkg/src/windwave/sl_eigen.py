"""
sl_eigen.py

Piecewise-linear finite elements for the transmission Sturm-Liouville
problem behind the lidded bifurcation analysis.

The Rayleigh quotient

    R(phi) = (g[[rho]] phi(p1)^2 + int a^3 phi_p^2 dp) / int a phi^2 dp

on [p0, 0] with phi(p0) = phi(0) = 0 and phi(p1) free has the weak form of
(a^3 M_p)_p = n^2 a M with [[a^3 M_p]] = g[[rho]] M at p1, so mode n
bifurcates exactly where min R = -n^2.  Here a = 1/H_p: lambda in the water
and Gamma_rel(p) in the air.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg as la

from .core import BadInputError, GammaRelProfile, NumericalFailure, PhysicalConfig


@dataclass(frozen=True)
class Grid1D:
    """Uniform elements on [p0, p1] and [p1, 0] sharing the node p1."""

    nodes: np.ndarray
    n_water: int
    n_air: int

    @classmethod
    def make(cls, p0: float, p1: float, n_water: int = 256, n_air: int | None = None) -> "Grid1D":
        n_air = n_water if n_air is None else n_air
        if min(n_water, n_air) < 8:
            raise BadInputError("need at least 8 elements per region")
        if not p0 < p1 < 0:
            raise BadInputError("need p0 < p1 < 0")
        nodes = np.concatenate([np.linspace(p0, p1, n_water + 1), np.linspace(p1, 0.0, n_air + 1)[1:]])
        return cls(nodes, n_water, n_air)

    @property
    def interface(self) -> int:
        return self.n_water

    def refine(self) -> "Grid1D":
        return Grid1D.make(self.nodes[0], self.nodes[self.n_water], 2 * self.n_water, 2 * self.n_air)


@dataclass(frozen=True)
class EigenResult:
    nu: float
    p: np.ndarray
    M: np.ndarray  # includes the Dirichlet end values
    dnu_dlam: float
    residuals: dict


def element_coefficients(cfg: PhysicalConfig, gamma_rel: GammaRelProfile, lam: float, grid: Grid1D):
    """a at element midpoints, plus a mask of water elements."""
    mid = 0.5 * (grid.nodes[1:] + grid.nodes[:-1])
    water = np.arange(mid.size) < grid.n_water
    a = np.where(water, lam, gamma_rel(np.where(water, cfg.p1, mid)))
    if np.any(a <= 0) or not np.all(np.isfinite(a)):
        raise BadInputError("coefficient a must be positive on every element")
    return a, water


def _assemble(h: np.ndarray, k_coef: np.ndarray, m_coef: np.ndarray, n: int):
    """Tridiagonal stiffness and mass on all nodes 0..n."""
    K = np.zeros((n + 1, n + 1))
    M = np.zeros((n + 1, n + 1))
    ke = k_coef / h
    me = m_coef * h / 6.0
    i = np.arange(n)
    np.add.at(K, (i, i), ke)
    np.add.at(K, (i + 1, i + 1), ke)
    np.add.at(K, (i, i + 1), -ke)
    np.add.at(K, (i + 1, i), -ke)
    np.add.at(M, (i, i), 2 * me)
    np.add.at(M, (i + 1, i + 1), 2 * me)
    np.add.at(M, (i, i + 1), me)
    np.add.at(M, (i + 1, i), me)
    return K, M


def assemble(cfg: PhysicalConfig, gamma_rel: GammaRelProfile, lam: float, grid: Grid1D):
    """Stiffness-like A and mass-like B on the interior nodes.

    A = int a^3 phi_i' phi_j' + g[[rho]] e_{p1} e_{p1}^T and B = int a phi_i phi_j.
    """
    if lam <= 0:
        raise BadInputError("lambda must be positive")
    a, _ = element_coefficients(cfg, gamma_rel, lam, grid)
    h = np.diff(grid.nodes)
    n = h.size
    A, B = _assemble(h, a**3, a, n)
    A[grid.interface, grid.interface] += cfg.gjump
    return A[1:-1, 1:-1], B[1:-1, 1:-1]


def min_eigenpair(A: np.ndarray, B: np.ndarray) -> tuple[float, np.ndarray]:
    """Smallest eigenpair of A v = nu B v, v normalized to v^T B v = 1."""
    try:
        w, v = la.eigh(A, B, subset_by_index=[0, 0])
        nu, vec = float(w[0]), v[:, 0]
    except (la.LinAlgError, ValueError):
        nu, vec = _inverse_iteration(A, B)
    if not math.isfinite(nu) or not np.all(np.isfinite(vec)):
        raise NumericalFailure("generalized eigensolve returned non-finite values")
    vec = vec / math.sqrt(vec @ B @ vec)
    return nu, vec


def _inverse_iteration(A: np.ndarray, B: np.ndarray, iters: int = 200):
    # nu >= -|A|_inf / lambda_min(B) and lambda_min(B) >= min diag(B)/4 for P1 mass
    shift = -2.0 * np.abs(A).sum(axis=1).max() / (0.25 * np.diag(B).min()) - 1.0
    try:
        lu = la.lu_factor(A - shift * B)
    except la.LinAlgError as exc:
        raise NumericalFailure(f"inverse iteration failed: {exc}") from exc
    v = np.ones(A.shape[0])
    nu = float("nan")
    for _ in range(iters):
        v = la.lu_solve(lu, B @ v)
        v /= math.sqrt(v @ B @ v)
        new = float(v @ A @ v)
        if math.isfinite(nu) and abs(new - nu) <= 1e-14 * max(1.0, abs(new)):
            nu = new
            break
        nu = new
    else:
        raise NumericalFailure("inverse iteration did not converge")
    return nu, v


def _diagonals(cfg: PhysicalConfig, gamma_rel: GammaRelProfile, lam: float, grid: Grid1D):
    """Main and first off-diagonals of A and B on the interior nodes."""
    a, water = element_coefficients(cfg, gamma_rel, lam, grid)
    h = np.diff(grid.nodes)
    ke = a**3 / h
    me = a * h / 6.0
    Ad = (ke[:-1] + ke[1:]).copy()
    Bd = 2.0 * (me[:-1] + me[1:])
    Ad[grid.interface - 1] += cfg.gjump
    return Ad, -ke[1:-1], Bd, me[1:-1]


def _inertia(Ad, Ae, Bd, Be, sigma: float) -> int:
    """Number of eigenvalues of the pencil below sigma (Sylvester, LDL^T pivots)."""
    d = Ad - sigma * Bd
    e = Ae - sigma * Be
    neg = 0
    piv = d[0]
    for i in range(1, d.size):
        if piv < 0:
            neg += 1
        if piv == 0.0:
            piv = 1e-300
        piv = d[i] - e[i - 1] ** 2 / piv
    return neg + (piv < 0)


def _banded_min_eigenpair(Ad, Ae, Bd, Be):
    """Rayleigh quotient iteration started from the lumped-mass eigenvector."""
    n = Ad.size
    lump = Bd + np.concatenate([Be, [0.0]]) + np.concatenate([[0.0], Be])
    s = 1.0 / np.sqrt(lump)
    w, v = la.eigh_tridiagonal(Ad * s * s, Ae * s[:-1] * s[1:], select="i", select_range=(0, 0))
    v = v[:, 0] * s

    def mul(d, e, x):
        y = d * x
        y[:-1] += e * x[1:]
        y[1:] += e * x[:-1]
        return y

    nu = float(v @ mul(Ad, Ae, v) / (v @ mul(Bd, Be, v)))
    for _ in range(8):
        ab = np.zeros((3, n))
        ab[0, 1:] = Ae - nu * Be
        ab[1] = Ad - nu * Bd
        ab[2, :-1] = Ae - nu * Be
        try:
            v = la.solve_banded((1, 1), ab, mul(Bd, Be, v))
        except (la.LinAlgError, ValueError):
            break
        v /= np.linalg.norm(v)
        new = float(v @ mul(Ad, Ae, v) / (v @ mul(Bd, Be, v)))
        done = abs(new - nu) <= 1e-15 * max(1.0, abs(new))
        nu = new
        if done:
            break
    if not (np.all(np.isfinite(v)) and math.isfinite(nu)):
        return None
    if _inertia(Ad, Ae, Bd, Be, nu - 1e-9 * max(1.0, abs(nu))) != 0:
        return None
    return nu, v / math.sqrt(v @ mul(Bd, Be, v))


def solve(cfg: PhysicalConfig, gamma_rel: GammaRelProfile, lam: float, grid: Grid1D | None = None) -> EigenResult:
    """nu(lambda) = min R with eigenvector, sign fixed so M(p1) >= 0."""
    if grid is None:
        grid = Grid1D.make(cfg.p0, cfg.p1)
    bands = _diagonals(cfg, gamma_rel, lam, grid)
    pair = _banded_min_eigenpair(*bands)
    if pair is None:
        pair = min_eigenpair(*assemble(cfg, gamma_rel, lam, grid))
    nu, v = pair
    if v[grid.interface - 1] < 0:
        v = -v
    Ad, Ae, Bd, Be = bands
    r = (Ad - nu * Bd) * v
    r[:-1] += (Ae - nu * Be) * v[1:]
    r[1:] += (Ae - nu * Be) * v[:-1]
    # Hellmann-Feynman: dnu/dlam = v^T (A' - nu B') v, water elements only
    h = np.diff(grid.nodes)
    M = np.concatenate([[0.0], v, [0.0]])
    dM = np.diff(M)[: grid.n_water]
    Mw0, Mw1 = M[: grid.n_water], M[1 : grid.n_water + 1]
    hw = h[: grid.n_water]
    dnu = float(np.sum(3 * lam**2 * dM**2 / hw) - nu * np.sum(hw / 6.0 * (2 * Mw0**2 + 2 * Mw1**2 + 2 * Mw0 * Mw1)))
    res = {
        "eigen": float(np.max(np.abs(r))),
        "interface": _jump_residual(cfg, gamma_rel, lam, grid, M),
        "boundary": 0.0,
    }
    return EigenResult(nu, grid.nodes.copy(), M, dnu, res)


def _jump_residual(cfg, gamma_rel, lam, grid, M) -> float:
    """|[[a^3 M_p]] - g[[rho]] M(p1)| by second-order one-sided differences."""
    i = grid.interface
    p = grid.nodes
    hw = p[i] - p[i - 1]
    ha = p[i + 1] - p[i]
    dw = (3 * M[i] - 4 * M[i - 1] + M[i - 2]) / (2 * hw)
    da = (-3 * M[i] + 4 * M[i + 1] - M[i + 2]) / (2 * ha)
    ga = float(gamma_rel(np.array(cfg.p1)))
    return abs(ga**3 * da - lam**3 * dw - cfg.gjump * M[i])


def nu(cfg: PhysicalConfig, gamma_rel: GammaRelProfile, lam: float, elements: int = 256) -> float:
    return solve(cfg, gamma_rel, lam, Grid1D.make(cfg.p0, cfg.p1, elements)).nu


def rayleigh_quotient(cfg: PhysicalConfig, gamma_rel: GammaRelProfile, lam: float, grid: Grid1D, v: np.ndarray) -> float:
    """v^T A v / v^T B v for interior nodal values v."""
    A, B = assemble(cfg, gamma_rel, lam, grid)
    return float(v @ A @ v / (v @ B @ v))


def zero_mode_check(cfg: PhysicalConfig, lam: float, rtol: float = 1e-9) -> bool:
    """True iff lambda^3 = -g[[rho]] (p1 - p0), the zero-mode degeneracy."""
    target = -cfg.gjump * (cfg.p1 - cfg.p0)
    return abs(lam**3 - target) <= rtol * max(1.0, target)
