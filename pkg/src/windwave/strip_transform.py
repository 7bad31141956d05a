"""
strip_transform.py

Flattening map for the unbounded regimes, transformed elliptic solves on a
truncated strip and the interface operator G.

Physical domain: water −1 < y < eta(x), air y > eta(x), x in one 2 pi period.
The map T(x, y) = (x, T2(x, y)) sends the surface to ybar = 0 and the bed to
ybar = −1, with

    T2 = (y − eta)/(1 + eta) chi(y) + y (1 − chi(y)),

chi = 1 for y <= 1, 0 for y >= 2 and a quintic blend in between.  For
Psi = psi o S (S = T^-1) the Laplacian becomes

    Psi_xx + 2 A12 Psi_xy + A22 Psi_yy + B2 Psi_y,

A12 = T2_x, A22 = T2_x^2 + T2_y^2, B2 = T2_xx + T2_yy, all evaluated at S.
Cosine collocation in xbar times second-order differences in ybar (uniform
in water, exponentially stretched in air); the air strip is closed at
ybar_max by the exact modal far-field condition.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .core import BadInputError, NumericalFailure, PhysicalConfig, Regime, require_2pi, require_regime
from .height_pde import cosine_matrices, fd_weights
from .laminar import q_unbounded

log = logging.getLogger(__name__)


# --- cutoff ------------------------------------------------------------------

def chi(y):
    """(chi, chi', chi'') for the quintic cutoff: 1 below y = 1, 0 above y = 2."""
    y = np.asarray(y, dtype=float)
    t = np.clip(y - 1.0, 0.0, 1.0)
    inside = (y > 1.0) & (y < 2.0)
    c = 1.0 - (10 * t**3 - 15 * t**4 + 6 * t**5)
    c1 = np.where(inside, -(30 * t**2 - 60 * t**3 + 30 * t**4), 0.0)
    c2 = np.where(inside, -(60 * t - 180 * t**2 + 120 * t**3), 0.0)
    return c, c1, c2


# --- surfaces and grids ------------------------------------------------------

@dataclass(frozen=True)
class SurfaceShape:
    """eta(x) = sum_{k>=1} coeffs[k] cos(k x); coeffs[0] must vanish."""

    coeffs: np.ndarray

    def __post_init__(self) -> None:
        c = np.asarray(self.coeffs, dtype=float)
        if c.ndim != 1 or c.size < 1 or not np.all(np.isfinite(c)):
            raise BadInputError("surface coefficients must be a finite 1-D array")
        if c[0] != 0.0:
            raise BadInputError("surface must have zero mean (coeffs[0] == 0)")
        object.__setattr__(self, "coeffs", c)

    @classmethod
    def mode(cls, k: int, amp: float = 1.0, K: int | None = None) -> "SurfaceShape":
        c = np.zeros(max(k, K or 0) + 1)
        c[k] = amp
        return cls(c)

    @classmethod
    def flat(cls) -> "SurfaceShape":
        return cls(np.zeros(1))

    @property
    def norm(self) -> float:
        return float(np.sum(np.abs(self.coeffs)))

    def scaled(self, eps: float) -> "SurfaceShape":
        return SurfaceShape(eps * self.coeffs)

    def evaluate(self, x):
        """(eta, eta_x, eta_xx) at x."""
        x = np.asarray(x, dtype=float)
        k = np.arange(self.coeffs.size)
        c = np.cos(np.multiply.outer(x, k))
        s = np.sin(np.multiply.outer(x, k))
        return c @ self.coeffs, -(s * k) @ self.coeffs, -(c * k**2) @ self.coeffs


@dataclass(frozen=True, eq=False)
class StripGrid:
    nx: int
    x: np.ndarray
    C: np.ndarray
    Dx: np.ndarray
    Dxx: np.ndarray
    y_water: np.ndarray  # -1 .. 0
    y_air: np.ndarray  # 0 .. y_max
    stretch: float

    @classmethod
    def make(cls, nx: int = 16, n_water: int = 800, n_air: int = 1600, y_max: float = 8.0,
             stretch: float = 4.0) -> "StripGrid":
        if y_max < 8.0:
            raise BadInputError("y_max must be at least 8")
        if nx < 4 or min(n_water, n_air) < 16:
            raise BadInputError("strip grid too coarse")
        x, C, Dx, Dxx = cosine_matrices(nx)
        yw = np.linspace(-1.0, 0.0, n_water + 1)
        xi = np.linspace(0.0, 1.0, n_air + 1)
        ya = y_max * np.expm1(stretch * xi) / math.expm1(stretch) if stretch > 0 else y_max * xi
        return cls(nx, x, C, Dx, Dxx, yw, ya, stretch)

    def refine(self) -> "StripGrid":
        return StripGrid.make(self.nx, 2 * (self.y_water.size - 1), 2 * (self.y_air.size - 1),
                              float(self.y_air[-1]), self.stretch)

    def taller(self, factor: float = 1.5) -> "StripGrid":
        n = int(round(factor * (self.y_air.size - 1)))
        return StripGrid.make(self.nx, self.y_water.size - 1, n, factor * float(self.y_air[-1]), self.stretch * factor)

    def air_map_derivatives(self):
        """(m', m'') of ybar = m(xi) for the air nodes, or (None, None) if uniform."""
        if self.stretch <= 0:
            return None, None
        xi = np.linspace(0.0, 1.0, self.y_air.size)
        b = self.stretch
        m1 = self.y_max * b * np.exp(b * xi) / math.expm1(b)
        return m1, b * m1

    @property
    def y_max(self) -> float:
        return float(self.y_air[-1])


def _diff3(y: np.ndarray, dy: np.ndarray | None = None, d2y: np.ndarray | None = None):
    """Sparse second-order first and second derivative matrices on nodes y.

    When y = m(xi) on a uniform xi grid, pass dy = m'(xi) and d2y = m''(xi):
    differences are then taken in xi and mapped by the chain rule, which
    keeps second-order accuracy on strongly stretched grids.
    """
    n = y.size
    xi = y if dy is None else np.linspace(0.0, 1.0, n)
    r1, c1, v1, r2, c2, v2 = [], [], [], [], [], []
    for j in range(n):
        idx = [0, 1, 2] if j == 0 else ([n - 3, n - 2, n - 1] if j == n - 1 else [j - 1, j, j + 1])
        w1 = fd_weights(xi[j], xi[idx], 1)
        w2 = fd_weights(xi[j], xi[idx], 2) if 0 < j < n - 1 else None
        if dy is not None:
            if w2 is not None:
                w2 = (w2 - d2y[j] / dy[j] * w1) / dy[j] ** 2
            w1 = w1 / dy[j]
        r1 += [j] * 3
        c1 += idx
        v1 += list(w1)
        if w2 is not None:
            r2 += [j] * 3
            c2 += idx
            v2 += list(w2)
    D1 = sp.csr_matrix((v1, (r1, c1)), shape=(n, n))
    D2 = sp.csr_matrix((v2, (r2, c2)), shape=(n, n))
    return D1, D2


# --- flattening coefficients -------------------------------------------------

def _t2_partials(x, y, surf: SurfaceShape):
    """T2 and its partial derivatives at physical points (x, y)."""
    eta, ex, exx = surf.evaluate(x)
    c, c1, c2 = chi(y)
    one = 1.0 + eta
    # T2 = y + chi G with G = -eta (1 + y)/(1 + eta), so eta = 0 gives the identity exactly
    G = -eta * (1 + y) / one
    Gx = -ex * (1 + y) / one**2
    Gy = -eta / one
    Gxx = -(1 + y) * (exx * one - 2 * ex**2) / one**3
    T2 = y + c * G
    Tx = c * Gx
    Ty = 1.0 + c1 * G + c * Gy
    Txx = c * Gxx
    Tyy = c2 * G + 2 * c1 * Gy
    return {"T2": T2, "x": Tx, "y": Ty, "xx": Txx, "yy": Tyy}


def inverse_map(surf: SurfaceShape, x: np.ndarray, ybar: np.ndarray, tol: float = 1e-14, max_iter: int = 50):
    """Physical y = S2(x, ybar) on the tensor grid (x rows, ybar columns)."""
    X = np.broadcast_to(np.asarray(x, dtype=float)[:, None], (x.size, ybar.size))
    YB = np.broadcast_to(np.asarray(ybar, dtype=float)[None, :], X.shape)
    eta = surf.evaluate(x)[0][:, None]
    y = (1 + eta) * YB + eta  # exact where chi = 1
    blend = y > 1.0
    y = np.where(blend, np.clip(YB, 1.0, None), y)
    for _ in range(max_iter):
        if not blend.any():
            break
        d = _t2_partials(X, y, surf)
        if np.any(d["y"][blend] <= 0):
            raise NumericalFailure("flattening map is not monotone in y (amplitude too large)")
        step = np.where(blend, (d["T2"] - YB) / d["y"], 0.0)
        y = y - step
        if np.max(np.abs(step)) <= tol * max(1.0, float(np.max(np.abs(y)))):
            break
    else:
        raise NumericalFailure("inverse flattening map did not converge")
    return y


def flatten_coeffs(surf: SurfaceShape, grid: StripGrid, region: str) -> dict:
    """A11 = 1, A12, A22, B1 = 0, B2 and the gradient factors C on one region.

    C_ij d_i Psi gives the physical gradient: psi_x = Psi_x + C21 Psi_y with
    C21 = T2_x, psi_y = C22 Psi_y with C22 = T2_y.
    """
    if surf.norm >= 1.0:
        raise BadInputError("surface amplitude must stay below the unit depth")
    ybar = grid.y_water if region == "water" else grid.y_air
    y = inverse_map(surf, grid.x, ybar)
    X = np.broadcast_to(grid.x[:, None], y.shape)
    d = _t2_partials(X, y, surf)
    return {
        "y": y,
        "A11": np.ones_like(y),
        "A12": d["x"],
        "A22": d["x"] ** 2 + d["y"] ** 2,
        "B1": np.zeros_like(y),
        "B2": d["xx"] + d["yy"],
        "C11": np.ones_like(y),
        "C12": np.zeros_like(y),
        "C21": d["x"],
        "C22": d["y"],
    }


# --- elliptic solves ---------------------------------------------------------

@lru_cache(maxsize=8)
def _ops(grid: StripGrid, region: str):
    """Kronecker derivative operators plus the fixed boundary rows of one region."""
    if region == "water":
        D1, D2 = _diff3(grid.y_water)
    else:
        D1, D2 = _diff3(grid.y_air, *grid.air_map_derivatives())
    nx1, ny = grid.nx + 1, D1.shape[0]
    Ix = sp.identity(nx1, format="csr")
    Iy = sp.identity(ny, format="csr")
    base = np.arange(nx1) * ny
    bottom, top = base, base + ny - 1
    rows, cols, vals = list(bottom), list(bottom), [1.0] * nx1
    if region == "water":
        rows += list(top)
        cols += list(top)
        vals += [1.0] * nx1
    else:
        # modal closure: sum_i C[k, i] (phi_y + k phi)(x_i, top) = 0
        d1 = D1.getrow(ny - 1).toarray().ravel()
        nz = np.nonzero(d1)[0]
        for k in range(nx1):
            for i in range(nx1):
                rows += [top[k]] * nz.size
                cols += list(base[i] + nz)
                vals += list(grid.C[k, i] * (d1[nz] + k * (nz == ny - 1)))
    n = nx1 * ny
    keep = np.ones(n)
    keep[bottom] = keep[top] = 0.0
    return {
        "D1": D1,
        "xx": sp.kron(sp.csr_matrix(grid.Dxx), Iy, format="csr"),
        "xy": sp.kron(sp.csr_matrix(grid.Dx), D1, format="csr"),
        "yy": sp.kron(Ix, D2, format="csr"),
        "y": sp.kron(Ix, D1, format="csr"),
        "keep": keep,
        "boundary": sp.csr_matrix((vals, (rows, cols)), shape=(n, n)),
        "bottom": bottom,
        "top": top,
    }


def _operator(coef: dict, grid: StripGrid, region: str):
    """Transformed Laplacian with its boundary rows, and the interior source."""
    ops = _ops(grid, region)
    k = ops["keep"]
    A = (
        sp.diags(k) @ ops["xx"]
        + sp.diags(k * 2 * coef["A12"].ravel()) @ ops["xy"]
        + sp.diags(k * coef["A22"].ravel()) @ ops["yy"]
        + sp.diags(k * coef["B2"].ravel()) @ ops["y"]
        + ops["boundary"]
    )
    return A, ops


def _solve(A, rhs):
    try:
        out = spla.splu(A.tocsc()).solve(rhs)
    except RuntimeError as exc:
        raise NumericalFailure(f"strip solve failed: {exc}") from exc
    if not np.all(np.isfinite(out)):
        raise NumericalFailure("strip solve returned non-finite values")
    return out


def _phi_water(cfg: PhysicalConfig, surf: SurfaceShape, grid: StripGrid, coef: dict) -> np.ndarray:
    """phi = Psi − p0 ybar on the water strip, zero on both boundaries."""
    A, ops = _operator(coef, grid, "water")
    rhs = -cfg.p0 * coef["B2"].ravel() * ops["keep"]
    return _solve(A, rhs).reshape(grid.nx + 1, grid.y_water.size)


def _phi_air(cfg: PhysicalConfig, lam: float, surf: SurfaceShape, grid: StripGrid, coef: dict) -> np.ndarray:
    """phi = Psi + lambda ybar on the air strip, decaying mode by mode at the top."""
    A, ops = _operator(coef, grid, "air")
    rhs = lam * coef["B2"].ravel() * ops["keep"]
    rhs[ops["bottom"]] = 0.5 * cfg.gamma0 * surf.evaluate(grid.x)[0] ** 2
    return _solve(A, rhs).reshape(grid.nx + 1, grid.y_air.size)


def solve_psi_water(cfg: PhysicalConfig, lam: float, surf: SurfaceShape, grid: StripGrid,
                    coef: dict | None = None) -> np.ndarray:
    """Psi on the water strip: Psi = −p0 at ybar = −1, Psi = 0 at ybar = 0."""
    coef = flatten_coeffs(surf, grid, "water") if coef is None else coef
    return cfg.p0 * grid.y_water[None, :] + _phi_water(cfg, surf, grid, coef)


def solve_psi_air(cfg: PhysicalConfig, lam: float, surf: SurfaceShape, grid: StripGrid,
                  coef: dict | None = None, check_truncation: bool = False, tol: float = 1e-6) -> np.ndarray:
    """Psi (or the harmonic modified Psi~ in the shear regime) on the air strip.

    Surface datum 0, or gamma0 eta^2/2 for the modified function.  At ybar_max
    the mean mode satisfies Psi_y = −lambda and mode k >= 1 satisfies
    Psi_y + k Psi = 0.  With check_truncation the surface derivative is
    compared against a strip 1.5 times taller.
    """
    coef = flatten_coeffs(surf, grid, "air") if coef is None else coef
    phi = _phi_air(cfg, lam, surf, grid, coef)
    if check_truncation:
        tall = grid.taller()
        other = _phi_air(cfg, lam, surf, tall, flatten_coeffs(surf, tall, "air"))
        diff = float(np.max(np.abs(surface_derivative(phi, grid, "air") - surface_derivative(other, tall, "air"))))
        if diff > tol:
            raise NumericalFailure(f"truncation sensitivity {diff:.3e} exceeds {tol:g}")
    return -lam * grid.y_air[None, :] + phi


def surface_derivative(psi: np.ndarray, grid: StripGrid, region: str) -> np.ndarray:
    """d Psi / d ybar at ybar = 0 from the given side (second-order one-sided)."""
    y = grid.y_water if region == "water" else grid.y_air
    if region == "water":
        idx = [y.size - 3, y.size - 2, y.size - 1]
        w = fd_weights(0.0, y[idx], 1)
        return psi[:, idx] @ w
    m1, _ = grid.air_map_derivatives()
    if m1 is None:
        return psi[:, :3] @ fd_weights(0.0, y[:3], 1)
    h = 1.0 / (y.size - 1)
    return psi[:, :3] @ (np.array([-1.5, 2.0, -0.5]) / (h * m1[0]))


# --- interface operator --------------------------------------------------------

@dataclass
class StripSolver:
    """Caches per-surface coefficients and evaluates G for several lambda."""

    cfg: PhysicalConfig
    grid: StripGrid

    def __post_init__(self) -> None:
        require_regime(self.cfg, [Regime.UNBOUNDED_IRROTATIONAL, Regime.UNBOUNDED_SHEAR], "strip_transform")
        require_2pi(self.cfg)
        if self.cfg.depth_d != 1.0:
            raise BadInputError("the strip solver is normalized to unit depth")
        self._cache: dict = {}

    def _coef(self, surf: SurfaceShape):
        key = surf.coeffs.tobytes()
        if key not in self._cache:
            if len(self._cache) > 16:
                self._cache.clear()
            self._cache[key] = (flatten_coeffs(surf, self.grid, "water"), flatten_coeffs(surf, self.grid, "air"))
        return self._cache[key]

    def G(self, lam: float, surf: SurfaceShape, Q: float | None = None) -> np.ndarray:
        cfg, grid = self.cfg, self.grid
        Q = q_unbounded(cfg, lam) if Q is None else Q
        cw, ca = self._coef(surf)
        phi_w = _phi_water(cfg, surf, grid, cw)
        phi_a = _phi_air(cfg, lam, surf, grid, ca)
        eta = surf.evaluate(grid.x)[0]

        def grad2(phi, slope, coef, region, j):
            px = grid.Dx @ phi[:, j]
            py = slope + surface_derivative(phi, grid, region)
            gx = px + coef["C21"][:, j] * py
            gy = coef["C22"][:, j] * py
            return gx**2 + gy**2, gy

        gw, _ = grad2(phi_w, cfg.p0, cw, "water", -1)
        ga, gya = grad2(phi_a, -lam, ca, "air", 0)
        out = ga - gw + 2 * cfg.gjump * (1 + eta) - Q
        if cfg.regime is Regime.UNBOUNDED_SHEAR:
            # 2 [[gamma S2 C_i2 d_i Psi~]]: air side only, S2 = eta on the surface
            out = out + 2 * cfg.gamma0 * eta * gya
        return out


def evaluate_G(cfg: PhysicalConfig, lam: float, surf: SurfaceShape, Q: float | None = None,
               grid: StripGrid | None = None) -> np.ndarray:
    """Pointwise interface residual G(lambda, eta) − Q at the xbar nodes."""
    return StripSolver(cfg, StripGrid.make() if grid is None else grid).G(lam, surf, Q)


def linearize_G_fd(cfg: PhysicalConfig, lam: float, zeta: SurfaceShape, grid: StripGrid | None = None,
                   eps: float = 1e-5, solver: StripSolver | None = None) -> np.ndarray:
    """Central difference (G(eps zeta) − G(−eps zeta)) / (2 eps) at the xbar nodes."""
    if solver is None:
        solver = StripSolver(cfg, StripGrid.make() if grid is None else grid)
    if not np.any(zeta.coeffs):
        return np.zeros(solver.grid.x.size)
    Q = q_unbounded(cfg, lam)
    plus = solver.G(lam, zeta.scaled(eps), Q)
    minus = solver.G(lam, zeta.scaled(-eps), Q)
    return (plus - minus) / (2 * eps)


def fd_multiplier(cfg: PhysicalConfig, lam: float, k: int, grid: StripGrid | None = None,
                  solver: StripSolver | None = None) -> float:
    """Mode-k cosine coefficient of the linearized G applied to cos(k xbar)."""
    if solver is None:
        solver = StripSolver(cfg, StripGrid.make() if grid is None else grid)
    out = linearize_G_fd(cfg, lam, SurfaceShape.mode(k), solver=solver)
    return float(solver.grid.C[k] @ out)
