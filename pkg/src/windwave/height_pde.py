"""
height_pde.py

Height-equation formulation of the lidded problems and the numerically
continued bifurcating branch.

Unknown: h = H(p; lambda_b) + w(q, p), with H the laminar profile at a fixed
base lambda_b (taken as lambda*) and w a perturbation on two tensor grids:
cosine collocation in q (even, 2 pi periodic) times uniform nodes in p on
[p0, p1] and [p1, 0].  The interface row appears in both grids and the two
copies are tied by a continuity equation; p-derivatives are 4th-order
finite differences of w plus exact derivatives of H, so every laminar flow
solves the discrete system to round-off.

Residual blocks, laid out like the unknowns:
  water j = 0      h                                    (bed)
  water interior   (1+h_q^2) h_pp + h_qq h_p^2 - 2 h_q h_p h_pq
  water j = N      Q - [[(1+h_q^2)/h_p^2]] - 2 g[[rho]] h      (interface)
  air   j = 0      h_air - h_water                       (continuity)
  air   interior   same as water plus gamma(-p) h_p^3
  air   j = N      h - ell - d(h)                        (lid)
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np
import scipy.linalg as la

from . import sl_eigen
from .core import (
    BadInputError,
    GammaRelProfile,
    NumericalFailure,
    PhysicalConfig,
    Regime,
    StagnationError,
    gamma_rel_ideal,
    gamma_rel_profile,
    require_2pi,
)
from .dispersion import eigenfunction_ideal
from .laminar import LaminarFlow, laminar_shear

log = logging.getLogger(__name__)


def fd_weights(x0: float, x: np.ndarray, m: int) -> np.ndarray:
    """Finite-difference weights for the m-th derivative at x0 (Fornberg)."""
    n = len(x)
    c = np.zeros((n, m + 1))
    c1, c4 = 1.0, x[0] - x0
    c[0, 0] = 1.0
    for i in range(1, n):
        mn = min(i, m)
        c2, c5, c4 = 1.0, c4, x[i] - x0
        for j in range(i):
            c3 = x[i] - x[j]
            c2 *= c3
            if j == i - 1:
                for k in range(mn, 0, -1):
                    c[i, k] = c1 * (k * c[i - 1, k - 1] - c5 * c[i - 1, k]) / c2
                c[i, 0] = -c1 * c5 * c[i - 1, 0] / c2
            for k in range(mn, 0, -1):
                c[j, k] = (c4 * c[j, k] - k * c[j, k - 1]) / c3
            c[j, 0] = c4 * c[j, 0] / c3
        c1 = c2
    return c[:, m]


def fd_matrix(x: np.ndarray, m: int) -> np.ndarray:
    """4th-order derivative matrix: centred 5-point stencils, one-sided near the ends."""
    n = len(x)
    width = 5 if m == 1 else 6
    D = np.zeros((n, n))
    for j in range(n):
        if m == 2 and 2 <= j <= n - 3:
            idx = np.arange(j - 2, j + 3)
        else:
            lo = min(max(j - width // 2, 0), n - width)
            idx = np.arange(lo, lo + width)
        D[j, idx] = fd_weights(x[j], x[idx], m)
    return D


def cosine_matrices(nq: int):
    """Nodes q_i = pi i/nq and matrices for values -> coefficients, d/dq, d2/dq2."""
    q = np.pi * np.arange(nq + 1) / nq
    k = np.arange(nq + 1)
    E = np.cos(np.outer(q, k))
    C = np.linalg.inv(E)
    S = np.sin(np.outer(q, k))
    Dq = -(S * k) @ C
    Dqq = -(E * k**2) @ C
    # constants are annihilated exactly, not just to round-off
    Dq -= np.diag(Dq.sum(axis=1))
    Dqq -= np.diag(Dqq.sum(axis=1))
    return q, C, Dq, Dqq


@dataclass(frozen=True)
class HeightGrid:
    nq: int
    q: np.ndarray
    C: np.ndarray
    Dq: np.ndarray
    Dqq: np.ndarray
    pw: np.ndarray
    pa: np.ndarray
    D1w: np.ndarray
    D2w: np.ndarray
    D1a: np.ndarray
    D2a: np.ndarray

    @classmethod
    def make(cls, cfg: PhysicalConfig, nq: int = 32, n_water: int = 32, n_air: int = 32) -> "HeightGrid":
        if not cfg.regime.lidded:
            raise BadInputError("the height equation is solved in the lidded regimes")
        if nq < 4 or min(n_water, n_air) < 8:
            raise BadInputError("height grid too coarse (nq >= 4, >= 8 intervals per region)")
        q, C, Dq, Dqq = cosine_matrices(nq)
        pw = np.linspace(cfg.p0, cfg.p1, n_water + 1)
        pa = np.linspace(cfg.p1, 0.0, n_air + 1)
        return cls(nq, q, C, Dq, Dqq, pw, pa, fd_matrix(pw, 1), fd_matrix(pw, 2), fd_matrix(pa, 1), fd_matrix(pa, 2))

    @property
    def shape_w(self) -> tuple[int, int]:
        return (self.nq + 1, self.pw.size)

    @property
    def shape_a(self) -> tuple[int, int]:
        return (self.nq + 1, self.pa.size)

    @property
    def size(self) -> int:
        return self.shape_w[0] * self.shape_w[1] + self.shape_a[0] * self.shape_a[1] + 1

    def mean(self, f: np.ndarray) -> np.ndarray:
        """Period mean of each column of values over q (the zeroth cosine coefficient)."""
        return self.C[0] @ f

    def mode(self, f: np.ndarray, k: int) -> np.ndarray:
        return self.C[k] @ f


@dataclass(frozen=True)
class HeightField:
    grid: HeightGrid
    base: LaminarFlow
    w_water: np.ndarray
    w_air: np.ndarray
    Q: float

    @property
    def cfg(self) -> PhysicalConfig:
        return self.base.cfg

    def base_profiles(self):
        return self.base.water(self.grid.pw), self.base.air(self.grid.pa)

    @property
    def h_water(self) -> np.ndarray:
        return self.base.water(self.grid.pw)[0][None, :] + self.w_water

    @property
    def h_air(self) -> np.ndarray:
        return self.base.air(self.grid.pa)[0][None, :] + self.w_air

    @property
    def surface(self) -> np.ndarray:
        return self.h_water[:, -1]

    @property
    def depth(self) -> float:
        return float(self.grid.mean(self.surface))

    @property
    def eta(self) -> np.ndarray:
        return self.surface - self.depth

    @property
    def amplitude(self) -> float:
        return float(self.grid.mode(self.surface, 1))

    def pack(self) -> np.ndarray:
        return np.concatenate([self.w_water.ravel(), self.w_air.ravel(), [self.Q]])

    def unpack(self, x: np.ndarray) -> "HeightField":
        nw = self.w_water.size
        na = self.w_air.size
        return replace(
            self,
            w_water=x[:nw].reshape(self.grid.shape_w),
            w_air=x[nw : nw + na].reshape(self.grid.shape_a),
            Q=float(x[-1]),
        )


def region_derivatives(grid: HeightGrid, base, w: np.ndarray, D1: np.ndarray, D2: np.ndarray) -> dict:
    """h and its q/p derivatives on one region; base = (H, H_p, H_pp) on the nodes."""
    H, Hp, Hpp = base
    wq = grid.Dq @ w
    wp = w @ D1.T
    return {
        "h": H[None, :] + w,
        "hq": wq,
        "hqq": grid.Dqq @ w,
        "hp": Hp[None, :] + wp,
        "hpp": Hpp[None, :] + w @ D2.T,
        "hpq": wq @ D1.T,
    }


def _check_stagnation(d: dict, p: np.ndarray, q: np.ndarray, region: str) -> None:
    bad = np.argwhere(~(d["hp"] > 0))
    if bad.size:
        i, j = bad[0]
        raise StagnationError(f"h_p = {d['hp'][i, j]:.3g} <= 0 in the {region} at q = {q[i]:.6g}, p = {p[j]:.6g}")


def _interior(d: dict, gamma: np.ndarray | None) -> np.ndarray:
    r = (1 + d["hq"] ** 2) * d["hpp"] + d["hqq"] * d["hp"] ** 2 - 2 * d["hq"] * d["hp"] * d["hpq"]
    if gamma is not None:
        r = r + gamma[None, :] * d["hp"] ** 3
    return r


def _derivs(field: HeightField):
    g = field.grid
    bw, ba = field.base_profiles()
    dw = region_derivatives(g, bw, field.w_water, g.D1w, g.D2w)
    da = region_derivatives(g, ba, field.w_air, g.D1a, g.D2a)
    return dw, da


def residual_blocks(field: HeightField) -> tuple[np.ndarray, np.ndarray]:
    """Residual arrays shaped like (w_water, w_air)."""
    cfg, g = field.cfg, field.grid
    dw, da = _derivs(field)
    _check_stagnation(dw, g.pw, g.q, "water")
    _check_stagnation(da, g.pa, g.q, "air")
    gam = cfg.air_vorticity(g.pa)
    Rw = np.empty(g.shape_w)
    Ra = np.empty(g.shape_a)
    Rw[:, 0] = dw["h"][:, 0]
    Rw[:, 1:-1] = _interior(dw, None)[:, 1:-1]
    bern_a = (1 + da["hq"][:, 0] ** 2) / da["hp"][:, 0] ** 2
    bern_w = (1 + dw["hq"][:, -1] ** 2) / dw["hp"][:, -1] ** 2
    Rw[:, -1] = field.Q - (bern_a - bern_w) - 2 * cfg.gjump * dw["h"][:, -1]
    Ra[:, 0] = da["h"][:, 0] - dw["h"][:, -1]
    Ra[:, 1:-1] = _interior(da, gam)[:, 1:-1]
    Ra[:, -1] = da["h"][:, -1] - cfg.ell - g.mean(dw["h"][:, -1])
    return Rw, Ra


def residual(field: HeightField) -> np.ndarray:
    Rw, Ra = residual_blocks(field)
    return np.concatenate([Rw.ravel(), Ra.ravel()])


def augmented_residual(field: HeightField, s: float) -> np.ndarray:
    return np.concatenate([residual(field), [field.amplitude - s]])


def _kron_ops(grid: HeightGrid, D1: np.ndarray, D2: np.ndarray):
    Iq = np.eye(grid.nq + 1)
    Ip = np.eye(D1.shape[0])
    return {
        "q": np.kron(grid.Dq, Ip),
        "qq": np.kron(grid.Dqq, Ip),
        "p": np.kron(Iq, D1),
        "pp": np.kron(Iq, D2),
        "pq": np.kron(grid.Dq, D1),
    }


def _interior_jacobian(d: dict, gamma: np.ndarray | None, ops: dict) -> np.ndarray:
    hq, hqq, hp, hpp, hpq = d["hq"], d["hqq"], d["hp"], d["hpp"], d["hpq"]
    c_p = 2 * hqq * hp - 2 * hq * hpq
    if gamma is not None:
        c_p = c_p + 3 * gamma[None, :] * hp**2
    coef = {
        "q": 2 * hq * hpp - 2 * hp * hpq,
        "qq": hp**2,
        "p": c_p,
        "pp": 1 + hq**2,
        "pq": -2 * hq * hp,
    }
    J = np.zeros_like(ops["q"])
    for k, c in coef.items():
        J += c.ravel()[:, None] * ops[k]
    return J


def jacobian(field: HeightField, ops_cache: dict | None = None) -> np.ndarray:
    """Dense Jacobian of the augmented residual with respect to (w_water, w_air, Q)."""
    cfg, g = field.cfg, field.grid
    if ops_cache is None:
        ops_cache = {}
    if "w" not in ops_cache:
        ops_cache["w"] = _kron_ops(g, g.D1w, g.D2w)
        ops_cache["a"] = _kron_ops(g, g.D1a, g.D2a)
    opw, opa = ops_cache["w"], ops_cache["a"]
    dw, da = _derivs(field)
    nqp = g.nq + 1
    Nw = g.pw.size
    Na = g.pa.size
    nW = nqp * Nw
    N = g.size
    J = np.zeros((N, N))  # residual rows then the amplitude row

    def iw(i, j):
        return i * Nw + j

    def ia(i, j):
        return nW + i * Na + j

    Jw = _interior_jacobian(dw, None, opw)
    Ja = _interior_jacobian(da, cfg.air_vorticity(g.pa), opa)
    rows_w = np.array([iw(i, j) for i in range(nqp) for j in range(1, Nw - 1)])
    J[rows_w, :nW] = Jw[rows_w]
    rows_a = np.array([i * Na + j for i in range(nqp) for j in range(1, Na - 1)])
    J[nW + rows_a, nW : N - 1] = Ja[rows_a]

    hq_w, hp_w = dw["hq"][:, -1], dw["hp"][:, -1]
    hq_a, hp_a = da["hq"][:, 0], da["hp"][:, 0]
    for i in range(nqp):
        J[iw(i, 0), iw(i, 0)] = 1.0
        r = iw(i, Nw - 1)
        rw = iw(i, Nw - 1)
        ra = i * Na
        J[r, :nW] += 2 * hq_w[i] / hp_w[i] ** 2 * opw["q"][rw] - 2 * (1 + hq_w[i] ** 2) / hp_w[i] ** 3 * opw["p"][rw]
        J[r, nW : N - 1] -= 2 * hq_a[i] / hp_a[i] ** 2 * opa["q"][ra] - 2 * (1 + hq_a[i] ** 2) / hp_a[i] ** 3 * opa["p"][ra]
        J[r, rw] -= 2 * cfg.gjump
        J[r, N - 1] = 1.0
        J[ia(i, 0), ia(i, 0)] = 1.0
        J[ia(i, 0), iw(i, Nw - 1)] = -1.0
        J[ia(i, Na - 1), ia(i, Na - 1)] = 1.0
        for i2 in range(nqp):
            J[ia(i, Na - 1), iw(i2, Nw - 1)] -= g.C[0, i2]
    for i2 in range(nqp):
        J[N - 1, iw(i2, Nw - 1)] = g.C[1, i2]
    return J


# --- laminar base, linearization, first-order wave ---------------------------

def _profile(cfg: PhysicalConfig, gamma_rel: GammaRelProfile | None) -> GammaRelProfile:
    if cfg.regime not in (Regime.LIDDED_IRROTATIONAL, Regime.LIDDED_ROTATIONAL):
        raise BadInputError("the height equation is solved in the lidded regimes")
    require_2pi(cfg)
    return gamma_rel_profile(cfg) if gamma_rel is None else gamma_rel


def laminar_field(cfg: PhysicalConfig, lam: float, grid: HeightGrid, gamma_rel: GammaRelProfile | None = None,
                  base_lam: float | None = None) -> HeightField:
    """The laminar flow at lambda written over the base profile at base_lam."""
    prof = _profile(cfg, gamma_rel)
    base = laminar_shear(cfg, prof, lam if base_lam is None else base_lam)
    target = laminar_shear(cfg, prof, lam)
    ww = np.broadcast_to(target.water(grid.pw)[0] - base.water(grid.pw)[0], grid.shape_w).copy()
    wa = np.broadcast_to(target.air(grid.pa)[0] - base.air(grid.pa)[0], grid.shape_a).copy()
    return HeightField(grid, base, ww, wa, target.Q)


def linearized_apply(cfg: PhysicalConfig, lam: float, phi_water: np.ndarray, phi_air: np.ndarray,
                     grid: HeightGrid, gamma_rel: GammaRelProfile | None = None) -> tuple[np.ndarray, np.ndarray]:
    """F_w(lambda, 0) phi at the laminar flow, blocks laid out like the residual."""
    prof = _profile(cfg, gamma_rel)
    L = laminar_shear(cfg, prof, lam)
    _, Hpw, _ = L.water(grid.pw)
    _, Hpa, _ = L.air(grid.pa)
    gam = cfg.air_vorticity(grid.pa)
    pw_p = phi_water @ grid.D1w.T
    pa_p = phi_air @ grid.D1a.T
    Ow = np.empty(grid.shape_w)
    Oa = np.empty(grid.shape_a)
    Ow[:, 0] = phi_water[:, 0]
    Ow[:, 1:-1] = (phi_water @ grid.D2w.T + Hpw[None, :] ** 2 * (grid.Dqq @ phi_water))[:, 1:-1]
    Ow[:, -1] = 2 * (pa_p[:, 0] / Hpa[0] ** 3 - pw_p[:, -1] / Hpw[-1] ** 3) - 2 * cfg.gjump * phi_water[:, -1]
    Oa[:, 0] = phi_air[:, 0] - phi_water[:, -1]
    Oa[:, 1:-1] = (
        phi_air @ grid.D2a.T + Hpa[None, :] ** 2 * (grid.Dqq @ phi_air) + 3 * gam[None, :] * Hpa[None, :] ** 2 * pa_p
    )[:, 1:-1]
    Oa[:, -1] = phi_air[:, -1] - grid.mean(phi_water[:, -1])
    return Ow, Oa


def null_profile(cfg: PhysicalConfig, lam: float, p: np.ndarray, gamma_rel: GammaRelProfile | None = None,
                 elements: int = 1024) -> np.ndarray:
    """Mode-1 kernel profile M_1(p) normalized by M_1(p1) = 1."""
    p = np.asarray(p, dtype=float)
    if cfg.regime is Regime.LIDDED_IRROTATIONAL:
        G = gamma_rel_ideal(cfg)
        M, _ = eigenfunction_ideal(cfg, G, 1, lam, p)
        return M / math.sinh(cfg.p1 / G)
    prof = _profile(cfg, gamma_rel)
    res = sl_eigen.solve(cfg, prof, lam, sl_eigen.Grid1D.make(cfg.p0, cfg.p1, elements))
    return np.interp(p, res.p, res.M / res.M[elements])


def first_order_wave(cfg: PhysicalConfig, lam_star: float, s: float, grid: HeightGrid,
                     gamma_rel: GammaRelProfile | None = None) -> HeightField:
    """h = H(.; lambda*) + s M_1(p) cos q, Q = Q(lambda*)."""
    prof = _profile(cfg, gamma_rel)
    base = laminar_shear(cfg, prof, lam_star)
    cq = np.cos(grid.q)[:, None]
    Mw = null_profile(cfg, lam_star, grid.pw, prof)
    Ma = null_profile(cfg, lam_star, grid.pa, prof)
    Mw[-1] = Ma[0] = 1.0
    return HeightField(grid, base, s * cq * Mw[None, :], s * cq * Ma[None, :], base.Q)


# --- Newton and continuation -------------------------------------------------

@dataclass(frozen=True)
class BranchPoint:
    s: float
    field: HeightField
    Q: float
    iterations: int
    residual: float
    diagnostics: dict = field(default_factory=dict)


def newton_correct(field: HeightField, s: float, tol: float = 1e-10, max_iter: int = 25,
                   ops_cache: dict | None = None) -> BranchPoint:
    """Solve residual = 0 with mode-1 surface coefficient s; Q is the extra unknown."""
    ops_cache = {} if ops_cache is None else ops_cache
    F = augmented_residual(field, s)
    err = float(np.max(np.abs(F)))
    it = 0
    while err > tol:
        if it >= max_iter:
            raise NumericalFailure(f"Newton did not converge in {max_iter} steps (residual {err:.3e}) at s = {s:g}")
        J = jacobian(field, ops_cache)
        try:
            dx = la.lu_solve(la.lu_factor(J, check_finite=False), -F)
        except (la.LinAlgError, ValueError) as exc:
            raise NumericalFailure(f"singular Newton matrix at s = {s:g}: {exc}") from exc
        field = field.unpack(field.pack() + dx)
        F = augmented_residual(field, s)
        new = float(np.max(np.abs(F)))
        it += 1
        log.debug("newton s=%g it=%d residual=%.3e", s, it, new)
        if not math.isfinite(new):
            raise NumericalFailure(f"Newton diverged at s = {s:g}")
        err = new
    return BranchPoint(s, field, field.Q, it, err)


def amplitude_schedule(s_max: float, steps: int) -> np.ndarray:
    """steps equally spaced amplitudes ending at s_max."""
    if steps < 1 or not s_max > 0:
        raise BadInputError("need s_max > 0 and at least one step")
    return s_max * np.arange(1, steps + 1) / steps


def continue_branch(cfg: PhysicalConfig, lam_star: float, amplitudes: Sequence[float], grid: HeightGrid | None = None,
                    gamma_rel: GammaRelProfile | None = None, tol: float = 1e-10, max_iter: int = 25,
                    with_diagnostics: bool = True):
    """March through the amplitudes with a secant predictor and Newton corrector.

    Returns (points, error); on failure the branch so far is kept and error
    holds the exception, tagged with the step index.  Each point carries a
    diagnostics snapshot unless with_diagnostics is False.
    """
    from .diagnostics import snapshot

    prof = _profile(cfg, gamma_rel)
    grid = HeightGrid.make(cfg) if grid is None else grid
    origin = laminar_field(cfg, lam_star, grid, prof)
    hist: list[tuple[float, np.ndarray]] = [(0.0, origin.pack())]
    points: list[BranchPoint] = []
    ops: dict = {}
    for step, s in enumerate(amplitudes):
        if not hist[-1][0] < s:
            raise BadInputError("amplitudes must be positive and increasing")
        if len(hist) == 1:
            guess = first_order_wave(cfg, lam_star, s, grid, prof)
        else:
            (s0, x0), (s1, x1) = hist[-2], hist[-1]
            guess = origin.unpack(x1 + (s - s1) / (s1 - s0) * (x1 - x0))
        try:
            bp = newton_correct(guess, s, tol, max_iter, ops)
        except NumericalFailure as exc:
            exc.args = (f"step {step}: {exc}",)
            return points, exc
        if with_diagnostics:
            bp = replace(bp, diagnostics=snapshot(bp.field))
        points.append(bp)
        hist.append((s, bp.field.pack()))
    return points, None
