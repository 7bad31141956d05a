"""
diagnostics.py

Eulerian post-processing of height-equation solutions: velocities, Bernoulli
pressure, momentum flux, drag, relative circulation and the dynamic
condition on the surface.

Frame-relative velocities follow from the height function,

    u - c = -1 / (sqrt(rho) h_p),    v = -h_q / (sqrt(rho) h_p),

and on each streamline the Bernoulli head E = P + rho |u - c, v|^2 / 2 + g rho y
is constant.  Physical height is y = h - d, so the bed sits at y = -d and the
surface oscillates about y = 0.  E is anchored by the laminar limit: in the
water E = lambda_b^2 / 2 (zero pressure on the flat surface), across the
interface E jumps by Q/2 - g[[rho]] d, and in the air dE/dp = gamma(-p).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.integrate import cumulative_simpson
from scipy.interpolate import CubicSpline

from .core import BadInputError, PhysicalConfig, StagnationError
from .height_pde import HeightField, region_derivatives


def mirror(f: np.ndarray, odd: bool = False) -> np.ndarray:
    """Extend values on q in [0, pi] (rows) to the full period [0, 2 pi)."""
    tail = f[-2:0:-1]
    return np.concatenate([f, -tail if odd else tail], axis=0)


def period_mean(f: np.ndarray) -> np.ndarray:
    """Mean over one period of mirrored values (trapezoid = exact for trig polynomials)."""
    return np.mean(f, axis=0)


@dataclass(frozen=True)
class RegionFields:
    p: np.ndarray
    y: np.ndarray
    u_minus_c: np.ndarray
    v: np.ndarray
    P: np.ndarray
    E: np.ndarray  # per streamline
    hq: np.ndarray
    hp: np.ndarray


@dataclass(frozen=True)
class EulerianFields:
    """Fields on the full period x in [0, 2 pi) (rows) times streamlines (columns)."""

    cfg: PhysicalConfig
    x: np.ndarray
    water: RegionFields
    air: RegionFields
    eta: np.ndarray
    eta_x: np.ndarray
    depth: float
    Q: float
    field: HeightField


def _energy(field: HeightField, depth: float) -> tuple[np.ndarray, np.ndarray]:
    cfg, g = field.cfg, field.grid
    Ew = np.full(g.pw.size, 0.5 * field.base.lam**2)
    gam = cfg.air_vorticity(g.pa)
    Ea = Ew[0] + 0.5 * field.Q - cfg.gjump * depth + cumulative_simpson(gam, x=g.pa, initial=0.0)
    return Ew, Ea


def eulerian_from_height(field: HeightField) -> EulerianFields:
    """Reconstruct (u - c, v), P and the surface from a height field."""
    cfg, g = field.cfg, field.grid
    bw, ba = field.base_profiles()
    dw = region_derivatives(g, bw, field.w_water, g.D1w, g.D2w)
    da = region_derivatives(g, ba, field.w_air, g.D1a, g.D2a)
    for d, name in ((dw, "water"), (da, "air")):
        if np.any(d["hp"] <= 0):
            raise StagnationError(f"h_p <= 0 in the {name}; velocities are undefined")
    depth = field.depth
    Ew, Ea = _energy(field, depth)

    def region(d, p, rho, E):
        y = d["h"] - depth
        speed2 = (1 + d["hq"] ** 2) / d["hp"] ** 2
        P = E[None, :] - 0.5 * speed2 - cfg.g * rho * y
        s = np.sqrt(rho)
        return RegionFields(
            p=p,
            y=mirror(y),
            u_minus_c=mirror(-1.0 / (s * d["hp"])),
            v=mirror(-d["hq"] / (s * d["hp"]), odd=True),
            P=mirror(P),
            E=E,
            hq=mirror(d["hq"], odd=True),
            hp=mirror(d["hp"]),
        )

    water = region(dw, g.pw, cfg.rho_water, Ew)
    air = region(da, g.pa, cfg.rho_air, Ea)
    x = np.concatenate([g.q, 2 * np.pi - g.q[-2:0:-1]])
    eta = water.y[:, -1]
    return EulerianFields(cfg, x, water, air, eta, water.hq[:, -1], depth, field.Q, field)


def _level_region(fields: EulerianFields, y: float) -> RegionFields:
    lo, hi = float(fields.eta.min()), float(fields.eta.max())
    band = 1e-9 + 1e-6 * max(1.0, hi - lo)
    if lo - band <= y <= hi + band:
        raise BadInputError(f"level y = {y:g} intersects the surface range [{lo:.6g}, {hi:.6g}]")
    if y < lo:
        if not y > -fields.depth:
            raise BadInputError(f"level y = {y:g} lies below the bed")
        return fields.water
    if not y < float(fields.air.y[:, -1].min()):
        raise BadInputError(f"level y = {y:g} lies above the lid")
    return fields.air


def momentum_flux_FE(fields: EulerianFields, levels: Sequence[float]) -> np.ndarray:
    """F_E(y) = (1/L) int rho (u - c) v dx along each horizontal level."""
    out = []
    for y in levels:
        reg = _level_region(fields, float(y))
        vals = np.empty(fields.x.size)
        for i in range(fields.x.size):
            hs = CubicSpline(reg.p, reg.y[i])
            roots = hs.solve(y, extrapolate=False)
            if roots.size != 1:
                raise BadInputError(f"level y = {y:g} does not cut streamline row {i} exactly once")
            pr = roots[0]
            hq = CubicSpline(reg.p, reg.hq[i])(pr)
            hp = CubicSpline(reg.p, reg.hp[i])(pr)
            vals[i] = hq / hp**2  # rho (u - c) v
        out.append(float(period_mean(vals)))
    return np.array(out)


def surface_pressure(fields: EulerianFields) -> tuple[np.ndarray, np.ndarray]:
    """(water-side, air-side) pressure on the surface."""
    return fields.water.P[:, -1], fields.air.P[:, 0]


def drag_force(fields: EulerianFields, side: str = "water") -> float:
    """(1/L) int eta_x P(x, eta(x)) dx."""
    Pw, Pa = surface_pressure(fields)
    P = Pw if side == "water" else Pa
    return float(period_mean(fields.eta_x * P))


def pressure_jump(fields: EulerianFields) -> float:
    Pw, Pa = surface_pressure(fields)
    return float(np.max(np.abs(Pa - Pw)))


def kinematic_residual(fields: EulerianFields) -> float:
    """max |v - (u - c) eta_x| on the surface, with eta_x from spectral differentiation of eta."""
    g = fields.field.grid
    eta_x = mirror(g.Dq @ fields.field.surface, odd=True)
    w = fields.water
    return float(np.max(np.abs(w.v[:, -1] - w.u_minus_c[:, -1] * eta_x)))


def relative_circulation(field: HeightField, p) -> np.ndarray:
    """Gamma_rel(p) = (1/L) int (1 + h_q^2)/h_p dq on air streamlines p in [p1, 0]."""
    cfg, g = field.cfg, field.grid
    p = np.atleast_1d(np.asarray(p, dtype=float))
    tol = 1e-12 * max(1.0, abs(cfg.p1))
    if np.any(p < cfg.p1 - tol) or np.any(p > tol):
        raise BadInputError("relative circulation is defined on air streamlines p1 <= p <= 0")
    _, ba = field.base_profiles()
    da = region_derivatives(g, ba, field.w_air, g.D1a, g.D2a)
    circ = g.mean((1 + da["hq"] ** 2) / da["hp"])
    return CubicSpline(g.pa, circ)(np.clip(p, cfg.p1, 0.0))


def bernoulli_jump_check(fields: EulerianFields, Q: float | None = None) -> float:
    """max |[[|grad psi|^2]] + 2 g[[rho]] (eta + d) - Q| on the surface."""
    Q = fields.Q if Q is None else Q
    cfg = fields.cfg
    ga = fields.cfg.rho_air * (fields.air.u_minus_c[:, 0] ** 2 + fields.air.v[:, 0] ** 2)
    gw = fields.cfg.rho_water * (fields.water.u_minus_c[:, -1] ** 2 + fields.water.v[:, -1] ** 2)
    return float(np.max(np.abs(ga - gw + 2 * cfg.gjump * (fields.eta + fields.depth) - Q)))


def default_levels(fields: EulerianFields, n: int = 5) -> np.ndarray:
    """n levels spread over the water and air away from the surface band."""
    lo, hi = float(fields.eta.min()), float(fields.eta.max())
    bed = -fields.depth
    lid = float(fields.air.y[:, -1].min())
    nw = (n + 1) // 2
    water = bed + (lo - bed) * (np.arange(1, nw + 1) / (nw + 1))
    air = hi + (lid - hi) * (np.arange(1, n - nw + 1) / (n - nw + 1))
    return np.concatenate([water, air])


def snapshot(field: HeightField, levels: Sequence[float] | None = None) -> dict:
    """All branch-point invariants in one dict (plain floats)."""
    fields = eulerian_from_height(field)
    levels = default_levels(fields) if levels is None else np.asarray(levels, dtype=float)
    fe = momentum_flux_FE(fields, levels)
    g = field.grid
    prescribed = field.base.gamma_rel(g.pa)
    circ = relative_circulation(field, g.pa)
    return {
        "levels": levels.tolist(),
        "F_E": fe.tolist(),
        "F_E_mean": float(np.mean(fe)),
        "F_E_spread": float(np.max(fe) - np.min(fe)),
        "drag": drag_force(fields, "water"),
        "drag_air": drag_force(fields, "air"),
        "pressure_jump": pressure_jump(fields),
        "bernoulli_resid": bernoulli_jump_check(fields),
        "kinematic_resid": kinematic_residual(fields),
        "circ_err": float(np.max(np.abs(circ - prescribed))),
        "eta_mean": float(g.mean(field.eta)),
        "eta_max": float(np.max(np.abs(field.eta))),
    }
