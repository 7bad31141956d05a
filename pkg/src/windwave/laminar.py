"""
laminar.py

Flat-surface (laminar) solution families and their Bernoulli constant Q(lambda).

Lidded regimes are described by the height profile H(p) above the bed;
the unbounded regimes by the flattened stream function Psi_0(ybar).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .core import (
    BadInputError,
    GammaRelProfile,
    PhysicalConfig,
    Regime,
    constant_profile,
    gamma_rel_ideal,
    gamma_rel_profile,
    require_regime,
)


@dataclass(frozen=True)
class LaminarFlow:
    cfg: PhysicalConfig
    lam: float
    Q: float
    depth: float
    width: Optional[float] = None
    gamma_rel: Optional[GammaRelProfile] = None

    # lidded profiles -------------------------------------------------------
    def water(self, p):
        """(H, H_p, H_pp) on water streamlines."""
        p = np.asarray(p, dtype=float)
        return (p - self.cfg.p0) / self.lam, np.full_like(p, 1.0 / self.lam), np.zeros_like(p)

    def air(self, p):
        """(H, H_p, H_pp) on air streamlines; H_pp from the compatibility ODE."""
        p = np.asarray(p, dtype=float)
        gam = self.gamma_rel(p)
        H = self.gamma_rel.inverse_integral(p) + self.depth
        return H, 1.0 / gam, -self.cfg.air_vorticity(p) / gam**3

    def height(self, p):
        p = np.asarray(p, dtype=float)
        hw = self.water(p)[0]
        if self.gamma_rel is None:
            return hw
        return np.where(p <= self.cfg.p1, hw, self.air(np.maximum(p, self.cfg.p1))[0])

    # unbounded profile ------------------------------------------------------
    def psi0(self, ybar):
        ybar = np.asarray(ybar, dtype=float)
        return np.where(ybar > 0, -self.lam * ybar, self.cfg.p0 * ybar)

    def to_dict(self, samples: int = 0) -> dict:
        d = {"regime": self.cfg.regime.value, "lambda": self.lam, "Q": self.Q, "depth": self.depth}
        if self.width is not None:
            d["width"] = self.width
        if samples and self.cfg.regime.lidded:
            p = np.linspace(self.cfg.p0, 0.0, samples)
            d["profile"] = {"p": p.tolist(), "H": self.height(p).tolist()}
        return d


def _check_lam(lam: float, allow_zero: bool = False) -> float:
    lam = float(lam)
    if not math.isfinite(lam) or lam < 0 or (lam == 0 and not allow_zero):
        raise BadInputError(f"lambda must be {'non-negative' if allow_zero else 'positive'}, got {lam}")
    return lam


def q_lidded(cfg: PhysicalConfig, gamma_p1: float, lam: float) -> float:
    """Q(lambda) = 2 g[[rho]] (p1 - p0)/lambda + Gamma_rel(p1)^2 - lambda^2."""
    return 2.0 * cfg.gjump * (cfg.p1 - cfg.p0) / lam + gamma_p1**2 - lam**2


def q_unbounded(cfg: PhysicalConfig, lam: float) -> float:
    """Q(lambda) = lambda^2 - p0^2 + 2 g[[rho]] for unit depth.

    This is the value for which the flat state solves the interface equation
    [[|grad psi|^2]] + 2 g[[rho]] (eta + 1) = Q.
    """
    return lam**2 - cfg.p0**2 + 2.0 * cfg.gjump


def laminar_ideal(cfg: PhysicalConfig, gamma_rel: float | None, lam: float) -> LaminarFlow:
    require_regime(cfg, [Regime.LIDDED_IRROTATIONAL], "laminar_ideal")
    lam = _check_lam(lam)
    if gamma_rel is None:
        gamma_rel = gamma_rel_ideal(cfg)
    if not math.isclose(gamma_rel, gamma_rel_ideal(cfg), rel_tol=1e-12):
        raise BadInputError("Gamma_rel must equal |p1|/ell for a lidded irrotational air layer")
    depth = (cfg.p1 - cfg.p0) / lam
    return LaminarFlow(cfg, lam, q_lidded(cfg, gamma_rel, lam), depth, cfg.ell + depth, constant_profile(cfg))


def laminar_shear(cfg: PhysicalConfig, gamma_rel: GammaRelProfile, lam: float) -> LaminarFlow:
    require_regime(cfg, [Regime.LIDDED_ROTATIONAL, Regime.LIDDED_IRROTATIONAL], "laminar_shear")
    lam = _check_lam(lam)
    if gamma_rel.minimum <= 0:
        raise BadInputError("Gamma_rel must be positive")
    depth = (cfg.p1 - cfg.p0) / lam
    width = gamma_rel.lid_integral + depth
    return LaminarFlow(cfg, lam, q_lidded(cfg, gamma_rel.at_p1, lam), depth, width, gamma_rel)


def laminar_unbounded(cfg: PhysicalConfig, lam: float) -> LaminarFlow:
    require_regime(cfg, [Regime.UNBOUNDED_IRROTATIONAL, Regime.UNBOUNDED_SHEAR], "laminar_unbounded")
    if cfg.depth_d != 1.0:
        raise BadInputError("unbounded laminar flows are normalized to unit depth")
    lam = _check_lam(lam, allow_zero=True)
    return LaminarFlow(cfg, lam, q_unbounded(cfg, lam), 1.0)


def laminar(cfg: PhysicalConfig, lam: float, gamma_rel: GammaRelProfile | None = None) -> LaminarFlow:
    """Dispatch on the regime."""
    if cfg.regime.unbounded:
        return laminar_unbounded(cfg, lam)
    if gamma_rel is None:
        gamma_rel = gamma_rel_profile(cfg)
    return laminar_shear(cfg, gamma_rel, lam)


def lambda_zero(cfg: PhysicalConfig) -> float:
    """Maximizer of the concave lidded Q(lambda): (-g[[rho]] (p1 - p0))^(1/3)."""
    if not cfg.regime.lidded:
        raise BadInputError("lambda_0 is defined for lidded regimes")
    return float(np.cbrt(-cfg.gjump * (cfg.p1 - cfg.p0)))
