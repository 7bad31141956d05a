"""
dispersion.py

Bifurcation conditions and bifurcation points lambda* for the four regimes.

Lidded irrotational: closed-form dispersion relation in lambda.
Lidded rotational:   nu(lambda) = -1 with nu the minimal Rayleigh quotient.
Unbounded:           roots of the Fourier multiplier m(1; lambda).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.optimize import bisect

from . import sl_eigen
from .core import (
    BadInputError,
    GammaRelProfile,
    InfeasibleError,
    NumericalFailure,
    PhysicalConfig,
    Regime,
    gamma_rel_ideal,
    gamma_rel_profile,
    require_regime,
)
from .laminar import lambda_zero, q_lidded


def coth(x):
    """coth via expm1, odd in x; inf at 0."""
    x = np.asarray(x, dtype=float)
    ax = np.abs(x)
    with np.errstate(divide="ignore", over="ignore"):
        out = 1.0 + 2.0 / np.expm1(2.0 * ax)
    out = np.where(ax > 20.0, 1.0, out)
    return np.sign(x) * out if out.ndim else float(math.copysign(float(out), float(x)))


def kcoth(k, d: float = 1.0):
    """k coth(k d) with the k -> 0 limit 1/d."""
    k = np.asarray(k, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(k == 0, 1.0 / d, k * coth(np.where(k == 0, 1.0, k) * d))
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class Condition:
    name: str
    passed: bool
    value: float

    def to_dict(self) -> dict:
        return {"passed": bool(self.passed), "value": float(self.value)}


@dataclass(frozen=True)
class BifurcationPoint:
    regime: Regime
    n: int
    lam_star: float
    conditions: dict = field(default_factory=dict)
    eigfun: Optional[tuple] = None  # (p samples, M samples)
    mu: Optional[float] = None

    def to_dict(self) -> dict:
        d = {
            "regime": self.regime.value,
            "mode": self.n,
            "lambda_star": self.lam_star,
            "condition_report": {k: c.to_dict() for k, c in self.conditions.items()},
        }
        if self.mu is not None:
            d["mu"] = self.mu
        return d


def _root(f: Callable[[float], float], df: Callable[[float], float] | None, lo: float, hi: float) -> float:
    """Bisection to a 1e-10 bracket, then at most five guarded Newton steps."""
    x = bisect(f, lo, hi, xtol=1e-10, rtol=4 * np.finfo(float).eps, maxiter=500)
    if df is None:
        return x
    for _ in range(5):
        fx = f(x)
        d = df(x)
        if fx == 0 or d == 0:
            break
        step = fx / d
        if abs(step) > 1e-10:  # Newton must stay inside the final bracket
            break
        x -= step
        if abs(step) <= 4 * np.finfo(float).eps * abs(x):
            break
    return x


def _grow_bracket(f: Callable[[float], float], lo: float = 1e-6, hi: float = 1.0) -> tuple[float, float]:
    while f(lo) > 0:
        lo *= 1e-2
        if lo < 1e-300:
            raise NumericalFailure("could not bracket root from below")
    while f(hi) < 0:
        hi *= 2.0
        if hi > 1e150:
            raise NumericalFailure("could not bracket root from above")
    return lo, hi


# --- lidded irrotational ---------------------------------------------------

def check_ilbc(cfg: PhysicalConfig, gamma_rel: float | None = None) -> Condition:
    """ILBC value -g[[rho]] + Gamma^2 coth(p1/Gamma).

    Passes when the value is positive, which is the n = 1 size condition: only
    then does the first mode admit a bifurcation point.
    """
    require_regime(cfg, [Regime.LIDDED_IRROTATIONAL], "check_ilbc")
    G = gamma_rel_ideal(cfg) if gamma_rel is None else gamma_rel
    value = -cfg.gjump + G**2 * coth(cfg.p1 / G)
    return Condition("ILBC", value > 0, value)


def check_size_condition_n(cfg: PhysicalConfig, gamma_rel: float | None, n: int) -> Condition:
    """Pass iff g[[rho]]/n - Gamma^2 coth(n p1/Gamma) < 0."""
    require_regime(cfg, [Regime.LIDDED_IRROTATIONAL], "check_size_condition_n")
    if n < 1:
        raise BadInputError("mode number must be >= 1")
    G = gamma_rel_ideal(cfg) if gamma_rel is None else gamma_rel
    value = cfg.gjump / n - G**2 * coth(n * cfg.p1 / G)
    return Condition(f"SIZE_{n}", value < 0, value)


def _water_term(lam: float, c: float) -> float:
    return lam**2 * coth(c / lam)


def dispersion_residual(cfg: PhysicalConfig, gamma_rel: float, n: int, lam: float) -> float:
    """Gamma^2 coth(n p1/Gamma) - lambda^2 coth(n (p1 - p0)/lambda) - g[[rho]]/n."""
    G = gamma_rel
    return G**2 * coth(n * cfg.p1 / G) - _water_term(lam, n * (cfg.p1 - cfg.p0)) - cfg.gjump / n


def solve_ideal_lambda_n(cfg: PhysicalConfig, gamma_rel: float | None = None, n: int = 1) -> float:
    size = check_size_condition_n(cfg, gamma_rel, n)
    if not size.passed:
        raise InfeasibleError(f"mode {n} has no bifurcation point (size condition value {size.value:.6g})", size.name, size.value)
    G = gamma_rel_ideal(cfg) if gamma_rel is None else gamma_rel
    target = G**2 * coth(n * cfg.p1 / G) - cfg.gjump / n
    c = n * (cfg.p1 - cfg.p0)

    def f(lam: float) -> float:
        return _water_term(lam, c) - target

    def df(lam: float) -> float:
        x = c / lam
        return 2 * lam * coth(x) + (c / math.sinh(x) ** 2 if x < 350 else 0.0)

    lo, hi = _grow_bracket(f)
    return _root(f, df, lo, hi)


def eigenfunction_ideal(cfg: PhysicalConfig, gamma_rel: float | None, n: int, lam: float, p) -> tuple[np.ndarray, float]:
    """M_n(p): sinh(n p/Gamma) in the air, mu sinh(n (p - p0)/lambda) in the water."""
    G = gamma_rel_ideal(cfg) if gamma_rel is None else gamma_rel
    p = np.asarray(p, dtype=float)
    mu = math.sinh(n * cfg.p1 / G) / math.sinh(n * (cfg.p1 - cfg.p0) / lam)
    M = np.where(p >= cfg.p1, np.sinh(n * p / G), mu * np.sinh(n * (p - cfg.p0) / lam))
    return M, mu


def ideal_jump_residual(cfg: PhysicalConfig, gamma_rel: float, n: int, lam: float) -> float:
    """[[a^3 M_p]] - g[[rho]] M(p1) for the closed-form eigenfunction."""
    G = gamma_rel
    _, mu = eigenfunction_ideal(cfg, G, n, lam, [cfg.p1])
    air = G**3 * (n / G) * math.cosh(n * cfg.p1 / G)
    water = lam**3 * mu * (n / lam) * math.cosh(n * (cfg.p1 - cfg.p0) / lam)
    return air - water - cfg.gjump * math.sinh(n * cfg.p1 / G)


# --- lidded rotational -----------------------------------------------------

def check_shear_size_condition(cfg: PhysicalConfig, gamma_rel: GammaRelProfile) -> Condition:
    """Pass iff g[[rho]] p1^2 + int_{p1}^0 (Gamma^3 + p^2 Gamma) dp < 0."""
    from scipy.integrate import simpson

    p = gamma_rel.p
    G = gamma_rel.values
    value = cfg.gjump * cfg.p1**2 + float(simpson(G**3 + p**2 * G, x=p))
    return Condition("SIZE_SHEAR", value < 0, value)


def nu_of_lambda(cfg: PhysicalConfig, gamma_rel: GammaRelProfile, lam: float, elements: int = 256) -> float:
    return sl_eigen.nu(cfg, gamma_rel, lam, elements)


def lambda_upper(cfg: PhysicalConfig, gamma_rel: GammaRelProfile, n: int = 1) -> float:
    """A lambda above which nu(lambda) > -n^2 is guaranteed.

    Uses the larger of a_min^2 - g[[rho]]/(2n) and -g[[rho]]/n - a_min^2; the
    second comes from bounding the air and water energies separately.
    """
    a2 = gamma_rel.minimum**2
    return math.sqrt(max(a2 - cfg.gjump / (2 * n), -cfg.gjump / n - a2))


def scan_nu(cfg: PhysicalConfig, gamma_rel: GammaRelProfile, points: int = 64, elements: int = 256, n: int = 1):
    """nu on a geometric lambda grid in [1e-3, lambda_upper]."""
    lams = np.geomspace(1e-3, lambda_upper(cfg, gamma_rel, n), points)
    return lams, np.array([nu_of_lambda(cfg, gamma_rel, l, elements) for l in lams])


def check_lbc_nu(cfg: PhysicalConfig, gamma_rel: GammaRelProfile, points: int = 64, elements: int = 256) -> Condition:
    """inf nu < -1, checked on the scan grid."""
    _, nus = scan_nu(cfg, gamma_rel, points, elements)
    return Condition("LBC", float(nus.min()) < -1.0, float(nus.min()) + 1.0)


def solve_shear_lambda_star(cfg: PhysicalConfig, gamma_rel: GammaRelProfile, elements: int = 256, points: int = 64) -> float:
    """The unique lambda with nu(lambda) = -1."""
    lams, nus = scan_nu(cfg, gamma_rel, points, elements)
    if nus.min() >= -1.0:
        raise InfeasibleError("local bifurcation condition fails: nu >= -1 on the scan", "LBC", float(nus.min()) + 1.0)
    grid = sl_eigen.Grid1D.make(cfg.p0, cfg.p1, elements)
    top = lams[-1]
    while sl_eigen.solve(cfg, gamma_rel, top, grid).nu <= -1.0:
        top *= 1.5
    below = np.nonzero(nus < -1.0)[0][-1]
    lo = lams[below]
    hi = lams[below + 1] if below + 1 < lams.size else top

    def f(lam: float) -> float:
        return sl_eigen.solve(cfg, gamma_rel, lam, grid).nu + 1.0

    def df(lam: float) -> float:
        return sl_eigen.solve(cfg, gamma_rel, lam, grid).dnu_dlam

    lam = _root(f, df, lo, hi)
    _assert_not_lambda0(cfg, lam)
    return lam


def _assert_not_lambda0(cfg: PhysicalConfig, lam: float) -> None:
    l0 = lambda_zero(cfg)
    if abs(lam - l0) <= 1e-6 * l0:
        raise NumericalFailure(f"lambda* = {lam:.15g} coincides with lambda_0; Q is not invertible there")


# --- unbounded -------------------------------------------------------------

def _unit_depth(cfg: PhysicalConfig) -> None:
    require_regime(cfg, [Regime.UNBOUNDED_IRROTATIONAL, Regime.UNBOUNDED_SHEAR], "multiplier")


def multiplier_m(cfg: PhysicalConfig, k, lam: float):
    """m(k; lambda) = p0^2 k coth k - lambda^2 k + g[[rho]]."""
    _unit_depth(cfg)
    k = np.asarray(k, dtype=float)
    out = cfg.p0**2 * kcoth(k) - lam**2 * k + cfg.gjump
    return float(out) if np.ndim(out) == 0 else out


def multiplier_m_tilde(cfg: PhysicalConfig, k, lam: float):
    """m~(k; lambda) = m(k; lambda) - gamma0 lambda."""
    return multiplier_m(cfg, k, lam) - cfg.gamma0 * lam


def interface_symbol(cfg: PhysicalConfig, k, lam: float):
    """Symbol of the linearized interface operator G_eta(lambda, 0) / 2.

    Linearizing [[|grad psi|^2]] about the flat state from the explicit
    harmonic perturbations gives p0^2 k coth k + lambda^2 k + g[[rho]] - gamma0
    lambda: the air speed enters with the same sign as the water speed.  This
    is what evaluate_G realizes and what its finite-difference linearization
    reproduces.
    """
    _unit_depth(cfg)
    k = np.asarray(k, dtype=float)
    out = cfg.p0**2 * kcoth(k) + lam**2 * k + cfg.gjump - cfg.gamma0 * lam
    return float(out) if np.ndim(out) == 0 else out


def _gamma_minus(cfg: PhysicalConfig) -> float:
    return min(cfg.gamma0, 0.0)


def lbc_value(cfg: PhysicalConfig) -> float:
    """p0^2 coth 1 + g[[rho]] - (gamma0^-)^2/4 + gamma0 gamma0^-/2."""
    gm = _gamma_minus(cfg)
    return cfg.p0**2 * coth(1.0) + cfg.gjump - 0.25 * gm**2 + 0.5 * cfg.gamma0 * gm


def check_unbounded_lbc(cfg: PhysicalConfig) -> Condition:
    name = "USLBC" if cfg.regime is Regime.UNBOUNDED_SHEAR else "ULBC"
    v = lbc_value(cfg)
    return Condition(name, v > 0, v)


def solve_unbounded_lambda_star(cfg: PhysicalConfig) -> float:
    _unit_depth(cfg)
    lbc = check_unbounded_lbc(cfg)
    if not lbc.passed:
        raise InfeasibleError(f"unbounded bifurcation condition fails (value {lbc.value:.6g})", lbc.name, lbc.value)
    if cfg.regime is Regime.UNBOUNDED_IRROTATIONAL:
        return math.sqrt(cfg.p0**2 * coth(1.0) + cfg.gjump)
    g0 = cfg.gamma0
    lo = -_gamma_minus(cfg) / 2.0  # maximizer of the concave map on lambda >= 0

    def f(lam: float) -> float:
        return -multiplier_m_tilde(cfg, 1, lam)  # increasing on the decreasing branch

    def df(lam: float) -> float:
        return 2 * lam + g0

    hi = max(1.0, 2 * lo)
    while f(hi) < 0:
        hi *= 2.0
    lam = _root(f, df, lo, hi)
    slope = -2 * lam - g0
    if slope == 0:
        raise NumericalFailure("transversality fails at lambda*")
    return lam


def k_star(cfg: PhysicalConfig, k_max: int = 64) -> int:
    """Smallest k >= 1 with p0^2 k coth(k d)/d^2 + g[[rho]] - (g0^-)^2/4 + g0 g0^-/2 > 0."""
    require_regime(cfg, [Regime.UNBOUNDED_IRROTATIONAL, Regime.UNBOUNDED_SHEAR], "k_star")
    d = cfg.depth_d
    gm = _gamma_minus(cfg)
    shift = cfg.gjump - 0.25 * gm**2 + 0.5 * cfg.gamma0 * gm
    for k in range(1, k_max + 1):
        if cfg.p0**2 * kcoth(k, d) / d**2 + shift > 0:
            return k
    raise InfeasibleError(f"no feasible mode k <= {k_max}", "KSTAR", cfg.p0**2 * kcoth(k_max, d) / d**2 + shift)


def critical_layer(cfg: PhysicalConfig, lam: float) -> Optional[float]:
    """Height where Psi_0'(y) = -lambda - gamma0 y vanishes, if it lies in the air."""
    require_regime(cfg, [Regime.UNBOUNDED_SHEAR], "critical_layer")
    if cfg.gamma0 < 0 and lam > 0:
        return -lam / cfg.gamma0
    return None


# --- dispatch --------------------------------------------------------------

def bifurcate(cfg: PhysicalConfig, n: int = 1, gamma_rel: GammaRelProfile | None = None,
              elements: int = 256, samples: int = 0) -> BifurcationPoint:
    """Solve for lambda* in any regime, with a report of the conditions checked."""
    conds: dict[str, Condition] = {}
    if cfg.regime is Regime.LIDDED_IRROTATIONAL:
        G = gamma_rel_ideal(cfg)
        conds["ILBC"] = check_ilbc(cfg, G)
        conds[f"SIZE_{n}"] = check_size_condition_n(cfg, G, n)
        lam = solve_ideal_lambda_n(cfg, G, n)
        _assert_not_lambda0(cfg, lam)
        p = np.linspace(cfg.p0, 0.0, samples) if samples else np.array([cfg.p1])
        M, mu = eigenfunction_ideal(cfg, G, n, lam, p)
        conds["DISPERSION"] = Condition("DISPERSION", True, dispersion_residual(cfg, G, n, lam))
        return BifurcationPoint(cfg.regime, n, lam, conds, (p, M) if samples else None, mu)
    if cfg.regime is Regime.LIDDED_ROTATIONAL:
        if n != 1:
            raise BadInputError("the rotational lidded analysis covers mode n = 1")
        prof = gamma_rel_profile(cfg) if gamma_rel is None else gamma_rel
        conds["SIZE_SHEAR"] = check_shear_size_condition(cfg, prof)
        conds["LBC"] = check_lbc_nu(cfg, prof, elements=elements)
        if not conds["LBC"].passed:
            c = conds["LBC"]
            raise InfeasibleError("local bifurcation condition fails", c.name, c.value)
        lam = solve_shear_lambda_star(cfg, prof, elements)
        res = sl_eigen.solve(cfg, prof, lam, sl_eigen.Grid1D.make(cfg.p0, cfg.p1, elements))
        conds["NU"] = Condition("NU", True, res.nu + 1.0)
        return BifurcationPoint(cfg.regime, n, lam, conds, (res.p, res.M / res.M[elements]) if samples else None)
    if n != 1:
        raise BadInputError("unbounded bifurcation is solved for the first mode")
    conds["KSTAR"] = Condition("KSTAR", True, float(k_star(cfg)))
    lbc = check_unbounded_lbc(cfg)
    conds[lbc.name] = lbc
    lam = solve_unbounded_lambda_star(cfg)
    if cfg.regime is Regime.UNBOUNDED_SHEAR:
        conds["TRANSVERSALITY"] = Condition("TRANSVERSALITY", 2 * lam + cfg.gamma0 > 0, 2 * lam + cfg.gamma0)
    return BifurcationPoint(cfg.regime, n, lam, conds)


def dq_dlambda(cfg: PhysicalConfig, gamma_p1: float, lam: float, h: float = 1e-6) -> float:
    """Central difference of the lidded Q(lambda)."""
    return (q_lidded(cfg, gamma_p1, lam + h) - q_lidded(cfg, gamma_p1, lam - h)) / (2 * h)
