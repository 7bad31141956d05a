"""
core.py

Physical configuration, regime tags and the relative-circulation profile
that the laminar, dispersion and height-equation modules consume.

Sign conventions: the pseudo stream function is psi = -p, the interface is
the streamline p = p1 (p = 0 in the unbounded regimes) and the jump of any
quantity is air minus water.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Any, Callable, Mapping, Optional, Sequence

import numpy as np
from scipy.integrate import IntegrationWarning, cumulative_simpson, quad
from scipy.interpolate import CubicSpline
from scipy.optimize import bisect

TWO_PI = 2.0 * math.pi


class WindWaveError(Exception):
    """Base class for library errors."""


class BadInputError(WindWaveError, ValueError):
    """Configuration or argument outside the admissible set."""


class InfeasibleError(WindWaveError):
    """A compatibility or bifurcation condition fails."""

    def __init__(self, message: str, condition: str = "", value: float = float("nan")):
        super().__init__(message)
        self.condition = condition
        self.value = value


class NumericalFailure(WindWaveError):
    """A solver did not converge or broke down."""


class StagnationError(NumericalFailure):
    """h_p <= 0 somewhere, i.e. the flow stagnates."""


class Regime(str, Enum):
    LIDDED_IRROTATIONAL = "lidded_irrotational"
    LIDDED_ROTATIONAL = "lidded_rotational"
    UNBOUNDED_IRROTATIONAL = "unbounded_irrotational"
    UNBOUNDED_SHEAR = "unbounded_shear"

    @property
    def lidded(self) -> bool:
        return self in (Regime.LIDDED_IRROTATIONAL, Regime.LIDDED_ROTATIONAL)

    @property
    def unbounded(self) -> bool:
        return not self.lidded


@dataclass(frozen=True)
class Vorticity:
    """Vorticity strength gamma(psi) in the air, psi = -p in [0, -p1].

    kind is "constant" (params = (value,)), "polynomial" (coefficients in
    increasing powers of psi) or "tabulated" (params = psi nodes followed by
    values, cubic interpolation).
    """

    kind: str
    params: tuple[float, ...]

    def __post_init__(self) -> None:
        if self.kind not in ("constant", "polynomial", "tabulated"):
            raise BadInputError(f"unknown vorticity kind {self.kind!r}")
        if not self.params:
            raise BadInputError("vorticity needs at least one parameter")
        if self.kind == "tabulated" and len(self.params) % 2:
            raise BadInputError("tabulated vorticity needs equal numbers of nodes and values")
        if not all(math.isfinite(v) for v in self.params):
            raise BadInputError("vorticity parameters must be finite")

    @classmethod
    def constant(cls, value: float) -> "Vorticity":
        return cls("constant", (float(value),))

    def __call__(self, psi):
        psi = np.asarray(psi, dtype=float)
        if self.kind == "constant":
            return np.full_like(psi, self.params[0])
        if self.kind == "polynomial":
            return np.polynomial.polynomial.polyval(psi, self.params)
        m = len(self.params) // 2
        nodes, vals = np.array(self.params[:m]), np.array(self.params[m:])
        return CubicSpline(nodes, vals)(psi)

    @property
    def is_zero(self) -> bool:
        return self.kind != "tabulated" and all(v == 0.0 for v in self.params)

    def to_dict(self) -> dict[str, Any]:
        if self.kind == "constant":
            return {"kind": "constant", "value": self.params[0]}
        if self.kind == "polynomial":
            return {"kind": "polynomial", "coeffs": list(self.params)}
        m = len(self.params) // 2
        return {"kind": "tabulated", "psi": list(self.params[:m]), "values": list(self.params[m:])}

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "Vorticity":
        kind = d.get("kind")
        try:
            if kind == "constant":
                return cls.constant(float(d["value"]))
            if kind == "polynomial":
                return cls("polynomial", tuple(float(c) for c in d["coeffs"]))
            if kind == "tabulated":
                psi, vals = list(d["psi"]), list(d["values"])
                if len(psi) != len(vals) or len(psi) < 2:
                    raise BadInputError("tabulated vorticity: psi and values must match (>= 2)")
                return cls("tabulated", tuple(float(v) for v in psi + vals))
        except (KeyError, TypeError) as exc:
            raise BadInputError(f"malformed vorticity entry: {exc}") from exc
        raise BadInputError(f"unknown vorticity kind {kind!r}")


@dataclass(frozen=True)
class PhysicalConfig:
    regime: Regime
    g: float
    rho_air: float
    rho_water: float
    p0: float
    p1: float = 0.0
    ell: Optional[float] = None
    gamma: Any = None  # Vorticity (lidded rotational) or float gamma0 (unbounded shear)
    depth_d: float = 1.0
    period_L: float = TWO_PI

    def __post_init__(self) -> None:
        object.__setattr__(self, "regime", Regime(self.regime))
        for name in ("g", "rho_air", "rho_water", "p0", "p1", "depth_d", "period_L"):
            if not math.isfinite(getattr(self, name)):
                raise BadInputError(f"{name} must be finite")
        if self.g <= 0:
            raise BadInputError("g must be positive")
        if not 0 < self.rho_air < self.rho_water:
            raise BadInputError("need 0 < rho_air < rho_water (stable stratification)")
        if self.period_L <= 0:
            raise BadInputError("period_L must be positive")
        if self.regime.lidded:
            if not self.p0 < self.p1 < 0:
                raise BadInputError("lidded regimes need p0 < p1 < 0")
            if self.ell is None or not math.isfinite(self.ell) or self.ell <= 0:
                raise BadInputError("lidded regimes need a positive lid height ell")
        else:
            if self.p0 >= 0:
                raise BadInputError("unbounded regimes need p0 < 0")
            if self.p1 != 0.0:
                raise BadInputError("unbounded regimes fix the interface streamline at p1 = 0")
            if self.depth_d <= 0:
                raise BadInputError("depth_d must be positive")
        if self.regime is Regime.LIDDED_ROTATIONAL:
            if not isinstance(self.gamma, Vorticity):
                raise BadInputError("lidded_rotational needs a Vorticity profile")
        elif self.regime is Regime.UNBOUNDED_SHEAR:
            if isinstance(self.gamma, bool) or not isinstance(self.gamma, (int, float)):
                raise BadInputError("unbounded_shear needs a scalar gamma0")
            if not math.isfinite(self.gamma):
                raise BadInputError("gamma0 must be finite")
            object.__setattr__(self, "gamma", float(self.gamma))
        elif self.gamma not in (None, 0, 0.0):
            raise BadInputError(f"{self.regime.value} takes no vorticity")

    @classmethod
    def with_gjump(cls, regime: Regime | str, gjump: float, **kw: Any) -> "PhysicalConfig":
        """Build a config from the product g*[[rho]] (g = 1, rho_air = 1)."""
        if gjump >= 0:
            raise BadInputError("g*[[rho]] must be negative")
        return cls(regime=Regime(regime), g=1.0, rho_air=1.0, rho_water=1.0 - gjump, **kw)

    @property
    def jump_rho(self) -> float:
        return self.rho_air - self.rho_water

    @property
    def gjump(self) -> float:
        """g times the density jump; negative."""
        return self.g * self.jump_rho

    @property
    def gamma0(self) -> float:
        return float(self.gamma) if self.regime is Regime.UNBOUNDED_SHEAR else 0.0

    def air_vorticity(self, p) -> np.ndarray:
        """gamma(-p) at air streamlines p (zero unless lidded rotational)."""
        p = np.asarray(p, dtype=float)
        if self.regime is Regime.LIDDED_ROTATIONAL:
            return self.gamma(-p)
        return np.zeros_like(p)

    def to_dict(self) -> dict[str, Any]:
        d: dict[str, Any] = {
            "regime": self.regime.value,
            "g": self.g,
            "rho_air": self.rho_air,
            "rho_water": self.rho_water,
            "p0": self.p0,
            "period_L": self.period_L,
        }
        if self.regime.lidded:
            d.update(p1=self.p1, ell=self.ell)
            if self.regime is Regime.LIDDED_ROTATIONAL:
                d["gamma"] = self.gamma.to_dict()
        else:
            d["depth_d"] = self.depth_d
            if self.regime is Regime.UNBOUNDED_SHEAR:
                d["gamma0"] = self.gamma
        return d

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "PhysicalConfig":
        if "regime" not in d:
            raise BadInputError("config needs a 'regime' discriminator")
        try:
            regime = Regime(d["regime"])
        except ValueError as exc:
            raise BadInputError(f"unknown regime {d['regime']!r}") from exc
        required = ["g", "rho_air", "rho_water", "p0"]
        if regime.lidded:
            required += ["p1", "ell"]
        else:
            required += ["depth_d"]
        if regime is Regime.LIDDED_ROTATIONAL:
            required.append("gamma")
        if regime is Regime.UNBOUNDED_SHEAR:
            required.append("gamma0")
        missing = [k for k in required if k not in d]
        if missing:
            raise BadInputError(f"config is missing physical fields: {', '.join(missing)}")
        try:
            kw: dict[str, Any] = {k: float(d[k]) for k in ("g", "rho_air", "rho_water", "p0")}
            if regime.lidded:
                kw.update(p1=float(d["p1"]), ell=float(d["ell"]))
            else:
                kw["depth_d"] = float(d["depth_d"])
            kw["period_L"] = float(d.get("period_L", TWO_PI))
        except (TypeError, ValueError) as exc:
            raise BadInputError(f"non-numeric physical field: {exc}") from exc
        if regime is Regime.LIDDED_ROTATIONAL:
            kw["gamma"] = Vorticity.from_dict(d["gamma"])
        elif regime is Regime.UNBOUNDED_SHEAR:
            try:
                kw["gamma"] = float(d["gamma0"])
            except (TypeError, ValueError) as exc:
                raise BadInputError("gamma0 must be a number") from exc
        return cls(regime=regime, **kw)


def jump_rho(cfg: PhysicalConfig) -> float:
    return cfg.jump_rho


@dataclass(frozen=True)
class GammaRelProfile:
    """Relative circulation Gamma_rel(p) on the air streamlines [p1, 0].

    Gamma_rel^2 is stored on a uniform grid and interpolated with a cubic
    spline; the running integral of 1/Gamma_rel (the laminar air height above
    the interface) is stored alongside.
    """

    p: np.ndarray
    sq: np.ndarray
    inv_cum: np.ndarray
    _sq_spline: CubicSpline = field(repr=False, compare=False)
    _inv_spline: CubicSpline = field(repr=False, compare=False)

    @classmethod
    def from_squares(cls, p: np.ndarray, sq: np.ndarray) -> "GammaRelProfile":
        p = np.asarray(p, dtype=float)
        sq = np.asarray(sq, dtype=float)
        if np.any(sq <= 0):
            raise InfeasibleError("relative circulation must stay positive", "COMPATIBILITY")
        inv_cum = cumulative_simpson(1.0 / np.sqrt(sq), x=p, initial=0.0)
        return cls(p, sq, inv_cum, CubicSpline(p, sq), CubicSpline(p, inv_cum))

    @property
    def values(self) -> np.ndarray:
        return np.sqrt(self.sq)

    @property
    def p1(self) -> float:
        return float(self.p[0])

    @property
    def at_p1(self) -> float:
        return float(math.sqrt(self.sq[0]))

    @property
    def minimum(self) -> float:
        return float(np.sqrt(self.sq.min()))

    @property
    def is_constant(self) -> bool:
        return bool(np.all(self.sq == self.sq[0]))

    @property
    def lid_integral(self) -> float:
        return float(self.inv_cum[-1])

    def __call__(self, p) -> np.ndarray:
        if self.is_constant:
            return np.full_like(np.asarray(p, dtype=float), self.at_p1)
        return np.sqrt(self._sq_spline(p))

    def square(self, p) -> np.ndarray:
        if self.is_constant:
            return np.full_like(np.asarray(p, dtype=float), self.sq[0])
        return self._sq_spline(p)

    def inverse_integral(self, p) -> np.ndarray:
        """Integral of 1/Gamma_rel from p1 to p."""
        p = np.asarray(p, dtype=float)
        if self.is_constant:
            return (p - self.p1) / self.at_p1
        out = self._inv_spline(p)
        # pin the end points to the stored quadrature values
        return np.where(p == self.p[-1], self.inv_cum[-1], np.where(p == self.p[0], 0.0, out))


def _grid(p1: float, n: int) -> np.ndarray:
    if n < 5 or n % 2 == 0:
        raise BadInputError("Gamma_rel grid needs an odd number of points >= 5")
    return np.linspace(p1, 0.0, n)


def gamma_rel_ideal(cfg: PhysicalConfig) -> float:
    """Constant relative circulation |p1|/ell of an irrotational lidded air layer."""
    if cfg.ell is None or cfg.ell <= 0:
        raise BadInputError("lid height must be positive")
    return abs(cfg.p1) / cfg.ell


def constant_profile(cfg: PhysicalConfig, n: int = 1025) -> GammaRelProfile:
    p = _grid(cfg.p1, n)
    return GammaRelProfile.from_squares(p, np.full_like(p, gamma_rel_ideal(cfg) ** 2))


def gamma_rel_from_vorticity(cfg: PhysicalConfig, n: int = 1025, tol: float = 1e-12) -> GammaRelProfile:
    """Solve d/dp Gamma^2 = 2 gamma(-p) with the lid constraint int dp/Gamma = ell.

    Writes Gamma^2 = c + 2 G(p), G(p) = int_{p1}^p gamma(-r) dr, and bisects on
    c = Gamma(p1)^2; the lid integral decreases strictly in c.
    """
    if cfg.ell is None or cfg.ell <= 0:
        raise BadInputError("lid height must be positive")
    if not cfg.regime.lidded:
        raise BadInputError("relative circulation profiles exist only in lidded regimes")
    if cfg.regime is Regime.LIDDED_IRROTATIONAL or cfg.gamma.is_zero:
        return constant_profile(cfg, n)
    p = _grid(cfg.p1, n)
    G = cumulative_simpson(cfg.air_vorticity(p), x=p, initial=0.0)
    c_min = max(0.0, float(-2.0 * G.min()))
    ell = float(cfg.ell)

    Gs = CubicSpline(p, G)
    touch = [float(p[np.argmin(G)])]

    def lid(c: float) -> float:
        # adaptive quadrature copes with the integrable blow-up where Gamma^2 nearly vanishes
        if np.any(c + 2.0 * G <= 0):
            return math.inf
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", IntegrationWarning)
            val, _ = quad(lambda r: 1.0 / math.sqrt(max(c + 2.0 * float(Gs(r)), 1e-300)), cfg.p1, 0.0,
                          points=touch if cfg.p1 < touch[0] < 0 else None, limit=200, epsabs=1e-14, epsrel=1e-13)
        return val

    def f(c: float) -> float:
        return lid(c) - ell

    lo = c_min + 1e-14 * max(1.0, c_min)
    # the integrand may blow up at the touching point; step off until finite
    step = 1e-12 * max(1.0, c_min)
    while not math.isfinite(lid(lo)) and step < 1.0 + c_min:
        lo = c_min + step
        step *= 10.0
    if f(lo) < 0:
        raise InfeasibleError(
            f"no positive Gamma_rel reaches lid height {ell:g}; the maximum is {lid(lo):.6g}",
            "COMPATIBILITY",
            lid(lo) - ell,
        )
    hi = max(1.0, 2.0 * lo)
    while f(hi) > 0:
        hi *= 4.0
        if hi > 1e300:
            raise NumericalFailure("could not bracket the circulation constant")
    c = bisect(f, lo, hi, xtol=tol, rtol=4 * np.finfo(float).eps, maxiter=2000)
    return GammaRelProfile.from_squares(p, c + 2.0 * G)


def gamma_rel_profile(cfg: PhysicalConfig, n: int = 1025) -> GammaRelProfile:
    """The relative circulation profile of either lidded regime."""
    if cfg.regime is Regime.LIDDED_IRROTATIONAL:
        return constant_profile(cfg, n)
    if cfg.regime is Regime.LIDDED_ROTATIONAL:
        return gamma_rel_from_vorticity(cfg, n)
    raise BadInputError("relative circulation profiles exist only in lidded regimes")


@dataclass(frozen=True)
class PeriodScaling:
    """Map between a period-L problem and the 2*pi-periodic one used internally.

    With sigma = L/(2 pi), heights scale by 1/sigma, g by sigma^3, gamma by
    sigma^2, lambda and Gamma_rel by sigma and Q by sigma^2.
    """

    sigma: float

    def lam_to_physical(self, lam: float) -> float:
        return lam / self.sigma

    def q_to_physical(self, q: float) -> float:
        return q / self.sigma**2

    def height_to_physical(self, h):
        return np.asarray(h) * self.sigma


def rescale_period(cfg: PhysicalConfig) -> tuple[PhysicalConfig, PeriodScaling]:
    """Return the equivalent 2*pi-periodic config and the scaling back."""
    sigma = cfg.period_L / TWO_PI
    s = PeriodScaling(sigma)
    if sigma == 1.0:
        return cfg, s
    gamma = cfg.gamma
    if isinstance(gamma, Vorticity):
        if gamma.kind == "tabulated":
            m = len(gamma.params) // 2
            gamma = Vorticity("tabulated", gamma.params[:m] + tuple(v * sigma**2 for v in gamma.params[m:]))
        else:
            gamma = Vorticity(gamma.kind, tuple(v * sigma**2 for v in gamma.params))
    elif cfg.regime is Regime.UNBOUNDED_SHEAR:
        gamma = gamma * sigma**2
    return (
        replace(
            cfg,
            g=cfg.g * sigma**3,
            ell=None if cfg.ell is None else cfg.ell / sigma,
            depth_d=cfg.depth_d / sigma,
            gamma=gamma,
            period_L=TWO_PI,
        ),
        s,
    )


def require_regime(cfg: PhysicalConfig, allowed: Sequence[Regime], what: str) -> None:
    if cfg.regime not in allowed:
        names = ", ".join(r.value for r in allowed)
        raise BadInputError(f"{what} needs regime in {{{names}}}, got {cfg.regime.value}")


def require_2pi(cfg: PhysicalConfig) -> None:
    if not math.isclose(cfg.period_L, TWO_PI, rel_tol=1e-14):
        raise BadInputError("solvers work with period 2*pi; call rescale_period first")
