"""
verify.py

The acceptance suite as plain functions, shared by the test-suite and the
``verify`` subcommand.  Each criterion returns a CriterionResult; nothing here
loosens a tolerance to make a check pass.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable

import numpy as np
from scipy.integrate import trapezoid
from scipy.optimize import bisect

from . import dispersion as disp
from . import height_pde as hp
from . import sl_eigen, strip_transform as st
from .core import InfeasibleError, PhysicalConfig, Regime, Vorticity, WindWaveError, gamma_rel_profile
from .diagnostics import snapshot
from .laminar import lambda_zero, q_lidded, q_unbounded


@dataclass
class CriterionResult:
    number: str
    name: str
    passed: bool
    detail: str
    seconds: float = 0.0
    data: dict = field(default_factory=dict)

    def line(self) -> str:
        return f"[{'PASS' if self.passed else 'FAIL'}] criterion {self.number} {self.name}: {self.detail} ({self.seconds:.2f} s)"


def _timed(number: str, name: str, fn: Callable[[], tuple[bool, str, dict]], budget: float | None = None) -> CriterionResult:
    t0 = time.perf_counter()
    try:
        ok, detail, data = fn()
    except WindWaveError as exc:
        ok, detail, data = False, f"{type(exc).__name__}: {exc}", {}
    dt = time.perf_counter() - t0
    if budget is not None and dt > budget:
        ok = False
        detail += f"; runtime {dt:.1f} s exceeds {budget:g} s"
    return CriterionResult(number, name, ok, detail, dt, data)


# --- reference configurations -------------------------------------------------

def desk_lidded() -> PhysicalConfig:
    """p0 = -2, p1 = -1, ell = 1 (Gamma_rel = 1), g[[rho]] = -1."""
    return PhysicalConfig.with_gjump(Regime.LIDDED_IRROTATIONAL, -1.0, p0=-2.0, p1=-1.0, ell=1.0)


def feasible_lidded() -> PhysicalConfig:
    """The desk geometry with g[[rho]] = -2, for which mode 1 does bifurcate."""
    return PhysicalConfig.with_gjump(Regime.LIDDED_IRROTATIONAL, -2.0, p0=-2.0, p1=-1.0, ell=1.0)


def feasible_rotational(gamma: float = 0.3) -> PhysicalConfig:
    return PhysicalConfig.with_gjump(Regime.LIDDED_ROTATIONAL, -2.0, p0=-2.0, p1=-1.0, ell=1.0,
                                     gamma=Vorticity.constant(gamma))


def desk_unbounded(gamma0: float | None = None) -> PhysicalConfig:
    if gamma0 is None:
        return PhysicalConfig.with_gjump(Regime.UNBOUNDED_IRROTATIONAL, -1.0, p0=-1.0)
    return PhysicalConfig.with_gjump(Regime.UNBOUNDED_SHEAR, -1.0, p0=-1.0, gamma=gamma0)


# --- 1 ------------------------------------------------------------------------

def criterion_1() -> CriterionResult:
    def run():
        cfg = desk_unbounded()
        lam = disp.solve_unbounded_lambda_star(cfg)
        m1 = lambda l: cfg.p0**2 / math.tanh(1.0) - l**2 + cfg.gjump  # noqa: E731
        ref = bisect(m1, 0.0, 2.0, xtol=1e-15, rtol=4 * np.finfo(float).eps)
        closed = math.sqrt(1.0 / math.tanh(1.0) - 1.0)
        err = max(abs(lam - ref), abs(lam - closed))
        return err <= 1e-10, f"lambda* = {lam:.15f}, |d| = {err:.2e} (tol 1e-10)", {"lam": lam, "err": err}

    return _timed("1", "closed-form bifurcation point", run, budget=1.0)


# --- 2 ------------------------------------------------------------------------

def criterion_2(cfg: PhysicalConfig | None = None) -> CriterionResult:
    cfg = desk_lidded() if cfg is None else cfg

    def run():
        G = cfg.p1 / -cfg.ell
        lam = disp.solve_ideal_lambda_n(cfg, G, 1)
        prof = gamma_rel_profile(cfg)
        nus, grids = [], []
        for n in (64, 128, 256, 512):
            grid = sl_eigen.Grid1D.make(cfg.p0, cfg.p1, n)
            res = sl_eigen.solve(cfg, prof, lam, grid)
            nus.append(res.nu)
            grids.append(res)
        errs = [abs(v + 1.0) for v in nus]
        ratios = [errs[i] / errs[i + 1] for i in range(3)]
        res = grids[-1]
        M_exact, _ = disp.eigenfunction_ideal(cfg, G, 1, lam, res.p)
        i = grid.interface
        M_num = res.M * (M_exact[i] / res.M[i])
        l2 = math.sqrt(trapezoid((M_num - M_exact) ** 2, x=res.p) / trapezoid(M_exact**2, x=res.p))
        ok = all(3.5 <= r <= 4.5 for r in ratios) and l2 <= 1e-4
        detail = (f"lambda_1* = {lam:.12f}, nu+1 = {', '.join(f'{e:.2e}' for e in errs)}, "
                  f"ratios = {', '.join(f'{r:.3f}' for r in ratios)}, eigenvector L2 error = {l2:.2e}")
        return ok, detail, {"lam": lam, "errors": errs, "ratios": ratios, "l2": l2}

    return _timed("2", "dispersion cross-validation", run, budget=10.0)


def desk_nu_floor(points: int = 64) -> float:
    """min over lambda of nu on the desk lidded config (mode 1 needs -1)."""
    cfg = desk_lidded()
    prof = gamma_rel_profile(cfg)
    lams = np.geomspace(1e-3, 20.0, points)
    return float(min(sl_eigen.nu(cfg, prof, l, 128) for l in lams))


# --- 3 ------------------------------------------------------------------------

def criterion_3() -> CriterionResult:
    def run():
        worst = {}
        for cfg in (desk_lidded(), feasible_rotational()):
            grid = hp.HeightGrid.make(cfg)
            prof = gamma_rel_profile(cfg)
            r = 0.0
            for lam in np.linspace(0.3, 2.0, 10):
                r = max(r, float(np.max(np.abs(hp.residual(hp.laminar_field(cfg, lam, grid, prof))))))
            worst[cfg.regime.value] = r
        sgrid = st.StripGrid.make(n_water=200, n_air=200)
        for cfg in (desk_unbounded(), desk_unbounded(-0.3)):
            solver = st.StripSolver(cfg, sgrid)
            r = 0.0
            for lam in np.linspace(0.1, 1.5, 10):
                r = max(r, float(np.max(np.abs(solver.G(lam, st.SurfaceShape.flat(), q_unbounded(cfg, lam))))))
            worst[cfg.regime.value] = r
        ok = all(worst[k] <= 1e-12 for k in ("lidded_irrotational", "lidded_rotational")) and all(
            worst[k] <= 1e-10 for k in ("unbounded_irrotational", "unbounded_shear"))
        return ok, ", ".join(f"{k} {v:.1e}" for k, v in worst.items()), worst

    return _timed("3", "laminar exactness", run)


# --- 4 ------------------------------------------------------------------------

def sample_lidded(rng: np.random.Generator) -> PhysicalConfig:
    p1 = -rng.uniform(0.3, 1.5)
    p0 = p1 - rng.uniform(0.5, 2.5)
    ell = rng.uniform(0.5, 2.0)
    gj = -rng.uniform(0.5, 6.0)
    if rng.random() < 0.5:
        return PhysicalConfig.with_gjump(Regime.LIDDED_IRROTATIONAL, gj, p0=p0, p1=p1, ell=ell)
    gam = Vorticity.constant(rng.uniform(-0.5, 0.5))
    return PhysicalConfig.with_gjump(Regime.LIDDED_ROTATIONAL, gj, p0=p0, p1=p1, ell=ell, gamma=gam)


def criterion_4(seed: int = 20240601, count: int = 20) -> CriterionResult:
    def run():
        rng = np.random.default_rng(seed)
        rows, tries = [], 0
        while len(rows) < count:
            tries += 1
            if tries > 50 * count:
                return False, f"only {len(rows)} feasible configs in {tries} draws", {}
            cfg = sample_lidded(rng)
            try:
                prof = gamma_rel_profile(cfg)
                lam = disp.bifurcate(cfg, gamma_rel=prof).lam_star
            except InfeasibleError:
                continue
            lam0 = lambda_zero(cfg)
            h = 1e-6 * lam
            dq = (q_lidded(cfg, prof.at_p1, lam + h) - q_lidded(cfg, prof.at_p1, lam - h)) / (2 * h)
            rows.append((abs(lam - lam0) / lam0, abs(dq)))
        sep = min(r[0] for r in rows)
        slope = min(r[1] for r in rows)
        ok = sep > 1e-6 and slope > 1e-8
        return ok, f"{count} configs ({tries} draws), min |l*-l0|/l0 = {sep:.3e}, min |dQ/dl| = {slope:.3e}", {"rows": rows}

    return _timed("4", "lambda* != lambda_0 and Q invertibility", run)


# --- 5 ------------------------------------------------------------------------

def sample_rotational(rng: np.random.Generator) -> PhysicalConfig:
    p1 = -rng.uniform(0.3, 1.5)
    p0 = p1 - rng.uniform(0.5, 2.5)
    coeffs = (rng.uniform(-0.5, 0.5), rng.uniform(-0.3, 0.3))
    return PhysicalConfig.with_gjump(Regime.LIDDED_ROTATIONAL, -rng.uniform(0.5, 6.0), p0=p0, p1=p1,
                                     ell=rng.uniform(0.5, 2.0), gamma=Vorticity("polynomial", coeffs))


def criterion_5(seed: int = 7, count: int = 5, points: int = 32) -> CriterionResult:
    def run():
        rng = np.random.default_rng(seed)
        violations, negatives, done = 0, 0, 0
        while done < count:
            cfg = sample_rotational(rng)
            try:
                prof = gamma_rel_profile(cfg)
            except InfeasibleError:
                continue
            lams = np.linspace(0.05, 3.0, points)
            nus = np.array([sl_eigen.nu(cfg, prof, l) for l in lams])
            neg = nus[:-1] < 0
            negatives += int(neg.sum())
            violations += int(np.sum(neg & (nus[1:] <= nus[:-1])))
            done += 1
        return violations == 0, f"{count} configs, {negatives} negative samples, violations = {violations}", {
            "violations": violations}

    return _timed("5", "nu monotonicity", run)


# --- 6 and 7 ------------------------------------------------------------------

AMPLITUDES = (1e-3, 2e-3, 4e-3)


@lru_cache(maxsize=4)
def branch_run(kind: str):
    """Continue the branch on a companion config; cached across criteria 6 and 7."""
    cfg = feasible_lidded() if kind == "irrotational" else feasible_rotational()
    prof = gamma_rel_profile(cfg)
    lam = disp.bifurcate(cfg, gamma_rel=prof).lam_star
    grid = hp.HeightGrid.make(cfg)
    t0 = time.perf_counter()
    pts, err = hp.continue_branch(cfg, lam, AMPLITUDES, grid, prof)
    return cfg, lam, pts, err, time.perf_counter() - t0


def criterion_6() -> CriterionResult:
    def run():
        parts, ok, data = [], True, {}
        for kind in ("irrotational", "rotational"):
            cfg, lam, pts, err, dt = branch_run(kind)
            if err is not None or len(pts) != len(AMPLITUDES):
                return False, f"{kind}: {err}", {}
            c = [float(np.max(np.abs(p.field.eta - p.s * np.cos(p.field.grid.q)))) / p.s**2 for p in pts]
            conv = all(p.residual <= 1e-10 and p.iterations <= 8 for p in pts)
            stable = all(abs(ci / c[0] - 1.0) <= 0.15 for ci in c)
            ok &= conv and stable and dt < 60.0
            parts.append(f"{kind}: iterations {[p.iterations for p in pts]}, C = {', '.join(f'{x:.4f}' for x in c)}")
            data[kind] = c
        return ok, "; ".join(parts), data

    return _timed("6", "branch asymptotics", run, budget=60.0)


def criterion_7() -> CriterionResult:
    def run():
        worst = {"F_E": 0.0, "F_E_spread": 0.0, "drag": 0.0, "pressure_jump": 0.0, "eta_mean": 0.0}
        n = 0
        for kind in ("irrotational", "rotational"):
            _, _, pts, err, _ = branch_run(kind)
            if err is not None:
                return False, f"{kind}: {err}", {}
            for p in pts:
                d = p.diagnostics or snapshot(p.field)
                if len(d["F_E"]) != 5:
                    return False, "expected 5 flux levels", {}
                worst["F_E"] = max(worst["F_E"], max(abs(v) for v in d["F_E"]))
                worst["F_E_spread"] = max(worst["F_E_spread"], d["F_E_spread"])
                worst["drag"] = max(worst["drag"], abs(d["drag"]), abs(d["drag_air"]))
                worst["pressure_jump"] = max(worst["pressure_jump"], d["pressure_jump"])
                worst["eta_mean"] = max(worst["eta_mean"], abs(d["eta_mean"]))
                n += 1
        ok = all(worst[k] <= 1e-8 for k in ("F_E", "F_E_spread", "drag", "pressure_jump")) and worst["eta_mean"] <= 1e-12
        return ok, f"{n} points, " + ", ".join(f"{k} {v:.1e}" for k, v in worst.items()), worst

    return _timed("7", "steady-wave momentum identities", run)


# --- 8 ------------------------------------------------------------------------

@lru_cache(maxsize=8)
def multiplier_table(gamma0: float | None, refine: int = 0):
    """FD multipliers for k = 1, 2, 3 at three lambda values: {(lam, k): value}."""
    cfg = desk_unbounded(gamma0)
    lam_star = disp.solve_unbounded_lambda_star(cfg)
    grid = st.StripGrid.make()
    for _ in range(refine):
        grid = grid.refine()
    solver = st.StripSolver(cfg, grid)
    lams = (0.4, lam_star, 0.9)
    return cfg, lams, {(lam, k): st.fd_multiplier(cfg, lam, k, solver=solver) for lam in lams for k in (1, 2, 3)}


def _compare(gamma0, symbol):
    cfg, lams, coarse = multiplier_table(gamma0, 0)
    _, _, fine = multiplier_table(gamma0, 1)
    e0 = {key: abs(v - 2 * symbol(cfg, key[1], key[0])) for key, v in coarse.items()}
    e1 = {key: abs(v - 2 * symbol(cfg, key[1], key[0])) for key, v in fine.items()}
    return e0, e1


def _multiplier_check(symbol, symbol_tilde, label: str):
    def run():
        parts, ok = [], True
        data = {}
        for gamma0, sym in ((None, symbol), (-0.3, symbol_tilde)):
            e0, e1 = _compare(gamma0, sym)
            worst0, worst1 = max(e0.values()), max(e1.values())
            within = worst0 <= 1e-4
            halves = worst1 <= 0.5 * worst0
            ok &= within and halves
            name = "ideal" if gamma0 is None else "shear"
            parts.append(f"{name}: max |fd - 2{label}| = {worst0:.2e} -> {worst1:.2e}")
            data[name] = (worst0, worst1)
        # gamma0 = 0 in the shear path must reproduce the ideal path exactly
        _, _, ideal = multiplier_table(None, 0)
        _, _, shear0 = multiplier_table(0.0, 0)
        same = all(ideal[k] == shear0[k] for k in ideal)
        ok &= same
        parts.append(f"gamma0 = 0 reduction exact: {same}")
        return ok, "; ".join(parts), data

    return run


def criterion_8() -> CriterionResult:
    run = _multiplier_check(disp.multiplier_m, disp.multiplier_m_tilde, "m")
    return _timed("8", "multiplier linearization", run, budget=60.0)


def companion_8() -> CriterionResult:
    """Same comparison against the symbol that G actually linearizes to."""

    def sym(cfg, k, lam):
        return disp.interface_symbol(cfg, k, lam)

    run = _multiplier_check(sym, sym, "s")
    return _timed("8b", "interface-symbol linearization", run)


# --- 9 ------------------------------------------------------------------------

def brute_k_star(p0: float, gjump: float, gamma0: float, d: float, k_max: int = 64):
    k = np.arange(1, k_max + 1, dtype=float)
    gm = min(gamma0, 0.0)
    val = p0**2 * k / np.tanh(k * d) / d**2 + gjump - gm**2 / 4 + gamma0 * gm / 2
    hit = np.nonzero(val > 0)[0]
    return int(k[hit[0]]) if hit.size else None


def criterion_9(seed: int = 99, count: int = 10) -> CriterionResult:
    def run():
        rng = np.random.default_rng(seed)
        trans, kst, tries = [], 0, 0
        while len(trans) < count:
            tries += 1
            cfg = PhysicalConfig.with_gjump(Regime.UNBOUNDED_SHEAR, -rng.uniform(0.2, 3.0), p0=-rng.uniform(0.5, 2.5),
                                            gamma=rng.uniform(-1.5, 1.5))
            if not disp.check_unbounded_lbc(cfg).passed:
                continue
            lam = disp.solve_unbounded_lambda_star(cfg)
            trans.append(2 * lam + cfg.gamma0)
            if disp.k_star(cfg) != brute_k_star(cfg.p0, cfg.gjump, cfg.gamma0, 1.0):
                kst += 1
        # general depth, where k* > 1 is possible
        mism, nontrivial = 0, 0
        for _ in range(40):
            cfg = PhysicalConfig.with_gjump(Regime.UNBOUNDED_SHEAR, -rng.uniform(0.2, 8.0), p0=-rng.uniform(0.3, 2.0),
                                            gamma=rng.uniform(-1.5, 1.5), depth_d=rng.uniform(0.3, 3.0))
            ref = brute_k_star(cfg.p0, cfg.gjump, cfg.gamma0, cfg.depth_d)
            try:
                got = disp.k_star(cfg)
            except InfeasibleError:
                got = None
            mism += got != ref
            nontrivial += bool(ref and ref > 1)
        ok = min(trans) > 0 and kst == 0 and mism == 0
        return ok, (f"{count} configs, min 2 lambda* + gamma0 = {min(trans):.3e}, k* mismatches {kst}; "
                    f"general depth: {mism} mismatches, {nontrivial} with k* > 1"), {"trans": trans}

    return _timed("9", "transversality and k*", run)


CRITERIA = {
    "1": criterion_1, "2": criterion_2, "3": criterion_3, "4": criterion_4, "5": criterion_5,
    "6": criterion_6, "7": criterion_7, "8": criterion_8, "9": criterion_9,
}


def run_all(seed: int | None = None, echo: Callable[[str], None] | None = print) -> list[CriterionResult]:
    results = []
    for key, fn in CRITERIA.items():
        r = fn(seed) if seed is not None and key in ("4", "5", "9") else fn()
        results.append(r)
        if echo:
            echo(r.line())
    return results
