from __future__ import annotations

import math

import numpy as np
import pytest

from windwave import diagnostics as dg
from windwave import height_pde as hp
from windwave.core import BadInputError, gamma_rel_profile
from windwave.dispersion import bifurcate


@pytest.fixture(scope="module")
def cases():
    from windwave.verify import feasible_lidded, feasible_rotational

    out = {}
    for name, cfg in (("irrotational", feasible_lidded()), ("rotational", feasible_rotational())):
        prof = gamma_rel_profile(cfg)
        lam = bifurcate(cfg, gamma_rel=prof).lam_star
        grid = hp.HeightGrid.make(cfg)
        pts, err = hp.continue_branch(cfg, lam, [1e-3, 2e-3, 4e-3], grid, prof)
        assert err is None
        out[name] = (cfg, prof, lam, grid, pts)
    return out


KINDS = ["irrotational", "rotational"]


def test_mirror_and_mean():
    f = np.array([1.0, 2.0, 3.0, 4.0])
    np.testing.assert_array_equal(dg.mirror(f), [1, 2, 3, 4, 3, 2])
    np.testing.assert_array_equal(dg.mirror(f, odd=True), [1, 2, 3, 4, -3, -2])
    x = np.linspace(0, 2 * np.pi, 12, endpoint=False)
    assert dg.period_mean(np.cos(x) ** 2) == pytest.approx(0.5)


@pytest.mark.parametrize("kind", KINDS)
def test_laminar_velocities(cases, kind):
    cfg, prof, lam, grid, _ = cases[kind]
    f = hp.laminar_field(cfg, 0.9, grid, prof, base_lam=lam)
    E = dg.eulerian_from_height(f)
    np.testing.assert_allclose(E.water.u_minus_c, -0.9 / math.sqrt(cfg.rho_water), rtol=1e-12)
    np.testing.assert_allclose(E.air.u_minus_c, np.broadcast_to(-prof(grid.pa) / math.sqrt(cfg.rho_air), E.air.u_minus_c.shape),
                               rtol=1e-9)
    assert np.max(np.abs(E.water.v)) <= 1e-14 and np.max(np.abs(E.air.v)) <= 1e-14
    assert np.max(np.abs(E.eta)) <= 1e-15


@pytest.mark.parametrize("kind", KINDS)
def test_laminar_identities(cases, kind):
    cfg, prof, lam, grid, _ = cases[kind]
    f = hp.laminar_field(cfg, lam, grid, prof)
    E = dg.eulerian_from_height(f)
    assert np.all(dg.momentum_flux_FE(E, dg.default_levels(E)) == 0)
    assert dg.drag_force(E) == 0
    np.testing.assert_allclose(dg.relative_circulation(f, grid.pa), prof(grid.pa), atol=1e-12)
    assert dg.bernoulli_jump_check(E) <= 1e-12
    assert dg.bernoulli_jump_check(E, f.Q + 0.3) == pytest.approx(0.3, abs=1e-12)
    assert dg.pressure_jump(E) <= 1e-12


def test_laminar_streamline_roundtrip(cases):
    cfg, prof, lam, grid, _ = cases["rotational"]
    f = hp.laminar_field(cfg, lam, grid, prof)
    E = dg.eulerian_from_height(f)
    base = f.base
    np.testing.assert_allclose(E.water.y[0] + E.depth, base.height(grid.pw), atol=1e-12)
    np.testing.assert_allclose(E.air.y[0] + E.depth, base.height(grid.pa), atol=1e-10)


@pytest.mark.parametrize("kind", KINDS)
def test_converged_wave_identities(cases, kind):
    pts = cases[kind][4]
    for p in pts:
        d = p.diagnostics
        assert max(abs(v) for v in d["F_E"]) <= 1e-8
        assert d["F_E_spread"] <= 1e-8
        assert abs(d["drag"]) <= 1e-8 and abs(d["drag_air"]) <= 1e-8
        assert abs(d["drag"] - d["drag_air"]) <= max(1e-12, d["pressure_jump"])
        assert d["pressure_jump"] <= 1e-8
        assert d["bernoulli_resid"] <= 1e-8
        assert d["kinematic_resid"] <= 1e-8
        assert abs(d["eta_mean"]) <= 1e-12


@pytest.mark.parametrize("kind", KINDS)
def test_circulation_error_is_second_order(cases, kind):
    # the discrete relative circulation drifts from the prescription at O(s^2)
    pts = cases[kind][4]
    err = [p.diagnostics["circ_err"] for p in pts]
    assert err[0] < 1e-5
    assert 3.4 < err[1] / err[0] < 4.6 and 3.4 < err[2] / err[1] < 4.6


def test_first_order_wave_flux_vanishes(cases):
    # even symmetry makes (u - c) v odd in x, so the flux of the uncorrected wave is round-off too
    cfg, prof, lam, grid, _ = cases["irrotational"]
    E = dg.eulerian_from_height(hp.first_order_wave(cfg, lam, 4e-3, grid, prof))
    assert np.max(np.abs(dg.momentum_flux_FE(E, dg.default_levels(E)))) <= 1e-15
    assert dg.bernoulli_jump_check(E) > 1e-7  # but it is not a solution


def test_level_validation(cases):
    cfg, prof, lam, grid, pts = cases["irrotational"]
    E = dg.eulerian_from_height(pts[-1].field)
    with pytest.raises(BadInputError, match="surface"):
        dg.momentum_flux_FE(E, [0.0])
    with pytest.raises(BadInputError, match="bed"):
        dg.momentum_flux_FE(E, [-E.depth - 0.1])
    with pytest.raises(BadInputError, match="lid"):
        dg.momentum_flux_FE(E, [10.0])


def test_circulation_domain(cases):
    cfg, prof, lam, grid, pts = cases["irrotational"]
    f = pts[0].field
    vals = dg.relative_circulation(f, [cfg.p1, 0.0])
    assert vals.shape == (2,)
    with pytest.raises(BadInputError):
        dg.relative_circulation(f, cfg.p1 - 0.1)
    with pytest.raises(BadInputError):
        dg.relative_circulation(f, 0.1)
