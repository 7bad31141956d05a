from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import brentq

from windwave.core import (
    BadInputError,
    InfeasibleError,
    PhysicalConfig,
    Regime,
    Vorticity,
    gamma_rel_from_vorticity,
    gamma_rel_ideal,
    rescale_period,
)


def lidded(p1=-1.0, ell=1.0, p0=None, gamma=None, gj=-1.0):
    p0 = p1 - 1.0 if p0 is None else p0
    if gamma is None:
        return PhysicalConfig.with_gjump(Regime.LIDDED_IRROTATIONAL, gj, p0=p0, p1=p1, ell=ell)
    return PhysicalConfig.with_gjump(Regime.LIDDED_ROTATIONAL, gj, p0=p0, p1=p1, ell=ell, gamma=gamma)


class TestGammaRelIdeal:
    def test_unit_case(self):
        assert gamma_rel_ideal(lidded(-1.0, 1.0)) == 1.0

    def test_division(self):
        assert gamma_rel_ideal(lidded(-2.0, 4.0, p0=-3.0)) == 0.5

    def test_degenerate_lid_rejected(self):
        with pytest.raises(BadInputError):
            lidded(-1.0, 0.0)


class TestGammaRelFromVorticity:
    def test_zero_vorticity_matches_ideal(self):
        prof = gamma_rel_from_vorticity(lidded(gamma=Vorticity.constant(0.0)))
        np.testing.assert_allclose(prof.values, 1.0, rtol=0, atol=1e-15)

    def test_unit_vorticity_closed_form(self):
        # gamma(psi) = -1: Gamma^2 = C - 2p, lid integral sqrt(C + 2) - sqrt(C)
        ell = math.sqrt(3.0) - 1.0
        C_oracle = brentq(lambda C: math.sqrt(C + 2) - math.sqrt(C) - ell, 1e-6, 10.0, xtol=1e-15)
        assert abs(C_oracle - 1.0) < 1e-12
        prof = gamma_rel_from_vorticity(lidded(ell=ell, gamma=Vorticity.constant(-1.0)))
        np.testing.assert_allclose(prof.sq, 1.0 - 2.0 * prof.p, atol=1e-10)
        assert abs(prof.lid_integral - ell) < 1e-10

    def test_ode_residual(self):
        cfg = lidded(ell=1.3, gamma=Vorticity("polynomial", (0.2, -0.5, 0.3)))
        prof = gamma_rel_from_vorticity(cfg)
        dsq = np.gradient(prof.sq, prof.p, edge_order=2)
        np.testing.assert_allclose(dsq, 2 * cfg.air_vorticity(prof.p), atol=1e-5)

    def test_degenerate_lid_rejected(self):
        with pytest.raises(BadInputError):
            lidded(ell=-1.0, gamma=Vorticity.constant(0.0))

    def test_unreachable_lid_is_infeasible(self):
        # strong negative vorticity caps the attainable lid height
        with pytest.raises(InfeasibleError):
            gamma_rel_from_vorticity(lidded(ell=50.0, gamma=Vorticity.constant(-5.0)))

    @settings(max_examples=25, deadline=None)
    @given(p1=st.floats(-3.0, -0.1), ell=st.floats(0.1, 5.0))
    def test_zero_vorticity_property(self, p1, ell):
        prof = gamma_rel_from_vorticity(lidded(p1=p1, ell=ell, gamma=Vorticity.constant(0.0)))
        assert np.max(np.abs(prof.values - abs(p1) / ell)) <= 1e-14 * max(1.0, abs(p1) / ell)

    @settings(max_examples=20, deadline=None)
    @given(c0=st.floats(-0.5, 0.5), c1=st.floats(-0.5, 0.5), ell=st.floats(0.5, 2.0))
    def test_lid_constraint_property(self, c0, c1, ell):
        cfg = lidded(ell=ell, gamma=Vorticity("polynomial", (c0, c1)))
        try:
            prof = gamma_rel_from_vorticity(cfg)
        except InfeasibleError:
            return
        assert prof.minimum > 0
        # grid quadrature of 1/Gamma loses accuracy only when Gamma nearly touches zero
        tol = 1e-9 if prof.minimum > 0.2 else 1e-6
        assert abs(prof.lid_integral - ell) < tol


class TestConfig:
    def test_roundtrip_all_regimes(self):
        cfgs = [
            lidded(),
            lidded(gamma=Vorticity("polynomial", (0.1, 0.2))),
            PhysicalConfig.with_gjump(Regime.UNBOUNDED_IRROTATIONAL, -1.0, p0=-1.0),
            PhysicalConfig.with_gjump(Regime.UNBOUNDED_SHEAR, -1.0, p0=-1.0, gamma=0.4),
        ]
        for cfg in cfgs:
            assert PhysicalConfig.from_dict(cfg.to_dict()) == cfg

    def test_missing_physics_rejected(self):
        d = lidded().to_dict()
        del d["rho_water"]
        with pytest.raises(BadInputError, match="rho_water"):
            PhysicalConfig.from_dict(d)

    def test_unstable_stratification_rejected(self):
        with pytest.raises(BadInputError):
            PhysicalConfig(Regime.LIDDED_IRROTATIONAL, 1.0, 2.0, 1.0, -2.0, -1.0, 1.0)

    def test_gjump_sign(self):
        assert lidded(gj=-1.5).gjump == pytest.approx(-1.5)

    def test_rescale_identity_at_2pi(self):
        cfg = lidded()
        assert rescale_period(cfg)[0] is cfg

    def test_rescale_period(self):
        cfg = PhysicalConfig.with_gjump(Regime.UNBOUNDED_SHEAR, -1.0, p0=-1.0, gamma=0.5, period_L=4 * math.pi)
        scaled, s = rescale_period(cfg)
        assert s.sigma == 2.0
        assert scaled.period_L == pytest.approx(2 * math.pi)
        assert scaled.g == 8.0 and scaled.gamma0 == 2.0 and scaled.depth_d == 0.5
