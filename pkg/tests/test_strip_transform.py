from __future__ import annotations

import math

import numpy as np
import pytest

from windwave import dispersion as disp
from windwave import strip_transform as st
from windwave.core import BadInputError, NumericalFailure
from windwave.laminar import q_unbounded

from conftest import shear


@pytest.fixture(scope="module")
def small():
    return st.StripGrid.make(nx=8, n_water=200, n_air=400)


def _first_order(grid, region, eps):
    """Linearized coefficients tau = T2 - y = -eta (1 + y) chi(y)."""
    y = grid.y_water if region == "water" else grid.y_air
    x = grid.x[:, None]
    Y = y[None, :]
    c, c1, c2 = st.chi(Y)
    eta, ex, exx = eps * np.cos(x), -eps * np.sin(x), -eps * np.cos(x)
    tx = -ex * (1 + Y) * c
    ty = -eta * (c + (1 + Y) * c1)
    lap = -exx * (1 + Y) * c - eta * (2 * c1 + (1 + Y) * c2)
    return {"A12": tx, "A22": 1 + 2 * ty, "B2": lap, "C21": tx, "C22": 1 + ty}


class TestFlatten:
    def test_flat_is_identity(self, small):
        for region in ("water", "air"):
            c = st.flatten_coeffs(st.SurfaceShape.flat(), small, region)
            for key, val in (("A11", 1), ("A12", 0), ("A22", 1), ("B1", 0), ("B2", 0),
                             ("C11", 1), ("C12", 0), ("C21", 0), ("C22", 1)):
                assert np.all(c[key] == val), key

    @pytest.mark.parametrize("region", ["water", "air"])
    def test_first_order_expansion(self, small, region):
        errs = []
        for eps in (1e-4, 5e-5):
            c = st.flatten_coeffs(st.SurfaceShape.mode(1, eps), small, region)
            ref = _first_order(small, region, eps)
            errs.append(max(np.max(np.abs(c[k] - ref[k])) for k in ref))
        # O(eps^2) with a constant set by the third derivative of chi at the foot of the blend
        assert errs[0] < 500 * 1e-4**2
        assert 3.5 < errs[0] / errs[1] < 4.5

    def test_identity_above_cutoff(self, small):
        c = st.flatten_coeffs(st.SurfaceShape.mode(1, 0.1), small, "air")
        above = small.y_air >= 2.0
        assert np.all(c["A12"][:, above] == 0) and np.allclose(c["A22"][:, above], 1, atol=0)
        np.testing.assert_array_equal(c["y"][:, above], np.broadcast_to(small.y_air[above], c["y"][:, above].shape))

    def test_inverse_map_roundtrip(self, small):
        surf = st.SurfaceShape(np.array([0.0, 0.08, -0.03]))
        y = st.inverse_map(surf, small.x, small.y_air)
        X = np.broadcast_to(small.x[:, None], y.shape)
        np.testing.assert_allclose(st._t2_partials(X, y, surf)["T2"], np.broadcast_to(small.y_air, y.shape), atol=1e-12)

    def test_non_monotone_map_rejected(self, small):
        # the cutoff slope limits the blend: |eta| (1 + y) max|chi'| must stay below 1 + eta
        with pytest.raises(NumericalFailure):
            st.inverse_map(st.SurfaceShape(np.array([0.0, 0.2, -0.05])), small.x, small.y_air)

    def test_large_amplitude_rejected(self, small):
        with pytest.raises(BadInputError):
            st.flatten_coeffs(st.SurfaceShape.mode(1, 1.0), small, "water")

    def test_surface_needs_zero_mean(self):
        with pytest.raises(BadInputError):
            st.SurfaceShape(np.array([0.1, 0.2]))


class TestSolves:
    def test_flat_air(self, small, desk_unbounded):
        psi = st.solve_psi_air(desk_unbounded, 0.7, st.SurfaceShape.flat(), small)
        np.testing.assert_allclose(psi, np.broadcast_to(-0.7 * small.y_air, psi.shape), rtol=0, atol=1e-15)

    def test_flat_water(self, small, desk_unbounded):
        psi = st.solve_psi_water(desk_unbounded, 0.7, st.SurfaceShape.flat(), small)
        np.testing.assert_allclose(psi, np.broadcast_to(desk_unbounded.p0 * small.y_water, psi.shape), rtol=0, atol=1e-15)

    def test_mode_decay(self, small, desk_unbounded):
        surf = st.SurfaceShape.mode(1, 1e-3)
        psi = st.solve_psi_air(desk_unbounded, 0.7, surf, small)
        phi1 = small.C[1] @ (psi + 0.7 * small.y_air[None, :])
        y = small.y_air
        sel = (y >= 2.0) & (y <= 4.0)
        j2 = np.argmin(np.abs(y - 2.0))
        ratio = (phi1[sel] / phi1[j2]) / np.exp(-(y[sel] - y[j2]))
        assert np.max(np.abs(ratio - 1)) < 0.05

    def test_doubling_height(self, desk_unbounded):
        grid = st.StripGrid.make(nx=8, n_water=200, n_air=800)
        surf = st.SurfaceShape.mode(1, 1e-4)
        a = st.surface_derivative(st.solve_psi_air(desk_unbounded, 0.7, surf, grid), grid, "air")
        tall = grid.taller(2.0)
        b = st.surface_derivative(st.solve_psi_air(desk_unbounded, 0.7, surf, tall), tall, "air")
        assert np.max(np.abs(a - b)) <= 1e-8

    def test_truncation_check(self, small, desk_unbounded):
        st.solve_psi_air(desk_unbounded, 0.7, st.SurfaceShape.mode(2, 1e-2), small, check_truncation=True)

    def test_water_residual(self, small, desk_unbounded):
        surf = st.SurfaceShape(np.array([0.0, 0.05, 0.02]))
        coef = st.flatten_coeffs(surf, small, "water")
        A, ops = st._operator(coef, small, "water")
        phi = st._phi_water(desk_unbounded, surf, small, coef)
        rhs = -desk_unbounded.p0 * coef["B2"].ravel() * ops["keep"]
        assert np.max(np.abs(A @ phi.ravel() - rhs)) <= 1e-10

    def test_even_solution(self, small, desk_unbounded):
        # unknowns live on [0, pi]; the cosine expansion defines the even extension
        surf = st.SurfaceShape(np.array([0.0, 0.05, 0.02]))
        psi = st.solve_psi_water(desk_unbounded, 0.7, surf, small)
        coeffs = small.C @ psi
        basis = np.cos(np.multiply.outer(small.x, np.arange(small.nx + 1)))
        np.testing.assert_allclose(basis @ coeffs, psi, atol=1e-12)
        xm = -small.x
        np.testing.assert_allclose(np.cos(np.multiply.outer(xm, np.arange(small.nx + 1))) @ coeffs, psi, atol=1e-12)


class TestG:
    @pytest.mark.parametrize("gamma0", [None, -0.5, 0.4])
    def test_laminar_consistency(self, small, desk_unbounded, gamma0):
        cfg = desk_unbounded if gamma0 is None else shear(gamma0)
        solver = st.StripSolver(cfg, small)
        for lam in np.linspace(0.2, 2.0, 10):
            assert np.max(np.abs(solver.G(lam, st.SurfaceShape.flat()))) <= 1e-10

    def test_affine_offset(self, small, desk_unbounded):
        r = st.evaluate_G(desk_unbounded, 0.8, st.SurfaceShape.flat(), q_unbounded(desk_unbounded, 0.8) + 0.25, small)
        np.testing.assert_allclose(r, -0.25, atol=1e-12)

    def test_shear_reduces(self, small, desk_unbounded):
        surf = st.SurfaceShape(np.array([0.0, 0.03, 0.01]))
        a = st.evaluate_G(desk_unbounded, 0.6, surf, grid=small)
        b = st.evaluate_G(shear(0.0), 0.6, surf, grid=small)
        np.testing.assert_array_equal(a, b)

    def test_zero_direction(self, small, desk_unbounded):
        np.testing.assert_array_equal(st.linearize_G_fd(desk_unbounded, 0.6, st.SurfaceShape.flat(), small), 0.0)

    def test_bounded_regime_rejected(self, small, feasible_lidded):
        with pytest.raises(BadInputError):
            st.StripSolver(feasible_lidded, small)


class TestLinearization:
    """The FD linearization reproduces 2 (p0^2 k coth k + lambda^2 k + g[[rho]] - gamma0 lambda).

    This differs from 2 m(k; lambda) by 4 lambda^2 k, so cos x is not a null
    direction at the root of m.
    """

    @pytest.fixture(scope="class")
    @classmethod
    def solvers(cls):
        grid = st.StripGrid.make()
        from windwave.verify import desk_unbounded

        return {g0: st.StripSolver(desk_unbounded(g0), grid) for g0 in (None, 0.5)}

    def test_mode_one_at_lambda_star(self, solvers):
        solver = solvers[None]
        cfg = solver.cfg
        lam = disp.solve_unbounded_lambda_star(cfg)
        fd = st.fd_multiplier(cfg, lam, 1, solver=solver)
        assert abs(disp.multiplier_m(cfg, 1, lam)) < 1e-14
        assert fd == pytest.approx(2 * disp.interface_symbol(cfg, 1, lam), abs=1e-4)
        assert fd == pytest.approx(4 * lam**2, abs=1e-4)

    @pytest.mark.parametrize("g0", [None, 0.5])
    def test_mode_two_generic_lambda(self, solvers, g0):
        solver = solvers[g0]
        fd = st.fd_multiplier(solver.cfg, 0.9, 2, solver=solver)
        assert fd == pytest.approx(2 * disp.interface_symbol(solver.cfg, 2, 0.9), abs=1e-4)
        assert abs(fd - 2 * disp.multiplier_m_tilde(solver.cfg, 2, 0.9)) == pytest.approx(8 * 0.81 * 2 / 2, rel=1e-3)

    def test_linearization_is_diagonal(self, solvers):
        solver = solvers[None]
        out = st.linearize_G_fd(solver.cfg, 0.9, st.SurfaceShape.mode(2), solver=solver)
        modes = solver.grid.C @ out
        off = np.delete(modes, 2)
        assert np.max(np.abs(off)) < 1e-6 * abs(modes[2])
