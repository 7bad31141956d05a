from __future__ import annotations

import pytest

from windwave.core import PhysicalConfig, Regime, Vorticity


@pytest.fixture
def desk_lidded():
    return PhysicalConfig.with_gjump(Regime.LIDDED_IRROTATIONAL, -1.0, p0=-2.0, p1=-1.0, ell=1.0)


@pytest.fixture
def feasible_lidded():
    return PhysicalConfig.with_gjump(Regime.LIDDED_IRROTATIONAL, -2.0, p0=-2.0, p1=-1.0, ell=1.0)


@pytest.fixture
def feasible_rotational():
    return PhysicalConfig.with_gjump(Regime.LIDDED_ROTATIONAL, -2.0, p0=-2.0, p1=-1.0, ell=1.0,
                                     gamma=Vorticity.constant(0.3))


@pytest.fixture
def desk_unbounded():
    return PhysicalConfig.with_gjump(Regime.UNBOUNDED_IRROTATIONAL, -1.0, p0=-1.0)


def shear(gamma0: float, gjump: float = -1.0, p0: float = -1.0, **kw) -> PhysicalConfig:
    return PhysicalConfig.with_gjump(Regime.UNBOUNDED_SHEAR, gjump, p0=p0, gamma=gamma0, **kw)
