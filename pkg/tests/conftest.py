from __future__ import annotations

import pytest
from hypothesis import settings

from cavityspec import SystemParams

settings.register_profile("default", max_examples=40, deadline=None)
settings.load_profile("default")


@pytest.fixture
def fig2():
    return SystemParams(g0=8.0, kappa=1.6, gamma=0.32)


@pytest.fixture
def fig4():
    return SystemParams(g0=38.0, kappa=43.0, gamma=0.1)
