import numpy as np
import pytest

from upkeep.model import ComponentModel
from upkeep.scenario import decay_rows


@pytest.fixture
def boiler_like():
    """Stochastic 100-state component with the reference cost profile."""
    decay = decay_rows(
        "mixture", 100,
        dict(max_drop=8, drop_prob=0.40, shock_drop=28, shock_prob=0.05),
    )
    return ComponentModel(name="boiler", s_max=100, decay=decay,
                          cost_d=0, cost_q=1, cost_m=45)


@pytest.fixture
def small_stochastic():
    """Three-state component with a hand-written decay table."""
    decay = np.array([
        [1.0, 0.0, 0.0],
        [0.4, 0.6, 0.0],
        [0.1, 0.6, 0.3],
    ])
    return ComponentModel(name="widget", s_max=2, decay=decay,
                          cost_d=0, cost_q=1, cost_m=5)
