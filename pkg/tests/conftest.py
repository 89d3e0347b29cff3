import numpy as np
import pytest
from scipy.integrate import solve_ivp

from epochdd.spectral import ModeParams

# Defaults shared by the figure scenarios.
LAM, SIG, Z0 = 1.0, 2.5, 0.01


def scipy_flow(mode: ModeParams, times):
    """Independent reference: adaptive Runge-Kutta at tight tolerances."""
    times = np.asarray(times, dtype=float)

    def f(_, z):
        return np.sqrt(mode.gamma ** 2 + 4 * mode.eta ** 2 * z * z) * (mode.sigma - mode.lam * z)

    sol = solve_ivp(f, (0.0, float(times.max())), [mode.z0], t_eval=times, method="DOP853",
                    rtol=1e-12, atol=1e-14)
    assert sol.success
    return sol.y[0]


@pytest.fixture
def one_layer_mode():
    return ModeParams.from_eta(LAM, SIG, 0.0, 0.005, Z0, 0.5)


@pytest.fixture
def bridged_mode():
    return ModeParams.from_eta(LAM, SIG, 0.0025, 0.0025, Z0, 0.5)


@pytest.fixture
def balanced_mode():
    return ModeParams.from_eta(LAM, SIG, 0.005, 0.0, Z0, 0.5)
