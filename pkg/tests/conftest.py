import math
from pathlib import Path

import numpy as np
import pytest

from switchspde.ctmc import validate_generator
from switchspde.engine import LinearDynamics, Scenario, SemilinearDynamics
from switchspde.jumps import atomic, atomic_profile
from switchspde.spectral import dirichlet_basis

SCENARIOS = Path(__file__).resolve().parent.parent / "scenarios"


def linear_scenario(generator=((0.0,),), alpha=(1.0,), beta=(1.0,), jump_rate=None,
                    gamma=None, modes=16, mode=1, amplitude=1.0, T=5.0, dt=1e-2, r0=0,
                    length=math.pi):
    g = validate_generator(generator)
    b = dirichlet_basis(modes, length)
    u = np.zeros(modes)
    u[mode - 1] = amplitude
    meas = prof = None
    if jump_rate is not None:
        meas = atomic([jump_rate])
        prof = atomic_profile(meas, [list(gamma)])
    return Scenario(g, r0, b, u, LinearDynamics(alpha, beta), meas, prof, T, dt)


def example45(q=0.5, beta=(0.0, 0.0), jumps=False, T=5.0, dt=1e-2, modes=16):
    kw = dict(jump_rate=1.0, gamma=(0.2, -0.2)) if jumps else {}
    return linear_scenario(((-1.0, 1.0), (q, -q)), (3.0, -1.0), beta, T=T, dt=dt,
                           modes=modes, **kw)


def semilinear_scenario(drift, diffusion, generator=((0.0,),), b=None, d=None, modes=8,
                        jump_rate=None, gamma=None, T=1.0, dt=1e-2, initial=None):
    g = validate_generator(generator)
    basis = dirichlet_basis(modes, math.pi)
    u = np.zeros(modes)
    if initial is None:
        u[0] = 1.0
    else:
        u[:len(initial)] = initial
    meas = prof = None
    if jump_rate is not None:
        meas = atomic([jump_rate])
        prof = atomic_profile(meas, [list(gamma)])
    return Scenario(g, 0, basis, u, SemilinearDynamics(tuple(drift), tuple(diffusion), b, d),
                    meas, prof, T, dt)


@pytest.fixture
def scenarios_dir():
    return SCENARIOS


def pytest_terminal_summary(terminalreporter):
    mod = __import__("sys").modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in mod.summary_lines():
        terminalreporter.write_line(line)
