"""Shared fixtures: the two reference cavity models and their syntheses.

Everything expensive is session-scoped; the acceptance tests additionally
collect one summary line per criterion, printed after the run so the
verdicts are visible even when every test passes.
"""

import numpy as np
import pytest

from qgcc.modelfile import CavitySpec, make_cavity, realize_model

_ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def acceptance_log():
    return _ACCEPTANCE_LINES


@pytest.fixture(scope="session")
def cavity_spec():
    return CavitySpec(kappa1=2.0, kappa2=2.0, kappa3=2.0, delta0=1.0)


@pytest.fixture(scope="session")
def detuning_spec():
    return CavitySpec(kappa1=2.0, kappa2=2.0, kappa3=2.0, delta0=0.0,
                      Omega0=0.0, epsilon0=1.0, uncertainty="detuning")


@pytest.fixture(scope="session")
def cavity_model(cavity_spec):
    sys, w, t_f = realize_model(make_cavity(cavity_spec, t_f=100.0))
    return sys, w, t_f


@pytest.fixture(scope="session")
def detuning_model(detuning_spec):
    sys, w, t_f = realize_model(make_cavity(detuning_spec, t_f=100.0))
    return sys, w, t_f


@pytest.fixture(scope="session")
def cavity_synthesis(cavity_model):
    from qgcc.synthesis import synthesize
    sys, w, t_f = cavity_model
    return synthesize(sys, w, 1.41, t_f, mode="steady-state")


@pytest.fixture(scope="session")
def detuning_synthesis(detuning_model):
    from qgcc.synthesis import synthesize
    sys, w, t_f = detuning_model
    return synthesize(sys, w, 0.9, t_f, mode="steady-state")


@pytest.fixture(scope="session")
def nominal_closed_loop(cavity_model, cavity_synthesis):
    from qgcc.model import Uncertainty, assemble_closed_loop
    sys, _, _ = cavity_model
    zero = Uncertainty(np.zeros((sys.n_v, sys.delta_cols)))
    return assemble_closed_loop(sys, cavity_synthesis.controller, zero)
