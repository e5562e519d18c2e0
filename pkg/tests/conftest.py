from __future__ import annotations

import numpy as np
import pytest

from bifikinetic.collision import precompute_spectral
from bifikinetic.phase_space import PhaseGrid, maxwellian


@pytest.fixture(scope="session")
def grid16():
    return PhaseGrid(50, 16)


@pytest.fixture(scope="session")
def sk16(grid16):
    return precompute_spectral(grid16)


def mixture(grid, params):
    """Sum of Maxwellians; params is a list of (rho, (u1, u2), T)."""
    return sum(maxwellian(np.array(r), np.array(u), np.array(T), grid) for r, u, T in params)


def random_mixture(rng, grid, count=2):
    params = []
    for _ in range(count):
        params.append((rng.uniform(0.3, 1.0), tuple(rng.uniform(-0.8, 0.8, 2)), rng.uniform(0.6, 1.2)))
    return mixture(grid, params)


R_LIST = [1] + list(range(2, 31, 2))


@pytest.fixture(scope="session")
def study_runs(tmp_path_factory):
    """Lazily run and cache scaled convergence studies keyed by their settings."""
    from bifikinetic.harness.config import ExperimentConfig
    from bifikinetic.harness.pipeline import study
    from bifikinetic.scenarios import ScenarioConfig

    cache = {}

    def get(family="double_peak", epsilon=1e-4, n_test=50, r_list=tuple(R_LIST), **kw):
        key = (family, epsilon, n_test, tuple(r_list), tuple(sorted(kw.items())))
        if key not in cache:
            scen = ScenarioConfig(family=family, epsilon=epsilon, n_test=n_test, **kw)
            out = tmp_path_factory.mktemp(f"study_{family}")
            try:
                cache[key] = (out, study(ExperimentConfig(scen, budget=max(r_list)), list(r_list), out))
            except Exception as exc:  # remembered so dependent tests fail fast with the same cause
                cache[key] = (out, exc)
        out, report = cache[key]
        if isinstance(report, Exception):
            raise report
        return out, report

    return get


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
