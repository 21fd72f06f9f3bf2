import math

import numpy as np
import pytest

from dfrcopt import ClutterConfig, ScenarioConfig, SolverOptions, UserConfig
from dfrcopt.arrays import ArrayGeometry

_ACCEPTANCE_RESULTS = []


def record_acceptance(number, name, passed, detail=""):
    _ACCEPTANCE_RESULTS.append((number, name, bool(passed), detail))


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _ACCEPTANCE_RESULTS:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for num, name, ok, detail in sorted(_ACCEPTANCE_RESULTS):
        status = "PASS" if ok else "FAIL"
        suffix = f"  ({detail})" if detail else ""
        terminalreporter.write_line(f"[{status}] criterion {num:2d}: {name}{suffix}")


def small_scenario(seed=0, k=2, n_tx=3, n_rx=4, i_count=2, j_count=2,
                   gamma_db=5.0, radar_noise=1.0, **overrides):
    """Compact random-ish scenario for fast unit tests."""
    target_angles = tuple(np.linspace(0.4, 0.9, i_count))
    clutter_angles = np.linspace(-0.9, -0.2, max(j_count, 1))[:j_count]
    fields = dict(
        geometry=ArrayGeometry(n_tx=n_tx, n_rx=n_rx, spacing=0.5),
        carrier_ghz=30.0,
        bandwidth_hz=1.0e8,
        noise_dbm=-94.0,
        radar_noise_power=radar_noise,
        p_max_dbm=30.0,
        users=tuple(UserConfig(distance_m=10.0 + 5.0 * i, sinr_threshold_db=gamma_db)
                    for i in range(k)),
        target_angles=target_angles,
        target_gain=1e-3,
        clutters=tuple(ClutterConfig(angle=float(a), gain=1e-3 * (0.5 ** j))
                       for j, a in enumerate(clutter_angles)),
        seed=seed,
        solver=SolverOptions(),
    )
    fields.update(overrides)
    return ScenarioConfig(**fields)


def random_unit(rng, n):
    v = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    return v / np.linalg.norm(v)


def random_stacked(rng, k, n_tx, power=1.0):
    from dfrcopt import StackedBeamformer

    v = rng.standard_normal(k * n_tx) + 1j * rng.standard_normal(k * n_tx)
    v *= math.sqrt(power) / np.linalg.norm(v)
    return StackedBeamformer(v, n_tx=n_tx)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
