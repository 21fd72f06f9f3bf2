"""Scenario factories for the shipped experiment configurations.

The default scenario uses the mmWave system parameters: 30 GHz carrier,
100 MHz bandwidth, -94 dBm user noise floor, four users at 10/15/20/25 m
with 10 dB SINR thresholds, a 30 dBm power budget, two clutter scatterers
at 0 and 90 degrees, and two candidate target directions at 45 and 30
degrees with squared gain 1e-3.

The radar receiver is noise-normalized (radar_noise_power = 1.0): clutter
and target gains are expressed relative to the radar noise floor, which is
the convention under which the echo-covariance regularizer is literally
the identity.  The alternative thermal-floor setting remains available
through the ``radar_noise_power`` config field.
"""

import math

from .scenario import ClutterConfig, ScenarioConfig, SolverOptions, UserConfig
from .arrays import ArrayGeometry

_DEG = math.pi / 180.0


def table1(n=8, gamma_db=10.0, seed=1, **overrides):
    """Default mmWave scenario; ``n`` sets both array sizes."""
    fields = dict(
        geometry=ArrayGeometry(n_tx=n, n_rx=n, spacing=0.5),
        carrier_ghz=30.0,
        bandwidth_hz=1.0e8,
        noise_dbm=-94.0,
        radar_noise_power=1.0,
        p_max_dbm=30.0,
        users=tuple(UserConfig(distance_m=d, sinr_threshold_db=gamma_db)
                    for d in (10.0, 15.0, 20.0, 25.0)),
        target_angles=(math.pi / 4.0, math.pi / 6.0),
        target_gain=1e-3,
        clutters=(ClutterConfig(angle=0.0, gain=1e-3),
                  ClutterConfig(angle=math.pi / 2.0, gain=1e-5)),
        seed=seed,
        solver=SolverOptions(),
    )
    fields.update(overrides)
    return ScenarioConfig(**fields)


def spread_scenario(lo_deg, hi_deg, i_count, n=8, gamma_db=10.0, seed=1, **overrides):
    """Scenario whose candidate directions span [lo_deg, hi_deg] with
    ``i_count`` equispaced angles (endpoints included)."""
    if i_count < 1:
        raise ValueError("i_count must be >= 1")
    if i_count == 1:
        angles = (lo_deg * _DEG,)
    else:
        step = (hi_deg - lo_deg) / (i_count - 1)
        angles = tuple((lo_deg + j * step) * _DEG for j in range(i_count))
    return table1(n=n, gamma_db=gamma_db, seed=seed, target_angles=angles, **overrides)


def fig6(n=8, gamma_db=10.0, seed=1, **overrides):
    """Beampattern-comparison scenario: targets at 15 and 30 degrees,
    clutter moved out to +/-90 degrees."""
    return table1(
        n=n, gamma_db=gamma_db, seed=seed,
        target_angles=(15.0 * _DEG, 30.0 * _DEG),
        clutters=(ClutterConfig(angle=90.0 * _DEG, gain=1e-3),
                  ClutterConfig(angle=-90.0 * _DEG, gain=1e-5)),
        **overrides,
    )
