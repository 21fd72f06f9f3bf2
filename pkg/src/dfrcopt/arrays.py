"""Uniform linear array steering vectors, response matrices, and beampatterns."""

from dataclasses import dataclass

import numpy as np

from .errors import ConfigValidationError

_HALF_PI = np.pi / 2.0


@dataclass(frozen=True)
class ArrayGeometry:
    """Transmit/receive ULA sizes and element spacing in carrier wavelengths."""

    n_tx: int
    n_rx: int
    spacing: float = 0.5

    def __post_init__(self):
        if int(self.n_tx) < 1 or int(self.n_rx) < 1:
            raise ConfigValidationError("geometry: n_tx and n_rx must be >= 1")
        if not np.isfinite(self.spacing) or self.spacing <= 0:
            raise ConfigValidationError("geometry.spacing must be positive and finite")


def validate_angle(theta, name="angle"):
    """Check that an angle is finite and inside the ULA field of view [-pi/2, pi/2].

    Out-of-range angles are rejected rather than wrapped: a ULA cannot
    distinguish wrapped directions, so wrapping would be silently wrong.
    """
    theta = float(theta)
    if not np.isfinite(theta):
        raise ConfigValidationError(f"{name} must be finite, got {theta!r}")
    if theta < -_HALF_PI - 1e-12 or theta > _HALF_PI + 1e-12:
        raise ConfigValidationError(f"{name}={theta!r} is outside [-pi/2, pi/2]")
    return theta


def _steering(n, spacing, theta):
    # Stored entries carry phase +2*pi*n*spacing*sin(theta).  Only relative
    # phases affect downstream quantities; the sign convention is fixed here.
    phase = 2.0 * np.pi * spacing * np.sin(theta) * np.arange(n)
    return np.exp(1j * phase)


def tx_steering(geom, theta):
    """Transmit steering vector of length n_tx toward ``theta`` (radians)."""
    validate_angle(theta)
    return _steering(geom.n_tx, geom.spacing, theta)


def rx_steering(geom, theta):
    """Receive steering vector of length n_rx toward ``theta`` (radians)."""
    validate_angle(theta)
    return _steering(geom.n_rx, geom.spacing, theta)


def response_matrix(geom, theta):
    """Rank-one array response a_r(theta) a_t(theta)^H, shape (n_rx, n_tx)."""
    return np.outer(rx_steering(geom, theta), tx_steering(geom, theta).conj())


def rx_beampattern(w, geom, grid):
    """Receive gain |w^H a_r(theta)|^2 on a grid of angles, linear scale.

    ``w`` must have unit norm; exporting code converts the gains to dB.
    An empty grid yields an empty output.
    """
    w = np.asarray(getattr(w, "w", w))
    gains = np.empty(len(grid), dtype=float)
    for idx, theta in enumerate(grid):
        gains[idx] = abs(np.vdot(w, rx_steering(geom, theta))) ** 2
    return gains
