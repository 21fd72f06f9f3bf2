"""Scenario configuration, unit conversions, and seeded channel generation.

Configs are stored as JSON with powers in dBm; everything internal works in
linear watts.  All randomness flows from the single config seed through a
``numpy.random.default_rng`` generator, so a (config, seed) pair reproduces
channels bit-exactly.
"""

import hashlib
import json
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .arrays import ArrayGeometry, validate_angle
from .errors import ConfigParseError, ConfigValidationError

_MIN_ANGLE_SEPARATION = 1e-9


def dbm_to_watts(x_dbm):
    """Convert a power in dBm to linear watts: 10^((x - 30) / 10)."""
    return 10.0 ** ((float(x_dbm) - 30.0) / 10.0)


def watts_to_dbm(x_w):
    """Convert a positive linear power in watts to dBm."""
    if x_w <= 0:
        raise ValueError("watts_to_dbm requires a positive power")
    return 10.0 * math.log10(float(x_w)) + 30.0


def pathloss_db(distance_m, carrier_ghz):
    """3GPP UMi line-of-sight pathloss in dB at distance (m) and carrier (GHz)."""
    if distance_m <= 0:
        raise ConfigValidationError("distance_m must be positive")
    return 32.4 + 21.0 * math.log10(float(distance_m)) + 20.0 * math.log10(float(carrier_ghz))


@dataclass(frozen=True)
class UserConfig:
    distance_m: float
    sinr_threshold_db: float

    def __post_init__(self):
        if not np.isfinite(self.distance_m) or self.distance_m <= 0:
            raise ConfigValidationError("users[].distance_m must be positive and finite")
        if not np.isfinite(self.sinr_threshold_db):
            raise ConfigValidationError("users[].sinr_threshold_db must be finite")


@dataclass(frozen=True)
class ClutterConfig:
    angle: float
    gain: float

    def __post_init__(self):
        validate_angle(self.angle, "clutters[].angle")
        if not np.isfinite(self.gain) or self.gain < 0:
            raise ConfigValidationError("clutters[].gain must be finite and >= 0")


@dataclass(frozen=True)
class SolverOptions:
    """Numerical knobs for the optimization loops.

    ``phi_noise_model`` selects the regularization of the stacked clutter
    form: ``"sigma_r"`` scales the identity by radar noise over the power
    budget (the default, consistent with the fixed-combiner SCNR
    denominator); ``"n_rx"`` scales it by the receive array size instead,
    kept only as an auditability switch.
    """

    kkt_tol: float = 1e-8
    max_iter: int = 200
    penalty_eta: float = 1e2
    penalty_nu: float = 1e6
    inner_s: int = 5
    outer_d_max: int = 30
    epsilon: float = 1e-4
    dinkelbach_tol: float = 1e-8
    phi_noise_model: str = "sigma_r"

    def __post_init__(self):
        for name in ("kkt_tol", "max_iter", "penalty_eta", "penalty_nu",
                     "inner_s", "outer_d_max", "epsilon", "dinkelbach_tol"):
            value = getattr(self, name)
            if not np.isfinite(value) or value <= 0:
                raise ConfigValidationError(f"solver.{name} must be positive")
        if self.phi_noise_model not in ("sigma_r", "n_rx"):
            raise ConfigValidationError("solver.phi_noise_model must be 'sigma_r' or 'n_rx'")


@dataclass(frozen=True)
class ScenarioConfig:
    """Immutable description of one scenario.

    ``target_gain`` is the squared target channel magnitude, either one
    shared value or one per candidate angle.  ``radar_noise_power`` is the
    linear radar receiver noise power; when omitted in a file it defaults
    to ``dbm_to_watts(noise_dbm)``.
    """

    geometry: ArrayGeometry
    carrier_ghz: float
    bandwidth_hz: float
    noise_dbm: float
    p_max_dbm: float
    users: tuple
    target_angles: tuple
    target_gain: object
    clutters: tuple
    seed: int
    solver: SolverOptions = field(default_factory=SolverOptions)
    radar_noise_power: float = None

    def __post_init__(self):
        object.__setattr__(self, "users", tuple(self.users))
        object.__setattr__(self, "clutters", tuple(self.clutters))
        object.__setattr__(self, "target_angles",
                           tuple(float(a) for a in self.target_angles))
        if self.radar_noise_power is None:
            object.__setattr__(self, "radar_noise_power", dbm_to_watts(self.noise_dbm))
        if not self.users:
            raise ConfigValidationError("users must be nonempty")
        if not self.target_angles:
            raise ConfigValidationError("target_angles must be nonempty")
        for pos, theta in enumerate(self.target_angles):
            validate_angle(theta, f"target_angles[{pos}]")
        if self.carrier_ghz <= 0 or not np.isfinite(self.carrier_ghz):
            raise ConfigValidationError("carrier_ghz must be positive")
        if self.bandwidth_hz <= 0 or not np.isfinite(self.bandwidth_hz):
            raise ConfigValidationError("bandwidth_hz must be positive")
        if not np.isfinite(self.noise_dbm):
            raise ConfigValidationError("noise_dbm must be finite")
        if not np.isfinite(self.p_max_dbm):
            raise ConfigValidationError("p_max_dbm must be finite")
        if not np.isfinite(self.radar_noise_power) or self.radar_noise_power <= 0:
            raise ConfigValidationError("radar_noise_power must be positive")
        gains = np.atleast_1d(np.asarray(self.target_gain, dtype=float))
        if gains.ndim != 1 or len(gains) not in (1, len(self.target_angles)):
            raise ConfigValidationError(
                "target_gain must be a scalar or one value per target angle")
        if np.any(~np.isfinite(gains)) or np.any(gains < 0):
            raise ConfigValidationError("target_gain values must be finite and >= 0")
        if int(self.seed) < 0:
            raise ConfigValidationError("seed must be a nonnegative integer")
        # A target sitting exactly on a clutter scatterer is physically
        # indistinguishable from it; reject instead of solving a degenerate
        # problem.  Duplicate target angles are allowed (min over duplicates
        # is well defined).
        for ti, theta in enumerate(self.target_angles):
            for cj, cl in enumerate(self.clutters):
                if abs(theta - cl.angle) < _MIN_ANGLE_SEPARATION:
                    raise ConfigValidationError(
                        f"target_angles[{ti}] coincides with clutters[{cj}].angle")

    @property
    def k_users(self):
        return len(self.users)

    @property
    def n_targets(self):
        return len(self.target_angles)

    @property
    def n_clutter(self):
        return len(self.clutters)

    @property
    def p_max_w(self):
        return dbm_to_watts(self.p_max_dbm)

    @property
    def noise_w(self):
        return dbm_to_watts(self.noise_dbm)

    def target_gains(self):
        """Per-candidate squared target gains as an array of length I."""
        gains = np.atleast_1d(np.asarray(self.target_gain, dtype=float))
        if len(gains) == 1:
            gains = np.full(self.n_targets, gains[0])
        return gains

    def clutter_gains(self):
        return np.array([c.gain for c in self.clutters], dtype=float)

    def clutter_angles(self):
        return np.array([c.angle for c in self.clutters], dtype=float)

    def sinr_thresholds_linear(self):
        return np.array([10.0 ** (u.sinr_threshold_db / 10.0) for u in self.users])


@dataclass(frozen=True)
class ChannelSet:
    """Per-user downlink channels h_k with their generation metadata."""

    h: np.ndarray
    pathloss_db: np.ndarray
    seed: int


def generate_channels(config):
    """Draw the per-user channel vectors for a scenario.

    h_k = sqrt(linear pathloss at d_k) * g_k with g_k standard complex
    Gaussian, all driven by ``config.seed``.  Identical (config, seed)
    yields a bit-identical ChannelSet.
    """
    k = config.k_users
    n_tx = config.geometry.n_tx
    pl_db = np.array([pathloss_db(u.distance_m, config.carrier_ghz) for u in config.users])
    rng = np.random.default_rng(config.seed)
    z = rng.standard_normal((k, n_tx, 2))
    g = (z[..., 0] + 1j * z[..., 1]) / np.sqrt(2.0)
    amplitude = 10.0 ** (-pl_db / 20.0)
    h = amplitude[:, None] * g
    return ChannelSet(h=h, pathloss_db=pl_db, seed=config.seed)


def _config_to_dict(config):
    gains = config.target_gain
    if isinstance(gains, (list, tuple, np.ndarray)):
        gains = [float(g) for g in gains]
    else:
        gains = float(gains)
    return {
        "geometry": {
            "n_tx": config.geometry.n_tx,
            "n_rx": config.geometry.n_rx,
            "spacing": config.geometry.spacing,
        },
        "carrier_ghz": config.carrier_ghz,
        "bandwidth_hz": config.bandwidth_hz,
        "noise_dbm": config.noise_dbm,
        "radar_noise_power": config.radar_noise_power,
        "p_max_dbm": config.p_max_dbm,
        "users": [
            {"distance_m": u.distance_m, "sinr_threshold_db": u.sinr_threshold_db}
            for u in config.users
        ],
        "target_angles": [float(a) for a in config.target_angles],
        "target_gain": gains,
        "clutters": [{"angle": c.angle, "gain": c.gain} for c in config.clutters],
        "seed": int(config.seed),
        "solver": {
            "kkt_tol": config.solver.kkt_tol,
            "max_iter": config.solver.max_iter,
            "penalty_eta": config.solver.penalty_eta,
            "penalty_nu": config.solver.penalty_nu,
            "inner_s": config.solver.inner_s,
            "outer_d_max": config.solver.outer_d_max,
            "epsilon": config.solver.epsilon,
            "dinkelbach_tol": config.solver.dinkelbach_tol,
            "phi_noise_model": config.solver.phi_noise_model,
        },
    }


def _require(mapping, key, kind, path):
    if key not in mapping:
        raise ConfigValidationError(f"missing field '{path}{key}'")
    value = mapping[key]
    if kind is float and isinstance(value, (int, float)) and not isinstance(value, bool):
        return float(value)
    if kind is int and isinstance(value, int) and not isinstance(value, bool):
        return value
    if kind is list and isinstance(value, list):
        return value
    if kind is dict and isinstance(value, dict):
        return value
    raise ConfigValidationError(f"field '{path}{key}' has wrong type, expected {kind.__name__}")


def _config_from_dict(data):
    geom_d = _require(data, "geometry", dict, "")
    geometry = ArrayGeometry(
        n_tx=_require(geom_d, "n_tx", int, "geometry."),
        n_rx=_require(geom_d, "n_rx", int, "geometry."),
        spacing=_require(geom_d, "spacing", float, "geometry.") if "spacing" in geom_d else 0.5,
    )
    users = tuple(
        UserConfig(
            distance_m=_require(u, "distance_m", float, f"users[{i}]."),
            sinr_threshold_db=_require(u, "sinr_threshold_db", float, f"users[{i}]."),
        )
        for i, u in enumerate(_require(data, "users", list, ""))
    )
    clutters = tuple(
        ClutterConfig(
            angle=_require(c, "angle", float, f"clutters[{j}]."),
            gain=_require(c, "gain", float, f"clutters[{j}]."),
        )
        for j, c in enumerate(data.get("clutters", []))
    )
    solver_d = data.get("solver", {})
    if not isinstance(solver_d, dict):
        raise ConfigValidationError("field 'solver' has wrong type, expected dict")
    solver = SolverOptions(**{k: solver_d[k] for k in solver_d})
    gain = data.get("target_gain")
    if gain is None:
        raise ConfigValidationError("missing field 'target_gain'")
    return ScenarioConfig(
        geometry=geometry,
        carrier_ghz=_require(data, "carrier_ghz", float, ""),
        bandwidth_hz=_require(data, "bandwidth_hz", float, ""),
        noise_dbm=_require(data, "noise_dbm", float, ""),
        radar_noise_power=(float(data["radar_noise_power"])
                           if data.get("radar_noise_power") is not None else None),
        p_max_dbm=_require(data, "p_max_dbm", float, ""),
        users=users,
        target_angles=tuple(_require(data, "target_angles", list, "")),
        target_gain=gain,
        clutters=clutters,
        seed=_require(data, "seed", int, ""),
        solver=solver,
    )


def load_config(path):
    """Load and validate a scenario config from a JSON file."""
    with open(path, "r", encoding="utf-8") as fh:
        text = fh.read()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigParseError(f"{path}: invalid JSON at line {exc.lineno}: {exc.msg}") from exc
    if not isinstance(data, dict):
        raise ConfigParseError(f"{path}: top-level JSON value must be an object")
    try:
        return _config_from_dict(data)
    except TypeError as exc:
        raise ConfigValidationError(f"{path}: {exc}") from exc


def save_config(config, path):
    """Write a scenario config to JSON; load(save(c)) == c."""
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(_config_to_dict(config), fh, indent=2)
        fh.write("\n")


def config_sha256(config):
    """Canonical content hash of a config, used in experiment manifests."""
    canonical = json.dumps(_config_to_dict(config), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def with_seed(config, seed):
    """Copy of ``config`` with a different channel seed."""
    return replace(config, seed=int(seed))
