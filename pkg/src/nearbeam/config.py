"""Strict flat-key scenario configuration.

Config files are UTF-8 text with one `dotted.key = value` pair per line
and `#` comments. Unknown or duplicate keys are errors, as are values
that fail their type or range checks; every error message names the
offending key.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .echo import PATH_LOSS_MODES, LinkBudget
from .geometry import ArrayConfig, PolarLocation
from .kinematics import (
    ANGLE_UPDATE_MODES,
    CircularArc,
    CpiClock,
    Spiral,
    StraightLine,
    TargetState,
    Trajectory,
    WaypointSequence,
)
from .tracker import R_MODES

INTRA_CPI_MODES = ("continuous", "frozen")
INIT_MODES = ("perturbed-truth", "global")
SWEEP_SPACINGS = ("log", "linear")
TRAJECTORY_KINDS = ("line", "arc", "spiral", "waypoints")


class ConfigError(ValueError):
    """Configuration problem; the message names the offending key."""


@dataclass(frozen=True)
class EstimatorSettings:
    grid_counts: tuple[int, int, int, int] = (9, 9, 7, 7)
    window_scale: float = 3.0
    window_floors: tuple[float, float, float, float] = (
        math.radians(0.2),
        0.5,
        1.0,
        1.0,
    )
    refine_ftol_rel: float = 1e-12
    refine_max_iter: int = 500
    refine_max_restarts: int = 8
    init_mode: str = "perturbed-truth"


@dataclass(frozen=True)
class TrackerSettings:
    q_a: float = 5.0
    r_mode: str = "crb-plug-in"
    r_fixed_diag: tuple[float, float, float, float] | None = None
    init_noise_theta_rad: float = math.radians(0.5)
    init_noise_r_m: float = 0.5
    init_noise_v_mps: float = 0.5
    # initial covariance = (factor * noise std)^2, i.e. 4x the noise
    # variance at the default
    init_cov_factor: float = 2.0
    gate_prob: float = 0.999
    max_coast: int = 5


@dataclass(frozen=True)
class RunSettings:
    num_cpis: int = 1
    seed: int = 0


@dataclass(frozen=True)
class SweepSettings:
    r_over_rayleigh_min: float
    r_over_rayleigh_max: float
    num_points: int
    spacing: str = "log"


@dataclass(frozen=True)
class McSettings:
    trials: int
    snr_db: tuple[float, ...]


@dataclass(frozen=True)
class ScenarioConfig:
    array: ArrayConfig
    clock: CpiClock
    budget: LinkBudget
    estimator: EstimatorSettings
    tracker: TrackerSettings
    run: RunSettings
    angle_update: str = "dimensional"
    intra_cpi_motion: str = "continuous"
    trajectory: Trajectory | None = None
    target: TargetState | None = None
    sweep: SweepSettings | None = None
    mc: McSettings | None = None
    raw: dict[str, str] = field(default_factory=dict)


def parse_config_text(text: str) -> dict[str, str]:
    """Key-value pairs from config text; duplicates and syntax errors raise."""
    out: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {stripped!r}")
        key, value = stripped.split("=", 1)
        key = key.strip()
        value = value.strip()
        if not key:
            raise ConfigError(f"line {lineno}: empty key")
        if key in out:
            raise ConfigError(f"duplicate key: {key}")
        out[key] = value
    return out


class _Reader:
    """Typed access over raw key-value pairs with consumption tracking."""

    def __init__(self, raw: dict[str, str]):
        self.raw = raw
        self.used: set[str] = set()

    def has(self, key: str) -> bool:
        return key in self.raw

    def _take(self, key: str) -> str:
        if key not in self.raw:
            raise ConfigError(f"missing required key: {key}")
        self.used.add(key)
        return self.raw[key]

    def str_(self, key: str, default: str | None = None, choices: tuple[str, ...] | None = None) -> str:
        if key not in self.raw and default is not None:
            return default
        val = self._take(key)
        if choices is not None and val not in choices:
            raise ConfigError(f"{key}: expected one of {', '.join(choices)}, got {val!r}")
        return val

    def float_(self, key: str, default: float | None = None) -> float:
        if key not in self.raw and default is not None:
            return default
        val = self._take(key)
        try:
            out = float(val)
        except ValueError:
            raise ConfigError(f"{key}: not a number: {val!r}") from None
        if math.isnan(out):
            raise ConfigError(f"{key}: must not be NaN")
        return out

    def int_(self, key: str, default: int | None = None) -> int:
        if key not in self.raw and default is not None:
            return default
        val = self._take(key)
        try:
            return int(val, 10)
        except ValueError:
            raise ConfigError(f"{key}: not an integer: {val!r}") from None

    def float_list(self, key: str) -> tuple[float, ...]:
        val = self._take(key)
        parts = [p.strip() for p in val.split(",") if p.strip()]
        if not parts:
            raise ConfigError(f"{key}: empty list")
        try:
            return tuple(float(p) for p in parts)
        except ValueError:
            raise ConfigError(f"{key}: not a comma-separated number list: {val!r}") from None


def _wrap(key: str, fn, *args, **kwargs):
    """Run a constructor, re-raising its ValueError under the config key."""
    try:
        return fn(*args, **kwargs)
    except ValueError as exc:
        raise ConfigError(f"{key}: {exc}") from None


def _build_trajectory(rd: _Reader) -> Trajectory | None:
    if not rd.has("trajectory.kind"):
        return None
    kind = rd.str_("trajectory.kind", choices=TRAJECTORY_KINDS)
    if kind == "line":
        return _wrap(
            "trajectory.kind",
            StraightLine,
            start_x_m=rd.float_("trajectory.start_x_m"),
            start_y_m=rd.float_("trajectory.start_y_m"),
            velocity_x_mps=rd.float_("trajectory.velocity_x_mps"),
            velocity_y_mps=rd.float_("trajectory.velocity_y_mps"),
        )
    if kind == "arc":
        return _wrap(
            "trajectory.kind",
            CircularArc,
            radius_m=rd.float_("trajectory.radius_m"),
            angular_rate_rad_s=rd.float_("trajectory.angular_rate_rad_s"),
            start_angle_rad=rd.float_("trajectory.start_angle_rad"),
            center_x_m=rd.float_("trajectory.center_x_m", 0.0),
            center_y_m=rd.float_("trajectory.center_y_m", 0.0),
        )
    if kind == "spiral":
        return _wrap(
            "trajectory.kind",
            Spiral,
            radius0_m=rd.float_("trajectory.radius0_m"),
            radius_rate_mps=rd.float_("trajectory.radius_rate_mps"),
            angular_rate_rad_s=rd.float_("trajectory.angular_rate_rad_s"),
            start_angle_rad=rd.float_("trajectory.start_angle_rad"),
            center_x_m=rd.float_("trajectory.center_x_m", 0.0),
            center_y_m=rd.float_("trajectory.center_y_m", 0.0),
        )
    times = rd.float_list("trajectory.times_s")
    xs = rd.float_list("trajectory.xs_m")
    ys = rd.float_list("trajectory.ys_m")
    if not (len(times) == len(xs) == len(ys)):
        raise ConfigError("trajectory.times_s: times/xs/ys lengths differ")
    return _wrap("trajectory.kind", WaypointSequence, times_s=times, xs_m=xs, ys_m=ys)


def _build_target(rd: _Reader) -> TargetState | None:
    keys = ("target.theta_rad", "target.r_m", "target.vr_mps", "target.vtheta_mps")
    if not any(rd.has(k) for k in keys):
        return None
    loc = _wrap(
        "target.theta_rad",
        PolarLocation,
        angle=rd.float_("target.theta_rad"),
        distance=rd.float_("target.r_m"),
    )
    return TargetState(
        location=loc,
        radial_velocity=rd.float_("target.vr_mps"),
        transverse_velocity=rd.float_("target.vtheta_mps"),
    )


def _build_estimator(rd: _Reader) -> EstimatorSettings:
    counts = (
        rd.int_("estimator.grid_theta", 9),
        rd.int_("estimator.grid_r", 9),
        rd.int_("estimator.grid_vr", 7),
        rd.int_("estimator.grid_vtheta", 7),
    )
    for key, cnt in zip(
        ("estimator.grid_theta", "estimator.grid_r", "estimator.grid_vr", "estimator.grid_vtheta"),
        counts,
    ):
        if cnt < 3 or cnt % 2 == 0:
            raise ConfigError(f"{key}: must be an odd integer >= 3")
    floors = (
        math.radians(rd.float_("estimator.window_floor_theta_deg", 0.2)),
        rd.float_("estimator.window_floor_r_m", 0.5),
        rd.float_("estimator.window_floor_vr_mps", 1.0),
        rd.float_("estimator.window_floor_vtheta_mps", 1.0),
    )
    for key, val in zip(
        (
            "estimator.window_floor_theta_deg",
            "estimator.window_floor_r_m",
            "estimator.window_floor_vr_mps",
            "estimator.window_floor_vtheta_mps",
        ),
        floors,
    ):
        if not (val > 0):
            raise ConfigError(f"{key}: must be > 0")
    scale = rd.float_("estimator.window_scale", 3.0)
    if not (scale > 0):
        raise ConfigError("estimator.window_scale: must be > 0")
    ftol = rd.float_("estimator.refine_ftol_rel", 1e-12)
    if not (ftol > 0):
        raise ConfigError("estimator.refine_ftol_rel: must be > 0")
    max_iter = rd.int_("estimator.refine_max_iter", 500)
    if max_iter < 1:
        raise ConfigError("estimator.refine_max_iter: must be >= 1")
    restarts = rd.int_("estimator.refine_max_restarts", 8)
    if restarts < 1:
        raise ConfigError("estimator.refine_max_restarts: must be >= 1")
    return EstimatorSettings(
        grid_counts=counts,
        window_scale=scale,
        window_floors=floors,
        refine_ftol_rel=ftol,
        refine_max_iter=max_iter,
        refine_max_restarts=restarts,
        init_mode=rd.str_("estimator.init_mode", "perturbed-truth", INIT_MODES),
    )


def _build_tracker(rd: _Reader) -> TrackerSettings:
    q_a = rd.float_("tracker.q_a", 5.0)
    if q_a < 0:
        raise ConfigError("tracker.q_a: must be >= 0")
    r_mode = rd.str_("tracker.r_mode", "crb-plug-in", R_MODES)
    r_fixed = None
    if r_mode == "fixed":
        diag = rd.float_list("tracker.r_fixed_diag")
        if len(diag) != 4:
            raise ConfigError("tracker.r_fixed_diag: expected 4 values")
        if any(d <= 0 for d in diag):
            raise ConfigError("tracker.r_fixed_diag: values must be > 0")
        r_fixed = diag
    elif rd.has("tracker.r_fixed_diag"):
        raise ConfigError("tracker.r_fixed_diag: only valid with tracker.r_mode = fixed")
    noise_t = math.radians(rd.float_("tracker.init_noise_theta_deg", 0.5))
    noise_r = rd.float_("tracker.init_noise_r_m", 0.5)
    noise_v = rd.float_("tracker.init_noise_v_mps", 0.5)
    for key, val in (
        ("tracker.init_noise_theta_deg", noise_t),
        ("tracker.init_noise_r_m", noise_r),
        ("tracker.init_noise_v_mps", noise_v),
    ):
        if not (val > 0):
            raise ConfigError(f"{key}: must be > 0")
    factor = rd.float_("tracker.init_cov_factor", 2.0)
    if not (factor > 0):
        raise ConfigError("tracker.init_cov_factor: must be > 0")
    gate = rd.float_("tracker.gate_prob", 0.999)
    if not (0 < gate < 1):
        raise ConfigError("tracker.gate_prob: must be in (0, 1)")
    coast = rd.int_("tracker.max_coast", 5)
    if coast < 0:
        raise ConfigError("tracker.max_coast: must be >= 0")
    return TrackerSettings(
        q_a=q_a,
        r_mode=r_mode,
        r_fixed_diag=r_fixed,
        init_noise_theta_rad=noise_t,
        init_noise_r_m=noise_r,
        init_noise_v_mps=noise_v,
        init_cov_factor=factor,
        gate_prob=gate,
        max_coast=coast,
    )


def _build_sweep(rd: _Reader) -> SweepSettings | None:
    keys = ("sweep.r_over_rayleigh_min", "sweep.r_over_rayleigh_max", "sweep.num_points")
    if not any(rd.has(k) for k in keys):
        return None
    lo = rd.float_("sweep.r_over_rayleigh_min")
    hi = rd.float_("sweep.r_over_rayleigh_max")
    n = rd.int_("sweep.num_points")
    if not (lo > 0):
        raise ConfigError("sweep.r_over_rayleigh_min: must be > 0")
    if not (hi > lo):
        raise ConfigError("sweep.r_over_rayleigh_max: must be > r_over_rayleigh_min")
    if n < 1:
        raise ConfigError("sweep.num_points: must be >= 1")
    return SweepSettings(
        r_over_rayleigh_min=lo,
        r_over_rayleigh_max=hi,
        num_points=n,
        spacing=rd.str_("sweep.spacing", "log", SWEEP_SPACINGS),
    )


def _build_mc(rd: _Reader) -> McSettings | None:
    if not (rd.has("mc.trials") or rd.has("mc.snr_db")):
        return None
    trials = rd.int_("mc.trials")
    if trials < 0:
        raise ConfigError("mc.trials: must be >= 0")
    snrs = rd.float_list("mc.snr_db")
    return McSettings(trials=trials, snr_db=snrs)


def build_scenario(raw: dict[str, str]) -> ScenarioConfig:
    """Validate raw pairs against the full schema and build typed objects."""
    rd = _Reader(raw)

    n = rd.int_("array.N")
    fc = rd.float_("array.carrier_frequency_hz")
    spacing_rel = rd.float_("array.spacing_over_halflambda", 1.0)
    if n < 1:
        raise ConfigError("array.N: must be >= 1")
    if not (fc > 0):
        raise ConfigError("array.carrier_frequency_hz: must be > 0")
    if not (spacing_rel > 0):
        raise ConfigError("array.spacing_over_halflambda: must be > 0")
    half_lambda = 0.5 * ArrayConfig(num_elements=2, carrier_frequency_hz=fc).wavelength_m
    array = _wrap(
        "array.N",
        ArrayConfig,
        num_elements=n,
        carrier_frequency_hz=fc,
        element_spacing_m=spacing_rel * half_lambda,
    )

    clock = _wrap(
        "clock.cpi_s",
        CpiClock,
        cpi_duration_s=rd.float_("clock.cpi_s"),
        snapshots_per_cpi=rd.int_("clock.snapshots"),
    )

    budget = _wrap(
        "budget.tx_power_dbm",
        LinkBudget.from_dbm,
        rd.float_("budget.tx_power_dbm"),
        rd.float_("budget.noise_power_dbm"),
        rd.str_("budget.path_loss_mode", "unit-reflection", PATH_LOSS_MODES),
    )

    trajectory = _build_trajectory(rd)
    target = _build_target(rd)
    estimator = _build_estimator(rd)
    tracker = _build_tracker(rd)

    num_cpis = rd.int_("run.num_cpis", 1)
    if num_cpis < 1:
        raise ConfigError("run.num_cpis: must be >= 1")
    seed = rd.int_("run.seed", 0)
    if not (0 <= seed < 2**64):
        raise ConfigError("run.seed: must fit in an unsigned 64-bit integer")
    run = RunSettings(num_cpis=num_cpis, seed=seed)

    angle_update = rd.str_("kinematics.angle_update", "dimensional", ANGLE_UPDATE_MODES)
    intra = rd.str_("intra_cpi_motion", "continuous", INTRA_CPI_MODES)
    sweep = _build_sweep(rd)
    mc = _build_mc(rd)

    unknown = sorted(set(raw) - rd.used)
    if unknown:
        raise ConfigError(f"unknown key: {unknown[0]}")

    return ScenarioConfig(
        array=array,
        clock=clock,
        budget=budget,
        estimator=estimator,
        tracker=tracker,
        run=run,
        angle_update=angle_update,
        intra_cpi_motion=intra,
        trajectory=trajectory,
        target=target,
        sweep=sweep,
        mc=mc,
        raw=dict(raw),
    )


def load_config(path: str) -> ScenarioConfig:
    """Parse and validate a config file."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc.strerror}") from None
    return build_scenario(parse_config_text(text))
