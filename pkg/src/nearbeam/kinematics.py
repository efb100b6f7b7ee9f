"""Target mobility state, kinematic prediction, and ground-truth trajectories."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geometry import PolarLocation

ANGLE_UPDATE_MODES = ("dimensional", "angular-rate")


@dataclass(frozen=True)
class TargetState:
    """Full-dimensional mobility status in the array's polar frame.

    radial_velocity is positive when moving away from the array center;
    transverse_velocity is positive in the direction of increasing angle.
    Both are in m/s.
    """

    location: PolarLocation
    radial_velocity: float
    transverse_velocity: float

    def __post_init__(self) -> None:
        speed = math.hypot(self.radial_velocity, self.transverse_velocity)
        if not math.isfinite(speed):
            raise ValueError("velocities must be finite")

    @property
    def angle(self) -> float:
        return self.location.angle

    @property
    def distance(self) -> float:
        return self.location.distance

    def as_vector(self) -> np.ndarray:
        """State as (angle, distance, v_r, v_theta)."""
        return np.array(
            [self.angle, self.distance, self.radial_velocity, self.transverse_velocity]
        )

    @staticmethod
    def from_vector(vec: np.ndarray) -> "TargetState":
        vec = np.asarray(vec, dtype=float)
        return TargetState(
            PolarLocation(float(vec[0]), float(vec[1])), float(vec[2]), float(vec[3])
        )

    def position_xy(self) -> np.ndarray:
        return self.location.xy()


@dataclass(frozen=True)
class CpiClock:
    """Coherent-processing-interval timing: duration and snapshot count."""

    cpi_duration_s: float
    snapshots_per_cpi: int

    def __post_init__(self) -> None:
        if not (self.cpi_duration_s > 0):
            raise ValueError("cpi_duration_s must be > 0")
        if isinstance(self.snapshots_per_cpi, bool) or not isinstance(
            self.snapshots_per_cpi, (int, np.integer)
        ):
            raise ValueError("snapshots_per_cpi must be an integer")
        if self.snapshots_per_cpi < 2:
            raise ValueError("snapshots_per_cpi must be >= 2")

    @property
    def snapshot_period_s(self) -> float:
        return self.cpi_duration_s / self.snapshots_per_cpi

    def snapshot_times(self) -> np.ndarray:
        """Snapshot instants m*T_s for m = 0..M-1, relative to CPI start."""
        return np.arange(self.snapshots_per_cpi) * self.snapshot_period_s

    @property
    def midpoint_offset_s(self) -> float:
        """Center of the snapshot window, (M-1)*T_s/2, relative to CPI start."""
        return 0.5 * (self.snapshots_per_cpi - 1) * self.snapshot_period_s


def velocity_to_cartesian(state: TargetState) -> np.ndarray:
    """Cartesian velocity v = v_r*(cos a, sin a) + v_theta*(-sin a, cos a)."""
    ca, sa = math.cos(state.angle), math.sin(state.angle)
    vr, vt = state.radial_velocity, state.transverse_velocity
    return np.array([vr * ca - vt * sa, vr * sa + vt * ca])


def cartesian_to_state(x: float, y: float, vx: float, vy: float) -> TargetState:
    """Convert a Cartesian position/velocity pair into a polar TargetState."""
    r = math.hypot(x, y)
    angle = math.atan2(y, x)
    loc = PolarLocation(angle, r)  # validates the front half-plane
    ur = (x / r, y / r)
    vr = vx * ur[0] + vy * ur[1]
    vt = -vx * ur[1] + vy * ur[0]
    return TargetState(loc, vr, vt)


def constant_velocity_step(state: TargetState, dt: float) -> TargetState:
    """Advance a state by dt under exact Cartesian constant-velocity motion.

    This is the same motion model the echo signature assumes within a CPI,
    so it is the right map for re-timestamping estimates. Raises ValueError
    when the moved position leaves the valid half-plane.
    """
    x, y = state.position_xy()
    vx, vy = velocity_to_cartesian(state)
    return cartesian_to_state(x + vx * dt, y + vy * dt, vx, vy)


def kinematic_step(
    state: TargetState, dt: float, angle_update: str = "dimensional"
) -> TargetState:
    """One-interval polar prediction with velocities held constant.

    r' = r + v_r*dt. The angle update is a' = a + (v_theta/r)*dt in the
    default dimensional mode; the angular-rate mode a' = a + v_theta*dt
    (transverse velocity read directly as an angular rate) is kept for
    comparison.
    Raises ValueError when the predicted state leaves the valid region.
    """
    if angle_update not in ANGLE_UPDATE_MODES:
        raise ValueError(f"unknown angle_update mode: {angle_update!r}")
    r2 = state.distance + state.radial_velocity * dt
    if angle_update == "dimensional":
        a2 = state.angle + state.transverse_velocity / state.distance * dt
    else:
        a2 = state.angle + state.transverse_velocity * dt
    if r2 <= 0:
        raise ValueError("kinematic step leaves the valid region: distance <= 0")
    if not (0.0 < a2 < np.pi):
        raise ValueError("kinematic step leaves the valid region: angle outside (0, pi)")
    return TargetState(
        PolarLocation(a2, r2), state.radial_velocity, state.transverse_velocity
    )


class Trajectory:
    """Parametric ground-truth path; subclasses give exact Cartesian motion."""

    kind = "abstract"

    def position_velocity(self, t: float) -> tuple[np.ndarray, np.ndarray]:
        raise NotImplementedError


@dataclass(frozen=True)
class StraightLine(Trajectory):
    """Constant-velocity straight line from a Cartesian start point."""

    start_x_m: float
    start_y_m: float
    velocity_x_mps: float
    velocity_y_mps: float

    kind = "straight-line"

    def position_velocity(self, t: float) -> tuple[np.ndarray, np.ndarray]:
        p = np.array(
            [self.start_x_m + self.velocity_x_mps * t, self.start_y_m + self.velocity_y_mps * t]
        )
        v = np.array([self.velocity_x_mps, self.velocity_y_mps])
        return p, v


@dataclass(frozen=True)
class CircularArc(Trajectory):
    """Constant angular rate on a fixed-radius circle about an arbitrary center.

    With the center away from the array origin, the target's distance from
    the array varies along the path (a variable-radius arc as seen from the
    array). start_angle_rad is the position angle on the circle at t = 0,
    measured at the circle center.
    """

    radius_m: float
    angular_rate_rad_s: float
    start_angle_rad: float
    center_x_m: float = 0.0
    center_y_m: float = 0.0

    kind = "circular-arc"

    def position_velocity(self, t: float) -> tuple[np.ndarray, np.ndarray]:
        phi = self.start_angle_rad + self.angular_rate_rad_s * t
        c, s = math.cos(phi), math.sin(phi)
        p = np.array([self.center_x_m + self.radius_m * c, self.center_y_m + self.radius_m * s])
        w = self.radius_m * self.angular_rate_rad_s
        v = np.array([-w * s, w * c])
        return p, v


@dataclass(frozen=True)
class Spiral(Trajectory):
    """Linearly growing (or shrinking) radius about a center, constant angular rate."""

    radius0_m: float
    radius_rate_mps: float
    angular_rate_rad_s: float
    start_angle_rad: float
    center_x_m: float = 0.0
    center_y_m: float = 0.0

    kind = "spiral"

    def position_velocity(self, t: float) -> tuple[np.ndarray, np.ndarray]:
        rad = self.radius0_m + self.radius_rate_mps * t
        phi = self.start_angle_rad + self.angular_rate_rad_s * t
        c, s = math.cos(phi), math.sin(phi)
        p = np.array([self.center_x_m + rad * c, self.center_y_m + rad * s])
        v = np.array(
            [
                self.radius_rate_mps * c - rad * self.angular_rate_rad_s * s,
                self.radius_rate_mps * s + rad * self.angular_rate_rad_s * c,
            ]
        )
        return p, v


@dataclass(frozen=True)
class WaypointSequence(Trajectory):
    """Piecewise-linear path through timed Cartesian waypoints.

    times must be strictly increasing; a single waypoint is a stationary
    target. Velocity on [t_i, t_{i+1}) is the segment slope; the final
    instant uses the last segment.
    """

    times_s: tuple[float, ...]
    xs_m: tuple[float, ...]
    ys_m: tuple[float, ...]

    kind = "waypoint-sequence"

    def __post_init__(self) -> None:
        k = len(self.times_s)
        if k < 1 or len(self.xs_m) != k or len(self.ys_m) != k:
            raise ValueError("waypoints need equal-length times, xs, ys (>= 1 point)")
        if any(b <= a for a, b in zip(self.times_s, self.times_s[1:])):
            raise ValueError("waypoint times must be strictly increasing")

    def position_velocity(self, t: float) -> tuple[np.ndarray, np.ndarray]:
        ts = self.times_s
        if len(ts) == 1:
            return np.array([self.xs_m[0], self.ys_m[0]]), np.zeros(2)
        if t < ts[0] or t > ts[-1]:
            raise ValueError("time outside the waypoint span")
        i = min(np.searchsorted(ts, t, side="right") - 1, len(ts) - 2)
        i = max(i, 0)
        dt = ts[i + 1] - ts[i]
        vx = (self.xs_m[i + 1] - self.xs_m[i]) / dt
        vy = (self.ys_m[i + 1] - self.ys_m[i]) / dt
        tau = t - ts[i]
        return np.array([self.xs_m[i] + vx * tau, self.ys_m[i] + vy * tau]), np.array([vx, vy])


def state_at(traj: Trajectory, t: float) -> TargetState:
    """Exact trajectory state at time t, converted to polar form."""
    p, v = traj.position_velocity(t)
    try:
        return cartesian_to_state(p[0], p[1], v[0], v[1])
    except ValueError as exc:
        raise ValueError(f"trajectory leaves the valid region at t={t:g} s: {exc}") from exc


def sample_trajectory(
    traj: Trajectory, clock: CpiClock, start_time_s: float = 0.0, count: int | None = None
) -> list[TargetState]:
    """Exact states at the snapshot instants start_time + m*T_s."""
    m = clock.snapshots_per_cpi if count is None else count
    ts = clock.snapshot_period_s
    return [state_at(traj, start_time_s + i * ts) for i in range(m)]


def linear_states(state: TargetState, clock: CpiClock, count: int | None = None) -> list[TargetState]:
    """Constant-velocity (exact Cartesian) advance of one state over snapshots.

    This is the estimator's within-CPI motion model and the frozen
    intra-CPI ground-truth mode.
    """
    m = clock.snapshots_per_cpi if count is None else count
    p0 = state.position_xy()
    v = velocity_to_cartesian(state)
    ts = clock.snapshot_period_s
    out = []
    for i in range(m):
        p = p0 + v * (i * ts)
        out.append(cartesian_to_state(p[0], p[1], v[0], v[1]))
    return out
