"""Predictive beam focusing, per-antenna Doppler compensation, link scoring."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .echo import LinkBudget
from .geometry import ArrayConfig, PolarLocation, element_positions, nearfield_steering
from .kinematics import CpiClock, TargetState, velocity_to_cartesian


@dataclass(frozen=True)
class BeamPlan:
    """Next-CPI transmit plan: focused weights plus Doppler phase ramps.

    base_weights is unit-norm; phase_ramps is the N x M real matrix of
    per-element, per-snapshot compensation phases in radians.
    """

    base_weights: np.ndarray
    phase_ramps: np.ndarray
    predicted_state: TargetState

    def __post_init__(self) -> None:
        if abs(np.linalg.norm(self.base_weights) - 1.0) > 1e-6:
            raise ValueError("base_weights must be unit-norm")
        if np.iscomplexobj(self.phase_ramps):
            raise ValueError("phase_ramps must be real-valued")
        if self.phase_ramps.shape[0] != self.base_weights.shape[0]:
            raise ValueError("phase_ramps row count must match the element count")


@dataclass(frozen=True)
class CommMetrics:
    """Per-snapshot received gain and rate, with a genie baseline."""

    gain: np.ndarray
    rate_bps_hz: np.ndarray
    genie_gain: np.ndarray
    genie_rate_bps_hz: np.ndarray
    gain_loss_db: float


def focus_weights(cfg: ArrayConfig, loc: PolarLocation) -> np.ndarray:
    """Conjugate-matched near-field focusing weights, unit norm.

    The focused gain |a(loc)^T w|^2 equals N exactly at the focus point.
    """
    a = nearfield_steering(cfg, loc)
    return np.conj(a) / math.sqrt(cfg.num_elements)


def element_range_rates(cfg: ArrayConfig, state: TargetState) -> np.ndarray:
    """Analytic per-element range rates to the target, length N.

    rdot_n = (p - e_n) . v / |p - e_n| under the state's Cartesian velocity.
    """
    p = state.position_xy()
    v = velocity_to_cartesian(state)
    rel = p[None, :] - element_positions(cfg)
    dist = np.hypot(rel[:, 0], rel[:, 1])
    return (rel @ v) / dist


def doppler_ramps(cfg: ArrayConfig, clock: CpiClock, predicted: TargetState) -> np.ndarray:
    """Per-element compensation phases (N x M), zero at the first snapshot.

    Entry (n, m) = +(2pi/lambda)*(rdot_n + rdot_0)*m*T_s, where rdot_n is
    the predicted range rate to element n and rdot_0 the rate to the array
    center (the radial velocity). The sign opposes the predicted round-trip
    phase advance.
    """
    rdot = element_range_rates(cfg, predicted)
    rdot0 = predicted.radial_velocity
    tm = clock.snapshot_times()
    return cfg.wavenumber * np.outer(rdot + rdot0, tm)


def comm_metrics(
    cfg: ArrayConfig,
    clock: CpiClock,
    true_states: list[TargetState],
    plan: BeamPlan,
    budget: LinkBudget,
) -> CommMetrics:
    """Downlink pointing quality of a plan against the true motion.

    Received gain g(m) = |a_true(m)^T (w . e^{j ramp(:,m)})|^2 with a one-way
    unit-gain channel; rate(m) = log2(1 + P g(m)/sigma^2). The genie rebuilds
    conjugate-matched weights from the true state at every snapshot, so its
    gain is exactly N.
    """
    m = clock.snapshots_per_cpi
    if len(true_states) != m:
        raise ValueError("need one true state per snapshot")
    if plan.phase_ramps.shape != (cfg.num_elements, m):
        raise ValueError("phase_ramps shape must be (N, M)")
    n = cfg.num_elements
    snr_scale = budget.transmit_power_w / budget.noise_power_w
    gain = np.empty(m)
    for j, st in enumerate(true_states):
        a = nearfield_steering(cfg, st.location)
        w_eff = plan.base_weights * np.exp(1j * plan.phase_ramps[:, j])
        gain[j] = abs(a @ w_eff) ** 2
    genie_gain = np.full(m, float(n))
    rate = np.log2(1.0 + snr_scale * gain)
    genie_rate = np.log2(1.0 + snr_scale * genie_gain)
    loss_db = 10.0 * math.log10(float(np.mean(genie_gain)) / float(np.mean(gain)))
    return CommMetrics(
        gain=gain,
        rate_bps_hz=rate,
        genie_gain=genie_gain,
        genie_rate_bps_hz=genie_rate,
        gain_loss_db=loss_db,
    )
