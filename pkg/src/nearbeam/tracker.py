"""Extended Kalman tracking of the mobility state across CPIs."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.stats import chi2

from .crb import crb_report
from .echo import EchoFrame
from .estimator import EstimateReport, SearchWindow, grid_then_refine
from .geometry import ArrayConfig
from .kinematics import (
    CpiClock,
    TargetState,
    constant_velocity_step,
    kinematic_step,
)

COVARIANCE_EIGEN_FLOOR = 1e-12
R_MODES = ("crb-plug-in", "fixed")

# fallback caps on window half-widths when the uncertainty reference blows up
_WINDOW_HW_CAP = (0.35, None, 5.0, 5.0)  # rad, (0.5*r at runtime), m/s, m/s
_MAX_GRID_COUNT = 81


class TrackLostError(RuntimeError):
    """Raised when the track coasts past the allowed consecutive misses."""

    def __init__(self, message: str, track: "TrackState", report: EstimateReport | None):
        super().__init__(message)
        self.track = track
        self.report = report


@dataclass(frozen=True)
class TrackState:
    """Gaussian belief over (angle, distance, v_r, v_theta) plus its
    one-CPI-ahead prediction."""

    mean: np.ndarray
    covariance: np.ndarray
    cpi_index: int
    predicted_mean: np.ndarray
    predicted_covariance: np.ndarray
    consecutive_misses: int = 0
    gated_out: bool = False
    coast_flagged: bool = False
    has_fresh_prediction: bool = False
    beta_amp: complex = 0.0 + 0.0j  # last accepted reflection amplitude

    @staticmethod
    def initialize(mean: np.ndarray, covariance: np.ndarray, beta_amp: complex = 0j) -> "TrackState":
        """Fresh track: the initial belief doubles as the first prediction."""
        mean = np.asarray(mean, dtype=float)
        cov = make_psd(np.asarray(covariance, dtype=float))
        TargetState.from_vector(mean)  # validates the region
        return TrackState(
            mean=mean,
            covariance=cov,
            cpi_index=-1,
            predicted_mean=mean.copy(),
            predicted_covariance=cov.copy(),
            has_fresh_prediction=True,
            beta_amp=beta_amp,
        )


@dataclass(frozen=True)
class NoiseModel:
    """Process and measurement noise configuration.

    q_a is the unmodeled-acceleration intensity (m/s^2) behind the
    white-acceleration process noise; measurement noise comes from the
    estimate's CRB covariance (crb-plug-in) or a fixed matrix.
    """

    q_a: float = 5.0
    r_mode: str = "crb-plug-in"
    r_fixed: np.ndarray | None = None

    def __post_init__(self) -> None:
        if not (self.q_a >= 0):
            raise ValueError("q_a must be >= 0")
        if self.r_mode not in R_MODES:
            raise ValueError(f"unknown r_mode: {self.r_mode!r}")
        if self.r_mode == "fixed":
            if self.r_fixed is None or np.asarray(self.r_fixed).shape != (4, 4):
                raise ValueError("fixed r_mode needs a 4x4 r_fixed matrix")
            _require_psd(np.asarray(self.r_fixed, dtype=float))


@dataclass(frozen=True)
class TrackingOptions:
    """Everything track_cpi needs beyond the frame itself."""

    noise_model: NoiseModel = field(default_factory=NoiseModel)
    angle_update: str = "dimensional"
    window_floors: tuple[float, float, float, float] = (
        math.radians(0.2),
        0.5,
        1.0,
        1.0,
    )
    window_scale: float = 3.0
    grid_counts: tuple[int, int, int, int] = (9, 9, 7, 7)
    refine_ftol_rel: float = 1e-12
    refine_max_iter: int = 500
    refine_max_restarts: int = 8
    gate_prob: float = 0.999
    max_coast: int = 5
    tx_power_w: float = 1.0


def make_psd(cov: np.ndarray, floor: float = COVARIANCE_EIGEN_FLOOR) -> np.ndarray:
    """Symmetrize and clamp eigenvalues from below."""
    sym = 0.5 * (cov + cov.T)
    vals, vecs = np.linalg.eigh(sym)
    if vals[0] >= floor:
        return sym
    vals = np.maximum(vals, floor)
    return (vecs * vals) @ vecs.T


def _require_psd(mat: np.ndarray) -> None:
    if not np.all(np.isfinite(mat)):
        raise ValueError("covariance must be finite")
    sym_err = np.max(np.abs(mat - mat.T))
    scale = max(float(np.max(np.abs(mat))), 1e-300)
    if sym_err > 1e-8 * scale:
        raise ValueError("covariance must be symmetric")
    if np.linalg.eigvalsh(0.5 * (mat + mat.T))[0] < -1e-10 * scale:
        raise ValueError("covariance must be positive semidefinite")


def wrap_angle(x: float) -> float:
    """Map an angle residual to (-pi, pi]."""
    out = math.fmod(x + math.pi, 2.0 * math.pi)
    if out <= 0.0:
        out += 2.0 * math.pi
    return out - math.pi


def process_noise(q_a: float, dt: float, distance_m: float) -> np.ndarray:
    """White-acceleration process noise discretized in polar coordinates.

    Independent radial and transverse acceleration of intensity q_a; the
    angle rows carry the 1/r factor that maps transverse displacement to
    angle.
    """
    q2 = q_a * q_a
    t2 = dt * dt
    t3 = t2 * dt
    t4 = t3 * dt
    r = distance_m
    q = np.zeros((4, 4))
    q[1, 1] = q2 * t4 / 4.0
    q[1, 2] = q[2, 1] = q2 * t3 / 2.0
    q[2, 2] = q2 * t2
    q[0, 0] = q2 * t4 / (4.0 * r * r)
    q[0, 3] = q[3, 0] = q2 * t3 / (2.0 * r)
    q[3, 3] = q2 * t2
    return q


def kinematic_jacobian(mean: np.ndarray, dt: float, angle_update: str = "dimensional") -> np.ndarray:
    """Jacobian of the one-interval kinematic map at the given state."""
    f = np.eye(4)
    r = mean[1]
    vt = mean[3]
    f[1, 2] = dt
    if angle_update == "dimensional":
        f[0, 1] = -vt * dt / (r * r)
        f[0, 3] = dt / r
    else:
        f[0, 3] = dt
    return f


def predict(
    track: TrackState,
    dt: float,
    q: np.ndarray,
    angle_update: str = "dimensional",
) -> TrackState:
    """Propagate the posterior one CPI ahead into the predicted fields."""
    state = TargetState.from_vector(track.mean)
    try:
        pred_state = kinematic_step(state, dt, angle_update)
        coast = False
        pred_mean = pred_state.as_vector()
    except ValueError:
        # propagated mean leaves the valid region: hold position, keep
        # inflating uncertainty (flagged coast)
        coast = True
        pred_mean = track.mean.copy()
    f = kinematic_jacobian(track.mean, dt, angle_update)
    pred_cov = make_psd(f @ track.covariance @ f.T + q)
    return replace(
        track,
        predicted_mean=pred_mean,
        predicted_covariance=pred_cov,
        coast_flagged=coast,
        has_fresh_prediction=True,
    )


def gate_threshold(prob: float, dim: int = 4) -> float:
    """Chi-square gating threshold for the given tail probability."""
    return float(chi2.ppf(prob, df=dim))


def update(
    track: TrackState,
    z: np.ndarray,
    r: np.ndarray,
    gate: float | None = None,
) -> TrackState:
    """Fuse a direct state measurement (identity observation map).

    K = P (P + R)^{-1}; gated-out measurements (Mahalanobis distance above
    gate) are discarded and the prior is kept (coast).
    """
    _require_psd(r)
    p = track.predicted_covariance
    prior = track.predicted_mean
    innov = np.asarray(z, dtype=float) - prior
    innov[0] = wrap_angle(innov[0])
    s = p + r
    d2 = float(innov @ np.linalg.solve(s, innov))
    if gate is not None and d2 > gate:
        return replace(
            track,
            mean=prior.copy(),
            covariance=p.copy(),
            cpi_index=track.cpi_index + 1,
            consecutive_misses=track.consecutive_misses + 1,
            gated_out=True,
            has_fresh_prediction=False,
        )
    k = np.linalg.solve(s.T, p.T).T
    mean = prior + k @ innov
    mean[0] = wrap_angle(mean[0] - math.pi / 2) + math.pi / 2  # keep near (0, pi)
    cov = make_psd((np.eye(4) - k) @ p)
    return replace(
        track,
        mean=mean,
        covariance=cov,
        cpi_index=track.cpi_index + 1,
        consecutive_misses=0,
        gated_out=False,
        has_fresh_prediction=False,
    )


def _anti_alias_spacings(
    cfg: ArrayConfig, clock: CpiClock, pred: np.ndarray
) -> np.ndarray:
    """Grid spacings that keep every axis below half its main-lobe width."""
    lam = cfg.wavelength_m
    d = cfg.aperture_m
    dt = clock.cpi_duration_s
    r = max(float(pred[1]), 1e-3)
    sin_t = max(math.sin(float(pred[0])), 0.2)
    return np.array(
        [
            lam / (2.0 * d * sin_t),
            r * r * lam / (d * d),
            lam / (4.0 * dt),
            lam * r / (2.0 * dt * d),
        ]
    )


def build_window(
    cfg: ArrayConfig,
    clock: CpiClock,
    predicted_mean: np.ndarray,
    reference_scale: np.ndarray,
    options: TrackingOptions,
) -> SearchWindow:
    """Search window around the prediction.

    Half-widths are window_scale times the per-parameter uncertainty
    reference (typically the CRB at the prediction), floor-limited; grid
    counts are raised where needed so the spacing cannot alias the
    objective's main lobe.
    """
    ref = np.asarray(reference_scale, dtype=float)
    hw = np.maximum(options.window_scale * ref, np.asarray(options.window_floors))
    caps = np.array(
        [
            _WINDOW_HW_CAP[0],
            0.5 * max(float(predicted_mean[1]), 1e-3),
            _WINDOW_HW_CAP[2],
            _WINDOW_HW_CAP[3],
        ]
    )
    hw = np.minimum(hw, caps)
    spacing = _anti_alias_spacings(cfg, clock, predicted_mean)
    counts = []
    for i in range(4):
        need = int(math.ceil(2.0 * hw[i] / spacing[i])) + 1
        cnt = max(options.grid_counts[i], need)
        cnt = min(cnt | 1, _MAX_GRID_COUNT)  # odd, bounded
        counts.append(cnt)
    return SearchWindow(
        center=TargetState.from_vector(predicted_mean),
        half_widths=tuple(float(h) for h in hw),
        grid_counts=tuple(counts),
    )


def measurement_noise(
    crb: np.ndarray | None, model: NoiseModel
) -> np.ndarray | None:
    """Measurement covariance per the configured mode; None when unusable.

    In crb-plug-in mode `crb` is the bound evaluated at the predicted
    state, not at the estimate: evaluating it at the estimate would let a
    wayward fit justify itself with its own inflated bound and slip
    through the gate.
    """
    if model.r_mode == "fixed":
        return np.asarray(model.r_fixed, dtype=float)
    if crb is None:
        return None
    r = np.asarray(crb, dtype=float)
    if not np.all(np.isfinite(r)):
        return None
    return make_psd(r)


def align_report_to_midpoint(
    report: EstimateReport, offset_s: float, angle_update: str = "dimensional"
) -> EstimateReport | None:
    """Re-timestamp a raw estimate from the first snapshot to the CPI midpoint.

    The echo fit spans a symmetric snapshot window, so for any smoothly
    accelerating target the fitted velocities match the true velocities at
    the window center rather than at the first snapshot; expressed at the
    first snapshot they carry an acceleration-proportional offset the CRB
    cannot see. Advancing the estimate by the window half-span under the
    fit's own constant-velocity model moves it to where it is (nearly)
    unbiased, which keeps the filter consistent without an
    acceleration-magnitude prior. The covariance is pushed through the
    step's Jacobian. Returns None when the moved state leaves the valid
    region.
    """
    try:
        moved = constant_velocity_step(report.estimate, offset_s)
    except ValueError:
        return None
    jac = kinematic_jacobian(report.estimate.as_vector(), offset_s, angle_update)
    cov = np.asarray(report.covariance, dtype=float)
    if np.all(np.isfinite(cov)):
        cov = jac @ cov @ jac.T
    rcrb = np.sqrt(np.maximum(np.diag(cov), 0.0)) if np.all(np.isfinite(cov)) else report.rcrb
    return replace(report, estimate=moved, covariance=cov, rcrb=rcrb)


def track_cpi(
    cfg: ArrayConfig,
    clock: CpiClock,
    frame: EchoFrame,
    track: TrackState,
    options: TrackingOptions | None = None,
) -> tuple[TrackState, EstimateReport]:
    """One full tracking cycle on a frame: predict, estimate, gate, update,
    and predict ahead for the next CPI's beam.

    Track epochs sit at CPI midpoints: the raw estimate is re-timestamped
    there (see align_report_to_midpoint) before gating and fusion, and the
    returned report carries the re-timestamped estimate. In crb-plug-in
    mode R is the bound at the predicted state (see measurement_noise).
    The search window centers on the track's prediction for this CPI: the
    one already carried by the track (a fresh initialization's belief, or
    the look-ahead computed by the previous cycle), else a predict from
    the posterior is run first. Raises TrackLostError after more than
    options.max_coast consecutive gated-out CPIs.
    """
    options = options or TrackingOptions()
    if not track.has_fresh_prediction:
        q0 = process_noise(
            options.noise_model.q_a, clock.cpi_duration_s, float(track.mean[1])
        )
        track = predict(track, clock.cpi_duration_s, q0, options.angle_update)
    pred_mean = track.predicted_mean
    pred_state = TargetState.from_vector(pred_mean)

    # the track's epoch is the CPI midpoint but the raw estimate references
    # the first snapshot, so the search centers on the prediction stepped
    # back by half the snapshot window
    tau = clock.midpoint_offset_s
    try:
        search_mean = constant_velocity_step(pred_state, -tau).as_vector()
    except ValueError:
        search_mean = pred_mean

    # uncertainty reference for the window: whichever of the predicted
    # covariance and the CRB at the prediction is larger per axis, so the
    # window covers both the filter's own uncertainty and the measurement
    # floor; the same bound supplies R in crb-plug-in mode
    ref = np.sqrt(np.maximum(np.diag(track.predicted_covariance), 0.0))
    crb_at_pred: np.ndarray | None = None
    if frame.noise_power_w == 0:
        crb_at_pred = np.zeros((4, 4))
    elif abs(track.beta_amp) > 0:
        rep_pred = crb_report(
            cfg,
            clock,
            TargetState.from_vector(search_mean),
            track.beta_amp,
            frame.transmit_weights,
            frame.probe,
            frame.noise_power_w,
        )
        ref = np.where(
            np.isfinite(rep_pred.rcrb), np.maximum(ref, rep_pred.rcrb), ref
        )
        if not rep_pred.singular and np.all(np.isfinite(rep_pred.crb)):
            jac = kinematic_jacobian(search_mean, tau, options.angle_update)
            crb_at_pred = jac @ rep_pred.crb @ jac.T

    window = build_window(cfg, clock, search_mean, ref, options)
    report = grid_then_refine(
        cfg,
        clock,
        frame,
        window,
        tx_power_w=options.tx_power_w,
        refine_ftol_rel=options.refine_ftol_rel,
        refine_max_iter=options.refine_max_iter,
        refine_max_restarts=options.refine_max_restarts,
    )
    aligned = align_report_to_midpoint(report, tau, options.angle_update)
    if aligned is not None:
        report = aligned

    gate = gate_threshold(options.gate_prob)
    r = measurement_noise(crb_at_pred, options.noise_model)
    if aligned is None or r is None or report.low_confidence:
        # unusable measurement: coast without fusing
        new = replace(
            track,
            mean=pred_mean.copy(),
            covariance=track.predicted_covariance.copy(),
            cpi_index=track.cpi_index + 1,
            consecutive_misses=track.consecutive_misses + 1,
            gated_out=True,
            has_fresh_prediction=False,
        )
    else:
        new = update(track, report.estimate.as_vector(), r, gate=gate)
        if not new.gated_out:
            new = replace(
                new, beta_amp=complex(report.beta_hat) * math.sqrt(options.tx_power_w)
            )
    if new.consecutive_misses > options.max_coast:
        raise TrackLostError(
            f"track lost after {new.consecutive_misses} consecutive gated-out CPIs",
            new,
            report,
        )
    q = process_noise(
        options.noise_model.q_a, clock.cpi_duration_s, float(new.mean[1])
    )
    new = predict(new, clock.cpi_duration_s, q, options.angle_update)
    return new, report
