"""Scenario engine: per-CPI sense-predict-focus loop, sweeps, Monte Carlo.

All randomness is drawn from named substreams of a single master seed, so
identical configuration plus seed reproduces every CSV byte for byte.
Floats are written with repr(), the shortest representation that reloads
exactly.
"""

from __future__ import annotations

import json
import math
import sys
import time
import zlib
from dataclasses import dataclass
from hashlib import sha256
from pathlib import Path

import numpy as np

from .beamformer import BeamPlan, comm_metrics, doppler_ramps, focus_weights
from .config import ConfigError, ScenarioConfig
from .crb import crb_report, rcrb_sweep
from .echo import EchoFrame, add_noise, noiseless_echo, random_probe, reflection_coefficient
from .estimator import EstimateReport, SearchWindow, grid_then_refine, initial_access_search
from .kinematics import (
    TargetState,
    constant_velocity_step,
    linear_states,
    sample_trajectory,
    state_at,
)
from .tracker import (
    NoiseModel,
    TrackLostError,
    TrackState,
    TrackingOptions,
    track_cpi,
)

TRACK_CSV_HEADER = (
    "cpi_index,"
    "true_theta_rad,true_r_m,true_vr_mps,true_vtheta_mps,"
    "est_theta_rad,est_r_m,est_vr_mps,est_vtheta_mps,"
    "pred_theta_rad,pred_r_m,pred_vr_mps,pred_vtheta_mps,"
    "post_theta_rad,post_r_m,post_vr_mps,post_vtheta_mps,"
    "rcrb_theta_rad,rcrb_r_m,rcrb_vr_mps,rcrb_vtheta_mps,"
    "gain_mean,rate_mean_bps_hz,genie_rate_mean,gain_loss_db,gated_out"
)
CRB_SWEEP_CSV_HEADER = (
    "r_m,rcrb_theta_rad,rcrb_r_m,rcrb_vr_mps,rcrb_vtheta_mps,"
    "condition_number,singular_flag"
)
MC_RMSE_CSV_HEADER = "snr_db,param,rmse,rcrb,ratio,trials"
PARAM_NAMES = ("theta_rad", "r_m", "vr_mps", "vtheta_mps")


class RuntimeFailure(RuntimeError):
    """Run-level failure after configuration was accepted (exit status 3)."""


@dataclass(frozen=True)
class RunRecord:
    """One CPI of a tracking run, in track.csv column order.

    All state columns (true, estimated, predicted, posterior) refer to the
    CPI's snapshot-window midpoint, the epoch the tracker estimates.
    """

    cpi_index: int
    true_state: np.ndarray
    estimated: np.ndarray
    predicted: np.ndarray
    posterior: np.ndarray
    rcrb: np.ndarray
    gain_mean: float
    rate_mean_bps_hz: float
    genie_rate_mean: float
    gain_loss_db: float
    gated_out: bool

    def row(self) -> list:
        return (
            [self.cpi_index]
            + [float(v) for v in self.true_state]
            + [float(v) for v in self.estimated]
            + [float(v) for v in self.predicted]
            + [float(v) for v in self.posterior]
            + [float(v) for v in self.rcrb]
            + [
                self.gain_mean,
                self.rate_mean_bps_hz,
                self.genie_rate_mean,
                self.gain_loss_db,
                int(self.gated_out),
            ]
        )


def substream(seed: int, name: str, *indices: int) -> np.random.Generator:
    """Named, index-addressed child generator of the master seed."""
    tag = zlib.crc32(name.encode("utf-8"))
    return np.random.default_rng(np.random.SeedSequence([seed, tag, *indices]))


def format_value(v) -> str:
    if isinstance(v, str):
        return v
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def write_csv(path: Path, header: str, rows: list[list]) -> None:
    lines = [header]
    lines.extend(",".join(format_value(v) for v in row) for row in rows)
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def config_hash(raw: dict[str, str]) -> str:
    canon = "\n".join(f"{k}={raw[k]}" for k in sorted(raw))
    return sha256(canon.encode("utf-8")).hexdigest()


def write_summary(
    out_dir: Path, config: ScenarioConfig, wall_time_s: float, metrics: dict
) -> None:
    import scipy

    from . import __version__

    summary = {
        "config": dict(sorted(config.raw.items())),
        "config_hash": config_hash(config.raw),
        "seed": config.run.seed,
        "versions": {
            "nearbeam": __version__,
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "python": sys.version.split()[0],
        },
        "wall_time_s": wall_time_s,
        "metrics": metrics,
    }
    (out_dir / "summary.json").write_text(
        json.dumps(summary, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )


def _tracking_options(config: ScenarioConfig) -> TrackingOptions:
    est = config.estimator
    trk = config.tracker
    r_fixed = None
    if trk.r_fixed_diag is not None:
        r_fixed = np.diag(np.asarray(trk.r_fixed_diag, dtype=float))
    return TrackingOptions(
        noise_model=NoiseModel(q_a=trk.q_a, r_mode=trk.r_mode, r_fixed=r_fixed),
        angle_update=config.angle_update,
        window_floors=est.window_floors,
        window_scale=est.window_scale,
        grid_counts=est.grid_counts,
        refine_ftol_rel=est.refine_ftol_rel,
        refine_max_iter=est.refine_max_iter,
        refine_max_restarts=est.refine_max_restarts,
        gate_prob=trk.gate_prob,
        max_coast=trk.max_coast,
        tx_power_w=config.budget.transmit_power_w,
    )


def _initial_track(config: ScenarioConfig, truth0: TargetState) -> TrackState:
    """Initial access: the true state perturbed by the configured noise."""
    trk = config.tracker
    rng = substream(config.run.seed, "init")
    sigma = np.array(
        [
            trk.init_noise_theta_rad,
            trk.init_noise_r_m,
            trk.init_noise_v_mps,
            trk.init_noise_v_mps,
        ]
    )
    base = truth0.as_vector()
    mean = None
    for _ in range(100):
        cand = base + sigma * rng.standard_normal(4)
        try:
            TargetState.from_vector(cand)
        except ValueError:
            continue
        mean = cand
        break
    if mean is None:
        raise RuntimeFailure(
            "initial access failed: perturbed state never landed in the valid region"
        )
    cov = np.diag((trk.init_cov_factor * sigma) ** 2)
    beta0 = reflection_coefficient(
        TargetState.from_vector(mean).location, config.budget, config.array.wavelength_m
    ) * math.sqrt(config.budget.transmit_power_w)
    return TrackState.initialize(mean, cov, beta_amp=beta0)


def _true_states_for_cpi(config: ScenarioConfig, start_time_s: float) -> list[TargetState]:
    if config.intra_cpi_motion == "continuous":
        return sample_trajectory(config.trajectory, config.clock, start_time_s=start_time_s)
    # frozen: the CPI-start state advances by exact constant velocity, the
    # same motion model the estimator assumes
    return linear_states(state_at(config.trajectory, start_time_s), config.clock)


def _truth_at_midpoint(config: ScenarioConfig, start_time_s: float) -> TargetState:
    """True state at the CPI's snapshot-window center, the track's epoch."""
    tau = config.clock.midpoint_offset_s
    if config.intra_cpi_motion == "continuous":
        return state_at(config.trajectory, start_time_s + tau)
    return constant_velocity_step(state_at(config.trajectory, start_time_s), tau)


def run_nfpb(config: ScenarioConfig) -> tuple[list[RunRecord], dict, bool]:
    """Per-CPI loop: beam from last prediction, echo along the truth,
    estimate, filter update, kinematic predict, record.

    Returns (records, summary metrics, lost flag). A lost track stops the
    loop early with the partial records kept.
    """
    if config.trajectory is None:
        raise ConfigError("trajectory.kind: required for tracking runs")
    cfg = config.array
    clock = config.clock
    budget = config.budget
    seed = config.run.seed
    options = _tracking_options(config)

    truth0 = _truth_at_midpoint(config, 0.0)
    track = _initial_track(config, truth0)

    records: list[RunRecord] = []
    nees: list[float] = []
    lost = False
    for i in range(config.run.num_cpis):
        t0 = i * clock.cpi_duration_s
        pred_mean = track.predicted_mean.copy()
        pred_state = TargetState.from_vector(pred_mean)
        # the prediction sits at the CPI midpoint; the beam plan's ramps
        # reference the CPI start, so step the focus point back
        try:
            beam_state = constant_velocity_step(
                pred_state, -clock.midpoint_offset_s
            )
        except ValueError:
            beam_state = pred_state
        weights = focus_weights(cfg, beam_state.location)
        plan = BeamPlan(
            base_weights=weights,
            phase_ramps=doppler_ramps(cfg, clock, beam_state),
            predicted_state=beam_state,
        )

        states = _true_states_for_cpi(config, t0)
        reflection = reflection_coefficient(
            states[0].location, budget, cfg.wavelength_m
        )
        probe = random_probe(clock.snapshots_per_cpi, substream(seed, "probe", i))
        clean = noiseless_echo(
            cfg,
            clock,
            states,
            weights,
            probe,
            reflection,
            tx_power_w=budget.transmit_power_w,
        )
        frame = EchoFrame(
            samples=clean,
            probe=probe,
            transmit_weights=weights,
            noise_power_w=0.0,
            reflection=reflection,
        )
        frame = add_noise(frame, budget.noise_power_w, substream(seed, "noise", i))

        report: EstimateReport | None = None
        try:
            track, report = track_cpi(cfg, clock, frame, track, options)
        except TrackLostError as exc:
            track, report = exc.track, exc.report
            lost = True

        metrics = comm_metrics(cfg, clock, states, plan, budget)
        truth_vec = _truth_at_midpoint(config, t0).as_vector()
        err = track.mean - truth_vec
        try:
            nees.append(float(err @ np.linalg.solve(track.covariance, err)))
        except np.linalg.LinAlgError:
            nees.append(float("inf"))
        records.append(
            RunRecord(
                cpi_index=i,
                true_state=truth_vec,
                estimated=report.estimate.as_vector(),
                predicted=pred_mean,
                posterior=track.mean.copy(),
                rcrb=report.rcrb.copy(),
                gain_mean=float(np.mean(metrics.gain)),
                rate_mean_bps_hz=float(np.mean(metrics.rate_bps_hz)),
                genie_rate_mean=float(np.mean(metrics.genie_rate_bps_hz)),
                gain_loss_db=float(metrics.gain_loss_db),
                gated_out=track.gated_out,
            )
        )
        if lost:
            break

    metrics = _track_metrics(records, nees, lost)
    return records, metrics, lost


def _track_metrics(records: list[RunRecord], nees: list[float], lost: bool) -> dict:
    pos_err = []
    for rec in records:
        tx, ty = _polar_xy(rec.true_state[0], rec.true_state[1])
        px, py = _polar_xy(rec.posterior[0], rec.posterior[1])
        pos_err.append(math.hypot(px - tx, py - ty))
    n = len(records)
    mid = nees[n // 3 : max(2 * n // 3, n // 3 + 1)] if n else []
    return {
        "num_cpis_completed": n,
        "lost_track": lost,
        "num_gated_out": sum(int(r.gated_out) for r in records),
        "median_position_error_m": float(np.median(pos_err)) if pos_err else None,
        "median_gain_loss_db": (
            float(np.median([r.gain_loss_db for r in records])) if records else None
        ),
        "nees_mean_middle_third": float(np.mean(mid)) if mid else None,
        "mean_rate_bps_hz": (
            float(np.mean([r.rate_mean_bps_hz for r in records])) if records else None
        ),
        "mean_genie_rate_bps_hz": (
            float(np.mean([r.genie_rate_mean for r in records])) if records else None
        ),
    }


def _polar_xy(theta: float, r: float) -> tuple[float, float]:
    return r * math.cos(theta), r * math.sin(theta)


def run_crb_sweep(config: ScenarioConfig) -> list[list]:
    """RCRB across range, holding the rest of the target state fixed."""
    if config.target is None:
        raise ConfigError("target.theta_rad: required for crb-sweep runs")
    if config.sweep is None:
        raise ConfigError("sweep.r_over_rayleigh_min: required for crb-sweep runs")
    from .geometry import rayleigh_distance

    sw = config.sweep
    d_r = rayleigh_distance(config.array)
    if sw.spacing == "log":
        ratios = np.geomspace(sw.r_over_rayleigh_min, sw.r_over_rayleigh_max, sw.num_points)
    else:
        ratios = np.linspace(sw.r_over_rayleigh_min, sw.r_over_rayleigh_max, sw.num_points)
    ranges = [float(x * d_r) for x in ratios]

    beta = reflection_coefficient(
        config.target.location, config.budget, config.array.wavelength_m
    )
    table = rcrb_sweep(
        config.array,
        config.clock,
        config.target,
        beta,
        config.budget.noise_power_w,
        ranges,
        tx_power_w=config.budget.transmit_power_w,
    )
    rows = []
    for r_m, rep in table:
        rows.append(
            [r_m]
            + [float(v) for v in rep.rcrb]
            + [float(rep.condition_number), int(rep.singular)]
        )
    return rows


def _mc_sigma2(config: ScenarioConfig, snr_db: float, beta: complex) -> float:
    """Noise power giving the requested per-snapshot post-combining SNR.

    snr_db = 10 log10(|beta|^2 P N^2 / sigma^2): transmit and receive
    focusing each contribute a factor N on top of the per-element echo
    power.
    """
    n = config.array.num_elements
    p = config.budget.transmit_power_w
    return abs(beta) ** 2 * p * n * n / 10.0 ** (snr_db / 10.0)


def run_mc_rmse(config: ScenarioConfig) -> list[list]:
    """Monte Carlo RMSE against the RCRB at a fixed target state."""
    if config.target is None:
        raise ConfigError("target.theta_rad: required for mc-rmse runs")
    if config.mc is None:
        raise ConfigError("mc.trials: required for mc-rmse runs")
    cfg = config.array
    clock = config.clock
    truth = config.target
    seed = config.run.seed
    est = config.estimator

    weights = focus_weights(cfg, truth.location)
    beta = reflection_coefficient(truth.location, config.budget, cfg.wavelength_m)
    states = linear_states(truth, clock)
    amp = beta * math.sqrt(config.budget.transmit_power_w)

    rows: list[list] = []
    for point, snr_db in enumerate(config.mc.snr_db):
        sigma2 = _mc_sigma2(config, snr_db, beta)
        errors = np.zeros((config.mc.trials, 4))
        for trial in range(config.mc.trials):
            probe = random_probe(
                clock.snapshots_per_cpi, substream(seed, "mc-probe", point, trial)
            )
            clean = noiseless_echo(
                cfg,
                clock,
                states,
                weights,
                probe,
                beta,
                tx_power_w=config.budget.transmit_power_w,
            )
            frame = EchoFrame(
                samples=clean,
                probe=probe,
                transmit_weights=weights,
                noise_power_w=0.0,
                reflection=beta,
            )
            frame = add_noise(frame, sigma2, substream(seed, "mc-noise", point, trial))
            window = _mc_window(config, truth)
            report = grid_then_refine(
                cfg,
                clock,
                frame,
                window,
                tx_power_w=config.budget.transmit_power_w,
                refine_ftol_rel=est.refine_ftol_rel,
                refine_max_iter=est.refine_max_iter,
                refine_max_restarts=est.refine_max_restarts,
            )
            errors[trial] = report.estimate.as_vector() - truth.as_vector()
        if config.mc.trials > 0:
            # reference probe: the bound is probe-dependent only through
            # |s(m)| = 1, so any unit-modulus probe gives the same FIM
            ref_probe = np.ones(clock.snapshots_per_cpi, dtype=complex)
            rep = crb_report(cfg, clock, truth, amp, weights, ref_probe, sigma2)
            rmse = np.sqrt(np.mean(errors**2, axis=0))
            for k, name in enumerate(PARAM_NAMES):
                bound = float(rep.rcrb[k])
                ratio = rmse[k] / bound if bound > 0 else float("inf")
                rows.append(
                    [snr_db, name, float(rmse[k]), bound, float(ratio), config.mc.trials]
                )
    return rows


def _mc_window(config: ScenarioConfig, truth: TargetState) -> SearchWindow:
    """Fixed-state Monte Carlo window: floors around the truth."""
    from .tracker import build_window

    ref = np.zeros(4)
    return build_window(
        config.array,
        config.clock,
        truth.as_vector(),
        ref,
        _tracking_options(config),
    )


def run_estimate_once(config: ScenarioConfig) -> dict:
    """Single-frame estimate; returns summary metrics (no CSV output)."""
    if config.target is None:
        raise ConfigError("target.theta_rad: required for estimate-once runs")
    cfg = config.array
    clock = config.clock
    truth = config.target
    seed = config.run.seed

    weights = focus_weights(cfg, truth.location)
    beta = reflection_coefficient(truth.location, config.budget, cfg.wavelength_m)
    states = linear_states(truth, clock)
    probe = random_probe(clock.snapshots_per_cpi, substream(seed, "probe", 0))
    clean = noiseless_echo(
        cfg,
        clock,
        states,
        weights,
        probe,
        beta,
        tx_power_w=config.budget.transmit_power_w,
    )
    frame = EchoFrame(
        samples=clean,
        probe=probe,
        transmit_weights=weights,
        noise_power_w=0.0,
        reflection=beta,
    )
    frame = add_noise(frame, config.budget.noise_power_w, substream(seed, "noise", 0))

    est = config.estimator
    if est.init_mode == "global":
        report = initial_access_search(
            cfg, clock, frame, tx_power_w=config.budget.transmit_power_w
        )
    else:
        window = _mc_window(config, truth)
        report = grid_then_refine(
            cfg,
            clock,
            frame,
            window,
            tx_power_w=config.budget.transmit_power_w,
            refine_ftol_rel=est.refine_ftol_rel,
            refine_max_iter=est.refine_max_iter,
            refine_max_restarts=est.refine_max_restarts,
        )
    err = report.estimate.as_vector() - truth.as_vector()
    return {
        "truth": [float(v) for v in truth.as_vector()],
        "estimate": [float(v) for v in report.estimate.as_vector()],
        "error": [float(v) for v in err],
        "rcrb": [float(v) for v in report.rcrb],
        "objective": report.objective,
        "beta_hat_re": report.beta_hat.real,
        "beta_hat_im": report.beta_hat.imag,
        "converged": report.converged,
        "low_confidence": report.low_confidence,
        "crb_singular": report.crb_singular,
    }


def run_subcommand(command: str, config: ScenarioConfig, out_dir: Path) -> int:
    """Execute one subcommand, writing its outputs; returns the exit status."""
    out_dir.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    if command == "crb-sweep":
        rows = run_crb_sweep(config)
        write_csv(out_dir / "crb_sweep.csv", CRB_SWEEP_CSV_HEADER, rows)
        write_summary(
            out_dir, config, time.perf_counter() - t0, {"num_points": len(rows)}
        )
        return 0
    if command == "track":
        records, metrics, lost = run_nfpb(config)
        write_csv(out_dir / "track.csv", TRACK_CSV_HEADER, [r.row() for r in records])
        write_summary(out_dir, config, time.perf_counter() - t0, metrics)
        return 3 if lost else 0
    if command == "mc-rmse":
        rows = run_mc_rmse(config)
        write_csv(out_dir / "mc_rmse.csv", MC_RMSE_CSV_HEADER, rows)
        write_summary(
            out_dir, config, time.perf_counter() - t0, {"num_rows": len(rows)}
        )
        return 0
    if command == "estimate-once":
        metrics = run_estimate_once(config)
        write_summary(out_dir, config, time.perf_counter() - t0, metrics)
        return 0
    raise ValueError(f"unknown subcommand: {command}")
