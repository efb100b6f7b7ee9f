"""End-to-end acceptance battery for the shipped configurations.

One test per acceptance check, tolerances pinned. The closed-loop tracking
checks consume the session batteries from conftest; everything else builds
its scenario from the configs shipped in configs/.
"""

import time
from pathlib import Path

import numpy as np
import pytest
from scipy.stats import spearmanr

from nearbeam.beamformer import BeamPlan, comm_metrics, doppler_ramps, focus_weights
from nearbeam.cli import main
from nearbeam.config import load_config, parse_config_text
from nearbeam.crb import fim, rcrb_sweep
from nearbeam.geometry import (
    ArrayConfig,
    PolarLocation,
    farfield_steering,
    nearfield_steering,
    rayleigh_distance,
)
from nearbeam.harness import run_crb_sweep, run_mc_rmse
from nearbeam.kinematics import CpiClock, TargetState, state_at

CONFIG_DIR = Path(__file__).resolve().parents[1] / "configs"


def case_study_metrics_ok(battery):
    """Tracking quality gates shared by every case-study trajectory."""
    assert not any(run["lost"] for run in battery)
    for run in battery:
        m = run["metrics"]
        assert m["num_cpis_completed"] == 200
        assert m["median_position_error_m"] < 0.5
        assert m["median_gain_loss_db"] < 0.5
    nees = [run["metrics"]["nees_mean_middle_third"] for run in battery]
    assert 3.0 <= float(np.mean(nees)) <= 5.2


class TestBoundTrends:
    def test_rcrb_range_trends_are_strictly_monotone(self):
        """Sweep config: rcrb_r and rcrb_vtheta rise with range, rcrb_theta
        and rcrb_vr fall, strictly, across 12 log-spaced ranges."""
        cfg = load_config(str(CONFIG_DIR / "rcrb_sweep.cfg"))
        assert cfg.array.num_elements == 256
        assert cfg.array.carrier_frequency_hz == pytest.approx(28e9)
        assert cfg.clock.snapshots_per_cpi == 64
        assert cfg.target.location.angle == pytest.approx(np.pi / 2)
        assert cfg.target.radial_velocity == pytest.approx(3.0)
        assert cfg.target.transverse_velocity == pytest.approx(2.0)
        assert cfg.budget.transmit_power_w == pytest.approx(1.0)
        assert cfg.budget.noise_power_w == pytest.approx(1e-12)
        assert cfg.budget.path_loss_mode == "unit-reflection"
        assert cfg.sweep.num_points == 12
        assert cfg.sweep.spacing == "log"
        assert cfg.sweep.r_over_rayleigh_min == pytest.approx(0.02)
        assert cfg.sweep.r_over_rayleigh_max == pytest.approx(3.0)
        t0 = time.perf_counter()
        rows = run_crb_sweep(cfg)
        wall = time.perf_counter() - t0
        assert len(rows) == 12
        r = np.array([row[0] for row in rows])
        assert np.all(np.diff(r) > 0)
        # columns: r, rcrb_theta, rcrb_r, rcrb_vr, rcrb_vtheta, cond, flag
        for col, sign in ((1, -1.0), (2, +1.0), (3, -1.0), (4, +1.0)):
            vals = [row[col] for row in rows]
            rho = spearmanr(r, vals).statistic
            assert rho == pytest.approx(sign, abs=1e-12)
        assert wall < 120.0

    def test_transverse_velocity_bound_degenerates_in_far_field(self):
        """rcrb(v_theta) blows up by >100x from 0.05 d_R to 10 d_R while
        rcrb(v_r) moves by less than 10x."""
        cfg = load_config(str(CONFIG_DIR / "rcrb_sweep.cfg"))
        d_r = rayleigh_distance(cfg.array)
        reports = rcrb_sweep(
            cfg.array,
            cfg.clock,
            cfg.target,
            1.0 + 0.0j,
            cfg.budget.noise_power_w,
            np.array([0.05 * d_r, 10.0 * d_r]),
            tx_power_w=cfg.budget.transmit_power_w,
        )
        near, far = reports[0][1].rcrb, reports[1][1].rcrb
        assert np.all(np.isfinite(near))
        ratio_vtheta = far[3] / near[3]
        ratio_vr = far[2] / near[2]
        assert ratio_vtheta > 100.0
        assert np.isfinite(ratio_vr)
        assert 0.1 < ratio_vr < 10.0


class TestEstimatorEfficiency:
    def test_mc_rmse_brackets_rcrb_at_high_snr(self):
        """100-trial Monte Carlo at the shipped near-field state: every
        parameter's RMSE lands within [0.9, 3.0] of its root bound."""
        cfg = load_config(str(CONFIG_DIR / "mc_rmse.cfg"))
        assert cfg.mc.trials == 100
        assert cfg.target.location.distance == pytest.approx(20.0)
        assert min(cfg.mc.snr_db) >= 20.0
        t0 = time.perf_counter()
        rows = run_mc_rmse(cfg)
        wall = time.perf_counter() - t0
        assert len(rows) == 4 * len(cfg.mc.snr_db)
        for snr_db, param, rmse, rcrb, ratio, trials in rows:
            assert trials == 100
            assert 0.9 <= ratio <= 3.0, f"{param} at {snr_db} dB: {ratio}"
        assert wall < 600.0


class TestCaseStudyTracking:
    def test_arc_tracking_quality(self, arc_battery_10):
        """Ten seeded 200-CPI arc runs: no losses, sub-half-meter median
        position error, sub-half-dB median pointing loss, NEES in band."""
        case_study_metrics_ok(arc_battery_10)
        assert sum(run["wall_s"] for run in arc_battery_10) < 1200.0

    def test_tracking_is_trajectory_agnostic(self, line_battery, spiral_battery):
        """The same gates hold on line and spiral motion, and the three
        shipped configs differ only in their trajectory block."""
        case_study_metrics_ok(line_battery)
        case_study_metrics_ok(spiral_battery)
        assert sum(run["wall_s"] for run in line_battery) < 1200.0
        assert sum(run["wall_s"] for run in spiral_battery) < 1200.0
        raws = [
            parse_config_text((CONFIG_DIR / name).read_text())
            for name in ("case_study.cfg", "case_study_line.cfg", "case_study_spiral.cfg")
        ]
        kinds = [raw["trajectory.kind"] for raw in raws]
        assert sorted(kinds) == ["arc", "line", "spiral"]
        fixed = [
            {k: v for k, v in raw.items() if not k.startswith("trajectory.")}
            for raw in raws
        ]
        assert fixed[0] == fixed[1] == fixed[2]


class TestFarFieldLimits:
    def test_steering_and_ramps_flatten_far_out(self):
        """At 100 Rayleigh distances the spherical steering collapses to the
        planar one and the Doppler ramps lose their element dependence."""
        cfg = ArrayConfig(64, 28e9)
        theta = np.pi / 3
        r = 100.0 * rayleigh_distance(cfg)
        near = nearfield_steering(cfg, PolarLocation(theta, r))
        far = farfield_steering(cfg, theta)
        gap = np.abs(np.angle(near * np.conj(far)))
        assert gap.max() < 1e-2
        clock = CpiClock(0.01, 64)
        state = TargetState(PolarLocation(theta, r), 3.0, 2.0)
        ramps = doppler_ramps(cfg, clock, state)
        # every row collapses onto the uniform round-trip radial-Doppler
        # ramp; the residual element dependence scales as 1/aperture
        uniform = cfg.wavenumber * 2.0 * 3.0 * clock.snapshot_times()
        assert np.abs(ramps - uniform).max() < 1e-3

    def test_fim_angle_entry_matches_closed_form(self):
        """Far-field theta-theta information equals the classical ULA value
        within 0.1%, and is insensitive to the FD step choice."""
        cfg = ArrayConfig(16, 28e9)
        clock = CpiClock(0.01, 8)
        theta = np.pi / 3
        r = 100.0 * rayleigh_distance(cfg)
        state = TargetState(PolarLocation(theta, r), 0.0, 0.0)
        w = focus_weights(cfg, state.location)
        probe = np.ones(clock.snapshots_per_cpi, dtype=complex)
        sigma2 = 1e-6
        f = fim(cfg, clock, state, 1.0 + 0.0j, w, probe, sigma2)
        n = cfg.num_elements
        m = clock.snapshots_per_cpi
        kd = cfg.wavenumber * cfg.element_spacing_m
        oracle = (
            (2.0 / sigma2) * n * m * (kd * np.sin(theta)) ** 2 * n * (n * n - 1) / 12.0
        )
        assert f[0, 0] == pytest.approx(oracle, rel=1e-3)
        # step robustness is checked at a near-field moving state where
        # every mobility entry carries information; at the degenerate
        # far-field point the dead cross terms are pure truncation noise
        near_state = TargetState(PolarLocation(1.1, 0.6), 2.0, -1.0)
        w_near = focus_weights(cfg, near_state.location)
        base = fim(cfg, clock, near_state, 1.0 + 0.0j, w_near, probe, sigma2)
        steps = np.array([1e-6, 1e-5, 1e-4, 1e-4])
        for scale in (0.5, 2.0):
            other = fim(
                cfg, clock, near_state, 1.0 + 0.0j, w_near, probe, sigma2,
                steps=tuple(scale * steps),
            )
            denom = np.abs(base) + 1e-12 * np.abs(base).max()
            assert np.max(np.abs(other - base) / denom) < 1e-3


class TestDopplerCompensation:
    def test_ramps_shrink_intra_cpi_ripple(self):
        """Truth-built plan on the arc case study: compensation keeps the
        per-snapshot gain ripple under 0.1 dB and beats zeroed ramps."""
        cfg = load_config(str(CONFIG_DIR / "case_study.cfg"))
        states = [
            state_at(cfg.trajectory, float(t)) for t in cfg.clock.snapshot_times()
        ]
        w = focus_weights(cfg.array, states[0].location)
        ramps = doppler_ramps(cfg.array, cfg.clock, states[0])
        # the metric is noiseless, so "same seed" is automatic
        on = comm_metrics(
            cfg.array, cfg.clock, states,
            BeamPlan(w, ramps, states[0]), cfg.budget,
        )
        off = comm_metrics(
            cfg.array, cfg.clock, states,
            BeamPlan(w, np.zeros_like(ramps), states[0]), cfg.budget,
        )
        ripple_on = 10.0 * np.log10(on.gain.max() / on.gain.min())
        ripple_off = 10.0 * np.log10(off.gain.max() / off.gain.min())
        assert ripple_on < ripple_off
        assert ripple_on < 0.1


class TestDeterminism:
    BASE_CFG = {
        "array.N": "32",
        "array.carrier_frequency_hz": "30e9",
        "clock.cpi_s": "0.01",
        "clock.snapshots": "16",
        "budget.tx_power_dbm": "30",
        "budget.noise_power_dbm": "-60",
        "budget.path_loss_mode": "unit-reflection",
        "run.seed": "7",
    }
    TRACK_EXTRA = {
        "trajectory.kind": "line",
        "trajectory.start_x_m": "0.0",
        "trajectory.start_y_m": "8.0",
        "trajectory.velocity_x_mps": "1.0",
        "trajectory.velocity_y_mps": "0.5",
        "run.num_cpis": "4",
    }
    TARGET_EXTRA = {
        "target.theta_rad": "1.2",
        "target.r_m": "6.0",
        "target.vr_mps": "2.0",
        "target.vtheta_mps": "-1.0",
    }

    def run_twice(self, tmp_path, command, extra, csv_name):
        cfg = dict(self.BASE_CFG)
        cfg.update(extra)
        cfg_path = tmp_path / f"{command}.cfg"
        cfg_path.write_text("".join(f"{k} = {v}\n" for k, v in cfg.items()))
        blobs = []
        for tag in ("a", "b"):
            out = tmp_path / f"{command}-{tag}"
            assert main([command, "--config", str(cfg_path), "--out", str(out)]) == 0
            blobs.append((out / csv_name).read_bytes())
        return blobs

    def test_repeat_runs_emit_byte_identical_csvs(self, tmp_path):
        """Same config and seed give byte-identical CSVs on every subcommand
        that writes one."""
        jobs = [
            ("track", self.TRACK_EXTRA, "track.csv"),
            (
                "crb-sweep",
                {
                    **self.TARGET_EXTRA,
                    "sweep.r_over_rayleigh_min": "0.05",
                    "sweep.r_over_rayleigh_max": "2.0",
                    "sweep.num_points": "5",
                    "sweep.spacing": "log",
                },
                "crb_sweep.csv",
            ),
            (
                "mc-rmse",
                {**self.TARGET_EXTRA, "mc.trials": "4", "mc.snr_db": "25"},
                "mc_rmse.csv",
            ),
        ]
        for command, extra, csv_name in jobs:
            a, b = self.run_twice(tmp_path, command, extra, csv_name)
            assert a == b, f"{command} output differs between identical runs"
