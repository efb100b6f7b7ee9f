"""Monostatic round-trip echo frames with exact spherical-wave time variation."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .geometry import ArrayConfig, PolarLocation, element_target_distance
from .kinematics import CpiClock, TargetState

PATH_LOSS_MODES = ("unit-reflection", "radar-equation")


def dbm_to_watts(dbm: float) -> float:
    return 10.0 ** ((dbm - 30.0) / 10.0)


@dataclass(frozen=True)
class LinkBudget:
    """Transmit and noise powers in watts plus the reflection model."""

    transmit_power_w: float
    noise_power_w: float
    path_loss_mode: str = "unit-reflection"

    def __post_init__(self) -> None:
        if not (self.transmit_power_w > 0):
            raise ValueError("transmit_power_w must be > 0")
        if not (self.noise_power_w > 0):
            raise ValueError("noise_power_w must be > 0")
        if self.path_loss_mode not in PATH_LOSS_MODES:
            raise ValueError(f"unknown path_loss_mode: {self.path_loss_mode!r}")

    @staticmethod
    def from_dbm(
        tx_power_dbm: float, noise_power_dbm: float, path_loss_mode: str = "unit-reflection"
    ) -> "LinkBudget":
        return LinkBudget(
            dbm_to_watts(tx_power_dbm), dbm_to_watts(noise_power_dbm), path_loss_mode
        )


@dataclass(frozen=True)
class EchoFrame:
    """One CPI of received baseband samples plus what produced them.

    samples is N x M (elements x snapshots). probe is the known unit-modulus
    slow-time waveform; transmit_weights the unit-norm beam used during the
    CPI; noise_power_w the per-complex-sample noise variance; reflection the
    complex scalar reflection coefficient.
    """

    samples: np.ndarray
    probe: np.ndarray
    transmit_weights: np.ndarray
    noise_power_w: float
    reflection: complex

    def __post_init__(self) -> None:
        n, m = self.samples.shape
        if self.probe.shape != (m,):
            raise ValueError("probe length must match the snapshot count")
        if self.transmit_weights.shape != (n,):
            raise ValueError("transmit_weights length must match the element count")
        if np.max(np.abs(np.abs(self.probe) - 1.0)) > 1e-9:
            raise ValueError("probe must be unit-modulus")
        if self.noise_power_w < 0:
            raise ValueError("noise_power_w must be >= 0")


def random_probe(m: int, rng: np.random.Generator) -> np.ndarray:
    """Unit-modulus pseudo-random-phase slow-time waveform of length m."""
    return np.exp(1j * rng.uniform(0.0, 2.0 * np.pi, m))


def reflection_coefficient(loc: PolarLocation, budget: LinkBudget, wavelength_m: float) -> complex:
    """Reflection amplitude: 1 in unit-reflection mode, radar-equation otherwise.

    The radar-equation mode uses lambda/((4 pi)^{3/2} r^2) with unit radar
    cross-section and zero phase.
    """
    if budget.path_loss_mode == "unit-reflection":
        return 1.0 + 0.0j
    amp = wavelength_m / ((4.0 * np.pi) ** 1.5 * loc.distance**2)
    return complex(amp)


def noiseless_echo(
    cfg: ArrayConfig,
    clock: CpiClock,
    states: list[TargetState],
    weights: np.ndarray,
    probe: np.ndarray,
    reflection: complex,
    tx_power_w: float = 1.0,
) -> np.ndarray:
    """Exact monostatic echo for one CPI, N x M complex.

    y_n(m) = beta*sqrt(P)*s(m)*sum_k w_k exp(-j(2pi/lambda)(r_k(m)+r_n(m)))
    with r_n(m) the exact element-to-target distance at the snapshot-m true
    position. No explicit Doppler term: Doppler arises from the time-varying
    geometry. weights must be unit-norm (power is carried by tx_power_w).
    """
    m = clock.snapshots_per_cpi
    if len(states) != m:
        raise ValueError("need one TargetState per snapshot")
    if weights.shape != (cfg.num_elements,):
        raise ValueError("weights length must match the element count")
    if probe.shape != (m,):
        raise ValueError("probe length must match the snapshot count")
    if abs(np.linalg.norm(weights) - 1.0) > 1e-6:
        raise ValueError("transmit weights must be unit-norm")
    # distances (N, M): exact geometry per snapshot
    rn = np.empty((cfg.num_elements, m))
    for j, st in enumerate(states):
        rn[:, j] = element_target_distance(cfg, st.location)
    b = np.exp(-1j * cfg.wavenumber * rn)
    g_tx = weights @ b  # (M,): transmit-side focusing sum
    return (reflection * np.sqrt(tx_power_w)) * b * (probe * g_tx)[None, :]


def add_noise(frame: EchoFrame, noise_power_w: float, rng: np.random.Generator) -> EchoFrame:
    """Add circularly-symmetric complex Gaussian noise of the given variance."""
    if noise_power_w < 0:
        raise ValueError("noise_power_w must be >= 0")
    if noise_power_w == 0:
        return replace(frame, noise_power_w=0.0)
    scale = np.sqrt(noise_power_w / 2.0)
    re = rng.standard_normal(frame.samples.shape)
    im = rng.standard_normal(frame.samples.shape)
    return replace(
        frame,
        samples=frame.samples + scale * (re + 1j * im),
        noise_power_w=noise_power_w,
    )
