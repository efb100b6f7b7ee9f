"""Fisher information and Cramer-Rao bounds for the mobility state."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .beamformer import focus_weights
from .estimator import signature
from .geometry import ArrayConfig, PolarLocation
from .kinematics import CpiClock, TargetState

# central finite-difference steps for (angle, distance, v_r, v_theta)
FD_STEPS = (1e-6, 1e-5, 1e-4, 1e-4)

# balanced-FIM condition number beyond which the inverse is reported as
# untrustworthy
SINGULAR_COND = 1e12


@dataclass(frozen=True)
class CrbReport:
    """6x6 information matrix and the mobility-block bounds derived from it.

    fim is over (angle, distance, v_r, v_theta, Re beta, Im beta); crb the
    leading 4x4 block of its inverse; rcrb the root diagonal in
    (rad, m, m/s, m/s). condition_number is that of the unit-diagonal
    (balanced) FIM: raw condition numbers are dominated by the mixed units.
    """

    fim: np.ndarray
    crb: np.ndarray
    rcrb: np.ndarray
    condition_number: float
    singular: bool
    fd_one_sided: bool = False


def _eta_valid(eta: np.ndarray) -> bool:
    return bool(
        np.isfinite(eta).all() and 0.0 < eta[0] < np.pi and eta[1] > 0.0
    )


def _mu_jacobian(
    cfg: ArrayConfig,
    clock: CpiClock,
    state: TargetState,
    amp: complex,
    weights: np.ndarray,
    probe: np.ndarray,
    steps: tuple[float, float, float, float],
) -> tuple[np.ndarray, np.ndarray, bool]:
    """Stacked-mean derivatives for the six parameters.

    Mobility derivatives are central finite differences (one-sided when a
    step would leave the valid region); the reflection derivatives are
    exact. amp is beta*sqrt(P), the full complex amplitude of the mean.
    """
    eta0 = state.as_vector()
    u0 = signature(cfg, clock, state, weights, probe)
    d = np.empty((u0.size, 6), dtype=complex)
    one_sided = False

    def sig_at(eta: np.ndarray) -> np.ndarray:
        return signature(cfg, clock, TargetState.from_vector(eta), weights, probe)

    for i in range(4):
        h = steps[i]
        ep = eta0.copy()
        ep[i] += h
        em = eta0.copy()
        em[i] -= h
        okp, okm = _eta_valid(ep), _eta_valid(em)
        if okp and okm:
            d[:, i] = amp * (sig_at(ep) - sig_at(em)) / (2.0 * h)
        elif okp:
            d[:, i] = amp * (sig_at(ep) - u0) / h
            one_sided = True
        elif okm:
            d[:, i] = amp * (u0 - sig_at(em)) / h
            one_sided = True
        else:
            raise ValueError(f"cannot differentiate parameter {i}: both steps invalid")
    d[:, 4] = u0
    d[:, 5] = 1j * u0
    return d, u0, one_sided


def fim(
    cfg: ArrayConfig,
    clock: CpiClock,
    state: TargetState,
    beta: complex,
    weights: np.ndarray,
    probe: np.ndarray,
    sigma2_w: float,
    tx_power_w: float = 1.0,
    steps: tuple[float, float, float, float] = FD_STEPS,
) -> np.ndarray:
    """6x6 Fisher information over (angle, distance, v_r, v_theta, Re b, Im b).

    FIM_ij = (2/sigma^2) Re{ d mu^H/d eta_i . d mu/d eta_j } for the complex
    Gaussian frame with mean mu = beta*sqrt(P)*signature(eta).
    """
    if not (sigma2_w > 0):
        raise ValueError("sigma2_w must be > 0")
    amp = complex(beta) * math.sqrt(tx_power_w)
    # the reflection derivatives carry sqrt(P) explicitly
    d, u0, _ = _mu_jacobian(cfg, clock, state, amp, weights, probe, steps)
    d[:, 4] = math.sqrt(tx_power_w) * u0
    d[:, 5] = 1j * math.sqrt(tx_power_w) * u0
    gram = d.conj().T @ d
    return (2.0 / sigma2_w) * np.real(gram)


def _balanced_inverse(f: np.ndarray) -> tuple[np.ndarray, float, bool]:
    """Invert a symmetric information matrix via diagonal balancing.

    Returns (inverse, balanced condition number, singular flag). Dead
    parameters (zero diagonal) get infinite variance rows/columns.
    """
    k = f.shape[0]
    diag = np.diag(f).copy()
    alive = diag > 0
    inv = np.full((k, k), np.inf)
    if not alive.any():
        return inv, np.inf, True
    fa = f[np.ix_(alive, alive)]
    ds = 1.0 / np.sqrt(np.diag(fa))
    b = fa * np.outer(ds, ds)
    singular = not alive.all()
    try:
        binv = np.linalg.inv(b)
        cond = float(np.linalg.cond(b))
    except np.linalg.LinAlgError:
        binv = None
        cond = np.inf
    if binv is None or not np.all(np.isfinite(binv)):
        # regularize and retry; the result is flagged
        breg = b + 1e-12 * np.trace(b) * np.eye(b.shape[0])
        binv = np.linalg.inv(breg)
        cond = float(np.linalg.cond(breg))
        singular = True
    if not np.isfinite(cond) or cond > SINGULAR_COND:
        singular = True
    inv_alive = binv * np.outer(ds, ds)
    inv_alive = 0.5 * (inv_alive + inv_alive.T)
    ia = np.where(alive)[0]
    inv[np.ix_(ia, ia)] = inv_alive
    return inv, cond, singular


def crb_report(
    cfg: ArrayConfig,
    clock: CpiClock,
    state: TargetState,
    beta: complex,
    weights: np.ndarray,
    probe: np.ndarray,
    sigma2_w: float,
    tx_power_w: float = 1.0,
    steps: tuple[float, float, float, float] = FD_STEPS,
) -> CrbReport:
    """CRB for the mobility block with the reflection marginalized out."""
    if not (sigma2_w > 0):
        raise ValueError("sigma2_w must be > 0")
    amp = complex(beta) * math.sqrt(tx_power_w)
    d, u0, one_sided = _mu_jacobian(cfg, clock, state, amp, weights, probe, steps)
    d[:, 4] = math.sqrt(tx_power_w) * u0
    d[:, 5] = 1j * math.sqrt(tx_power_w) * u0
    f = (2.0 / sigma2_w) * np.real(d.conj().T @ d)
    inv, cond, singular = _balanced_inverse(f)
    crb = inv[:4, :4]
    diag = np.diag(crb)
    rcrb = np.sqrt(np.where(np.isfinite(diag), np.maximum(diag, 0.0), np.inf))
    return CrbReport(
        fim=f,
        crb=crb,
        rcrb=rcrb,
        condition_number=cond,
        singular=singular,
        fd_one_sided=one_sided,
    )


def rcrb_sweep(
    cfg: ArrayConfig,
    clock: CpiClock,
    base_state: TargetState,
    beta: complex,
    sigma2_w: float,
    ranges_m: np.ndarray,
    probe: np.ndarray | None = None,
    tx_power_w: float = 1.0,
) -> list[tuple[float, CrbReport]]:
    """CRB reports along a list of target distances.

    The angle and velocities come from base_state; the transmit beam is
    refocused at each evaluated (angle, distance) point. The default probe
    is all-ones: the information matrix is invariant to any unit-modulus
    probe.
    """
    if probe is None:
        probe = np.ones(clock.snapshots_per_cpi, dtype=complex)
    rows = []
    for r in np.asarray(ranges_m, dtype=float):
        loc = PolarLocation(base_state.angle, float(r))
        state = TargetState(
            loc, base_state.radial_velocity, base_state.transverse_velocity
        )
        w = focus_weights(cfg, loc)
        rows.append(
            (
                float(r),
                crb_report(cfg, clock, state, beta, w, probe, sigma2_w, tx_power_w),
            )
        )
    return rows
