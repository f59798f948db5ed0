"""Over-the-air bidirectional phase measurements between the two arrays.

The transmitting array beamforms along the leading singular direction of the
inter-array channel; the receiver applies the matched filter, so both
directions reduce to angle(sqrt(rho) ||G||^2 e^{j alpha} + ||G|| CN(0,1)).
In the 1->2 direction the conjugate of the leading left singular vector is
transmitted (retrodirective convention), which is what makes the received
gain equal ||G|| there as well.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import InterApChannel, complex_normal


@dataclass(frozen=True)
class SyncMeasurement:
    """One frame's bidirectional measurement pair.

    alpha_bar = alpha_12 - alpha_21 estimates
    (nu_2[i1] + nu_2[i2]) - (nu_1[i1] + nu_1[i2]); true_target records that
    combination from the simulated trajectories, for diagnostics only.
    """

    frame_index: int
    alpha_21: float
    alpha_12: float
    alpha_bar: float
    true_target: float

    def __post_init__(self):
        if self.alpha_bar != self.alpha_12 - self.alpha_21:
            raise ValueError("alpha_bar must equal alpha_12 - alpha_21")


def measure_direction(tx_ap: int, time: int, chan: InterApChannel, nu_pair,
                      rho_ap: float, rng) -> float:
    """Angle estimate of alpha = nu_rx[time] - nu_tx[time] from one sync signal.

    Synthesizes the received N-vector (unit-norm beamformer through G or G^T
    plus CN(0, I) noise) and returns the angle of the matched inner product.
    """
    if tx_ap not in (1, 2):
        raise ValueError("tx_ap must be 1 or 2")
    if not hasattr(rng, "standard_normal"):
        rng = np.random.default_rng(rng)
    traj1, traj2 = nu_pair
    if tx_ap == 2:
        alpha = traj1.value_at(time) - traj2.value_at(time)
        propagated = chan.g_matrix @ chan.u2
    else:
        alpha = traj2.value_at(time) - traj1.value_at(time)
        propagated = chan.g_matrix.T @ np.conj(chan.u1)
    z = complex_normal(rng, propagated.shape)
    y = np.sqrt(rho_ap) * np.exp(1j * alpha) * propagated + z
    return float(np.angle(np.vdot(propagated, y)))


def combine_bidirectional(alpha_21: float, alpha_12: float) -> float:
    """Difference of the two directional estimates; no modular reduction here,
    circular handling is deferred to the tracker's innovation wrap."""
    return alpha_12 - alpha_21


def measurement_variance(rho_ap: float, op_norm: float) -> float:
    """Variance of the combined measurement error, 1/(rho_ap ||G||^2): the two
    per-direction angle MSEs of 0.5/(rho_ap ||G||^2) summed."""
    if op_norm <= 0:
        raise ValueError(f"op_norm must be positive, got {op_norm}")
    return 1.0 / (rho_ap * op_norm**2)
