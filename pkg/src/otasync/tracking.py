"""Inter-array phase tracking: direct pass-through or a scalar Kalman filter
whose process and observation noises are correlated (the observation drift is
contained in the process drift), absorbed into the closed-form gain.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import SlotLayout, SystemParams, derive_sigma_nu


def wrap(angle):
    """Map to [-pi, pi): ((angle + pi) mod 2pi) - pi. Accepts scalars/arrays."""
    if not np.all(np.isfinite(angle)):
        raise ValueError("wrap() requires finite input")
    wrapped = np.mod(np.asarray(angle, dtype=float) + np.pi, 2.0 * np.pi) - np.pi
    return float(wrapped) if np.isscalar(angle) or np.ndim(angle) == 0 else wrapped


def representative_ue(n_ues: int) -> int:
    """UE index whose pilot instant stands in for all UEs' estimation times
    (floor(K/2), clamped to a valid 1-based index for tiny K)."""
    return max(1, n_ues // 2)


def noise_coefficients(layout: SlotLayout, n_ues: int, frame_len: int):
    """Integer multiples of sigma_nu^2 for the process/observation drifts:
    (8 F tau_c - 4 (i2 - floor(K/2)), 2 (i1 - floor(K/2))).
    """
    k_rep = representative_ue(n_ues)
    c_zeta = 8 * frame_len * layout.tau_c - 4 * (layout.i2 - k_rep)
    c_xi = 2 * (layout.i1 - k_rep)
    return c_zeta, c_xi


@dataclass(frozen=True)
class NoiseModel:
    """Variances driving the tracker: inter-measurement drift (sigma_zeta_sq),
    estimation-instant offset drift (sigma_xi_sq), and the over-the-air
    measurement error 1/(rho_ap ||G||^2) (meas_var)."""

    sigma_zeta_sq: float
    sigma_xi_sq: float
    meas_var: float

    def __post_init__(self):
        if min(self.sigma_zeta_sq, self.sigma_xi_sq, self.meas_var) < 0:
            raise ValueError("noise variances must be nonnegative")
        if self.sigma_xi_sq > self.sigma_zeta_sq + 1e-15:
            raise ValueError("sigma_xi_sq must not exceed sigma_zeta_sq")


def derive_noise_model(params: SystemParams, layout: SlotLayout, op_norm: float) -> NoiseModel:
    c_zeta, c_xi = noise_coefficients(layout, params.n_ues, params.frame_len)
    sig2 = derive_sigma_nu(params)
    if op_norm <= 0:
        raise ValueError(f"op_norm must be positive, got {op_norm}")
    return NoiseModel(sigma_zeta_sq=c_zeta * sig2, sigma_xi_sq=c_xi * sig2,
                      meas_var=1.0 / (params.rho_ap * op_norm**2))


@dataclass(frozen=True)
class KalmanState:
    alpha_hat: float
    p_var: float
    n: int = 1


def kalman_init(first_obs: float, model: NoiseModel) -> KalmanState:
    """No prior: start at the first raw measurement with its own error
    variance (the initial offset is uniform on the circle, so any fixed prior
    would bias the wrap)."""
    return KalmanState(alpha_hat=float(first_obs),
                       p_var=model.sigma_xi_sq + model.meas_var, n=1)


def kalman_gain(p_var, model: NoiseModel):
    """kappa = (P + sigma_xi^2) / (P + 3 sigma_xi^2 + meas_var)."""
    return (p_var + model.sigma_xi_sq) / (p_var + 3.0 * model.sigma_xi_sq + model.meas_var)


def kalman_update(state: KalmanState, obs: float, model: NoiseModel) -> KalmanState:
    """One measurement step, formulas applied verbatim and in order:
    gain, wrapped-innovation state update, variance update."""
    kappa = kalman_gain(state.p_var, model)
    alpha_hat = state.alpha_hat + kappa * wrap(obs - state.alpha_hat)
    p_var = state.p_var - kappa * (state.p_var + model.sigma_xi_sq) + model.sigma_zeta_sq
    return KalmanState(alpha_hat=float(alpha_hat), p_var=float(p_var), n=state.n + 1)
