"""Closed-form ascent gradients of the weighted sum-rate, plus an
independent central-difference oracle.

Convention for the complex precoder gradient: grad_w is the conjugate
(Wirtinger) ascent direction, i.e. for every perturbation matrix D

    d/dt R(W + t * D) |_{t=0}  =  2 * Re trace(grad_w^H D),

equivalently grad_w = 0.5 * (dR/dRe(W) + j * dR/dIm(W)). Amplitude and
phase gradients are ordinary partial derivatives over the concatenated
(t-half, r-half) vectors of length 2N.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .model import (
    BeamformingState,
    ChannelSet,
    SystemConfig,
    check_dimensions,
    user_selection_masks,
)

_LN2 = float(np.log(2.0))


@dataclass(frozen=True)
class GradientBundle:
    """Ascent directions for the three variable groups."""

    grad_w: np.ndarray      # (M, K) complex, conjugate-gradient convention
    grad_beta: np.ndarray   # (2N,) d(WSR)/d(beta_t, beta_r)
    grad_theta: np.ndarray  # (2N,) d(WSR)/d(theta_t, theta_r)


def wsr_gradients(
    cfg: SystemConfig, ch: ChannelSet, state: BeamformingState
) -> GradientBundle:
    """All three analytic gradients at one state.

    Derivation: with u[k, j] the amplitude user k receives from precoder
    column j, the rate of user k depends on the signal power |u[k, k]|^2
    and the interference sum_{j != k} |u[k, j]|^2. Chain-ruling log2(1 +
    gamma) gives a per-(k, j) coefficient matrix C (positive on the
    diagonal, -gamma_k-scaled off it) that weights the elementary
    derivatives of |u[k, j]|^2 with respect to each variable group.
    """
    check_dimensions(cfg, ch, state)
    amp = state.beta
    phase = np.exp(1j * state.theta)
    masked = np.conj(ch.h_aug) * user_selection_masks(cfg, ch)  # (K, 2N)
    rows = (masked * (amp * phase)) @ ch.g_aug                  # (K, M)
    precoded = ch.g_aug @ state.W                               # (2N, K)
    U = rows @ state.W                                          # (K, K)

    power = np.abs(U) ** 2
    signal = np.diagonal(power)
    denom = power.sum(axis=1) - signal + cfg.noise_power
    gammas = signal / denom
    sig_coef = cfg.weights / (_LN2 * (1.0 + gammas) * denom)    # (K,)
    C = np.tile((-(sig_coef * gammas))[:, None], (1, cfg.K))
    np.fill_diagonal(C, sig_coef)

    grad_w = rows.conj().T @ (C * U)

    # bracket[n] = sum_{k,j} C[k,j] * conj(U[k,j]) * masked[k,n] * phase[n]
    #             * precoded[n,j]
    weighted = (C * np.conj(U)) @ precoded.T                    # (K, 2N)
    bracket = phase * (masked * weighted).sum(axis=0)           # (2N,)
    grad_beta = 2.0 * bracket.real
    grad_theta = -2.0 * amp * bracket.imag
    return GradientBundle(grad_w, grad_beta, grad_theta)


def grad_wsr_precoder(
    cfg: SystemConfig, ch: ChannelSet, state: BeamformingState
) -> np.ndarray:
    """(M, K) conjugate ascent direction of the WSR with respect to W."""
    return wsr_gradients(cfg, ch, state).grad_w


def grad_wsr_amplitudes(
    cfg: SystemConfig, ch: ChannelSet, state: BeamformingState
) -> np.ndarray:
    """(2N,) partial derivatives of the WSR w.r.t. (beta_t, beta_r)."""
    return wsr_gradients(cfg, ch, state).grad_beta


def grad_wsr_phases(
    cfg: SystemConfig, ch: ChannelSet, state: BeamformingState
) -> np.ndarray:
    """(2N,) partial derivatives of the WSR w.r.t. (theta_t, theta_r)."""
    return wsr_gradients(cfg, ch, state).grad_theta


def state_to_vector(state: BeamformingState) -> np.ndarray:
    """Flatten a state into the real coordinate vector
    [Re W, Im W, beta_t, beta_r, theta_t, theta_r]."""
    return np.concatenate(
        [
            state.W.real.ravel(),
            state.W.imag.ravel(),
            state.beta_t,
            state.beta_r,
            state.theta_t,
            state.theta_r,
        ]
    )


def state_from_vector(vec: np.ndarray, M: int, N: int, K: int) -> BeamformingState:
    """Inverse of :func:`state_to_vector`."""
    mk = M * K
    w_re = vec[:mk].reshape(M, K)
    w_im = vec[mk : 2 * mk].reshape(M, K)
    parts = np.split(vec[2 * mk :], 4)
    return BeamformingState(w_re + 1j * w_im, *parts)


def finite_diff_gradient(
    objective: Callable[[BeamformingState], float],
    state: BeamformingState,
    step: float = 1e-6,
) -> GradientBundle:
    """Central differences over every real coordinate of the state.

    The precoder block is reassembled as 0.5 * (d/dRe + j * d/dIm) so it is
    directly comparable with the analytic conjugate gradient.
    """
    if not step > 0:
        raise ValueError("step must be positive")
    M, K = state.W.shape
    N = state.beta_t.shape[0]
    x0 = state_to_vector(state)
    grad = np.empty_like(x0)
    for i in range(x0.size):
        xp = x0.copy()
        xp[i] += step
        xm = x0.copy()
        xm[i] -= step
        grad[i] = (
            objective(state_from_vector(xp, M, N, K))
            - objective(state_from_vector(xm, M, N, K))
        ) / (2.0 * step)
    mk = M * K
    grad_w = 0.5 * (grad[:mk] + 1j * grad[mk : 2 * mk]).reshape(M, K)
    grad_beta = grad[2 * mk : 2 * mk + 2 * N]
    grad_theta = grad[2 * mk + 2 * N :]
    return GradientBundle(grad_w, grad_beta, grad_theta)
