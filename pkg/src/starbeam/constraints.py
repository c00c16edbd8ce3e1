"""Feasibility projections and the bounded phase-increment regulator.

All operations are pure and elementwise or rank-1; none of them builds an
N x N matrix.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, DegenerateInputError
from .model import TWO_PI, CoupledAuxiliary

# Feasible per-element phase differences, in the canonical tie-break order:
# the first candidate attaining the minimum deviation wins.
PHASE_DIFF_CANDIDATES = (np.pi / 2, -np.pi / 2, 3 * np.pi / 2, -3 * np.pi / 2)


@dataclass(frozen=True)
class RegulatorConfig:
    """Gain of the sigmoid regulator mapping a raw increment into (0, lam)."""

    lam: float = TWO_PI

    def __post_init__(self) -> None:
        if not self.lam > 0:
            raise ConfigurationError("regulator gain must be positive")


def sigmoid(x: np.ndarray) -> np.ndarray:
    """Numerically stable logistic function, clamped to the open unit
    interval so downstream range guarantees survive rounding."""
    x = np.asarray(x, dtype=float)
    z = np.exp(-np.abs(x))
    out = np.where(x >= 0, 1.0 / (1.0 + z), z / (1.0 + z))
    return np.clip(out, np.finfo(float).tiny, np.nextafter(1.0, 0.0))


def wrap_phase(theta: np.ndarray) -> np.ndarray:
    """Wrap angles into [0, 2*pi); rounding can make np.mod return the
    modulus itself, which maps to 0."""
    out = np.mod(np.asarray(theta, dtype=float), TWO_PI)
    return np.where(out >= TWO_PI, 0.0, out)


def normalize_power(W: np.ndarray, p_max: float) -> np.ndarray:
    """Scale the precoder so its squared Frobenius norm equals p_max."""
    if not p_max > 0:
        raise ConfigurationError("p_max must be positive")
    W = np.asarray(W, dtype=np.complex128)
    total = np.vdot(W, W).real
    if not total > 0:
        raise DegenerateInputError("cannot normalize an all-zero precoder")
    return np.sqrt(p_max / total) * W


def normalize_amplitudes(
    beta_t_raw: np.ndarray, beta_r_raw: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Rescale each (beta_t, beta_r) pair onto the unit circle
    beta_t^2 + beta_r^2 = 1."""
    bt = np.asarray(beta_t_raw, dtype=float)
    br = np.asarray(beta_r_raw, dtype=float)
    sq = bt**2 + br**2
    if not (sq > 0).all():
        raise DegenerateInputError(
            "zero amplitude pair; upstream initializer produced a dead element"
        )
    r = np.sqrt(sq)
    return bt / r, br / r


def regulate_phase_delta(delta_raw: np.ndarray, reg: RegulatorConfig) -> np.ndarray:
    """Map raw increments into (0, lam) elementwise via lam * sigmoid."""
    return reg.lam * sigmoid(delta_raw)


def apply_phase_delta(theta: np.ndarray, delta_reg: np.ndarray) -> np.ndarray:
    """Advance phases by the regulated increments, wrapped to [0, 2*pi)."""
    return wrap_phase(np.asarray(theta, dtype=float) + delta_reg)


def project_coupled_phases(
    theta_t: np.ndarray, theta_r: np.ndarray
) -> CoupledAuxiliary:
    """Closest phase pair (least squared deviation) whose difference is an
    odd multiple of pi/2.

    Each element is independent: for difference offset t the minimizer is
    ((theta_t + theta_r + t) / 2, (theta_t + theta_r - t) / 2), so the four
    candidate offsets are scanned and the first minimum kept. Inputs are
    treated as plain reals (no circular wrapping); deviation is Euclidean.
    """
    tt = np.asarray(theta_t, dtype=float)
    tr = np.asarray(theta_r, dtype=float)
    diff = tt - tr
    # Squared deviation of candidate t is (t - diff)^2 / 2; the common 1/2
    # does not affect the argmin.
    scores = np.stack([(t - diff) ** 2 for t in PHASE_DIFF_CANDIDATES])
    chosen = np.asarray(PHASE_DIFF_CANDIDATES)[np.argmin(scores, axis=0)]
    half_sum = 0.5 * (tt + tr)
    half_t = 0.5 * chosen
    return CoupledAuxiliary(half_sum + half_t, half_sum - half_t)


def coupling_residual(theta_t: np.ndarray, theta_r: np.ndarray) -> np.ndarray:
    """|cos(theta_t - theta_r)| per element; zero iff the pair is coupled."""
    return np.abs(np.cos(np.asarray(theta_t, float) - np.asarray(theta_r, float)))
