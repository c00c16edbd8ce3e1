"""Core system model: scenario configuration, beamforming state, and exact
SINR / weighted sum-rate evaluation for a STAR-RIS assisted MU-MISO downlink.

Two equivalent SINR paths are provided:

* the direct per-side form, where each user sees its half-space surface
  coefficients ``beta_tau * exp(j * theta_tau)``;
* a stacked 2N-dimensional form where transmission and reflection
  coefficients are concatenated into single amplitude/phase vectors and a
  per-user 0/1 selection mask picks the active half.

The stacked form is what the optimizer differentiates; the direct form acts
as an independent cross-check. The N x N diagonal coefficient matrices are
never materialized; all products use elementwise vector forms.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError

TRANSMISSION = "transmission"
REFLECTION = "reflection"

TWO_PI = 2.0 * np.pi


def default_user_sides(n_users: int) -> tuple[str, ...]:
    """First ceil(K/2) users on the transmission side, the rest reflection."""
    n_t = (n_users + 1) // 2
    return tuple(TRANSMISSION if k < n_t else REFLECTION for k in range(n_users))


def _locked(arr: np.ndarray) -> np.ndarray:
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class SystemConfig:
    """Dimensions and link budget of one downlink scenario.

    M: BS antennas, N: surface elements, K: single-antenna users.
    p_max and noise_power are linear watts. weights are the per-user rate
    weights (non-negative, at least one positive). user_sides labels each
    user "transmission" or "reflection" and partitions the user set.
    """

    M: int
    N: int
    K: int
    p_max: float
    noise_power: float
    user_sides: tuple[str, ...] | None = None
    weights: np.ndarray | None = None

    def __post_init__(self) -> None:
        if min(self.M, self.N, self.K) < 1:
            raise ConfigurationError("M, N, K must all be >= 1")
        if not self.p_max > 0:
            raise ConfigurationError("p_max must be positive (watts)")
        if not self.noise_power > 0:
            raise ConfigurationError("noise_power must be positive (watts)")

        sides = self.user_sides
        if sides is None:
            sides = default_user_sides(self.K)
        sides = tuple(sides)
        if len(sides) != self.K:
            raise ConfigurationError("user_sides must have one label per user")
        if any(s not in (TRANSMISSION, REFLECTION) for s in sides):
            raise ConfigurationError(
                f"user side labels must be '{TRANSMISSION}' or '{REFLECTION}'"
            )
        object.__setattr__(self, "user_sides", sides)

        w = self.weights
        w = np.ones(self.K) if w is None else np.array(w, dtype=float)
        if w.shape != (self.K,):
            raise ConfigurationError("weights must have shape (K,)")
        if (w < 0).any() or not (w > 0).any():
            raise ConfigurationError("weights must be >= 0 with at least one > 0")
        object.__setattr__(self, "weights", _locked(w))


@dataclass(frozen=True)
class ChannelSet:
    """Channels of one scenario draw.

    G is the (N, M) BS-to-surface channel; h is (K, N) with row k the
    surface-to-user-k vector (the SINR uses its conjugate transpose).
    The stacked forms duplicate the physical channels so both coefficient
    halves live in one 2N vector: g_aug = [G; G] stacked vertically,
    h_aug[k] = [h_k, h_k], and mask_t / mask_r are the 0/1 indicator
    vectors selecting the transmission / reflection half.
    """

    G: np.ndarray
    h: np.ndarray
    g_aug: np.ndarray = field(init=False, repr=False)
    h_aug: np.ndarray = field(init=False, repr=False)
    mask_t: np.ndarray = field(init=False, repr=False)
    mask_r: np.ndarray = field(init=False, repr=False)

    def __post_init__(self) -> None:
        G = np.array(self.G, dtype=np.complex128)
        h = np.array(self.h, dtype=np.complex128)
        if G.ndim != 2 or h.ndim != 2:
            raise ConfigurationError("G must be (N, M) and h must be (K, N)")
        if h.shape[1] != G.shape[0]:
            raise ConfigurationError(
                f"h has {h.shape[1]} columns but G has {G.shape[0]} rows"
            )
        n = G.shape[0]
        object.__setattr__(self, "G", _locked(G))
        object.__setattr__(self, "h", _locked(h))
        object.__setattr__(self, "g_aug", _locked(np.vstack([G, G])))
        object.__setattr__(self, "h_aug", _locked(np.concatenate([h, h], axis=1)))
        object.__setattr__(
            self, "mask_t", _locked(np.concatenate([np.ones(n), np.zeros(n)]))
        )
        object.__setattr__(
            self, "mask_r", _locked(np.concatenate([np.zeros(n), np.ones(n)]))
        )

    @property
    def N(self) -> int:
        return self.G.shape[0]

    @property
    def M(self) -> int:
        return self.G.shape[1]

    @property
    def K(self) -> int:
        return self.h.shape[0]


@dataclass(frozen=True)
class BeamformingState:
    """The optimization variables: precoder columns serve the users,
    (beta_t, beta_r) are per-element amplitudes and (theta_t, theta_r)
    per-element phase shifts in radians."""

    W: np.ndarray        # (M, K) complex
    beta_t: np.ndarray   # (N,)
    beta_r: np.ndarray   # (N,)
    theta_t: np.ndarray  # (N,) in [0, 2*pi)
    theta_r: np.ndarray  # (N,)

    def __post_init__(self) -> None:
        object.__setattr__(self, "W", np.asarray(self.W, dtype=np.complex128))
        for name in ("beta_t", "beta_r", "theta_t", "theta_r"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float))
        n = self.beta_t.shape[0]
        if not (self.beta_r.shape == self.theta_t.shape == self.theta_r.shape == (n,)):
            raise ConfigurationError("amplitude/phase vectors must share length N")
        if self.W.ndim != 2:
            raise ConfigurationError("W must be a 2-D (M, K) matrix")

    @property
    def beta(self) -> np.ndarray:
        """Concatenated (beta_t, beta_r), length 2N."""
        return np.concatenate([self.beta_t, self.beta_r])

    @property
    def theta(self) -> np.ndarray:
        """Concatenated (theta_t, theta_r), length 2N."""
        return np.concatenate([self.theta_t, self.theta_r])

    @property
    def transmit_power(self) -> float:
        return float(np.vdot(self.W, self.W).real)


@dataclass(frozen=True)
class CoupledAuxiliary:
    """Auxiliary phase profile whose per-element difference is locked to an
    odd multiple of pi/2 (cos(theta_t - theta_r) = 0)."""

    theta_t_aux: np.ndarray
    theta_r_aux: np.ndarray


def check_dimensions(
    cfg: SystemConfig, ch: ChannelSet, state: BeamformingState | None = None
) -> None:
    """Raise ConfigurationError when cfg / ch / state dimensions disagree."""
    if (ch.N, ch.M, ch.K) != (cfg.N, cfg.M, cfg.K):
        raise ConfigurationError(
            f"channel dims (N={ch.N}, M={ch.M}, K={ch.K}) do not match "
            f"config (N={cfg.N}, M={cfg.M}, K={cfg.K})"
        )
    if state is not None:
        if state.W.shape != (cfg.M, cfg.K):
            raise ConfigurationError(
                f"W has shape {state.W.shape}, expected ({cfg.M}, {cfg.K})"
            )
        if state.beta_t.shape != (cfg.N,):
            raise ConfigurationError(
                f"amplitude/phase vectors have length {state.beta_t.shape[0]}, "
                f"expected {cfg.N}"
            )


def star_coefficient_vectors(state: BeamformingState) -> tuple[np.ndarray, np.ndarray]:
    """Per-element complex surface coefficients (c_t, c_r), each length N,
    with |c| = beta and arg(c) = theta."""
    c_t = state.beta_t * np.exp(1j * state.theta_t)
    c_r = state.beta_r * np.exp(1j * state.theta_r)
    return c_t, c_r


def user_selection_masks(cfg: SystemConfig, ch: ChannelSet) -> np.ndarray:
    """(K, 2N) matrix whose row k is the 0/1 mask of user k's side."""
    return np.stack(
        [ch.mask_t if s == TRANSMISSION else ch.mask_r for s in cfg.user_sides]
    )


def effective_rows(
    cfg: SystemConfig, ch: ChannelSet, state: BeamformingState
) -> np.ndarray:
    """(K, M) matrix of effective downlink rows; row k maps the precoder
    column w_j to the received amplitude of user k via the stacked form."""
    coeff = state.beta * np.exp(1j * state.theta)
    masked = np.conj(ch.h_aug) * user_selection_masks(cfg, ch)
    return (masked * coeff) @ ch.g_aug


def sinr(cfg: SystemConfig, ch: ChannelSet, state: BeamformingState, k: int) -> float:
    """SINR of user k from the direct per-side expression."""
    check_dimensions(cfg, ch, state)
    if not 0 <= k < cfg.K:
        raise IndexError(f"user index {k} out of range for K={cfg.K}")
    c_t, c_r = star_coefficient_vectors(state)
    c = c_t if cfg.user_sides[k] == TRANSMISSION else c_r
    row = (np.conj(ch.h[k]) * c) @ ch.G
    received = np.abs(row @ state.W) ** 2
    signal = received[k]
    interference = received.sum() - signal
    return float(signal / (interference + cfg.noise_power))


def sinr_augmented(
    cfg: SystemConfig, ch: ChannelSet, state: BeamformingState, k: int
) -> float:
    """SINR of user k from the stacked 2N-dimensional form; agrees with
    :func:`sinr` to floating-point accuracy."""
    check_dimensions(cfg, ch, state)
    if not 0 <= k < cfg.K:
        raise IndexError(f"user index {k} out of range for K={cfg.K}")
    mask = ch.mask_t if cfg.user_sides[k] == TRANSMISSION else ch.mask_r
    coeff = state.beta * np.exp(1j * state.theta)
    row = (np.conj(ch.h_aug[k]) * mask * coeff) @ ch.g_aug
    received = np.abs(row @ state.W) ** 2
    signal = received[k]
    interference = received.sum() - signal
    return float(signal / (interference + cfg.noise_power))


def all_sinrs(cfg: SystemConfig, ch: ChannelSet, state: BeamformingState) -> np.ndarray:
    """All K SINRs at once (stacked form)."""
    check_dimensions(cfg, ch, state)
    received = np.abs(effective_rows(cfg, ch, state) @ state.W) ** 2
    signal = np.diagonal(received)
    interference = received.sum(axis=1) - signal
    return signal / (interference + cfg.noise_power)


def wsr(cfg: SystemConfig, gammas: np.ndarray) -> float:
    """Weighted sum-rate sum_k weights[k] * log2(1 + gammas[k])."""
    g = np.asarray(gammas, dtype=float)
    if g.shape != (cfg.K,):
        raise ConfigurationError(f"gammas must have shape ({cfg.K},)")
    if (g < 0).any():
        raise ValueError("SINR values must be non-negative")
    return float(np.sum(cfg.weights * np.log2(1.0 + g)))


def evaluate_wsr(cfg: SystemConfig, ch: ChannelSet, state: BeamformingState) -> float:
    """Weighted sum-rate of a beamforming state."""
    return wsr(cfg, all_sinrs(cfg, ch, state))
