"""The three gradient-fed sub-networks and a self-contained Adam optimizer.

Each sub-network is a two-layer perceptron (affine, rectifier, affine).
The precoder network consumes the complex (M, K) gradient as a batch of
2K real M-vectors through shared weights; the amplitude and phase networks
consume their 2N-dimensional gradient vectors directly.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError

Params = dict[str, np.ndarray]


@dataclass(frozen=True)
class Mlp:
    """Two affine maps with a rectified-linear activation between them."""

    w1: np.ndarray  # (hidden, in)
    b1: np.ndarray  # (hidden,)
    w2: np.ndarray  # (out, hidden)
    b2: np.ndarray  # (out,)

    @property
    def input_dim(self) -> int:
        return self.w1.shape[1]

    @property
    def hidden_dim(self) -> int:
        return self.w1.shape[0]

    @property
    def output_dim(self) -> int:
        return self.w2.shape[0]

    def forward(self, x: np.ndarray) -> np.ndarray:
        """Forward pass; x is one input vector or a (batch, in) matrix."""
        y, _ = self.forward_with_cache(x)
        return y

    def forward_with_cache(self, x: np.ndarray) -> tuple[np.ndarray, tuple]:
        """Forward pass that also returns the intermediates needed by
        :func:`mlp_backward`."""
        x = np.asarray(x, dtype=float)
        single = x.ndim == 1
        x2 = x[None, :] if single else x
        pre = x2 @ self.w1.T + self.b1
        hidden = np.maximum(pre, 0.0)
        y = hidden @ self.w2.T + self.b2
        return (y[0] if single else y), (x2, pre, hidden, single)

    def params(self) -> Params:
        return {"w1": self.w1, "b1": self.b1, "w2": self.w2, "b2": self.b2}

    def with_params(self, params: Params) -> "Mlp":
        return Mlp(params["w1"], params["b1"], params["w2"], params["b2"])


def init_mlp(input_dim: int, hidden_dim: int, output_dim: int,
             rng: np.random.Generator) -> Mlp:
    """Uniform +-1/sqrt(fan_in) weights, zero biases."""
    s1 = 1.0 / np.sqrt(input_dim)
    s2 = 1.0 / np.sqrt(hidden_dim)
    return Mlp(
        w1=rng.uniform(-s1, s1, size=(hidden_dim, input_dim)),
        b1=np.zeros(hidden_dim),
        w2=rng.uniform(-s2, s2, size=(output_dim, hidden_dim)),
        b2=np.zeros(output_dim),
    )


def mlp_backward(net: Mlp, cache: tuple, grad_out: np.ndarray) -> Params:
    """Parameter gradients for a forward pass recorded by
    ``forward_with_cache``; grad_out matches the output shape."""
    x2, pre, hidden, single = cache
    g = np.asarray(grad_out, dtype=float)
    g2 = g[None, :] if single else g
    grad_hidden = (g2 @ net.w2) * (pre > 0.0)
    return {
        "w1": grad_hidden.T @ x2,
        "b1": grad_hidden.sum(axis=0),
        "w2": g2.T @ hidden,
        "b2": g2.sum(axis=0),
    }


def pn_forward(net: Mlp, grad_w: np.ndarray) -> np.ndarray:
    """Precoder update from the complex (M, K) gradient.

    The gradient is split into 2K real M-vectors (the K real parts, then
    the K imaginary parts), pushed through the shared network, and the
    outputs recombined column-wise into a complex (M, K) update.
    """
    delta, _ = pn_forward_with_cache(net, grad_w)
    return delta


def pn_forward_with_cache(net: Mlp, grad_w: np.ndarray) -> tuple[np.ndarray, tuple]:
    grad_w = np.asarray(grad_w, dtype=np.complex128)
    if grad_w.ndim != 2 or grad_w.shape[0] != net.input_dim:
        raise ConfigurationError(
            f"precoder gradient shape {grad_w.shape} does not match network "
            f"input dimension {net.input_dim}"
        )
    if net.output_dim != net.input_dim:
        raise ConfigurationError("precoder network must map M -> M")
    k = grad_w.shape[1]
    batch = np.vstack([grad_w.real.T, grad_w.imag.T])  # (2K, M)
    out, cache = net.forward_with_cache(batch)
    return (out[:k] + 1j * out[k:]).T, cache


def an_forward(net: Mlp, grad_beta: np.ndarray) -> np.ndarray:
    """Amplitude update from the 2N-dimensional amplitude gradient."""
    return _vector_forward(net, grad_beta, "amplitude")


def tn_forward(net: Mlp, grad_theta: np.ndarray) -> np.ndarray:
    """Raw phase update from the 2N-dimensional phase gradient (regulate it
    before applying)."""
    return _vector_forward(net, grad_theta, "phase")


def _vector_forward(net: Mlp, vec: np.ndarray, label: str) -> np.ndarray:
    vec = np.asarray(vec, dtype=float)
    if vec.shape != (net.input_dim,):
        raise ConfigurationError(
            f"{label} gradient length {vec.shape} does not match network "
            f"input dimension {net.input_dim}"
        )
    return net.forward(vec)


@dataclass(frozen=True)
class AdamState:
    """Moment estimates for one parameter set."""

    first_moment: Params
    second_moment: Params
    step_count: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8


def adam_init(params: Params, beta1: float = 0.9, beta2: float = 0.999,
              epsilon: float = 1e-8) -> AdamState:
    """Zero-initialized moments matching the parameter shapes."""
    return AdamState(
        first_moment={k: np.zeros_like(v) for k, v in params.items()},
        second_moment={k: np.zeros_like(v) for k, v in params.items()},
        step_count=0,
        beta1=beta1,
        beta2=beta2,
        epsilon=epsilon,
    )


def adam_step(params: Params, grads: Params, state: AdamState,
              lr: float) -> tuple[Params, AdamState]:
    """One bias-corrected Adam update moving params against the loss
    gradient. Non-finite gradients are rejected before any state changes."""
    if not lr > 0:
        raise ValueError("learning rate must be positive")
    if set(grads) != set(params):
        raise ConfigurationError("gradient keys do not match parameter keys")
    for key, g in grads.items():
        if not np.isfinite(g).all():
            raise ValueError(f"non-finite gradient for '{key}'; update rejected")
    t = state.step_count + 1
    c1 = 1.0 - state.beta1**t
    c2 = 1.0 - state.beta2**t
    new_params: Params = {}
    m_new: Params = {}
    v_new: Params = {}
    for key, p in params.items():
        g = grads[key]
        m = state.beta1 * state.first_moment[key] + (1.0 - state.beta1) * g
        v = state.beta2 * state.second_moment[key] + (1.0 - state.beta2) * g**2
        m_new[key] = m
        v_new[key] = v
        new_params[key] = p - lr * (m / c1) / (np.sqrt(v / c2) + state.epsilon)
    new_state = AdamState(m_new, v_new, t, state.beta1, state.beta2, state.epsilon)
    return new_params, new_state


def save_parameters(path: str, params: Params) -> None:
    """Checkpoint named real arrays as an .npz archive (zip of NPY members,
    dtype '<f8', shapes recorded per entry)."""
    np.savez(path, **{k: np.asarray(v, dtype="<f8") for k, v in params.items()})


def load_parameters(path: str) -> Params:
    """Inverse of :func:`save_parameters`."""
    with np.load(path) as data:
        return {k: data[k].copy() for k in data.files}
