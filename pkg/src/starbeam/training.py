"""The nested meta-optimization loop.

Three levels: inner iterations refine one variable group at a time
(precoder, then amplitudes, then phases) through its sub-network; outer
iterations restart every variable group from the run's initial matrices
and accumulate per-network losses at the refined point; epoch iterations
average those losses and apply Adam to the network parameters (the
precoder network every epoch, the amplitude and phase networks on their
own intervals). What improves across epochs is the networks, not a
persistent iterate.

Loss plumbing: each network's parameters receive the gradient of its own
loss through its own update chain only; the other variable groups and the
gradient fed to the network input are treated as constants. In coupled
mode the phase-network loss adds rho * ||theta - theta_proj||^2, where
theta_proj is the exact per-element projection onto the coupled set, and
the reported solution hardens the best state by projecting its phases and
re-evaluating the rate there.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .constraints import (
    RegulatorConfig,
    coupling_residual,
    normalize_amplitudes,
    normalize_power,
    project_coupled_phases,
    sigmoid,
    wrap_phase,
)
from .errors import ConfigurationError, DegenerateInputError
from .gradients import (
    grad_wsr_amplitudes,
    grad_wsr_phases,
    grad_wsr_precoder,
)
from .model import (
    TWO_PI,
    BeamformingState,
    ChannelSet,
    SystemConfig,
    check_dimensions,
    evaluate_wsr,
)
from .networks import (
    AdamState,
    Mlp,
    Params,
    adam_init,
    adam_step,
    init_mlp,
    load_parameters,
    mlp_backward,
    pn_forward_with_cache,
    save_parameters,
)

MODE_INDEPENDENT = "independent"
MODE_COUPLED = "coupled"

PN_HIDDEN = 200
AN_HIDDEN = 300
TN_HIDDEN = 300


@dataclass(frozen=True)
class PenaltySchedule:
    """Monotone penalty-weight curriculum; geometric interpolation from
    rho_min at epoch 0 to rho_max at the final epoch."""

    rho_min: float = 1e-2
    rho_max: float = 1e2
    shape: str = "geometric"

    def __post_init__(self) -> None:
        if not 0 < self.rho_min <= self.rho_max:
            raise ConfigurationError("require 0 < rho_min <= rho_max")
        if self.shape != "geometric":
            raise ConfigurationError(f"unknown penalty shape '{self.shape}'")


@dataclass(frozen=True)
class TrainConfig:
    """Iteration counts, learning rates, and schedule of one run."""

    n_epochs: int = 500
    n_outer: int = 1
    n_inner: int = 1
    lr_w: float = 1e-3        # precoder-network Adam rate
    lr_a: float = 5e-3        # amplitude-network Adam rate
    lr_theta: float = 5e-3    # phase-network Adam rate
    n1: int = 5               # amplitude network updates every n1 epochs
    n2: int = 5               # phase network updates every n2 epochs
    mode: str = MODE_INDEPENDENT
    penalty: PenaltySchedule = PenaltySchedule()
    regulator_gain: float = TWO_PI
    seed: int = 0

    def __post_init__(self) -> None:
        if min(self.n_epochs, self.n_outer, self.n_inner, self.n1, self.n2) < 1:
            raise ConfigurationError("iteration counts must all be >= 1")
        if min(self.lr_w, self.lr_a, self.lr_theta) <= 0:
            raise ConfigurationError("learning rates must be positive")
        if self.mode not in (MODE_INDEPENDENT, MODE_COUPLED):
            raise ConfigurationError(f"unknown mode '{self.mode}'")
        if not self.regulator_gain > 0:
            raise ConfigurationError("regulator gain must be positive")


@dataclass(frozen=True)
class SubNetworks:
    """The three sub-networks of one run."""

    pn: Mlp
    an: Mlp
    tn: Mlp


@dataclass
class Solution:
    """Result of one run: the best variables found (hardened onto the
    coupled set when applicable), the rate achieved there, and per-epoch
    traces."""

    W_opt: np.ndarray
    beta_opt: np.ndarray        # (2N,) concatenated (beta_t, beta_r)
    theta_opt: np.ndarray       # (2N,)
    wsr_opt: float
    wsr_pre_projection: float   # best rate before phase hardening
    residual_pre_projection: float  # max |cos(dtheta)| of the best state
    feasible_coupled: bool
    mode: str
    traces: dict[str, np.ndarray] = field(default_factory=dict)
    seconds: float = 0.0        # wall clock, excluded from determinism claims


def init_networks(cfg: SystemConfig, rng: np.random.Generator) -> SubNetworks:
    """Fresh sub-networks sized for the scenario: precoder net maps
    M -> 200 -> M, amplitude and phase nets map 2N -> 300 -> 2N."""
    return SubNetworks(
        pn=init_mlp(cfg.M, PN_HIDDEN, cfg.M, rng),
        an=init_mlp(2 * cfg.N, AN_HIDDEN, 2 * cfg.N, rng),
        tn=init_mlp(2 * cfg.N, TN_HIDDEN, 2 * cfg.N, rng),
    )


def rho_at(schedule: PenaltySchedule, epoch: int, n_epochs: int) -> float:
    """Penalty weight at an epoch: rho_min * (rho_max/rho_min)^(epoch/n)."""
    if not 0 <= epoch <= n_epochs:
        raise ValueError("epoch must lie in [0, n_epochs]")
    ratio = schedule.rho_max / schedule.rho_min
    return float(schedule.rho_min * ratio ** (epoch / n_epochs))


def loss_independent(cfg: SystemConfig, ch: ChannelSet, state: BeamformingState) -> float:
    """Negative weighted sum-rate (all three networks in independent mode,
    and the precoder/amplitude networks in coupled mode)."""
    return -evaluate_wsr(cfg, ch, state)


def loss_coupled_tn(
    cfg: SystemConfig, ch: ChannelSet, state: BeamformingState, rho: float
) -> float:
    """Phase-network loss in coupled mode: negative rate plus the weighted
    squared distance to the exact phase projection, recomputed here."""
    if rho < 0:
        raise ValueError("rho must be >= 0")
    aux = project_coupled_phases(state.theta_t, state.theta_r)
    dev = np.concatenate(
        [state.theta_t - aux.theta_t_aux, state.theta_r - aux.theta_r_aux]
    )
    return -evaluate_wsr(cfg, ch, state) + rho * float(dev @ dev)


def _make_state(W: np.ndarray, beta: np.ndarray, theta: np.ndarray) -> BeamformingState:
    n = beta.size // 2
    return BeamformingState(W, beta[:n], beta[n:], theta[:n], theta[n:])


# --- forward blocks (with tapes) and their backward passes ----------------


def _precoder_block(
    pn: Mlp,
    W0: np.ndarray,
    beta: np.ndarray,
    theta: np.ndarray,
    cfg: SystemConfig,
    ch: ChannelSet,
    n_inner: int,
):
    W = W0
    tape = []
    for _ in range(n_inner):
        grad = grad_wsr_precoder(cfg, ch, _make_state(W, beta, theta))
        delta, cache = pn_forward_with_cache(pn, grad)
        w_raw = W + delta
        sq = np.vdot(w_raw, w_raw).real
        if not sq > 0:
            raise DegenerateInputError("precoder collapsed to zero mid-update")
        scale = np.sqrt(cfg.p_max / sq)
        tape.append((cache, w_raw, scale, sq))
        W = scale * w_raw
    return W, tape


def _precoder_block_backward(pn: Mlp, tape, grad_w_out: np.ndarray) -> Params:
    """Pull a conjugate-convention loss gradient on the final precoder back
    through the normalize/add/network chain, accumulating parameter
    gradients (network inputs are constants)."""
    acc: Params | None = None
    g = grad_w_out
    for cache, w_raw, scale, sq in reversed(tape):
        # d loss = 2 Re<g, dW_out>, W_out = scale(w_raw) * w_raw
        q = np.vdot(g, w_raw).real
        g_raw = scale * g - (scale * q / sq) * w_raw
        grad_batch = np.vstack([2.0 * g_raw.real.T, 2.0 * g_raw.imag.T])
        acc = _accumulate(acc, mlp_backward(pn, cache, grad_batch))
        g = g_raw
    return acc if acc is not None else {}


def _amplitude_block(
    an: Mlp,
    beta0: np.ndarray,
    W: np.ndarray,
    theta: np.ndarray,
    cfg: SystemConfig,
    ch: ChannelSet,
    n_inner: int,
):
    beta = beta0
    n = beta0.size // 2
    tape = []
    for _ in range(n_inner):
        grad = grad_wsr_amplitudes(cfg, ch, _make_state(W, beta, theta))
        delta, cache = an.forward_with_cache(grad)
        raw = beta + delta
        bt, br = normalize_amplitudes(raw[:n], raw[n:])
        tape.append((cache, raw))
        beta = np.concatenate([bt, br])
    return beta, tape


def _amp_norm_backward(g_out: np.ndarray, raw: np.ndarray) -> np.ndarray:
    """Transpose-Jacobian of the pairwise unit-circle normalization."""
    n = raw.size // 2
    bt, br = raw[:n], raw[n:]
    g_bt, g_br = g_out[:n], g_out[n:]
    sq = bt**2 + br**2
    common = (br * g_bt - bt * g_br) / (sq * np.sqrt(sq))
    return np.concatenate([br * common, -bt * common])


def _amplitude_block_backward(an: Mlp, tape, grad_beta_out: np.ndarray) -> Params:
    acc: Params | None = None
    g = grad_beta_out
    for cache, raw in reversed(tape):
        g_raw = _amp_norm_backward(g, raw)
        acc = _accumulate(acc, mlp_backward(an, cache, g_raw))
        g = g_raw
    return acc if acc is not None else {}


def _phase_block(
    tn: Mlp,
    theta0: np.ndarray,
    W: np.ndarray,
    beta: np.ndarray,
    cfg: SystemConfig,
    ch: ChannelSet,
    n_inner: int,
    gain: float,
):
    theta = theta0
    tape = []
    for _ in range(n_inner):
        grad = grad_wsr_phases(cfg, ch, _make_state(W, beta, theta))
        raw, cache = tn.forward_with_cache(grad)
        sig = sigmoid(raw)
        tape.append((cache, sig))
        theta = wrap_phase(theta + gain * sig)
    return theta, tape


def _phase_block_backward(tn: Mlp, tape, grad_theta_out: np.ndarray,
                          gain: float) -> Params:
    acc: Params | None = None
    g = grad_theta_out
    for cache, sig in reversed(tape):
        # wrap is an a.e. identity; the regulator contributes gain*sig*(1-sig)
        acc = _accumulate(acc, mlp_backward(tn, cache, g * gain * sig * (1.0 - sig)))
        # d(theta_next)/d(theta_prev) = 1, so g passes through unchanged
    return acc if acc is not None else {}


def _accumulate(dst: Params | None, src: Params) -> Params:
    if dst is None:
        return {k: v.copy() for k, v in src.items()}
    for k, v in src.items():
        dst[k] += v
    return dst


def _scale_params(params: Params, factor: float) -> Params:
    return {k: v * factor for k, v in params.items()}


# --- public inner-update operations ---------------------------------------


def inner_update_precoder(
    nets: SubNetworks,
    state: BeamformingState,
    ch: ChannelSet,
    cfg: SystemConfig,
    n_inner: int = 1,
) -> BeamformingState:
    """Refine the precoder n_inner times (network update, add, power
    renormalization), holding amplitudes and phases fixed."""
    check_dimensions(cfg, ch, state)
    W, _ = _precoder_block(nets.pn, state.W, state.beta, state.theta, cfg, ch, n_inner)
    return _make_state(W, state.beta, state.theta)


def inner_update_amplitudes(
    nets: SubNetworks,
    state: BeamformingState,
    ch: ChannelSet,
    cfg: SystemConfig,
    n_inner: int = 1,
) -> BeamformingState:
    """Refine the amplitude profile n_inner times (network update, add,
    unit-circle renormalization), holding the precoder and phases fixed."""
    check_dimensions(cfg, ch, state)
    beta, _ = _amplitude_block(
        nets.an, state.beta, state.W, state.theta, cfg, ch, n_inner
    )
    return _make_state(state.W, beta, state.theta)


def inner_update_phases(
    nets: SubNetworks,
    state: BeamformingState,
    ch: ChannelSet,
    cfg: SystemConfig,
    n_inner: int = 1,
    reg: RegulatorConfig = RegulatorConfig(),
) -> BeamformingState:
    """Refine the phase profile n_inner times (network update, sigmoid
    regulator, wrapped addition), holding the other groups fixed."""
    check_dimensions(cfg, ch, state)
    theta, _ = _phase_block(
        nets.tn, state.theta, state.W, state.beta, cfg, ch, n_inner, reg.lam
    )
    return _make_state(state.W, state.beta, theta)


# --- the full run ----------------------------------------------------------


def initial_state(
    cfg: SystemConfig,
    rng: np.random.Generator,
    beta_init: np.ndarray | None = None,
    theta_init: np.ndarray | None = None,
) -> BeamformingState:
    """Feasible starting point: power-normalized complex-Gaussian precoder,
    balanced amplitudes (or the given profile), uniform phases (or the
    given profile). The generator is consumed identically whether or not
    overrides are supplied."""
    W0 = (
        rng.standard_normal((cfg.M, cfg.K)) + 1j * rng.standard_normal((cfg.M, cfg.K))
    ) / np.sqrt(2.0)
    W0 = normalize_power(W0, cfg.p_max)
    theta0 = rng.uniform(0.0, TWO_PI, size=2 * cfg.N)
    beta0 = np.full(2 * cfg.N, 1.0 / np.sqrt(2.0))
    if beta_init is not None:
        beta0 = np.asarray(beta_init, dtype=float).copy()
        if beta0.shape != (2 * cfg.N,):
            raise ConfigurationError("beta_init must have length 2N")
    if theta_init is not None:
        theta0 = np.asarray(theta_init, dtype=float).copy()
        if theta0.shape != (2 * cfg.N,):
            raise ConfigurationError("theta_init must have length 2N")
    n = cfg.N
    bt, br = normalize_amplitudes(beta0[:n], beta0[n:])
    return _make_state(W0, np.concatenate([bt, br]), wrap_phase(theta0))


def run_gml(sys_cfg: SystemConfig, ch: ChannelSet, train: TrainConfig) -> Solution:
    """Full meta-optimization run with all three sub-networks active."""
    return run_meta_loop(sys_cfg, ch, train)


def run_meta_loop(
    sys_cfg: SystemConfig,
    ch: ChannelSet,
    train: TrainConfig,
    enable_an: bool = True,
    enable_tn: bool = True,
    beta_init: np.ndarray | None = None,
    theta_init: np.ndarray | None = None,
) -> Solution:
    """Run the loop with optional frozen variable groups (used by the
    comparison schemes). A disabled network leaves its variable group at
    the initial profile for the entire run."""
    check_dimensions(sys_cfg, ch)
    started = time.perf_counter()
    coupled = train.mode == MODE_COUPLED
    n = sys_cfg.N

    rng = np.random.default_rng(train.seed)
    nets = init_networks(sys_cfg, rng)
    pn_params = nets.pn.params()
    an_params = nets.an.params()
    tn_params = nets.tn.params()
    adam_pn = adam_init(pn_params)
    adam_an = adam_init(an_params)
    adam_tn = adam_init(tn_params)

    start = initial_state(sys_cfg, rng, beta_init, theta_init)
    W0, beta0, theta0 = start.W, start.beta, start.theta

    # Most recent refined values, carried across outer iterations/epochs.
    W_star, beta_star, theta_star = W0, beta0, theta0

    # Raw best-so-far, tracked on the unconstrained rate. In coupled mode
    # the reported solution is instead selected on the post-projection rate:
    # the raw argmax tends to sit mid-curriculum where phases are only
    # half-locked, and projecting it both costs rate and returns a state
    # whose phase differences have not concentrated yet.
    r_max = 0.0
    best = (W0, beta0, theta0)
    proj_max = 0.0
    best_proj: tuple | None = None

    n_epochs = train.n_epochs
    traces = {
        "wsr_current": np.zeros(n_epochs),
        "wsr_best": np.zeros(n_epochs),
        "wsr_best_post_projection": np.zeros(n_epochs),
        "penalty": np.zeros(n_epochs),
        "rho": np.zeros(n_epochs),
        "power_rel_err": np.zeros(n_epochs),
        "amp_max_err": np.zeros(n_epochs),
        "residual_max": np.zeros(n_epochs),
        "phase_diff": np.zeros((n_epochs, n)),
    }

    for epoch in range(1, n_epochs + 1):
        rho = rho_at(train.penalty, epoch, n_epochs) if coupled else 0.0
        update_an = enable_an and epoch % train.n1 == 0
        update_tn = enable_tn and epoch % train.n2 == 0
        acc_pn: Params | None = None
        acc_an: Params | None = None
        acc_tn: Params | None = None

        for outer in range(1, train.n_outer + 1):
            try:
                pn = nets.pn.with_params(pn_params)
                W_star, tape_w = _precoder_block(
                    pn, W0, beta_star, theta_star, sys_cfg, ch, train.n_inner
                )
                if enable_an:
                    an = nets.an.with_params(an_params)
                    beta_star, tape_a = _amplitude_block(
                        an, beta0, W_star, theta_star, sys_cfg, ch, train.n_inner
                    )
                if enable_tn:
                    tn = nets.tn.with_params(tn_params)
                    theta_star, tape_t = _phase_block(
                        tn, theta0, W_star, beta_star, sys_cfg, ch,
                        train.n_inner, train.regulator_gain,
                    )

                final = _make_state(W_star, beta_star, theta_star)
                r_cur = evaluate_wsr(sys_cfg, ch, final)

                r_proj = r_cur
                theta_hard = theta_star
                dev_sq = 0.0
                if coupled:
                    aux = project_coupled_phases(final.theta_t, final.theta_r)
                    proj = np.concatenate([aux.theta_t_aux, aux.theta_r_aux])
                    dev = theta_star - proj
                    dev_sq = float(dev @ dev)
                    theta_hard = wrap_phase(proj)
                    r_proj = evaluate_wsr(
                        sys_cfg, ch, _make_state(W_star, beta_star, theta_hard)
                    )

                # Per-network losses all sit at the refined point; each
                # parameter set sees only its own update chain.
                g_w = -grad_wsr_precoder(sys_cfg, ch, final)
                acc_pn = _accumulate(
                    acc_pn, _precoder_block_backward(pn, tape_w, g_w)
                )
                if update_an:
                    g_b = -grad_wsr_amplitudes(sys_cfg, ch, final)
                    acc_an = _accumulate(
                        acc_an, _amplitude_block_backward(an, tape_a, g_b)
                    )
                if update_tn:
                    g_t = -grad_wsr_phases(sys_cfg, ch, final)
                    if coupled:
                        g_t = g_t + 2.0 * rho * (theta_star - proj)
                    acc_tn = _accumulate(
                        acc_tn,
                        _phase_block_backward(
                            tn, tape_t, g_t, train.regulator_gain
                        ),
                    )
            except (DegenerateInputError, ConfigurationError) as err:
                raise type(err)(
                    f"epoch {epoch}, outer iteration {outer}: {err}"
                ) from err

            if r_cur > r_max:
                r_max = r_cur
                best = (W_star, beta_star, theta_star)
            if coupled and (best_proj is None or r_proj > proj_max):
                proj_max = r_proj
                best_proj = (W_star, beta_star, theta_star, theta_hard)

        inv = 1.0 / train.n_outer
        pn_params, adam_pn = adam_step(
            pn_params, _scale_params(acc_pn, inv), adam_pn, train.lr_w
        )
        if update_an:
            an_params, adam_an = adam_step(
                an_params, _scale_params(acc_an, inv), adam_an, train.lr_a
            )
        if update_tn:
            tn_params, adam_tn = adam_step(
                tn_params, _scale_params(acc_tn, inv), adam_tn, train.lr_theta
            )

        idx = epoch - 1
        final = _make_state(W_star, beta_star, theta_star)
        traces["wsr_current"][idx] = r_cur
        traces["wsr_best"][idx] = r_max
        traces["wsr_best_post_projection"][idx] = proj_max if coupled else r_max
        traces["rho"][idx] = rho
        traces["penalty"][idx] = rho * dev_sq
        traces["power_rel_err"][idx] = (
            abs(final.transmit_power - sys_cfg.p_max) / sys_cfg.p_max
        )
        traces["amp_max_err"][idx] = float(
            np.max(np.abs(final.beta_t**2 + final.beta_r**2 - 1.0))
        )
        traces["residual_max"][idx] = float(
            np.max(coupling_residual(final.theta_t, final.theta_r))
        )
        traces["phase_diff"][idx] = wrap_phase(final.theta_t - final.theta_r)

    if coupled:
        W_best, beta_best, theta_pre, theta_opt = best_proj
        wsr_opt = proj_max
    else:
        W_best, beta_best, theta_pre = best
        theta_opt = theta_pre
        wsr_opt = r_max
    pre_state = _make_state(W_best, beta_best, theta_pre)
    residual_pre = float(
        np.max(coupling_residual(pre_state.theta_t, pre_state.theta_r))
    )
    opt_state = _make_state(W_best, beta_best, theta_opt)
    feasible = bool(
        np.max(coupling_residual(opt_state.theta_t, opt_state.theta_r)) < 1e-9
    )
    return Solution(
        W_opt=W_best,
        beta_opt=beta_best,
        theta_opt=theta_opt,
        wsr_opt=wsr_opt,
        wsr_pre_projection=r_max,
        residual_pre_projection=residual_pre,
        feasible_coupled=feasible,
        mode=train.mode,
        traces=traces,
        seconds=time.perf_counter() - started,
    )


def save_networks(path: str, nets: SubNetworks) -> None:
    """Checkpoint all three sub-networks into one named-array archive."""
    flat: Params = {}
    for prefix, net in (("pn", nets.pn), ("an", nets.an), ("tn", nets.tn)):
        for key, value in net.params().items():
            flat[f"{prefix}.{key}"] = value
    save_parameters(path, flat)


def load_networks(path: str) -> SubNetworks:
    """Inverse of :func:`save_networks`."""
    flat = load_parameters(path)

    def rebuild(prefix: str) -> Mlp:
        return Mlp(*(flat[f"{prefix}.{key}"] for key in ("w1", "b1", "w2", "b2")))

    return SubNetworks(rebuild("pn"), rebuild("an"), rebuild("tn"))
