"""Experiment driver: convergence traces, parameter sweeps, timing probes,
phase-difference trajectories, and the gradient cross-check, all emitted as
CSV files with fixed headers.

Determinism: a master seed and the cell coordinates (scheme, grid index,
sample index) fully determine every non-timing value. Channels are keyed
by (grid index, sample index) only, so schemes are compared on identical
channel draws.
"""
from __future__ import annotations

import csv
import math
import os
import time
from dataclasses import dataclass, field, replace

import numpy as np

from .baselines import conventional_ris_baseline, pga_oracle, random_phase_baseline
from .channels import ChannelConfig, desk_scenario, default_scenario, generate_channels
from .constraints import normalize_amplitudes, normalize_power
from .errors import ConfigurationError
from .gradients import GradientBundle, finite_diff_gradient, wsr_gradients
from .model import BeamformingState, ChannelSet, SystemConfig, evaluate_wsr
from .training import (
    MODE_COUPLED,
    MODE_INDEPENDENT,
    PenaltySchedule,
    Solution,
    TrainConfig,
    run_gml,
)

SCHEME_GML_INDEPENDENT = "gml_independent"
SCHEME_GML_COUPLED = "gml_coupled"
SCHEME_RANDOM_PHASE = "random_phase"
SCHEME_CONVENTIONAL_RIS = "conventional_ris"
SCHEME_PGA_ORACLE = "pga_oracle"
SCHEMES = (
    SCHEME_GML_INDEPENDENT,
    SCHEME_GML_COUPLED,
    SCHEME_RANDOM_PHASE,
    SCHEME_CONVENTIONAL_RIS,
    SCHEME_PGA_ORACLE,
)

KIND_CONVERGENCE = "convergence"
KIND_SWEEP_N = "sweep_n"
KIND_SWEEP_PMAX = "sweep_pmax"
KIND_SWEEP_MN = "sweep_mn"
KIND_TIMING = "timing"
KIND_PHASE_TRACE = "phase_trace"
KIND_GRAD_CHECK = "grad_check"
KINDS = (
    KIND_CONVERGENCE,
    KIND_SWEEP_N,
    KIND_SWEEP_PMAX,
    KIND_SWEEP_MN,
    KIND_TIMING,
    KIND_PHASE_TRACE,
    KIND_GRAD_CHECK,
)

CONVERGENCE_HEADER = ["epoch", "wsr_best", "wsr_current", "penalty", "rho"]
TIMING_HEADER = ["M", "N", "K", "median_s_per_epoch", "min_s_per_epoch"]
SWEEP_HEADER = ["scheme", "grid_value", "sample", "wsr_final", "seconds"]


def desk_train(mode: str = MODE_INDEPENDENT, seed: int = 0,
               n_epochs: int = 300) -> TrainConfig:
    """Desk-scale training profile.

    Differences from the full-scale defaults: 300 epochs, the phase
    network updates every epoch, and the penalty curriculum spans
    0.3 -> 3000. At this scale the full-scale cadence (updates every 5
    epochs) leaves the phase network too few steps to lock all elements
    onto the coupled set, and the full-scale penalty endpoints cross over
    the rate term too late.
    """
    return TrainConfig(
        n_epochs=n_epochs,
        n2=1,
        mode=mode,
        penalty=PenaltySchedule(rho_min=0.3, rho_max=3000.0),
        seed=seed,
    )


def paper_train(mode: str = MODE_INDEPENDENT, seed: int = 0) -> TrainConfig:
    """Full-scale training profile (the published operating point)."""
    return TrainConfig(mode=mode, seed=seed)


@dataclass(frozen=True)
class ExperimentSpec:
    """One experiment: which schemes, over which grid, how many channel
    samples, where to write CSVs.

    Grid semantics by kind: sweep_n -> element counts N; sweep_pmax ->
    transmit power in watts; sweep_mn and timing -> (M, N) pairs;
    convergence / phase_trace / grad_check ignore the grid (one point).
    """

    kind: str
    schemes: tuple[str, ...] = (SCHEME_GML_INDEPENDENT,)
    grid: tuple = (None,)
    sample_count: int = 20
    out_dir: str = "results"
    master_seed: int = 0
    desk_scale: bool = True
    n_epochs: int | None = None  # None -> scale default (300 desk, 500 paper)
    users: int | None = None     # None -> scale default (2 desk, 4 paper)

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise ConfigurationError(f"unknown experiment kind '{self.kind}'")
        unknown = set(self.schemes) - set(SCHEMES)
        if unknown:
            raise ConfigurationError(f"unknown schemes: {sorted(unknown)}")
        if not self.schemes:
            raise ConfigurationError("scheme list must be non-empty")
        if len(self.grid) == 0:
            raise ConfigurationError("grid must be non-empty")
        if self.sample_count < 1:
            raise ConfigurationError("sample_count must be >= 1")


@dataclass
class CellRecord:
    """Result of one (scheme, grid point, sample) cell."""

    scheme: str
    grid_value: object
    sample: int
    wsr_final: float
    seconds: float
    wsr_best_trace: np.ndarray | None = None
    phase_diff_trace: np.ndarray | None = None
    residual_final: float = float("nan")
    error: str | None = None


@dataclass
class ExperimentReport:
    spec: ExperimentSpec
    records: list[CellRecord] = field(default_factory=list)
    failures: list[str] = field(default_factory=list)
    csv_paths: list[str] = field(default_factory=list)


@dataclass
class TimingResult:
    median_s_per_epoch: float
    min_s_per_epoch: float


@dataclass
class GradCheckReport:
    n_instances: int
    max_rel_err: float
    max_abs_err_small: float
    rel_tol: float = 1e-6
    abs_tol: float = 1e-9
    passed: bool = False


def _derive_seed(master: int, *tags: int) -> int:
    seq = np.random.SeedSequence([master, *tags])
    return int(seq.generate_state(1)[0])


_SCHEME_TAG = {name: i + 1 for i, name in enumerate(SCHEMES)}
_CHANNEL_TAG = 0


def _base_configs(spec: ExperimentSpec) -> tuple[SystemConfig, ChannelConfig, int]:
    if spec.desk_scale:
        sys_cfg, ch_cfg = desk_scenario(K=spec.users if spec.users else 2)
        n_epochs = spec.n_epochs if spec.n_epochs else 300
    else:
        sys_cfg, ch_cfg = default_scenario()
        if spec.users:
            sys_cfg = replace(sys_cfg, K=spec.users, user_sides=None, weights=None)
        n_epochs = spec.n_epochs if spec.n_epochs else 500
    return sys_cfg, ch_cfg, n_epochs


def _apply_grid(sys_cfg: SystemConfig, kind: str, value) -> SystemConfig:
    if value is None:
        return sys_cfg
    if kind == KIND_SWEEP_N:
        return replace(sys_cfg, N=int(value))
    if kind == KIND_SWEEP_PMAX:
        return replace(sys_cfg, p_max=float(value))
    if kind in (KIND_SWEEP_MN, KIND_TIMING):
        m, n = value
        return replace(sys_cfg, M=int(m), N=int(n))
    return sys_cfg


def _grid_label(kind: str, value) -> object:
    if kind in (KIND_SWEEP_MN, KIND_TIMING) and value is not None:
        return f"{value[0]}x{value[1]}"
    return value if value is not None else 0


def _train_for(spec: ExperimentSpec, scheme: str, n_epochs: int, seed: int) -> TrainConfig:
    mode = MODE_COUPLED if scheme == SCHEME_GML_COUPLED else MODE_INDEPENDENT
    if spec.desk_scale:
        return desk_train(mode=mode, seed=seed, n_epochs=n_epochs)
    return replace(paper_train(mode=mode, seed=seed), n_epochs=n_epochs)


def run_scheme(
    scheme: str,
    sys_cfg: SystemConfig,
    ch: ChannelSet,
    train: TrainConfig,
) -> Solution:
    """Dispatch one scheme on one prepared instance."""
    if scheme in (SCHEME_GML_INDEPENDENT, SCHEME_GML_COUPLED):
        return run_gml(sys_cfg, ch, train)
    if scheme == SCHEME_RANDOM_PHASE:
        return random_phase_baseline(sys_cfg, ch, train)
    if scheme == SCHEME_CONVENTIONAL_RIS:
        return conventional_ris_baseline(sys_cfg, ch, train)
    if scheme == SCHEME_PGA_ORACLE:
        return pga_oracle(sys_cfg, ch, steps=train.n_epochs, seed=train.seed)
    raise ConfigurationError(f"unknown scheme '{scheme}'")


def run_experiment(spec: ExperimentSpec) -> ExperimentReport:
    """Execute every (scheme, grid point, sample) cell and write CSVs.

    Per-cell failures are recorded, not fatal; callers should treat a
    non-empty failure list as a nonzero-exit condition.
    """
    if spec.kind == KIND_GRAD_CHECK:
        return _run_grad_check_experiment(spec)
    if spec.kind == KIND_TIMING:
        return _run_timing_experiment(spec)

    os.makedirs(spec.out_dir, exist_ok=True)
    report = ExperimentReport(spec)
    base_sys, ch_cfg, n_epochs = _base_configs(spec)

    for gi, gval in enumerate(spec.grid):
        sys_cfg = _apply_grid(base_sys, spec.kind, gval)
        for sample in range(spec.sample_count):
            ch_rng = np.random.default_rng(
                _derive_seed(spec.master_seed, _CHANNEL_TAG, gi, sample)
            )
            ch = generate_channels(sys_cfg, ch_cfg, ch_rng)
            for scheme in spec.schemes:
                seed = _derive_seed(spec.master_seed, _SCHEME_TAG[scheme], gi, sample)
                train = _train_for(spec, scheme, n_epochs, seed)
                label = _grid_label(spec.kind, gval)
                started = time.perf_counter()
                try:
                    sol = run_scheme(scheme, sys_cfg, ch, train)
                except Exception as err:  # recorded, not fatal
                    msg = f"{scheme}/grid={label}/sample={sample}: {err}"
                    report.failures.append(msg)
                    report.records.append(
                        CellRecord(scheme, label, sample, float("nan"),
                                   time.perf_counter() - started, error=msg)
                    )
                    continue
                rec = CellRecord(
                    scheme=scheme,
                    grid_value=label,
                    sample=sample,
                    wsr_final=sol.wsr_opt,
                    seconds=time.perf_counter() - started,
                    wsr_best_trace=sol.traces.get("wsr_best"),
                    residual_final=float(
                        sol.traces["residual_max"][-1]
                    ) if "residual_max" in sol.traces else float("nan"),
                )
                if spec.kind == KIND_PHASE_TRACE:
                    rec.phase_diff_trace = sol.traces.get("phase_diff")
                report.records.append(rec)
                if spec.kind == KIND_CONVERGENCE:
                    _write_convergence_csv(report, spec, scheme, sample, sol)
                if spec.kind == KIND_PHASE_TRACE and rec.phase_diff_trace is not None:
                    _write_phase_trace_csv(report, spec, scheme, sample, rec)

    _write_sweep_csv(report, spec)
    if spec.kind in (KIND_SWEEP_N, KIND_SWEEP_PMAX, KIND_SWEEP_MN):
        _write_aggregate_csv(report, spec)
    return report


def _write_csv(path: str, header: list[str], rows) -> None:
    with open(path, "w", newline="", encoding="ascii") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


def _write_convergence_csv(report, spec, scheme, sample, sol: Solution) -> None:
    t = sol.traces
    n = len(t["wsr_best"])
    rows = [
        [e, repr(float(t["wsr_best"][e])), repr(float(t["wsr_current"][e])),
         repr(float(t["penalty"][e])), repr(float(t["rho"][e]))]
        for e in range(n)
    ]
    path = os.path.join(spec.out_dir, f"convergence_{scheme}_s{sample}.csv")
    _write_csv(path, CONVERGENCE_HEADER, rows)
    report.csv_paths.append(path)


def _write_phase_trace_csv(report, spec, scheme, sample, rec: CellRecord) -> None:
    trace = rec.phase_diff_trace
    n = trace.shape[1]
    header = ["epoch"] + [f"elem_{i}" for i in range(n)]
    rows = [[e] + [repr(float(v)) for v in trace[e]] for e in range(trace.shape[0])]
    path = os.path.join(spec.out_dir, f"phase_trace_{scheme}_s{sample}.csv")
    _write_csv(path, header, rows)
    report.csv_paths.append(path)


def _write_sweep_csv(report: ExperimentReport, spec: ExperimentSpec) -> None:
    name = "summary.csv" if spec.kind == KIND_CONVERGENCE else f"{spec.kind}.csv"
    rows = [
        [r.scheme, r.grid_value, r.sample, repr(float(r.wsr_final)),
         repr(float(r.seconds))]
        for r in report.records
    ]
    path = os.path.join(spec.out_dir, name)
    _write_csv(path, SWEEP_HEADER, rows)
    report.csv_paths.append(path)


def _write_aggregate_csv(report: ExperimentReport, spec: ExperimentSpec) -> None:
    groups: dict[tuple, list[float]] = {}
    for r in report.records:
        if r.error is None:
            groups.setdefault((r.scheme, r.grid_value), []).append(r.wsr_final)
    rows = []
    for (scheme, gval), vals in groups.items():
        arr = np.asarray(vals)
        rows.append([scheme, gval, len(arr), repr(float(arr.mean())),
                     repr(float(arr.std(ddof=0)))])
    path = os.path.join(spec.out_dir, f"{spec.kind}_aggregate.csv")
    _write_csv(path, ["scheme", "grid_value", "n", "wsr_mean", "wsr_std"], rows)
    report.csv_paths.append(path)


# --- timing ----------------------------------------------------------------


def timing_probe(sys_cfg: SystemConfig, train: TrainConfig,
                 repetitions: int = 5, ch: ChannelSet | None = None) -> TimingResult:
    """Median / min wall-clock seconds per epoch over timed repetitions,
    after one discarded warm-up run."""
    if repetitions < 3:
        raise ConfigurationError("timing needs at least 3 repetitions")
    if ch is None:
        ch = generate_channels(
            sys_cfg, ChannelConfig(), np.random.default_rng(train.seed)
        )
    run_gml(sys_cfg, ch, train)  # warm-up, excluded
    per_epoch = []
    for _ in range(repetitions):
        started = time.perf_counter()
        run_gml(sys_cfg, ch, train)
        per_epoch.append((time.perf_counter() - started) / train.n_epochs)
    return TimingResult(float(np.median(per_epoch)), float(np.min(per_epoch)))


def _run_timing_experiment(spec: ExperimentSpec) -> ExperimentReport:
    os.makedirs(spec.out_dir, exist_ok=True)
    report = ExperimentReport(spec)
    base_sys, ch_cfg, _ = _base_configs(spec)
    n_epochs = spec.n_epochs if spec.n_epochs else 60
    repetitions = max(spec.sample_count, 3)
    rows = []
    for gi, gval in enumerate(spec.grid):
        sys_cfg = _apply_grid(base_sys, KIND_TIMING, gval)
        train = _train_for(spec, spec.schemes[0], n_epochs,
                           _derive_seed(spec.master_seed, _SCHEME_TAG[spec.schemes[0]], gi, 0))
        ch = generate_channels(
            sys_cfg, ch_cfg,
            np.random.default_rng(_derive_seed(spec.master_seed, _CHANNEL_TAG, gi, 0)),
        )
        result = timing_probe(sys_cfg, train, repetitions=repetitions, ch=ch)
        rows.append([sys_cfg.M, sys_cfg.N, sys_cfg.K,
                     repr(result.median_s_per_epoch), repr(result.min_s_per_epoch)])
        report.records.append(
            CellRecord(spec.schemes[0], _grid_label(KIND_TIMING, gval), 0,
                       float("nan"), result.median_s_per_epoch)
        )
    path = os.path.join(spec.out_dir, "timing.csv")
    _write_csv(path, TIMING_HEADER, rows)
    report.csv_paths.append(path)
    return report


# --- gradient cross-check ---------------------------------------------------


def random_gradient_instance(
    seed: int,
) -> tuple[SystemConfig, ChannelSet, BeamformingState]:
    """Unit-scale random instance (M <= 8, N <= 16, K <= 4) for the
    finite-difference cross-check; the noise floor is matched to the mean
    receive power so the SINRs are O(1) and the comparison is well
    conditioned."""
    r = np.random.default_rng(seed)
    m = int(r.integers(2, 9))
    n = int(r.integers(2, 17))
    k = int(r.integers(1, 5))
    cfg = SystemConfig(M=m, N=n, K=k, p_max=float(k), noise_power=m * n / 2.0,
                       weights=r.uniform(0.5, 2.0, k))
    G = (r.standard_normal((n, m)) + 1j * r.standard_normal((n, m))) / np.sqrt(2)
    h = (r.standard_normal((k, n)) + 1j * r.standard_normal((k, n))) / np.sqrt(2)
    ch = ChannelSet(G, h)
    W = normalize_power(
        r.standard_normal((m, k)) + 1j * r.standard_normal((m, k)), cfg.p_max
    )
    bt, br = normalize_amplitudes(r.uniform(0.3, 1.0, n), r.uniform(0.3, 1.0, n))
    state = BeamformingState(
        W, bt, br, r.uniform(0, 2 * np.pi, n), r.uniform(0, 2 * np.pi, n)
    )
    return cfg, ch, state


def gradient_errors(
    analytic: GradientBundle, reference: GradientBundle,
    small_cut: float = 1e-10,
) -> tuple[float, float]:
    """(max relative error, max absolute error on small coordinates);
    coordinates with |reference| < small_cut are compared absolutely."""
    a = np.concatenate([
        analytic.grad_w.real.ravel(), analytic.grad_w.imag.ravel(),
        analytic.grad_beta, analytic.grad_theta,
    ])
    f = np.concatenate([
        reference.grad_w.real.ravel(), reference.grad_w.imag.ravel(),
        reference.grad_beta, reference.grad_theta,
    ])
    small = np.abs(f) < small_cut
    max_rel = 0.0
    max_abs = 0.0
    if (~small).any():
        max_rel = float(np.max(np.abs(a[~small] - f[~small]) / np.abs(f[~small])))
    if small.any():
        max_abs = float(np.max(np.abs(a[small] - f[small])))
    return max_rel, max_abs


# The cross-check runs central differences at 1e-4 rather than the 1e-6
# library default: for these unit-scale objectives 1e-4 balances roundoff
# against truncation, while at 1e-6 the roundoff floor alone exceeds the
# tolerance on the smallest gradient coordinates.
GRAD_CHECK_STEP = 1e-4
GRAD_CHECK_INSTANCES = 50
GRAD_CHECK_SEED_BASE = 1000


def grad_check_command(
    n_instances: int = GRAD_CHECK_INSTANCES,
    seed_base: int = GRAD_CHECK_SEED_BASE,
    step: float = GRAD_CHECK_STEP,
    verbose: bool = True,
) -> GradCheckReport:
    """Run the analytic-vs-central-difference suite; passes when every
    instance meets max relative error < 1e-6 (absolute < 1e-9 where the
    reference coordinate is below 1e-10)."""
    worst_rel = 0.0
    worst_abs = 0.0
    for i in range(n_instances):
        cfg, ch, state = random_gradient_instance(seed_base + i)
        analytic = wsr_gradients(cfg, ch, state)
        fd = finite_diff_gradient(
            lambda st: evaluate_wsr(cfg, ch, st), state, step=step
        )
        rel, ab = gradient_errors(analytic, fd)
        worst_rel = max(worst_rel, rel)
        worst_abs = max(worst_abs, ab)
    report = GradCheckReport(
        n_instances=n_instances,
        max_rel_err=worst_rel,
        max_abs_err_small=worst_abs,
    )
    report.passed = worst_rel < report.rel_tol and worst_abs < report.abs_tol
    if verbose:
        status = "PASS" if report.passed else "FAIL"
        print(
            f"[{status}] gradient cross-check over {n_instances} instances: "
            f"max rel err {worst_rel:.3e} (tol {report.rel_tol:g}), "
            f"max abs err on small coords {worst_abs:.3e} (tol {report.abs_tol:g})"
        )
    return report


def _run_grad_check_experiment(spec: ExperimentSpec) -> ExperimentReport:
    os.makedirs(spec.out_dir, exist_ok=True)
    report = ExperimentReport(spec)
    check = grad_check_command(
        n_instances=max(spec.sample_count, GRAD_CHECK_INSTANCES),
        seed_base=GRAD_CHECK_SEED_BASE + spec.master_seed,
    )
    path = os.path.join(spec.out_dir, "grad_check.csv")
    _write_csv(
        path,
        ["n_instances", "max_rel_err", "max_abs_err_small", "passed"],
        [[check.n_instances, repr(check.max_rel_err),
          repr(check.max_abs_err_small), int(check.passed)]],
    )
    report.csv_paths.append(path)
    if not check.passed:
        report.failures.append(
            f"gradient cross-check failed: rel {check.max_rel_err:.3e}"
        )
    return report


def sign_test_p_value(wins: int, n: int) -> float:
    """One-sided sign test: probability of >= wins successes out of n
    fair coin flips."""
    return sum(math.comb(n, i) for i in range(wins, n + 1)) / 2.0**n
