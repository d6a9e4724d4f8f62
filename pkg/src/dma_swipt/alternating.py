"""Alternating minimization of transmit power over weights, precoders and ratios.

Each round solves the weight program for the current precoders and ratios,
projects the ideal weights onto the feasible circle with the configured
mapping scheme, then re-solves the precoder/splitting program for the mapped
weights and scores the resulting transmit power.  Because the mapping can
regress, the raw per-round power is recorded alongside a best-so-far iterate
that is only replaced by candidates whose constraints re-verify through the
signal model (never through solver residuals).

Baselines: ``uw`` skips the mapping (unconstrained upper bound) and
:func:`run_fd_baseline` solves the one-chain-per-element architecture in a
single convex shot, reduced exactly to the span of the user channels.
"""

import time
from dataclasses import dataclass, field

import numpy as np

from dma_swipt.dma import (
    DmaWeights,
    QosTargets,
    lorentzian_weight,
    propagation_diagonal,
    received_amplitudes,
    transmit_power,
)
from dma_swipt.dma_weights import DmaProblemInputs, optimize_dma_weights
from dma_swipt.energy import EhModel, rf_thresholds
from dma_swipt.geometry import ArrayGeometry, channel_matrix
from dma_swipt.lorentzian import map_weights
from dma_swipt.precoder import (
    PrecoderProblemInputs,
    PsMode,
    optimize_precoder_ps,
    reduce_to_channel_span,
)

MARGIN_TOL = 1e-4


@dataclass(frozen=True)
class OptimizerConfig:
    max_iterations: int = 20
    seed: int = 0
    scheme: str = "arlch"  # arlch | lcph | lcush | aoh | uw
    ps_mode: PsMode = PsMode("ops")
    solver_tolerance: float = 1e-8
    weight_solver_tolerance: float = 1e-7
    improvement_tol: float = 1e-3
    improvement_patience: int = 3
    init_retries: int = 5

    def __post_init__(self):
        if self.max_iterations < 1:
            raise ValueError("need at least one iteration")


@dataclass(frozen=True)
class SwiptScenario:
    """Physical setup of one optimization run."""

    geometry: ArrayGeometry
    channels: np.ndarray  # (K, N)
    h_diag: np.ndarray  # (N,)
    targets: QosTargets
    eh_model: EhModel
    rf_floor: np.ndarray  # (K,) required RF power at the harvester, watts

    @classmethod
    def build(cls, geometry, waveguide, user_positions, targets, eh_model):
        return cls(
            geometry=geometry,
            channels=channel_matrix(geometry, user_positions),
            h_diag=propagation_diagonal(waveguide, geometry),
            targets=targets,
            eh_model=eh_model,
            rf_floor=rf_thresholds(eh_model, targets.eh_thresholds),
        )

    @property
    def n_users(self) -> int:
        return self.channels.shape[0]


@dataclass
class RunRecord:
    status: str  # "ok" | "infeasible" | "solver-failure"
    feasible: bool
    best_power: float
    power_trace: list
    best_trace: list
    weights: DmaWeights | None
    precoders: np.ndarray | None
    ps_ratios: np.ndarray | None
    sinr_margins: np.ndarray | None
    eh_margins: np.ndarray | None
    iterations_used: int
    precoder_rank_ratios: list = field(default_factory=list)
    weight_rank_ratios: list = field(default_factory=list)
    stage_seconds: dict = field(default_factory=dict)


def margins_from_amplitudes(amps, rho, targets: QosTargets, rf_floor):
    """(SINR margin, EH margin) per user from the received-amplitude matrix.

    SINR margin is SINR/target - 1; EH margin compares harvester input power
    against the inverted threshold (infinite when no power is required).
    """
    k_users = amps.shape[0]
    p = np.abs(amps) ** 2
    sinr_m = np.empty(k_users)
    eh_m = np.empty(k_users)
    for k in range(k_users):
        noise = targets.antenna_noise[k] + targets.conversion_noise[k] / rho[k]
        signal = p[k, k]
        interf = p[k].sum() - signal
        sinr_m[k] = signal / (interf + noise) / targets.sinr_targets[k] - 1.0
        received = (1.0 - rho[k]) * p[k].sum()
        eh_m[k] = received / rf_floor[k] - 1.0 if rf_floor[k] > 0.0 else np.inf
    return sinr_m, eh_m


def evaluate(weights, precoders, rho, scenario: SwiptScenario):
    """Independent constraint re-verification through the signal model."""
    amps = received_amplitudes(
        scenario.channels, scenario.h_diag, weights, precoders, scenario.geometry.n_rows
    )
    return margins_from_amplitudes(amps, np.asarray(rho, float), scenario.targets, scenario.rf_floor)


def _precoder_inputs(scenario: SwiptScenario, weights, ps_mode: PsMode) -> PrecoderProblemInputs:
    return PrecoderProblemInputs.from_dma(
        scenario.channels,
        scenario.h_diag,
        weights,
        scenario.geometry.n_rows,
        scenario.targets,
        scenario.rf_floor,
        ps_mode,
    )


def run(scenario: SwiptScenario, config: OptimizerConfig) -> RunRecord:
    """Alternating weight / precoder-and-ratio optimization with best-so-far."""
    rng = np.random.default_rng(config.seed)
    n = scenario.geometry.n_elements
    n_rows = scenario.geometry.n_rows
    stage = {"weights": 0.0, "precoder": 0.0}
    record = RunRecord(
        status="infeasible",
        feasible=False,
        best_power=np.inf,
        power_trace=[],
        best_trace=[],
        weights=None,
        precoders=None,
        ps_ratios=None,
        sinr_margins=None,
        eh_margins=None,
        iterations_used=0,
        stage_seconds=stage,
    )

    # random feasible start on the circle, a few redraws if the first solve fails
    psol = None
    q_current = None
    for _ in range(max(1, config.init_retries)):
        q_current = DmaWeights(lorentzian_weight(rng.uniform(0.0, 2.0 * np.pi, n)), tag="lorentzian")
        t0 = time.perf_counter()
        cand = optimize_precoder_ps(
            _precoder_inputs(scenario, q_current.values, config.ps_mode), config.solver_tolerance
        )
        stage["precoder"] += time.perf_counter() - t0
        if cand.status == "optimal":
            psol = cand
            break
    if psol is None:
        return record

    def score(weights, sol):
        power = transmit_power(scenario.h_diag, weights.values, sol.precoders, n_rows)
        s_m, e_m = evaluate(weights.values, sol.precoders, sol.ps_ratios, scenario)
        ok = min(s_m.min(), e_m.min()) >= -MARGIN_TOL
        return power, s_m, e_m, ok

    power, s_m, e_m, ok = score(q_current, psol)
    record.power_trace.append(power)
    record.precoder_rank_ratios.extend(psol.rank_ratios.tolist())
    if ok:
        record.status = "ok"
        record.feasible = True
        record.best_power = power
        record.weights = q_current
        record.precoders = psol.precoders
        record.ps_ratios = psol.ps_ratios
        record.sinr_margins = s_m
        record.eh_margins = e_m
    record.best_trace.append(record.best_power)

    w_state, rho_state = psol.precoders, psol.ps_ratios
    stall = 0
    for t in range(1, config.max_iterations + 1):
        record.iterations_used = t
        prev_best = record.best_power

        t0 = time.perf_counter()
        wsol = optimize_dma_weights(
            DmaProblemInputs.build(
                w_state,
                rho_state,
                scenario.channels,
                scenario.h_diag,
                n_rows,
                scenario.targets,
                scenario.rf_floor,
            ),
            config.weight_solver_tolerance,
        )
        stage["weights"] += time.perf_counter() - t0

        advanced = False
        if wsol.status == "optimal":
            record.weight_rank_ratios.append(wsol.rank_ratio)
            mapped = map_weights(wsol.ideal_weights, None if config.scheme == "uw" else config.scheme)
            t0 = time.perf_counter()
            cand = optimize_precoder_ps(
                _precoder_inputs(scenario, mapped.values, config.ps_mode), config.solver_tolerance
            )
            stage["precoder"] += time.perf_counter() - t0
            if cand.status == "optimal":
                advanced = True
                power, s_m, e_m, ok = score(mapped, cand)
                record.power_trace.append(power)
                record.precoder_rank_ratios.extend(cand.rank_ratios.tolist())
                w_state, rho_state = cand.precoders, cand.ps_ratios
                if ok and power < record.best_power:
                    record.status = "ok"
                    record.feasible = True
                    record.best_power = power
                    record.weights = mapped
                    record.precoders = cand.precoders
                    record.ps_ratios = cand.ps_ratios
                    record.sinr_margins = s_m
                    record.eh_margins = e_m
        if not advanced:
            record.power_trace.append(np.nan)
        record.best_trace.append(record.best_power)

        improved = (
            np.isfinite(prev_best)
            and np.isfinite(record.best_power)
            and (prev_best - record.best_power) > config.improvement_tol * prev_best
        )
        stall = 0 if improved else stall + 1
        if stall >= config.improvement_patience:
            break

    if not record.feasible:
        record.status = "infeasible"
    return record


def run_fd_baseline(scenario: SwiptScenario, config: OptimizerConfig) -> RunRecord:
    """Fully digital architecture: a single convex solve, no alternation.

    The solve runs in the span of the user channels (exact reduction) and the
    result is lifted back to full element dimension.
    """
    stage = {"weights": 0.0, "precoder": 0.0}
    if scenario.n_users == 0:
        return RunRecord(
            status="ok",
            feasible=True,
            best_power=0.0,
            power_trace=[],
            best_trace=[],
            weights=None,
            precoders=np.zeros((0, scenario.geometry.n_elements), dtype=complex),
            ps_ratios=np.zeros(0),
            sinr_margins=np.zeros(0),
            eh_margins=np.zeros(0),
            iterations_used=0,
            stage_seconds=stage,
        )

    basis, reduced = reduce_to_channel_span(scenario.channels)
    if basis.shape[1] < scenario.n_users:
        # degenerate span: some user's channel vanishes or coincides with
        # another's, so the per-user SINR floors cannot all be met
        return RunRecord(
            status="infeasible",
            feasible=False,
            best_power=np.inf,
            power_trace=[],
            best_trace=[],
            weights=None,
            precoders=None,
            ps_ratios=None,
            sinr_margins=None,
            eh_margins=None,
            iterations_used=0,
            stage_seconds=stage,
        )
    inputs = PrecoderProblemInputs(
        tx_gram=np.eye(reduced.shape[1], dtype=complex),
        chan=reduced,
        targets=scenario.targets,
        rf_thresholds=scenario.rf_floor,
        ps_mode=config.ps_mode,
    )
    t0 = time.perf_counter()
    sol = optimize_precoder_ps(inputs, config.solver_tolerance)
    stage["precoder"] += time.perf_counter() - t0

    record = RunRecord(
        status="infeasible" if sol.status == "infeasible" else "solver-failure",
        feasible=False,
        best_power=np.inf,
        power_trace=[],
        best_trace=[],
        weights=None,
        precoders=None,
        ps_ratios=None,
        sinr_margins=None,
        eh_margins=None,
        iterations_used=1,
        stage_seconds=stage,
    )
    if sol.status != "optimal":
        return record

    precoders = sol.precoders @ basis.T  # lift back: w = basis @ w_reduced
    amps = scenario.channels.conj() @ precoders.T
    s_m, e_m = margins_from_amplitudes(amps, sol.ps_ratios, scenario.targets, scenario.rf_floor)
    power = float((np.abs(precoders) ** 2).sum())
    ok = min(s_m.min(), e_m.min()) >= -MARGIN_TOL
    record.power_trace = [power]
    record.best_trace = [power if ok else np.inf]
    record.precoder_rank_ratios = sol.rank_ratios.tolist()
    if ok:
        record.status = "ok"
        record.feasible = True
        record.best_power = power
        record.precoders = precoders
        record.ps_ratios = sol.ps_ratios
        record.sinr_margins = s_m
        record.eh_margins = e_m
    return record
