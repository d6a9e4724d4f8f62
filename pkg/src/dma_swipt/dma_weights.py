"""Lorentzian-relaxed optimization of the metasurface element weights.

With precoders and splitting ratios fixed, every transmit/receive power is a
quadratic form in the stacked element weights: vectorizing the block-diagonal
weight matrix and deleting its structural zeros leaves an N-vector q, and

    ||H Q w_m||^2          = q^H B_m q    (B_m diagonal PSD),
    |gamma_k^H H Q w_m|^2  = q^H C_km q   (C_km rank one),

so after lifting q to a PSD matrix the problem is a semidefinite program.
The circle constraint is dropped here (the mapping schemes restore it); the
lifted matrix is reduced exactly before solving: whitening by B^{1/2} turns
the objective into a trace, after which the optimum lives in the span of the
whitened coupling vectors, a space of dimension at most K*M regardless of N.
"""

import logging
from dataclasses import dataclass

import numpy as np

from dma_swipt import conic
from dma_swipt.dma import QosTargets, validate_ps_ratios
from dma_swipt.precoder import RANK_WARN_RATIO, DEAD_DIM_RTOL, SOLVE_ACCEPT_TOL

logger = logging.getLogger(__name__)


def build_reduced_matrices(precoders, h_diag, channels, n_rows):
    """Quadratic-form data of the weight problem.

    Returns (power_forms, coupling_forms, coupling_vecs): M diagonal (N, N)
    power matrices, K x M rank-one (N, N) coupling matrices, and the (K, M, N)
    stack of row vectors generating them (received amplitude = vec @ q).
    """
    w = np.atleast_2d(np.asarray(precoders))  # (M, n_rows)
    h = np.asarray(h_diag).ravel()
    g = np.atleast_2d(np.asarray(channels))  # (K, N)
    n = h.size
    if n % n_rows:
        raise ValueError("element count is not a multiple of the strip count")
    strip = np.arange(n) // (n // n_rows)
    if w.shape[1] != n_rows or g.shape[1] != n:
        raise ValueError("precoder, propagation and channel dimensions disagree")

    amp = w[:, strip] * h[None, :]  # (M, N): element amplitude per unit weight
    power_forms = [np.diag(np.abs(amp[m]) ** 2).astype(complex) for m in range(w.shape[0])]
    coupling_vecs = amp[None, :, :] * g.conj()[:, None, :]  # (K, M, N)
    coupling_forms = [
        [np.outer(coupling_vecs[k, m].conj(), coupling_vecs[k, m]) for m in range(w.shape[0])]
        for k in range(g.shape[0])
    ]
    return power_forms, coupling_forms, coupling_vecs


@dataclass(frozen=True)
class DmaProblemInputs:
    precoders: np.ndarray
    ps_ratios: np.ndarray
    channels: np.ndarray
    h_diag: np.ndarray
    n_rows: int
    targets: QosTargets
    rf_thresholds: np.ndarray
    power_forms: list
    coupling_forms: list
    coupling_vecs: np.ndarray

    @classmethod
    def build(cls, precoders, ps_ratios, channels, h_diag, n_rows, targets, rf_thresholds):
        power_forms, coupling_forms, coupling_vecs = build_reduced_matrices(
            precoders, h_diag, channels, n_rows
        )
        return cls(
            precoders=np.atleast_2d(np.asarray(precoders)),
            ps_ratios=validate_ps_ratios(ps_ratios),
            channels=np.atleast_2d(np.asarray(channels)),
            h_diag=np.asarray(h_diag).ravel(),
            n_rows=n_rows,
            targets=targets,
            rf_thresholds=np.asarray(rf_thresholds, float),
            power_forms=power_forms,
            coupling_forms=coupling_forms,
            coupling_vecs=coupling_vecs,
        )

    @property
    def n_users(self) -> int:
        return self.channels.shape[0]

    @property
    def n_precoders(self) -> int:
        return self.precoders.shape[0]


@dataclass
class DmaWeightSolution:
    status: str
    lifted: np.ndarray | None = None  # N x N PSD matrix
    ideal_weights: np.ndarray | None = None  # dominant rank-one factor
    objective: float = np.nan
    rank_ratio: float = np.nan
    rank_warning: bool = False
    achieved_tolerance: float = np.inf


def optimize_dma_weights(inputs: DmaProblemInputs, tolerance: float = 1e-7) -> DmaWeightSolution:
    """Solve the lifted weight problem and extract the dominant factor."""
    k_users = inputs.n_users
    m_pre = inputs.n_precoders
    n = inputs.h_diag.size
    t = inputs.targets
    rho = inputs.ps_ratios

    b_diag = np.zeros(n)
    for pf in inputs.power_forms:
        b_diag += np.real(np.diag(pf))
    live = np.flatnonzero(b_diag > DEAD_DIM_RTOL * b_diag.max(initial=0.0))
    rhs_sinr = t.sinr_targets * (t.antenna_noise + t.conversion_noise / rho)
    rhs_eh = inputs.rf_thresholds / (1.0 - rho)
    if live.size == 0:
        if np.all(rhs_sinr <= 0.0) and np.all(rhs_eh <= 0.0):
            zeros = np.zeros(n, dtype=complex)
            return DmaWeightSolution(
                status="optimal",
                lifted=np.zeros((n, n), dtype=complex),
                ideal_weights=zeros,
                objective=0.0,
                rank_ratio=0.0,
                achieved_tolerance=0.0,
            )
        return DmaWeightSolution(status="infeasible")

    # whiten the live coordinates so the objective becomes a plain trace;
    # each coupling form is then outer(d, d^H) with d the conjugated vector
    white = np.sqrt(b_diag[live])
    d_vecs = (inputs.coupling_vecs[:, :, live] / white[None, None, :]).conj()  # (K, M, n_live)

    # exact reduction to the span of the form directions
    stack = d_vecs.reshape(k_users * m_pre, live.size).T  # (n_live, K*M)
    u, sv, _ = np.linalg.svd(stack, full_matrices=False)
    p = int(np.sum(sv > sv[0] * 1e-12)) if sv.size else 0
    if p == 0:
        return DmaWeightSolution(status="infeasible")
    basis = u[:, :p]
    d_red = d_vecs @ basis.conj()  # rows of U^H d for every (k, m)

    # lifted variable expressed in units of a matched-direction estimate of
    # the optimum, so solver data is O(1) (the substitution is exact)
    var_scale = 0.0
    for k in range(k_users):
        norm_kk = float(np.vdot(d_red[k, k], d_red[k, k]).real)
        if norm_kk > 0.0:
            var_scale += max(rhs_sinr[k], rhs_eh[k]) / norm_kk
    if var_scale <= 0.0:
        var_scale = 1.0
    rhs_floor = 1e-6 * max(rhs_sinr.max(initial=0.0), rhs_eh.max(initial=0.0))

    builder = conic.ProblemBuilder()
    lifted = builder.new_hermitian_psd(p)
    red_outer = lambda k, m: np.outer(d_red[k, m], d_red[k, m].conj())
    # each row normalized by its own threshold (exact), so the solver resolves
    # every binding constraint to comparable relative accuracy
    for k in range(k_users):
        form = red_outer(k, k)
        for m in range(m_pre):
            if m != k:
                form = form - t.sinr_targets[k] * red_outer(k, m)
        row_scale = max(rhs_sinr[k], rhs_floor) if rhs_sinr[k] > 0.0 else 1.0
        builder.add_nonneg(
            lifted.trace_expr(form * (var_scale / row_scale)) - rhs_sinr[k] / row_scale
        )
    for k in range(k_users):
        if rhs_eh[k] > 0.0:
            form = sum(red_outer(k, m) for m in range(m_pre))
            row_scale = max(rhs_eh[k], rhs_floor)
            builder.add_nonneg(
                lifted.trace_expr(form * (var_scale / row_scale)) - rhs_eh[k] / row_scale
            )
    builder.minimize(lifted.trace_expr(np.eye(p, dtype=complex)))

    sol = conic.solve(builder.build(), tolerance=tolerance, accept_tolerance=max(tolerance, SOLVE_ACCEPT_TOL))
    if sol.status != "optimal":
        return DmaWeightSolution(status=sol.status, achieved_tolerance=sol.achieved_tolerance)

    t_mat = lifted.value(sol.x) * var_scale
    # undo reduction and whitening; scatter back over dead coordinates
    live_mat = (basis @ t_mat @ basis.conj().T) / white[:, None] / white[None, :]
    full = np.zeros((n, n), dtype=complex)
    full[np.ix_(live, live)] = live_mat

    vals, vecs = np.linalg.eigh(full)
    lam1 = max(vals[-1], 0.0)
    ratio = float(max(vals[-2], 0.0) / lam1) if (lam1 > 0 and n > 1) else 0.0
    q = np.sqrt(lam1) * vecs[:, -1] if lam1 > 0 else np.zeros(n, dtype=complex)
    if ratio > RANK_WARN_RATIO:
        logger.warning("lifted weight matrix is not rank one (ratio %.3e)", ratio)

    objective = float(sum(np.real(np.trace(pf @ full)) for pf in inputs.power_forms))
    return DmaWeightSolution(
        status="optimal",
        lifted=full,
        ideal_weights=q,
        objective=objective,
        rank_ratio=ratio,
        rank_warning=ratio > RANK_WARN_RATIO,
        achieved_tolerance=sol.achieved_tolerance,
    )
