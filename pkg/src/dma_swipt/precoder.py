"""Joint digital precoder and power-splitting optimization for fixed weights.

With the metasurface weights held fixed, minimizing transmit power subject to
per-user decoder-SINR and harvested-power floors is convex after lifting each
precoder to a PSD matrix and dropping its rank constraint; the lift is exact
here (the relaxation returns rank-one optimizers, which is monitored on every
solve).  Splitting ratios stay inside the problem through hyperbolic
epigraphs, encoded as rotated-quadratic cones, so ratios and precoders are
optimized jointly.
"""

import logging
from dataclasses import dataclass, field

import numpy as np

from dma_swipt import conic
from dma_swipt.dma import RHO_EPS, QosTargets, effective_channels, tx_gram

logger = logging.getLogger(__name__)

# eigenvalue-ratio level above which a lifted matrix no longer counts as rank one
RANK_WARN_RATIO = 1e-4
# relative level below which a dimension of the compound channel is considered dead
DEAD_DIM_RTOL = 1e-12
# residual level up to which a converged interior point is still usable;
# downstream constraint re-verification applies its own 1e-4 margin
SOLVE_ACCEPT_TOL = 1e-6


class UnsupportedConfigurationError(ValueError):
    """More users than RF chains: one precoder per user cannot be formed."""


@dataclass(frozen=True)
class PsMode:
    """Power-splitting mode: jointly optimized, equal, or pinned ratios."""

    kind: str  # "ops" | "eps" | "fixed"
    rho: float | None = None

    def __post_init__(self):
        if self.kind not in ("ops", "eps", "fixed"):
            raise ValueError(f"unknown PS mode {self.kind!r}")
        if self.kind == "fixed":
            if self.rho is None or not (RHO_EPS <= self.rho <= 1.0 - RHO_EPS):
                raise ValueError(
                    f"fixed splitting ratio must lie in [{RHO_EPS}, {1 - RHO_EPS}]"
                )

    @classmethod
    def parse(cls, text: str) -> "PsMode":
        t = text.strip().lower()
        if t == "ops":
            return cls("ops")
        if t == "eps":
            return cls("eps")
        if t.startswith("fixed:"):
            return cls("fixed", float(t.split(":", 1)[1]))
        raise ValueError(f"unknown PS mode {text!r}; expected ops, eps or fixed:R")

    def fixed_value(self) -> float | None:
        if self.kind == "eps":
            return 0.5
        if self.kind == "fixed":
            return self.rho
        return None

    def label(self) -> str:
        return self.kind if self.kind != "fixed" else f"fixed:{self.rho}"


@dataclass(frozen=True)
class PrecoderProblemInputs:
    """Data of one precoder/splitting solve.

    ``tx_gram`` is the RF-chain power Gram matrix, ``chan`` holds the per-user
    compound channels (received amplitude for precoder w is ``chan[k].conj() @ w``),
    and ``rf_thresholds`` are the already-inverted harvester floors in watts.
    """

    tx_gram: np.ndarray
    chan: np.ndarray
    targets: QosTargets
    rf_thresholds: np.ndarray
    ps_mode: PsMode

    @property
    def n_users(self) -> int:
        return self.chan.shape[0]

    @property
    def n_chains(self) -> int:
        return self.chan.shape[1]

    def channel_outer(self, k: int) -> np.ndarray:
        a = self.chan[k]
        return np.outer(a, a.conj())

    @classmethod
    def from_dma(cls, channels, h_diag, weights, n_rows, targets, rf_thresholds, ps_mode):
        return cls(
            tx_gram=tx_gram(h_diag, weights, n_rows),
            chan=effective_channels(channels, h_diag, weights, n_rows),
            targets=targets,
            rf_thresholds=np.asarray(rf_thresholds, float),
            ps_mode=ps_mode,
        )

    @classmethod
    def fully_digital(cls, channels, targets, rf_thresholds, ps_mode):
        """One RF chain per radiator: identity power metric, raw channels."""
        chan = np.atleast_2d(np.asarray(channels, complex))
        return cls(
            tx_gram=np.eye(chan.shape[1], dtype=complex),
            chan=chan,
            targets=targets,
            rf_thresholds=np.asarray(rf_thresholds, float),
            ps_mode=ps_mode,
        )


@dataclass
class PrecoderSolution:
    status: str
    matrices: list | None = None
    precoders: np.ndarray | None = None
    ps_ratios: np.ndarray | None = None
    objective: float = np.nan
    rank_ratios: np.ndarray | None = None
    rank_warning: bool = False
    achieved_tolerance: float = np.inf
    binding_users: list = field(default_factory=list)


def reduce_to_channel_span(channels):
    """Orthonormal basis of the span of the user channels and the reduced
    channel coordinates.  Solving the fully digital problem in this basis is
    exact: any feasible precoder projects onto the span with no constraint
    change and no larger power."""
    chan = np.atleast_2d(np.asarray(channels, complex))
    u, s, _ = np.linalg.svd(chan.T, full_matrices=False)
    rank = int(np.sum(s > s[0] * 1e-12)) if s.size else 0
    basis = u[:, :rank]
    return basis, chan @ basis.conj()


def build_precoder_problem(inputs: PrecoderProblemInputs, check_chains: bool = True):
    """Assemble the cone program; returns (problem, handles).

    Every inequality row is normalized by its own threshold scale (an exact
    rescaling), so rows with very different noise/harvest floors are resolved
    to comparable relative accuracy by the solver.  ``check_chains=False``
    skips the one-precoder-per-user dimension check for internally reduced
    problems (dead chains removed for numerics).
    """
    k_users = inputs.n_users
    n = inputs.n_chains
    if check_chains and k_users > n:
        raise UnsupportedConfigurationError(
            f"{k_users} users exceed {n} RF chains; one precoder per user is required"
        )
    t = inputs.targets
    rho_fix = inputs.ps_mode.fixed_value()
    rho_ref = 0.5 if rho_fix is None else rho_fix

    # a matched-filter estimate of the optimal power; the lifted variables are
    # expressed in units of it so solver data is O(1) regardless of absolute
    # noise and threshold levels (the substitution is exact)
    tr_z = max(float(np.real(np.trace(inputs.tx_gram))), 1e-300)
    taus = np.empty(k_users)
    var_scale = 0.0
    for k in range(k_users):
        taus[k] = max(
            t.sinr_targets[k] * (t.antenna_noise[k] + t.conversion_noise[k] / rho_ref),
            inputs.rf_thresholds[k] / (1.0 - rho_ref),
        )
        gain = float(np.vdot(inputs.chan[k], inputs.chan[k]).real) * n / tr_z
        if gain > 0.0:
            var_scale += taus[k] / gain
    if var_scale <= 0.0:
        var_scale = 1.0
    tau_floor = 1e-6 * max(float(taus.max(initial=0.0)), 0.0)

    b = conic.ProblemBuilder()
    w_vars = [b.new_hermitian_psd(n) for _ in range(k_users)]
    outers = [inputs.channel_outer(k) for k in range(k_users)]

    rho_exprs: list = []
    if rho_fix is None:
        for k in range(k_users):
            rho_exprs.append(b.new_scalar(lower=RHO_EPS, upper=1.0 - RHO_EPS))
    else:
        rho_exprs = [conic.LinExpr(const=rho_fix) for _ in range(k_users)]

    def scaled_trace(k, m, row_scale):
        # Tr(P_k W_m) in row units, with W_m = var_scale * (lifted variable)
        return w_vars[m].trace_expr(outers[k] * (var_scale / row_scale))

    for k in range(k_users):
        sigma_a = float(t.antenna_noise[k])
        sigma_c = float(t.conversion_noise[k])
        p_th = float(inputs.rf_thresholds[k])
        row_scale = max(sigma_a + sigma_c / rho_ref, tau_floor)
        if row_scale <= 0.0:
            row_scale = 1.0
        lhs = scaled_trace(k, k, row_scale) * (1.0 / t.sinr_targets[k]) - sum(
            (scaled_trace(k, m, row_scale) for m in range(k_users) if m != k),
            conic.LinExpr(),
        )
        if sigma_c > 0.0 and rho_fix is None:
            # u is the epigraph of (sigma_c / row_scale) / rho
            u_k = b.new_scalar(lower=0.0)
            b.add_rsoc(u_k, rho_exprs[k], conic.LinExpr(const=float(np.sqrt(sigma_c / row_scale))))
            b.add_nonneg(lhs - sigma_a / row_scale - u_k)
        else:
            rhs = sigma_a + (sigma_c / rho_fix if sigma_c > 0.0 else 0.0)
            b.add_nonneg(lhs - rhs / row_scale)

        if p_th > 0.0:
            eh_scale = max(p_th / (1.0 - rho_ref), tau_floor)
            received = sum(
                (scaled_trace(k, m, eh_scale) for m in range(k_users)), conic.LinExpr()
            )
            if rho_fix is None:
                v_k = b.new_scalar(lower=0.0)
                b.add_rsoc(v_k, 1.0 - rho_exprs[k], conic.LinExpr(const=float(np.sqrt(p_th / eh_scale))))
                b.add_nonneg(received - v_k)
            else:
                b.add_nonneg(received - (p_th / (1.0 - rho_fix)) / eh_scale)

    b.minimize(sum((w.trace_expr(inputs.tx_gram) for w in w_vars), conic.LinExpr()))
    return b.build(), {"w_vars": w_vars, "rho": rho_exprs, "var_scale": var_scale}


def extract_rank_one(w_matrix: np.ndarray):
    """Dominant rank-one factor of a lifted precoder matrix.

    Returns (vector, eigenvalue_ratio).  The global phase is normalized so the
    first significantly nonzero entry is real nonnegative; an all-zero matrix
    yields the zero vector with ratio 0.
    """
    w_matrix = np.asarray(w_matrix)
    norm = np.linalg.norm(w_matrix)
    if norm == 0.0:
        return np.zeros(w_matrix.shape[0], dtype=complex), 0.0
    vals, vecs = np.linalg.eigh(w_matrix)
    lam1 = vals[-1]
    if lam1 <= 0.0:
        return np.zeros(w_matrix.shape[0], dtype=complex), 0.0
    ratio = float(max(vals[-2], 0.0) / lam1) if len(vals) > 1 else 0.0
    vec = np.sqrt(lam1) * vecs[:, -1]
    mag = np.abs(vec)
    lead = int(np.argmax(mag > 1e-12 * mag.max())) if mag.max() > 0 else 0
    phase = np.angle(vec[lead])
    vec = vec * np.exp(-1j * phase)
    if ratio > RANK_WARN_RATIO:
        logger.warning("lifted matrix is not rank one (ratio %.3e)", ratio)
    return vec, ratio


def _restricted_power_solution(inputs: PrecoderProblemInputs, dirs: np.ndarray, tolerance: float):
    """Re-optimize per-user powers (and ratios) with beam directions fixed.

    With directions pinned, every lifted matrix collapses to a scalar power,
    so this is a small cone program whose solution is exactly rank one.  Used
    to polish the lifted solve: if the result is no worse, it replaces the
    eigenvalue-truncated matrices.  Returns None when infeasible.
    """
    k_users = inputs.n_users
    t = inputs.targets
    rho_fix = inputs.ps_mode.fixed_value()
    rho_ref = 0.5 if rho_fix is None else rho_fix
    cost = np.array([float(np.real(np.vdot(d, inputs.tx_gram @ d))) for d in dirs])
    coup = np.abs(inputs.chan.conj() @ dirs.T) ** 2  # coup[k, m] = |a_k^H dir_m|^2

    taus = np.array(
        [
            max(
                t.sinr_targets[k] * (t.antenna_noise[k] + t.conversion_noise[k] / rho_ref),
                inputs.rf_thresholds[k] / (1.0 - rho_ref),
            )
            for k in range(k_users)
        ]
    )
    tau_floor = 1e-6 * float(taus.max(initial=0.0))
    p_scale = float(taus.max(initial=0.0))
    if p_scale <= 0.0:
        p_scale = 1.0

    b = conic.ProblemBuilder()
    powers = [b.new_scalar(lower=0.0) for _ in range(k_users)]  # in units of p_scale
    if rho_fix is None:
        rho_exprs = [b.new_scalar(lower=RHO_EPS, upper=1.0 - RHO_EPS) for _ in range(k_users)]
    else:
        rho_exprs = [conic.LinExpr(const=rho_fix) for _ in range(k_users)]

    for k in range(k_users):
        sigma_a = float(t.antenna_noise[k])
        sigma_c = float(t.conversion_noise[k])
        p_th = float(inputs.rf_thresholds[k])
        row_scale = max(sigma_a + sigma_c / rho_ref, tau_floor)
        if row_scale <= 0.0:
            row_scale = 1.0
        lhs = powers[k] * (coup[k, k] / t.sinr_targets[k] * p_scale / row_scale)
        for m in range(k_users):
            if m != k:
                lhs = lhs - powers[m] * (coup[k, m] * p_scale / row_scale)
        if sigma_c > 0.0 and rho_fix is None:
            u_k = b.new_scalar(lower=0.0)
            b.add_rsoc(u_k, rho_exprs[k], conic.LinExpr(const=float(np.sqrt(sigma_c / row_scale))))
            b.add_nonneg(lhs - sigma_a / row_scale - u_k)
        else:
            rhs = sigma_a + (sigma_c / rho_fix if sigma_c > 0.0 else 0.0)
            b.add_nonneg(lhs - rhs / row_scale)
        if p_th > 0.0:
            eh_scale = max(p_th / (1.0 - rho_ref), tau_floor)
            received = sum(
                (powers[m] * (coup[k, m] * p_scale / eh_scale) for m in range(k_users)),
                conic.LinExpr(),
            )
            if rho_fix is None:
                v_k = b.new_scalar(lower=0.0)
                b.add_rsoc(v_k, 1.0 - rho_exprs[k], conic.LinExpr(const=float(np.sqrt(p_th / eh_scale))))
                b.add_nonneg(received - v_k)
            else:
                b.add_nonneg(received - (p_th / (1.0 - rho_fix)) / eh_scale)

    b.minimize(sum((powers[m] * float(cost[m]) for m in range(k_users)), conic.LinExpr()))
    sol = conic.solve(b.build(), tolerance=tolerance, accept_tolerance=max(tolerance, SOLVE_ACCEPT_TOL))
    if sol.status != "optimal":
        return None
    p_vals = np.array([max(e.value(sol.x), 0.0) for e in powers]) * p_scale
    rho = np.array([np.clip(e.value(sol.x), RHO_EPS, 1.0 - RHO_EPS) for e in rho_exprs])
    objective = float(p_vals @ cost)
    return p_vals, rho, objective


def _live_dimensions(inputs: PrecoderProblemInputs) -> np.ndarray:
    """Chains carrying either transmit power weight or channel response."""
    z_diag = np.real(np.diag(inputs.tx_gram))
    chan_pow = (np.abs(inputs.chan) ** 2).sum(axis=0)
    z_ref = z_diag.max() if z_diag.size else 0.0
    c_ref = chan_pow.max() if chan_pow.size else 0.0
    live = (z_diag > DEAD_DIM_RTOL * z_ref) | (chan_pow > DEAD_DIM_RTOL * c_ref)
    return np.flatnonzero(live)


def optimize_precoder_ps(inputs: PrecoderProblemInputs, tolerance: float = 1e-8) -> PrecoderSolution:
    """Solve the lifted problem and extract rank-one precoders and ratios."""
    if inputs.n_users > inputs.n_chains:
        raise UnsupportedConfigurationError(
            f"{inputs.n_users} users exceed {inputs.n_chains} RF chains; "
            "one precoder per user is required"
        )
    live = _live_dimensions(inputs)
    n_full = inputs.n_chains
    if live.size == 0:
        return PrecoderSolution(status="infeasible", binding_users=list(range(inputs.n_users)))
    reduced = inputs
    if live.size < n_full:
        reduced = PrecoderProblemInputs(
            tx_gram=inputs.tx_gram[np.ix_(live, live)],
            chan=inputs.chan[:, live],
            targets=inputs.targets,
            rf_thresholds=inputs.rf_thresholds,
            ps_mode=inputs.ps_mode,
        )

    problem, handles = build_precoder_problem(reduced, check_chains=False)
    sol = conic.solve(problem, tolerance=tolerance, accept_tolerance=max(tolerance, SOLVE_ACCEPT_TOL))
    if sol.status != "optimal":
        out = PrecoderSolution(status=sol.status, achieved_tolerance=sol.achieved_tolerance)
        if sol.status == "infeasible":
            out.binding_users = list(range(inputs.n_users))
        return out

    k_users = inputs.n_users
    var_scale = handles["var_scale"]
    red_vecs = []
    red_mats = []
    ratios = np.empty(k_users)
    for k, w_var in enumerate(handles["w_vars"]):
        w_mat = w_var.value(sol.x) * var_scale
        vec, ratio = extract_rank_one(w_mat)
        red_mats.append(w_mat)
        red_vecs.append(vec)
        ratios[k] = ratio
    rho = np.array(
        [np.clip(e.value(sol.x), RHO_EPS, 1.0 - RHO_EPS) for e in handles["rho"]]
    )
    objective = float(sol.objective) * var_scale

    # rank-one polish: re-fit powers and ratios along the extracted beam
    # directions; adopt the result when it verifies at no worse cost, which
    # also absorbs eigenvalue contamination when the interior point stalls
    norms = np.array([np.linalg.norm(v) for v in red_vecs])
    if np.all(norms > 0.0):
        dirs = np.array([v / nv for v, nv in zip(red_vecs, norms)])
        polish = _restricted_power_solution(reduced, dirs, tolerance)
        if polish is not None:
            p_vals, rho_pol, obj_pol = polish
            guard = max(1e-6, 10.0 * sol.achieved_tolerance)
            if obj_pol <= objective * (1.0 + guard):
                red_vecs = [np.sqrt(pv) * d for pv, d in zip(p_vals, dirs)]
                red_mats = [np.outer(v, v.conj()) for v in red_vecs]
                ratios = np.zeros(k_users)
                rho = rho_pol
                objective = obj_pol

    matrices = []
    precoders = np.zeros((k_users, n_full), dtype=complex)
    for k in range(k_users):
        full_mat = np.zeros((n_full, n_full), dtype=complex)
        full_mat[np.ix_(live, live)] = red_mats[k]
        matrices.append(full_mat)
        precoders[k, live] = red_vecs[k]
    return PrecoderSolution(
        status="optimal",
        matrices=matrices,
        precoders=precoders,
        ps_ratios=rho,
        objective=objective,
        rank_ratios=ratios,
        rank_warning=bool(np.any(ratios > RANK_WARN_RATIO)),
        achieved_tolerance=sol.achieved_tolerance,
    )
