"""Standard-form cone programs and a uniform solve interface.

A :class:`ConicProblem` is ``minimize c @ x`` subject to ``rhs - A @ x``
lying in a product of cones: nonnegative rows, rotated-quadratic blocks
(t, u, s) with t*u >= s^2 and t, u >= 0, and PSD blocks.  Complex Hermitian
matrix variables are handled through their real symmetric embedding
X = A + jB  ->  [[A, -B], [B, A]], under the convention that embedded traces
are twice the complex ones (see :func:`trace_via_embedding`).

Solving is delegated to Clarabel (single-threaded for reproducibility);
rotated-quadratic blocks are lowered to second-order cones.  A solution is
reported ``optimal`` only when the measured feasibility residual and relative
duality gap pass the requested tolerance; failures are never silent.
"""

import json
import os
from dataclasses import dataclass, field

import clarabel
import numpy as np
import scipy.sparse as sp

_SQRT2 = np.sqrt(2.0)

DEFAULT_TOL = 1e-8
DUMP_ENV_VAR = "DMA_SWIPT_CONIC_DUMP"
_dump_counter = 0


# ---------------------------------------------------------------------------
# Hermitian embedding helpers
# ---------------------------------------------------------------------------

def real_embedding(x: np.ndarray) -> np.ndarray:
    """Real symmetric embedding [[Re, -Im], [Im, Re]] of a Hermitian matrix."""
    a, b = np.asarray(x).real, np.asarray(x).imag
    return np.block([[a, -b], [b, a]])


def trace_via_embedding(a: np.ndarray, x: np.ndarray) -> float:
    """Tr(a @ x) for Hermitian a, x computed through the real embedding.

    The embedding doubles traces, hence the factor 1/2.
    """
    return float(np.trace(real_embedding(a) @ real_embedding(x))) / 2.0


def svec(m: np.ndarray) -> np.ndarray:
    """Scaled upper-triangular vectorization (column-major, sqrt(2) off-diag)."""
    n = m.shape[0]
    out = np.empty(n * (n + 1) // 2)
    k = 0
    for c in range(n):
        for r in range(c + 1):
            out[k] = m[r, c] * (_SQRT2 if r < c else 1.0)
            k += 1
    return out


def unsvec(v: np.ndarray, n: int) -> np.ndarray:
    """Inverse of :func:`svec`."""
    m = np.empty((n, n))
    k = 0
    for c in range(n):
        for r in range(c + 1):
            val = v[k] / (_SQRT2 if r < c else 1.0)
            m[r, c] = val
            m[c, r] = val
            k += 1
    return m


def rsoc_contains(t: float, u: float, s: float, tol: float = 0.0) -> bool:
    """Membership test for the rotated-quadratic cone t*u >= s^2, t, u >= 0."""
    return t >= -tol and u >= -tol and t * u - s * s >= -tol


# ---------------------------------------------------------------------------
# Problem containers
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ConeBlock:
    kind: str  # "nonneg" | "rsoc" | "psd"
    dim: int  # number of slack rows in this block
    order: int = 0  # embedded (real) matrix order for psd blocks


@dataclass(frozen=True)
class ConicProblem:
    n_vars: int
    objective: np.ndarray
    a_matrix: sp.csc_matrix
    rhs: np.ndarray
    blocks: tuple

    def slacks(self, x: np.ndarray) -> np.ndarray:
        return self.rhs - self.a_matrix @ x


@dataclass
class ConicSolution:
    status: str  # "optimal" | "infeasible" | "unbounded" | "numerical-failure"
    x: np.ndarray | None
    objective: float
    dual: np.ndarray | None
    achieved_tolerance: float
    iterations: int = 0
    solve_time: float = 0.0
    solver_status: str = ""
    certificate: np.ndarray | None = None


# ---------------------------------------------------------------------------
# Linear expressions over the real decision vector
# ---------------------------------------------------------------------------

class LinExpr:
    """Sparse affine expression: sum(coeffs[i] * x[i]) + const."""

    __slots__ = ("coeffs", "const")

    def __init__(self, coeffs=None, const=0.0):
        self.coeffs = dict(coeffs) if coeffs else {}
        self.const = float(const)

    def copy(self):
        return LinExpr(self.coeffs, self.const)

    def __add__(self, other):
        out = self.copy()
        if isinstance(other, LinExpr):
            for i, v in other.coeffs.items():
                out.coeffs[i] = out.coeffs.get(i, 0.0) + v
            out.const += other.const
        else:
            out.const += float(other)
        return out

    __radd__ = __add__

    def __neg__(self):
        return LinExpr({i: -v for i, v in self.coeffs.items()}, -self.const)

    def __sub__(self, other):
        return self + (-other if isinstance(other, LinExpr) else -float(other))

    def __rsub__(self, other):
        return (-self) + float(other)

    def __mul__(self, scalar):
        s = float(scalar)
        return LinExpr({i: s * v for i, v in self.coeffs.items()}, s * self.const)

    __rmul__ = __mul__

    def value(self, x: np.ndarray) -> float:
        return self.const + sum(v * x[i] for i, v in self.coeffs.items())


def as_expr(obj) -> LinExpr:
    return obj if isinstance(obj, LinExpr) else LinExpr(const=float(obj))


# ---------------------------------------------------------------------------
# Hermitian matrix variables
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class HermitianVar:
    """Order-n complex Hermitian variable over n^2 real coordinates.

    Layout: n diagonal entries, then (Re, Im) pairs of the strict upper
    triangle in row-major (i, j) order.
    """

    base: int
    order: int

    def _pair_index(self, i: int, j: int) -> int:
        # strict upper triangle, row-major
        n = self.order
        return i * n - i * (i + 1) // 2 + (j - i - 1)

    def coord_diag(self, i: int) -> int:
        return self.base + i

    def coord_re(self, i: int, j: int) -> int:
        return self.base + self.order + 2 * self._pair_index(i, j)

    def coord_im(self, i: int, j: int) -> int:
        return self.base + self.order + 2 * self._pair_index(i, j) + 1

    @property
    def n_coords(self) -> int:
        return self.order * self.order

    def value(self, x: np.ndarray) -> np.ndarray:
        n = self.order
        out = np.zeros((n, n), dtype=complex)
        for i in range(n):
            out[i, i] = x[self.coord_diag(i)]
            for j in range(i + 1, n):
                z = x[self.coord_re(i, j)] + 1j * x[self.coord_im(i, j)]
                out[i, j] = z
                out[j, i] = np.conj(z)
        return out

    def trace_expr(self, c: np.ndarray) -> LinExpr:
        """Affine expression Tr(c @ X) for Hermitian coefficient c."""
        n = self.order
        coeffs = {}
        for i in range(n):
            v = float(np.real(c[i, i]))
            if v != 0.0:
                coeffs[self.coord_diag(i)] = v
            for j in range(i + 1, n):
                re, im = 2.0 * float(np.real(c[i, j])), 2.0 * float(np.imag(c[i, j]))
                if re != 0.0:
                    coeffs[self.coord_re(i, j)] = re
                if im != 0.0:
                    coeffs[self.coord_im(i, j)] = im
        return LinExpr(coeffs)


def _embedding_svec_rows(var: HermitianVar):
    """COO triplets mapping the variable's coordinates to svec(embedding) rows."""
    n = var.order
    m = 2 * n
    rows, cols, vals = [], [], []
    k = 0
    for c in range(m):
        for r in range(c + 1):
            scale = _SQRT2 if r < c else 1.0
            if r < n and c < n:
                i, j = (r, c) if r <= c else (c, r)
                idx = var.coord_diag(i) if i == j else var.coord_re(i, j)
                rows.append(k)
                cols.append(idx)
                vals.append(scale)
            elif r < n <= c:
                # upper-right block: -B[r, c-n] = -Im X[r, c-n] (antisymmetric B)
                i, j = r, c - n
                if i < j:
                    rows.append(k)
                    cols.append(var.coord_im(i, j))
                    vals.append(-scale)
                elif i > j:
                    rows.append(k)
                    cols.append(var.coord_im(j, i))
                    vals.append(scale)
                # i == j: zero entry
            else:
                # lower-right block: A[r-n, c-n]
                i, j = r - n, c - n
                ii, jj = (i, j) if i <= j else (j, i)
                idx = var.coord_diag(ii) if ii == jj else var.coord_re(ii, jj)
                rows.append(k)
                cols.append(idx)
                vals.append(scale)
            k += 1
    return rows, cols, vals, k


# ---------------------------------------------------------------------------
# Builder
# ---------------------------------------------------------------------------

class ProblemBuilder:
    """Accumulates variables, cone memberships and the objective."""

    def __init__(self):
        self._n_vars = 0
        self._objective = LinExpr()
        self._nonneg_rows: list[LinExpr] = []
        self._rsoc_blocks: list[tuple[LinExpr, LinExpr, LinExpr]] = []
        self._psd_vars: list[HermitianVar] = []

    def new_scalar(self, lower=None, upper=None) -> LinExpr:
        idx = self._n_vars
        self._n_vars += 1
        e = LinExpr({idx: 1.0})
        if lower is not None:
            self.add_nonneg(e - float(lower))
        if upper is not None:
            self.add_nonneg(float(upper) - e)
        return e

    def new_hermitian_psd(self, order: int) -> HermitianVar:
        var = HermitianVar(base=self._n_vars, order=order)
        self._n_vars += var.n_coords
        self._psd_vars.append(var)
        return var

    def add_nonneg(self, expr):
        """Constrain expr >= 0."""
        self._nonneg_rows.append(as_expr(expr))

    def add_rsoc(self, t, u, s):
        """Constrain t*u >= s^2 with t, u >= 0 (hyperbolic epigraph)."""
        self._rsoc_blocks.append((as_expr(t), as_expr(u), as_expr(s)))

    def minimize(self, expr):
        self._objective = as_expr(expr)

    def build(self) -> ConicProblem:
        n = self._n_vars
        rows, cols, vals = [], [], []
        rhs = []
        blocks = []
        row_ptr = 0

        def put_expr_row(expr: LinExpr, sign: float):
            # slack = rhs - A x must equal sign * expr(x)
            nonlocal row_ptr
            for i, v in expr.coeffs.items():
                rows.append(row_ptr)
                cols.append(i)
                vals.append(-sign * v)
            rhs.append(sign * expr.const)
            row_ptr += 1

        if self._nonneg_rows:
            for e in self._nonneg_rows:
                put_expr_row(e, 1.0)
            blocks.append(ConeBlock("nonneg", len(self._nonneg_rows)))

        for t, u, s in self._rsoc_blocks:
            put_expr_row(t, 1.0)
            put_expr_row(u, 1.0)
            put_expr_row(s, 1.0)
            blocks.append(ConeBlock("rsoc", 3))

        for var in self._psd_vars:
            r, c, v, dim = _embedding_svec_rows(var)
            for ri, ci, vi in zip(r, c, v):
                rows.append(row_ptr + ri)
                cols.append(ci)
                vals.append(-vi)
            rhs.extend([0.0] * dim)
            row_ptr += dim
            blocks.append(ConeBlock("psd", dim, order=2 * var.order))

        a = sp.coo_matrix((vals, (rows, cols)), shape=(row_ptr, n)).tocsc()
        c_obj = np.zeros(n)
        for i, v in self._objective.coeffs.items():
            c_obj[i] = v
        return ConicProblem(
            n_vars=n,
            objective=c_obj,
            a_matrix=a,
            rhs=np.asarray(rhs, float),
            blocks=tuple(blocks),
        )


# ---------------------------------------------------------------------------
# Solving
# ---------------------------------------------------------------------------

_RSOC_TO_SOC = np.array([[1.0, 1.0, 0.0], [1.0, -1.0, 0.0], [0.0, 0.0, 2.0]])


def _lower_to_clarabel(problem: ConicProblem):
    """Rewrite rsoc blocks as second-order cones; returns (A, b, cones)."""
    a = problem.a_matrix.tocsr()
    b = problem.rhs.copy()
    cones = []
    transform = sp.eye(a.shape[0], format="lil")
    row = 0
    for blk in problem.blocks:
        if blk.kind == "nonneg":
            cones.append(clarabel.NonnegativeConeT(blk.dim))
        elif blk.kind == "rsoc":
            transform[row : row + 3, row : row + 3] = _RSOC_TO_SOC
            cones.append(clarabel.SecondOrderConeT(3))
        elif blk.kind == "psd":
            assert blk.dim == blk.order * (blk.order + 1) // 2
            cones.append(clarabel.PSDTriangleConeT(blk.order))
        else:
            raise ValueError(f"unknown cone block {blk.kind!r}")
        row += blk.dim
    t = transform.tocsr()
    return (t @ a).tocsc(), t @ b, cones


def _measure_residuals(problem: ConicProblem, x: np.ndarray):
    """Worst cone violation of the returned point.

    Nonnegative rows are judged against their own right-hand-side scale;
    rotated-quadratic and PSD blocks against their slack magnitude.
    """
    s = problem.slacks(x)
    worst = 0.0
    row = 0
    for blk in problem.blocks:
        sl = s[row : row + blk.dim]
        if blk.kind == "nonneg":
            denom = 1.0 + np.abs(problem.rhs[row : row + blk.dim])
            worst = max(worst, float(np.max(-sl / denom, initial=0.0)))
        elif blk.kind == "rsoc":
            t, u, z = sl
            scale = 1.0 + abs(t) + abs(u) + abs(z)
            worst = max(worst, -t / scale, -u / scale, (z * z - t * u) / scale**2)
        else:
            w = np.linalg.eigvalsh(unsvec(sl, blk.order))
            worst = max(worst, float(-w[0]) / (1.0 + float(np.abs(sl).max(initial=0.0))))
        row += blk.dim
    return worst


def _dump_problem(problem: ConicProblem, path: str):
    coo = problem.a_matrix.tocoo()
    doc = {
        "format": "minimize objective.x subject to (rhs - A x) in cones; "
        "psd blocks are svec(upper triangular, column-major, sqrt2 off-diagonal) "
        "of real symmetric matrices",
        "n_vars": problem.n_vars,
        "objective": problem.objective.tolist(),
        "rhs": problem.rhs.tolist(),
        "blocks": [{"kind": b.kind, "dim": b.dim, "order": b.order} for b in problem.blocks],
        "a_rows": coo.row.tolist(),
        "a_cols": coo.col.tolist(),
        "a_vals": coo.data.tolist(),
    }
    with open(path, "w") as fh:
        json.dump(doc, fh)


_STATUS_MAP = {
    "Solved": "candidate",
    "AlmostSolved": "candidate",
    "PrimalInfeasible": "infeasible",
    "AlmostPrimalInfeasible": "infeasible",
    "DualInfeasible": "unbounded",
    "AlmostDualInfeasible": "unbounded",
}


def solve(
    problem: ConicProblem,
    tolerance: float = DEFAULT_TOL,
    accept_tolerance: float | None = None,
    dump_path: str | None = None,
) -> ConicSolution:
    """Solve the cone program; classify the outcome from measured residuals.

    The solver targets ``tolerance``; ``optimal`` is reported only when the
    returned point's worst relative cone violation and the relative duality
    gap are within ``accept_tolerance`` (defaults to ``tolerance``).  The
    measured value is always recorded in ``achieved_tolerance``.
    """
    global _dump_counter
    dump_dir = os.environ.get(DUMP_ENV_VAR)
    if dump_path is None and dump_dir:
        _dump_counter += 1
        dump_path = os.path.join(dump_dir, f"conic_{os.getpid()}_{_dump_counter:06d}.json")
    if dump_path:
        _dump_problem(problem, dump_path)

    a, b, cones = _lower_to_clarabel(problem)
    settings = clarabel.DefaultSettings()
    settings.verbose = False
    settings.max_threads = 1
    settings.tol_gap_abs = tolerance
    settings.tol_gap_rel = tolerance
    settings.tol_feas = tolerance
    p = sp.csc_matrix((problem.n_vars, problem.n_vars))
    solver = clarabel.DefaultSolver(p, problem.objective, a, b, cones, settings)
    sol = solver.solve()
    raw = str(sol.status)
    mapped = _STATUS_MAP.get(raw, "numerical-failure")

    x = np.asarray(sol.x, float)
    z = np.asarray(sol.z, float)
    if mapped == "infeasible":
        return ConicSolution(
            status="infeasible",
            x=None,
            objective=np.nan,
            dual=z,
            achieved_tolerance=np.inf,
            iterations=sol.iterations,
            solve_time=sol.solve_time,
            solver_status=raw,
            certificate=z,
        )
    if mapped == "unbounded":
        return ConicSolution(
            status="unbounded",
            x=x,
            objective=-np.inf,
            dual=None,
            achieved_tolerance=np.inf,
            iterations=sol.iterations,
            solve_time=sol.solve_time,
            solver_status=raw,
            certificate=x,
        )

    obj = float(problem.objective @ x)
    feas = _measure_residuals(problem, x)
    dual_obj = -float(b @ z)
    gap = abs(obj - dual_obj) / max(1.0, abs(obj), abs(dual_obj))
    achieved = max(feas, gap)
    accept = tolerance if accept_tolerance is None else accept_tolerance
    status = "optimal" if (mapped == "candidate" and achieved <= accept) else "numerical-failure"
    return ConicSolution(
        status=status,
        x=x,
        objective=obj,
        dual=z,
        achieved_tolerance=achieved,
        iterations=sol.iterations,
        solve_time=sol.solve_time,
        solver_status=raw,
    )
