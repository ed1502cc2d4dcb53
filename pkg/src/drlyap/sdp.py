"""Small dense semidefinite programs.

Problems are in primal standard form::

    minimize    sum_b <C_b, X_b>
    subject to  sum_b <A_ib, X_b> = b_i      i = 1..m
                X_b PSD  (dim > 0)  or  X_b >= 0 elementwise (dim < 0, diagonal block)

with dual ``maximize b'y  s.t.  C_b - sum_i y_i A_ib = S_b`` in the same cones.
The bundled solver is an infeasible-start primal-dual path-following method
with Nesterov-Todd scaling and a Mehrotra predictor-corrector step.
"""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Sequence

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp

logger = logging.getLogger(__name__)

STEP_FRACTION = 0.98
DIVERGENCE_LIMIT = 1e8
SYMMETRY_TOL = 1e-12


class SdpError(ValueError):
    pass


class Status(str, enum.Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"
    MAX_ITERATIONS = "max-iterations"
    NUMERICAL_FAILURE = "numerical-failure"


@dataclass(frozen=True)
class SolverConfig:
    max_iterations: int = 200
    feasibility_tol: float = 1e-8
    gap_tol: float = 1e-8
    initial_scaling: float = 1.0

    def __post_init__(self):
        if self.feasibility_tol <= 0 or self.gap_tol <= 0:
            raise SdpError("tolerances must be positive")
        if self.max_iterations < 1 or self.initial_scaling <= 0:
            raise SdpError("max_iterations and initial_scaling must be positive")


class SdpProblem:
    """Block-structured SDP in primal standard form.

    ``block_dims`` uses the SDPA convention: a positive entry k is a k x k PSD
    block, a negative entry -k is a diagonal block of k nonnegative scalars.
    Objective and constraint data for a PSD block are k x k symmetric
    matrices; for a diagonal block they are length-k vectors.
    Constraint data is stored per block as a sparse (m, k*k) or (m, k) matrix
    whose row i is the row-major flattening of A_ib.
    """

    def __init__(self, block_dims: Sequence[int], c: Sequence[np.ndarray], a: Sequence, b: Sequence[float]):
        self.block_dims = tuple(int(d) for d in block_dims)
        if not self.block_dims or any(d == 0 for d in self.block_dims):
            raise SdpError("block dimensions must be nonzero")
        self.b = np.asarray(b, dtype=np.float64).ravel()
        m = self.b.size
        if len(c) != len(self.block_dims) or len(a) != len(self.block_dims):
            raise SdpError("need one objective and one constraint matrix per block")
        cs, as_ = [], []
        for k, cb, ab in zip(self.block_dims, c, a):
            cb = np.asarray(cb, dtype=np.float64)
            ab = sp.csr_matrix(ab, dtype=np.float64)
            size = k * k if k > 0 else -k
            if k > 0:
                if cb.shape != (k, k):
                    raise SdpError(f"objective block has shape {cb.shape}, expected {(k, k)}")
                if np.abs(cb - cb.T).max(initial=0.0) > SYMMETRY_TOL:
                    raise SdpError("objective block is not symmetric")
            elif cb.shape != (-k,):
                raise SdpError(f"diagonal objective block has shape {cb.shape}, expected {(-k,)}")
            if ab.shape != (m, size):
                raise SdpError(f"constraint block has shape {ab.shape}, expected {(m, size)}")
            if k > 0 and ab.nnz:
                # row-major flattening: transpose of A_ib is the index permutation below
                perm = np.arange(k * k).reshape(k, k).T.ravel()
                if abs(ab - ab[:, perm]).max() > SYMMETRY_TOL:
                    raise SdpError("constraint matrix is not symmetric")
            cs.append(cb)
            as_.append(ab)
        self.c = tuple(cs)
        self.a = tuple(as_)
        row_nnz = np.zeros(m)
        for ab in self.a:
            row_nnz += np.abs(ab).sum(axis=1).A1
        if m and np.any(row_nnz == 0):
            raise SdpError(f"equality rows {np.flatnonzero(row_nnz == 0).tolist()} are all-zero")

    @property
    def n_constraints(self) -> int:
        return self.b.size

    @property
    def barrier_dim(self) -> int:
        return sum(abs(d) for d in self.block_dims)

    @classmethod
    def from_dense(cls, block_dims, c, constraints) -> SdpProblem:
        """Build from ``constraints = [(per-block matrices or None, rhs), ...]``."""
        rows: list[list] = [[] for _ in block_dims]
        rhs = []
        for mats, bi in constraints:
            for j, k in enumerate(block_dims):
                mat = None if mats is None else mats[j]
                size = k * k if k > 0 else -k
                rows[j].append(np.zeros(size) if mat is None else np.asarray(mat, dtype=float).ravel())
            rhs.append(bi)
        m = len(rhs)
        a = [
            sp.csr_matrix(np.array(r).reshape(m, k * k if k > 0 else -k)) for r, k in zip(rows, block_dims)
        ]
        return cls(block_dims, c, a, rhs)

    def layout_signature(self) -> tuple:
        """Hashable summary used to compare problem layouts bit-for-bit."""
        parts = [self.block_dims, self.b.tobytes()]
        for cb, ab in zip(self.c, self.a):
            ab = ab.tocsr()
            ab.sort_indices()
            parts += [cb.tobytes(), ab.indptr.tobytes(), ab.indices.tobytes(), ab.data.tobytes()]
        return tuple(parts)

    def to_sdpa(self) -> str:
        """Serialize in SDPA sparse format.

        SDPA solves ``min c'x s.t. sum F_i x_i - F_0 PSD`` whose dual is
        ``max <F_0, Y> s.t. <F_i, Y> = c_i``.  We write F_0 = -C, F_i = A_i,
        c = b, so the SDPA dual is our primal with negated objective.
        Entries are 1-based ``matno blkno i j value`` with i <= j.
        """
        lines = [
            f"{self.n_constraints} = mDIM",
            f"{len(self.block_dims)} = nBLOCK",
            " ".join(str(d) for d in self.block_dims) + " = bLOCKsTRUCT",
            "{" + ", ".join(repr(float(v)) for v in self.b) + "}",
        ]

        def entries(matno, blk, k, flat):
            flat = np.asarray(flat).ravel()
            if k > 0:
                mat = flat.reshape(k, k)
                for i in range(k):
                    for j in range(i, k):
                        if mat[i, j] != 0.0:
                            lines.append(f"{matno} {blk} {i + 1} {j + 1} {float(mat[i, j])!r}")
            else:
                for i in np.flatnonzero(flat):
                    lines.append(f"{matno} {blk} {i + 1} {i + 1} {float(flat[i])!r}")

        for blk, (k, cb) in enumerate(zip(self.block_dims, self.c), start=1):
            entries(0, blk, k, -cb)
        for i in range(self.n_constraints):
            for blk, (k, ab) in enumerate(zip(self.block_dims, self.a), start=1):
                row = ab.getrow(i)
                if row.nnz:
                    entries(i + 1, blk, k, row.toarray())
        return "\n".join(lines) + "\n"

    @classmethod
    def from_sdpa(cls, text: str) -> SdpProblem:
        body = [ln.split('"')[0].split("*")[0].strip() for ln in text.splitlines()]
        body = [ln for ln in body if ln]
        m = int(body[0].split("=")[0].split()[0])
        nblock = int(body[1].split("=")[0].split()[0])
        dims = [int(t) for t in body[2].split("=")[0].replace(",", " ").replace("{", " ").replace("}", " ").split()][
            :nblock
        ]
        b = [float(t) for t in body[3].replace(",", " ").replace("{", " ").replace("}", " ").split()][:m]
        c = [np.zeros((k, k)) if k > 0 else np.zeros(-k) for k in dims]
        a = [sp.lil_matrix((m, k * k if k > 0 else -k)) for k in dims]
        for ln in body[4:]:
            matno, blk, i, j = (int(t) for t in ln.split()[:4])
            val = float(ln.split()[4])
            k = dims[blk - 1]
            i, j = i - 1, j - 1
            if matno == 0:
                if k > 0:
                    c[blk - 1][i, j] = c[blk - 1][j, i] = -val
                else:
                    c[blk - 1][i] = -val
            else:
                if k > 0:
                    a[blk - 1][matno - 1, i * k + j] = val
                    a[blk - 1][matno - 1, j * k + i] = val
                else:
                    a[blk - 1][matno - 1, i] = val
        return cls(dims, c, [x.tocsr() for x in a], b)


@dataclass
class SdpSolution:
    x: list[np.ndarray]
    y: np.ndarray
    s: list[np.ndarray]
    status: Status
    primal_residual: float
    dual_residual: float
    primal_objective: float
    dual_objective: float
    iterations: int
    infeasibility_flag: bool = False
    history: list[dict] = field(default_factory=list, repr=False)

    @property
    def gap(self) -> float:
        return abs(self.primal_objective - self.dual_objective)

    @property
    def is_optimal(self) -> bool:
        return self.status == Status.OPTIMAL


# ---------------------------------------------------------------------------
# bundled solver


class _Block:
    """Per-block constraint data restricted to the rows that touch it."""

    def __init__(self, dim, c, a):
        self.dim = dim
        self.k = abs(dim)
        self.psd = dim > 0
        self.c = c
        a = a.tocsc().tocsr()
        self.rows = np.flatnonzero(np.diff(a.indptr))
        self.dense = a[self.rows].toarray()

    def apply(self, x, out):
        if self.rows.size:
            out[self.rows] += self.dense @ x.ravel()

    def adjoint(self, y):
        v = self.dense.T @ y[self.rows] if self.rows.size else np.zeros(self.k * self.k if self.psd else self.k)
        return v.reshape(self.k, self.k) if self.psd else v


def _sym(m):
    return 0.5 * (m + m.T)


def _max_step_psd(x, dx):
    try:
        lx = la.cholesky(x, lower=True)
    except la.LinAlgError:
        return 0.0
    t = la.solve_triangular(lx, dx, lower=True)
    t = la.solve_triangular(lx, t.T, lower=True)
    lam = la.eigvalsh(_sym(t)).min()
    return np.inf if lam >= 0 else -1.0 / lam


def _max_step_diag(x, dx):
    neg = dx < 0
    if not np.any(neg):
        return np.inf
    return float(np.min(-x[neg] / dx[neg]))


class _Scaling:
    """Nesterov-Todd scaling point for one block."""

    def __init__(self, blk: _Block, x, s):
        self.psd = blk.psd
        if blk.psd:
            lx = la.cholesky(x, lower=True)
            ls = la.cholesky(s, lower=True)
            u, d, vt = la.svd(ls.T @ lx)
            rd = np.sqrt(d)
            self.g = (lx @ vt.T) / rd
            self.ginv = (u.T @ ls.T) / rd[:, None]
            self.w = self.g @ self.g.T
            self.lam = d
        else:
            self.w2 = x / s
            self.g2 = np.sqrt(self.w2)
            self.lam = np.sqrt(x * s)

    def wzw(self, z):
        return self.w @ z @ self.w if self.psd else self.w2 * z

    def scaled(self, dx, ds):
        if self.psd:
            return self.ginv @ dx @ self.ginv.T, self.g.T @ ds @ self.g
        return dx / self.g2, ds * self.g2

    def complementarity_rhs(self, target, second_order=None):
        """Unscaled R_c for the target sigma*mu and optional second-order term."""
        lam = self.lam
        if self.psd:
            r = -second_order if second_order is not None else np.zeros((lam.size, lam.size))
            r[np.diag_indices_from(r)] += target - lam**2
            rt = 2.0 * r / (lam[:, None] + lam[None, :])
            return _sym(self.g @ rt @ self.g.T)
        r = target - lam**2
        if second_order is not None:
            r = r - second_order
        return self.g2 * (r / lam)


def _inner(blk, u, v):
    return float(np.sum(u * v))


def _solve_builtin(problem: SdpProblem, config: SolverConfig) -> SdpSolution:
    blocks = [_Block(d, c, a) for d, c, a in zip(problem.block_dims, problem.c, problem.a)]
    b = problem.b
    m = b.size
    nu = problem.barrier_dim
    b_scale = max(1.0, np.abs(b).max(initial=0.0))
    c_scale = max(1.0, max(np.abs(blk.c).max(initial=0.0) for blk in blocks))

    # SDPT3-style initial point
    a_norms = np.zeros(m)
    for blk in blocks:
        if blk.rows.size:
            a_norms[blk.rows] += np.sum(blk.dense**2, axis=1)
    a_norms = np.sqrt(a_norms)
    xi0 = max(10.0, np.sqrt(nu), float(np.max((1.0 + np.abs(b)) / (1.0 + a_norms), initial=0.0)))
    eta0 = max(10.0, np.sqrt(nu), c_scale, float(a_norms.max(initial=0.0)))
    xi0 *= config.initial_scaling
    eta0 *= config.initial_scaling
    X = [xi0 * np.eye(blk.k) if blk.psd else np.full(blk.k, xi0) for blk in blocks]
    S = [eta0 * np.eye(blk.k) if blk.psd else np.full(blk.k, eta0) for blk in blocks]
    y = np.zeros(m)

    def a_op(mats):
        out = np.zeros(m)
        for blk, x in zip(blocks, mats):
            blk.apply(x, out)
        return out

    n_diag = sum(blk.k for blk in blocks if not blk.psd)
    if n_diag:
        b_diag = np.zeros((m, n_diag))
        offset = 0
        for blk in blocks:
            if not blk.psd:
                if blk.rows.size:
                    b_diag[blk.rows, offset : offset + blk.k] = blk.dense
                offset += blk.k

    history = []
    status = Status.MAX_ITERATIONS
    pres = dres = np.inf
    pobj = dobj = np.nan
    stall = 0
    it = 0
    infeasible_flag = False
    for it in range(config.max_iterations + 1):
        rp = b - a_op(X)
        aty = [blk.adjoint(y) for blk in blocks]
        rd = [blk.c - s - at for blk, s, at in zip(blocks, S, aty)]
        pobj = sum(_inner(blk, blk.c, x) for blk, x in zip(blocks, X))
        dobj = float(b @ y)
        comp = sum(_inner(blk, x, s) for blk, x, s in zip(blocks, X, S))
        mu = comp / nu
        pres = float(np.abs(rp).max(initial=0.0))
        dres = max(float(np.abs(r).max(initial=0.0)) for r in rd)
        gap = abs(pobj - dobj)
        history.append(dict(iteration=it, pobj=pobj, dobj=dobj, pres=pres, dres=dres, mu=mu))
        obj_scale = max(1.0, abs(pobj), abs(dobj))
        if (
            pres <= config.feasibility_tol * b_scale
            and dres <= config.feasibility_tol * c_scale
            and gap <= config.gap_tol * obj_scale
            and comp <= config.gap_tol * obj_scale
        ):
            status = Status.OPTIMAL
            break
        if dobj > DIVERGENCE_LIMIT and dres <= 1e-3 * max(1.0, dobj) ** 0.5:
            status = Status.INFEASIBLE
            infeasible_flag = True
            break
        if -pobj > DIVERGENCE_LIMIT and pres <= 1e-3 * max(1.0, -pobj) ** 0.5:
            status = Status.UNBOUNDED
            break
        if it == config.max_iterations:
            break

        try:
            scal = [_Scaling(blk, x, s) for blk, x, s in zip(blocks, X, S)]
        except (la.LinAlgError, FloatingPointError):
            status = Status.NUMERICAL_FAILURE
            break

        # Newton system.  PSD blocks enter through the Schur complement
        # M_ij = sum_b <A_ib, W A_jb W>; entries of diagonal blocks stay as
        # explicit unknowns, which keeps the system well conditioned when a
        # split free variable sits in the interior with vanishing dual.
        M = np.zeros((m, m))
        for blk, sc in zip(blocks, scal):
            if blk.psd and blk.rows.size:
                a3 = blk.dense.reshape(-1, blk.k, blk.k)
                waw = (sc.w @ a3 @ sc.w).reshape(blk.rows.size, -1)
                M[np.ix_(blk.rows, blk.rows)] += blk.dense @ waw.T
        M = _sym(M)
        if n_diag:
            K = np.zeros((m + n_diag, m + n_diag))
            K[:m, :m] = M
            K[:m, m:] = b_diag
            K[m:, :m] = b_diag.T
            inv_w = np.concatenate([1.0 / sc.w2 for blk, sc in zip(blocks, scal) if not blk.psd])
            K[m:, m:] = -np.diag(inv_w)
        else:
            K = M
        if not np.all(np.isfinite(K)):
            status = Status.NUMERICAL_FAILURE
            break
        try:
            if n_diag:
                lu = la.lu_factor(K, check_finite=False)
                solve_k = lambda r: la.lu_solve(lu, r, check_finite=False)  # noqa: E731
            else:
                factor = la.cho_factor(K, lower=True, check_finite=False)
                solve_k = lambda r: la.cho_solve(factor, r, check_finite=False)  # noqa: E731
        except (la.LinAlgError, ValueError):
            reg = 1e-12 * max(1.0, np.abs(np.diag(M)).max(initial=0.0))
            lu = la.lu_factor(K + reg * np.eye(K.shape[0]), check_finite=False)
            solve_k = lambda r: la.lu_solve(lu, r, check_finite=False)  # noqa: E731
        wrdw = a_op([sc.wzw(r) if blk.psd else np.zeros(blk.k) for blk, sc, r in zip(blocks, scal, rd)])
        rd_diag = np.concatenate([r for blk, r in zip(blocks, rd) if not blk.psd]) if n_diag else None

        def direction(rc):
            rc_psd = [r if blk.psd else np.zeros(blk.k) for blk, r in zip(blocks, rc)]
            rhs = rp - a_op(rc_psd) + wrdw
            if n_diag:
                rc_diag = np.concatenate([r for blk, r in zip(blocks, rc) if not blk.psd])
                sol = solve_k(np.concatenate([rhs, rd_diag - rc_diag * inv_w]))
                dy = sol[:m]
            else:
                dy = solve_k(rhs)
            if not np.all(np.isfinite(dy)):
                raise FloatingPointError("non-finite search direction")
            ds = [r - blk.adjoint(dy) for blk, r in zip(blocks, rd)]
            dx = []
            offset = m
            for blk, sc, r, d in zip(blocks, scal, rc, ds):
                if blk.psd:
                    dx.append(_sym(r - sc.wzw(d)))
                else:
                    dx.append(sol[offset : offset + blk.k].copy())
                    offset += blk.k
            return dx, dy, ds

        def step_lengths(dx, ds):
            ap = min(
                (_max_step_psd(x, d) if blk.psd else _max_step_diag(x, d)) for blk, x, d in zip(blocks, X, dx)
            )
            ad = min(
                (_max_step_psd(s, d) if blk.psd else _max_step_diag(s, d)) for blk, s, d in zip(blocks, S, ds)
            )
            return min(1.0, STEP_FRACTION * ap), min(1.0, STEP_FRACTION * ad)

        try:
            # predictor
            rc_aff = [sc.complementarity_rhs(0.0) for sc in scal]
            dx_a, dy_a, ds_a = direction(rc_aff)
            ap, ad = step_lengths(dx_a, ds_a)
            comp_aff = sum(
                _inner(blk, x + ap * dx, s + ad * ds) for blk, x, s, dx, ds in zip(blocks, X, S, dx_a, ds_a)
            )
            sigma = min(1.0, max(0.0, comp_aff / comp)) ** 3
            # corrector
            rc = []
            for sc, dx, ds in zip(scal, dx_a, ds_a):
                tx, ts = sc.scaled(dx, ds)
                so = _sym(tx @ ts) if sc.psd else tx * ts
                rc.append(sc.complementarity_rhs(sigma * mu, so))
            dx, dy, ds = direction(rc)
            ap, ad = step_lengths(dx, ds)
        except (la.LinAlgError, FloatingPointError, ValueError) as exc:
            logger.debug("sdp: numerical breakdown at iteration %d: %s", it, exc)
            status = Status.NUMERICAL_FAILURE
            break

        X = [x + ap * d for x, d in zip(X, dx)]
        S = [s + ad * d for s, d in zip(S, ds)]
        y = y + ad * dy
        if max(ap, ad) < 1e-10:
            stall += 1
            if stall >= 3:
                status = Status.NUMERICAL_FAILURE
                break
        else:
            stall = 0

    return SdpSolution(
        x=X,
        y=y,
        s=S,
        status=status,
        primal_residual=pres,
        dual_residual=dres,
        primal_objective=pobj,
        dual_objective=dobj,
        iterations=it,
        infeasibility_flag=infeasible_flag,
        history=history,
    )


SdpBackend = Callable[[SdpProblem, SolverConfig], SdpSolution]

_BACKENDS: dict[str, SdpBackend] = {"builtin": _solve_builtin}


def register_backend(name: str, backend: SdpBackend) -> None:
    """Make an external solver available to :func:`solve` under ``name``."""
    _BACKENDS[name] = backend


def solve(problem: SdpProblem, config: SolverConfig | None = None, backend: str = "builtin") -> SdpSolution:
    try:
        fn = _BACKENDS[backend]
    except KeyError:
        raise SdpError(f"unknown SDP backend {backend!r}") from None
    return fn(problem, config or SolverConfig())


# ---------------------------------------------------------------------------
# feasibility margin


class MarginResult(NamedTuple):
    t: float
    solution: SdpSolution
    feasible: bool


DEFAULT_MARGIN_THRESHOLD = 1e-7
BUDGET_PER_DIM = 10.0


def margin_problem(problem: SdpProblem, budget: float | None = None) -> SdpProblem:
    """Rewrite ``problem`` as ``max t s.t. X_b - t I PSD`` over its PSD blocks.

    With ``X_b = Y_b + t I`` the new variables are the Y_b, the original
    diagonal blocks, and one extra diagonal block ``[t+, t-, slack]``.  A
    trace budget ``sum tr(Y_b) + sum(diag) + slack = budget`` keeps the
    feasible set bounded when the equalities are invariant under scaling.
    """
    m = problem.n_constraints
    if budget is None:
        budget = BUDGET_PER_DIM * (problem.barrier_dim + 2) * max(1.0, np.abs(problem.b).max(initial=0.0))
    t_col = np.zeros(m)
    new_a = []
    budget_rows = []
    for k, ab in zip(problem.block_dims, problem.a):
        if k > 0:
            diag_idx = np.arange(k) * (k + 1)
            t_col += ab[:, diag_idx].sum(axis=1).A1
            budget_rows.append(sp.csr_matrix(np.eye(k).ravel()[None, :]))
        else:
            budget_rows.append(sp.csr_matrix(np.ones((1, -k))))
        new_a.append(sp.vstack([ab, budget_rows[-1]]).tocsr())
    extra = sp.csr_matrix(np.vstack([np.column_stack([t_col, -t_col, np.zeros(m)]), [[1.0, 1.0, 1.0]]]))
    dims = list(problem.block_dims) + [-3]
    c = [np.zeros_like(cb) for cb in problem.c] + [np.array([-1.0, 1.0, 0.0])]
    return SdpProblem(dims, c, new_a + [extra], np.append(problem.b, budget))


def feasibility_margin(
    problem: SdpProblem,
    config: SolverConfig | None = None,
    threshold: float = DEFAULT_MARGIN_THRESHOLD,
    budget: float | None = None,
    backend: str = "builtin",
) -> MarginResult:
    """Largest uniform eigenvalue margin t over the PSD blocks.

    The returned solution is expressed in the variables of ``problem``
    (``X_b = Y_b + t I``).  Feasible iff the solve is optimal and t > threshold.
    """
    if any(np.any(cb != 0) for cb in problem.c):
        raise SdpError("feasibility_margin expects a problem without objective")
    aug = margin_problem(problem, budget)
    sol = solve(aug, config, backend)
    tvec = sol.x[-1]
    t = float(tvec[0] - tvec[1])
    xs = []
    for k, x in zip(problem.block_dims, sol.x[:-1]):
        xs.append(x + t * np.eye(k) if k > 0 else x.copy())
    inner = SdpSolution(
        x=xs,
        y=sol.y[:-1].copy(),
        s=sol.s[:-1],
        status=sol.status,
        primal_residual=float(np.abs(problem.b - _apply(problem, xs)).max(initial=0.0)),
        dual_residual=sol.dual_residual,
        primal_objective=0.0,
        dual_objective=float(problem.b @ sol.y[:-1]),
        iterations=sol.iterations,
        infeasibility_flag=sol.infeasibility_flag,
        history=sol.history,
    )
    if sol.status == Status.INFEASIBLE:
        t = -np.inf
    feasible = sol.status == Status.OPTIMAL and t > threshold
    return MarginResult(t, inner, feasible)


def _apply(problem: SdpProblem, xs) -> np.ndarray:
    out = np.zeros(problem.n_constraints)
    for ab, x in zip(problem.a, xs):
        out += ab @ np.asarray(x).ravel()
    return out


def kkt_residuals(problem: SdpProblem, sol: SdpSolution) -> dict:
    """Independent recomputation of primal/dual residuals, gap and cone violation."""
    rp = problem.b - _apply(problem, sol.x)
    dres = 0.0
    min_eig_x = min_eig_s = np.inf
    for k, cb, ab, x, s in zip(problem.block_dims, problem.c, problem.a, sol.x, sol.s):
        aty = ab.T @ sol.y
        if k > 0:
            r = cb - s - aty.reshape(k, k)
            min_eig_x = min(min_eig_x, la.eigvalsh(_sym(x)).min())
            min_eig_s = min(min_eig_s, la.eigvalsh(_sym(s)).min())
        else:
            r = cb - s - aty
            min_eig_x = min(min_eig_x, x.min())
            min_eig_s = min(min_eig_s, s.min())
        dres = max(dres, float(np.abs(r).max(initial=0.0)))
    pobj = sum(float(np.sum(cb * x)) for cb, x in zip(problem.c, sol.x))
    dobj = float(problem.b @ sol.y)
    return dict(
        primal=float(np.abs(rp).max(initial=0.0)),
        dual=dres,
        gap=abs(pobj - dobj),
        min_eig_x=float(min_eig_x),
        min_eig_s=float(min_eig_s),
    )
