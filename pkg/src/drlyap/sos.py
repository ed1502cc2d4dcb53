"""Sum-of-squares programs compiled to SDPs through Gram matrices.

A constraint ``p(x; theta) in SOS`` with p affine in the decision variables
theta becomes ``p = z(x)' Q z(x)``, Q PSD, for a half-degree monomial vector
z(x).  Coefficient matching gives one linear equality per monomial.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Hashable, Iterable, Mapping, Sequence

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp

from . import sdp
from .poly import Monomial, Polynomial, PolyVector, grlex_key, lie_derivative, monomial_basis

DEFAULT_TOL = 1e-6


class SosError(ValueError):
    pass


class InfeasibleProgramError(SosError):
    """The coefficient equalities alone are inconsistent."""


class NoCertificateError(SosError):
    pass


class ParamPolynomial:
    """``constant + sum_i theta_i * linear_i`` with polynomial parts."""

    __slots__ = ("constant", "linear")

    def __init__(self, constant: Polynomial, linear: Iterable[tuple[Hashable, Polynomial]] = ()):
        self.constant = constant
        merged: dict[Hashable, Polynomial] = {}
        for vid, p in linear:
            if p.n_vars != constant.n_vars:
                raise SosError("all parts of a ParamPolynomial must share n_vars")
            merged[vid] = merged[vid] + p if vid in merged else p
        self.linear = tuple((vid, p) for vid, p in merged.items() if not p.is_zero())

    @property
    def n_vars(self) -> int:
        return self.constant.n_vars

    @property
    def variable_ids(self) -> list[Hashable]:
        return [vid for vid, _ in self.linear]

    @classmethod
    def template(cls, n_vars: int, monomials: Sequence[Monomial], prefix: str = "c") -> ParamPolynomial:
        """Generic polynomial with one free coefficient per monomial."""
        return cls(Polynomial.zero(n_vars), [((prefix, m), Polynomial.monomial(m)) for m in monomials])

    def map(self, fn) -> ParamPolynomial:
        """Apply a linear map Polynomial -> Polynomial to every part."""
        return ParamPolynomial(fn(self.constant), [(vid, fn(p)) for vid, p in self.linear])

    def lie(self, field: PolyVector) -> ParamPolynomial:
        return self.map(lambda p: lie_derivative(p, field))

    def scale(self, a: float) -> ParamPolynomial:
        return self.map(lambda p: p.scale(a))

    def __neg__(self) -> ParamPolynomial:
        return self.scale(-1.0)

    def __add__(self, other) -> ParamPolynomial:
        if isinstance(other, Polynomial):
            return ParamPolynomial(self.constant + other, self.linear)
        if isinstance(other, ParamPolynomial):
            return ParamPolynomial(self.constant + other.constant, self.linear + other.linear)
        return NotImplemented

    def __sub__(self, other) -> ParamPolynomial:
        if isinstance(other, (Polynomial, ParamPolynomial)):
            return self + (-other)
        return NotImplemented

    def support(self) -> set[Monomial]:
        out = set(self.constant.terms)
        for _, p in self.linear:
            out |= set(p.terms)
        return out

    @property
    def degree(self) -> int:
        return max([self.constant.degree] + [p.degree for _, p in self.linear])

    def substitute(self, values: Mapping[Hashable, float]) -> Polynomial:
        out = self.constant
        for vid, p in self.linear:
            out = out + p.scale(values[vid])
        return out


@dataclass
class SosConstraint:
    poly: ParamPolynomial
    degree: int | None = None  # even bound on the total degree; derived when None
    name: str = ""

    def degree_bound(self) -> int:
        if self.degree is not None:
            return self.degree
        d = max(self.poly.degree, 0)
        return d + (d % 2)


@dataclass
class SosProgram:
    decision_vars: list[Hashable] = field(default_factory=list)
    sos_constraints: list[SosConstraint] = field(default_factory=list)
    # each entry: ({var id: coefficient}, rhs) meaning sum coef*theta = rhs
    linear_constraints: list[tuple[dict, float]] = field(default_factory=list)

    def add_sos(self, poly: ParamPolynomial, degree: int | None = None, name: str = "") -> None:
        for vid in poly.variable_ids:
            if vid not in self.decision_vars:
                self.decision_vars.append(vid)
        self.sos_constraints.append(SosConstraint(poly, degree, name))

    def validate(self) -> None:
        known = set(self.decision_vars)
        if len(known) != len(self.decision_vars):
            raise SosError("duplicate decision variable ids")
        for con in self.sos_constraints:
            missing = set(con.poly.variable_ids) - known
            if missing:
                raise SosError(f"constraint {con.name!r} references undeclared variables {sorted(map(str, missing))}")
        for coefs, _ in self.linear_constraints:
            missing = set(coefs) - known
            if missing:
                raise SosError(f"linear constraint references undeclared variables {sorted(map(str, missing))}")


@dataclass(frozen=True)
class GramCertificate:
    basis: tuple[Monomial, ...]
    gram: np.ndarray

    def __post_init__(self):
        g = np.asarray(self.gram, dtype=np.float64)
        if g.shape != (len(self.basis), len(self.basis)):
            raise SosError("Gram matrix dimension does not match the basis")
        object.__setattr__(self, "gram", 0.5 * (g + g.T))

    def expand(self) -> Polynomial:
        n = len(self.basis[0]) if self.basis else 0
        terms: dict[Monomial, float] = {}
        for i, a in enumerate(self.basis):
            for j, b in enumerate(self.basis):
                m = tuple(x + y for x, y in zip(a, b))
                terms[m] = terms.get(m, 0.0) + self.gram[i, j]
        return Polynomial(n, terms)

    def min_eigenvalue(self) -> float:
        return float(la.eigvalsh(self.gram).min()) if len(self.basis) else 0.0


@dataclass
class CompiledProgram:
    program: SosProgram
    sdp: sdp.SdpProblem
    bases: list[tuple[Monomial, ...]]
    var_index: dict[Hashable, int]
    row_monomials: list[tuple[int, Monomial]]  # (constraint index or -1, monomial) per equality row


def half_basis(poly: ParamPolynomial, degree_bound: int) -> list[Monomial]:
    """Half-degree basis with zero-diagonal pruning.

    A basis monomial z whose square z^2 cannot occur in the polynomial forces
    Q_zz = 0, hence its whole Gram row is zero for any PSD Q; it is dropped.
    """
    support = poly.support()
    full = monomial_basis(poly.n_vars, degree_bound // 2, include_constant=True)
    return [z for z in full if tuple(2 * e for e in z) in support]


def compile(program: SosProgram) -> CompiledProgram:  # noqa: A001 - mirrors the operation name
    program.validate()
    var_index = {vid: i for i, vid in enumerate(program.decision_vars)}
    nv = len(var_index)
    bases = []
    q_rows = []  # per PSD block: list of (monomial, {(i,j): count}, rhs, {var: coef})
    theta_rows = []  # rows with no Gram entries: (coef vector, rhs, tag)
    for ci, con in enumerate(program.sos_constraints):
        dbound = con.degree_bound()
        if dbound % 2:
            raise SosError(f"odd degree bound {dbound} for constraint {con.name!r}")
        if con.poly.degree > dbound:
            raise SosError(f"constraint {con.name!r} has degree {con.poly.degree} > bound {dbound}")
        basis = half_basis(con.poly, dbound)
        if not basis:
            raise SosError(f"empty basis for constraint {con.name!r}")
        bases.append(tuple(basis))
        gram_pos: dict[Monomial, list[tuple[int, int]]] = {}
        for i, a in enumerate(basis):
            for j, b in enumerate(basis):
                gram_pos.setdefault(tuple(x + y for x, y in zip(a, b)), []).append((i, j))
        monos = sorted(set(gram_pos) | con.poly.support(), key=grlex_key)
        rows = []
        for mono in monos:
            coefs = np.zeros(nv)
            for vid, p in con.poly.linear:
                coefs[var_index[vid]] = p.coeff(mono)
            rhs = con.poly.constant.coeff(mono)
            if mono in gram_pos:
                rows.append((mono, gram_pos[mono], rhs, coefs))
            else:
                theta_rows.append((coefs, rhs, (ci, mono)))
        q_rows.append(rows)
    for coefs_map, rhs in program.linear_constraints:
        coefs = np.zeros(nv)
        for vid, v in coefs_map.items():
            coefs[var_index[vid]] = -v  # rows read: -sum(coef * theta) = rhs
        theta_rows.append((coefs, rhs, (-1, ())))
    kept_theta = _independent_theta_rows(theta_rows, nv)

    # assemble SDP: one PSD block per constraint, then the split decision block
    n_rows = sum(len(r) for r in q_rows) + len(kept_theta)
    dims = [len(bs) for bs in bases] + ([-2 * nv] if nv else [])
    psd_data: list[list] = [[] for _ in bases]
    theta_mat = sp.lil_matrix((n_rows, 2 * nv)) if nv else None
    rhs_all = np.zeros(n_rows)
    row_monos = []
    r = 0
    for ci, rows in enumerate(q_rows):
        k = len(bases[ci])
        for mono, positions, rhs, coefs in rows:
            for i, j in positions:
                psd_data[ci].append((r, i * k + j, 1.0))
            # sum Q - sum theta * coef = rhs
            for v in np.flatnonzero(coefs):
                theta_mat[r, v] = -coefs[v]
                theta_mat[r, nv + v] = coefs[v]
            rhs_all[r] = rhs
            row_monos.append((ci, mono))
            r += 1
    for coefs, rhs, tag in kept_theta:
        for v in np.flatnonzero(coefs):
            theta_mat[r, v] = -coefs[v]
            theta_mat[r, nv + v] = coefs[v]
        rhs_all[r] = rhs
        row_monos.append(tag)
        r += 1
    a_blocks = []
    for ci, data in enumerate(psd_data):
        k = len(bases[ci])
        if data:
            rr, cc, vv = zip(*data)
        else:
            rr, cc, vv = (), (), ()
        a_blocks.append(sp.csr_matrix((vv, (rr, cc)), shape=(n_rows, k * k)))
    c_blocks = [np.zeros((len(bs), len(bs))) for bs in bases]
    if nv:
        a_blocks.append(theta_mat.tocsr())
        c_blocks.append(np.zeros(2 * nv))
    problem = sdp.SdpProblem(dims, c_blocks, a_blocks, rhs_all)
    return CompiledProgram(program, problem, bases, var_index, row_monos)


def _independent_theta_rows(rows, nv, tol=1e-10):
    """Drop linearly dependent decision-only rows; raise if they are inconsistent."""
    nonzero = []
    for coefs, rhs, tag in rows:
        if not np.any(coefs):
            if abs(rhs) > tol:
                raise InfeasibleProgramError(f"monomial {tag[1]} of constraint {tag[0]} cannot be matched")
            continue
        nonzero.append((coefs, rhs, tag))
    if not nonzero:
        return []
    a = np.array([c for c, _, _ in nonzero])
    b = np.array([v for _, v, _ in nonzero])
    _, rr, piv = la.qr(a.T, pivoting=True, mode="economic")
    diag = np.abs(np.diag(rr))
    rank = int(np.sum(diag > tol * max(1.0, diag.max(initial=0.0))))
    keep = sorted(piv[:rank])
    sol, *_ = la.lstsq(a[keep], b[keep])
    if np.abs(a @ sol - b).max() > 1e-8 * max(1.0, np.abs(b).max()):
        raise InfeasibleProgramError("decision-variable equalities are inconsistent")
    return [nonzero[i] for i in keep]


def extract_certificates(compiled: CompiledProgram, solution: sdp.SdpSolution):
    """Decision values and one Gram certificate per SOS constraint."""
    if solution.status != sdp.Status.OPTIMAL:
        raise NoCertificateError(f"no certificate: solver status {solution.status.value}")
    nv = len(compiled.var_index)
    values = {}
    if nv:
        split = solution.x[len(compiled.bases)]
        theta = split[:nv] - split[nv:]
        values = {vid: float(theta[i]) for vid, i in compiled.var_index.items()}
    certs = [GramCertificate(basis, solution.x[i].copy()) for i, basis in enumerate(compiled.bases)]
    return values, certs


@dataclass
class Verdict:
    ok: bool
    max_coefficient_error: float
    worst_monomial: Monomial | None
    min_eigenvalue: float

    def __bool__(self) -> bool:
        return self.ok


def verify_certificate(p: Polynomial, cert: GramCertificate, tol: float = DEFAULT_TOL) -> Verdict:
    expanded = cert.expand() if cert.basis else Polynomial.zero(p.n_vars)
    worst, err = None, 0.0
    for mono in set(p.terms) | set(expanded.terms):
        e = abs(p.coeff(mono) - expanded.coeff(mono))
        if e > err:
            worst, err = mono, e
    lam = cert.min_eigenvalue()
    return Verdict(err <= tol and lam >= -tol, err, worst, lam)


@dataclass
class SosSolveResult:
    feasible: bool
    margin: float
    values: dict
    certificates: list[GramCertificate]
    solution: sdp.SdpSolution | None
    compiled: CompiledProgram | None
    message: str = ""

    def constraint_polynomials(self) -> list[Polynomial]:
        return [c.poly.substitute(self.values) for c in self.compiled.program.sos_constraints]


def solve_program(
    program: SosProgram,
    config: sdp.SolverConfig | None = None,
    threshold: float = sdp.DEFAULT_MARGIN_THRESHOLD,
) -> SosSolveResult:
    """Compile, maximise the Gram eigenvalue margin, and extract certificates."""
    try:
        compiled = compile(program)
    except InfeasibleProgramError as exc:
        return SosSolveResult(False, -np.inf, {}, [], None, None, str(exc))
    t, sol, feasible = sdp.feasibility_margin(compiled.sdp, config, threshold)
    if not feasible:
        return SosSolveResult(False, t, {}, [], sol, compiled, f"margin {t:.3g}, status {sol.status.value}")
    values, certs = extract_certificates(compiled, sol)
    return SosSolveResult(True, t, values, certs, sol, compiled)
