"""Sparse multivariate polynomials with float coefficients.

Monomials are exponent tuples.  The canonical order everywhere is graded
lexicographic with x1 > x2 > ... > xn, see :func:`grlex_key`.
"""

from __future__ import annotations

from itertools import combinations_with_replacement
from typing import Iterable, Mapping, Sequence

import numpy as np

from . import kernels

Monomial = tuple[int, ...]


class ArityError(ValueError):
    """Raised when variable counts or vector lengths disagree."""


def grlex_key(mono: Monomial) -> tuple:
    return (sum(mono), tuple(-e for e in mono))


def degree(mono: Monomial) -> int:
    return sum(mono)


def monomial_basis(n_vars: int, max_degree: int, include_constant: bool = True) -> list[Monomial]:
    """All monomials in ``n_vars`` variables of degree <= ``max_degree``, grlex order."""
    out = []
    for deg in range(0 if include_constant else 1, max_degree + 1):
        for combo in combinations_with_replacement(range(n_vars), deg):
            exps = [0] * n_vars
            for i in combo:
                exps[i] += 1
            out.append(tuple(exps))
    # combinations_with_replacement already yields descending-lex order per degree
    out.sort(key=grlex_key)
    return out


class Polynomial:
    """Immutable sparse polynomial ``sum c_a x^a``.

    Terms with coefficient exactly 0.0 are never stored.
    """

    __slots__ = ("_n", "_terms", "_table")

    def __init__(self, n_vars: int, terms: Mapping[Sequence[int], float] | None = None):
        if n_vars < 0:
            raise ValueError("n_vars must be non-negative")
        self._n = int(n_vars)
        clean: dict[Monomial, float] = {}
        for mono, c in (terms or {}).items():
            mono = tuple(int(e) for e in mono)
            if len(mono) != self._n:
                raise ArityError(f"arity: monomial {mono} has length {len(mono)}, expected {self._n}")
            if any(e < 0 for e in mono):
                raise ValueError(f"negative exponent in {mono}")
            c = clean.get(mono, 0.0) + float(c)
            clean[mono] = c
        self._terms = {k: v for k, v in clean.items() if v != 0.0}
        self._table = None

    # construction helpers
    @classmethod
    def zero(cls, n_vars: int) -> Polynomial:
        return cls(n_vars)

    @classmethod
    def constant(cls, n_vars: int, c: float) -> Polynomial:
        return cls(n_vars, {(0,) * n_vars: c})

    @classmethod
    def variable(cls, n_vars: int, i: int) -> Polynomial:
        exps = [0] * n_vars
        exps[i] = 1
        return cls(n_vars, {tuple(exps): 1.0})

    @classmethod
    def monomial(cls, mono: Sequence[int], coeff: float = 1.0) -> Polynomial:
        return cls(len(mono), {tuple(mono): coeff})

    @property
    def n_vars(self) -> int:
        return self._n

    @property
    def terms(self) -> dict[Monomial, float]:
        return dict(self._terms)

    def items(self) -> list[tuple[Monomial, float]]:
        """Terms in grlex order."""
        return sorted(self._terms.items(), key=lambda kv: grlex_key(kv[0]))

    def monomials(self) -> list[Monomial]:
        return [m for m, _ in self.items()]

    def coeff(self, mono: Sequence[int]) -> float:
        return self._terms.get(tuple(mono), 0.0)

    def is_zero(self) -> bool:
        return not self._terms

    @property
    def degree(self) -> int:
        """Total degree; -1 for the zero polynomial."""
        return max((sum(m) for m in self._terms), default=-1)

    def __len__(self) -> int:
        return len(self._terms)

    # arithmetic
    def _check(self, other: Polynomial) -> None:
        if not isinstance(other, Polynomial):
            raise TypeError(f"expected Polynomial, got {type(other).__name__}")
        if other._n != self._n:
            raise ArityError(f"arity: {self._n} vs {other._n} variables")

    def _coerce(self, other) -> Polynomial:
        if isinstance(other, (int, float, np.floating, np.integer)):
            return Polynomial.constant(self._n, float(other))
        self._check(other)
        return other

    def __add__(self, other) -> Polynomial:
        other = self._coerce(other)
        terms = dict(self._terms)
        for m, c in other._terms.items():
            terms[m] = terms.get(m, 0.0) + c
        return Polynomial(self._n, terms)

    __radd__ = __add__

    def __neg__(self) -> Polynomial:
        return Polynomial(self._n, {m: -c for m, c in self._terms.items()})

    def __sub__(self, other) -> Polynomial:
        return self + (-self._coerce(other))

    def __rsub__(self, other) -> Polynomial:
        return self._coerce(other) - self

    def __mul__(self, other) -> Polynomial:
        if isinstance(other, (int, float, np.floating, np.integer)):
            return self.scale(float(other))
        self._check(other)
        terms: dict[Monomial, float] = {}
        for m1, c1 in self._terms.items():
            for m2, c2 in other._terms.items():
                m = tuple(a + b for a, b in zip(m1, m2))
                terms[m] = terms.get(m, 0.0) + c1 * c2
        return Polynomial(self._n, terms)

    __rmul__ = __mul__

    def __pow__(self, k: int) -> Polynomial:
        if k < 0:
            raise ValueError("negative power")
        out = Polynomial.constant(self._n, 1.0)
        for _ in range(k):
            out = out * self
        return out

    def scale(self, a: float) -> Polynomial:
        return Polynomial(self._n, {m: a * c for m, c in self._terms.items()})

    def diff(self, i: int) -> Polynomial:
        terms = {}
        for m, c in self._terms.items():
            if m[i] > 0:
                d = list(m)
                d[i] -= 1
                terms[tuple(d)] = c * m[i]
        return Polynomial(self._n, terms)

    def grad(self) -> PolyVector:
        return PolyVector([self.diff(i) for i in range(self._n)])

    # evaluation
    def _exponent_table(self):
        if self._table is None:
            items = self.items()
            exps = np.array([m for m, _ in items], dtype=np.int64).reshape(len(items), self._n)
            coeffs = np.array([c for _, c in items], dtype=np.float64).reshape(len(items), 1)
            self._table = (exps, coeffs)
        return self._table

    def eval(self, x: Sequence[float]) -> float:
        x = np.asarray(x, dtype=np.float64)
        if x.shape != (self._n,):
            raise ArityError(f"arity: point of shape {x.shape}, expected ({self._n},)")
        total = 0.0
        for m, c in self._terms.items():
            v = c
            for xi, e in zip(x, m):
                if e:
                    v *= xi**e
            total += v
        return float(total)

    __call__ = eval

    def eval_batch(self, points) -> np.ndarray:
        points = np.atleast_2d(np.asarray(points, dtype=np.float64))
        if points.shape[1] != self._n:
            raise ArityError(f"arity: points have {points.shape[1]} columns, expected {self._n}")
        exps, coeffs = self._exponent_table()
        return kernels.poly_eval_batch(exps, coeffs, points)[:, 0]

    # comparison / display
    def __eq__(self, other) -> bool:
        if not isinstance(other, Polynomial):
            return NotImplemented
        return self._n == other._n and self._terms == other._terms

    def __hash__(self):
        return hash((self._n, frozenset(self._terms.items())))

    def allclose(self, other: Polynomial, tol: float = 1e-9) -> bool:
        return max_coeff_diff(self, other) <= tol

    def __repr__(self) -> str:
        if not self._terms:
            return f"Polynomial({self._n}, 0)"
        parts = []
        for m, c in self.items():
            mono = "*".join(f"x{i + 1}" + (f"^{e}" if e > 1 else "") for i, e in enumerate(m) if e)
            parts.append(f"{c:g}" + (f"*{mono}" if mono else ""))
        return f"Polynomial({self._n}, " + " + ".join(parts) + ")"

    # serialization
    def to_dict(self) -> dict:
        return {"n_vars": self._n, "terms": [[list(m), c] for m, c in self.items()]}

    @classmethod
    def from_dict(cls, data: Mapping) -> Polynomial:
        return cls(int(data["n_vars"]), {tuple(m): float(c) for m, c in data["terms"]})


def max_coeff_diff(p: Polynomial, q: Polynomial) -> float:
    p._check(q)
    keys = set(p._terms) | set(q._terms)
    return max((abs(p.coeff(k) - q.coeff(k)) for k in keys), default=0.0)


class PolyVector:
    """A tuple of polynomials in the same variables (a polynomial vector field)."""

    __slots__ = ("_comps", "_n", "_table")

    def __init__(self, components: Iterable[Polynomial]):
        comps = tuple(components)
        if not comps:
            raise ValueError("PolyVector needs at least one component")
        n = comps[0].n_vars
        if any(c.n_vars != n for c in comps):
            raise ArityError("arity: components disagree on n_vars")
        self._comps = comps
        self._n = n
        self._table = None

    @classmethod
    def zeros(cls, n_vars: int, length: int | None = None) -> PolyVector:
        return cls([Polynomial.zero(n_vars)] * (n_vars if length is None else length))

    @property
    def n_vars(self) -> int:
        return self._n

    @property
    def components(self) -> tuple[Polynomial, ...]:
        return self._comps

    def __len__(self) -> int:
        return len(self._comps)

    def __iter__(self):
        return iter(self._comps)

    def __getitem__(self, i) -> Polynomial:
        return self._comps[i]

    def __eq__(self, other) -> bool:
        return isinstance(other, PolyVector) and self._comps == other._comps

    def __add__(self, other: PolyVector) -> PolyVector:
        if len(other) != len(self):
            raise ArityError("arity: vector lengths differ")
        return PolyVector([a + b for a, b in zip(self._comps, other._comps)])

    def scale(self, a: float) -> PolyVector:
        return PolyVector([c.scale(a) for c in self._comps])

    def dot(self, other: PolyVector) -> Polynomial:
        if len(other) != len(self):
            raise ArityError("arity: vector lengths differ")
        out = Polynomial.zero(self._n)
        for a, b in zip(self._comps, other._comps):
            out = out + a * b
        return out

    @property
    def degree(self) -> int:
        return max(c.degree for c in self._comps)

    def eval(self, x) -> np.ndarray:
        return np.array([c.eval(x) for c in self._comps])

    def _exponent_table(self):
        if self._table is None:
            monos = sorted({m for c in self._comps for m in c.terms}, key=grlex_key)
            index = {m: i for i, m in enumerate(monos)}
            exps = np.array(monos, dtype=np.int64).reshape(len(monos), self._n)
            coeffs = np.zeros((len(monos), len(self._comps)))
            for k, c in enumerate(self._comps):
                for m, v in c.terms.items():
                    coeffs[index[m], k] = v
            self._table = (exps, coeffs)
        return self._table

    def eval_batch(self, points) -> np.ndarray:
        """Evaluate at (P, n) points; returns (P, len(self))."""
        points = np.atleast_2d(np.asarray(points, dtype=np.float64))
        if points.shape[1] != self._n:
            raise ArityError(f"arity: points have {points.shape[1]} columns, expected {self._n}")
        exps, coeffs = self._exponent_table()
        return kernels.poly_eval_batch(exps, coeffs, points)

    def to_list(self) -> list:
        return [c.to_dict() for c in self._comps]

    @classmethod
    def from_list(cls, data) -> PolyVector:
        return cls(Polynomial.from_dict(d) for d in data)

    def __repr__(self) -> str:
        return f"PolyVector({list(self._comps)!r})"


def variables(n_vars: int) -> list[Polynomial]:
    return [Polynomial.variable(n_vars, i) for i in range(n_vars)]


def grad(p: Polynomial) -> PolyVector:
    return p.grad()


def lie_derivative(V: Polynomial, field: PolyVector) -> Polynomial:
    """``grad(V) . field``."""
    if field.n_vars != V.n_vars or len(field) != V.n_vars:
        raise ArityError(
            f"arity: field has {len(field)} components in {field.n_vars} variables, V has {V.n_vars}"
        )
    return V.grad().dot(field)


def squared_norm(n_vars: int) -> Polynomial:
    """``||x||^2`` as a polynomial."""
    return Polynomial(n_vars, {tuple(2 if j == i else 0 for j in range(n_vars)): 1.0 for i in range(n_vars)})
