"""Benchmark uncertain systems and seeded sampling utilities."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .poly import Polynomial, PolyVector, variables

Box = tuple[tuple[float, float], ...]

# pendulum constants
GRAVITY = 9.81
MASS = 1.0
LENGTH = 0.5
DAMPING = 0.1
PENDULUM_REGION: Box = ((-math.pi, math.pi), (-4.0, 4.0))
POLY_REGION: Box = ((-2.0, 2.0), (-2.0, 2.0))


def make_rng(seed: int, *stream: int) -> np.random.Generator:
    """PCG64 generator for substream ``stream`` of ``seed``.

    Substreams are independent of each other and of evaluation order, so
    realization ``i`` always sees the same draws.
    """
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(seed), spawn_key=tuple(int(s) for s in stream))))


@dataclass(frozen=True)
class UncertainSystem:
    """``xdot = f(x) + d(x) xi`` with ``d(x) = [d_1(x) ... d_m(x)]``.

    ``f`` maps (P, n) states to (P, n); ``d`` maps (P, n) to (P, n, m).
    ``f_poly``/``d_poly`` are the polynomial fields used by the SOS path;
    ``poly_note`` records how they were obtained when they approximate the
    exact dynamics.
    """

    name: str
    n: int
    m: int
    f: Callable[[np.ndarray], np.ndarray]
    d: Callable[[np.ndarray], np.ndarray]
    region: Box
    f_poly: PolyVector | None = None
    d_poly: tuple[PolyVector, ...] | None = None
    poly_note: str = "exact"
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        if len(self.region) != self.n:
            raise ValueError("region must have one interval per state")
        f0 = np.asarray(self.f(np.zeros((1, self.n))))
        if f0.shape != (1, self.n):
            raise ValueError(f"f returned shape {f0.shape}, expected (1, {self.n})")
        if np.any(f0 != 0.0):
            raise ValueError(f"f(0) = {f0[0].tolist()}; the origin must be an equilibrium")
        d0 = np.asarray(self.d(np.zeros((1, self.n))))
        if d0.shape != (1, self.n, self.m):
            raise ValueError(f"d returned shape {d0.shape}, expected (1, {self.n}, {self.m})")
        if self.d_poly is not None and len(self.d_poly) != self.m:
            raise ValueError("need one polynomial disturbance column per xi component")

    @property
    def is_polynomial(self) -> bool:
        return self.f_poly is not None and self.d_poly is not None

    def field_poly(self, xi: Sequence[float]) -> PolyVector:
        """Polynomial field ``f + sum_j xi_j d_j``."""
        out = self.f_poly
        for xj, dj in zip(xi, self.d_poly):
            if xj != 0.0:
                out = out + dj.scale(float(xj))
        return out

    def flow(self, x: np.ndarray, xi: Sequence[float]) -> np.ndarray:
        x = np.atleast_2d(x)
        return self.f(x) + np.einsum("pnm,m->pn", self.d(x), np.asarray(xi, dtype=float))


def polynomial_system(name: str, f: PolyVector, d: Sequence[PolyVector], region: Box, **meta) -> UncertainSystem:
    n = f.n_vars
    d = tuple(d)
    for col in d:
        if col.n_vars != n or len(col) != n:
            raise ValueError("disturbance columns must be n-vectors in n variables")

    def f_eval(x):
        return f.eval_batch(x)

    def d_eval(x):
        x = np.atleast_2d(x)
        if not d:
            return np.zeros((x.shape[0], n, 0))
        return np.stack([col.eval_batch(x) for col in d], axis=2)

    return UncertainSystem(name, n, len(d), f_eval, d_eval, tuple(region), f, d, "exact", dict(meta))


def make_poly_system(case: int) -> UncertainSystem:
    """Planar cubic system with the two disturbance structures."""
    x1, x2 = variables(2)
    f = PolyVector([-0.5 * x1**3 - 1.5 * x1**2 - x2, 6.0 * x1 - x2])
    if case == 1:
        d = [PolyVector([-x1, -x2]), PolyVector([-x2, Polynomial.zero(2)])]
    elif case == 2:
        d = [PolyVector([-(x1**3 + x2), -x2]), PolyVector([-x2, -x1])]
    else:
        raise ValueError(f"invalid case id {case!r}; expected 1 or 2")
    return polynomial_system(f"poly-case{case}", f, d, POLY_REGION, case=case)


def sin_taylor(p: Polynomial, degree: int) -> Polynomial:
    """Odd Taylor truncation of sin(p) up to ``degree``."""
    out = Polynomial.zero(p.n_vars)
    for k in range(1, degree + 1, 2):
        out = out + (p**k).scale((-1.0) ** ((k - 1) // 2) / math.factorial(k))
    return out


def make_pendulum(sin_degree: int = 3) -> UncertainSystem:
    """Damped pendulum with damping and length perturbations.

    The numeric fields are exact; ``f_poly``/``d_poly`` replace sin by its
    odd Taylor polynomial of degree ``sin_degree`` for the SOS path.
    """
    if sin_degree < 1 or sin_degree % 2 == 0:
        raise ValueError("sin Taylor degree must be odd and positive")
    m, g, l, b = MASS, GRAVITY, LENGTH, DAMPING
    ml2 = m * l * l

    def f_eval(x):
        x = np.atleast_2d(x)
        th, om = x[:, 0], x[:, 1]
        return np.column_stack([om, (-m * g * l * np.sin(th) - b * om) / ml2])

    def d_eval(x):
        x = np.atleast_2d(x)
        th, om = x[:, 0], x[:, 1]
        out = np.zeros((x.shape[0], 2, 2))
        out[:, 1, 0] = -0.05 * b * om / ml2
        out[:, 1, 1] = -0.05 * m * g * l * np.sin(th) / ml2
        return out

    th, om = variables(2)
    s = sin_taylor(th, sin_degree)
    zero = Polynomial.zero(2)
    f_poly = PolyVector([om, (s.scale(-m * g * l) - om.scale(b)).scale(1.0 / ml2)])
    d_poly = (
        PolyVector([zero, om.scale(-0.05 * b / ml2)]),
        PolyVector([zero, s.scale(-0.05 * m * g * l / ml2)]),
    )
    return UncertainSystem(
        "pendulum",
        2,
        2,
        f_eval,
        d_eval,
        PENDULUM_REGION,
        f_poly,
        d_poly,
        f"sin taylor degree {sin_degree}",
        {"sin_taylor_degree": sin_degree},
    )


BUILTIN_SYSTEMS = {
    "poly-case1": lambda **kw: make_poly_system(1),
    "poly-case2": lambda **kw: make_poly_system(2),
    "pendulum": lambda sin_taylor_degree=3, **kw: make_pendulum(sin_taylor_degree),
}


def builtin_system(name: str, **kwargs) -> UncertainSystem:
    try:
        factory = BUILTIN_SYSTEMS[name]
    except KeyError:
        raise ValueError(f"unknown system {name!r}; choose from {sorted(BUILTIN_SYSTEMS)}") from None
    return factory(**kwargs)


@dataclass(frozen=True)
class DisturbanceSpec:
    """Componentwise independent gaussian (mean, std), uniform (low, high) or a fixed point."""

    kind: str
    first: tuple[float, ...]
    second: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "first", tuple(float(v) for v in self.first))
        object.__setattr__(self, "second", tuple(float(v) for v in self.second))
        if self.kind not in ("gaussian", "uniform", "point"):
            raise ValueError(f"unknown distribution kind {self.kind!r}")
        if len(self.first) != len(self.second) or not self.first:
            raise ValueError("parameter vectors must be non-empty and equal length")
        if self.kind == "gaussian" and any(s <= 0 for s in self.second):
            raise ValueError("gaussian std must be positive")
        if self.kind == "uniform" and any(lo >= hi for lo, hi in zip(self.first, self.second)):
            raise ValueError("uniform bounds need low < high")

    @classmethod
    def gaussian(cls, mean, std) -> DisturbanceSpec:
        return cls("gaussian", tuple(mean), tuple(std))

    @classmethod
    def gaussian_var(cls, mean, var) -> DisturbanceSpec:
        """Gaussian from variances, i.e. the N(mu, sigma^2) notation."""
        return cls("gaussian", tuple(mean), tuple(math.sqrt(v) for v in var))

    @classmethod
    def uniform(cls, low, high) -> DisturbanceSpec:
        return cls("uniform", tuple(low), tuple(high))

    @classmethod
    def point(cls, value) -> DisturbanceSpec:
        """Degenerate distribution that always returns ``value``."""
        return cls("point", tuple(value), tuple(value))

    @property
    def m(self) -> int:
        return len(self.first)

    def draw(self, rng: np.random.Generator, count: int) -> np.ndarray:
        a, b = np.array(self.first), np.array(self.second)
        if self.kind == "point":
            return np.tile(a, (count, 1))
        if self.kind == "gaussian":
            return rng.normal(a, b, size=(count, self.m))
        return rng.uniform(a, b, size=(count, self.m))

    def to_dict(self) -> dict:
        if self.kind == "gaussian":
            return {"kind": "gaussian", "mean": list(self.first), "std": list(self.second)}
        if self.kind == "point":
            return {"kind": "point", "value": list(self.first)}
        return {"kind": "uniform", "low": list(self.first), "high": list(self.second)}

    @classmethod
    def from_dict(cls, data) -> DisturbanceSpec:
        kind = data["kind"]
        if kind == "gaussian":
            if "var" in data:
                return cls.gaussian_var(data["mean"], data["var"])
            return cls.gaussian(data["mean"], data["std"])
        if kind == "uniform":
            return cls.uniform(data["low"], data["high"])
        if kind == "point":
            return cls.point(data["value"])
        raise ValueError(f"unknown distribution kind {kind!r}")


@dataclass(frozen=True)
class SampleSet:
    samples: np.ndarray

    def __post_init__(self):
        arr = np.atleast_2d(np.asarray(self.samples, dtype=np.float64))
        if arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValueError("a sample set needs N >= 1 samples of length m >= 1")
        arr.setflags(write=False)
        object.__setattr__(self, "samples", arr)

    @property
    def n(self) -> int:
        return self.samples.shape[0]

    @property
    def m(self) -> int:
        return self.samples.shape[1]

    def __len__(self) -> int:
        return self.n

    def __iter__(self):
        return iter(self.samples)


def sample_disturbances(spec: DisturbanceSpec, count: int, seed: int, *stream: int) -> SampleSet:
    if count < 1:
        raise ValueError("count must be >= 1")
    return SampleSet(spec.draw(make_rng(seed, *stream), count))


def grid_states(region: Box, count: int, mode: str = "uniform-random", seed: int = 0, *stream: int) -> np.ndarray:
    """States in an axis-aligned box, either uniform draws or a lattice."""
    if count < 1:
        raise ValueError("count must be >= 1")
    lo = np.array([r[0] for r in region], dtype=float)
    hi = np.array([r[1] for r in region], dtype=float)
    n = lo.size
    if mode == "uniform-random":
        return make_rng(seed, *stream).uniform(lo, hi, size=(count, n))
    if mode == "lattice":
        side = max(2, math.ceil(count ** (1.0 / n) - 1e-9)) if count > 1 else 1
        axes = [np.linspace(a, b, side) if side > 1 else np.array([(a + b) / 2]) for a, b in zip(lo, hi)]
        mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, n)
        return mesh[:count]
    raise ValueError(f"unknown grid mode {mode!r}")
