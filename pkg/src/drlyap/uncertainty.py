"""Constraint function, empirical CVaR, Wasserstein DRCC margin and radius.

Candidates are any object with ``value(X)`` and ``grad(X)`` on (P, n)
batches.  :class:`PolyCandidate` wraps a polynomial and additionally offers
precomputed Lie-derivative polynomials for fast evaluation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Protocol, Sequence

import numpy as np

from . import kernels
from .bench import SampleSet, UncertainSystem
from .poly import Polynomial, PolyVector, lie_derivative


class UncertaintyError(ValueError):
    pass


class Candidate(Protocol):
    n: int

    def value(self, x: np.ndarray) -> np.ndarray: ...

    def grad(self, x: np.ndarray) -> np.ndarray: ...


class PolyCandidate:
    """Polynomial Lyapunov candidate."""

    def __init__(self, V: Polynomial):
        self.V = V
        self.n = V.n_vars
        self._grad = V.grad()
        self._lie_cache: dict[int, tuple[UncertainSystem, tuple[np.ndarray, np.ndarray]]] = {}

    def value(self, x) -> np.ndarray:
        return self.V.eval_batch(x)

    def grad(self, x) -> np.ndarray:
        return self._grad.eval_batch(x)

    def lie_polynomials(self, system: UncertainSystem) -> list[Polynomial]:
        """``[grad V . f, grad V . d_1, ..., grad V . d_m]``."""
        if not system.is_polynomial:
            raise UncertaintyError("requires polynomial field")
        return [lie_derivative(self.V, system.f_poly)] + [lie_derivative(self.V, dj) for dj in system.d_poly]

    def lie_table(self, system: UncertainSystem) -> tuple[np.ndarray, np.ndarray]:
        """Exponent/coefficient table of :meth:`lie_polynomials` for the kernels."""
        # the entry holds the system itself so its id cannot be recycled
        cached = self._lie_cache.get(id(system))
        if cached is None or cached[0] is not system:
            vec = PolyVector(self.lie_polynomials(system))
            cached = (system, vec._exponent_table())
            self._lie_cache[id(system)] = cached
        return cached[1]


def _states(x, n: int) -> np.ndarray:
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    if x.shape[1] != n:
        raise UncertaintyError(f"dimension mismatch: states have {x.shape[1]} columns, system has n={n}")
    return x


def lie_terms(candidate, system: UncertainSystem, x) -> np.ndarray:
    """(P, m+1) array: column 0 is grad V . f, column j is grad V . d_j."""
    x = _states(x, system.n)
    if getattr(candidate, "n", system.n) != system.n:
        raise UncertaintyError(f"dimension mismatch: candidate n={candidate.n}, system n={system.n}")
    if isinstance(candidate, PolyCandidate) and system.is_polynomial:
        exps, coeffs = candidate.lie_table(system)
        return kernels.poly_eval_batch(exps, coeffs, x)
    g = candidate.grad(x)
    out = np.empty((x.shape[0], system.m + 1))
    out[:, 0] = np.einsum("pn,pn->p", g, system.f(x))
    out[:, 1:] = np.einsum("pn,pnm->pm", g, system.d(x))
    return out


def _xi_matrix(xi, m: int) -> np.ndarray:
    xi = np.atleast_2d(np.asarray(xi, dtype=np.float64))
    if xi.shape[1] != m:
        raise UncertaintyError(f"dimension mismatch: disturbance has length {xi.shape[1]}, system has m={m}")
    return xi


def g_values(candidate, system, x, xi, epsilon: float, eps_sign: float = 1.0) -> np.ndarray:
    """G(x, xi) = grad V . (f + d xi) + eps_sign * epsilon * ||x||^2 as a (P, N) array."""
    x = _states(x, system.n)
    xi = _xi_matrix(xi, system.m)
    lt = lie_terms(candidate, system, x)
    return lt[:, :1] + lt[:, 1:] @ xi.T + eps_sign * epsilon * np.einsum("pn,pn->p", x, x)[:, None]


def g_value(candidate, system, x, xi, epsilon: float) -> float:
    """Scalar G at one state and one disturbance."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise UncertaintyError("g_value takes a single state; use g_values for batches")
    xi = np.asarray(xi, dtype=np.float64)
    if xi.ndim != 1:
        raise UncertaintyError("g_value takes a single disturbance vector")
    return float(g_values(candidate, system, x[None], xi[None], epsilon)[0, 0])


@dataclass(frozen=True)
class CvarResult:
    value: float
    t_star: float

    def __iter__(self):
        return iter((self.value, self.t_star))


def _breakpoint_index(n: int, beta: float) -> int:
    """Smallest k in 1..n with (k-1)/n - beta < 0 <= k/n - beta."""
    for k in range(1, n + 1):
        if (k - 1) / n - beta < 0 <= k / n - beta:
            return k
    return n


def _check_beta(beta: float) -> None:
    if not 0.0 < beta <= 1.0:
        raise UncertaintyError(f"beta must lie in (0, 1], got {beta}")


def cvar_empirical_inf(values: Sequence[float], beta: float) -> CvarResult:
    """inf over t of mean((v + t)_+) - t * beta, in closed form.

    The objective is piecewise linear in t with breakpoints at -v_i; the
    minimum sits at t* = -v_(k), v_(k) the k-th largest value.
    """
    v = np.asarray(values, dtype=np.float64).ravel()
    if v.size == 0:
        raise UncertaintyError("empty value list")
    _check_beta(beta)
    n = v.size
    desc = np.sort(v)[::-1]
    k = _breakpoint_index(n, beta)
    vk = desc[k - 1]
    head = float(np.sum(desc[: k - 1] - vk)) / n if k > 1 else 0.0
    return CvarResult(head + beta * vk, -float(vk))


def cvar_empirical_inf_rows(values: np.ndarray, beta: float) -> np.ndarray:
    """Row-wise :func:`cvar_empirical_inf` values for a (P, N) array."""
    values = np.atleast_2d(np.asarray(values, dtype=np.float64))
    _check_beta(beta)
    n = values.shape[1]
    desc = -np.sort(-values, axis=1)
    k = _breakpoint_index(n, beta)
    vk = desc[:, k - 1]
    head = np.sum(desc[:, : k - 1] - vk[:, None], axis=1) / n if k > 1 else 0.0
    return head + beta * vk


def lipschitz_terms(candidate, system, x) -> np.ndarray:
    """max_j |grad V(x) . d_j(x)| per state."""
    lt = lie_terms(candidate, system, x)
    if system.m == 0:
        return np.zeros(lt.shape[0])
    return np.max(np.abs(lt[:, 1:]), axis=1)


def lipschitz_term(candidate, system, x) -> float:
    x = np.asarray(x, dtype=np.float64)
    return float(lipschitz_terms(candidate, system, x[None] if x.ndim == 1 else x)[0])


@dataclass(frozen=True)
class AmbiguityConfig:
    """Wasserstein-1 ball (L1 ground metric) of radius r, risk level beta."""

    radius: float = 0.0
    beta: float = 0.1

    def __post_init__(self):
        if not self.radius >= 0.0:
            raise UncertaintyError(f"radius must be >= 0, got {self.radius}")
        _check_beta(self.beta)

    def check_samples(self, n_samples: int) -> None:
        if self.beta > 1.0 / n_samples:
            raise UncertaintyError(f"beta exceeds 1/N (beta={self.beta}, N={n_samples})")


def drcc_margins(
    candidate,
    system,
    x,
    samples: SampleSet,
    cfg: AmbiguityConfig,
    epsilon: float,
    general: bool = False,
    eps_sign: float = 1.0,
) -> np.ndarray:
    """r * L_G(x) + beta * max_i G(x, xi_i) per state; <= 0 certifies the DR chance constraint.

    With ``general=True`` the beta <= 1/N restriction is lifted and the CVaR
    infimum replaces ``beta * max``.
    """
    samples = samples if isinstance(samples, SampleSet) else SampleSet(samples)
    if not general:
        cfg.check_samples(samples.n)
    g = g_values(candidate, system, x, samples.samples, epsilon, eps_sign)
    risk = cvar_empirical_inf_rows(g, cfg.beta) if general else cfg.beta * g.max(axis=1)
    if cfg.radius == 0.0:
        return risk
    return cfg.radius * lipschitz_terms(candidate, system, x) + risk


def drcc_margin(candidate, system, x, samples, cfg, epsilon, general=False) -> float:
    x = np.asarray(x, dtype=np.float64)
    return float(drcc_margins(candidate, system, x[None], samples, cfg, epsilon, general)[0])


@dataclass(frozen=True)
class RadiusParams:
    """Inputs of the light-tailed Wasserstein radius estimate.

    ``c1``, ``c2`` depend only on the tail exponent ``rho``, the moment
    bound and ``m``; they are not known in closed form and must be supplied.
    """

    n_samples: int
    m: int
    alpha: float
    c1: float
    c2: float
    rho: float

    def __post_init__(self):
        if self.n_samples < 1 or self.m < 1:
            raise UncertaintyError("n_samples and m must be positive")
        if not 0.0 < self.alpha <= 1.0:
            raise UncertaintyError(f"alpha must lie in (0, 1], got {self.alpha}")
        if self.c1 <= 0 or self.c2 <= 0 or self.rho <= 0:
            raise UncertaintyError("c1, c2 and rho must be positive")


def wasserstein_radius(params: RadiusParams) -> float:
    """Radius r* such that the true distribution lies in the ball w.p. >= 1 - alpha."""
    if params.m == 2:
        raise UncertaintyError("formula excludes m=2")
    log_term = math.log(params.c1 / params.alpha)
    if log_term <= 0.0:
        return 0.0
    ratio = log_term / (params.c2 * params.n_samples)
    if params.n_samples >= log_term / params.c2:
        return ratio ** (1.0 / max(params.m, 2))
    return ratio ** (1.0 / params.rho)


def drcc_probability_bound(alpha: float, beta: float) -> float:
    """Lower bound (1 - alpha)(1 - beta) on the true-distribution satisfaction probability."""
    for name, v in (("alpha", alpha), ("beta", beta)):
        if not 0.0 <= v <= 1.0:
            raise UncertaintyError(f"{name} must lie in [0, 1], got {v}")
    return (1.0 - alpha) * (1.0 - beta)
