"""Monte Carlo validation of Lyapunov candidates under online disturbances.

A realization draws one disturbance xi* and a fresh batch of states; it is
a violation if Vdot(x, xi*) > 0 at any of them.
"""

from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import kernels
from .bench import Box, DisturbanceSpec, UncertainSystem, grid_states, make_rng
from .uncertainty import PolyCandidate, lie_terms


@dataclass(frozen=True)
class ValidationConfig:
    online: DisturbanceSpec
    realizations: int = 5000
    points: int = 10000
    region: Box | None = None
    seed: int = 0
    candidate_kind: str = "sos-polynomial"
    exclusion_radius: float = 0.0
    workers: int = 1

    def __post_init__(self):
        if self.realizations < 1 or self.points < 1:
            raise ValueError("realizations and points must be >= 1")
        if self.exclusion_radius < 0:
            raise ValueError("exclusion radius must be >= 0")
        if self.candidate_kind not in ("sos-polynomial", "nn-checkpoint"):
            raise ValueError(f"unknown candidate kind {self.candidate_kind!r}")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")
        if self.region is not None:
            object.__setattr__(self, "region", tuple(tuple(map(float, r)) for r in self.region))

    def to_dict(self) -> dict:
        d = asdict(self)
        d["online"] = self.online.to_dict()
        d["region"] = [list(r) for r in self.region] if self.region is not None else None
        return d


@dataclass(frozen=True)
class RealizationRecord:
    index: int
    xi: tuple[float, ...]
    positive: int
    points: int
    max_vdot: float


@dataclass
class ValidationReport:
    records: list[RealizationRecord]
    config: dict = field(default_factory=dict)

    @property
    def realizations(self) -> int:
        return len(self.records)

    @property
    def violation_rate(self) -> float:
        return sum(1 for r in self.records if r.positive > 0) / len(self.records)

    @property
    def violation_area(self) -> float:
        return float(np.mean([r.positive / r.points if r.points else 0.0 for r in self.records]))

    def summary(self) -> dict:
        return {
            "violation_rate": self.violation_rate,
            "violation_area": self.violation_area,
            "realizations": self.realizations,
            "config": self.config,
        }

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        m = len(self.records[0].xi) if self.records else 0
        w.writerow(["index"] + [f"xi_{j + 1}" for j in range(m)] + ["positive", "points", "max_vdot"])
        for r in self.records:
            w.writerow([r.index] + [repr(float(v)) for v in r.xi] + [r.positive, r.points, repr(float(r.max_vdot))])
        return buf.getvalue()


def _vdot_values(candidate, system: UncertainSystem, xi: np.ndarray, states: np.ndarray) -> np.ndarray:
    lt = lie_terms(candidate, system, states)
    return lt[:, 0] + lt[:, 1:] @ xi


def evaluate_realization(candidate, system: UncertainSystem, xi, states, return_values: bool = False):
    """Count states with Vdot(x, xi) > 0 and the maximum Vdot.

    Returns ``(positive, max_vdot)`` or ``(positive, max_vdot, values)``.
    """
    xi = np.asarray(xi, dtype=np.float64).ravel()
    if xi.size != system.m:
        raise ValueError(f"dimension mismatch: xi has length {xi.size}, system has m={system.m}")
    states = np.atleast_2d(np.asarray(states, dtype=np.float64))
    if states.shape[1] != system.n:
        raise ValueError(f"dimension mismatch: states have {states.shape[1]} columns, system has n={system.n}")
    if not return_values and isinstance(candidate, PolyCandidate) and system.is_polynomial:
        exps, coeffs = candidate.lie_table(system)
        count, vmax = kernels.lie_stats(exps, coeffs, states, xi)
        return int(count), float(vmax)
    vals = _vdot_values(candidate, system, xi, states)
    count = int(np.count_nonzero(vals > 0.0))
    vmax = float(vals.max()) if vals.size else -math.inf
    return (count, vmax, vals) if return_values else (count, vmax)


def _realization(candidate, system, cfg: ValidationConfig, region, index: int) -> RealizationRecord:
    rng = make_rng(cfg.seed, index)
    xi = cfg.online.draw(rng, 1)[0]
    lo = np.array([r[0] for r in region])
    hi = np.array([r[1] for r in region])
    states = rng.uniform(lo, hi, size=(cfg.points, system.n))
    if cfg.exclusion_radius > 0:
        states = states[np.linalg.norm(states, axis=1) >= cfg.exclusion_radius]
    count, vmax = evaluate_realization(candidate, system, xi, states)
    return RealizationRecord(index, tuple(float(v) for v in xi), count, int(states.shape[0]), vmax)


def monte_carlo(candidate, system: UncertainSystem, cfg: ValidationConfig) -> ValidationReport:
    """Run ``cfg.realizations`` independently seeded realizations.

    Realization ``i`` uses substream ``i`` of ``cfg.seed``, so the report does
    not depend on ``cfg.workers``.
    """
    if cfg.online.m != system.m:
        raise ValueError(f"online distribution has m={cfg.online.m}, system has m={system.m}")
    region = cfg.region if cfg.region is not None else system.region
    if isinstance(candidate, PolyCandidate) and system.is_polynomial:
        candidate.lie_table(system)  # build once before threads start

    def run(i):
        return _realization(candidate, system, cfg, region, i)

    if cfg.workers == 1:
        records = [run(i) for i in range(cfg.realizations)]
    else:
        with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            records = list(pool.map(run, range(cfg.realizations)))
    echo = cfg.to_dict()
    echo["region"] = [list(r) for r in region]
    return ValidationReport(records, echo)


def heatgrid(candidate, system: UncertainSystem, xi, region: Box | None = None, resolution=100) -> np.ndarray:
    """Lattice of Vdot values; rows are ``(x_1, ..., x_n, vdot)`` in row-major order."""
    region = region if region is not None else system.region
    res = (resolution,) * system.n if np.isscalar(resolution) else tuple(resolution)
    if len(res) != system.n or min(res) < 2:
        raise ValueError("resolution must be >= 2 per axis")
    axes = [np.linspace(lo, hi, k) for (lo, hi), k in zip(region, res)]
    states = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, system.n)
    _, _, vals = evaluate_realization(candidate, system, xi, states, return_values=True)
    return np.column_stack([states, vals])


def emit_heatgrid(candidate, system, xi, region=None, resolution=100, path: str | Path | None = None) -> np.ndarray:
    """Compute :func:`heatgrid` and optionally write it as CSV with a header row."""
    grid = heatgrid(candidate, system, xi, region, resolution)
    if path is not None:
        names = [f"x{i + 1}" for i in range(system.n)] + ["vdot"]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(names)
            for row in grid:
                w.writerow([repr(float(v)) for v in row])
    return grid


__all__ = [
    "ValidationConfig",
    "ValidationReport",
    "RealizationRecord",
    "evaluate_realization",
    "monte_carlo",
    "heatgrid",
    "emit_heatgrid",
    "grid_states",
]
