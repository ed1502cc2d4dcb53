"""SOS Lyapunov synthesis: nominal, chance-constrained and DR chance-constrained."""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, field, replace

import numpy as np

from . import sdp
from .bench import SampleSet, UncertainSystem
from .poly import Polynomial, PolyVector, monomial_basis, squared_norm
from .sos import GramCertificate, ParamPolynomial, SosProgram, solve_program, verify_certificate
from .uncertainty import AmbiguityConfig

logger = logging.getLogger(__name__)


class SynthesisError(ValueError):
    pass


class Formulation(str, enum.Enum):
    BASELINE = "baseline"
    CC = "cc"
    DRCC = "drcc"


class SignMode(str, enum.Enum):
    """Sign of the epsilon term inside the beta-scaled derivative constraint."""

    DERIVATION = "derivation"  # -beta * (Vdot + eps |x|^2)
    LITERAL = "literal"  # -beta * (Vdot - eps |x|^2)


@dataclass(frozen=True)
class SosSynthesisSpec:
    degree: int = 4
    epsilon: float = 1e-3
    formulation: Formulation = Formulation.BASELINE
    ambiguity: AmbiguityConfig = field(default_factory=AmbiguityConfig)
    sign_mode: SignMode = SignMode.DERIVATION
    solver: sdp.SolverConfig = field(default_factory=sdp.SolverConfig)
    margin_threshold: float = sdp.DEFAULT_MARGIN_THRESHOLD

    def __post_init__(self):
        object.__setattr__(self, "formulation", Formulation(self.formulation))
        object.__setattr__(self, "sign_mode", SignMode(self.sign_mode))
        if self.degree < 2 or self.degree % 2:
            raise SynthesisError(f"degree must be even and >= 2, got {self.degree}")
        if not self.epsilon > 0:
            raise SynthesisError("epsilon must be positive")

    @property
    def eps_sign(self) -> float:
        return 1.0 if self.sign_mode is SignMode.DERIVATION else -1.0


@dataclass
class SosLyapunovResult:
    feasible: bool
    V: Polynomial | None
    certificates: list[GramCertificate]
    constraint_polys: list[Polynomial]
    constraint_names: list[str]
    margin: float
    status: str
    iterations: int
    formulation: Formulation
    message: str = ""
    metadata: dict = field(default_factory=dict)

    def verify(self, tol: float = 1e-6) -> bool:
        if not self.feasible:
            return False
        return all(verify_certificate(p, c, tol).ok for p, c in zip(self.constraint_polys, self.certificates))


def v_template(n: int, degree: int) -> ParamPolynomial:
    """All non-constant monomials up to ``degree`` with free coefficients."""
    return ParamPolynomial.template(n, monomial_basis(n, degree, include_constant=False), prefix="c")


def _require_poly(system: UncertainSystem) -> None:
    if not system.is_polynomial:
        raise SynthesisError(f"system {system.name!r}: synthesis requires polynomial field")


def _positivity(program: SosProgram, V: ParamPolynomial, spec: SosSynthesisSpec, n: int) -> None:
    program.add_sos(V - squared_norm(n).scale(spec.epsilon), spec.degree, "positivity")


def _derivative_degree(system: UncertainSystem, spec: SosSynthesisSpec) -> int:
    deg = spec.degree - 1 + max([system.f_poly.degree] + [d.degree for d in system.d_poly])
    return max(deg + deg % 2, 2)


def _build(system: UncertainSystem, samples: SampleSet | None, spec: SosSynthesisSpec) -> SosProgram:
    n = system.n
    V = v_template(n, spec.degree)
    program = SosProgram()
    _positivity(program, V, spec, n)
    nrm = squared_norm(n).scale(spec.epsilon)
    dbound = _derivative_degree(system, spec)
    if spec.formulation is Formulation.BASELINE:
        program.add_sos(-V.lie(system.f_poly) - nrm, dbound, "decrease")
        return program
    xis = samples.samples
    beta, r = spec.ambiguity.beta, spec.ambiguity.radius
    lie_d = [V.lie(dj) for dj in system.d_poly]
    lie_f = V.lie(system.f_poly)
    for i, xi in enumerate(xis):
        vdot = lie_f
        for xj, lj in zip(xi, lie_d):
            vdot = vdot + lj.scale(float(xj))
        if spec.formulation is Formulation.CC:
            program.add_sos(-vdot - nrm, dbound, f"decrease[{i}]")
            continue
        base = -(vdot + nrm.scale(spec.eps_sign)).scale(beta)
        for j, lj in enumerate(lie_d):
            for sgn, tag in ((1.0, "+"), (-1.0, "-")):
                program.add_sos(base + lj.scale(sgn * r), dbound, f"drcc[{i},{j},{tag}]")
    return program


def synthesize(system: UncertainSystem, spec: SosSynthesisSpec, samples: SampleSet | None = None) -> SosLyapunovResult:
    """Run the formulation selected by ``spec``; infeasibility is a result, not an exception."""
    _require_poly(system)
    if spec.formulation is not Formulation.BASELINE:
        if samples is None:
            raise SynthesisError(f"{spec.formulation.value} formulation needs a sample set")
        samples = samples if isinstance(samples, SampleSet) else SampleSet(samples)
        if samples.m != system.m:
            raise SynthesisError(f"samples have m={samples.m}, system has m={system.m}")
        spec.ambiguity.check_samples(samples.n)
    program = _build(system, samples, spec)
    res = solve_program(program, spec.solver, spec.margin_threshold)
    names = [c.name for c in program.sos_constraints]
    meta = {
        "system": system.name,
        "field": system.poly_note,
        "n_constraints": len(names),
        "degree": spec.degree,
        "epsilon": spec.epsilon,
        "sign_mode": spec.sign_mode.value,
    }
    status = res.solution.status.value if res.solution is not None else "infeasible"
    iters = res.solution.iterations if res.solution is not None else 0
    if not res.feasible:
        logger.info("synthesis %s infeasible: %s", spec.formulation.value, res.message)
        return SosLyapunovResult(False, None, [], [], names, res.margin, status, iters, spec.formulation, res.message, meta)
    V = v_template(system.n, spec.degree).substitute(res.values)
    polys = res.constraint_polynomials()
    return SosLyapunovResult(True, V, res.certificates, polys, names, res.margin, status, iters, spec.formulation, "", meta)


def synth_baseline(system: UncertainSystem, spec: SosSynthesisSpec | None = None) -> SosLyapunovResult:
    spec = spec or SosSynthesisSpec()
    return synthesize(system, _with_formulation(spec, Formulation.BASELINE))


def synth_cc(system: UncertainSystem, samples: SampleSet, spec: SosSynthesisSpec | None = None) -> SosLyapunovResult:
    spec = spec or SosSynthesisSpec()
    return synthesize(system, _with_formulation(spec, Formulation.CC), samples)


def synth_drcc(system: UncertainSystem, samples: SampleSet, spec: SosSynthesisSpec | None = None) -> SosLyapunovResult:
    spec = spec or SosSynthesisSpec()
    return synthesize(system, _with_formulation(spec, Formulation.DRCC), samples)


def _with_formulation(spec: SosSynthesisSpec, form: Formulation) -> SosSynthesisSpec:
    if spec.formulation is form:
        return spec
    return replace(spec, formulation=form)


def linear_field(a: np.ndarray) -> PolyVector:
    """Polynomial vector field ``A x``; handy for tests and examples."""
    a = np.asarray(a, dtype=float)
    n = a.shape[0]
    comps = []
    for i in range(n):
        comps.append(Polynomial(n, {tuple(1 if k == j else 0 for k in range(n)): a[i, j] for j in range(n)}))
    return PolyVector(comps)
