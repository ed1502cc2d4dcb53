import numpy as np
import pytest

from drlyap.bench import DisturbanceSpec, make_poly_system, sample_disturbances
from drlyap.synth import SosSynthesisSpec, synth_baseline, synth_cc, synth_drcc
from drlyap.uncertainty import AmbiguityConfig

CASE_SAMPLES = {1: DisturbanceSpec.gaussian((5.0, 3.0), (1.0, 1.0)), 2: DisturbanceSpec.gaussian((6.0, 0.0), (1.0, 1.0))}
CASE_RADIUS = {1: 0.25, 2: 0.15}


def case_samples(case: int, seed: int = 0, count: int = 9):
    return sample_disturbances(CASE_SAMPLES[case], count, seed)


def case_spec(case: int, **kw) -> SosSynthesisSpec:
    return SosSynthesisSpec(ambiguity=AmbiguityConfig(CASE_RADIUS[case], 0.1), **kw)


@pytest.fixture(scope="session")
def case1():
    return make_poly_system(1)


@pytest.fixture(scope="session")
def case2():
    return make_poly_system(2)


@pytest.fixture(scope="session")
def case1_baseline(case1):
    return synth_baseline(case1, case_spec(1))


@pytest.fixture(scope="session")
def case2_results(case2):
    s = case_samples(2)
    spec = case_spec(2)
    return {
        "samples": s,
        "baseline": synth_baseline(case2, spec),
        "cc": synth_cc(case2, s, spec),
        "drcc": synth_drcc(case2, s, spec),
    }


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
