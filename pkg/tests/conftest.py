import numpy as np
import pytest

from irtmpt import IrtParams, ModelDims, build_default_graph, enumerate_paths
from irtmpt.equivalence import CaseLabel, generate_nonidentifiable


def random_canonical_params(rng: np.random.Generator, T: int, K: int) -> IrtParams:
    """Generic interior parameter point with sum-to-zero theta/delta columns."""
    theta = rng.normal(0.0, 1.0, (T, 5))
    theta -= theta.mean(axis=0)
    delta = rng.normal(0.0, 1.0, (K, 5))
    delta -= delta.mean(axis=0)
    return IrtParams(
        theta=theta,
        delta=delta,
        beta=rng.normal(0.0, 0.5, 5),
        psi2=rng.uniform(0.2, 0.8, T),
        psi7=rng.uniform(0.2, 0.8, K),
        psi8=float(rng.uniform(0.2, 0.8)),
    )


@pytest.fixture(scope="session")
def paths():
    return enumerate_paths(build_default_graph())


@pytest.fixture(scope="session")
def pair_theta6():
    return generate_nonidentifiable(ModelDims(3, 4), CaseLabel.THETA6_ZERO, seed=101)


@pytest.fixture(scope="session")
def pair_delta6():
    return generate_nonidentifiable(ModelDims(3, 4), CaseLabel.DELTA6_ZERO, seed=303)


@pytest.fixture(scope="session")
def pair_both():
    return generate_nonidentifiable(ModelDims(3, 4), CaseLabel.BOTH_ZERO, seed=202)
