import numpy as np
import pytest

from tensors.tensor_ops import FactorSet, MaskedTensor, cp_reconstruct


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_factors(rng, shape, rank):
    return FactorSet(tuple(rng.standard_normal((s, rank)) for s in shape))


def exact_problem(rng, shape, rank, missing=0.0):
    """Noiseless rank-``rank`` tensor, optionally with random missing entries."""
    truth = random_factors(rng, shape, rank)
    values = cp_reconstruct(truth)
    mask = (rng.uniform(size=shape) >= missing).astype(float)
    return truth, MaskedTensor(values, mask)
