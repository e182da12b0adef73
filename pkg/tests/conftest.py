import numpy as np
import pytest

from laxbcd.algebra import make_algebra, random_group_element
from laxbcd.laxspace import LaxConfig, build_constraint_system, sample_lax

FAMILIES = [("B", 2), ("C", 2), ("D", 2), ("D", 3)]


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(params=FAMILIES, ids=lambda p: f"{p[0]}{p[1]}")
def alg(request):
    return make_algebra(*request.param)


def tyurin_instance(family, n, h, punctures, seed=0, z_gamma=1 + 1j, g_scale=0.3,
                    scale=0.5):
    """A Lax configuration with one Tyurin point and a sampled element."""
    alg = make_algebra(family, n)
    rng = np.random.default_rng(seed)
    g = random_group_element(alg, rng, g_scale)
    cfg = LaxConfig.build(alg, punctures, [(z_gamma, h, g)])
    space = build_constraint_system(cfg)
    return sample_lax(space, seed=seed + 1) * scale


def plain_instance(family, n, punctures, seed=0, scale=0.5):
    alg = make_algebra(family, n)
    cfg = LaxConfig.build(alg, punctures)
    return sample_lax(build_constraint_system(cfg), seed=seed) * scale


# Feasible flow instances: depth-1 gradings with two punctures, deeper
# gradings with a single puncture.
def b2_instance(seed=0):
    return tyurin_instance("B", 2, [1, 0], [(0.0, 1), (2 + 0.5j, 1)], seed=seed)


def c2_instance(seed=0):
    return tyurin_instance("C", 2, [1, 0], [(0.0, 1)], seed=seed)
