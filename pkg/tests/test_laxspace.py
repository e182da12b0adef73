import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from laxbcd.algebra import grading, is_member, make_algebra, random_group_element, random_member
from laxbcd.laurent import LaurentMatrix
from laxbcd.laxspace import (
    LaxConfig, LaxElement, build_constraint_system, check_tyurin_form, evaluate,
    filtration_residual, from_conjugation_form, local_expansion, sample_lax,
    tyurin_residual,
)

TYURIN_CASES = [
    ("B", 2, [1, 0]), ("B", 2, [1, 1]), ("C", 2, [1, 0]), ("C", 2, [1, 1]),
    ("D", 2, [1, 1]), ("D", 3, [1, 0, 0]), ("D", 3, [1, 1, 0]),
]


def test_gamma_empty_d2_dimension():
    cfg = LaxConfig.build(make_algebra("D", 2), [(0.0, 1)])
    space = build_constraint_system(cfg)
    assert space.dim == 12


@pytest.mark.parametrize("punctures", [[(0, 1)], [(0, 2)], [(0, 1), (1j, 2)], [(0, 0)]])
def test_gamma_empty_dimension(alg, punctures):
    cfg = LaxConfig.build(alg, punctures)
    deg = sum(m for _, m in punctures)
    assert build_constraint_system(cfg).dim == (deg + 1) * alg.dim


@pytest.mark.parametrize("family,n,h", TYURIN_CASES)
def test_tyurin_dimension_and_gap(family, n, h):
    # the k dim g new unknowns at a Tyurin point meet k dim g independent
    # filtration conditions, so the dimension stays (deg D + 1) dim g
    alg = make_algebra(family, n)
    g = random_group_element(alg, np.random.default_rng(3), 0.3)
    cfg = LaxConfig.build(alg, [(0, 2)], [(1 + 1j, h, g)])
    space = build_constraint_system(cfg)
    assert space.dim == 3 * alg.dim
    assert space.gap > 1e3


@pytest.mark.parametrize("family,n,h", TYURIN_CASES)
def test_conjugation_form_lies_in_space(family, n, h):
    alg = make_algebra(family, n)
    rng = np.random.default_rng(5)
    g = random_group_element(alg, rng, 0.3)
    gr = grading(alg, h)
    pieces = {q: np.einsum("k,kij->ij", rng.standard_normal(len(B)), B)
              for q, B in gr.pieces.items()}
    cfg, L = from_conjugation_form(alg, 1 + 1j, h, g, pieces, 0.0)
    space = build_constraint_system(cfg)
    P = space.project(L)
    assert np.max(np.abs(P.blocks - L.blocks)) < 1e-10
    assert check_tyurin_form(L, 0) < 1e-10
    assert filtration_residual(L, 0) < 1e-10


def test_evaluate_simple_pole():
    alg = make_algebra("C", 1)
    cfg = LaxConfig.build(alg, [(1.0, 1)])
    A = random_member(alg, np.random.default_rng(0))
    L = LaxElement(cfg, np.array([np.zeros((2, 2)), A], complex))
    assert np.allclose(evaluate(L, 2.0), A)
    with pytest.raises(ValueError):
        evaluate(L, 1.0)


def test_local_expansion_matches_values():
    L = sample_lax(build_constraint_system(
        LaxConfig.build(make_algebra("B", 2), [(0, 2), (3, 1)],
                        [(1 + 1j, [1, 0], np.eye(5))])), seed=0)
    X = local_expansion(L, 1 + 1j, top=12)
    assert X.start == -1
    for eps in (0.05, 0.05j):
        z = 1 + 1j + eps
        series = sum(X.coeff(p) * eps ** p for p in range(X.start, X.top + 1))
        assert np.max(np.abs(series - L(z))) < 1e-8
    # at a regular point the expansion starts at order 0
    assert local_expansion(L, 2.0).start == 0


def test_basis_members(alg):
    cfg = LaxConfig.build(alg, [(0, 1), (2, 1)],
                          [(1j, alg.cartan([1] + [0] * (alg.n - 1)),
                            random_group_element(alg, np.random.default_rng(1), 0.2))])
    space = build_constraint_system(cfg)
    for L in space.elements():
        for z in (0.3, -1 + 0.5j, 4j):
            assert is_member(L(z), alg, tol=1e-9)


@pytest.mark.parametrize("family,n,h", TYURIN_CASES)
def test_corruption_detected(family, n, h):
    alg = make_algebra(family, n)
    rng = np.random.default_rng(9)
    g = random_group_element(alg, rng, 0.3)
    cfg = LaxConfig.build(alg, [(0, 1)], [(1 + 1j, h, g)])
    L = sample_lax(build_constraint_system(cfg), seed=2)
    assert check_tyurin_form(L, 0) < 1e-10
    gr = cfg.gradings[0]
    k = gr.depth
    # a top-grade element placed in the most singular block breaks the filtration
    E = g @ gr.pieces[k][0] @ np.linalg.inv(g)
    bad = LaxElement(cfg, L.blocks.copy())
    idx = [i for i, b in enumerate(cfg.block_layout()) if b[0] == "G" and b[2] == k][0]
    bad.blocks[idx] += 1e-2 * E
    assert check_tyurin_form(bad, 0) > 1e-4
    assert filtration_residual(bad, 0) > 1e-4
    with pytest.raises(ValueError):
        check_tyurin_form(bad, 0, tol=1e-8)


@settings(max_examples=25, deadline=None)
@given(st.sampled_from(TYURIN_CASES), st.integers(0, 2**31), st.floats(-3, 3))
def test_form_equivalence(case, seed, log_eps):
    # the normal form holds iff the filtration conditions hold
    family, n, h = case
    alg = make_algebra(family, n)
    rng = np.random.default_rng(seed)
    cfg = LaxConfig.build(alg, [(0, 1)], [(1.0, h, random_group_element(alg, rng, 0.3))])
    L = sample_lax(build_constraint_system(cfg), seed=seed)
    assert (check_tyurin_form(L, 0) < 1e-9) and (filtration_residual(L, 0) < 1e-9)
    noise = LaxElement(cfg, L.blocks + 10.0 ** log_eps * np.array(
        [random_member(alg, rng) for _ in range(cfg.n_blocks)]))
    a, b = check_tyurin_form(noise, 0), filtration_residual(noise, 0)
    assert (a < 1e-9) == (b < 1e-9)


@pytest.mark.parametrize("family,n,h", TYURIN_CASES)
def test_commutator_closure(family, n, h):
    alg = make_algebra(family, n)
    rng = np.random.default_rng(4)
    g = random_group_element(alg, rng, 0.3)
    cfg = LaxConfig.build(alg, [(0, 1)], [(1 + 1j, h, g)])
    space = build_constraint_system(cfg)
    L1, L2 = sample_lax(space, seed=1), sample_lax(space, seed=2)
    k = cfg.tyurin[0].depth
    X1 = local_expansion(L1, 1 + 1j, lo=-k, top=3 * k + 4)
    X2 = local_expansion(L2, 1 + 1j, lo=-k, top=3 * k + 4)
    C = X1.commutator(X2)
    assert tyurin_residual(C, cfg.tyurin[0].h, g) < 1e-10


def test_config_validation():
    alg = make_algebra("C", 2)
    with pytest.raises(ValueError):
        LaxConfig.build(alg, [(0, 1), (0, 2)])
    with pytest.raises(ValueError):
        LaxConfig.build(alg, [(0, 1)], [(0, [1, 0])])
    with pytest.raises(ValueError):
        LaxConfig.build(alg, [(0, 1)], [(1, [1, 0], 2 * np.eye(4))])
    with pytest.raises(ValueError):
        LaxConfig.build(alg, [(np.inf, 1)])


def test_sample_shape_checked():
    space = build_constraint_system(LaxConfig.build(make_algebra("C", 1), [(0, 1)]))
    with pytest.raises(ValueError):
        sample_lax(space, coefficients=np.ones(2))
    L = sample_lax(space, coefficients=np.ones(space.dim))
    assert isinstance(local_expansion(L, 0.0), LaurentMatrix)
