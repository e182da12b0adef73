import numpy as np
import pytest

from laxbcd.algebra import grading, make_algebra, random_member
from laxbcd.invariants import InvariantId
from laxbcd.laxspace import LaxConfig, LaxElement
from laxbcd.moper import (
    FlowTriple, InfeasibleSystemError, MOperator, build_m_operator, gradient_field,
    holomorphy_residual, m_config, matching_residual, pole_order_bound, principal_part_at,
    principal_part_series, read_nu_lstsq, read_tyurin_data, tangency_residual,
)

from conftest import b2_instance, c2_instance, plain_instance, tyurin_instance


def test_principal_part_double_pole():
    A = np.array([[1.0, 2.0], [3.0, -1.0]])
    z0 = 0.5 + 0.2j
    out = principal_part_at(lambda z: A / (z - z0) ** 2 + np.exp(z) * A, z0, 3, radius=0.4)
    assert np.allclose(out[0], 0, atol=1e-13)
    assert np.allclose(out[1], A, atol=1e-13)
    assert np.allclose(out[2], 0, atol=1e-13)
    hol = principal_part_at(lambda z: np.cos(z) * A, z0, 2, radius=0.4)
    assert np.abs(hol).max() < 1e-13
    with pytest.raises(ValueError):
        principal_part_at(lambda z: A, z0, 1, radius=1.0, singularities=[z0 + 0.5])


@pytest.mark.parametrize("make", [b2_instance, c2_instance])
@pytest.mark.parametrize("chi,m", [(("char_coeff", 1), 0), (("char_coeff", 2), 0),
                                   (("char_coeff", 2), 1), (("trace_power", 2), 2)])
def test_quadrature_matches_series(make, chi, m):
    L = make(seed=3)
    triple = FlowTriple(InvariantId(*chi), 0, m)
    R = pole_order_bound(L, triple)
    zP = L.config.punctures[0].z
    others = [p.z for p in L.config.punctures[1:]] + [t.z for t in L.config.tyurin]
    quad = principal_part_at(gradient_field(L, triple), zP, R, singularities=others)
    exact = principal_part_series(L, triple)
    assert np.abs(quad - exact).max() < 1e-10 * max(1, np.abs(exact).max())


def test_gamma_empty_trace_square():
    # grad tr L^2 = 2L, so M is twice the polar part of L at P
    L = plain_instance("C", 2, [(0, 2), (1 + 1j, 1)], seed=1)
    M = build_m_operator(L, FlowTriple(InvariantId("trace_power", 2), 0, 0))
    assert np.allclose(M.principal_part, 2 * L.puncture_part(0), atol=1e-12)
    assert np.abs(M.C0).max() == 0
    assert holomorphy_residual(M, L) < 1e-12


def test_constant_lax_gives_zero():
    alg = make_algebra("D", 2)
    cfg = LaxConfig.build(alg, [(0, 1)])
    L = LaxElement(cfg, np.array([random_member(alg, np.random.default_rng(0)), np.zeros((4, 4))]))
    M = build_m_operator(L, FlowTriple(InvariantId("char_coeff", 2), 0, 0))
    assert np.abs(M.element.blocks).max() < 1e-12


@pytest.mark.parametrize("seed", range(3))
@pytest.mark.parametrize("make,chi", [(b2_instance, 1), (b2_instance, 2),
                                      (c2_instance, 1), (c2_instance, 2)])
def test_feasible_construction(make, chi, seed):
    L = make(seed=seed)
    M = build_m_operator(L, FlowTriple(InvariantId("char_coeff", chi), 0, 0))
    assert matching_residual(L, M) < 1e-9
    assert holomorphy_residual(M, L) < 1e-9
    assert tangency_residual(L, M) < 1e-8
    assert M.solve_residual < 1e-9
    # the minimum-norm solution removes the gauge kernel
    t = L.config.tyurin[0]
    gr = grading(L.config.alg, t.h)
    expected = 1 + sum(q * gr.dim(q) for q in gr.pieces if q > 0)
    assert M.rank_deficiency == expected


def test_d3_depth_one_two_punctures():
    L = tyurin_instance("D", 3, [1, 0, 0], [(0, 1), (2 - 1j, 1)], seed=4)
    M = build_m_operator(L, FlowTriple(InvariantId("pfaffian"), 1, 0))
    assert matching_residual(L, M) < 1e-9
    assert tangency_residual(L, M) < 1e-8


def test_deep_grading_with_two_punctures_is_infeasible():
    L = tyurin_instance("C", 2, [1, 0], [(0, 1), (2 + 0.5j, 1)], seed=0)
    with pytest.raises(InfeasibleSystemError) as err:
        build_m_operator(L, FlowTriple(InvariantId("char_coeff", 2), 0, 0))
    assert err.value.residual > 1e-6


def test_nu_readouts_agree():
    L = b2_instance(seed=2)
    M = build_m_operator(L, FlowTriple(InvariantId("char_coeff", 2), 0, 1))
    nu_a, M0 = read_tyurin_data(M, 0)
    nu_b = read_nu_lstsq(M, 0)
    assert abs(nu_a - nu_b) < 1e-10 * max(1, abs(nu_a))
    assert abs(nu_a - M.nu[0]) < 1e-8 * max(1, abs(nu_a))
    assert np.allclose(M0, M.M0[0])


def test_read_pure_translation():
    L = c2_instance(seed=0)
    triple = FlowTriple(InvariantId("char_coeff", 1), 0, 0)
    cfg = m_config(L, triple)
    t = cfg.tyurin[0]
    nu = 0.7 - 0.2j
    el = LaxElement.zero(cfg)
    idx = [i for i, b in enumerate(cfg.block_layout()) if b[0] == "G" and b[2] == 1][0]
    el.blocks[idx] = nu * t.h_matrix
    M = MOperator(triple, el, np.array([nu]), (np.zeros((4, 4)),), 0.0, 0)
    assert abs(read_tyurin_data(M, 0)[0] - nu) < 1e-12
    assert abs(read_nu_lstsq(M, 0) - nu) < 1e-12
    # a translation of the Tyurin point is tangent to the Lax space
    assert tangency_residual(L, M) < 1e-12


def test_triple_validation():
    L = c2_instance()
    with pytest.raises(ValueError):
        FlowTriple(InvariantId("char_coeff", 1), 3, 0).validate(L.config)
    with pytest.raises(ValueError):
        FlowTriple(InvariantId("char_coeff", 1), 0, -1).validate(L.config)
    with pytest.raises(ValueError):
        FlowTriple(InvariantId("pfaffian"), 0, 0).validate(L.config)
