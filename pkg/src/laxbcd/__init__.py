"""Lax operator algebras of types B, C, D on the Riemann sphere.

Lax spaces with Tyurin data, spectral curves, invariant gradients,
M-operators, isospectral flows and involution-adapted eigenvector frames.
"""
from .algebra import AlgebraSpec, make_algebra
from .flow import FlowState, commutation_check, integrate
from .invariants import InvariantId, gradient
from .laxspace import LaxConfig, LaxElement, build_constraint_system, sample_lax
from .moper import FlowTriple, build_m_operator

__version__ = "0.1.0"

__all__ = [
    "AlgebraSpec",
    "make_algebra",
    "LaxConfig",
    "LaxElement",
    "build_constraint_system",
    "sample_lax",
    "InvariantId",
    "gradient",
    "FlowTriple",
    "build_m_operator",
    "FlowState",
    "integrate",
    "commutation_check",
]
