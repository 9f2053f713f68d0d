import math

import numpy as np
import pytest

from svplab import geometry as geo
from svplab import solver as sv
from svplab import structure as st

BS = 3.0


def make_strip(lateral, beta_star=BS):
    return geo.CanonicalDomain(n=2, k=1, base=((0.0, 1.0),), axial_kind="layer",
                               alpha=1.0, beta=1.0 + 2.0 * beta_star, lateral_bc=lateral)


def solve_cosh_dirichlet(h, beta_star=BS, p=2.0):
    dom = make_strip(("dirichlet0", "dirichlet0"), beta_star)
    mesh = geo.build_mesh(dom, h)
    g = lambda x: np.sin(np.pi * x[:, 0])
    bc = sv.BoundarySpec(g_low=g, g_high=g, lateral=("dirichlet0", "dirichlet0"))
    return sv.solve(dom, mesh, st.constant_operator(p), bc)


def solve_cosh_neumann(h, beta_star=BS, p=2.0):
    dom = make_strip(("neumann", "neumann"), beta_star)
    mesh = geo.build_mesh(dom, h)
    g = lambda x: np.cos(np.pi * x[:, 0])
    bc = sv.BoundarySpec(g_low=g, g_high=g, lateral=("neumann", "neumann"))
    return sv.solve(dom, mesh, st.constant_operator(p), bc)


def solve_linear(h=1 / 16, beta_star=1.0):
    dom = make_strip(("neumann", "neumann"), beta_star)
    mesh = geo.build_mesh(dom, h)
    bc = sv.BoundarySpec(g_low=lambda x: np.full(len(x), -beta_star),
                         g_high=lambda x: np.full(len(x), beta_star),
                         lateral=("neumann", "neumann"))
    return sv.solve(dom, mesh, st.constant_operator(2.0), bc)


def cosh_energy(t, tau, beta_star=BS):
    """Closed form of the slab integral of |grad f|^2 for both cosh modes."""
    return (math.pi / 4.0) * (math.sinh(2 * math.pi * tau) - math.sinh(2 * math.pi * t)) \
        / math.cosh(math.pi * beta_star) ** 2


def cosh_section_energy(tau, beta_star=BS):
    return (math.pi**2 / 2.0) * math.cosh(2 * math.pi * tau) / math.cosh(math.pi * beta_star) ** 2


def cosh_section_mass(tau, beta_star=BS):
    """Closed form of the section integral of |f|^2 (C = 0) for cosh modes."""
    return 0.5 * math.cosh(math.pi * tau) ** 2 / math.cosh(math.pi * beta_star) ** 2


@pytest.fixture(scope="session")
def cosh_dirichlet_16():
    return solve_cosh_dirichlet(1 / 16)


@pytest.fixture(scope="session")
def cosh_neumann_16():
    return solve_cosh_neumann(1 / 16)


@pytest.fixture(scope="session")
def linear_16():
    return solve_linear(1 / 16)
