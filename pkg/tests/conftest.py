import importlib.resources

import numpy as np
import pytest

from platemorph import load_material_card


@pytest.fixture(scope="session")
def card_path():
    return str(importlib.resources.files("platemorph") / "data" / "pla-fixture.json")


@pytest.fixture(scope="session")
def card(card_path):
    return load_material_card(card_path)


def _edges(z, n_slices):
    # sub-slice edges must include the layer interfaces, otherwise the
    # midpoint rule straddles a stiffness jump and exactness is lost
    return np.unique(np.concatenate([np.linspace(z[0], z[-1], n_slices + 1), z]))


def quadrature_abd(layup, n_slices=1000):
    """Independent ABD oracle: locate the layer by z and integrate sub-slices.

    The stiffness is piecewise constant in z, so sampling it at sub-slice
    midpoints with exact z-moment weights reproduces the integrals exactly;
    the layer lookup by coordinate cross-checks the interface bookkeeping.
    """
    from platemorph.laminate import transform_stiffness
    from platemorph.material import reduced_stiffness

    z = layup.z
    qbars = [
        transform_stiffness(reduced_stiffness(ly.material.elastic), ly.theta)
        for ly in layup.layers
    ]
    a = np.zeros((3, 3))
    b = np.zeros((3, 3))
    d = np.zeros((3, 3))
    edges = _edges(z, n_slices)
    for za, zb in zip(edges[:-1], edges[1:]):
        zm = 0.5 * (za + zb)
        k = int(np.searchsorted(z, zm) - 1)
        a += qbars[k] * (zb - za)
        b += qbars[k] * (zb * zb - za * za) / 2.0
        d += qbars[k] * (zb ** 3 - za ** 3) / 3.0
    return a, b, d


def quadrature_thermal(layup, t_a, n_slices=1000):
    from platemorph.laminate import transform_recovery, transform_stiffness
    from platemorph.material import recovery_strains, reduced_stiffness

    z = layup.z
    qa = []
    for ly in layup.layers:
        qb = transform_stiffness(reduced_stiffness(ly.material.elastic), ly.theta)
        e1, e2, _ = recovery_strains(ly.material, t_a)
        qa.append(qb @ transform_recovery(e1, e2, ly.theta))
    n_t = np.zeros(3)
    m_t = np.zeros(3)
    edges = _edges(z, n_slices)
    for za, zb in zip(edges[:-1], edges[1:]):
        zm = 0.5 * (za + zb)
        k = int(np.searchsorted(z, zm) - 1)
        n_t += qa[k] * (zb - za)
        m_t += qa[k] * (zb * zb - za * za) / 2.0
    return n_t, m_t


def angle_dist(a, b):
    """Distance between printing directions (degrees, 180-periodic)."""
    d = abs(a - b) % 180.0
    return min(d, 180.0 - d)
