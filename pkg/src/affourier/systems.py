"""Named systems used as positive and negative controls."""

import numpy as np

from .ifs import make_system


def rotation(theta):
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[c, -s], [s, c]])


def cantor_product():
    """Middle-thirds Cantor measure on the x-axis: two maps diag(1/3, 1/3)."""
    a = np.eye(2) / 3
    return make_system([a, a], [[0.0, 0.0], [2 / 3, 0.0]], [0.5, 0.5])


def proximal_pair():
    """{0.45 R(1), diag(0.6, 0.25)}: proximal and totally irreducible."""
    return make_system(
        [0.45 * rotation(1.0), np.diag([0.6, 0.25])],
        [[0.0, 0.0], [0.4, 0.4]],
        [0.5, 0.5],
    )


def dirac():
    """One map 0.5 Id + (1, 0); the measure is the point mass at (2, 0)."""
    return make_system([0.5 * np.eye(2)], [[1.0, 0.0]], [1.0])


def lattice_control():
    """Four maps (1/3) Id with translations {0, 2/3}^2: product of Cantor measures."""
    a = np.eye(2) / 3
    b = [[0.0, 0.0], [2 / 3, 0.0], [0.0, 2 / 3], [2 / 3, 2 / 3]]
    return make_system([a] * 4, b, [0.25] * 4)


def conformal_pair(rho=0.5, angles=(1.0, 2.3)):
    """Scaled rotations sharing one ratio: the cocycle is constant (arithmetic)."""
    return make_system(
        [rho * rotation(th) for th in angles],
        [[0.0, 0.0], [0.5, 0.0]],
        [0.5, 0.5],
    )


def positive_pair():
    """Entrywise positive matrices; they preserve the positive quadrant."""
    return make_system(
        [np.array([[0.5, 0.2], [0.1, 0.3]]), np.array([[0.3, 0.1], [0.25, 0.4]])],
        [[0.0, 0.0], [1.0, 0.5]],
        [0.4, 0.6],
    )


def diagonal_pair():
    """Commuting diagonal maps: the coordinate axes are invariant."""
    return make_system(
        [np.diag([0.5, 0.3]), np.diag([0.25, 0.6])],
        [[0.0, 0.0], [1.0, 1.0]],
        [0.5, 0.5],
    )


def proximal_triple_3d():
    """A 3-dimensional proximal, irreducible example."""
    c, s = np.cos(1.0), np.sin(1.0)
    rot = np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])
    c2, s2 = np.cos(0.7), np.sin(0.7)
    rot2 = np.array([[1.0, 0.0, 0.0], [0.0, c2, -s2], [0.0, s2, c2]])
    return make_system(
        [0.45 * rot @ rot2, np.diag([0.6, 0.35, 0.2]), 0.4 * rot2.T],
        [[0.0, 0.0, 0.0], [0.4, 0.4, 0.0], [0.0, 0.3, 0.5]],
        [0.4, 0.3, 0.3],
    )


CATALOG = {
    "cantor_product": cantor_product,
    "proximal_pair": proximal_pair,
    "dirac": dirac,
    "lattice_control": lattice_control,
    "conformal_pair": conformal_pair,
    "positive_pair": positive_pair,
    "diagonal_pair": diagonal_pair,
    "proximal_triple_3d": proximal_triple_3d,
}
