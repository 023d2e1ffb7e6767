import pytest

from derham.forms import Simplex
from derham.mesh import (annulus_mesh, interval_mesh, reference_tet,
                         reference_triangle, split_edge_square,
                         three_tet_fan, three_triangle_mesh,
                         two_tet_mesh, two_triangle_square)

REF = {
    1: [[0.0], [1.0]],
    2: [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]],
    3: [[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
}


def random_simplex(n, rng, min_volume=0.08):
    """Random nondegenerate simplex with a quality floor."""
    while True:
        verts = rng.random((n + 1, n)) * 2.0 - 0.5
        try:
            s = Simplex(verts)
        except ValueError:
            continue
        if abs(float(s.measure)) > min_volume:
            return verts


@pytest.fixture(scope="session")
def meshes():
    return {
        "interval": interval_mesh(3),
        "tri": reference_triangle(),
        "square": two_triangle_square(),
        "tri3": three_triangle_mesh(),
        "split": split_edge_square(),
        "annulus": annulus_mesh(),
        "tet": reference_tet(),
        "tet2": two_tet_mesh(),
        "tet3": three_tet_fan(),
    }
