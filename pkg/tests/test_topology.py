import numpy as np
import pytest

from fmlab.errors import ConfigurationError
from fmlab.topology import (
    UNREACHABLE,
    distance,
    distances_from,
    from_adjacency,
    make_lattice_box,
    neighbors,
    sub_box,
)

rng = np.random.default_rng(42)


def test_chain_of_three():
    g = make_lattice_box(1, (3,))
    assert g.n_vertices == 3
    assert neighbors(g, 1) == (0, 2)
    assert neighbors(g, 0) == (1,)
    edges = {(x, y) for x in range(3) for y in g.adjacency[x] if x < y}
    assert edges == {(0, 1), (1, 2)}
    assert g.kappa == 2


def test_unit_square():
    g = make_lattice_box(2, (2, 2))
    assert g.n_vertices == 4
    assert sum(len(a) for a in g.adjacency) // 2 == 4
    assert g.kappa == 2


def test_lattice_center_degree():
    g = make_lattice_box(2, (3, 3))
    degs = [len(a) for a in g.adjacency]
    assert max(degs) == 4  # 2d at the center
    assert g.kappa == 4
    corner = 0
    assert len(g.adjacency[corner]) == 2


def test_degree_census_open_and_periodic():
    for d, sides in [(1, (6,)), (2, (4, 5)), (3, (3, 3, 3))]:
        g = make_lattice_box(d, sides)
        degs = np.array([len(a) for a in g.adjacency])
        assert degs.min() >= d and degs.max() <= 2 * d
        p = make_lattice_box(d, sides, periodic=True) if min(sides) >= 3 else None
        if p is not None:
            assert all(len(a) == 2 * d for a in p.adjacency)


def test_distance_examples():
    chain = make_lattice_box(1, (5,))
    assert distance(chain, 0, 4) == 4
    assert distance(chain, 2, 2) == 0
    box = make_lattice_box(2, (3, 3))
    # vertex (0,0) is 0, vertex (2,2) is 8 in row-major order
    assert distance(box, 0, 8) == 4


def test_distance_matches_l1_on_open_boxes():
    g = make_lattice_box(2, (4, 5))
    for _ in range(30):
        x, y = rng.integers(0, g.n_vertices, 2)
        l1 = int(np.abs(g.coords[x] - g.coords[y]).sum())
        assert distance(g, int(x), int(y)) == l1


def test_distance_symmetry_and_triangle():
    g = make_lattice_box(2, (4, 4), periodic=True)
    for _ in range(40):
        x, y, z = (int(v) for v in rng.integers(0, g.n_vertices, 3))
        assert distance(g, x, y) == distance(g, y, x)
        assert distance(g, x, z) <= distance(g, x, y) + distance(g, y, z)


def test_disconnected_distance_sentinel():
    g = from_adjacency([(1,), (0,), ()])
    assert distance(g, 0, 2) == UNREACHABLE
    assert distances_from(g, 2)[0] == UNREACHABLE


def test_from_adjacency_rejects_asymmetry_and_loops():
    with pytest.raises(ConfigurationError):
        from_adjacency([(1,), ()])
    with pytest.raises(ConfigurationError):
        from_adjacency([(0,)])


def test_sub_box_examples():
    chain = make_lattice_box(1, (9,))
    sub, idx = sub_box(chain, 4, 2)
    assert sub.n_vertices == 5
    assert list(idx) == [2, 3, 4, 5, 6]
    single, idx0 = sub_box(chain, 4, 0)
    assert single.n_vertices == 1 and single.adjacency == ((),)
    whole, idxw = sub_box(chain, 4, 100)
    assert whole.n_vertices == 9
    assert np.array_equal(idxw, np.arange(9))


def test_sub_box_is_induced_isomorphism():
    g = make_lattice_box(2, (5, 5))
    sub, idx = sub_box(g, 12, 1)
    assert sub.n_vertices == 9
    back = {i: int(v) for i, v in enumerate(idx)}
    for i in range(sub.n_vertices):
        image = {back[j] for j in sub.adjacency[i]}
        ambient = set(g.adjacency[back[i]]) & set(back.values())
        assert image == ambient


def test_configuration_errors():
    with pytest.raises(ConfigurationError):
        make_lattice_box(2, (3,))
    with pytest.raises(ConfigurationError):
        make_lattice_box(1, (0,))
    with pytest.raises(ConfigurationError):
        make_lattice_box(1, (2,), periodic=True)
    with pytest.raises(ConfigurationError):
        sub_box(make_lattice_box(1, (5,)), 2, -1)
