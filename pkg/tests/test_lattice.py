import numpy as np
import pytest

from frogsim.errors import EmptySetError, GeometryError
from frogsim.lattice import (
    AdaptedBasis,
    SignedPermutation,
    all_signed_permutations,
    ball_coords,
    closest_in_set,
    default_probe_set,
    find_adapted_basis,
    identity_map,
    l1,
    linf,
    neighbors,
    shell_coords,
    step_vectors,
)


def test_l1_examples():
    assert l1((0, 0)) == 0
    assert l1((3, -4)) == 7
    assert l1((1, 1, 1)) == 3


def test_norm_inequalities_random():
    rng = np.random.default_rng(0)
    for _ in range(200):
        d = rng.integers(1, 5)
        x = tuple(int(v) for v in rng.integers(-50, 51, d))
        assert linf(x) <= l1(x) <= d * linf(x)


def test_neighbors_canonical_order():
    assert neighbors((0, 0)) == [(1, 0), (-1, 0), (0, 1), (0, -1)]
    assert neighbors((5,)) == [(6,), (4,)]
    nb3 = neighbors((0, 0, 0))
    assert len(nb3) == 6
    for p in nb3:
        assert l1(p) == 1


def test_closest_in_set_examples():
    assert closest_in_set((0, 0), {(0, 0)}) == (0, 0)
    assert closest_in_set((0, 0), {(1, 0), (0, -1)}) == (0, -1)
    assert closest_in_set((2, 0), {(0, 0), (3, 1)}) == (0, 0)


def test_closest_in_set_order_independent():
    sites = [(1, 1), (-2, 0), (0, 2), (2, 0), (0, -2)]
    expected = closest_in_set((0, 0), sites)
    for shift in range(len(sites)):
        rotated = sites[shift:] + sites[:shift]
        assert closest_in_set((0, 0), rotated) == expected
    assert expected == (-2, 0)  # all at distance 2, lexicographic smallest


def test_closest_in_set_empty():
    with pytest.raises(EmptySetError):
        closest_in_set((0, 0), [])


def test_signed_permutation_apply():
    g = SignedPermutation(perm=(1, 0), signs=(1, -1))
    assert g.apply((3, 5)) == (5, -3)
    ident = identity_map(3)
    assert ident.apply((4, -2, 7)) == (4, -2, 7)


def test_signed_permutation_group_laws():
    rng = np.random.default_rng(1)
    group = all_signed_permutations(3)
    assert len(group) == 48
    for _ in range(50):
        g = group[rng.integers(len(group))]
        h = group[rng.integers(len(group))]
        x = tuple(int(v) for v in rng.integers(-9, 10, 3))
        assert g.compose(h).apply(x) == g.apply(h.apply(x))
        assert g.compose(g.inverse()).apply(x) == x
        assert l1(g.apply(x)) == l1(x)
        assert linf(g.apply(x)) == linf(x)


def test_adapted_map_examples():
    swap = SignedPermutation(perm=(1, 0), signs=(1, 1))
    basis = AdaptedBasis(maps=(identity_map(2), swap), base_point=(2, 1), quality=0.5)
    assert basis.apply((1, 0)) == (2, 1)
    assert basis.apply((0, 0)) == (0, 0)
    assert basis.apply((1, 1)) == (3, 3)


def test_adapted_map_upper_bound_random():
    rng = np.random.default_rng(2)
    for _ in range(30):
        x = tuple(int(v) for v in rng.integers(-4, 5, 2))
        if l1(x) == 0:
            continue
        basis = find_adapted_basis(x)
        for _ in range(20):
            y = tuple(int(v) for v in rng.integers(-6, 7, 2))
            assert l1(basis.apply(y)) <= l1(x) * l1(y)


def test_find_adapted_basis_unit_direction():
    basis = find_adapted_basis((1, 0))
    assert basis.quality == pytest.approx(1.0)
    assert basis.maps[0].apply((1, 0)) == (1, 0)
    assert basis.images() == [(1, 0), (0, 1)]


def test_find_adapted_basis_diagonal_brute_force():
    # independent exhaustive check over the 8 grid symmetries of Z^2
    x = (1, 1)
    probes = default_probe_set(2)
    best = 0.0
    for g in all_signed_permutations(2):
        worst = min(
            l1((y[0] * x[0] + y[1] * g.apply(x)[0], y[0] * x[1] + y[1] * g.apply(x)[1]))
            / (l1(x) * l1(y))
            for y in probes
        )
        best = max(best, worst)
    basis = find_adapted_basis(x)
    assert basis.quality == pytest.approx(best)
    assert basis.quality == pytest.approx(0.5)


def test_find_adapted_basis_quality_at_most_one():
    for x in [(1, 0), (1, 1), (2, 1), (3, -2)]:
        assert find_adapted_basis(x).quality <= 1.0 + 1e-12


def test_find_adapted_basis_errors():
    with pytest.raises(GeometryError):
        find_adapted_basis((0, 0))
    with pytest.raises(GeometryError):
        find_adapted_basis((1, 0, 0, 0, 0))


def test_ball_and_shell():
    pts = ball_coords(2, 2)
    assert pts.shape[0] == 13
    assert sorted(map(tuple, pts.tolist())) == [tuple(p) for p in pts.tolist()]
    shell = shell_coords((0, 0), 2)
    assert all(l1(p) == 2 for p in shell)
    assert len(shell) == 8
    assert shell_coords((3, 3), 0) == [(3, 3)]


def test_step_vectors_shape():
    sv = step_vectors(3)
    assert sv.shape == (6, 3)
    assert np.abs(sv).sum(axis=1).tolist() == [1] * 6
