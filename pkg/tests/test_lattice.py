import pytest
from hypothesis import given, settings
from hypothesis import strategies as hst

from rwdelab.lattice import (
    AllowedPath,
    Box,
    Site,
    UsageError,
    box1d,
    cone_contains,
    linf,
    separation,
    site,
    validate_allowed_path,
)

COORD = hst.integers(min_value=-1000, max_value=1000)
SITES = hst.builds(lambda x, t: Site((x,), t), COORD, COORD)


def test_cone_examples():
    assert cone_contains(site(0, 0), site(2, 1), 2, "future")
    assert not cone_contains(site(0, 0), site(3, 1), 2, "future")
    # the apex belongs to both cones
    assert cone_contains(site(1, 5), site(1, 5), 3, "future")
    assert cone_contains(site(1, 5), site(1, 5), 3, "past")


def test_cone_errors():
    with pytest.raises(UsageError):
        cone_contains(site(0, 0), Site((1, 2), 0), 1, "future")
    with pytest.raises(UsageError):
        cone_contains(site(0, 0), site(1, 1), 1, "sideways")


@given(SITES, SITES, hst.integers(min_value=1, max_value=4))
@settings(max_examples=300, deadline=None)
def test_cone_duality(z, w, slope):
    assert cone_contains(z, w, slope, "future") == cone_contains(w, z, slope, "past")


def test_separation_examples():
    assert separation(box1d(0, 0, 0, 1), box1d(0, 0, 5, 6)) == 4
    assert separation(box1d(0, 0, 0, 3), box1d(0, 0, 2, 5)) == 0
    b = box1d(-1, 1, 0, 2)
    assert separation(b, b) == 0


INTERVALS = hst.tuples(COORD, hst.integers(min_value=0, max_value=50)).map(
    lambda ab: (ab[0], ab[0] + ab[1])
)


@given(INTERVALS, INTERVALS, INTERVALS, INTERVALS)
@settings(max_examples=300, deadline=None)
def test_separation_symmetric_and_overlap(sa, ta, sb, tb):
    a = Box((sa[0], ta[0]), (sa[1], ta[1]))
    b = Box((sb[0], tb[0]), (sb[1], tb[1]))
    assert separation(a, b) == separation(b, a) >= 0
    overlap = not (a.t_hi < b.t_lo or b.t_hi < a.t_lo)
    assert (separation(a, b) == 0) == overlap


def test_box_dims():
    b = Box((0, -2, 3), (4, 1, 7))
    assert b.spatial_diameter() == 4
    assert b.height() == 4
    assert b.n_sites() == 5 * 4 * 5
    with pytest.raises(UsageError):
        Box((0, 0), (-1, 0))


def test_allowed_path_examples():
    assert validate_allowed_path(AllowedPath(0, ((0,), (1,), (0,)), 1))
    assert not validate_allowed_path(AllowedPath(0, ((0,), (2,)), 1))
    assert validate_allowed_path(AllowedPath(0, ((0,), (2,)), 2))
    with pytest.raises(UsageError):
        AllowedPath(0, (), 1)


STEPS = hst.lists(hst.integers(min_value=-2, max_value=2), min_size=0, max_size=20)


@given(STEPS, hst.integers(min_value=1, max_value=3))
@settings(max_examples=200, deadline=None)
def test_prefix_validation(steps, lipschitz):
    xs = [0]
    for s in steps:
        xs.append(xs[-1] + s)
    path = AllowedPath(0, tuple((x,) for x in xs), lipschitz)
    if validate_allowed_path(path):
        for k in range(1, len(xs) + 1):
            prefix = AllowedPath(0, tuple((x,) for x in xs[:k]), lipschitz)
            assert validate_allowed_path(prefix)


def test_overflow_guard():
    with pytest.raises(UsageError):
        site(2**62, 0)
    with pytest.raises(UsageError):
        Site((0,), 2**63)


def test_linf():
    assert linf((-3, 2)) == 3
    assert linf(()) == 0
