import math

import numpy as np
import pytest

from mirrorsink.errors import ConfigurationError, GeometryError
from mirrorsink.geometry import (
    AntennaArray,
    ChannelDatabase,
    Point,
    VirtualReceiver,
    Wall,
    build_database,
    build_virtual_receiver,
    mirror_point,
    rectangle_room,
    wall_ula,
)

from conftest import make_db

X0 = Wall(Point(0, -5), Point(0, 5), "x0")
Y0 = Wall(Point(-5, 0), Point(5, 0), "y0")


def bounce_point(user, antenna, wall):
    """Specular point from equal angles: split the along-wall gap by the ratio of heights."""
    a = np.asarray(wall.a, float)
    t = np.subtract(wall.b, wall.a) / wall.length
    n = np.array([-t[1], t[0]])
    hu, ha = abs((np.asarray(user) - a) @ n), abs((np.asarray(antenna) - a) @ n)
    su, sa = (np.asarray(user) - a) @ t, (np.asarray(antenna) - a) @ t
    s = su + (sa - su) * hu / (hu + ha)
    return a + s * t


def random_wall(rng):
    a = rng.uniform(-10, 10, 2)
    b = a + rng.uniform(0.5, 5, 2) * rng.choice([-1, 1], 2)
    return Wall(Point(*a), Point(*b), "w")


def test_mirror_axis_examples():
    assert mirror_point((1, 2), X0) == pytest.approx((-1, 2))
    assert mirror_point((3, 4), Y0) == pytest.approx((3, -4))


def test_degenerate_wall():
    with pytest.raises(GeometryError):
        mirror_point((1, 1), Wall(Point(1, 1), Point(1, 1), "bad"))


def test_mirror_involution(rng):
    for _ in range(1000):
        w = random_wall(rng)
        p = rng.uniform(-20, 20, 2)
        back = mirror_point(mirror_point(p, w), w)
        assert np.max(np.abs(np.subtract(back, p))) < 1e-12
        assert w.line_distance(mirror_point(p, w)) == pytest.approx(w.line_distance(p), abs=1e-12)


def test_virtual_receiver_reverses_order():
    vr = build_virtual_receiver(AntennaArray([(1, 1), (1, 2)]), X0, 2)
    np.testing.assert_allclose(vr.array.positions, [(-1, 2), (-1, 1)])
    assert vr.path_index == 2 and vr.source_wall == "x0"


def test_virtual_receiver_needs_l_ge_2():
    with pytest.raises(ConfigurationError):
        build_virtual_receiver(AntennaArray([(1, 1)]), X0, 1)


def test_virtual_centroid_distance():
    arr = AntennaArray([(3.0, 4.0), (3.0, 4.5), (3.0, 5.0)])
    vr = build_virtual_receiver(arr, X0, 2)
    assert vr.array.centroid.x == pytest.approx(-3.0)
    assert X0.line_distance(vr.array.centroid) == pytest.approx(X0.line_distance(arr.centroid))


def test_reversal_correspondence(rng):
    arr = AntennaArray(rng.uniform(1, 5, (7, 2)))
    w = random_wall(rng)
    vr = build_virtual_receiver(arr, w, 3)
    n = len(arr)
    for k in range(n):
        np.testing.assert_allclose(vr.array.positions[k], mirror_point(arr.positions[n - 1 - k], w), atol=1e-12)


def test_image_path_equals_specular_path(rng):
    for _ in range(1000):
        w = random_wall(rng)
        t = np.subtract(w.b, w.a) / w.length
        nrm = np.array([-t[1], t[0]])
        base = np.asarray(w.a)
        user = base + rng.uniform(-10, 10) * t + rng.uniform(0.1, 10) * nrm
        ant = base + rng.uniform(-10, 10) * t + rng.uniform(0.1, 10) * nrm
        b = bounce_point(user, ant, w)
        path = np.linalg.norm(user - b) + np.linalg.norm(b - ant)
        img = mirror_point(ant, w)
        assert np.linalg.norm(np.subtract(img, user)) == pytest.approx(path, abs=1e-9)


def test_virtual_array_path_lengths_match_reflections(db6):
    user = np.array([7.3, 12.9])
    for _, receivers in db6.aps:
        phys = receivers[0].array.positions
        n = len(phys)
        for r in receivers[1:]:
            w = next(w for w in db6.room if w.id == r.source_wall)
            for i in range(n):
                b = bounce_point(user, phys[n - 1 - i], w)
                path = np.linalg.norm(user - b) + np.linalg.norm(b - phys[n - 1 - i])
                assert np.linalg.norm(r.array.positions[i] - user) == pytest.approx(path, abs=1e-9)


def test_rect_room_one_ap_has_four_paths():
    walls = rectangle_room(0, 0, 20, 30)
    db = build_database(walls, [wall_ula(walls[0], 6, 0.0625)])
    assert db.L == 4
    assert [r.source_wall for r in db.receivers("ap1")] == [None, "right", "top", "left"]


def test_two_aps_give_eight_receivers(db6):
    assert sum(len(r) for _, r in db6.aps) == 8
    assert db6.n_total == 12


def test_empty_room_rejected():
    with pytest.raises(ConfigurationError):
        build_database([], [AntennaArray([(0, 0)])])


def test_ap_off_wall_rejected():
    walls = rectangle_room(0, 0, 20, 30)
    with pytest.raises(ConfigurationError, match="no wall"):
        build_database(walls, [AntennaArray([(5, 5), (5, 5.1)])])


def test_corner_ap_rejected():
    walls = rectangle_room(0, 0, 20, 30)
    with pytest.raises(ConfigurationError, match="walls"):
        build_database(walls, [AntennaArray([(0, 0), (0.0625, 0)])])


def test_ap_within_tolerance_accepted():
    walls = rectangle_room(0, 0, 20, 30)
    db = build_database(walls, [AntennaArray([(10, 5e-10), (10.0625, 0)])])
    assert db.L == 4


def test_virtual_receivers_outside_room(db6):
    for _, receivers in db6.aps:
        for r in receivers[1:]:
            assert not any(db6.contains(p) for p in r.array.positions)
        assert all(db6.contains(p) for p in receivers[0].array.positions)


def test_wall_ula_geometry():
    w = rectangle_room(0, 0, 20, 30)[0]
    arr = wall_ula(w, 4, 0.5)
    np.testing.assert_allclose(arr.positions, [(9.25, 0), (9.75, 0), (10.25, 0), (10.75, 0)])
    with pytest.raises(ConfigurationError):
        wall_ula(w, 100, 0.5, offset=1.0)


def test_direct_only_database():
    db = ChannelDatabase((), (("ap", (VirtualReceiver("ap", None, AntennaArray([(0, 0)]), 1),)),))
    assert db.L == 1


def test_path_index_invariant():
    with pytest.raises(ConfigurationError):
        VirtualReceiver("ap", "x0", AntennaArray([(0, 0)]), 1)
    with pytest.raises(ConfigurationError):
        VirtualReceiver("ap", None, AntennaArray([(0, 0)]), 2)


def test_antennas_must_be_distinct():
    with pytest.raises(GeometryError):
        AntennaArray([(1, 1), (1, 1)])


def test_database_is_frozen(db6):
    with pytest.raises(AttributeError):
        db6.room = ()
    with pytest.raises(ValueError):
        db6.direct_arrays()[0].positions[0, 0] = 3.0


def test_translation_moves_everything():
    db = make_db(6)
    moved = db.translated(3.0, -2.0)
    np.testing.assert_allclose(
        moved.direct_arrays()[0].positions, db.direct_arrays()[0].positions + [3.0, -2.0]
    )
    assert math.isclose(moved.bounds()[0], 3.0)
