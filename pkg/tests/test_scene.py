from __future__ import annotations

import itertools

import numpy as np
import pytest
from scipy import ndimage

from countpoint.scene import (BASE, BALL_INTENSITY, FULL_GEOMETRY, HAND_INTENSITY, REDUCED_GEOMETRY, GridGeometry,
                              PostureTable, Scene, World, default_posture_table, hand_sprite, posture_for_column,
                              random_scene, read_pgm, render, scenes_hash, snap_posture, write_pgm)


def test_full_geometry_matches_image_size():
    assert FULL_GEOMETRY.shape == (40, 134)
    assert FULL_GEOMETRY.n_positions == 55
    assert FULL_GEOMETRY.pool_output_size() == 7 * 19 * 66


def test_reduced_pool_size():
    assert REDUCED_GEOMETRY.pool_output_size() == 7 * 10 * 33


@pytest.mark.parametrize("kwargs", [dict(cell_width=13), dict(cell_height=9), dict(ball_radius=0),
                                    dict(trigger_length=0), dict(ball_radius=5.0)])
def test_bad_geometry_rejected(kwargs):
    with pytest.raises(ValueError):
        GridGeometry(**kwargs)


def test_cell_centers_row_zero_is_bottom():
    x0, y0 = FULL_GEOMETRY.cell_center(0, 0)
    x1, y4 = FULL_GEOMETRY.cell_center(1, 4)
    assert y0 > y4
    assert x1 - x0 == FULL_GEOMETRY.cell_width


def test_empty_scene_is_black():
    assert not render(Scene(), FULL_GEOMETRY).any()


def test_trigger_line_position():
    img = render(Scene((), True), FULL_GEOMETRY)
    assert img.sum() == FULL_GEOMETRY.trigger_length
    assert img[0, -FULL_GEOMETRY.trigger_length:].all()


def test_single_ball_centroid_at_cell_center():
    for geo in (FULL_GEOMETRY, REDUCED_GEOMETRY):
        for c, r in [(0, 0), (5, 2), (10, 4)]:
            img = render(Scene(((c, r),)), geo)
            ii, jj = np.nonzero(img)
            cx, cy = geo.cell_center(c, r)
            assert abs(jj.mean() + 0.5 - cx) < 0.5
            assert abs(ii.mean() + 0.5 - cy) < 0.5
            assert set(np.unique(img)) == {0.0, BALL_INTENSITY}


def test_scene_rejects_shared_column():
    with pytest.raises(ValueError):
        Scene(((3, 0), (3, 2)))


def test_scene_rejects_out_of_grid():
    with pytest.raises(ValueError):
        render(Scene(((11, 0),)), FULL_GEOMETRY)


@pytest.mark.parametrize("geo", [FULL_GEOMETRY, REDUCED_GEOMETRY], ids=["full", "reduced"])
def test_component_count_equals_ball_count(geo):
    rng = np.random.default_rng(7)
    for _ in range(200):
        n = int(rng.integers(0, 11))
        scene = random_scene(n, rng, geo)
        _, count = ndimage.label(render(scene, geo) > 0)
        assert count == n


def test_hand_sprite_footprint():
    for geo in (FULL_GEOMETRY, REDUCED_GEOMETRY):
        for c in range(geo.columns):
            s = hand_sprite(c, geo)
            ii, jj = np.nonzero(s)
            assert len(ii) > 0
            assert set(np.unique(s)) == {0.0, HAND_INTENSITY}
            # touches the bottom edge, stays inside the lowest row band
            assert ii.max() == geo.image_height - 1
            assert ii.min() >= geo.image_height - geo.cell_height - 1
            _, count = ndimage.label(s > 0)
            assert count == 1


def test_hand_sprites_move_left_to_right():
    xs = [np.nonzero(hand_sprite(c))[1].mean() for c in range(11)]
    assert all(b > a for a, b in zip(xs, xs[1:]))


def test_hand_is_drawn_on_top():
    world = World(FULL_GEOMETRY)
    img = world.render(Scene(((4, 0),), False, 4))
    assert (img == HAND_INTENSITY).sum() == (world.sprites[4] > 0).sum()


def test_with_hands_matches_render():
    world = World(REDUCED_GEOMETRY)
    scene = Scene(((1, 0), (6, 3)), True)
    imgs = np.stack([world.render(scene)] * 3)
    out = world.with_hands(imgs, np.array([BASE, 1, 6]))
    assert np.array_equal(out[0], world.render(scene))
    assert np.array_equal(out[1], world.render(scene.with_hand(1)))
    assert np.array_equal(out[2], world.render(scene.with_hand(6)))


def test_pgm_round_trip(tmp_path):
    img = render(Scene(((2, 1), (7, 3)), True, 2), FULL_GEOMETRY)
    write_pgm(tmp_path / "a.pgm", img)
    back = read_pgm(tmp_path / "a.pgm")
    assert back.shape == img.shape
    assert np.abs(back - img).max() <= 0.5 / 255 + 1e-12
    assert (tmp_path / "a.pgm").read_bytes().startswith(b"P5\n134 40\n255\n")


def test_random_scene_rows_restricted():
    rng = np.random.default_rng(0)
    for _ in range(50):
        s = random_scene(10, rng, FULL_GEOMETRY, rows=(3, 4))
        assert {r for _, r in s.balls} <= {3, 4}
        assert len(s.columns) == 10


def test_random_scenes_vary():
    rng = np.random.default_rng(1)
    assert len(scenes_hash(random_scene(5, rng) for _ in range(100))) > 90


# -- postures -----------------------------------------------------------------------

def test_posture_table_invariants():
    table = default_posture_table()
    cands = np.vstack([table.base, table.pointing])
    assert cands.shape == (12, 7)
    assert np.all((cands >= 0) & (cands <= 1))
    d = [np.linalg.norm(a - b) for a, b in itertools.combinations(cands, 2)]
    assert min(d) >= 0.05
    assert abs(table.min_pairwise_distance() - min(d)) < 1e-12
    assert np.allclose(table.base, 0.1)


def test_postures_monotone_or_fixed_per_joint():
    table = default_posture_table()
    diffs = np.diff(table.pointing, axis=0)
    for j in range(7):
        assert np.all(diffs[:, j] >= 0) or np.all(diffs[:, j] <= 0)


def test_snap_identities():
    table = default_posture_table()
    assert snap_posture(table.base, table) == BASE
    for c in range(11):
        assert snap_posture(posture_for_column(c), table) == c
    mix = 0.9 * table.pointing[4] + 0.1 * table.pointing[5]
    assert snap_posture(mix, table) == 4


def test_snap_matches_brute_force():
    table = default_posture_table()
    rng = np.random.default_rng(3)
    ps = rng.random((2000, 7))
    cands = [(BASE, table.base)] + [(c, table.pointing[c]) for c in range(11)]
    expected = []
    for p in ps:
        best = min(cands, key=lambda kv: (np.sum((p - kv[1]) ** 2), kv[0] != BASE, kv[0]))
        expected.append(best[0])
    assert np.array_equal(table.snap(ps), expected)


def test_snap_tie_goes_to_lower_identity():
    table = PostureTable(np.array([[0.2, 0.2], [0.4, 0.4]]), np.array([0.0, 0.0]))
    assert snap_posture([0.3, 0.3], table) == 0
    assert snap_posture([0.1, 0.1], table) == BASE


def test_posture_table_rejects_out_of_range():
    with pytest.raises(ValueError):
        PostureTable(np.full((11, 7), 1.5), np.full(7, 0.1))
