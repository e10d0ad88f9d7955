"""Procedural visual world: ball scenes, hand sprites, trigger line and arm postures.

Row 0 is the bottom row of the stand (closest to the hand), column 0 the
leftmost position. Pixel coordinates follow array order: ``image[i, j]`` is
row ``i`` counted from the top, column ``j`` from the left.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

BASE = -1  # identity of the base (rest) posture in snap results and targets

HAND_INTENSITY = 0.6
BALL_INTENSITY = 1.0


@dataclass(frozen=True)
class GridGeometry:
    columns: int = 11
    rows: int = 5
    image_height: int = 40
    image_width: int = 134
    cell_width: int = 12
    cell_height: int = 8
    ball_radius: float = 3.0
    trigger_length: int = 8

    def __post_init__(self):
        if self.columns < 1 or self.rows < 1:
            raise ValueError("grid needs at least one row and one column")
        if self.cell_width * self.columns > self.image_width:
            raise ValueError("cell_width * columns exceeds image_width")
        if self.cell_height * self.rows > self.image_height:
            raise ValueError("cell_height * rows exceeds image_height")
        if not 0 < self.ball_radius:
            raise ValueError("ball_radius must be positive")
        if not 0 < self.trigger_length <= self.image_width:
            raise ValueError("trigger_length out of range")
        for c in (0, self.columns - 1):
            for r in (0, self.rows - 1):
                x, y = self.cell_center(c, r)
                if not (self.ball_radius <= x <= self.image_width - self.ball_radius
                        and self.ball_radius <= y <= self.image_height - self.ball_radius):
                    raise ValueError("ball at (%d, %d) would leave the image" % (c, r))

    @property
    def shape(self) -> tuple[int, int]:
        return (self.image_height, self.image_width)

    @property
    def margin_left(self) -> int:
        return (self.image_width - self.cell_width * self.columns) // 2

    @property
    def n_positions(self) -> int:
        return self.columns * self.rows

    def cell_center(self, column: int, row: int) -> tuple[float, float]:
        """Continuous (x, y) of a cell center; pixel (i, j) has center (j + .5, i + .5)."""
        x = self.margin_left + (column + 0.5) * self.cell_width
        y = self.image_height - (row + 0.5) * self.cell_height
        return x, y

    def column_band(self, column: int) -> tuple[float, float]:
        left = self.margin_left + column * self.cell_width
        return float(left), float(left + self.cell_width)

    def trigger_mask(self) -> np.ndarray:
        mask = np.zeros(self.shape, dtype=bool)
        mask[0, self.image_width - self.trigger_length:] = True
        return mask

    def pool_output_size(self, filters: int = 7, kernel: int = 3) -> int:
        oh = self.image_height - kernel + 1
        ow = self.image_width - kernel + 1
        return filters * (oh // 2) * (ow // 2)


FULL_GEOMETRY = GridGeometry()
# Half-resolution world used for multi-seed experiments on a single CPU.
REDUCED_GEOMETRY = GridGeometry(image_height=22, image_width=68, cell_width=6,
                                cell_height=4, ball_radius=1.6)


@dataclass(frozen=True)
class Scene:
    balls: tuple[tuple[int, int], ...] = ()
    visual_trigger: bool = False
    hand: Optional[int] = None

    def __post_init__(self):
        balls = tuple(sorted((int(c), int(r)) for c, r in self.balls))
        object.__setattr__(self, "balls", balls)
        cols = [c for c, _ in balls]
        if len(set(cols)) != len(cols):
            raise ValueError("two balls share column(s) %s" % sorted(cols))
        if len(balls) > 10:
            raise ValueError("at most 10 balls per scene, got %d" % len(balls))

    @property
    def columns(self) -> list[int]:
        """Ball columns in left-to-right (counting) order."""
        return [c for c, _ in self.balls]

    def validate(self, geometry: GridGeometry) -> None:
        for c, r in self.balls:
            if not (0 <= c < geometry.columns and 0 <= r < geometry.rows):
                raise ValueError("ball (%d, %d) outside the %dx%d grid"
                                 % (c, r, geometry.columns, geometry.rows))
        if self.hand is not None and not 0 <= self.hand < geometry.columns:
            raise ValueError("hand column %d out of range" % self.hand)

    def with_hand(self, hand: Optional[int]) -> "Scene":
        return Scene(self.balls, self.visual_trigger, hand)

    def key(self) -> tuple:
        return (self.balls, self.visual_trigger, self.hand)


def _disc_stamp(radius: float, cx: float, cy: float, shape) -> tuple[slice, slice, np.ndarray]:
    h, w = shape
    i0 = max(0, int(math.floor(cy - radius)))
    i1 = min(h, int(math.ceil(cy + radius)) + 1)
    j0 = max(0, int(math.floor(cx - radius)))
    j1 = min(w, int(math.ceil(cx + radius)) + 1)
    ii = np.arange(i0, i1)[:, None] + 0.5
    jj = np.arange(j0, j1)[None, :] + 0.5
    inside = (jj - cx) ** 2 + (ii - cy) ** 2 <= radius ** 2
    return slice(i0, i1), slice(j0, j1), inside


def _fill_convex(vertices: np.ndarray, shape) -> np.ndarray:
    """Boolean mask of pixel centers inside a convex polygon (counter-clockwise or not)."""
    h, w = shape
    yy, xx = np.mgrid[0:h, 0:w] + 0.5
    inside_pos = np.ones(shape, dtype=bool)
    inside_neg = np.ones(shape, dtype=bool)
    n = len(vertices)
    for k in range(n):
        x0, y0 = vertices[k]
        x1, y1 = vertices[(k + 1) % n]
        cross = (x1 - x0) * (yy - y0) - (y1 - y0) * (xx - x0)
        inside_pos &= cross >= -1e-9
        inside_neg &= cross <= 1e-9
    return inside_pos | inside_neg


def hand_tilt(column: int, geometry: GridGeometry) -> float:
    """Tilt in degrees, linear from -30 (column 0) to +30 (last column)."""
    if geometry.columns == 1:
        return 0.0
    return -30.0 + 60.0 * column / (geometry.columns - 1)


def hand_sprite(column: int, geometry: GridGeometry = FULL_GEOMETRY) -> np.ndarray:
    """Gray pointing-hand sprite for one column: a palm rectangle topped by a finger.

    The sprite is anchored at the bottom edge under the column center and its
    fingertip ends inside the lowest row's band. Zero outside the footprint.
    """
    if not 0 <= column < geometry.columns:
        raise ValueError("column %d out of range" % column)
    cw, ch = geometry.cell_width, geometry.cell_height
    palm_w = 2.0 * round(0.33 * cw)
    palm_h = max(1.0, round(0.375 * ch))
    finger_w = max(2.0, round(0.33 * cw))
    finger_len = ch - palm_h
    # local frame: origin at the anchor, y pointing up
    palm = [(-palm_w / 2, 0.0), (palm_w / 2, 0.0), (palm_w / 2, palm_h), (-palm_w / 2, palm_h)]
    finger = [(-finger_w / 2, palm_h), (finger_w / 2, palm_h), (0.0, palm_h + finger_len)]
    theta = math.radians(hand_tilt(column, geometry))
    cos_t, sin_t = math.cos(theta), math.sin(theta)
    ax, _ = geometry.cell_center(column, 0)
    ay = float(geometry.image_height)

    def to_image(points):
        out = []
        for x, y in points:
            rx = x * cos_t + y * sin_t
            ry = -x * sin_t + y * cos_t
            out.append((ax + rx, ay - ry))
        return np.array(out)

    mask = _fill_convex(to_image(palm), geometry.shape) | _fill_convex(to_image(finger), geometry.shape)
    return np.where(mask, HAND_INTENSITY, 0.0)


def composite(image: np.ndarray, sprite: np.ndarray) -> np.ndarray:
    """Hand in front: sprite pixels replace image pixels wherever the sprite is nonzero."""
    return np.where(sprite > 0, sprite, image)


def render(scene: Scene, geometry: GridGeometry = FULL_GEOMETRY, sprites: Optional[np.ndarray] = None) -> np.ndarray:
    scene.validate(geometry)
    img = np.zeros(geometry.shape)
    for c, r in scene.balls:
        cx, cy = geometry.cell_center(c, r)
        si, sj, inside = _disc_stamp(geometry.ball_radius, cx, cy, geometry.shape)
        img[si, sj][inside] = BALL_INTENSITY
    if scene.visual_trigger:
        img[geometry.trigger_mask()] = 1.0
    if scene.hand is not None:
        sprite = sprites[scene.hand] if sprites is not None else hand_sprite(scene.hand, geometry)
        img = composite(img, sprite)
    return img


def random_scene(numerosity: int, rng: np.random.Generator, geometry: GridGeometry = FULL_GEOMETRY,
                 rows: Optional[Sequence[int]] = None) -> Scene:
    """Scene with ``numerosity`` balls in distinct random columns.

    ``rows`` restricts the allowed rows (used by the distance analysis).
    """
    if not 0 <= numerosity <= min(10, geometry.columns):
        raise ValueError("numerosity %d out of range" % numerosity)
    allowed = np.arange(geometry.rows) if rows is None else np.asarray(rows)
    cols = rng.choice(geometry.columns, size=numerosity, replace=False)
    rws = allowed[rng.integers(0, len(allowed), size=numerosity)]
    return Scene(tuple(zip(cols.tolist(), rws.tolist())))


# -- postures -----------------------------------------------------------------

POSTURE_OFFSETS = (0.15, 0.85, 0.20, 0.80, 0.30, 0.70, 0.50)
POSTURE_SPANS = (0.70, -0.70, 0.60, -0.60, 0.40, -0.40, 0.00)
BASE_POSTURE_VALUE = 0.1


@dataclass(frozen=True)
class PostureTable:
    pointing: np.ndarray  # (columns, 7)
    base: np.ndarray  # (7,)
    _candidates: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        pointing = np.asarray(self.pointing, dtype=float)
        base = np.asarray(self.base, dtype=float)
        if pointing.ndim != 2 or base.shape != (pointing.shape[1],):
            raise ValueError("posture table shapes do not match")
        if np.any(pointing < 0) or np.any(pointing > 1) or np.any(base < 0) or np.any(base > 1):
            raise ValueError("posture components must lie in [0, 1]")
        object.__setattr__(self, "pointing", pointing)
        object.__setattr__(self, "base", base)
        # base first so that argmin ties resolve to base, then lowest column
        object.__setattr__(self, "_candidates", np.vstack([base[None], pointing]))

    @property
    def columns(self) -> int:
        return len(self.pointing)

    def posture(self, identity: int) -> np.ndarray:
        return self.base if identity == BASE else self.pointing[identity]

    def postures(self, identities) -> np.ndarray:
        ids = np.asarray(identities)
        return self._candidates[ids + 1]

    def snap(self, postures: np.ndarray) -> np.ndarray:
        """Nearest table entry for each posture in ``(..., 7)``; BASE or a column index."""
        p = np.asarray(postures, dtype=float)
        d = ((p[..., None, :] - self._candidates) ** 2).sum(axis=-1)
        return np.argmin(d, axis=-1) - 1

    def min_pairwise_distance(self) -> float:
        c = self._candidates
        d = np.sqrt(((c[:, None] - c[None]) ** 2).sum(-1))
        return float(d[np.triu_indices(len(c), 1)].min())


def posture_for_column(column: int, columns: int = 11,
                       offsets: Sequence[float] = POSTURE_OFFSETS,
                       spans: Sequence[float] = POSTURE_SPANS) -> np.ndarray:
    if not 0 <= column < columns:
        raise ValueError("column %d out of range" % column)
    frac = column / (columns - 1) if columns > 1 else 0.0
    return np.clip(np.asarray(offsets) + np.asarray(spans) * frac, 0.0, 1.0)


def default_posture_table(columns: int = 11) -> PostureTable:
    pointing = np.array([posture_for_column(c, columns) for c in range(columns)])
    return PostureTable(pointing, np.full(len(POSTURE_OFFSETS), BASE_POSTURE_VALUE))


def snap_posture(p, table: PostureTable) -> int:
    return int(table.snap(np.asarray(p, dtype=float)))


class World:
    """Geometry plus precomputed hand sprites and the posture table."""

    def __init__(self, geometry: GridGeometry = FULL_GEOMETRY, table: Optional[PostureTable] = None):
        self.geometry = geometry
        self.table = table if table is not None else default_posture_table(geometry.columns)
        if self.table.columns != geometry.columns:
            raise ValueError("posture table and geometry disagree on column count")
        self.sprites = np.stack([hand_sprite(c, geometry) for c in range(geometry.columns)])
        self._sprite_mask = self.sprites > 0

    def render(self, scene: Scene) -> np.ndarray:
        return render(scene, self.geometry, self.sprites)

    def with_hands(self, images: np.ndarray, hands: np.ndarray) -> np.ndarray:
        """Composite sprites into a stack of images; ``hands`` holds a column or BASE per image."""
        out = np.array(images, copy=True)
        for k in np.flatnonzero(hands != BASE):
            m = self._sprite_mask[hands[k]]
            out[k][m] = self.sprites[hands[k]][m]
        return out


def write_pgm(path, image: np.ndarray) -> None:
    """Binary portable graymap (P5, maxval 255)."""
    data = np.clip(np.rint(np.asarray(image) * 255.0), 0, 255).astype(np.uint8)
    h, w = data.shape
    with open(Path(path), "wb") as fh:
        fh.write(b"P5\n%d %d\n255\n" % (w, h))
        fh.write(data.tobytes())


def read_pgm(path) -> np.ndarray:
    raw = Path(path).read_bytes()
    tokens: list[bytes] = []
    pos = 0
    while len(tokens) < 4:
        while raw[pos:pos + 1].isspace():
            pos += 1
        if raw[pos:pos + 1] == b"#":
            pos = raw.index(b"\n", pos) + 1
            continue
        start = pos
        while not raw[pos:pos + 1].isspace():
            pos += 1
        tokens.append(raw[start:pos])
    if tokens[0] != b"P5":
        raise ValueError("not a binary PGM file")
    w, h, maxval = int(tokens[1]), int(tokens[2]), int(tokens[3])
    data = np.frombuffer(raw[pos + 1:pos + 1 + w * h], dtype=np.uint8)
    return data.reshape(h, w) / float(maxval)


def scenes_hash(scenes: Iterable[Scene]) -> set:
    return {s.balls for s in scenes}
