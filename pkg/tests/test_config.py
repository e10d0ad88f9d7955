from __future__ import annotations

import pytest

from countpoint.config import ConfigError, RunConfig, load_config, parse_config
from countpoint.curriculum import SCHEDULE_END_ALT
from countpoint.scene import FULL_GEOMETRY, REDUCED_GEOMETRY


def test_defaults_validate():
    cfg = RunConfig().validate()
    assert cfg.grid() == REDUCED_GEOMETRY
    assert cfg.study_iterations == 1050
    assert cfg.replace(study=1).study_iterations == 2000


def test_round_trip_through_text():
    cfg = RunConfig(seeds=(3, 7), study=2, geometry="full", iterations_study=17, schedule_end=SCHEDULE_END_ALT)
    again = parse_config(cfg.to_text())
    assert again == cfg
    assert again.grid() == FULL_GEOMETRY


def test_comments_and_named_schedule(tmp_path):
    p = tmp_path / "run.cfg"
    p.write_text("# a comment\n\nseeds = 1, 2\nschedule_end = alt\n", encoding="utf-8")
    cfg = load_config(p)
    assert cfg.seeds == (1, 2)
    assert cfg.schedule_end == SCHEDULE_END_ALT


def test_custom_geometry_overrides():
    cfg = parse_config("geometry = custom\nimage_height = 30\n")
    assert cfg.grid().image_height == 30
    assert cfg.grid().image_width == REDUCED_GEOMETRY.image_width


@pytest.mark.parametrize("text,key", [
    ("bogus = 1", "bogus"),
    ("seeds = 1,1", "seeds"),
    ("seeds = ", "seeds"),
    ("study = 4", "study"),
    ("iterations_gesture = -1", "iterations_gesture"),
    ("gesture_pre_lr = nan", "gesture_pre_lr"),
    ("gesture_pre_lr = abc", "gesture_pre_lr"),
    ("optimizer = rmsprop", "optimizer"),
    ("schedule_end = 0.5,0.5,0.5", "schedule_end"),
    ("schedule_start = 1,0", "schedule_start"),
    ("post_completion = drop", "post_completion"),
    ("eval_every = 0", "eval_every"),
    ("geometry = custom\nimage_width = 20", "geometry"),
    ("no equals sign", "no equals sign"),
])
def test_invalid_configs_name_the_key(text, key):
    with pytest.raises(ConfigError) as exc:
        parse_config(text)
    assert exc.value.key == key
