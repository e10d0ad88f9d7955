from __future__ import annotations

import numpy as np
import pytest

from countpoint.curriculum import (ALL_SKILLS, BASE_SKILLS, COUNTING_SKILLS, NUMEROSITIES, SCHEDULE_END_ALT,
                                   SCHEDULE_END_DEFAULT, SCHEDULE_SKILLS, SCHEDULE_START, SKILL_ENCODING, Skill,
                                   SkillSchedule, Trial, build_trial, collate, decode_skill, make_test_set,
                                   make_training_batch, make_trial, replay_trial, schedule_probabilities,
                                   skill_from_name)
from countpoint.net import N_STEPS, FeedbackPolicy
from countpoint.scene import BASE, REDUCED_GEOMETRY, Scene, scenes_hash


def test_skill_encoding_round_trip():
    assert len(set(SKILL_ENCODING.values())) == 6
    for skill, enc in SKILL_ENCODING.items():
        assert decode_skill(*enc) is skill


def test_table_of_triggers():
    assert SKILL_ENCODING[Skill.DO_NOTHING][:3] == (False, False, False)
    assert SKILL_ENCODING[Skill.POINTING][:3] == (True, True, False)
    assert SKILL_ENCODING[Skill.RECITATION][:3] == (False, False, True)
    assert SKILL_ENCODING[Skill.COUNT_POINT][:3] == (True, True, True)
    assert SKILL_ENCODING[Skill.COUNT_NO_POINT][:3] == (True, False, True)
    assert SKILL_ENCODING[Skill.PUPPET][:3] == (True, False, True)


def test_skill_names():
    for s in ALL_SKILLS:
        assert skill_from_name(s.label) is s
        assert skill_from_name(str(int(s))) is s
    with pytest.raises(ValueError):
        skill_from_name("juggling")


def test_count_point_example():
    t = build_trial(Skill.COUNT_POINT, 3, Scene(((9, 0), (2, 1), (5, 4))))
    assert t.gesture_targets.tolist() == [2, 5, 9] + [9] * 12
    assert t.number_targets.tolist() == [1, 2, 3] + [3] * 12
    assert t.feedback == FeedbackPolicy.NETWORK_HAND
    assert t.scene.visual_trigger


def test_do_nothing_is_quiet():
    t = build_trial(Skill.DO_NOTHING, 4, Scene(((0, 0), (1, 1), (2, 2), (3, 3))))
    assert np.all(t.number_targets == 0) and np.all(t.gesture_targets == BASE)
    assert not t.scene.visual_trigger and t.triggers.tolist() == [0, 0]


def test_recitation_counts_to_ten():
    t = build_trial(Skill.RECITATION, 2, Scene(((0, 0), (1, 1))))
    assert t.number_targets.tolist() == list(range(1, 11)) + [10] * 5
    assert np.all(t.gesture_targets == BASE)


def test_puppet_hand_script():
    t = build_trial(Skill.PUPPET, 2, Scene(((7, 0), (3, 1))))
    assert t.scripted_hands.tolist() == [3, 7] + [7] * 13
    assert np.all(t.gesture_targets == BASE)
    assert t.number_targets.tolist() == [1, 2] + [2] * 13


def test_return_to_base_option():
    t = build_trial(Skill.POINTING, 2, Scene(((7, 0), (3, 1))), post_completion="base")
    assert t.gesture_targets.tolist() == [3, 7] + [BASE] * 13
    with pytest.raises(ValueError):
        build_trial(Skill.POINTING, 2, Scene(((7, 0), (3, 1))), post_completion="wander")


def test_numerosity_must_match_scene():
    with pytest.raises(ValueError):
        build_trial(Skill.COUNT_POINT, 3, Scene(((1, 1),)))


def test_puppet_images_show_hand(reduced_world):
    rng = np.random.default_rng(0)
    t = make_trial(Skill.PUPPET, 3, rng, REDUCED_GEOMETRY)
    imgs = t.step_images(reduced_world)
    for step in range(N_STEPS):
        expect = reduced_world.render(t.scene.with_hand(int(t.scripted_hands[step])))
        assert np.array_equal(imgs[step], expect)


def test_training_batch_composition():
    rng = np.random.default_rng(1)
    batch = make_training_batch(BASE_SKILLS + (Skill.COUNT_POINT,), rng, REDUCED_GEOMETRY)
    assert len(batch) == 40
    assert sorted(t.numerosity for t in batch) == sorted(list(NUMEROSITIES) * 4)
    assert len(make_training_batch(ALL_SKILLS, rng, REDUCED_GEOMETRY)) == 60


def test_counting_targets_principles():
    rng = np.random.default_rng(2)
    for t in make_training_batch(ALL_SKILLS, rng, REDUCED_GEOMETRY):
        if t.skill in COUNTING_SKILLS:
            assert np.all(np.diff(t.number_targets) >= 0)
            assert t.number_targets[-1] == t.numerosity
        if t.skill in (Skill.POINTING, Skill.COUNT_POINT):
            visited = t.gesture_targets[: t.numerosity].tolist()
            assert visited == sorted(t.scene.columns)
            assert len(set(visited)) == t.numerosity


def test_test_set_size_and_disjointness():
    rng_train = np.random.default_rng([5, 2])
    rng_test = np.random.default_rng([5, 1])
    test = make_test_set(rng_test, REDUCED_GEOMETRY, n_batches=50)
    trials = [t for b in test for t in b]
    assert len(trials) == 3000
    assert all(len(b) == 60 for b in test)
    train = [t for _ in range(50) for t in make_training_batch(ALL_SKILLS, rng_train, REDUCED_GEOMETRY)]
    big_test = {t.scene.balls for t in trials if t.numerosity >= 5}
    big_train = {t.scene.balls for t in train if t.numerosity >= 5}
    assert not big_test & big_train


def test_trial_line_round_trip():
    rng = np.random.default_rng(3)
    t = make_trial(Skill.COUNT_NO_POINT, 6, rng, REDUCED_GEOMETRY)
    back = replay_trial(t.to_line(), REDUCED_GEOMETRY)
    assert back.scene.balls == t.scene.balls
    assert np.array_equal(back.number_targets, t.number_targets)
    assert back.seed == t.seed


def test_replay_detects_tampering():
    rng = np.random.default_rng(4)
    line = make_trial(Skill.POINTING, 2, rng, REDUCED_GEOMETRY).to_line()
    fields = dict(tok.split("=", 1) for tok in line.split())
    fields["balls"] = "0:0,1:1"
    with pytest.raises(ValueError):
        replay_trial(" ".join("%s=%s" % kv for kv in fields.items()), REDUCED_GEOMETRY)


def test_collate_shapes(reduced_world):
    rng = np.random.default_rng(5)
    trials = make_training_batch([Skill.POINTING, Skill.PUPPET], rng, REDUCED_GEOMETRY)
    b = collate(trials, reduced_world)
    assert b.images.shape == (N_STEPS, 20, 22, 68)
    assert b.posture_targets.shape == (N_STEPS, 20, 7)
    assert b.images.dtype == np.float32


def test_schedule_endpoints():
    s = SkillSchedule()
    assert SCHEDULE_SKILLS == (Skill.PUPPET, Skill.COUNT_POINT, Skill.COUNT_NO_POINT)
    assert s.probabilities(0, 1050) == pytest.approx(SCHEDULE_START)
    assert s.probabilities(1050, 1050) == pytest.approx(SCHEDULE_END_DEFAULT)
    mid = schedule_probabilities(s, 525, 1050)
    assert mid == pytest.approx(tuple((a + b) / 2 for a, b in zip(SCHEDULE_START, SCHEDULE_END_DEFAULT)))
    assert sum(mid) == pytest.approx(1.0)
    alt = SkillSchedule(end=SCHEDULE_END_ALT)
    assert alt.probabilities(1050, 1050) == pytest.approx((0.0, 0.9, 0.1))
    with pytest.raises(ValueError):
        s.probabilities(1051, 1050)


def test_schedule_sampling_frequencies():
    s = SkillSchedule()
    rng = np.random.default_rng(6)
    draws = [s.sample(0, 100, rng) for _ in range(4000)]
    assert abs(draws.count(Skill.PUPPET) / 4000 - 0.6) < 0.03
    assert draws.count(Skill.COUNT_NO_POINT) == 0
