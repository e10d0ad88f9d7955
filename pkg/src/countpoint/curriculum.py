"""Simulated skills, 15-step trials, batches, test sets and skill schedules."""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .net import N_STEPS, FeedbackPolicy, SequenceBatch
from .scene import BASE, GridGeometry, Scene, World, random_scene

NUMEROSITIES = tuple(range(1, 11))


class Skill(enum.IntEnum):
    DO_NOTHING = 1
    POINTING = 2
    RECITATION = 3
    COUNT_POINT = 4
    COUNT_NO_POINT = 5
    PUPPET = 6

    @property
    def label(self) -> str:
        return SKILL_LABELS[self]


SKILL_LABELS = {
    Skill.DO_NOTHING: "do_nothing",
    Skill.POINTING: "pointing",
    Skill.RECITATION: "recitation",
    Skill.COUNT_POINT: "count_point",
    Skill.COUNT_NO_POINT: "count_no_point",
    Skill.PUPPET: "puppet",
}
BASE_SKILLS = (Skill.DO_NOTHING, Skill.POINTING, Skill.RECITATION)
COUNTING_SKILLS = (Skill.COUNT_POINT, Skill.COUNT_NO_POINT, Skill.PUPPET)
ALL_SKILLS = tuple(Skill)

# (visual trigger, gesture trigger, number trigger, hand policy)
SKILL_ENCODING = {
    Skill.DO_NOTHING: (False, False, False, FeedbackPolicy.NO_HAND),
    Skill.POINTING: (True, True, False, FeedbackPolicy.NETWORK_HAND),
    Skill.RECITATION: (False, False, True, FeedbackPolicy.NO_HAND),
    Skill.COUNT_POINT: (True, True, True, FeedbackPolicy.NETWORK_HAND),
    Skill.COUNT_NO_POINT: (True, False, True, FeedbackPolicy.NO_HAND),
    Skill.PUPPET: (True, False, True, FeedbackPolicy.SCRIPTED_HAND),
}


def decode_skill(visual: bool, gesture: bool, number: bool, policy: FeedbackPolicy) -> Skill:
    for skill, enc in SKILL_ENCODING.items():
        if enc == (bool(visual), bool(gesture), bool(number), FeedbackPolicy(policy)):
            return skill
    raise ValueError("no skill for encoding %r" % ((visual, gesture, number, policy),))


def skill_from_name(name: str) -> Skill:
    key = name.strip().lower()
    for skill, label in SKILL_LABELS.items():
        if key in (label, str(int(skill))):
            return skill
    raise ValueError("unknown skill %r" % name)


@dataclass(frozen=True)
class Trial:
    skill: Skill
    numerosity: int
    scene: Scene
    number_targets: np.ndarray    # (15,) class indices
    gesture_targets: np.ndarray   # (15,) column or BASE
    scripted_hands: np.ndarray    # (15,) column or BASE, drawn into the input image
    seed: Optional[int] = None

    @property
    def feedback(self) -> FeedbackPolicy:
        return SKILL_ENCODING[self.skill][3]

    @property
    def triggers(self) -> np.ndarray:
        _, gesture, number, _ = SKILL_ENCODING[self.skill]
        return np.array([float(gesture), float(number)])

    def posture_targets(self, world: World) -> np.ndarray:
        return world.table.postures(self.gesture_targets)

    def step_images(self, world: World) -> np.ndarray:
        base = world.render(self.scene)
        imgs = np.repeat(base[None], len(self.number_targets), axis=0)
        if np.any(self.scripted_hands != BASE):
            imgs = world.with_hands(imgs, self.scripted_hands)
        return imgs

    def row_band(self) -> str:
        rows = {r for _, r in self.scene.balls}
        if rows and rows <= {0, 1}:
            return "low"
        if rows and rows <= {3, 4}:
            return "high"
        return "mixed"

    def to_line(self) -> str:
        balls = ",".join("%d:%d" % b for b in self.scene.balls)
        seed = "" if self.seed is None else " seed=%d" % self.seed
        return "skill=%s n=%d balls=%s%s" % (self.skill.label, self.numerosity, balls or "-", seed)

    @classmethod
    def from_line(cls, line: str, post_completion: str = "hold") -> "Trial":
        fields = dict(tok.split("=", 1) for tok in line.split())
        skill = skill_from_name(fields["skill"])
        balls = () if fields["balls"] == "-" else tuple(
            tuple(int(v) for v in b.split(":")) for b in fields["balls"].split(","))
        seed = int(fields["seed"]) if "seed" in fields else None
        return build_trial(skill, int(fields["n"]), Scene(balls), seed, post_completion)


def _pointing_sequence(columns: Sequence[int], post_completion: str) -> np.ndarray:
    n = len(columns)
    out = np.full(N_STEPS, BASE, dtype=np.int64)
    out[:n] = columns
    if post_completion == "hold":
        out[n:] = columns[-1]
    elif post_completion != "base":
        raise ValueError("post_completion must be 'hold' or 'base'")
    return out


def build_trial(skill: Skill, numerosity: int, scene: Scene, seed: Optional[int] = None,
                post_completion: str = "hold") -> Trial:
    """Targets for a skill on a given ball layout (trigger line set from the skill)."""
    skill = Skill(skill)
    if len(scene.balls) != numerosity:
        raise ValueError("scene has %d balls, numerosity is %d" % (len(scene.balls), numerosity))
    if skill not in (Skill.DO_NOTHING, Skill.RECITATION) and numerosity < 1:
        raise ValueError("%s needs at least one ball" % skill.label)
    visual = SKILL_ENCODING[skill][0]
    scene = Scene(scene.balls, visual, None)
    steps = np.arange(1, N_STEPS + 1)
    cols = scene.columns
    base_seq = np.full(N_STEPS, BASE, dtype=np.int64)
    count_seq = np.minimum(steps, numerosity)
    if skill is Skill.DO_NOTHING:
        numbers, gestures = np.zeros(N_STEPS, dtype=np.int64), base_seq
    elif skill is Skill.POINTING:
        numbers, gestures = np.zeros(N_STEPS, dtype=np.int64), _pointing_sequence(cols, post_completion)
    elif skill is Skill.RECITATION:
        numbers, gestures = np.minimum(steps, 10), base_seq
    elif skill is Skill.COUNT_POINT:
        numbers, gestures = count_seq, _pointing_sequence(cols, post_completion)
    else:
        numbers, gestures = count_seq, base_seq
    if skill is Skill.PUPPET:
        hands = _pointing_sequence(cols, post_completion)
    else:
        hands = base_seq
    return Trial(skill, numerosity, scene, numbers.astype(np.int64), gestures.copy(), hands.copy(), seed)


def make_trial(skill: Skill, numerosity: int, rng: np.random.Generator,
               geometry: GridGeometry, rows: Optional[Sequence[int]] = None,
               post_completion: str = "hold") -> Trial:
    """Fresh random trial. The per-trial seed drawn from ``rng`` makes it replayable."""
    seed = int(rng.integers(0, 2 ** 63 - 1))
    scene = random_scene(numerosity, np.random.default_rng(seed), geometry, rows)
    return build_trial(skill, numerosity, scene, seed, post_completion)


def replay_trial(line: str, geometry: GridGeometry, rows: Optional[Sequence[int]] = None,
                 post_completion: str = "hold") -> Trial:
    """Regenerate a trial from its serialized line, checking the seed reproduces the balls."""
    t = Trial.from_line(line, post_completion)
    if t.seed is not None:
        again = make_trial_from_seed(t.skill, t.numerosity, t.seed, geometry, rows, post_completion)
        if again.scene.balls != t.scene.balls:
            raise ValueError("seed %d does not reproduce the recorded balls" % t.seed)
    return t


def make_trial_from_seed(skill, numerosity, seed, geometry, rows=None, post_completion="hold") -> Trial:
    scene = random_scene(numerosity, np.random.default_rng(seed), geometry, rows)
    return build_trial(skill, numerosity, scene, seed, post_completion)


def make_training_batch(skills: Sequence[Skill], rng: np.random.Generator, geometry: GridGeometry,
                        rows: Optional[Sequence[int]] = None, post_completion: str = "hold") -> list[Trial]:
    """One trial per (skill, numerosity 1..10)."""
    if not skills:
        raise ValueError("a batch needs at least one skill")
    return [make_trial(s, n, rng, geometry, rows, post_completion) for s in skills for n in NUMEROSITIES]


def make_test_set(rng: np.random.Generator, geometry: GridGeometry, n_batches: int = 50,
                  rows: Optional[Sequence[int]] = None, post_completion: str = "hold") -> list[list[Trial]]:
    return [make_training_batch(ALL_SKILLS, rng, geometry, rows, post_completion) for _ in range(n_batches)]


def collate(trials: Sequence[Trial], world: World, dtype=np.float32) -> SequenceBatch:
    images = np.stack([t.step_images(world) for t in trials], axis=1).astype(dtype)
    return SequenceBatch(
        images=images,
        triggers=np.stack([t.triggers for t in trials]).astype(dtype),
        number_targets=np.stack([t.number_targets for t in trials], axis=1),
        posture_targets=np.stack([t.posture_targets(world) for t in trials], axis=1).astype(dtype),
        feedback=np.array([int(t.feedback) for t in trials]),
    )


# -- skill schedule for the dynamic-mixture study -------------------------------

SCHEDULE_END_DEFAULT = (0.1, 0.81, 0.09)
SCHEDULE_END_ALT = (0.0, 0.9, 0.1)
SCHEDULE_START = (0.6, 0.4, 0.0)
SCHEDULE_SKILLS = (Skill.PUPPET, Skill.COUNT_POINT, Skill.COUNT_NO_POINT)


@dataclass(frozen=True)
class SkillSchedule:
    """Probabilities (puppet, point, no-point) interpolated linearly over training."""
    start: tuple[float, float, float] = SCHEDULE_START
    end: tuple[float, float, float] = SCHEDULE_END_DEFAULT

    def __post_init__(self):
        for p in (self.start, self.end):
            if len(p) != 3 or min(p) < 0 or sum(p) > 1 + 1e-12:
                raise ValueError("schedule endpoint %r must be 3 nonnegative values summing to <= 1" % (p,))

    def probabilities(self, iteration: int, total: int) -> tuple[float, float, float]:
        if not 0 <= iteration <= total:
            raise ValueError("iteration %d outside [0, %d]" % (iteration, total))
        frac = iteration / total if total else 1.0
        return tuple(s + (e - s) * frac for s, e in zip(self.start, self.end))

    def sample(self, iteration: int, total: int, rng: np.random.Generator) -> Skill:
        p = np.asarray(self.probabilities(iteration, total))
        return SCHEDULE_SKILLS[int(rng.choice(3, p=p / p.sum()))]


def schedule_probabilities(schedule: SkillSchedule, iteration: int, total: int):
    return schedule.probabilities(iteration, total)
