"""Trial scoring and the comparative analyses run on trained networks.

A trial counts as correct only when every one of its steps is correct:
the number head's argmax must equal the target class, and the gesture
output must snap to the target posture identity. Per-step accuracy is kept
alongside as a diagnostic.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np

from . import stats
from .curriculum import COUNTING_SKILLS, NUMEROSITIES, Skill, Trial, collate, make_test_set
from .net import NetworkParams, SequenceBatch, sequence_forward
from .scene import PostureTable, World

# children's counting accuracy in the three conditions, for comparison plots
CHILDREN_ACCURACY = {Skill.COUNT_POINT: 0.825, Skill.COUNT_NO_POINT: 0.50, Skill.PUPPET: 0.775}

ROW_BANDS = {"low": (0, 1), "high": (3, 4)}
SMALL_SETS = (1, 2, 3, 4, 5)
LARGE_SETS = (6, 7, 8, 9, 10)


@dataclass(frozen=True)
class TrialScore:
    number_correct: bool
    gesture_correct: bool
    skill: Skill
    numerosity: int
    row_band: str
    number_steps: int = 0     # steps with the right number class
    gesture_steps: int = 0    # steps snapping to the right posture


def step_correctness(number: np.ndarray, gesture: np.ndarray, number_targets: np.ndarray,
                     gesture_targets: np.ndarray, table: PostureTable) -> tuple[np.ndarray, np.ndarray]:
    """Boolean (T, ...) arrays of per-step correctness for both heads."""
    num_ok = np.argmax(number, axis=-1) == number_targets
    ges_ok = table.snap(gesture) == gesture_targets
    return num_ok, ges_ok


def score_trial(number: np.ndarray, gesture: np.ndarray, trial: Trial, table: PostureTable) -> TrialScore:
    """Score one trial from its (T, 11) number and (T, J) gesture outputs."""
    num_ok, ges_ok = step_correctness(np.asarray(number), np.asarray(gesture),
                                      trial.number_targets, trial.gesture_targets, table)
    return TrialScore(bool(num_ok.all()), bool(ges_ok.all()), trial.skill, trial.numerosity,
                      trial.row_band(), int(num_ok.sum()), int(ges_ok.sum()))


def score_batch(params: NetworkParams, trials: Sequence[Trial], world: World,
                batch: Optional[SequenceBatch] = None) -> list[TrialScore]:
    if batch is None:
        batch = collate(trials, world, params.dtype)
    number, gesture, _ = sequence_forward(params, batch, world)
    num_ok, ges_ok = step_correctness(number, gesture, batch.number_targets,
                                      np.stack([t.gesture_targets for t in trials], axis=1), world.table)
    return [TrialScore(bool(num_ok[:, i].all()), bool(ges_ok[:, i].all()), t.skill, t.numerosity,
                       t.row_band(), int(num_ok[:, i].sum()), int(ges_ok[:, i].sum()))
            for i, t in enumerate(trials)]


class EvalSet:
    """A fixed list of trial batches with their network inputs built once."""

    def __init__(self, batches: Sequence[Sequence[Trial]], world: World, dtype=np.float32):
        self.batches = [list(b) for b in batches]
        self.world = world
        self._collated = [collate(b, world, dtype) for b in self.batches]

    @classmethod
    def generate(cls, rng: np.random.Generator, world: World, n_batches: int = 50,
                 rows: Optional[Sequence[int]] = None, post_completion: str = "hold", dtype=np.float32):
        return cls(make_test_set(rng, world.geometry, n_batches, rows, post_completion), world, dtype)

    def __len__(self) -> int:
        return sum(len(b) for b in self.batches)

    def evaluate(self, params: NetworkParams) -> list[TrialScore]:
        """Scores every trial; never modifies ``params``."""
        out = []
        for trials, batch in zip(self.batches, self._collated):
            out.extend(score_batch(params, trials, self.world, batch))
        return out


@dataclass(frozen=True)
class SkillSummary:
    skill: Skill
    trials: int
    number_accuracy: float
    gesture_accuracy: float
    number_step_accuracy: float
    gesture_step_accuracy: float

    @property
    def accuracy(self) -> float:
        """Counting accuracy: the number head decides whether a count is right."""
        return self.number_accuracy


def summarize(scores: Iterable[TrialScore], steps: int = 15) -> dict[Skill, SkillSummary]:
    groups: dict[Skill, list[TrialScore]] = {}
    for s in scores:
        groups.setdefault(s.skill, []).append(s)
    out = {}
    for skill in sorted(groups):
        g = groups[skill]
        n = len(g)
        out[skill] = SkillSummary(
            skill, n,
            sum(s.number_correct for s in g) / n,
            sum(s.gesture_correct for s in g) / n,
            sum(s.number_steps for s in g) / (n * steps),
            sum(s.gesture_steps for s in g) / (n * steps),
        )
    return out


def accuracy_by_numerosity(scores: Iterable[TrialScore], skill: Skill) -> np.ndarray:
    """Number-head trial accuracy for numerosities 1..10 (nan where no trials)."""
    hits = np.zeros(len(NUMEROSITIES))
    counts = np.zeros(len(NUMEROSITIES))
    for s in scores:
        if s.skill == skill and 1 <= s.numerosity <= len(NUMEROSITIES):
            counts[s.numerosity - 1] += 1
            hits[s.numerosity - 1] += s.number_correct
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(counts > 0, hits / np.maximum(counts, 1), np.nan)


@dataclass(frozen=True)
class ConditionAccuracy:
    mean: float
    ci95: Optional[tuple[float, float]]   # None with fewer than two seeds
    n: int


def condition_accuracy(per_seed: Sequence[float]) -> ConditionAccuracy:
    mean, ci = stats.t_interval(per_seed)
    return ConditionAccuracy(mean, ci, len(per_seed))


def condition_tests(per_seed: Mapping[Skill, Sequence[float]],
                    skills: Sequence[Skill] = COUNTING_SKILLS) -> list[stats.StatResult]:
    """ANOVA across conditions, then Tukey pairs. Empty when not computable."""
    groups = [list(per_seed[s]) for s in skills]
    if any(len(g) < 2 for g in groups):
        return []
    labels = [s.label for s in skills]
    anova = stats.one_way_anova(groups)
    return [anova] + stats.tukey_hsd(groups, labels)


@dataclass
class DistanceResult:
    low: dict = field(default_factory=dict)    # skill -> per-seed accuracies
    high: dict = field(default_factory=dict)
    tests: list = field(default_factory=list)


def banded_accuracy(params: NetworkParams, world: World, rng: np.random.Generator, band: str,
                    n_batches: int = 50) -> dict[Skill, float]:
    """Counting accuracy per skill on a test set restricted to one row band."""
    test = EvalSet.generate(rng, world, n_batches, rows=ROW_BANDS[band], dtype=params.dtype)
    return {k: v.number_accuracy for k, v in summarize(test.evaluate(params)).items()}


def distance_analysis(low: Mapping[Skill, Sequence[float]], high: Mapping[Skill, Sequence[float]],
                      skills: Sequence[Skill] = (Skill.COUNT_POINT, Skill.PUPPET)) -> DistanceResult:
    """Unpaired t-tests of low-band against high-band accuracy across seeds."""
    res = DistanceResult({s: list(low[s]) for s in COUNTING_SKILLS if s in low},
                         {s: list(high[s]) for s in COUNTING_SKILLS if s in high})
    for s in skills:
        if len(res.low.get(s, ())) >= 2 and len(res.high.get(s, ())) >= 2:
            res.tests.append(stats.two_sample_t(res.low[s], res.high[s], label="%s:low-high" % s.label))
    return res


@dataclass
class SetSizeResult:
    per_numerosity: dict = field(default_factory=dict)   # skill -> (seeds, 10) array
    small: dict = field(default_factory=dict)            # skill -> per-seed small-set accuracy
    large: dict = field(default_factory=dict)
    tests: list = field(default_factory=list)

    def mean_curve(self, skill: Skill) -> np.ndarray:
        return np.nanmean(self.per_numerosity[skill], axis=0)


def set_size_analysis(per_numerosity: Mapping[Skill, np.ndarray]) -> SetSizeResult:
    """Small (1-5) against large (6-10) sets, one value per seed and group."""
    res = SetSizeResult()
    small_idx = [n - 1 for n in SMALL_SETS]
    large_idx = [n - 1 for n in LARGE_SETS]
    for skill in COUNTING_SKILLS:
        if skill not in per_numerosity:
            continue
        arr = np.atleast_2d(np.asarray(per_numerosity[skill], dtype=np.float64))
        if arr.shape[1] != len(NUMEROSITIES):
            raise ValueError("need one column per numerosity 1..10")
        res.per_numerosity[skill] = arr
        res.small[skill] = np.nanmean(arr[:, small_idx], axis=1).tolist()
        res.large[skill] = np.nanmean(arr[:, large_idx], axis=1).tolist()
        if arr.shape[0] >= 2:
            res.tests.append(stats.two_sample_t(res.small[skill], res.large[skill],
                                                label="%s:small-large" % skill.label))
    return res
