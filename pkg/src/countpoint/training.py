"""Staged training: gesture pre-training, recitation pre-training, then a study.

Every seed owns independent random streams (``default_rng([seed, stream])``)
so a seed's results do not depend on which other seeds run or in what order.
One iteration is one batch: gradients are summed over the batch's trials and
applied once.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np

from .checkpoint import load_checkpoint, save_checkpoint
from .config import RunConfig
from .curriculum import (ALL_SKILLS, BASE_SKILLS, Skill, SkillSchedule, collate, make_trial,
                         make_training_batch, NUMEROSITIES)
from .evaluation import SkillSummary, EvalSet, TrialScore, summarize
from .net import (FULL_MASK, GESTURE_PRETRAIN_MASK, NetworkParams, NumericalDivergence, init_for_geometry,
                  sequence_forward, sequence_gradients, sequence_loss)
from .optim import make_optimizer
from .scene import World


class Stream(enum.IntEnum):
    INIT = 0
    TEST = 1
    GESTURE_PRE = 2
    RECITATION_PRE = 3
    STUDY1 = 11
    STUDY2 = 12
    STUDY3 = 13
    DISTANCE_LOW = 21
    DISTANCE_HIGH = 22


def stream(seed: int, which: Stream) -> np.random.Generator:
    return np.random.default_rng([int(seed), int(which)])


PHASES = ("gesture_pre", "recitation_pre", "study1", "study2", "study3")
STUDY_SKILLS = {1: BASE_SKILLS + (Skill.COUNT_POINT,), 2: ALL_SKILLS}


@dataclass(frozen=True)
class PhaseConfig:
    phase: str
    iterations: int
    number_lr: float
    gesture_lr: float
    mask: frozenset = FULL_MASK
    skills: tuple = ()                       # fixed skills per batch
    schedule: Optional[SkillSchedule] = None  # extra scheduled counting skill per batch

    def __post_init__(self):
        if self.phase not in PHASES:
            raise ValueError("unknown phase %r" % self.phase)
        if self.iterations < 0:
            raise ValueError("iterations must be >= 0")
        if not self.skills and self.schedule is None:
            raise ValueError("a phase needs skills or a schedule")

    @property
    def rates(self) -> tuple[float, float]:
        return (self.number_lr, self.gesture_lr)

    def batch_skills(self, iteration: int, rng: np.random.Generator) -> tuple:
        """Skills trained at 1-based ``iteration``."""
        if self.schedule is None:
            return self.skills
        return self.skills + (self.schedule.sample(iteration - 1, self.iterations, rng),)


def gesture_pre_phase(cfg: RunConfig) -> PhaseConfig:
    return PhaseConfig("gesture_pre", cfg.iterations_gesture, 0.0, cfg.gesture_pre_lr,
                       GESTURE_PRETRAIN_MASK, (Skill.DO_NOTHING, Skill.POINTING))


def recitation_pre_phase(cfg: RunConfig) -> PhaseConfig:
    return PhaseConfig("recitation_pre", cfg.iterations_recitation, cfg.recitation_number_lr,
                       cfg.recitation_gesture_lr, FULL_MASK, BASE_SKILLS)


def study_phase(cfg: RunConfig, study: Optional[int] = None) -> PhaseConfig:
    study = cfg.study if study is None else study
    its = cfg.iterations_study if cfg.iterations_study is not None else cfg.replace(study=study).study_iterations
    if study == 3:
        return PhaseConfig("study3", its, cfg.main_number_lr, cfg.main_gesture_lr, FULL_MASK, BASE_SKILLS,
                           SkillSchedule(tuple(cfg.schedule_start), tuple(cfg.schedule_end)))
    return PhaseConfig("study%d" % study, its, cfg.main_number_lr, cfg.main_gesture_lr, FULL_MASK,
                       STUDY_SKILLS[study])


@dataclass(frozen=True)
class EvalPoint:
    phase: str
    iteration: int
    summaries: dict   # Skill -> SkillSummary


@dataclass
class RunRecord:
    seed: int
    phases: list = field(default_factory=list)        # (phase, iterations) in order
    evaluations: list = field(default_factory=list)   # EvalPoint
    checkpoints: list = field(default_factory=list)   # paths as strings
    final_scores: list = field(default_factory=list)  # TrialScore on the test set after the last phase
    error: Optional[str] = None

    @property
    def ok(self) -> bool:
        return self.error is None

    def final_summary(self) -> dict:
        return summarize(self.final_scores)

    def curve(self, phase: str, skill: Skill, head: str = "number") -> list[tuple[int, float]]:
        attr = head + "_accuracy"
        return [(e.iteration, getattr(e.summaries[skill], attr))
                for e in self.evaluations if e.phase == phase and skill in e.summaries]


def run_phase(params: NetworkParams, phase: PhaseConfig, rng: np.random.Generator, world: World,
              cfg: RunConfig, test_set: Optional[EvalSet] = None,
              checkpoint: Optional[Callable[[NetworkParams, int], None]] = None,
              record: Optional[RunRecord] = None) -> NetworkParams:
    """Train ``params`` in place for one phase and return it.

    Evaluates on ``test_set`` every ``cfg.eval_every`` iterations and calls
    ``checkpoint(params, iteration)`` every ``cfg.checkpoint_every``
    iterations. A non-finite loss raises NumericalDivergence naming the
    phase and iteration.
    """
    opt = make_optimizer(cfg.optimizer)
    geometry = world.geometry
    if record is not None:
        record.phases.append((phase.phase, phase.iterations))
    for it in range(1, phase.iterations + 1):
        skills = phase.batch_skills(it, rng)
        trials = make_training_batch(skills, rng, geometry, post_completion=cfg.post_completion)
        batch = collate(trials, world, params.dtype)
        number, gesture, cache = sequence_forward(params, batch, world)
        loss = sequence_loss(number, gesture, batch, phase.rates)
        if not math.isfinite(loss):
            raise NumericalDivergence("%s: non-finite loss at iteration %d" % (phase.phase, it))
        try:
            opt.step(params, sequence_gradients(params, cache, batch, phase.rates, phase.mask), phase.rates)
        except NumericalDivergence as exc:
            raise NumericalDivergence("%s: %s at iteration %d" % (phase.phase, exc, it)) from None
        if not params.all_finite():
            raise NumericalDivergence("%s: non-finite parameters at iteration %d" % (phase.phase, it))
        if test_set is not None and record is not None and it % cfg.eval_every == 0:
            record.evaluations.append(EvalPoint(phase.phase, it, summarize(test_set.evaluate(params))))
        if checkpoint is not None and it % cfg.checkpoint_every == 0 and it != phase.iterations:
            checkpoint(params, it)
    return params


# -- per-seed drivers ---------------------------------------------------------------

def seed_dir(out: Path, seed: int) -> Path:
    return Path(out) / ("seed_%d" % seed)


def pretrain_checkpoint(out: Path, seed: int) -> Path:
    return seed_dir(out, seed) / "pretrain" / "recitation_pre.ckpt"


def study_checkpoint(out: Path, seed: int, study: int) -> Path:
    return seed_dir(out, seed) / ("study%d" % study) / "final.ckpt"


def _saver(directory: Path, phase: str, seed: int, record: RunRecord):
    def save(params: NetworkParams, iteration: int):
        path = directory / ("%s_%05d.ckpt" % (phase, iteration))
        save_checkpoint(path, params, {"seed": seed, "phase": phase, "iteration": iteration})
        record.checkpoints.append(str(path))
    return save


def _save_final(path: Path, params: NetworkParams, seed: int, phase: str, iterations: int,
                record: RunRecord) -> None:
    save_checkpoint(path, params, {"seed": seed, "phase": phase, "iteration": iterations})
    record.checkpoints.append(str(path))


def make_world(cfg: RunConfig) -> World:
    return World(cfg.grid())


def make_test_set(cfg: RunConfig, seed: int, world: World) -> EvalSet:
    return EvalSet.generate(stream(seed, Stream.TEST), world, cfg.eval_batches, post_completion=cfg.post_completion)


def run_pretraining(cfg: RunConfig, seed: int, out: Path) -> RunRecord:
    """Gesture then recitation pre-training for one seed; writes both phase checkpoints."""
    world = make_world(cfg)
    record = RunRecord(seed)
    directory = seed_dir(out, seed) / "pretrain"
    directory.mkdir(parents=True, exist_ok=True)
    params = init_for_geometry(stream(seed, Stream.INIT), world.geometry, scale=cfg.init_scale,
                               conv_activation=cfg.conv_activation)
    test = make_test_set(cfg, seed, world)
    try:
        for phase, which in ((gesture_pre_phase(cfg), Stream.GESTURE_PRE),
                             (recitation_pre_phase(cfg), Stream.RECITATION_PRE)):
            run_phase(params, phase, stream(seed, which), world, cfg, test,
                      _saver(directory, phase.phase, seed, record), record)
            _save_final(directory / ("%s.ckpt" % phase.phase), params, seed, phase.phase, phase.iterations, record)
    except NumericalDivergence as exc:
        record.error = str(exc)
        return record
    record.final_scores = test.evaluate(params)
    return record


class MissingPretraining(FileNotFoundError):
    pass


def run_main(cfg: RunConfig, seed: int, out: Path, pretrained: Optional[Path] = None,
             force_fresh: bool = False) -> RunRecord:
    """The configured study's main phase for one seed, starting from pre-trained weights.

    ``pretrained`` defaults to the seed's recitation checkpoint under ``out``.
    Without it the run refuses to start unless ``force_fresh`` is set, in
    which case it trains from a fresh initialization.
    """
    world = make_world(cfg)
    record = RunRecord(seed)
    path = Path(pretrained) if pretrained is not None else pretrain_checkpoint(out, seed)
    if path.exists():
        params, meta, _ = load_checkpoint(path)
        if meta.get("phase") != "recitation_pre":
            raise MissingPretraining("%s is not a recitation pre-training checkpoint" % path)
        if params.w3.shape[0] != world.geometry.pool_output_size(params.arch.filters):
            raise MissingPretraining("%s was trained on a different image geometry" % path)
    elif force_fresh:
        params = init_for_geometry(stream(seed, Stream.INIT), world.geometry, scale=cfg.init_scale,
                                   conv_activation=cfg.conv_activation)
    else:
        raise MissingPretraining("no pre-training checkpoint at %s; run `countpoint pretrain` first "
                                 "or pass --force-fresh" % path)
    phase = study_phase(cfg)
    directory = seed_dir(out, seed) / phase.phase
    directory.mkdir(parents=True, exist_ok=True)
    test = make_test_set(cfg, seed, world)
    which = {"study1": Stream.STUDY1, "study2": Stream.STUDY2, "study3": Stream.STUDY3}[phase.phase]
    try:
        run_phase(params, phase, stream(seed, which), world, cfg, test,
                  _saver(directory, phase.phase, seed, record), record)
    except NumericalDivergence as exc:
        record.error = str(exc)
        return record
    _save_final(directory / "final.ckpt", params, seed, phase.phase, phase.iterations, record)
    record.final_scores = test.evaluate(params)
    return record


def parallel_map(fn, items: Sequence, jobs: int = 1) -> list:
    """``[fn(x) for x in items]``, optionally across processes; order is preserved."""
    if jobs <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    from concurrent.futures import ProcessPoolExecutor
    with ProcessPoolExecutor(max_workers=min(jobs, len(items))) as pool:
        return list(pool.map(fn, items))


def per_numerosity(scores: Sequence[TrialScore], skill: Skill) -> np.ndarray:
    from .evaluation import accuracy_by_numerosity
    return accuracy_by_numerosity(scores, skill)


__all__ = [
    "Stream", "stream", "PhaseConfig", "EvalPoint", "RunRecord", "run_phase", "run_pretraining", "run_main",
    "gesture_pre_phase", "recitation_pre_phase", "study_phase", "MissingPretraining", "parallel_map",
    "pretrain_checkpoint", "study_checkpoint", "seed_dir", "make_world", "make_test_set", "NUMEROSITIES",
    "make_trial", "SkillSummary",
]
