"""Multi-seed drivers that write the per-seed files and the aggregate reports."""

from __future__ import annotations

import functools
import math
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import report
from .checkpoint import load_checkpoint
from .config import RunConfig
from .curriculum import ALL_SKILLS, BASE_SKILLS, COUNTING_SKILLS, NUMEROSITIES, Skill, skill_from_name
from .evaluation import (CHILDREN_ACCURACY, accuracy_by_numerosity, banded_accuracy, condition_tests,
                         distance_analysis, set_size_analysis, summarize)
from .training import (RunRecord, Stream, make_test_set, make_world, parallel_map, run_main, run_pretraining,
                       seed_dir, stream, study_checkpoint)

MIN_SEEDS = 3


class AggregateError(RuntimeError):
    """Too few seeds finished to aggregate."""


# -- per-seed files -----------------------------------------------------------------

def write_metrics(path: Path, record: RunRecord) -> None:
    rows = []
    for e in record.evaluations:
        for skill, s in e.summaries.items():
            rows.append((e.phase, e.iteration, skill.label, s.number_accuracy, s.gesture_accuracy,
                         s.number_step_accuracy, s.gesture_step_accuracy))
    report.write_csv(path, ("phase", "iteration", "skill", "number_accuracy", "gesture_accuracy",
                            "number_step_accuracy", "gesture_step_accuracy"), rows)


def write_final(path: Path, record: RunRecord) -> None:
    counts: dict = {}
    for s in record.final_scores:
        c = counts.setdefault((int(s.skill), s.numerosity), [0, 0, 0])
        c[0] += 1
        c[1] += s.number_correct
        c[2] += s.gesture_correct
    rows = [(Skill(k).label, n, c[0], c[1], c[2]) for (k, n), c in sorted(counts.items())]
    report.write_csv(path, ("skill", "numerosity", "trials", "number_correct", "gesture_correct"), rows)


def read_final(path: Path) -> dict:
    """skill -> (trials, number_correct, gesture_correct) arrays over numerosities 1..10."""
    out: dict = {}
    for row in report.read_csv(path):
        skill = skill_from_name(row["skill"])
        arr = out.setdefault(skill, np.zeros((3, len(NUMEROSITIES))))
        k = int(row["numerosity"]) - 1
        arr[:, k] = (int(row["trials"]), int(row["number_correct"]), int(row["gesture_correct"]))
    return out


def _pretrain_worker(seed: int, cfg: RunConfig, out: Path) -> RunRecord:
    rec = run_pretraining(cfg, seed, out)
    d = seed_dir(out, seed) / "pretrain"
    write_metrics(d / "metrics.csv", rec)
    if rec.ok:
        write_final(d / "final.csv", rec)
    return rec


def _study_worker(seed: int, cfg: RunConfig, out: Path, pretrained: Optional[Path], force_fresh: bool) -> RunRecord:
    pre = None if pretrained is None else seed_dir(pretrained, seed) / "pretrain" / "recitation_pre.ckpt"
    rec = run_main(cfg, seed, out, pre, force_fresh)
    d = seed_dir(out, seed) / ("study%d" % cfg.study)
    write_metrics(d / "metrics.csv", rec)
    if rec.ok:
        write_final(d / "final.csv", rec)
    return rec


def _successful(records: Sequence[RunRecord]) -> list[RunRecord]:
    ok = [r for r in records if r.ok]
    if len(ok) < MIN_SEEDS:
        failed = "; ".join("seed %d: %s" % (r.seed, r.error) for r in records if not r.ok)
        raise AggregateError("only %d of %d seeds finished (need %d to aggregate)%s"
                             % (len(ok), len(records), MIN_SEEDS, ": " + failed if failed else ""))
    return ok


def _curve_rows(records: Sequence[RunRecord], phase: str, skills: Sequence[Skill], head: str = "number"):
    iterations = sorted({e.iteration for r in records for e in r.evaluations if e.phase == phase})
    rows = []
    for skill in skills:
        for it in iterations:
            vals = [v for r in records for i, v in r.curve(phase, skill, head) if i == it]
            m, lo, hi = report.mean_ci(vals)
            rows.append((it, skill.label, m, lo, hi))
    return rows


def _series(rows, skills):
    out = {}
    for skill in skills:
        sel = [r for r in rows if r[1] == skill.label]
        out[skill.label] = ([r[0] for r in sel], [r[2] for r in sel], [r[3] for r in sel], [r[4] for r in sel])
    return out


# -- pre-training --------------------------------------------------------------------

def pretrain(cfg: RunConfig, out: Path, jobs: int = 1) -> list[RunRecord]:
    out = Path(out)
    rdir = out / "pretrain"
    rdir.mkdir(parents=True, exist_ok=True)
    (rdir / "config.txt").write_text(cfg.to_text(), encoding="utf-8")
    records = parallel_map(functools.partial(_pretrain_worker, cfg=cfg, out=out), list(cfg.seeds), jobs)
    rows = []
    for r in records:
        if r.ok:
            for skill, s in summarize(r.final_scores).items():
                rows.append((skill.label, r.seed, s.number_accuracy, s.gesture_accuracy))
    report.write_csv(rdir / "final.csv", ("skill", "seed", "number_accuracy", "gesture_accuracy"), rows)
    ok = [r for r in records if r.ok]
    for phase in ("gesture_pre", "recitation_pre"):
        for head in ("number", "gesture"):
            crow = _curve_rows(ok, phase, BASE_SKILLS, head)
            name = "%s_%s" % (phase, head)
            report.write_csv(rdir / ("curves_%s.csv" % name), ("iteration", "skill", "mean", "ci_low", "ci_high"), crow)
            if crow:
                report.line_chart(rdir / ("curves_%s.svg" % name), "%s: %s output" % (phase, head),
                                  _series(crow, BASE_SKILLS))
    return records


# -- studies ---------------------------------------------------------------------------

def conditions(records: Sequence[RunRecord]) -> dict:
    """skill -> per-seed final counting accuracies (seed order as in ``records``)."""
    out: dict = {}
    for r in records:
        for skill, s in summarize(r.final_scores).items():
            out.setdefault(skill, []).append(s.number_accuracy)
    return out


def study(cfg: RunConfig, out: Path, jobs: int = 1, pretrained: Optional[Path] = None,
          force_fresh: bool = False) -> list[RunRecord]:
    out = Path(out)
    sdir = out / ("study%d" % cfg.study)
    sdir.mkdir(parents=True, exist_ok=True)
    (sdir / "config.txt").write_text(cfg.to_text(), encoding="utf-8")
    worker = functools.partial(_study_worker, cfg=cfg, out=out, pretrained=pretrained, force_fresh=force_fresh)
    records = parallel_map(worker, list(cfg.seeds), jobs)
    write_study_report(cfg, sdir, records)
    return records


def write_study_report(cfg: RunConfig, sdir: Path, records: Sequence[RunRecord]) -> None:
    failed = [(r.seed, r.error) for r in records if not r.ok]
    report.write_csv(sdir / "failures.csv", ("seed", "error"), failed)
    ok = _successful(records)
    rows = []
    for r in ok:
        for skill, s in summarize(r.final_scores).items():
            rows.append((skill.label, r.seed, s.number_accuracy, s.gesture_accuracy))
    report.write_csv(sdir / "conditions.csv", ("skill", "seed", "accuracy", "gesture_accuracy"), rows)
    phase = "study%d" % cfg.study
    crow = _curve_rows(ok, phase, ALL_SKILLS)
    report.write_csv(sdir / "curves.csv", ("iteration", "skill", "mean", "ci_low", "ci_high"), crow)
    report.write_dat(sdir / "curves.dat", ("iteration", "skill", "mean", "ci_low", "ci_high"), crow)
    if crow:
        report.line_chart(sdir / "curves.svg", "Study %d: counting accuracy" % cfg.study,
                          _series(crow, COUNTING_SKILLS))
    write_condition_summary(sdir, conditions(ok), children=(cfg.study == 3), title="Study %d" % cfg.study)


def write_condition_summary(sdir: Path, per_seed: dict, children: bool, title: str) -> None:
    summary = []
    for skill in COUNTING_SKILLS:
        m, lo, hi = report.mean_ci(per_seed.get(skill, []))
        ref = CHILDREN_ACCURACY[skill] if children else None
        summary.append((skill.label, m, lo, hi, ref))
    header = ("skill", "mean", "ci_low", "ci_high") + (("children",) if children else ())
    srows = [row if children else row[:4] for row in summary]
    report.write_csv(sdir / "summary.csv", header, srows)
    report.write_dat(sdir / "bars.dat", header, srows)
    tests = condition_tests(per_seed)
    mean3 = float(np.mean([row[1] for row in summary]))
    report.write_stats(sdir / "stats.txt", tests,
                       header="%s; seeds=%d; three-condition mean=%s" % (title, len(per_seed.get(COUNTING_SKILLS[0], [])),
                                                                         report.fmt(mean3)))
    report.bar_chart(sdir / "bars.svg", "%s: final counting accuracy" % title, [r[0] for r in summary],
                     [r[1] for r in summary], [None if r[2] is None else (r[2], r[3]) for r in summary],
                     overlay=[r[4] for r in summary] if children else None)


# -- analyses on study-3 networks -----------------------------------------------------

def _load_study3(out: Path, seed: int):
    path = study_checkpoint(out, seed, 3)
    if not path.exists():
        raise FileNotFoundError("no study 3 checkpoint at %s; run `countpoint study --study 3` first" % path)
    return load_checkpoint(path)[0]


def _distance_worker(seed: int, cfg: RunConfig, out: Path, bands: tuple) -> dict:
    params = _load_study3(out, seed)
    world = make_world(cfg)
    which = {"low": Stream.DISTANCE_LOW, "high": Stream.DISTANCE_HIGH}
    return {b: banded_accuracy(params, world, stream(seed, which[b]), b, cfg.eval_batches) for b in bands}


def _setsize_worker(seed: int, cfg: RunConfig, out: Path) -> dict:
    params = _load_study3(out, seed)
    world = make_world(cfg)
    scores = make_test_set(cfg, seed, world).evaluate(params)
    return {s: accuracy_by_numerosity(scores, s) for s in COUNTING_SKILLS}


def analyze(cfg: RunConfig, out: Path, jobs: int = 1, rows: str = "both") -> None:
    out = Path(out)
    adir = out / "analysis"
    adir.mkdir(parents=True, exist_ok=True)
    (adir / "config.txt").write_text(cfg.to_text(), encoding="utf-8")
    seeds = list(cfg.seeds)
    for s in seeds:
        if not study_checkpoint(out, s, 3).exists():
            raise FileNotFoundError("no study 3 checkpoint for seed %d under %s" % (s, out))
    bands = ("low", "high") if rows == "both" else (rows,)
    dist = parallel_map(functools.partial(_distance_worker, cfg=cfg, out=out, bands=bands), seeds, jobs)
    per_band = {b: {sk: [d[b][sk] for d in dist] for sk in COUNTING_SKILLS} for b in bands}
    drows = [(b, sk.label, seed, per_band[b][sk][i]) for b in bands for sk in COUNTING_SKILLS
             for i, seed in enumerate(seeds)]
    report.write_csv(adir / "distance.csv", ("band", "skill", "seed", "accuracy"), drows)
    if rows == "both":
        res = distance_analysis(per_band["low"], per_band["high"])
        report.write_stats(adir / "distance_stats.txt", res.tests, header="distance: low rows against high rows")
        labels = [sk.label for sk in COUNTING_SKILLS]
        low_m = [report.mean_ci(per_band["low"][sk]) for sk in COUNTING_SKILLS]
        high_m = [report.mean_ci(per_band["high"][sk]) for sk in COUNTING_SKILLS]
        report.write_dat(adir / "distance.dat", ("skill", "low", "high"),
                         [(lab, l[0], h[0]) for lab, l, h in zip(labels, low_m, high_m)])
        report.line_chart(adir / "distance.svg", "Counting accuracy by object distance",
                          {"low rows": (list(range(len(labels))), [m[0] for m in low_m], None, None),
                           "high rows": (list(range(len(labels))), [m[0] for m in high_m], None, None)},
                          xlabel="condition: " + ", ".join("%d=%s" % (i, l) for i, l in enumerate(labels)))
    if rows != "both":
        return
    sizes = parallel_map(functools.partial(_setsize_worker, cfg=cfg, out=out), seeds, jobs)
    per_n = {sk: np.array([s[sk] for s in sizes]) for sk in COUNTING_SKILLS}
    res = set_size_analysis(per_n)
    srows = []
    for sk in COUNTING_SKILLS:
        for i, seed in enumerate(seeds):
            for n in NUMEROSITIES:
                srows.append((sk.label, seed, n, float(per_n[sk][i, n - 1])))
    report.write_csv(adir / "setsize.csv", ("skill", "seed", "numerosity", "accuracy"), srows)
    grows = [(sk.label, seed, res.small[sk][i], res.large[sk][i]) for sk in COUNTING_SKILLS
             for i, seed in enumerate(seeds)]
    report.write_csv(adir / "setsize_groups.csv", ("skill", "seed", "small", "large"), grows)
    report.write_stats(adir / "setsize_stats.txt", res.tests, header="set size: numerosities 1-5 against 6-10")
    curve = {sk.label: (list(NUMEROSITIES), [float(v) for v in res.mean_curve(sk)], None, None)
             for sk in COUNTING_SKILLS}
    report.write_dat(adir / "setsize.dat", ("numerosity",) + tuple(sk.label for sk in COUNTING_SKILLS),
                     [(n,) + tuple(curve[sk.label][1][n - 1] for sk in COUNTING_SKILLS) for n in NUMEROSITIES])
    report.line_chart(adir / "setsize.svg", "Counting accuracy by set size", curve, xlabel="numerosity")


# -- statistics from CSV alone ------------------------------------------------------------

def stats_from_conditions(path: Path) -> list:
    per_seed: dict = {}
    for row in report.read_csv(path):
        per_seed.setdefault(skill_from_name(row["skill"]), []).append(float(row["accuracy"]))
    return condition_tests(per_seed)
