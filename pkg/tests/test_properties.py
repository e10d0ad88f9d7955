"""Property-based checks of invariants that hold for any input."""

from __future__ import annotations

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from countpoint.checkpoint import load_checkpoint, save_checkpoint
from countpoint.curriculum import N_STEPS, SCHEDULE_END_ALT, SCHEDULE_END_DEFAULT, SCHEDULE_START, SkillSchedule
from countpoint.evaluation import step_correctness
from countpoint.net import init_params
from countpoint.scene import BASE, default_posture_table
from countpoint.stats import one_way_anova, tukey_hsd, two_sample_t

TABLE = default_posture_table()
finite = st.floats(-1e3, 1e3, allow_nan=False)
group = st.lists(finite, min_size=2, max_size=12)


def _spread(values) -> bool:
    return np.ptp(values) > 1e-6 * (1 + np.abs(values).max())


@settings(max_examples=200, deadline=None)
@given(a=group, b=group)
def test_f_equals_t_squared(a, b):
    if not (_spread(a + b) and (_spread(a) or _spread(b))):
        return
    f = one_way_anova([a, b])
    t = two_sample_t(a, b)
    assert abs(f.statistic - t.statistic ** 2) <= 1e-9 * max(1.0, f.statistic)
    assert abs(f.p_value - t.p_value) < 1e-9


@settings(max_examples=40, deadline=None)
@given(groups=st.lists(group, min_size=3, max_size=4), shift=finite, scale=st.floats(0.1, 10))
def test_anova_and_tukey_invariant_to_affine_change(groups, shift, scale):
    if not all(_spread(g) for g in groups):
        return
    moved = [[shift + scale * v for v in g] for g in groups]
    a, b = one_way_anova(groups), one_way_anova(moved)
    assert a.dof == b.dof == (len(groups) - 1, sum(map(len, groups)) - len(groups))
    assert np.isclose(a.p_value, b.p_value, atol=1e-6)
    for x, y in zip(tukey_hsd(groups), tukey_hsd(moved)):
        assert 0 <= x.p_value <= 1 and np.isclose(x.p_value, y.p_value, atol=1e-6)


@given(start=st.sampled_from([SCHEDULE_START]), end=st.sampled_from([SCHEDULE_END_DEFAULT, SCHEDULE_END_ALT]),
       total=st.integers(1, 5000), data=st.data())
def test_schedule_is_a_distribution_moving_linearly(start, end, total, data):
    sched = SkillSchedule(start, end)
    i = data.draw(st.integers(0, total))
    p = np.array(sched.probabilities(i, total))
    assert np.all(p >= -1e-12) and abs(p.sum() - 1) < 1e-12
    np.testing.assert_allclose(p, np.array(start) + (np.array(end) - np.array(start)) * i / total, atol=1e-12)


@settings(max_examples=300)
@given(entry=st.integers(-1, 10), noise=arrays(np.float64, 7, elements=st.floats(-1, 1)))
def test_snap_is_stable_under_small_perturbation(entry, noise):
    target = TABLE.base if entry == BASE else TABLE.pointing[entry]
    radius = 0.49 * TABLE.min_pairwise_distance()
    norm = np.linalg.norm(noise)
    if norm > 0:
        noise = noise / norm * radius * min(1.0, norm)
    assert TABLE.snap(target + noise) == entry


@settings(max_examples=200)
@given(logits=arrays(np.float64, (N_STEPS, 11), elements=st.integers(-40, 40).map(lambda v: v / 8)),
       shift=arrays(np.float64, (N_STEPS, 1), elements=st.integers(-50, 50).map(float)),
       targets=arrays(np.int64, N_STEPS, elements=st.integers(0, 10)))
def test_trial_scoring_is_all_steps_and_shift_invariant(logits, shift, targets):
    postures = np.repeat(TABLE.base[None], N_STEPS, 0)
    gt = np.full(N_STEPS, BASE)
    ok, ges = step_correctness(logits, postures, targets, gt, TABLE)
    ok2, _ = step_correctness(logits + shift, postures, targets, gt, TABLE)
    np.testing.assert_array_equal(ok, ok2)
    assert ges.all()
    assert bool(ok.all()) == all(np.argmax(logits[t]) == targets[t] for t in range(N_STEPS))


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2 ** 32 - 1), dtype=st.sampled_from([np.float32, np.float64]))
def test_checkpoint_round_trip_is_exact(tmp_path_factory, seed, dtype):
    params = init_params(np.random.default_rng(seed), 30, dtype=dtype)
    path = tmp_path_factory.mktemp("ck") / "p.ckpt"
    save_checkpoint(path, params, {"seed": seed})
    again, meta, _ = load_checkpoint(path)
    assert meta["seed"] == str(seed)
    assert again.equals(params)
    assert all(a.dtype == np.dtype(dtype) for _, a in again.items())
