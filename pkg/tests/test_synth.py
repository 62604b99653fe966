"""Synthetic corpus generator: determinism, layout, writer separation."""

import numpy as np
import pytest

from inkpass.capture import load_dataset, write_dataset
from inkpass.dtw import score_pair
from inkpass.evaluation import normalized_matrices
from inkpass.features import FunctionSubset
from inkpass.synth import _speed_warp, synthetic_dataset


def test_counts_and_default_split():
    ds = synthetic_dataset(6, seed=0)
    assert len(ds) == 6 * 10 * 2 * 4
    assert len(ds.dev_users) == 3
    assert len(ds.eval_users) == 3


def test_explicit_dev_count():
    ds = synthetic_dataset(5, seed=0, dev_user_count=2)
    assert len(ds.dev_users) == 2
    assert len(ds.eval_users) == 3


def test_same_seed_reproduces_every_point():
    a = synthetic_dataset(3, seed=17)
    b = synthetic_dataset(3, seed=17)
    for sa, sb in zip(a.samples, b.samples):
        assert sa.key == sb.key
        assert sa.points == sb.points


def test_different_seed_differs():
    a = synthetic_dataset(2, seed=0)
    b = synthetic_dataset(2, seed=1)
    assert any(sa.points != sb.points for sa, sb in zip(a.samples, b.samples))


def test_point_budget_and_timestamps():
    ds = synthetic_dataset(4, seed=3)
    for s in ds.samples:
        assert 40 <= len(s.points) <= 80
        times = [p.t for p in s.points]
        assert all(b > a for a, b in zip(times, times[1:]))


def test_writers_draw_distinct_shapes():
    ds = synthetic_dataset(4, seed=5)
    first = [ds.get(u, 0, 1, 1) for u in ds.users]
    for i in range(len(first)):
        for j in range(i + 1, len(first)):
            assert first[i].points != first[j].points


def test_same_writer_scores_higher_than_cross_writer():
    ds = synthetic_dataset(4, seed=2)
    mats = normalized_matrices(ds)
    subset = FunctionSubset.baseline()
    same, cross = [], []
    for digit in (0, 3, 7):
        for u in ds.users:
            same.append(score_pair(
                mats[(u, digit, 1, 1)], mats[(u, digit, 2, 1)], subset))
        for ua in ds.users:
            for ub in ds.users:
                if ua != ub:
                    cross.append(score_pair(
                        mats[(ua, digit, 1, 1)], mats[(ub, digit, 2, 1)], subset))
    assert np.mean(same) > np.mean(cross)


def test_round_trips_through_sample_files(tmp_path):
    ds = synthetic_dataset(2, seed=9)
    write_dataset(ds, tmp_path)
    back = load_dataset(tmp_path, dev_user_count=ds.dev_user_count)
    assert back.skipped == ()
    assert back.by_key().keys() == ds.by_key().keys()
    for key, sample in ds.by_key().items():
        assert back.by_key()[key].points == sample.points


def test_speed_warp_stays_monotone():
    t = np.linspace(0.0, 1.0, 200)
    for strength in (-0.9, -0.3, 0.0, 0.4, 0.9):
        warped = _speed_warp(t, strength)
        assert np.all(np.diff(warped) > 0)
        assert warped[0] == 0.0 and warped[-1] == pytest.approx(1.0)


def test_rejects_empty_corpus():
    with pytest.raises(ValueError):
        synthetic_dataset(0)
