import numpy as np
import pytest

from couplecert.streams import TASK_CHUNK, stream, task_plan


def test_same_key_same_sequence():
    a = stream(123, 7).standard_normal(64)
    b = stream(123, 7).standard_normal(64)
    assert np.array_equal(a, b)


def test_different_index_different_sequence():
    a = stream(123, 0).standard_normal(64)
    b = stream(123, 1).standard_normal(64)
    assert not np.array_equal(a, b)


def test_different_seed_different_sequence():
    a = stream(1, 0).standard_normal(64)
    b = stream(2, 0).standard_normal(64)
    assert not np.array_equal(a, b)


def test_negative_inputs_rejected():
    with pytest.raises(ValueError):
        stream(-1, 0)
    with pytest.raises(ValueError):
        stream(0, -2)


def test_task_plan_covers_everything():
    plan = task_plan(3 * TASK_CHUNK + 17)
    assert [t for t, _, _ in plan] == list(range(len(plan)))
    assert sum(c for _, _, c in plan) == 3 * TASK_CHUNK + 17
    starts = [s for _, s, _ in plan]
    assert starts == sorted(starts)


def test_task_plan_is_worker_independent():
    # The plan depends only on the total and chunk size.
    assert task_plan(10**5) == task_plan(10**5)
