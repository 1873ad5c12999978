import threading
from typing import List, Optional, Set

import numpy as np
import pytest

from rshelab.dynamics.streams import NoiseStream
from rshelab.experiments.ensemble import default_threads, run_ensemble
from tests.testing_utils import raises_literal


def _draw(i: int) -> List[float]:
    gen = NoiseStream(3).child(i).for_step(0)
    values: List[float] = gen.standard_normal(4).tolist()
    return values


@pytest.mark.parametrize("threads", [1, 2, 4, None])
def test_results_do_not_depend_on_threads(threads: Optional[int]) -> None:
    expected = [_draw(i) for i in range(10)]
    assert run_ensemble(_draw, 10, threads) == expected


def test_runs_on_several_threads() -> None:
    seen: Set[int] = set()
    barrier = threading.Barrier(2, timeout=10)

    def task(i: int) -> int:
        seen.add(threading.get_ident())
        barrier.wait()
        return i * i

    assert run_ensemble(task, 2, threads=2) == [0, 1]
    assert len(seen) == 2


def test_empty_and_errors() -> None:
    assert run_ensemble(lambda i: i, 0) == []
    assert default_threads() >= 1
    with raises_literal("ensemble size must be non-negative, got -1"):
        run_ensemble(lambda i: i, -1)
    with raises_literal("thread count must be at least 1, got 0"):
        run_ensemble(lambda i: i, 3, threads=0)


def test_task_errors_propagate() -> None:
    def task(i: int) -> float:
        if i == 3:
            raise ArithmeticError("step 3")
        return float(np.sqrt(i))

    with raises_literal("step 3", ArithmeticError):
        run_ensemble(task, 5, threads=2)
