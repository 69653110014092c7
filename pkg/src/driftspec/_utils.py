"""
Private utilities.
"""

from __future__ import annotations

from collections import Counter
from collections.abc import Callable, Hashable, Iterable, Sequence
from concurrent.futures import ThreadPoolExecutor
from typing import TypeVar

import numpy as np

T = TypeVar("T")
R = TypeVar("R")

_SEED_MASK = (1 << 64) - 1


def duplicates(values: Iterable[Hashable]) -> dict[Hashable, int]:
    """
    Takes a sequence of hashable elements and returns a dict where the keys are the
    elements of the input that occurred more than once, and the values are the
    frequencies of those elements.
    """
    counts = Counter(values)
    return {k: v for k, v in counts.items() if v > 1}


def replicate_seed(master: int, index: int) -> int:
    """
    The seed of replicate ``index``: ``master XOR index`` on 64 bits.
    """
    return (int(master) ^ int(index)) & _SEED_MASK


def replicate_rng(master: int, index: int) -> np.random.Generator:
    """
    The random stream of replicate ``index``.
    """
    return np.random.default_rng(replicate_seed(master, index))


def ordered_map(func: Callable[[T], R], items: Sequence[T], threads: int = 1) -> list[R]:
    """
    ``[func(item) for item in items]``, run on up to ``threads`` worker threads.

    Results come back in input order whatever the thread count.
    """
    if threads <= 1 or len(items) <= 1:
        return [func(item) for item in items]
    with ThreadPoolExecutor(max_workers=threads) as executor:
        return list(executor.map(func, items))
