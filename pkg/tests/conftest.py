"""Shared generators and independent oracles for the test suite.

The enumeration oracles recompute estimator moments by summing over the
whole joint outcome space of the success counts; they share no code path
with the closed-form variance engine they check.
"""

from __future__ import annotations

from itertools import combinations, product
from math import comb

import numpy as np
import pytest

from relialloc import Allocation, ReliabilityAssignment


def random_assignment(
    rng: np.random.Generator,
    max_blocks: int = 4,
    max_slots: int = 4,
    lo: float = 0.05,
    hi: float = 0.95,
) -> ReliabilityAssignment:
    n = int(rng.integers(1, max_blocks + 1))
    blocks = [
        [float(rng.uniform(lo, hi)) for _ in range(int(rng.integers(1, max_slots + 1)))]
        for _ in range(n)
    ]
    return ReliabilityAssignment.from_blocks(blocks)


def random_allocation(rng: np.random.Generator, assignment, lo=1, hi=50) -> Allocation:
    counts = [
        [int(rng.integers(lo, hi + 1)) for _ in block] for block in assignment.values
    ]
    return Allocation(assignment.topology, tuple(tuple(b) for b in counts))


def enumerated_block_moments(probs, counts) -> tuple[float, float]:
    """(E[estimate], E[estimate^2]) for one parallel block, by exhaustive
    enumeration of the joint success-count distribution."""
    first = 0.0
    second = 0.0
    for successes in product(*(range(m + 1) for m in counts)):
        weight = 1.0
        est_failure = 1.0
        for s, m, p in zip(successes, counts, probs):
            weight *= comb(m, s) * p**s * (1.0 - p) ** (m - s)
            est_failure *= 1.0 - s / m
        est = 1.0 - est_failure
        first += weight * est
        second += weight * est * est
    return first, second


def enumerated_system_variance(assignment, allocation) -> float:
    """Exact system estimator variance from per-block enumerated moments.

    Blocks are independent, so the moments of the product are the products
    of the block moments.
    """
    first = 1.0
    second = 1.0
    for probs, counts in zip(assignment.values, allocation.counts):
        m1, m2 = enumerated_block_moments(probs, counts)
        first *= m1
        second *= m2
    return second - first * first


def subset_cross_sum(values) -> float:
    """Sum over all subsets of size >= 2 of the product of their elements."""
    total = 0.0
    for size in range(2, len(values) + 1):
        for subset in combinations(values, size):
            term = 1.0
            for x in subset:
                term *= x
            total += term
    return total


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20260808)
