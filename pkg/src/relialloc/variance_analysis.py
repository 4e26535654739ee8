"""Exact variance of the reliability estimator and its allocation-free lower bounds.

For a fixed allocation M (M_ij Bernoulli observations of component i in
block j) the estimator is the product over blocks of the plug-in block
reliabilities built from sample means. Its variance has a closed form:

    Var(block j) = (1 - R_j)^2 * [ prod_i (1 + u_ij / M_ij) - 1 ]
    Var(system)  = prod_j (Var(block j) + R_j^2) - prod_j R_j^2

where u_ij = R_ij / (1 - R_ij) is the squared inverse coefficient of
variation. Both formulas are exact under independence, not asymptotic.

The lower bounds ``lower_bound_subsystem`` and ``lower_bound_system`` hold
for every allocation with the same budget and follow from the Lagrange
identity implemented by ``lagrange_decomposition``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

from .system_model import (
    ReliabilityAssignment,
    SystemTopology,
    coeff_variation,
    subsystem_reliability,
)


class AllocationError(ValueError):
    """Allocation is malformed or infeasible for the requested operation."""


@dataclass(frozen=True)
class Allocation:
    """Nonnegative integer sample sizes per component slot, block-major."""

    topology: SystemTopology
    counts: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        counts = tuple(tuple(int(c) for c in block) for block in self.counts)
        shape = tuple(len(block) for block in counts)
        if shape != self.topology.block_sizes:
            raise AllocationError(
                f"allocation shape {shape} does not match topology {self.topology.block_sizes}"
            )
        if any(c < 0 for block in counts for c in block):
            raise AllocationError("sample counts must be nonnegative")
        object.__setattr__(self, "counts", counts)

    @classmethod
    def from_blocks(cls, blocks) -> "Allocation":
        blocks = [list(b) for b in blocks]
        topo = SystemTopology(tuple(len(b) for b in blocks))
        return cls(topo, tuple(tuple(b) for b in blocks))

    def block(self, j: int) -> tuple[int, ...]:
        self.topology.check_subsystem(j)
        return self.counts[j]

    @property
    def block_totals(self) -> tuple[int, ...]:
        return tuple(sum(block) for block in self.counts)

    @property
    def total(self) -> int:
        return sum(self.block_totals)

    def require_positive(self, j: int | None = None) -> None:
        """Variance formulas divide by each count; zero counts are infeasible."""
        blocks = [j] if j is not None else range(len(self.counts))
        for jj in blocks:
            if any(c < 1 for c in self.counts[jj]):
                raise AllocationError(
                    f"subsystem {jj + 1} has a zero sample count; every slot needs >= 1"
                )


def cross_term_sum(values: Sequence[float]) -> float:
    """Sum of products of every subset of size >= 2 of the arguments.

    Computed in O(k) as prod(1 + x_i) - 1 - sum(x_i); the explicit subset
    enumeration is kept in the test suite as an oracle.
    """
    if len(values) < 1:
        raise ValueError("need at least one argument")
    prod = 1.0
    total = 0.0
    for x in values:
        prod *= 1.0 + x
        total += x
    return prod - 1.0 - total


def lagrange_decomposition(
    numerators: Sequence[float], sizes: Sequence[float]
) -> tuple[float, float]:
    """Split sum(a_i / N_i) into a size-only leading term plus a mismatch penalty.

    With N = sum(N_i):

        leading   = (sum_i sqrt(a_i))^2 / N
        remainder = (1/N) * sum_{i<j} (N_i sqrt(a_j) - N_j sqrt(a_i))^2 / (N_i N_j)

    and leading + remainder == sum(a_i / N_i) identically. The remainder
    vanishes exactly when the N_i are proportional to sqrt(a_i), which is
    what makes the leading term an allocation-independent lower bound.
    """
    if len(numerators) != len(sizes):
        raise ValueError("numerators and sizes must have equal length")
    if len(numerators) < 1:
        raise ValueError("need at least one term")
    if any(a <= 0 for a in numerators) or any(n <= 0 for n in sizes):
        raise ValueError("all entries must be strictly positive")
    roots = [math.sqrt(a) for a in numerators]
    big_n = sum(sizes)
    leading = sum(roots) ** 2 / big_n
    remainder = 0.0
    for i in range(len(sizes) - 1):
        for j in range(i + 1, len(sizes)):
            diff = sizes[i] * roots[j] - sizes[j] * roots[i]
            remainder += diff * diff / (sizes[i] * sizes[j])
    return leading, remainder / big_n


def _cv_inv_sq(p: float) -> float:
    # p/(1-p), the squared inverse coefficient of variation
    return p / (1.0 - p)


def subsystem_variance(
    assignment: ReliabilityAssignment, j: int, allocation: Allocation
) -> float:
    """Exact variance of the block-j reliability estimate under a fixed allocation."""
    if allocation.topology.block_sizes != assignment.topology.block_sizes:
        raise AllocationError("allocation and assignment shapes differ")
    allocation.require_positive(j)
    r_j = subsystem_reliability(assignment, j)
    prod = 1.0
    for p, m in zip(assignment.block(j), allocation.block(j)):
        prod *= 1.0 + _cv_inv_sq(p) / m
    return (1.0 - r_j) ** 2 * (prod - 1.0)


def system_variance(assignment: ReliabilityAssignment, allocation: Allocation) -> float:
    """Exact variance of the system reliability estimate under a fixed allocation."""
    if allocation.topology.block_sizes != assignment.topology.block_sizes:
        raise AllocationError("allocation and assignment shapes differ")
    allocation.require_positive()
    prod = 1.0
    base = 1.0
    for j in range(assignment.topology.subsystem_count):
        r_j = subsystem_reliability(assignment, j)
        prod *= subsystem_variance(assignment, j, allocation) + r_j * r_j
        base *= r_j * r_j
    return prod - base


def lower_bound_subsystem(
    assignment: ReliabilityAssignment, j: int, total: float
) -> float:
    """Allocation-independent floor on the block-j estimator variance.

    Q_j = (1 - R_j)^2 * (sum_i 1/c_ij)^2 / T_j for any split of T_j
    observations over the block. Real-valued totals are accepted for
    interpolation; callers pass integers everywhere else.
    """
    if total < 1:
        raise AllocationError(f"block budget must be >= 1, got {total}")
    r_j = subsystem_reliability(assignment, j)
    inv_sum = sum(coeff_variation(p)[1] for p in assignment.block(j))
    return (1.0 - r_j) ** 2 * inv_sum * inv_sum / total


def lower_bound_system(assignment: ReliabilityAssignment, total: float) -> float:
    """Allocation-independent floor on the system estimator variance.

    Q = (R^2 / T) * [ sum_j (1 - R_j)/R_j * sum_i 1/c_ij ]^2 for any
    allocation with grand total T.
    """
    if total < 1:
        raise AllocationError(f"total budget must be >= 1, got {total}")
    r = 1.0
    weight = 0.0
    for j in range(assignment.topology.subsystem_count):
        r_j = subsystem_reliability(assignment, j)
        r *= r_j
        inv_sum = sum(coeff_variation(p)[1] for p in assignment.block(j))
        weight += (1.0 - r_j) / r_j * inv_sum
    return r * r * weight * weight / total


def excess_variance(
    assignment: ReliabilityAssignment,
    allocation_or_variance: Allocation | float,
    total: float | None = None,
) -> float:
    """Optimality gap T * (Var - Q), from an exact or Monte Carlo variance.

    Pass an Allocation to use its exact variance (the budget is then taken
    from the allocation itself), or a plain variance value together with
    the budget it was measured at.
    """
    if isinstance(allocation_or_variance, Allocation):
        variance = system_variance(assignment, allocation_or_variance)
        alloc_total = allocation_or_variance.total
        if total is not None and total != alloc_total:
            raise AllocationError(
                f"stated budget {total} does not match allocation total {alloc_total}"
            )
        total = alloc_total
    else:
        variance = float(allocation_or_variance)
        if variance < 0:
            raise ValueError(f"variance must be nonnegative, got {variance}")
        if total is None:
            raise ValueError("a budget is required when passing a bare variance")
    return total * (variance - lower_bound_system(assignment, total))
