"""Allocation rules: closed-form optima, integer rounding, brute-force oracle.

The closed-form rules minimize the leading mismatch penalty of the variance
(see ``lagrange_decomposition``): within a block, sample sizes proportional
to the inverse coefficients of variation; across blocks, budgets
proportional to (1 - R_j)/R_j times the block's summed inverse cv. The
rules accept either true reliabilities or estimates; the caller decides.
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
from .variance_analysis import Allocation, AllocationError, system_variance

#: Hard cap on the number of candidate allocations the oracle will enumerate.
ORACLE_GUARD = 10_000_000


class OracleGuardError(RuntimeError):
    """Brute-force search space exceeds the enumeration guard."""


@dataclass(frozen=True)
class AllocationRulePlan:
    """Rule-based real-valued sampling fractions, before integer rounding."""

    component_fractions: tuple[tuple[float, ...], ...]
    subsystem_fractions: tuple[float, ...]

    def __post_init__(self):
        for group in (*self.component_fractions, self.subsystem_fractions):
            if abs(sum(group) - 1.0) > 1e-12:
                raise ValueError(f"fractions must sum to 1, got {sum(group)!r}")
            if any(not 0.0 < f <= 1.0 for f in group):
                raise ValueError("fractions must lie in (0, 1]")


def component_fractions(cv_inverses: Sequence[float]) -> tuple[float, ...]:
    """Within-block sampling fractions, proportional to the inverse cv."""
    if any(x <= 0 for x in cv_inverses):
        raise ValueError("inverse coefficients of variation must be positive")
    total = sum(cv_inverses)
    return tuple(x / total for x in cv_inverses)


def subsystem_weights(assignment: ReliabilityAssignment) -> tuple[float, ...]:
    """Unnormalized block weights (1 - R_j)/R_j * sum_i 1/c_ij."""
    weights = []
    for j in range(assignment.topology.subsystem_count):
        r_j = subsystem_reliability(assignment, j)
        inv_sum = sum(coeff_variation(p)[1] for p in assignment.block(j))
        weights.append((1.0 - r_j) / r_j * inv_sum)
    return tuple(weights)


def subsystem_fractions(assignment: ReliabilityAssignment) -> tuple[float, ...]:
    """Across-block budget fractions, the normalized subsystem weights."""
    weights = subsystem_weights(assignment)
    total = sum(weights)
    return tuple(w / total for w in weights)


def rule_plan(assignment: ReliabilityAssignment) -> AllocationRulePlan:
    """Full rule-based plan: block fractions plus within-block fractions."""
    comp = tuple(
        component_fractions([coeff_variation(p)[1] for p in assignment.block(j)])
        for j in range(assignment.topology.subsystem_count)
    )
    return AllocationRulePlan(comp, subsystem_fractions(assignment))


def integerize(
    fractions: Sequence[float], total: int, floor_per_slot: int | Sequence[int] = 0
) -> tuple[int, ...]:
    """Round fractions of a budget to integers that sum exactly to the budget.

    Every slot but the last gets max(floor, int(fraction * total)); the last
    slot takes the remainder. If the remainder falls short of the last
    slot's floor, the repair loop moves units off the currently largest
    other slot (ties resolved toward the lowest index) until it does not.
    Floors may be a scalar or one value per slot.
    """
    k = len(fractions)
    if k < 1:
        raise AllocationError("need at least one slot")
    if isinstance(floor_per_slot, int):
        floors = [floor_per_slot] * k
    else:
        floors = [int(f) for f in floor_per_slot]
        if len(floors) != k:
            raise AllocationError("one floor per slot required")
    if any(f < 0 for f in floors):
        raise AllocationError("floors must be nonnegative")
    total = int(total)
    if total < sum(floors):
        raise AllocationError(
            f"budget {total} cannot cover per-slot floors summing to {sum(floors)}"
        )
    counts = [max(floors[i], math.floor(fractions[i] * total)) for i in range(k - 1)]
    last = total - sum(counts)
    while last < floors[-1]:
        largest = None
        for i in range(k - 1):
            if counts[i] > floors[i] and (largest is None or counts[i] > counts[largest]):
                largest = i
        # sum(floors) <= total guarantees an eligible slot exists
        counts[largest] -= 1
        last += 1
    return tuple(counts) + (last,)


def apportion(
    fractions: Sequence[float], total: int, floor_per_slot: int | Sequence[int] = 0
) -> tuple[int, ...]:
    """Largest-remainder rounding of fractions to integers summing to the budget.

    Unlike ``integerize`` (whose floor-and-remainder convention the adaptive
    designs are specified against), this hands leftover units to the slots
    whose scaled fractions lost the most to flooring, so no slot ends more
    than one unit away from its real-valued share unless a floor forces it.
    Ties and over-allocation repair resolve toward the lowest index.
    """
    k = len(fractions)
    if k < 1:
        raise AllocationError("need at least one slot")
    floors = [floor_per_slot] * k if isinstance(floor_per_slot, int) else [int(f) for f in floor_per_slot]
    if len(floors) != k or any(f < 0 for f in floors):
        raise AllocationError("need one nonnegative floor per slot")
    total = int(total)
    if total < sum(floors):
        raise AllocationError(
            f"budget {total} cannot cover per-slot floors summing to {sum(floors)}"
        )
    scaled = [float(f) * total for f in fractions]
    counts = [max(fl, math.floor(s)) for fl, s in zip(floors, scaled)]
    short = total - sum(counts)
    if short > 0:
        by_remainder = sorted(
            range(k), key=lambda i: (-(scaled[i] - math.floor(scaled[i])), i)
        )
        for i in by_remainder[:short]:
            counts[i] += 1
    while sum(counts) > total:
        largest = None
        for i in range(k):
            if counts[i] > floors[i] and (largest is None or counts[i] > counts[largest]):
                largest = i
        counts[largest] -= 1
    return tuple(counts)


def balanced_allocation(topology: SystemTopology, total: int) -> Allocation:
    """Equal sample sizes per component; remainder goes to the last slot."""
    slots = topology.component_count
    if total < slots:
        raise AllocationError(f"budget {total} below one observation per slot ({slots})")
    flat = integerize([1.0 / slots] * slots, total, 1)
    return _allocation_from_flat(topology, flat)


def rule_allocation(assignment: ReliabilityAssignment, total: int) -> Allocation:
    """Integerized rule-based allocation for the whole system.

    Block budgets follow the subsystem fractions (floored at the block
    size so every slot can be observed), then each block splits its budget
    by component fractions with a floor of one observation per slot.
    Rounding uses largest-remainder apportionment at both levels.
    """
    topo = assignment.topology
    if total < topo.component_count:
        raise AllocationError(
            f"budget {total} below one observation per slot ({topo.component_count})"
        )
    plan = rule_plan(assignment)
    block_budgets = apportion(plan.subsystem_fractions, total, list(topo.block_sizes))
    blocks = []
    for j, budget in enumerate(block_budgets):
        blocks.append(apportion(plan.component_fractions[j], budget, 1))
    return Allocation(topo, tuple(blocks))


def _allocation_from_flat(topology: SystemTopology, flat: Sequence[int]) -> Allocation:
    blocks = []
    pos = 0
    for size in topology.block_sizes:
        blocks.append(tuple(flat[pos : pos + size]))
        pos += size
    return Allocation(topology, tuple(blocks))


def _compositions(total: int, parts: int, minimum: int):
    """Yield all integer tuples of length ``parts`` with entries >= minimum
    summing to ``total``, in lexicographic order."""
    if parts == 1:
        if total >= minimum:
            yield (total,)
        return
    for first in range(minimum, total - minimum * (parts - 1) + 1):
        for rest in _compositions(total - first, parts - 1, minimum):
            yield (first,) + rest


def composition_count(total: int, parts: int, minimum: int) -> int:
    """Number of candidates the oracle would enumerate (stars and bars)."""
    free = total - parts * minimum
    if free < 0:
        return 0
    return math.comb(free + parts - 1, parts - 1)


def brute_force_optimal(
    assignment: ReliabilityAssignment,
    total: int,
    min_per_slot: int = 1,
    guard: int = ORACLE_GUARD,
) -> tuple[Allocation, float]:
    """Exhaustively minimize the exact system variance over integer allocations.

    Enumerates every split of ``total`` with at least ``min_per_slot``
    observations per component. Ties break toward the lexicographically
    smallest allocation (flat, block-major order). Guarded: raises
    OracleGuardError if the candidate count exceeds ``guard``.
    """
    topo = assignment.topology
    slots = topo.component_count
    if min_per_slot < 1:
        raise AllocationError("the variance is undefined below one observation per slot")
    if total < slots * min_per_slot:
        raise AllocationError(
            f"budget {total} cannot give {min_per_slot} observations to each of {slots} slots"
        )
    n_candidates = composition_count(total, slots, min_per_slot)
    if n_candidates > guard:
        raise OracleGuardError(
            f"{n_candidates} candidate allocations exceed the guard of {guard}"
        )

    # Flat per-block constants so the hot loop avoids object construction.
    block_data = []
    for j in range(topo.subsystem_count):
        r_j = subsystem_reliability(assignment, j)
        u = [p / (1.0 - p) for p in assignment.block(j)]
        block_data.append(((1.0 - r_j) ** 2, r_j * r_j, u))
    base = 1.0
    for _, rj2, _ in block_data:
        base *= rj2

    best = None
    best_var = math.inf
    for candidate in _compositions(total, slots, min_per_slot):
        prod = 1.0
        pos = 0
        for omr2, rj2, u in block_data:
            p = 1.0
            for x in u:
                p *= 1.0 + x / candidate[pos]
                pos += 1
            prod *= omr2 * (p - 1.0) + rj2
        var = prod - base
        if var < best_var:
            best_var = var
            best = candidate
    allocation = _allocation_from_flat(topo, best)
    # recompute through the public path so the reported value is authoritative
    return allocation, system_variance(assignment, allocation)
