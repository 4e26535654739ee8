"""Parallel-series system structure and exact reliability evaluation.

A system is a series chain of subsystems ("blocks"); each block is a
parallel arrangement of Bernoulli components. A block works if at least
one of its components works; the system works if every block works.

Component slots are addressed as (i, j): component i within block j,
stored block-major. All other modules share this layout.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

PARALLEL_SERIES = "parallel-series"
SERIES_PARALLEL = "series-parallel"


class SystemSpecError(ValueError):
    """Malformed system description: bad shape, bad probability, bad file."""


@dataclass(frozen=True)
class SystemTopology:
    """Shape of a parallel-series system: one block size per subsystem."""

    block_sizes: tuple[int, ...]

    def __post_init__(self):
        sizes = tuple(int(s) for s in self.block_sizes)
        if len(sizes) < 1:
            raise SystemSpecError("system needs at least one subsystem")
        if any(s < 1 for s in sizes):
            raise SystemSpecError(f"every block needs at least one component: {sizes}")
        object.__setattr__(self, "block_sizes", sizes)

    @property
    def subsystem_count(self) -> int:
        return len(self.block_sizes)

    @property
    def component_count(self) -> int:
        return sum(self.block_sizes)

    def check_subsystem(self, j: int) -> None:
        if not 0 <= j < len(self.block_sizes):
            raise IndexError(f"subsystem index {j} out of range (n={len(self.block_sizes)})")


@dataclass(frozen=True)
class ReliabilityAssignment:
    """True component reliabilities aligned with a topology.

    Values are strictly inside (0, 1): components that never or always
    work make the coefficient of variation (and its inverse) undefined,
    so they are rejected at construction instead of clamped.
    """

    topology: SystemTopology
    values: tuple[tuple[float, ...], ...]

    def __post_init__(self):
        vals = tuple(tuple(float(v) for v in block) for block in self.values)
        shape = tuple(len(block) for block in vals)
        if shape != self.topology.block_sizes:
            raise SystemSpecError(
                f"value shape {shape} does not match topology {self.topology.block_sizes}"
            )
        for j, block in enumerate(vals):
            for i, v in enumerate(block):
                if not 0.0 < v < 1.0 or math.isnan(v):
                    raise SystemSpecError(
                        f"reliability at component {i + 1} of subsystem {j + 1} "
                        f"must lie strictly in (0, 1), got {v}"
                    )
        object.__setattr__(self, "values", vals)

    @classmethod
    def from_blocks(cls, blocks) -> "ReliabilityAssignment":
        """Build assignment and topology together from nested sequences."""
        blocks = [list(b) for b in blocks]
        topo = SystemTopology(tuple(len(b) for b in blocks))
        return cls(topo, tuple(tuple(b) for b in blocks))

    def block(self, j: int) -> tuple[float, ...]:
        self.topology.check_subsystem(j)
        return self.values[j]

    def complement(self) -> "ReliabilityAssignment":
        """Componentwise 1 - R, same topology."""
        return ReliabilityAssignment(
            self.topology, tuple(tuple(1.0 - v for v in block) for block in self.values)
        )


@dataclass(frozen=True)
class DualSystem:
    """An assignment tagged with its arrangement kind.

    parallel-series: series chain of parallel blocks (the native engine).
    series-parallel: parallel combination of series blocks (evaluated by
    duality; there is deliberately no second evaluation path).
    """

    assignment: ReliabilityAssignment
    kind: str

    def __post_init__(self):
        if self.kind not in (PARALLEL_SERIES, SERIES_PARALLEL):
            raise SystemSpecError(f"unknown system kind: {self.kind!r}")


def subsystem_reliability(assignment: ReliabilityAssignment, j: int) -> float:
    """Reliability of parallel block j: 1 - prod_i (1 - R_ij)."""
    failure = 1.0
    for v in assignment.block(j):
        failure *= 1.0 - v
    return 1.0 - failure


def system_reliability(assignment: ReliabilityAssignment) -> float:
    """System reliability: product of block reliabilities."""
    r = 1.0
    for j in range(assignment.topology.subsystem_count):
        r *= subsystem_reliability(assignment, j)
    return r


def coeff_variation(p: float) -> tuple[float, float]:
    """Coefficient of variation of a Bernoulli(p) variable, and its inverse.

    c = sqrt(1/p - 1) = sqrt((1-p)/p),   1/c = sqrt(p/(1-p)).

    Raises ValueError outside the open interval (0, 1).
    """
    if not 0.0 < p < 1.0:
        raise ValueError(f"probability must lie strictly in (0, 1), got {p}")
    c = math.sqrt(1.0 / p - 1.0)
    return c, math.sqrt(p / (1.0 - p))


def dual_transform(system: DualSystem) -> DualSystem:
    """Swap the arrangement kind and complement every reliability.

    An involution: applying it twice restores the original system.
    """
    kind = SERIES_PARALLEL if system.kind == PARALLEL_SERIES else PARALLEL_SERIES
    return DualSystem(system.assignment.complement(), kind)


def dual_reliability(system: DualSystem) -> float:
    """Reliability of either arrangement kind, via the parallel-series engine.

    For a series-parallel system the value is 1 minus the parallel-series
    reliability of the complemented assignment.
    """
    if system.kind == PARALLEL_SERIES:
        return system_reliability(system.assignment)
    return 1.0 - system_reliability(system.assignment.complement())


def parse_system(payload) -> ReliabilityAssignment:
    """Parse the canonical system mapping: {"blocks": [[...], ...]}.

    The outer list holds subsystems in series; each inner list holds the
    parallel component reliabilities of one block.
    """
    if not isinstance(payload, dict) or "blocks" not in payload:
        raise SystemSpecError('system description must be an object with a "blocks" key')
    blocks = payload["blocks"]
    if not isinstance(blocks, list) or not blocks:
        raise SystemSpecError('"blocks" must be a non-empty list of lists')
    for block in blocks:
        if not isinstance(block, list) or not block:
            raise SystemSpecError("every block must be a non-empty list of reliabilities")
        for v in block:
            if not isinstance(v, (int, float)) or isinstance(v, bool):
                raise SystemSpecError(f"reliability entries must be numbers, got {v!r}")
    return ReliabilityAssignment.from_blocks(blocks)


def load_system(path) -> ReliabilityAssignment:
    """Load a system JSON file. Raises SystemSpecError on any defect."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise SystemSpecError(f"cannot read system file {path}: {exc}") from exc
    try:
        payload = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SystemSpecError(f"system file {path} is not valid JSON: {exc}") from exc
    return parse_system(payload)


def dump_system(assignment: ReliabilityAssignment) -> dict:
    """Inverse of parse_system, for provenance records and round-trips."""
    return {"blocks": [list(block) for block in assignment.values]}
