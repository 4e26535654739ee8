"""Bundled benchmark systems.

Two-block cases A-D drive the budget-split experiments; ``chain_2_3_4_5``
is the wider 2/3/4/5-component chain used by the convergence sweep (its
reliabilities are this package's documented defaults, chosen inside
[0.1, 0.95] so no component sits near a degenerate edge);
``parallel_four`` is the single four-component parallel block from the
allocation motivation example.

Any CLI ``--system`` argument of the form ``case:NAME`` resolves here.
"""

from __future__ import annotations

import json
from importlib import resources

from ..system_model import ReliabilityAssignment, SystemSpecError, parse_system

BENCH_CASES = ("A", "B", "C", "D")

_FILES = {
    "A": "case_a.json",
    "B": "case_b.json",
    "C": "case_c.json",
    "D": "case_d.json",
    "chain_2_3_4_5": "chain_2_3_4_5.json",
    "parallel_four": "parallel_four.json",
}


def available() -> tuple[str, ...]:
    return tuple(sorted(_FILES))


def case_text(name: str) -> str:
    """Raw JSON text of a bundled case."""
    if name not in _FILES:
        raise SystemSpecError(
            f"unknown bundled case {name!r}; available: {', '.join(available())}"
        )
    return resources.files(__package__).joinpath(_FILES[name]).read_text()


def load_case(name: str) -> ReliabilityAssignment:
    return parse_system(json.loads(case_text(name)))
