"""Seeded Monte Carlo experiment harness.

Three experiment drivers, all pure functions of (config, seed):

  run_fixed_split_experiment  variance of the estimate as the two-block
                              budget split varies, the pilot floor apart
  run_hybrid_expectation      mean realized first-block budget under the
                              hybrid design
  run_convergence_sweep       optimality gap T * (Var - Q) along a budget
                              sweep

Each replication derives its own random stream from
(master seed, point key, replication index), so sweep points are
independent, replications can run on any number of workers, and reruns
reproduce results exactly. Aggregation always walks replications in index
order to keep emitted numbers byte-stable.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .adaptive_sampling import (
    SampleLedger,
    SimulatedSource,
    estimate_reliability,
    hybrid_two_stage,
    pilot_size,
    two_stage_subsystem,
)
from .system_model import ReliabilityAssignment
from .variance_analysis import Allocation, lower_bound_system, system_variance

#: Default replication counts (overridable through ExperimentConfig).
TABLE_REPLICATIONS = 20_000
SWEEP_REPLICATIONS = 5_000


@dataclass(frozen=True)
class ExperimentConfig:
    """Inputs that fully determine an experiment's outputs."""

    assignment: ReliabilityAssignment
    replications: int
    master_seed: int
    total: int | None = None
    sweep: tuple[int, ...] = ()
    fixed_t1: int | None = None
    threads: int = 1

    def __post_init__(self):
        if self.replications < 2:
            raise ValueError("need at least 2 replications for a sample variance")
        if self.master_seed < 0:
            raise ValueError("seed must be nonnegative")
        if self.sweep:
            if any(t < 1 for t in self.sweep):
                raise ValueError("sweep budgets must be positive")
            if list(self.sweep) != sorted(self.sweep):
                raise ValueError("sweep budgets must be ascending")


@dataclass(frozen=True)
class FixedSplitPoint:
    """Summary for one first-block budget in the fixed-split experiment."""

    t1: int
    t2: int
    var_hat: float
    se: float
    mean_r_hat: float
    exact_conditional_mean: float


@dataclass(frozen=True)
class SweepPoint:
    """Summary for one budget in the convergence sweep."""

    total: int
    var_hat: float
    se: float
    q_bound: float
    excess: float
    mean_r_hat: float


@dataclass(frozen=True)
class HybridExpectation:
    """Aggregate hybrid-design behavior at one budget."""

    total: int
    replications: int
    mean_block_totals: tuple[float, ...]
    mean_t1: float
    rounded_t1: int
    var_hat: float
    se: float
    mean_r_hat: float
    mean_counts: tuple[tuple[float, ...], ...]


def replication_rng(master_seed: int, point_key: int, replication: int) -> np.random.Generator:
    """Independent stream for one replication of one experiment point."""
    seq = np.random.SeedSequence((int(master_seed), int(point_key), int(replication)))
    return np.random.Generator(np.random.PCG64(seq))


def empirical_variance(samples) -> tuple[float, float]:
    """Unbiased sample variance and its standard error.

    The standard error comes from the plug-in fourth-moment formula
    Var(s^2) ~= (m4 - (K-3)/(K-1) * s^4) / K with central sample moments.
    """
    x = np.asarray(samples, dtype=float)
    k = x.size
    if k < 2:
        raise ValueError("need at least 2 samples")
    mean = x.mean()
    dev = x - mean
    m2 = float(np.mean(dev * dev))
    m4 = float(np.mean(dev**4))
    var = m2 * k / (k - 1)
    var_of_var = (m4 - (k - 3) / (k - 1) * m2 * m2) / k
    return var, math.sqrt(max(var_of_var, 0.0))


def simulate_fixed_allocation(
    assignment: ReliabilityAssignment, allocation: Allocation, replications: int, rng
) -> np.ndarray:
    """Vectorized replication of the estimator under a fixed allocation.

    Success counts per slot are binomial draws, which is distributionally
    identical to summing individual Bernoulli outcomes. Returns one
    reliability estimate per replication.
    """
    allocation.require_positive()
    r_hat = np.ones(replications)
    for j in range(assignment.topology.subsystem_count):
        block_failure = np.ones(replications)
        for p, m in zip(assignment.block(j), allocation.block(j)):
            successes = rng.binomial(m, p, size=replications)
            block_failure *= 1.0 - successes / m
        r_hat *= 1.0 - block_failure
    return r_hat


def _map_replications(count: int, threads: int, fn) -> list:
    """Apply ``fn(replication_index)`` for all indices, results in index order."""
    results = [None] * count
    if threads <= 1:
        for k in range(count):
            results[k] = fn(k)
        return results

    chunk = max(1, math.ceil(count / (threads * 8)))
    spans = [(lo, min(lo + chunk, count)) for lo in range(0, count, chunk)]

    def run_span(span):
        lo, hi = span
        for k in range(lo, hi):
            results[k] = fn(k)

    with ThreadPoolExecutor(max_workers=threads) as pool:
        list(pool.map(run_span, spans))
    return results


def _hybrid_replications(config: ExperimentConfig, total: int, point_key: int):
    """All hybrid replications at one budget: (r_hats, block_totals, counts)."""

    def one(rep):
        rng = replication_rng(config.master_seed, point_key, rep)
        source = SimulatedSource(config.assignment, rng)
        result = hybrid_two_stage(source, config.assignment.topology, total)
        return (
            result.reliability_estimate,
            result.allocation.block_totals,
            result.allocation.counts,
        )

    outcomes = _map_replications(config.replications, config.threads, one)
    r_hats = np.array([o[0] for o in outcomes])
    block_totals = [o[1] for o in outcomes]
    counts = [o[2] for o in outcomes]
    return r_hats, block_totals, counts


def run_fixed_split_experiment(config: ExperimentConfig) -> list[FixedSplitPoint]:
    """Variance of the estimate per first-block budget, two-block systems only.

    For each split (T1, T - T1) with T1 from the pilot floor up to the
    mirrored floor, the component-level two-stage design runs independently
    on each block. The exact variance conditioned on the realized
    allocations is reported alongside the Monte Carlo variance.
    """
    assignment = config.assignment
    if assignment.topology.subsystem_count != 2:
        raise ValueError("the fixed-split experiment needs exactly two subsystems")
    if config.total is None:
        raise ValueError("config.total is required")
    total = config.total
    low = pilot_size(total)
    if config.fixed_t1 is not None:
        if not low <= config.fixed_t1 <= total - low:
            raise ValueError(
                f"fixed T1 must lie in [{low}, {total - low}], got {config.fixed_t1}"
            )
        t1_range = [config.fixed_t1]
    else:
        t1_range = range(low, total - low + 1)
    points = []
    for t1 in t1_range:

        def one(rep, t1=t1):
            rng = replication_rng(config.master_seed, t1, rep)
            source = SimulatedSource(assignment, rng)
            ledger = SampleLedger(assignment.topology)
            two_stage_subsystem(source, 0, t1, ledger)
            two_stage_subsystem(source, 1, total - t1, ledger)
            return estimate_reliability(ledger, assignment.topology), tuple(
                tuple(b) for b in ledger.draws
            )

        outcomes = _map_replications(config.replications, config.threads, one)
        r_hats = np.array([o[0] for o in outcomes])
        var, se = empirical_variance(r_hats)

        cache: dict[tuple, float] = {}
        acc = 0.0
        for _, counts in outcomes:
            if counts not in cache:
                cache[counts] = system_variance(
                    assignment, Allocation(assignment.topology, counts)
                )
            acc += cache[counts]
        points.append(
            FixedSplitPoint(
                t1=t1,
                t2=total - t1,
                var_hat=var,
                se=se,
                mean_r_hat=float(r_hats.mean()),
                exact_conditional_mean=acc / config.replications,
            )
        )
    return points


def run_hybrid_expectation(config: ExperimentConfig) -> HybridExpectation:
    """Mean realized block budgets (and estimator statistics) under the hybrid design."""
    if config.total is None:
        raise ValueError("config.total is required")
    total = config.total
    r_hats, block_totals, counts = _hybrid_replications(config, total, point_key=0)
    var, se = empirical_variance(r_hats)
    totals = np.array(block_totals, dtype=float)
    mean_totals = tuple(float(v) for v in totals.mean(axis=0))
    counts_arr = np.array(
        [[c for block in rep for c in block] for rep in counts], dtype=float
    )
    mean_flat = counts_arr.mean(axis=0)
    mean_counts = []
    pos = 0
    for size in config.assignment.topology.block_sizes:
        mean_counts.append(tuple(float(v) for v in mean_flat[pos : pos + size]))
        pos += size
    return HybridExpectation(
        total=total,
        replications=config.replications,
        mean_block_totals=mean_totals,
        mean_t1=mean_totals[0],
        rounded_t1=round(mean_totals[0]),
        var_hat=var,
        se=se,
        mean_r_hat=float(r_hats.mean()),
        mean_counts=tuple(mean_counts),
    )


def run_convergence_sweep(config: ExperimentConfig) -> list[SweepPoint]:
    """Optimality gap T * (Var - Q) at each budget of the sweep."""
    if not config.sweep:
        raise ValueError("config.sweep is required")
    points = []
    for total in config.sweep:
        r_hats, _, _ = _hybrid_replications(config, total, point_key=total)
        var, se = empirical_variance(r_hats)
        q = lower_bound_system(config.assignment, total)
        points.append(
            SweepPoint(
                total=total,
                var_hat=var,
                se=se,
                q_bound=q,
                excess=total * (var - q),
                mean_r_hat=float(r_hats.mean()),
            )
        )
    return points


def format_value(value) -> str:
    """CSV cell text: shortest round-trip decimal for floats, plain for ints."""
    if isinstance(value, bool):
        raise TypeError("no boolean cells in experiment output")
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def fixed_split_rows(points: list[FixedSplitPoint]) -> tuple[list[str], list[list[str]]]:
    header = ["T1", "var_hat", "se", "mean_R_hat"]
    rows = [
        [format_value(p.t1), format_value(p.var_hat), format_value(p.se), format_value(p.mean_r_hat)]
        for p in points
    ]
    return header, rows


def convergence_rows(points: list[SweepPoint]) -> tuple[list[str], list[list[str]]]:
    header = ["T", "var_hat", "se", "Q", "excess"]
    rows = [
        [
            format_value(p.total),
            format_value(p.var_hat),
            format_value(p.se),
            format_value(p.q_bound),
            format_value(p.excess),
        ]
        for p in points
    ]
    return header, rows


def table_rows(results: list[tuple[str, HybridExpectation]]) -> tuple[list[str], list[list[str]]]:
    header = ["case", "mean_T1", "rounded_T1"]
    rows = [
        [name, format_value(res.mean_t1), format_value(res.rounded_t1)]
        for name, res in results
    ]
    return header, rows
