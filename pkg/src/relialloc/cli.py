"""Command-line front end.

Four subcommands: ``evaluate`` (exact quantities for a system and optional
allocation), ``allocate`` (rule, balanced, or certified-optimal integer
allocations), ``simulate`` (per-replication records for one scheme), and
``experiment`` (the canned fixed-split / budget-table / convergence runs).

Output files are written to a temporary name and atomically renamed, so a
failed invocation never leaves a partial CSV. Every data file gets a
``.meta.json`` sidecar holding the artifact version, the resolved
configuration, and the seed; rerunning with the same flags reproduces all
bytes exactly, regardless of ``--threads``.

Exit codes: 2 malformed input or usage, 3 infeasible budget/allocation,
4 oracle guard exceeded, 5 unwritable output.
"""

from __future__ import annotations

import json
import os
import sys
import tempfile
from pathlib import Path

import click

from . import __version__, cases
from .adaptive_sampling import (
    SampleLedger,
    SimulatedSource,
    SourceExhaustedError,
    estimate_reliability,
    hybrid_two_stage,
    two_stage_subsystem,
)
from .allocation import (
    OracleGuardError,
    balanced_allocation,
    brute_force_optimal,
    rule_allocation,
)
from .experiments import (
    SWEEP_REPLICATIONS,
    TABLE_REPLICATIONS,
    ExperimentConfig,
    convergence_rows,
    empirical_variance,
    fixed_split_rows,
    format_value,
    replication_rng,
    run_convergence_sweep,
    run_fixed_split_experiment,
    run_hybrid_expectation,
    simulate_fixed_allocation,
    table_rows,
)
from .system_model import (
    ReliabilityAssignment,
    SystemSpecError,
    coeff_variation,
    dump_system,
    load_system,
    subsystem_reliability,
    system_reliability,
)
from .variance_analysis import (
    Allocation,
    AllocationError,
    excess_variance,
    lower_bound_system,
    system_variance,
)

EXIT_MALFORMED = 2
EXIT_INFEASIBLE = 3
EXIT_GUARD = 4
EXIT_OUTPUT = 5


def _fail(code: int, message: str):
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


def _guarded(fn):
    """Map library exceptions to the documented exit codes."""

    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except SystemSpecError as exc:
            _fail(EXIT_MALFORMED, str(exc))
        except OracleGuardError as exc:
            _fail(EXIT_GUARD, str(exc))
        except (AllocationError, SourceExhaustedError, ValueError) as exc:
            _fail(EXIT_INFEASIBLE, str(exc))
        except OSError as exc:
            _fail(EXIT_OUTPUT, str(exc))

    wrapper.__name__ = fn.__name__
    wrapper.__doc__ = fn.__doc__
    return wrapper


def _resolve_system(ref: str) -> ReliabilityAssignment:
    """Load a system from a JSON path or a bundled ``case:NAME`` reference."""
    if ref.startswith("case:"):
        return cases.load_case(ref[len("case:") :])
    return load_system(ref)


def _resolve_seed(seed: int | None) -> int:
    if seed is not None:
        return seed
    env = os.environ.get("RELIALLOC_SEED")
    if env is not None:
        try:
            return int(env)
        except ValueError:
            raise SystemSpecError(f"RELIALLOC_SEED must be an integer, got {env!r}")
    return 0


def _resolve_threads(threads: int | None) -> int:
    if threads is None:
        return os.cpu_count() or 1
    if threads < 1:
        raise click.UsageError("--threads must be at least 1")
    return threads


def _load_allocation(path, assignment: ReliabilityAssignment) -> Allocation:
    try:
        payload = json.loads(Path(path).read_text())
    except OSError as exc:
        raise SystemSpecError(f"cannot read allocation file {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise SystemSpecError(f"allocation file {path} is not valid JSON: {exc}") from exc
    if not isinstance(payload, dict) or "blocks" not in payload:
        raise SystemSpecError('allocation file must be an object with a "blocks" key')
    return Allocation(assignment.topology, tuple(tuple(b) for b in payload["blocks"]))


def _write_text_atomic(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp_name = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as handle:
            handle.write(text)
        os.replace(tmp_name, path)
    except BaseException:
        try:
            os.unlink(tmp_name)
        except OSError:
            pass
        raise


def _write_csv(path: Path, header: list[str], rows: list[list[str]]) -> None:
    lines = [",".join(header)] + [",".join(row) for row in rows]
    _write_text_atomic(path, "\n".join(lines) + "\n")


def _write_sidecar(out_path: Path, command: str, config: dict, extras: dict | None = None) -> Path:
    """Provenance record next to a data file. Thread count is an execution
    detail, never configuration, so it is deliberately not recorded."""
    sidecar = out_path.with_suffix(".meta.json")
    payload = {
        "artifact": "relialloc",
        "version": __version__,
        "command": command,
        "config": config,
        "output": out_path.name,
    }
    if extras:
        payload.update(extras)
    _write_text_atomic(sidecar, json.dumps(payload, sort_keys=True, indent=2) + "\n")
    return sidecar


def _f6(x: float) -> str:
    return f"{x:.6g}"


@click.group()
def main():
    """Exact variances and adaptive sample allocation for parallel-series systems."""


@main.command()
@click.argument("system", type=str)
@click.option("--allocation", "allocation_path", type=str, default=None,
              help="JSON allocation file: {\"blocks\": [[counts...], ...]}.")
@_guarded
def evaluate(system, allocation_path):
    """Print reliabilities, variation coefficients, and exact variances."""
    assignment = _resolve_system(system)
    n = assignment.topology.subsystem_count
    click.echo(f"system reliability R = {_f6(system_reliability(assignment))}")
    for j in range(n):
        click.echo(f"  subsystem {j + 1}: R_{j + 1} = {_f6(subsystem_reliability(assignment, j))}")
        for i, p in enumerate(assignment.block(j)):
            c, c_inv = coeff_variation(p)
            click.echo(
                f"    component {i + 1}: R = {_f6(p)}  cv = {_f6(c)}  1/cv = {_f6(c_inv)}"
            )
    if allocation_path is not None:
        alloc = _load_allocation(allocation_path, assignment)
        var = system_variance(assignment, alloc)
        total = alloc.total
        q = lower_bound_system(assignment, total)
        click.echo(f"allocation total T = {total}")
        click.echo(f"exact Var = {_f6(var)}")
        click.echo(f"lower bound Q(T={total}) = {_f6(q)}")
        click.echo(f"excess T*(Var - Q) = {_f6(excess_variance(assignment, var, total))}")


@main.command()
@click.argument("system", type=str)
@click.option("--T", "total", type=int, required=True, help="Total observation budget.")
@click.option("--rule", "mode", flag_value="rule", default=True,
              help="Closed-form fractions, integerized (default).")
@click.option("--oracle", "mode", flag_value="oracle",
              help="Certified optimum by exhaustive enumeration.")
@click.option("--balanced", "mode", flag_value="balanced", help="Equal counts per slot.")
@click.option("--min-per-slot", type=int, default=1, show_default=True,
              help="Oracle: minimum observations per component.")
@_guarded
def allocate(system, total, mode, min_per_slot):
    """Compute an integer allocation of the budget and its exact variance."""
    assignment = _resolve_system(system)
    if mode == "rule":
        alloc = rule_allocation(assignment, total)
    elif mode == "balanced":
        alloc = balanced_allocation(assignment.topology, total)
    else:
        alloc, _ = brute_force_optimal(assignment, total, min_per_slot)
    var = system_variance(assignment, alloc)
    click.echo(f"mode: {mode}")
    for j, block in enumerate(alloc.counts):
        pretty = ", ".join(str(c) for c in block)
        click.echo(f"  subsystem {j + 1}: T_{j + 1} = {sum(block)}  M = [{pretty}]")
    label = "certified optimal Var" if mode == "oracle" else "predicted Var"
    click.echo(f"{label} = {_f6(var)}")
    click.echo(f"lower bound Q(T={total}) = {_f6(lower_bound_system(assignment, total))}")


def _simulate_hybrid(assignment, total, reps, seed, threads):
    from .experiments import _map_replications

    def one(rep):
        rng = replication_rng(seed, 0, rep)
        result = hybrid_two_stage(SimulatedSource(assignment, rng), assignment.topology, total)
        return result.reliability_estimate, result.allocation

    return _map_replications(reps, threads, one)


def _simulate_fixed_split(assignment, total, t1, reps, seed, threads):
    from .experiments import _map_replications

    if assignment.topology.subsystem_count != 2:
        raise ValueError("--scheme fixed-split needs exactly two subsystems")

    def one(rep):
        rng = replication_rng(seed, t1, rep)
        source = SimulatedSource(assignment, rng)
        ledger = SampleLedger(assignment.topology)
        two_stage_subsystem(source, 0, t1, ledger)
        two_stage_subsystem(source, 1, total - t1, ledger)
        return estimate_reliability(ledger, assignment.topology), ledger.to_allocation()

    return _map_replications(reps, threads, one)


@main.command()
@click.argument("system", type=str)
@click.option("--T", "total", type=int, required=True, help="Total observation budget.")
@click.option("--scheme", type=click.Choice(["hybrid", "balanced", "fixed-split"]),
              default="hybrid", show_default=True)
@click.option("--T1", "t1", type=int, default=None,
              help="First-block budget (fixed-split scheme only).")
@click.option("--reps", type=int, required=True, help="Replications (at least 2).")
@click.option("--seed", type=int, default=None, help="Master seed; falls back to RELIALLOC_SEED, then 0.")
@click.option("--out", "out_path", type=str, required=True, help="Output CSV path.")
@click.option("--threads", type=int, default=None, help="Worker threads (default: machine parallelism).")
@_guarded
def simulate(system, total, scheme, t1, reps, seed, out_path, threads):
    """Replicate one sampling scheme; write per-replication records and a mean row."""
    if reps < 2:
        raise click.UsageError("--reps must be at least 2 (sample variance is undefined)")
    if scheme == "fixed-split" and t1 is None:
        raise click.UsageError("--scheme fixed-split requires --T1")
    assignment = _resolve_system(system)
    seed = _resolve_seed(seed)
    threads = _resolve_threads(threads)
    topo = assignment.topology

    if scheme == "hybrid":
        outcomes = _simulate_hybrid(assignment, total, reps, seed, threads)
        records = [(r, alloc.block_totals, alloc.counts) for r, alloc in outcomes]
    elif scheme == "fixed-split":
        outcomes = _simulate_fixed_split(assignment, total, t1, reps, seed, threads)
        records = [(r, alloc.block_totals, alloc.counts) for r, alloc in outcomes]
    else:
        alloc = balanced_allocation(topo, total)
        rng = replication_rng(seed, 0, 0)
        r_hats = simulate_fixed_allocation(assignment, alloc, reps, rng)
        records = [(float(r), alloc.block_totals, alloc.counts) for r in r_hats]

    header = ["rep", "R_hat"]
    header += [f"T_{j + 1}" for j in range(topo.subsystem_count)]
    header += [
        f"M_{i + 1}_{j + 1}"
        for j in range(topo.subsystem_count)
        for i in range(topo.block_sizes[j])
    ]
    rows = []
    for rep, (r_hat, totals, counts) in enumerate(records):
        flat = [c for block in counts for c in block]
        rows.append(
            [str(rep), format_value(float(r_hat))]
            + [str(t) for t in totals]
            + [str(c) for c in flat]
        )
    k = len(records)
    mean_r = sum(r for r, _, _ in records) / k
    mean_totals = [sum(rec[1][j] for rec in records) / k for j in range(topo.subsystem_count)]
    flat_all = [[c for block in rec[2] for c in block] for rec in records]
    mean_flat = [sum(col) / k for col in zip(*flat_all)]
    rows.append(
        ["mean", format_value(mean_r)]
        + [format_value(v) for v in mean_totals]
        + [format_value(v) for v in mean_flat]
    )
    var, se = empirical_variance([r for r, _, _ in records])

    out = Path(out_path)
    _write_csv(out, header, rows)
    _write_sidecar(
        out,
        "simulate",
        {
            "system": dump_system(assignment),
            "system_ref": system,
            "T": total,
            "scheme": scheme,
            "T1": t1,
            "reps": reps,
            "seed": seed,
        },
        extras={"summary": {"mean_R_hat": mean_r, "var_R_hat": var, "se_var": se}},
    )
    click.echo(f"wrote {out} ({reps} replications), var(R_hat) = {_f6(var)}")


@main.command()
@click.option("--fixed-split", "mode", flag_value="fixed-split",
              help="Variance versus first-block budget (two-block systems).")
@click.option("--table1", "mode", flag_value="table1",
              help="Mean realized first-block budget for bundled cases A-D.")
@click.option("--convergence", "mode", flag_value="convergence",
              help="Optimality gap along a budget sweep.")
@click.option("--system", "system_ref", type=str, default=None,
              help="System JSON path or case:NAME (fixed-split / convergence).")
@click.option("--T", "total", type=int, default=None, help="Budget (default 20).")
@click.option("--reps", type=int, default=None,
              help=f"Replications (defaults: {TABLE_REPLICATIONS} fixed-split/table1, "
                   f"{SWEEP_REPLICATIONS} convergence).")
@click.option("--seed", type=int, default=None, help="Master seed; falls back to RELIALLOC_SEED, then 0.")
@click.option("--sweep", type=str, default=None, help="Budget sweep START:STOP:STEP (convergence).")
@click.option("--out", "out_path", type=str, required=True, help="Output CSV path.")
@click.option("--threads", type=int, default=None, help="Worker threads (default: machine parallelism).")
@_guarded
def experiment(mode, system_ref, total, reps, seed, sweep, out_path, threads):
    """Run one of the canned experiments and write its data file."""
    if mode is None:
        raise click.UsageError("pick one of --fixed-split, --table1, --convergence")
    seed = _resolve_seed(seed)
    threads = _resolve_threads(threads)
    out = Path(out_path)

    if mode == "table1":
        reps = TABLE_REPLICATIONS if reps is None else reps
        total = 20 if total is None else total
        results = []
        for name in cases.BENCH_CASES:
            config = ExperimentConfig(
                assignment=cases.load_case(name),
                replications=reps,
                master_seed=seed,
                total=total,
                threads=threads,
            )
            results.append((name, run_hybrid_expectation(config)))
        header, rows = table_rows(results)
        _write_csv(out, header, rows)
        _write_sidecar(
            out,
            "experiment --table1",
            {"cases": list(cases.BENCH_CASES), "T": total, "reps": reps, "seed": seed},
            extras={
                "mean_block_totals": {
                    name: list(res.mean_block_totals) for name, res in results
                }
            },
        )
        click.echo(f"wrote {out}")
        return

    if system_ref is None:
        raise click.UsageError(f"--{mode} requires --system")
    assignment = _resolve_system(system_ref)

    if mode == "fixed-split":
        reps = TABLE_REPLICATIONS if reps is None else reps
        total = 20 if total is None else total
        config = ExperimentConfig(
            assignment=assignment,
            replications=reps,
            master_seed=seed,
            total=total,
            threads=threads,
        )
        points = run_fixed_split_experiment(config)
        header, rows = fixed_split_rows(points)
        _write_csv(out, header, rows)
        _write_sidecar(
            out,
            "experiment --fixed-split",
            {
                "system": dump_system(assignment),
                "system_ref": system_ref,
                "T": total,
                "reps": reps,
                "seed": seed,
            },
            extras={
                "exact_conditional_variance": {
                    str(p.t1): p.exact_conditional_mean for p in points
                }
            },
        )
        click.echo(f"wrote {out}")
        return

    if sweep is None:
        raise click.UsageError("--convergence requires --sweep START:STOP:STEP")
    try:
        start, stop, step = (int(part) for part in sweep.split(":"))
    except ValueError:
        raise click.UsageError("--sweep must look like START:STOP:STEP, e.g. 100:10000:100")
    if start < 1 or stop < start or step < 1:
        raise click.UsageError("--sweep needs 1 <= START <= STOP and STEP >= 1")
    budgets = tuple(range(start, stop + 1, step))
    reps = SWEEP_REPLICATIONS if reps is None else reps
    config = ExperimentConfig(
        assignment=assignment,
        replications=reps,
        master_seed=seed,
        sweep=budgets,
        threads=threads,
    )
    points = run_convergence_sweep(config)
    header, rows = convergence_rows(points)
    _write_csv(out, header, rows)
    _write_sidecar(
        out,
        "experiment --convergence",
        {
            "system": dump_system(assignment),
            "system_ref": system_ref,
            "sweep": [start, stop, step],
            "reps": reps,
            "seed": seed,
        },
    )
    click.echo(f"wrote {out}")


if __name__ == "__main__":
    main()
