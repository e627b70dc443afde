"""
The reproduction bundle: exact tables, running-example trajectories,
ex-ante reports, correlated-utility CDFs, the clearinghouse demo and its
linkage, plus one acceptance record per check.

Everything written here is a function of the seed alone. Timings go to the
log, never into the bundle.
"""
import logging
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Optional

import numpy as np
import pandas as pd

from core.audit import Outcome, audit_stability, redistribution_violations, winners_and_losers
from core.conf import admissions_settings
from core.exceptions import AcceptanceCheckFailed
from core.generators import random_instance, ranked_instance
from exante.montecarlo import cdf_dominates, outside_sigma_band, sweep_deltas
from exante.propositions import cached_distribution, check_prop4, check_prop5
from imsim.clearinghouse import BehaviorConfig, run_clearinghouse
from imsim.metrics import assignment_rate_table, cutoff_movement_table, staggered_closing_pattern
from imsim.population import PopulationConfig, generate_population, population_from_rows
from imsim.schedule import BatchSchedule
from imsim.serializers import OutcomeMetricsSerializer
from linker.linking import link_snapshots
from linker.scoring import score_linkage
from mechanisms.da import run_da
from mechanisms.registry import Mechanism
from mechanisms.serializers import TcdmTrajectorySerializer
from mechanisms.tcdm import minimal_convergence_t, run_tcdm, time_constraint_effects

from .base import write_csv, write_json
from .serializers import distribution_rows

logger = logging.getLogger(__name__)

RUNNING_EXAMPLE_ORDERS = [(0, 1, 2, 3), (0, 1, 3, 2), (1, 2, 0, 3), (2, 3, 0, 1)]
RUNNING_EXAMPLE_ROUNDS = 2
UNIT_CAPACITIES = (1, 1, 1, 1)

# two-decimal values as printed for the running example
PRINTED_TABLE = {
    'tcdm': {
        1: (1, 0, 0, 0, 0),
        2: (0.75, 0.25, 0, 0, 0),
        3: (0.5, 0.29, 0.12, 0, 0.09),
        4: (0.27, 0.20, 0.15, 0.09, 0.29),
    },
    'da': {
        1: (1, 0, 0, 0, 0),
        2: (0.75, 0.25, 0, 0, 0),
        3: (0.5, 0.33, 0.17, 0, 0),
        4: (0.25, 0.25, 0.25, 0.25, 0),
    },
}
PRINTED_TOLERANCE = 0.005

RUNNING_EXAMPLE_TCDM = {'i1': 'c1', 'i2': 'c2', 'i3': None, 'i4': 'c3'}
RUNNING_EXAMPLE_DA = {'i1': 'c1', 'i2': 'c2', 'i3': 'c3', 'i4': 'c4'}

DOMINANCE_CASES = (
    (3, (1, 1, 1), 1),
    (4, (1, 1, 1, 1), 1),
    (4, (1, 1, 1, 1), 2),
    (4, (1, 1, 1, 1), 3),
    (4, (2, 1, 1), 1),
)
ROUND_BUDGET_CASE = (4, UNIT_CAPACITIES, 4)
DOMINANCE_DELTAS = (0.2, 0.4, 0.6, 0.8)

DEMO_POPULATION = {'num_students': 5000, 'num_universities': 70, 'quota_log_mean': 4.3}
DEMO_BEHAVIOR = {'revision_prob': 0.5, 'program_revision_prob': 0.1}
LINK_THRESHOLD = 0.95
LOWER_BOUND_SHARE = 0.95

RANK_TABLE = 'rank_table.csv'
RUNNING_EXAMPLE_FILE = 'running_example.json'
DOMINANCE_REPORT = 'dominance_report.json'
ROUND_BUDGET_REPORT = 'round_budget_report.json'
CORRELATED_CDFS = 'correlated_cdfs.csv'
IMSIM_DEMO_DIR = 'imsim_demo'
LINKAGE_SCORE = 'linkage_score.json'
ACCEPTANCE = 'acceptance.json'


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: Dict = field(default_factory=dict)

    def to_dict(self):
        return {'name': self.name, 'passed': self.passed, 'detail': self.detail}


def running_example():
    return ranked_instance(list(UNIT_CAPACITIES), RUNNING_EXAMPLE_ORDERS)


def rank_table():
    """Exact running-example distributions next to their printed two-decimal values."""
    tcdm = cached_distribution(4, UNIT_CAPACITIES, RUNNING_EXAMPLE_ROUNDS, Mechanism.TCDM)
    da = cached_distribution(4, UNIT_CAPACITIES, None, Mechanism.DA)
    frame = pd.DataFrame(list(distribution_rows('tcdm', tcdm)) + list(distribution_rows('da', da)))
    rank = frame.groupby(['mechanism', 'position']).cumcount()
    frame['printed'] = [
        PRINTED_TABLE[mechanism][position][index]
        for mechanism, position, index in zip(frame['mechanism'], frame['position'], rank)
    ]
    return frame, da


def check_rank_table(frame, da) -> CheckResult:
    deviation = float((frame['probability'] - frame['printed']).abs().max())
    lowest_uniform = da[3].probs == (Fraction(1, 4),) * 4 + (0,)
    return CheckResult(
        'rank_table',
        deviation <= PRINTED_TOLERANCE and lowest_uniform,
        {'max_deviation': round(deviation, 6), 'lowest_position_uniform_under_da': lowest_uniform},
    )


def running_example_report():
    instance = running_example()
    trajectory = run_tcdm(instance, RUNNING_EXAMPLE_ROUNDS)
    da = run_da(instance)
    effects = time_constraint_effects(instance, trajectory, da)
    report = {
        'tcdm': TcdmTrajectorySerializer(trajectory).data,
        'da': da.to_dict(),
        'minimal_convergence_t': minimal_convergence_t(instance),
        'time_constraint_effects': {student: effect.value for student, effect in effects.items()},
        'i4_rank': {
            'tcdm': instance.rank_of('i4', trajectory.final.college_of('i4')),
            'da': instance.rank_of('i4', da.college_of('i4')),
        },
    }
    passed = (
        trajectory.final.to_dict() == RUNNING_EXAMPLE_TCDM
        and da.to_dict() == RUNNING_EXAMPLE_DA
        and report['i4_rank'] == {'tcdm': 1, 'da': 2}
    )
    return report, CheckResult('running_example', passed, {'i4_rank': report['i4_rank']})


def check_da_equivalence(seed, count=None) -> CheckResult:
    """Unbounded TCDM converges to DA with no blocking pairs."""
    count = admissions_settings.RANDOM_INSTANCE_COUNT if count is None else count
    rng = np.random.default_rng([seed, 1])
    failures = []
    for index in range(count):
        instance = random_instance(rng)
        trajectory = run_tcdm(instance, None)
        if not (
            trajectory.converged
            and trajectory.final == run_da(instance)
            and audit_stability(instance, trajectory.final).is_stable
        ):
            failures.append(index)
    return CheckResult('da_equivalence', not failures, {'instances': count, 'failures': failures})


def check_redistribution(seed, count=None) -> CheckResult:
    """Every TCDM winner has a higher-priority student left unassigned."""
    count = admissions_settings.RANDOM_INSTANCE_COUNT if count is None else count
    rng = np.random.default_rng([seed, 3])
    winners = 0
    violations = []
    for index in range(count):
        instance = random_instance(rng)
        rounds = int(rng.integers(1, 4))
        tcdm, da = run_tcdm(instance, rounds).final, run_da(instance)
        winners += sum(o is Outcome.BETTER for o in winners_and_losers(instance, tcdm, da).values())
        if redistribution_violations(instance, tcdm, da):
            violations.append(index)
    return CheckResult(
        'redistribution', not violations,
        {'instances': count, 'students_better_off': winners, 'violations': violations},
    )


def dominance_reports():
    reports = [check_prop4(n, capacities, rounds, strict=False) for n, capacities, rounds in DOMINANCE_CASES]
    check = CheckResult(
        'ex_ante_dominance',
        all(r.holds for r in reports),
        {'cases': len(reports), 'violations': sum(len(r.violations) for r in reports)},
    )
    return [r.to_dict() for r in reports], check


def round_budget_report():
    report = check_prop5(*ROUND_BUDGET_CASE)
    passed = report.first_choice_weakly_decreasing and report.lower_ranks_weakly_increasing and report.converges_to_da
    return report.to_dict(), CheckResult(
        'round_budget_trends', passed,
        {'direction_finding': report.direction_finding, 'flags': list(report.flags)},
    )


def correlated_cdfs(seed, threads=1, num_sims=None, deltas=None):
    """
    CDF table over the delta grid plus delta = 0, and the three checks on it:
    identical preferences strand positions 3 and 4, independent preferences
    match the exact oracle, and DA dominates TCDM for position 3 in between.
    """
    num_sims = admissions_settings.MONTE_CARLO_SIMS if num_sims is None else num_sims
    deltas = admissions_settings.MONTE_CARLO_DELTAS if deltas is None else deltas
    grid = sorted({0.0, *(float(d) for d in deltas)})
    results, frame = sweep_deltas(
        4, list(UNIT_CAPACITIES), RUNNING_EXAMPLE_ROUNDS, deltas=grid, num_sims=num_sims, seed=seed, threads=threads
    )
    by_delta = {round(r.config.delta, 6): r for r in results}
    checks = []

    identical = by_delta.get(1.0)
    stranded = identical is not None and all(d.unassigned == 1.0 for d in identical.tcdm[2:])
    checks.append(CheckResult('identical_preferences', stranded, {'delta': 1.0}))

    independent = by_delta[0.0]
    misses = outside_sigma_band(
        independent.tcdm, cached_distribution(4, UNIT_CAPACITIES, RUNNING_EXAMPLE_ROUNDS, Mechanism.TCDM), num_sims
    ) + outside_sigma_band(independent.da, cached_distribution(4, UNIT_CAPACITIES, None, Mechanism.DA), num_sims)
    checks.append(CheckResult(
        'independent_preferences', not misses,
        {'cells_outside_band': [[int(p), int(i)] for p, i, _, _ in misses]},
    ))

    dominated = {
        str(delta): cdf_dominates(by_delta[delta].da[2], by_delta[delta].tcdm[2], ranks=range(1, 5))
        for delta in DOMINANCE_DELTAS if delta in by_delta
    }
    checks.append(CheckResult(
        'position_three_dominance', len(dominated) == len(DOMINANCE_DELTAS) and all(dominated.values()), dominated,
    ))
    return frame, checks


def check_reduction(seed, count=None) -> CheckResult:
    """Single batch, everyone revising every hour: the clearinghouse ends where TCDM ends."""
    count = admissions_settings.REDUCTION_CONFIGS if count is None else count
    divergences = []
    for index in range(count):
        rng = np.random.default_rng([seed, 8, index])
        size = int(rng.integers(2, 9))
        num_universities = int(rng.integers(1, 6))
        rounds = int(rng.integers(1, 5))
        scores = rng.choice(np.arange(1, 1000), size=size, replace=False)
        preferences = [rng.permutation(num_universities) for _ in range(size)]
        quotas = rng.integers(1, 3, size=num_universities)
        schedule = BatchSchedule.single_batch(rounds)
        population = population_from_rows(scores, preferences, quotas, schedule)
        run = run_clearinghouse(population, schedule, BehaviorConfig(revision_prob=1.0), seed=index)
        if run.final != run_tcdm(population.to_instance(), rounds).final:
            divergences.append(index)
    return CheckResult('clearinghouse_reduction', not divergences, {'configs': count, 'divergences': divergences})


def check_cutoff_monotonicity(movement) -> CheckResult:
    falling = movement.loc[movement['down'] > 0, 'hour'].tolist()
    return CheckResult('cutoff_monotonicity', not falling, {'hours': len(movement), 'falling_hours': falling})


def demo_run(seed):
    schedule = BatchSchedule.default()
    population = generate_population(PopulationConfig(**DEMO_POPULATION), schedule, seed=seed)
    return run_clearinghouse(population, schedule, BehaviorConfig(**DEMO_BEHAVIOR), seed=seed)


def linkage_summary(seed):
    """Simulate one demo cohort, link it blind and score it; picklable for worker processes."""
    run = demo_run(seed)
    score = score_linkage(link_snapshots(run.snapshots.without_truth()), run.snapshots.truth)
    return {'seed': seed, **score.to_dict()}


def linkage_seeds(seed, threads=1, count=None) -> List[Dict]:
    count = admissions_settings.LINKER_SEEDS if count is None else count
    seeds = [seed + k for k in range(count)]
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as executor:
            return list(executor.map(linkage_summary, seeds))
    return [linkage_summary(s) for s in seeds]


def check_linkage(summaries) -> CheckResult:
    frozen_exact = all(s['frozen_unique_accuracy'] == 1.0 for s in summaries)
    accurate = all(
        s['link_precision'] >= LINK_THRESHOLD and s['link_recall'] >= LINK_THRESHOLD for s in summaries
    )
    bound_share = sum(s['lower_bound_holds'] for s in summaries) / len(summaries)
    return CheckResult(
        'linkage',
        frozen_exact and accurate and bound_share >= LOWER_BOUND_SHARE,
        {
            'seeds': len(summaries),
            'frozen_unique_exact': frozen_exact,
            'min_link_precision': min(s['link_precision'] for s in summaries),
            'min_link_recall': min(s['link_recall'] for s in summaries),
            'lower_bound_share': bound_share,
        },
    )


class Stopwatch:
    def __init__(self, label):
        self.label = label

    def __enter__(self):
        self.started = time.perf_counter()
        return self

    def __exit__(self, *exc):
        logger.info(f"{self.label} took {time.perf_counter() - self.started:.2f}s")


def reproduce(out, seed: Optional[int] = None, threads: int = 1, monte_carlo_sims=None, linker_seeds=None,
              random_instances=None, reduction_configs=None) -> List[CheckResult]:
    """
    Write the full bundle into `out` and return every check. Raises
    AcceptanceCheckFailed after writing when any check fails.
    """
    seed = admissions_settings.DEFAULT_SEED if seed is None else seed
    os.makedirs(os.path.join(out, IMSIM_DEMO_DIR), exist_ok=True)
    checks = []

    with Stopwatch('Exact rank table'):
        frame, da = rank_table()
        write_csv(frame, os.path.join(out, RANK_TABLE))
        checks.append(check_rank_table(frame, da))

    report, check = running_example_report()
    write_json(report, os.path.join(out, RUNNING_EXAMPLE_FILE))
    checks.append(check)

    with Stopwatch('Random-instance checks'):
        checks.append(check_da_equivalence(seed, random_instances))
        checks.append(check_redistribution(seed, random_instances))

    with Stopwatch('Ex-ante reports'):
        reports, check = dominance_reports()
        write_json(reports, os.path.join(out, DOMINANCE_REPORT))
        checks.append(check)
        report, check = round_budget_report()
        write_json(report, os.path.join(out, ROUND_BUDGET_REPORT))
        checks.append(check)

    with Stopwatch('Correlated-utility simulations'):
        frame, found = correlated_cdfs(seed, threads=threads, num_sims=monte_carlo_sims)
        write_csv(frame, os.path.join(out, CORRELATED_CDFS))
        checks.extend(found)

    with Stopwatch('Clearinghouse checks'):
        checks.append(check_reduction(seed, reduction_configs))
        run = demo_run(seed)
        write_json(OutcomeMetricsSerializer(run.metrics).data, os.path.join(out, IMSIM_DEMO_DIR, 'metrics.json'))
        write_csv(assignment_rate_table(run.metrics), os.path.join(out, IMSIM_DEMO_DIR, 'assignment_rates.csv'))
        movement = cutoff_movement_table(run.snapshots)
        write_csv(movement, os.path.join(out, IMSIM_DEMO_DIR, 'cutoff_movement.csv'))
        pattern = staggered_closing_pattern(run.metrics, run.schedule)
        checks.append(CheckResult(
            'staggered_closing', bool(pattern) and all(pattern.values()),
            {str(batch): rises for batch, rises in pattern.items()},
        ))
        checks.append(check_cutoff_monotonicity(movement))

    with Stopwatch('Linkage'):
        summaries = linkage_seeds(seed, threads=threads, count=linker_seeds)
        write_json({'demo': summaries[0], 'seeds': summaries}, os.path.join(out, LINKAGE_SCORE))
        checks.append(check_linkage(summaries))

    write_json(
        {'seed': seed, 'passed': all(c.passed for c in checks), 'checks': [c.to_dict() for c in checks]},
        os.path.join(out, ACCEPTANCE),
    )
    failed = [c.name for c in checks if not c.passed]
    for name in failed:
        logger.warning(f"Acceptance check failed: {name}")
    if failed:
        raise AcceptanceCheckFailed(failed)
    logger.info(f"All {len(checks)} acceptance checks passed")
    return checks
