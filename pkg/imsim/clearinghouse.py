"""
Hour-by-hour staggered-closing clearinghouse.

Each hour, students with a revision opportunity re-optimize against the
cutoffs published at the end of the previous hour, universities hold their
best applicants up to the final quota, and a snapshot is published. A
student's application is frozen once her batch deadline has passed.
"""
import logging
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from core.conf import admissions_settings
from core.domain import Matching
from core.exceptions import InvalidInputError

from .metrics import OutcomeMetrics, compute_metrics
from .population import MAX_PROGRAM_CHOICES, Population, draw_program_choices
from .schedule import BatchSchedule
from .snapshots import OPEN_SEAT, SnapshotSet, clears_cutoff, rank_applicants

logger = logging.getLogger(__name__)

CUTOFF_BASES = ('final', 'planned')


@dataclass(frozen=True)
class BehaviorConfig:
    """
    revision_prob: chance an active student may revise in a given hour; every
    student can revise in her deadline hour regardless.
    late_entry_prob: chance a student first enters after the opening hour.
    program_revision_prob: chance a revising student who keeps her
    university re-draws her program choices.
    """
    revision_prob: float = 1.0
    late_entry_prob: float = 0.0
    program_revision_prob: float = 0.0
    cutoff_basis: Optional[str] = None

    def __post_init__(self):
        if self.cutoff_basis is None:
            object.__setattr__(self, 'cutoff_basis', admissions_settings.CUTOFF_BASIS)
        if not 0 < self.revision_prob <= 1:
            raise InvalidInputError(f"revision_prob must lie in (0, 1], got {self.revision_prob}")
        for name in ('late_entry_prob', 'program_revision_prob'):
            if not 0 <= getattr(self, name) <= 1:
                raise InvalidInputError(f"{name} must lie in [0, 1]")
        if self.cutoff_basis not in CUTOFF_BASES:
            raise InvalidInputError(f"cutoff_basis must be one of {CUTOFF_BASES}, got {self.cutoff_basis!r}")


@dataclass(frozen=True, eq=False)
class HourState:
    hour: int
    university: np.ndarray
    programs: np.ndarray
    accept_any: np.ndarray
    held: np.ndarray
    cutoff_final: np.ndarray
    cutoff_planned: np.ndarray
    marginal_final: np.ndarray
    marginal_planned: np.ndarray


@dataclass(frozen=True, eq=False)
class ClearinghouseRun:
    population: Population
    schedule: BatchSchedule
    behavior: BehaviorConfig
    seed: int
    history: Tuple[HourState, ...]
    entry_hour: np.ndarray
    void: np.ndarray
    snapshots: SnapshotSet
    final: Matching
    metrics: OutcomeMetrics

    @property
    def final_assignment(self) -> np.ndarray:
        """University index per student, -1 when unassigned."""
        last = self.history[-1]
        return np.where(last.held, last.university, -1)


def straightforward_applications(preferences, scores, cutoffs, current, tie_breaks=None, marginal=None):
    """
    Most preferred university whose published cutoff the score clears. A
    score equal to a cutoff clears it only when the tie-break ranks ahead of
    that university's marginal holder; without tie-breaks every tie clears.
    With an empty budget set the current application is kept, or the top
    choice for a student who has not applied yet.
    """
    if len(scores) == 0:
        return current.copy()
    if tie_breaks is None or marginal is None:
        admissible = cutoffs[preferences] <= scores[:, None]
    else:
        admissible = clears_cutoff(scores[:, None], tie_breaks[:, None], cutoffs[preferences], marginal[preferences])
    first = preferences[np.arange(len(scores)), admissible.argmax(axis=1)]
    fallback = np.where(current >= 0, current, preferences[:, 0])
    return np.where(admissible.any(axis=1), first, fallback)


def _entry_hours(rng, schedule, deadline, late_entry_prob):
    count = len(deadline)
    entry = np.full(count, schedule.opening_hour, dtype=np.int64)
    late = (rng.random(count) < late_entry_prob) & (deadline > schedule.opening_hour)
    if late.any():
        entry[late] = rng.integers(schedule.opening_hour + 1, deadline[late] + 1)
    return entry


def run_clearinghouse(population: Population, schedule: BatchSchedule,
                      behavior: Optional[BehaviorConfig] = None, seed: Optional[int] = None) -> ClearinghouseRun:
    """
    Simulate the staggered-closing procedure and score its outcome.

    Students scored below every band have no deadline and never enter; they
    are void together with late entrants who miss the mandatory entry hour.
    """
    behavior = BehaviorConfig() if behavior is None else behavior
    seed = admissions_settings.DEFAULT_SEED if seed is None else seed
    rng = np.random.default_rng(seed)

    count = population.size
    score = population.score
    true_ids = np.arange(count)
    deadline = schedule.deadlines(population.batch)
    entry_hour = _entry_hours(rng, schedule, deadline, behavior.late_entry_prob)
    void = (population.batch == 0) | (entry_hour > schedule.mandatory_entry_hour)
    if void.any():
        logger.warning(f"{int(void.sum())} applications are void and will not be matched")

    university = np.full(count, -1, dtype=np.int64)
    programs = np.zeros((count, MAX_PROGRAM_CHOICES), dtype=np.int64)
    accept_any = np.zeros(count, dtype=bool)
    held = np.zeros(count, dtype=bool)
    cutoff_final = np.zeros(population.num_universities, dtype=np.int64)
    cutoff_planned = np.zeros(population.num_universities, dtype=np.int64)
    marginal_final = np.full(population.num_universities, OPEN_SEAT, dtype=np.int64)
    marginal_planned = marginal_final.copy()
    history = []

    for hour in schedule.hours:
        if behavior.cutoff_basis == 'final':
            published, marginal = cutoff_final, marginal_final
        else:
            published, marginal = cutoff_planned, marginal_planned
        opportunity = rng.random(count)
        program_draw = rng.random(count)

        entering = ~void & (entry_hour == hour)
        active = ~void & (entry_hour <= hour) & (hour <= deadline)
        acting = entering | (active & ((opportunity < behavior.revision_prob) | (hour == deadline)))

        movers = np.flatnonzero(acting & ~held)
        choice = straightforward_applications(
            population.preferences[movers], score[movers], published, university[movers],
            tie_breaks=true_ids[movers], marginal=marginal,
        )
        changed = np.zeros(count, dtype=bool)
        changed[movers] = choice != university[movers]
        university[movers] = choice

        redraw = changed | (acting & (program_draw < behavior.program_revision_prob))
        fresh_programs, fresh_accept = draw_program_choices(
            rng, int(redraw.sum()), population.programs_per_university, population.accept_any_prob
        )
        programs[redraw] = fresh_programs
        accept_any[redraw] = fresh_accept

        held, cutoff_final, cutoff_planned, marginal_final, marginal_planned = rank_applicants(
            university, score, true_ids, population.planned_quota, population.final_quota
        )
        history.append(HourState(
            hour=hour,
            university=university.copy(),
            programs=programs.copy(),
            accept_any=accept_any.copy(),
            held=held.copy(),
            cutoff_final=cutoff_final,
            cutoff_planned=cutoff_planned,
            marginal_final=marginal_final,
            marginal_planned=marginal_planned,
        ))
        logger.debug(
            f"Hour {hour}: {len(movers)} revising, {int(changed.sum())} changed university, "
            f"{int(held.sum())} held"
        )

    final_codes = np.where(held, university, -1)
    final = Matching({
        population.student_label(i): (population.university_ids[code] if code >= 0 else None)
        for i, code in enumerate(final_codes)
    })
    snapshots = SnapshotSet.from_history(population, schedule, history)
    metrics = compute_metrics(snapshots, final, population)
    logger.info(
        f"Clearinghouse finished after {len(history)} hours: "
        f"{int((final_codes >= 0).sum())} of {count} students placed"
    )
    return ClearinghouseRun(
        population=population,
        schedule=schedule,
        behavior=behavior,
        seed=seed,
        history=tuple(history),
        entry_hour=entry_hour,
        void=void,
        snapshots=snapshots,
        final=final,
        metrics=metrics,
    )
