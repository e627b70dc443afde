"""
Time-constrained dynamic mechanism.

Rounds are simultaneous: every student submits one application, each college
holds its best applicants up to capacity, cutoffs are published, and after
the round budget the tentative matching becomes final.
"""
import enum
import logging
from dataclasses import dataclass
from typing import Callable, Dict, Mapping, Optional, Tuple

from core.audit import compute_cutoffs
from core.domain import CutoffVector, Matching, ProblemInstance
from core.exceptions import AdmissionsError, InvalidInputError

from .da import hold_applications, run_da
from .strategy import straightforward_choice

logger = logging.getLogger(__name__)

Policy = Callable[[str, ProblemInstance, CutoffVector, Optional[str]], Optional[str]]


@dataclass(frozen=True)
class RoundRecord:
    index: int
    applications: Mapping[str, Optional[str]]
    tentative: Matching
    cutoffs: CutoffVector
    rejected: Tuple[str, ...]


@dataclass(frozen=True)
class TcdmTrajectory:
    round_budget: Optional[int]
    rounds: Tuple[RoundRecord, ...]
    final: Matching
    converged: bool

    @property
    def rounds_used(self):
        return len(self.rounds)


class TimeConstraintEffect(enum.Enum):
    DIRECT = 'direct'
    INDIRECT = 'indirect'
    NONE = 'none'


def _round_limit(instance):
    # every non-final round rejects someone, and a straightforward student
    # is rejected at most once per acceptable college
    return len(instance.students) * (len(instance.colleges) + 1) + 1


def run_tcdm(instance: ProblemInstance, rounds: Optional[int], policy: Policy = straightforward_choice) -> TcdmTrajectory:
    """
    Run TCDM for `rounds` rounds, or until nothing changes when `rounds` is None.
    """
    if rounds is not None and rounds < 1:
        raise InvalidInputError(f"Round budget must be at least 1, got {rounds}")
    limit = rounds if rounds is not None else _round_limit(instance)

    cutoffs = CutoffVector.zeros(instance.colleges)
    held = {student: None for student in instance.students}
    records = []
    converged = False
    applications = {student: policy(student, instance, cutoffs, None) for student in instance.students}

    for index in range(1, limit + 1):
        pools = {college: [] for college in instance.colleges}
        for student, college in applications.items():
            if college is not None:
                pools[college].append(student)
        kept, rejected = hold_applications(pools, instance.capacities, instance.priority_index)

        held = {student: None for student in instance.students}
        for college, students in kept.items():
            for student in students:
                held[student] = college
        tentative = Matching(held)
        cutoffs = compute_cutoffs(instance, tentative)
        records.append(RoundRecord(
            index=index,
            applications=dict(applications),
            tentative=tentative,
            cutoffs=cutoffs,
            rejected=tuple(sorted(rejected, key=instance.priority_index)),
        ))
        logger.debug(f"TCDM round {index}: {len(rejected)} rejected")

        upcoming = {student: policy(student, instance, cutoffs, held[student]) for student in instance.students}
        if not rejected and upcoming == applications:
            converged = True
            break
        applications = upcoming
    else:
        if rounds is None:
            logger.warning(f"TCDM stopped at the safety limit of {limit} rounds without converging")

    return TcdmTrajectory(
        round_budget=rounds,
        rounds=tuple(records),
        final=records[-1].tentative,
        converged=converged,
    )


def minimal_convergence_t(instance: ProblemInstance) -> int:
    """
    Smallest round budget T for which TCDM's final matching equals DA's.
    """
    trajectory = run_tcdm(instance, None)
    da = run_da(instance)
    for record in trajectory.rounds:
        if record.tentative == da:
            return record.index
    raise AdmissionsError("TCDM never reached the DA matching under straightforward play")


def time_constraint_effects(
    instance: ProblemInstance, trajectory: TcdmTrajectory, da: Matching
) -> Dict[str, TimeConstraintEffect]:
    """
    DIRECT: rejected in the last round and left unassigned although DA places
    the student. INDIRECT: TCDM's seat is strictly preferred to DA's.
    """
    last_rejected = set(trajectory.rounds[-1].rejected)
    effects = {}
    for student in instance.students:
        final = trajectory.final.college_of(student)
        if instance.prefers(student, final, da.college_of(student)):
            effects[student] = TimeConstraintEffect.INDIRECT
        elif student in last_rejected and final is None and da.college_of(student) is not None:
            effects[student] = TimeConstraintEffect.DIRECT
        else:
            effects[student] = TimeConstraintEffect.NONE
    return effects
