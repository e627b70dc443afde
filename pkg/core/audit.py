"""
Audits over matchings: cutoffs, stability, Pareto comparison and the
per-student comparison between two mechanisms' outcomes.
"""
import enum
import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

from .domain import CutoffVector, Matching, ProblemInstance

logger = logging.getLogger(__name__)


class ParetoOrder(enum.Enum):
    A_DOMINATES = 'a_dominates'
    B_DOMINATES = 'b_dominates'
    EQUAL = 'equal'
    INCOMPARABLE = 'incomparable'


class Outcome(enum.Enum):
    """How a student fares under TCDM relative to DA."""
    BETTER = 'better'
    WORSE = 'worse'
    SAME = 'same'


@dataclass(frozen=True)
class AuditReport:
    blocking_pairs: Tuple[Tuple[str, str], ...] = ()
    blocking_students: Tuple[str, ...] = ()
    justified_envy_count: int = 0
    cutoffs: Optional[CutoffVector] = field(default=None, compare=False)

    @property
    def is_stable(self):
        return not self.blocking_pairs and not self.blocking_students

    def to_dict(self):
        return {
            'is_stable': self.is_stable,
            'blocking_pairs': [list(pair) for pair in self.blocking_pairs],
            'blocking_students': list(self.blocking_students),
            'justified_envy_count': self.justified_envy_count,
        }


def compute_cutoffs(instance: ProblemInstance, matching: Matching) -> CutoffVector:
    """
    Cutoff of each college: the lowest score it holds when full, 0 while a seat is free.
    """
    matching.check_feasible(instance)
    holders = {college: [] for college in instance.colleges}
    for student, college in matching.assignment.items():
        if college is not None:
            holders[college].append(instance.score_of(student))

    cutoffs = {}
    for college in instance.colleges:
        scores = holders[college]
        cutoffs[college] = min(scores) if len(scores) == instance.capacities[college] else 0
    return CutoffVector(cutoffs)


def audit_stability(instance: ProblemInstance, matching: Matching) -> AuditReport:
    """
    Enumerate blocking students and blocking student-college pairs.
    """
    cutoffs = compute_cutoffs(instance, matching)
    occupancy = matching.occupancy()

    # lowest-priority holder per college, by priority index
    weakest = {}
    for student, college in matching.assignment.items():
        if college is not None:
            weakest[college] = max(weakest.get(college, -1), instance.priority_index(student))

    blocking_students = []
    blocking_pairs = []
    envious = 0
    for student in instance.students:
        current = matching.college_of(student)
        if instance.prefers(student, None, current):
            blocking_students.append(student)

        me = instance.priority_index(student)
        score = instance.score_of(student)
        has_envy = False
        for college in instance.colleges:
            if not instance.prefers(student, college, current):
                continue
            if occupancy[college] < instance.capacities[college] or weakest.get(college, -1) > me:
                blocking_pairs.append((student, college))
            if cutoffs.of(college) < score:
                has_envy = True
        if has_envy:
            envious += 1

    report = AuditReport(
        blocking_pairs=tuple(blocking_pairs),
        blocking_students=tuple(blocking_students),
        justified_envy_count=envious,
        cutoffs=cutoffs,
    )
    logger.debug(
        f"Stability audit: {len(blocking_pairs)} blocking pairs, "
        f"{len(blocking_students)} blocking students"
    )
    return report


def pareto_compare(instance: ProblemInstance, a: Matching, b: Matching) -> ParetoOrder:
    a.check_feasible(instance)
    b.check_feasible(instance)
    a_better = b_better = False
    for student in instance.students:
        if instance.prefers(student, a.college_of(student), b.college_of(student)):
            a_better = True
        elif instance.prefers(student, b.college_of(student), a.college_of(student)):
            b_better = True

    if a_better and b_better:
        return ParetoOrder.INCOMPARABLE
    if a_better:
        return ParetoOrder.A_DOMINATES
    if b_better:
        return ParetoOrder.B_DOMINATES
    return ParetoOrder.EQUAL


def winners_and_losers(instance: ProblemInstance, tcdm: Matching, da: Matching) -> Dict[str, Outcome]:
    """Per student: BETTER when TCDM's seat is preferred to DA's, WORSE in the opposite case."""
    outcomes = {}
    for student in instance.students:
        under_tcdm, under_da = tcdm.college_of(student), da.college_of(student)
        if instance.prefers(student, under_tcdm, under_da):
            outcomes[student] = Outcome.BETTER
        elif instance.prefers(student, under_da, under_tcdm):
            outcomes[student] = Outcome.WORSE
        else:
            outcomes[student] = Outcome.SAME
    return outcomes


def redistribution_witnesses(instance: ProblemInstance, tcdm: Matching, da: Matching) -> Dict[str, Optional[str]]:
    """
    For each student who gains under TCDM, the first higher-priority student
    left unassigned by TCDM. None marks a student without such a witness.
    """
    outcomes = winners_and_losers(instance, tcdm, da)
    witnesses = {}
    for student, outcome in outcomes.items():
        if outcome is not Outcome.BETTER:
            continue
        above = instance.students[:instance.priority_index(student)]
        witnesses[student] = next((s for s in above if tcdm.college_of(s) is None), None)
    return witnesses


def redistribution_violations(instance: ProblemInstance, tcdm: Matching, da: Matching) -> List[str]:
    return [s for s, witness in redistribution_witnesses(instance, tcdm, da).items() if witness is None]
