"""
Student-proposing deferred acceptance, its list-capped variant and the
serial dictatorship oracle.
"""
import logging
from typing import Callable, Dict, Iterable, List, Mapping, Optional, Tuple

from core.domain import Matching, ProblemInstance

logger = logging.getLogger(__name__)


def hold_applications(
    applicants: Mapping[str, Iterable[str]],
    capacities: Mapping[str, int],
    priority: Callable[[str], object],
) -> Tuple[Dict[str, List[str]], List[str]]:
    """
    College side of one round: each college keeps its best applicants up to
    capacity and rejects the rest. `priority` maps a student to a sort key,
    smaller keys are preferred.
    """
    held = {}
    rejected = []
    for college, pool in applicants.items():
        ranked = sorted(pool, key=priority)
        held[college] = ranked[:capacities[college]]
        rejected.extend(ranked[capacities[college]:])
    return held, rejected


def run_da(instance: ProblemInstance, max_choices: Optional[int] = None) -> Matching:
    """
    Construct the student-optimal stable matching.

    Students propose along their acceptable lists; colleges hold the
    highest-priority proposers up to capacity. With `max_choices` each list is
    cut to its first `max_choices` entries (constrained DA).
    """
    lists = {}
    for student in instance.students:
        acceptable = instance.acceptable(student)
        lists[student] = acceptable[:max_choices] if max_choices is not None else acceptable

    next_choice = {student: 0 for student in instance.students}
    held = {college: [] for college in instance.colleges}
    to_apply = [s for s in instance.students if lists[s]]
    rounds = 0

    while to_apply:
        rounds += 1
        proposals = {college: list(students) for college, students in held.items()}
        for student in to_apply:
            proposals[lists[student][next_choice[student]]].append(student)
            next_choice[student] += 1

        held, rejected = hold_applications(proposals, instance.capacities, instance.priority_index)
        to_apply = [s for s in rejected if next_choice[s] < len(lists[s])]

    logger.debug(f"DA finished after {rounds} proposal rounds")
    assignment = {student: None for student in instance.students}
    for college, students in held.items():
        for student in students:
            assignment[student] = college
    return Matching(assignment)


def run_constrained_da(instance: ProblemInstance, max_choices: int) -> Matching:
    """Truthful DA where every student may rank at most `max_choices` colleges."""
    if max_choices < 1:
        raise ValueError("max_choices must be at least 1")
    return run_da(instance, max_choices=max_choices)


def serial_dictatorship(instance: ProblemInstance) -> Matching:
    """Students pick in priority order; used as an independent DA oracle."""
    remaining = dict(instance.capacities)
    assignment = {}
    for student in instance.students:
        choice = next((c for c in instance.acceptable(student) if remaining[c] > 0), None)
        if choice is not None:
            remaining[choice] -= 1
        assignment[student] = choice
    return Matching(assignment)
