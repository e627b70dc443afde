from typing import Optional

from core.domain import CutoffVector, ProblemInstance


def straightforward_choice(
    student: str,
    instance: ProblemInstance,
    cutoffs: CutoffVector,
    currently_held_at: Optional[str],
) -> Optional[str]:
    """
    Straightforward strategy: keep a college that holds you, otherwise apply
    to the most preferred acceptable college whose cutoff your score meets.

    Returns None when the budget set is empty. With all-zero cutoffs this is
    the top of the preference list.
    """
    if currently_held_at is not None:
        return currently_held_at
    score = instance.score_of(student)
    for college in instance.acceptable(student):
        if cutoffs.admits(score, college):
            return college
    return None
