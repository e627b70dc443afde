"""
Unilateral deviation checks against straightforward play.

A deviation is a static target list: the deviator plays the straightforward
policy as if her preference order were a different one, while everyone
else plays straightforwardly with their true orders. Payoffs are always
judged with the deviator's true order.
"""
import itertools
import logging
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np

from core.domain import ProblemInstance
from core.exceptions import InvalidInputError

from .strategy import straightforward_choice
from .tcdm import run_tcdm

logger = logging.getLogger(__name__)

EXHAUSTIVE_MAX_COLLEGES = 5


@dataclass(frozen=True)
class DeviationReport:
    deviator: str
    round_budget: Optional[int]
    truthful_outcome: Optional[str]
    best_outcome: Optional[str]
    best_order: Tuple[str, ...]
    orders_tried: int
    exhaustive: bool

    @property
    def profitable(self):
        return self.best_outcome != self.truthful_outcome

    def to_dict(self):
        return {
            'deviator': self.deviator,
            'round_budget': self.round_budget,
            'truthful_outcome': self.truthful_outcome,
            'best_outcome': self.best_outcome,
            'best_order': list(self.best_order),
            'orders_tried': self.orders_tried,
            'exhaustive': self.exhaustive,
            'profitable': self.profitable,
        }


def deviating_policy(deviator, reported: ProblemInstance):
    """Straightforward policy where `deviator` reads her preferences from `reported`."""
    def policy(student, instance, cutoffs, held):
        if student == deviator:
            return straightforward_choice(student, reported, cutoffs, held)
        return straightforward_choice(student, instance, cutoffs, held)
    return policy


def _candidate_orders(instance, orders, sample, seed):
    if orders is not None:
        return [tuple(order) for order in orders], False
    if len(instance.colleges) <= EXHAUSTIVE_MAX_COLLEGES and sample is None:
        return list(itertools.permutations(instance.colleges)), True
    if sample is None:
        raise InvalidInputError(
            f"{len(instance.colleges)} colleges is too many for exhaustive deviations; pass `sample`"
        )
    rng = np.random.default_rng(seed)
    return [tuple(instance.colleges[k] for k in rng.permutation(len(instance.colleges))) for _ in range(sample)], False


def unilateral_deviation_check(
    instance: ProblemInstance,
    deviator: str,
    rounds: Optional[int] = None,
    orders: Optional[Sequence[Sequence[str]]] = None,
    sample: Optional[int] = None,
    seed: Optional[int] = None,
) -> DeviationReport:
    """
    Compare the deviator's straightforward outcome with the best outcome
    any static target list reaches. With no `orders` and at most five
    colleges every order is tried, otherwise `sample` random orders.
    """
    instance.priority_index(deviator)
    truthful = run_tcdm(instance, rounds).final.college_of(deviator)

    candidates, exhaustive = _candidate_orders(instance, orders, sample, seed)
    best, best_order = truthful, tuple(instance.acceptable(deviator))
    for order in candidates:
        reported = instance.with_preferences(deviator, order)
        outcome = run_tcdm(instance, rounds, policy=deviating_policy(deviator, reported)).final.college_of(deviator)
        if instance.prefers(deviator, outcome, best):
            best, best_order = outcome, tuple(order)

    report = DeviationReport(
        deviator=deviator,
        round_budget=rounds,
        truthful_outcome=truthful,
        best_outcome=best,
        best_order=best_order,
        orders_tried=len(candidates),
        exhaustive=exhaustive,
    )
    if report.profitable:
        logger.info(f"{deviator} profits from reporting {list(best_order)}: {truthful} -> {best}")
    return report
