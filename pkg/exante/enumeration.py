"""
Exact ex-ante rank distributions under i.i.d. uniform preferences.

For a target at priority position p the preference order of the target is
fixed and every profile of the other students' strict orders is run
through the mechanism. Students below the target never change what
happens to her (both mechanisms respect the common priority), so by
default only the p - 1 higher-priority students are enumerated;
`full_profiles=True` enumerates all n - 1 others.
"""
import itertools
import logging
import math
from typing import List, Optional, Sequence

from core.conf import admissions_settings
from core.exceptions import EnumerationBudgetExceeded, InvalidInputError
from core.generators import ranked_instance
from mechanisms.registry import Mechanism, run_mechanism

from .distributions import CapacityPrefix, RankDistribution

logger = logging.getLogger(__name__)


def required_profiles(num_students, num_colleges):
    """(m!)^(n-1): profiles of everyone but the target."""
    return math.factorial(num_colleges) ** (num_students - 1)


def _target_counts(position, others, capacities, rounds, mechanism, target_order, orders):
    """Tally the target's outcome over every profile of `others` students."""
    counts = [0] * (len(capacities) + 1)
    target_rank = {college: rank for rank, college in enumerate(target_order)}
    for profile in itertools.product(orders, repeat=others):
        preference_orders = list(profile)
        preference_orders.insert(position - 1, target_order)
        instance = ranked_instance(capacities, preference_orders)
        college = run_mechanism(mechanism, instance, rounds).college_of(instance.students[position - 1])
        if college is None:
            counts[-1] += 1
        else:
            counts[target_rank[instance.colleges.index(college)]] += 1
    return counts


def exact_distribution(
    num_students: int,
    capacities: Sequence[int],
    rounds: Optional[int] = None,
    mechanism=Mechanism.TCDM,
    budget: Optional[int] = None,
    target_order: Optional[Sequence[int]] = None,
    full_profiles: bool = False,
) -> List[RankDistribution]:
    """
    Exact rank distribution of every priority position 1..n.

    `rounds` is the TCDM round budget (None runs TCDM to convergence) or the
    list cap of constrained DA. `target_order` is the fixed order of the
    target as college indices; the identity by default.
    """
    mechanism = Mechanism(mechanism)
    CapacityPrefix.from_capacities(capacities)
    if num_students < 1:
        raise InvalidInputError(f"At least one student is required, got {num_students}")
    num_colleges = len(capacities)
    budget = admissions_settings.ENUMERATION_BUDGET if budget is None else budget
    required = required_profiles(num_students, num_colleges)
    if required > budget:
        raise EnumerationBudgetExceeded(required, budget)

    target_order = tuple(range(num_colleges)) if target_order is None else tuple(target_order)
    if sorted(target_order) != list(range(num_colleges)):
        raise InvalidInputError(f"Target order must be a permutation of 0..{num_colleges - 1}")

    orders = list(itertools.permutations(range(num_colleges)))
    distributions = []
    for position in range(1, num_students + 1):
        others = num_students - 1 if full_profiles else position - 1
        counts = _target_counts(position, others, capacities, rounds, mechanism, target_order, orders)
        distributions.append(RankDistribution.from_counts(position, counts))
    logger.info(
        f"Exact {mechanism.value} distribution for n={num_students}, capacities={list(capacities)}, "
        f"rounds={rounds}: up to {required} profiles per position"
    )
    return distributions
