"""
Ex-ante comparisons between TCDM and DA built on exact enumeration.
"""
import logging
from dataclasses import dataclass, field
from functools import lru_cache
from fractions import Fraction
from typing import Dict, Optional, Sequence, Tuple

from core.exceptions import InvalidInputError, PropositionViolation
from mechanisms.registry import Mechanism

from .distributions import RankDistribution, is_unconstrained
from .enumeration import exact_distribution

logger = logging.getLogger(__name__)


@lru_cache(maxsize=None)
def cached_distribution(num_students, capacities, rounds, mechanism, budget=None):
    """Memoized exact_distribution; `capacities` must be a tuple."""
    return tuple(exact_distribution(num_students, list(capacities), rounds, mechanism, budget=budget))


@dataclass(frozen=True)
class PositionComparison:
    """
    Margins are oriented so that non-negative means the clause holds.
    """
    position: int
    constrained: bool
    tcdm: RankDistribution
    da: RankDistribution
    first_choice_margin: Fraction
    lower_rank_margins: Tuple[Fraction, ...]
    unassigned_margin: Fraction

    @property
    def identical(self):
        return self.tcdm.probs == self.da.probs

    def to_dict(self):
        return {
            'position': self.position,
            'constrained': self.constrained,
            'identical': self.identical,
            'tcdm': [str(p) for p in self.tcdm.probs],
            'da': [str(p) for p in self.da.probs],
            'first_choice_margin': str(self.first_choice_margin),
            'lower_rank_margins': [str(m) for m in self.lower_rank_margins],
            'unassigned_margin': str(self.unassigned_margin),
        }


@dataclass(frozen=True)
class Prop4Report:
    num_students: int
    capacities: Tuple[int, ...]
    rounds: int
    positions: Tuple[PositionComparison, ...]
    violations: Tuple[PropositionViolation, ...] = field(default=(), compare=False)

    @property
    def holds(self):
        return not self.violations

    def to_dict(self):
        return {
            'n': self.num_students,
            'capacities': list(self.capacities),
            'rounds': self.rounds,
            'holds': self.holds,
            'positions': [p.to_dict() for p in self.positions],
            'violations': [str(v) for v in self.violations],
        }


def _compare_position(tcdm, da, constrained):
    violations = []
    position = tcdm.position
    if not constrained:
        for rank, (a, b) in enumerate(zip(tcdm.probs, da.probs), start=1):
            if a != b:
                violations.append(PropositionViolation(position, rank, f"unconstrained but TCDM {a} != DA {b}"))
    else:
        if tcdm.first < da.first:
            violations.append(PropositionViolation(position, 1, f"first choice TCDM {tcdm.first} < DA {da.first}"))
        for rank in range(2, tcdm.num_colleges + 1):
            if tcdm.rank(rank) > da.rank(rank):
                violations.append(
                    PropositionViolation(position, rank, f"TCDM {tcdm.rank(rank)} > DA {da.rank(rank)}")
                )
        if tcdm.unassigned < da.unassigned:
            violations.append(
                PropositionViolation(position, 'unassigned', f"TCDM {tcdm.unassigned} < DA {da.unassigned}")
            )

    comparison = PositionComparison(
        position=position,
        constrained=constrained,
        tcdm=tcdm,
        da=da,
        first_choice_margin=tcdm.first - da.first,
        lower_rank_margins=tuple(da.rank(r) - tcdm.rank(r) for r in range(2, tcdm.num_colleges + 1)),
        unassigned_margin=tcdm.unassigned - da.unassigned,
    )
    return comparison, violations


def check_prop4(num_students: int, capacities: Sequence[int], rounds: int, strict: bool = True, budget=None) -> Prop4Report:
    """
    Compare exact TCDM and DA distributions position by position.

    Unconstrained positions must have identical distributions. Constrained
    ones must have a first-choice probability at least DA's, rank l >= 2
    probabilities at most DA's and an unassigned probability at least DA's.
    With `strict` the first violation is raised, otherwise all are reported.
    """
    tcdm = cached_distribution(num_students, tuple(capacities), rounds, Mechanism.TCDM, budget)
    da = cached_distribution(num_students, tuple(capacities), None, Mechanism.DA, budget)

    positions = []
    violations = []
    for tcdm_dist, da_dist in zip(tcdm, da):
        constrained = not is_unconstrained(tcdm_dist.position, rounds, capacities)
        comparison, found = _compare_position(tcdm_dist, da_dist, constrained)
        positions.append(comparison)
        violations.extend(found)

    for violation in violations:
        logger.warning(f"Ex-ante comparison violated: {violation}")
    if strict and violations:
        raise violations[0]
    return Prop4Report(
        num_students=num_students,
        capacities=tuple(capacities),
        rounds=rounds,
        positions=tuple(positions),
        violations=tuple(violations),
    )


def _direction(series):
    """'constant', 'decreasing', 'increasing' (all weakly) or 'mixed'."""
    steps = [b - a for a, b in zip(series, series[1:])]
    if all(s == 0 for s in steps):
        return 'constant'
    if all(s <= 0 for s in steps):
        return 'decreasing'
    if all(s >= 0 for s in steps):
        return 'increasing'
    return 'mixed'


@dataclass(frozen=True)
class PositionTrend:
    position: int
    constrained_rounds: Tuple[int, ...]
    first_choice: Tuple[Fraction, ...]
    lower_ranks: Dict[int, Tuple[Fraction, ...]]
    unassigned: Tuple[Fraction, ...]

    @property
    def first_choice_direction(self):
        return _direction(self.first_choice)

    @property
    def unassigned_direction(self):
        return _direction(self.unassigned)

    def lower_rank_directions(self):
        return {rank: _direction(series) for rank, series in self.lower_ranks.items()}

    def to_dict(self):
        return {
            'position': self.position,
            'constrained_rounds': list(self.constrained_rounds),
            'first_choice': [str(p) for p in self.first_choice],
            'first_choice_direction': self.first_choice_direction,
            'lower_ranks': {str(r): [str(p) for p in s] for r, s in self.lower_ranks.items()},
            'lower_rank_directions': {str(r): d for r, d in self.lower_rank_directions().items()},
            'unassigned': [str(p) for p in self.unassigned],
            'unassigned_direction': self.unassigned_direction,
        }


@dataclass(frozen=True)
class Prop5Report:
    num_students: int
    capacities: Tuple[int, ...]
    max_rounds: int
    trends: Tuple[PositionTrend, ...]
    converges_to_da: bool
    flags: Tuple[str, ...]

    @property
    def first_choice_weakly_decreasing(self):
        return all(t.first_choice_direction in ('constant', 'decreasing') for t in self.trends)

    @property
    def lower_ranks_weakly_increasing(self):
        return all(
            d in ('constant', 'increasing')
            for t in self.trends for d in t.lower_rank_directions().values()
        )

    @property
    def unassigned_weakly_decreasing(self):
        return all(t.unassigned_direction in ('constant', 'decreasing') for t in self.trends)

    @property
    def literal_first_choice_statement_holds(self):
        """Whether first-choice probability is weakly increasing in the round budget."""
        return all(t.first_choice_direction in ('constant', 'increasing') for t in self.trends)

    @property
    def direction_finding(self):
        if self.first_choice_weakly_decreasing and not self.literal_first_choice_statement_holds:
            return 'first-choice probability weakly decreases as rounds are added'
        if self.literal_first_choice_statement_holds and not self.first_choice_weakly_decreasing:
            return 'first-choice probability weakly increases as rounds are added'
        if self.first_choice_weakly_decreasing:
            return 'first-choice probability does not depend on the round budget'
        return 'first-choice probability is not monotone in the round budget'

    def to_dict(self):
        return {
            'n': self.num_students,
            'capacities': list(self.capacities),
            'max_rounds': self.max_rounds,
            'first_choice_weakly_decreasing': self.first_choice_weakly_decreasing,
            'lower_ranks_weakly_increasing': self.lower_ranks_weakly_increasing,
            'unassigned_weakly_decreasing': self.unassigned_weakly_decreasing,
            'literal_first_choice_statement_holds': self.literal_first_choice_statement_holds,
            'direction_finding': self.direction_finding,
            'converges_to_da': self.converges_to_da,
            'flags': list(self.flags),
            'trends': [t.to_dict() for t in self.trends],
        }


def check_prop5(num_students: int, capacities: Sequence[int], max_rounds: int, budget=None) -> Prop5Report:
    """
    Track each position's distribution over round budgets 1..max_rounds.

    Directions are reported, not asserted: anything other than first-choice
    and unassigned probabilities weakly falling and lower ranks weakly
    rising is listed in `flags`.
    """
    if max_rounds < 1:
        raise InvalidInputError(f"max_rounds must be at least 1, got {max_rounds}")
    by_rounds = [
        cached_distribution(num_students, tuple(capacities), t, Mechanism.TCDM, budget)
        for t in range(1, max_rounds + 1)
    ]
    da = cached_distribution(num_students, tuple(capacities), None, Mechanism.DA, budget)
    num_colleges = len(capacities)

    trends = []
    flags = []
    for index in range(num_students):
        position = index + 1
        series = [dists[index] for dists in by_rounds]
        trend = PositionTrend(
            position=position,
            constrained_rounds=tuple(
                t for t in range(1, max_rounds + 1) if not is_unconstrained(position, t, capacities)
            ),
            first_choice=tuple(d.first for d in series),
            lower_ranks={r: tuple(d.rank(r) for d in series) for r in range(2, num_colleges + 1)},
            unassigned=tuple(d.unassigned for d in series),
        )
        trends.append(trend)
        if trend.first_choice_direction not in ('constant', 'decreasing'):
            flags.append(f"position {position}: first choice {trend.first_choice_direction}")
        if trend.unassigned_direction not in ('constant', 'decreasing'):
            flags.append(f"position {position}: unassigned {trend.unassigned_direction}")
        for rank, direction in trend.lower_rank_directions().items():
            if direction not in ('constant', 'increasing'):
                flags.append(f"position {position}: rank {rank} {direction}")

    converges = all(a.probs == b.probs for a, b in zip(by_rounds[-1], da))
    for flag in flags:
        logger.warning(f"Round-budget trend: {flag}")
    return Prop5Report(
        num_students=num_students,
        capacities=tuple(capacities),
        max_rounds=max_rounds,
        trends=tuple(trends),
        converges_to_da=converges,
        flags=tuple(flags),
    )


def expected_utility(dist: RankDistribution, utilities: Sequence) -> Fraction:
    """Expected utility with `utilities[l-1]` for the l-th choice and 0 unassigned."""
    if len(utilities) != dist.num_colleges:
        raise InvalidInputError(f"Need {dist.num_colleges} utilities, got {len(utilities)}")
    return sum(p * u for p, u in zip(dist.probs, utilities))


def corollary1_threshold(tcdm: RankDistribution, da: RankDistribution, lower_utilities: Sequence) -> Optional[Fraction]:
    """
    Smallest first-choice utility at which TCDM's expected utility reaches
    DA's, given utilities u_2..u_m and 0 for staying unassigned.

    None when both mechanisms give the same first-choice probability.
    """
    if len(lower_utilities) != tcdm.num_colleges - 1:
        raise InvalidInputError(f"Need {tcdm.num_colleges - 1} utilities for ranks 2..m, got {len(lower_utilities)}")
    if any(u < 0 for u in lower_utilities):
        raise InvalidInputError("Utilities must be non-negative")
    gap = tcdm.first - da.first
    if gap == 0:
        return None
    if gap < 0:
        raise InvalidInputError("TCDM's first-choice probability is below DA's; no threshold exists")
    numerator = sum((da.rank(r) - tcdm.rank(r)) * u for r, u in enumerate(lower_utilities, start=2))
    return numerator / gap
