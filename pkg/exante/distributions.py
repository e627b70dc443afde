"""
Rank distributions, capacity prefixes and the correlated-utility config.
"""
import math
from dataclasses import dataclass
from fractions import Fraction
from itertools import accumulate
from typing import Optional, Sequence, Tuple

from core.exceptions import InvalidInputError

FLOAT_TOLERANCE = 1e-12


def outcome_labels(num_colleges):
    """Column labels: one per preference rank, then unassigned."""
    ordinals = {1: '1st', 2: '2nd', 3: '3rd'}
    return [ordinals.get(rank, f"{rank}th") for rank in range(1, num_colleges + 1)] + ['unassigned']


@dataclass(frozen=True)
class RankDistribution:
    """
    Probability of each outcome for one priority position: entries 0..m-1 are
    ranks 1..m, the last entry is being unassigned. Exact distributions hold
    Fractions, Monte Carlo estimates hold floats.
    """
    position: int
    probs: Tuple

    def __post_init__(self):
        object.__setattr__(self, 'probs', tuple(self.probs))
        if self.position < 1:
            raise InvalidInputError(f"Priority positions start at 1, got {self.position}")
        if len(self.probs) < 2:
            raise InvalidInputError("A rank distribution needs at least one rank and the unassigned entry")
        if any(p < 0 or p > 1 for p in self.probs):
            raise InvalidInputError(f"Probabilities must lie in [0, 1]: {self.probs}")
        total = sum(self.probs)
        if self.is_exact:
            if total != 1:
                raise InvalidInputError(f"Exact distribution sums to {total}, not 1")
        elif abs(total - 1) > FLOAT_TOLERANCE:
            raise InvalidInputError(f"Distribution sums to {total}, not 1")

    @classmethod
    def from_counts(cls, position, counts, exact=True):
        total = sum(counts)
        if exact:
            return cls(position, [Fraction(int(c), int(total)) for c in counts])
        probs = [c / total for c in counts]
        # rounding can leave the float sum a hair off 1
        probs[-1] = max(0.0, 1.0 - math.fsum(probs[:-1]))
        return cls(position, probs)

    @property
    def is_exact(self):
        return all(isinstance(p, (int, Fraction)) for p in self.probs)

    @property
    def num_colleges(self):
        return len(self.probs) - 1

    def rank(self, rank):
        """Probability of the `rank`-th choice, 1-based."""
        return self.probs[rank - 1]

    @property
    def first(self):
        return self.probs[0]

    @property
    def unassigned(self):
        return self.probs[-1]

    def cdf(self):
        """Cumulative probability over ranks 1..m then unassigned; the last entry is 1."""
        return tuple(accumulate(self.probs))

    def as_floats(self):
        return tuple(float(p) for p in self.probs)

    def rounded(self, digits=2):
        return tuple(round(float(p), digits) for p in self.probs)

    def to_dict(self):
        labels = outcome_labels(self.num_colleges)
        return {
            'position': self.position,
            'probs': {label: float(p) for label, p in zip(labels, self.probs)},
            'exact': {label: str(p) for label, p in zip(labels, self.probs)} if self.is_exact else None,
        }


@dataclass(frozen=True)
class CapacityPrefix:
    sorted_capacities: Tuple[int, ...]
    prefix_sums: Tuple[int, ...]

    @classmethod
    def from_capacities(cls, capacities: Sequence[int]):
        if not capacities:
            raise InvalidInputError("At least one college is required")
        if any(isinstance(c, bool) or int(c) != c or c < 1 for c in capacities):
            raise InvalidInputError(f"Capacities must be positive integers: {list(capacities)}")
        ordered = tuple(sorted(int(c) for c in capacities))
        return cls(ordered, tuple(accumulate(ordered)))

    def sigma(self, k):
        """Seats in the k smallest colleges; k is clamped to the number of colleges."""
        k = min(k, len(self.sorted_capacities))
        return self.prefix_sums[k - 1] if k >= 1 else 0

    @property
    def total(self):
        return self.prefix_sums[-1]


def is_unconstrained(position: int, rounds: Optional[int], capacities: Sequence[int]) -> bool:
    """
    A position is unconstrained when it falls within the seats of the
    `rounds` smallest colleges. None stands for unlimited rounds.
    """
    if position < 1:
        raise InvalidInputError(f"Priority positions start at 1, got {position}")
    if rounds is None:
        return True
    if rounds < 1:
        raise InvalidInputError(f"Round budget must be at least 1, got {rounds}")
    return position <= CapacityPrefix.from_capacities(capacities).sigma(rounds)


@dataclass(frozen=True)
class CorrelatedUtilityConfig:
    """
    Utility of a college is delta times a common value plus (1 - delta)
    times an idiosyncratic draw, both uniform on [0, 1].
    """
    delta: float
    num_sims: int
    seed: int

    def __post_init__(self):
        if not 0 <= self.delta <= 1:
            raise InvalidInputError(f"delta must lie in [0, 1], got {self.delta}")
        if self.num_sims < 1:
            raise InvalidInputError(f"num_sims must be positive, got {self.num_sims}")
        if not 0 <= self.seed < 2 ** 64:
            raise InvalidInputError(f"seed must be a 64-bit unsigned integer, got {self.seed}")
