"""
Staggered-closing schedule: score bands, one deadline hour per band.
"""
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np

from core.exceptions import InvalidInputError

DEFAULT_BAND_LOWER_BOUNDS = (670, 640, 610, 580, 550, 520, 490, 460, 430)


@dataclass(frozen=True)
class Batch:
    """Students whose score with bonus lies in [lower, upper]; `upper` None is open-ended."""
    index: int
    lower: int
    upper: Optional[int]
    deadline_hour: int

    def contains(self, score):
        return score >= self.lower and (self.upper is None or score <= self.upper)

    def to_dict(self):
        return {'lower': self.lower, 'upper': self.upper, 'deadline_hour': self.deadline_hour}


@dataclass(frozen=True)
class BatchSchedule:
    batches: Tuple[Batch, ...]
    opening_hour: int
    mandatory_entry_hour: int
    total_hours: int

    def __post_init__(self):
        object.__setattr__(self, 'batches', tuple(self.batches))
        if not self.batches:
            raise InvalidInputError("A schedule needs at least one batch")
        if self.opening_hour < 0:
            raise InvalidInputError("The opening hour cannot be negative")
        for expected, batch in enumerate(self.batches, start=1):
            if batch.index != expected:
                raise InvalidInputError(f"Batch indices must run 1..k, got {batch.index} at {expected}")
            if batch.upper is not None and batch.upper < batch.lower:
                raise InvalidInputError(f"Batch {batch.index} has an empty score band")
        for higher, lower in zip(self.batches, self.batches[1:]):
            if lower.upper is None or lower.upper >= higher.lower:
                raise InvalidInputError(f"Score bands of batches {higher.index} and {lower.index} overlap or are out of order")
            if lower.deadline_hour != higher.deadline_hour + 1:
                raise InvalidInputError("Deadlines must increase by exactly one hour per batch")
        first = self.batches[0].deadline_hour
        if not self.opening_hour <= self.mandatory_entry_hour <= first:
            raise InvalidInputError(
                "The mandatory entry hour must lie between the opening hour and the first deadline"
            )
        if self.total_hours < self.batches[-1].deadline_hour:
            raise InvalidInputError("The schedule ends before the last deadline")

    @classmethod
    def from_bands(cls, lower_bounds: Sequence[int], opening_hour=1, mandatory_entry_hour=2,
                   first_deadline=3, total_hours=None):
        """Batches from descending lower bounds; each band ends just below the previous one."""
        batches = []
        upper = None
        for index, lower in enumerate(lower_bounds, start=1):
            batches.append(Batch(index, int(lower), upper, first_deadline + index - 1))
            upper = int(lower) - 1
        last = first_deadline + len(batches) - 1
        return cls(tuple(batches), opening_hour, mandatory_entry_hour, last if total_hours is None else total_hours)

    @classmethod
    def default(cls):
        """Nine bands from 670+ down to 430-459, deadlines at hours 3..11."""
        return cls.from_bands(DEFAULT_BAND_LOWER_BOUNDS)

    @classmethod
    def single_batch(cls, rounds, opening_hour=1, lower=0):
        """One batch with `rounds` revision hours: deadline = opening + rounds - 1."""
        if rounds < 1:
            raise InvalidInputError(f"A single-batch schedule needs at least one hour, got {rounds}")
        deadline = opening_hour + rounds - 1
        return cls((Batch(1, lower, None, deadline),), opening_hour, opening_hour, deadline)

    @property
    def hours(self):
        return tuple(range(self.opening_hour, self.total_hours + 1))

    @property
    def last_deadline(self):
        return self.batches[-1].deadline_hour

    @property
    def lowest_score(self):
        return self.batches[-1].lower

    def batch_of(self, score):
        """1-based batch index for a score with bonus, or None below every band."""
        for batch in self.batches:
            if batch.contains(score):
                return batch.index
        return None

    def batch_indices(self, scores: np.ndarray) -> np.ndarray:
        """Vectorized batch_of; 0 marks scores below every band."""
        result = np.zeros(len(scores), dtype=np.int64)
        for batch in self.batches:
            inside = scores >= batch.lower
            if batch.upper is not None:
                inside &= scores <= batch.upper
            result[inside] = batch.index
        return result

    def deadline_of(self, batch_index):
        return self.batches[batch_index - 1].deadline_hour

    def deadlines(self, batch_indices: np.ndarray) -> np.ndarray:
        table = np.array([0] + [b.deadline_hour for b in self.batches], dtype=np.int64)
        return table[batch_indices]

    def frozen_at(self, hour):
        """Batches whose deadline has passed by `hour`."""
        return tuple(b.index for b in self.batches if b.deadline_hour < hour)

    def to_dict(self):
        return {
            'opening_hour': self.opening_hour,
            'mandatory_entry_hour': self.mandatory_entry_hour,
            'total_hours': self.total_hours,
            'batches': [b.to_dict() for b in self.batches],
        }

    @classmethod
    def from_dict(cls, data):
        batches = tuple(
            Batch(index, int(b['lower']), None if b.get('upper') is None else int(b['upper']), int(b['deadline_hour']))
            for index, b in enumerate(data['batches'], start=1)
        )
        return cls(batches, int(data['opening_hour']), int(data['mandatory_entry_hour']), int(data['total_hours']))
