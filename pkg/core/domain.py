"""
Admissions domain types.

A ProblemInstance holds students ordered by a common priority (descending
score), colleges with capacities and each student's strict preference list.
A list may end with the OUTSIDE_OPTION sentinel; colleges listed after it
are worse than staying unassigned, colleges missing from a list are never
applied to.
"""
import math
from collections import Counter
from dataclasses import dataclass
from numbers import Real
from types import MappingProxyType
from typing import Dict, Mapping, Optional, Sequence, Tuple

from .exceptions import InvalidInputError

OUTSIDE_OPTION = "∅"

StudentId = str
CollegeId = str


def _frozen(mapping):
    return MappingProxyType(dict(mapping))


def _is_score(value):
    return isinstance(value, Real) and not isinstance(value, bool) and math.isfinite(value)


@dataclass(frozen=True)
class ProblemInstance:
    """
    Students, colleges, capacities and strict preferences under a common priority.
    """
    students: Tuple[StudentId, ...]
    scores: Mapping[StudentId, Real]
    colleges: Tuple[CollegeId, ...]
    capacities: Mapping[CollegeId, int]
    preferences: Mapping[StudentId, Tuple[str, ...]]

    def __post_init__(self):
        object.__setattr__(self, 'students', tuple(self.students))
        object.__setattr__(self, 'colleges', tuple(self.colleges))
        object.__setattr__(self, 'scores', _frozen(self.scores))
        object.__setattr__(self, 'capacities', _frozen(self.capacities))
        object.__setattr__(
            self, 'preferences',
            _frozen({s: tuple(p) for s, p in self.preferences.items()}),
        )
        self._validate()

        positions = {}
        acceptable = {}
        for student in self.students:
            prefs = self.preferences[student]
            if OUTSIDE_OPTION in prefs:
                cut = prefs.index(OUTSIDE_OPTION)
                listed, beyond = prefs[:cut], prefs[cut + 1:]
            else:
                listed, beyond = prefs, ()
            ranking = {college: index for index, college in enumerate(listed)}
            ranking[None] = len(listed)
            for index, college in enumerate(beyond):
                ranking[college] = len(listed) + 1 + index
            positions[student] = ranking
            acceptable[student] = listed

        object.__setattr__(self, '_priority', {s: i for i, s in enumerate(self.students)})
        object.__setattr__(self, '_positions', positions)
        object.__setattr__(self, '_acceptable', acceptable)
        object.__setattr__(self, '_unranked', len(self.colleges) + 2)

    def _validate(self):
        if len(set(self.students)) != len(self.students):
            raise InvalidInputError("Student identifiers must be unique")
        if len(set(self.colleges)) != len(self.colleges):
            raise InvalidInputError("College identifiers must be unique")
        if OUTSIDE_OPTION in self.colleges:
            raise InvalidInputError(f"'{OUTSIDE_OPTION}' is reserved for the outside option")

        if set(self.scores) != set(self.students):
            raise InvalidInputError("Every student needs exactly one score")
        for student, score in self.scores.items():
            if not _is_score(score) or score <= 0:
                raise InvalidInputError(f"Score of {student} must be a positive number, got {score!r}")
        if len(set(self.scores.values())) != len(self.scores):
            raise InvalidInputError("Scores must be pairwise distinct")
        for higher, lower in zip(self.students, self.students[1:]):
            if self.scores[higher] < self.scores[lower]:
                raise InvalidInputError("Students must be listed in descending score order")

        if set(self.capacities) != set(self.colleges):
            raise InvalidInputError("Every college needs exactly one capacity")
        for college, capacity in self.capacities.items():
            if isinstance(capacity, bool) or not isinstance(capacity, int) or capacity < 1:
                raise InvalidInputError(f"Capacity of {college} must be a positive integer")

        known = set(self.colleges)
        for student in self.students:
            if student not in self.preferences:
                raise InvalidInputError(f"Missing preference list for {student}")
            prefs = self.preferences[student]
            if len(set(prefs)) != len(prefs):
                raise InvalidInputError(f"Preference list of {student} has duplicates")
            unknown = [c for c in prefs if c != OUTSIDE_OPTION and c not in known]
            if unknown:
                raise InvalidInputError(f"Preference list of {student} names unknown colleges {unknown}")
        extra = set(self.preferences) - set(self.students)
        if extra:
            raise InvalidInputError(f"Preferences given for unknown students {sorted(extra)}")

    @classmethod
    def build(cls, scores, capacities, preferences):
        """Create an instance, ordering students by descending score."""
        students = sorted(scores, key=lambda s: scores[s], reverse=True)
        return cls(
            students=students,
            scores=scores,
            colleges=list(capacities),
            capacities=capacities,
            preferences=preferences,
        )

    def priority_index(self, student):
        """0 for the top-priority student."""
        try:
            return self._priority[student]
        except KeyError:
            raise InvalidInputError(f"Unknown student {student!r}") from None

    def score_of(self, student):
        return self.scores[student]

    def acceptable(self, student):
        """Colleges the student lists before the outside option, best first."""
        return self._acceptable[student]

    def option_position(self, student, option):
        """Position of a college (or None for unassigned) in the student's order, lower is better."""
        return self._positions[student].get(option, self._unranked)

    def prefers(self, student, first, second):
        """True when the student strictly prefers `first` to `second`."""
        return self.option_position(student, first) < self.option_position(student, second)

    def rank_of(self, student, option):
        """1-based rank of an acceptable college, None when unassigned or unacceptable."""
        if option is None:
            return None
        position = self._positions[student].get(option)
        if position is None or position >= len(self._acceptable[student]):
            return None
        return position + 1

    def with_preferences(self, student, preferences):
        """Copy of the instance with one student's preference list replaced."""
        updated = dict(self.preferences)
        updated[student] = tuple(preferences)
        return ProblemInstance(
            students=self.students,
            scores=self.scores,
            colleges=self.colleges,
            capacities=self.capacities,
            preferences=updated,
        )

    @property
    def total_capacity(self):
        return sum(self.capacities.values())

    def to_dict(self):
        return {
            'students': [{'id': s, 'score': self.scores[s]} for s in self.students],
            'colleges': [{'id': c, 'capacity': self.capacities[c]} for c in self.colleges],
            'preferences': {s: list(self.preferences[s]) for s in self.students},
        }


@dataclass(frozen=True)
class Matching:
    """
    Assignment of every student to a college or to None (unassigned).
    """
    assignment: Mapping[StudentId, Optional[CollegeId]]

    def __post_init__(self):
        object.__setattr__(self, 'assignment', _frozen(self.assignment))

    @classmethod
    def empty(cls, instance):
        return cls({student: None for student in instance.students})

    def college_of(self, student):
        return self.assignment[student]

    def assigned_to(self, college):
        return tuple(s for s, c in self.assignment.items() if c == college)

    def occupancy(self):
        return Counter(c for c in self.assignment.values() if c is not None)

    def unassigned(self):
        return tuple(s for s, c in self.assignment.items() if c is None)

    def check_feasible(self, instance):
        """Raise InvalidInputError unless the matching fits the instance."""
        if set(self.assignment) != set(instance.students):
            missing = set(instance.students) - set(self.assignment)
            unknown = set(self.assignment) - set(instance.students)
            raise InvalidInputError(
                f"Matching does not cover the instance (missing {sorted(missing)}, unknown {sorted(unknown)})"
            )
        for college, count in self.occupancy().items():
            if college not in instance.capacities:
                raise InvalidInputError(f"Matching uses unknown college {college!r}")
            if count > instance.capacities[college]:
                raise InvalidInputError(
                    f"College {college} holds {count} students, capacity is {instance.capacities[college]}"
                )

    def to_dict(self):
        return dict(self.assignment)


@dataclass(frozen=True)
class CutoffVector:
    """
    Per-college cutoffs: 0 while a college has spare capacity, otherwise the
    lowest score it holds.
    """
    cutoffs: Mapping[CollegeId, Real]

    def __post_init__(self):
        object.__setattr__(self, 'cutoffs', _frozen(self.cutoffs))

    @classmethod
    def zeros(cls, colleges: Sequence[CollegeId]):
        return cls({college: 0 for college in colleges})

    def of(self, college):
        return self.cutoffs[college]

    def admits(self, score, college):
        """A score meets the cutoff when it is at least the cutoff."""
        return score >= self.cutoffs[college]

    def to_dict(self) -> Dict[CollegeId, Real]:
        return dict(self.cutoffs)
