"""
Synthetic applicant cohorts and university tables.
"""
import logging
from dataclasses import dataclass, field
from typing import Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from core.domain import ProblemInstance
from core.exceptions import InvalidInputError

from .schedule import BatchSchedule

logger = logging.getLogger(__name__)

MAX_PROGRAM_CHOICES = 6
PROGRAM_COLUMNS = [f"program_{k}" for k in range(1, MAX_PROGRAM_CHOICES + 1)]


@dataclass(frozen=True)
class PopulationConfig:
    num_students: int = 5000
    num_universities: int = 60
    score_mean: float = 560.0
    score_sd: float = 70.0
    score_max: int = 750
    bonus_prob: float = 0.1
    bonus_values: Tuple[int, ...] = (5, 10, 20)
    delta: float = 0.5
    quota_log_mean: float = 4.0
    quota_log_sigma: float = 0.5
    quota_ratio: float = 1.2
    quota_cap: int = 1000
    programs_per_university: int = 8
    accept_any_prob: float = 0.5
    female_prob: float = 0.5
    ethnicity_probs: Tuple[float, ...] = (0.8, 0.15, 0.05)

    def __post_init__(self):
        object.__setattr__(self, 'bonus_values', tuple(self.bonus_values))
        object.__setattr__(self, 'ethnicity_probs', tuple(self.ethnicity_probs))
        if self.num_students < 1:
            raise InvalidInputError("A population needs at least one student")
        if self.num_universities < 1:
            raise InvalidInputError("A population needs at least one university")
        if not 0 <= self.delta <= 1:
            raise InvalidInputError(f"delta must lie in [0, 1], got {self.delta}")
        if self.score_sd < 0:
            raise InvalidInputError("The score standard deviation cannot be negative")
        if self.quota_ratio < 1:
            raise InvalidInputError("The final quota ratio cannot shrink the planned quota")
        if self.quota_cap < 1 or self.programs_per_university < 1:
            raise InvalidInputError("Quota cap and program count must be positive")
        if self.bonus_prob and not self.bonus_values:
            raise InvalidInputError("Bonus values are required when bonus_prob is positive")
        if not self.ethnicity_probs or abs(sum(self.ethnicity_probs) - 1) > 1e-9:
            raise InvalidInputError("Ethnicity probabilities must sum to 1")
        for name in ('bonus_prob', 'accept_any_prob', 'female_prob'):
            if not 0 <= getattr(self, name) <= 1:
                raise InvalidInputError(f"{name} must lie in [0, 1]")


@dataclass(frozen=True)
class SyntheticStudent:
    true_id: int
    exam_score: int
    bonus_points: int
    gender: int
    ethnicity: int
    batch: int
    preferences: Tuple[str, ...]

    @property
    def score_with_bonus(self):
        return self.exam_score + self.bonus_points


@dataclass(frozen=True, eq=False)
class Population:
    """
    Column arrays, one entry per student; the row index is the true id.
    `preferences` holds university indices, best first.
    """
    exam_score: np.ndarray
    bonus: np.ndarray
    gender: np.ndarray
    ethnicity: np.ndarray
    batch: np.ndarray
    preferences: np.ndarray
    university_ids: Tuple[str, ...]
    planned_quota: np.ndarray
    final_quota: np.ndarray
    programs_per_university: int = 8
    accept_any_prob: float = 0.5
    score: np.ndarray = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, 'university_ids', tuple(self.university_ids))
        object.__setattr__(self, 'score', self.exam_score + self.bonus)
        count = len(self.exam_score)
        for name in ('bonus', 'gender', 'ethnicity', 'batch'):
            if len(getattr(self, name)) != count:
                raise InvalidInputError(f"Column {name} has the wrong length")
        if self.preferences.shape != (count, len(self.university_ids)):
            raise InvalidInputError("Preferences must rank every university for every student")
        if np.any(self.final_quota < self.planned_quota) or np.any(self.planned_quota < 1):
            raise InvalidInputError("Quotas must be positive and final quotas at least the planned ones")

    @property
    def size(self):
        return len(self.exam_score)

    @property
    def num_universities(self):
        return len(self.university_ids)

    def priority_order(self):
        """Student indices by score with bonus descending, ties by true id."""
        return np.lexsort((np.arange(self.size), -self.score))

    def student(self, index) -> SyntheticStudent:
        return SyntheticStudent(
            true_id=int(index),
            exam_score=int(self.exam_score[index]),
            bonus_points=int(self.bonus[index]),
            gender=int(self.gender[index]),
            ethnicity=int(self.ethnicity[index]),
            batch=int(self.batch[index]),
            preferences=tuple(self.university_ids[u] for u in self.preferences[index]),
        )

    def student_label(self, index):
        return f"s{int(index)}"

    def to_instance(self) -> ProblemInstance:
        """The cohort as an admissions instance; needs distinct scores."""
        order = self.priority_order()
        students = [self.student_label(i) for i in order]
        return ProblemInstance(
            students=students,
            scores={self.student_label(i): int(self.score[i]) for i in order},
            colleges=self.university_ids,
            capacities={u: int(q) for u, q in zip(self.university_ids, self.final_quota)},
            preferences={
                self.student_label(i): tuple(self.university_ids[u] for u in self.preferences[i]) for i in order
            },
        )

    def student_frame(self) -> pd.DataFrame:
        return pd.DataFrame({
            'true_id': np.arange(self.size),
            'exam_score': self.exam_score,
            'bonus': self.bonus,
            'score_with_bonus': self.score,
            'gender': self.gender,
            'ethnicity': self.ethnicity,
            'batch': self.batch,
            'preferences': [' '.join(self.university_ids[u] for u in row) for row in self.preferences],
        })

    def university_frame(self) -> pd.DataFrame:
        return pd.DataFrame({
            'university': self.university_ids,
            'planned_quota': self.planned_quota,
            'final_quota': self.final_quota,
        })


def university_ids(count):
    width = max(3, len(str(count)))
    return tuple(f"U{k:0{width}d}" for k in range(1, count + 1))


def draw_preferences(rng, num_students, num_universities, delta):
    """Rank universities by delta * common value + (1 - delta) * idiosyncratic value."""
    common = rng.random(num_universities)
    idiosyncratic = rng.random((num_students, num_universities))
    return np.argsort(-(delta * common + (1 - delta) * idiosyncratic), axis=1, kind='stable')


def draw_program_choices(rng, count, programs_per_university, accept_any_prob):
    """
    Up to six distinct programs (numbered from 1, zero-padded) plus the
    accept-any-program flag, one row per application.
    """
    limit = min(MAX_PROGRAM_CHOICES, programs_per_university)
    ranked = np.argsort(rng.random((count, programs_per_university)), axis=1)[:, :limit] + 1
    lengths = rng.integers(1, limit + 1, size=count)
    ranked[np.arange(limit)[None, :] >= lengths[:, None]] = 0
    choices = np.zeros((count, MAX_PROGRAM_CHOICES), dtype=np.int64)
    choices[:, :limit] = ranked
    accept_any = rng.random(count) < accept_any_prob
    return choices, accept_any


def generate_population(config: PopulationConfig, schedule: BatchSchedule, seed: int) -> Population:
    """
    Draw a reproducible cohort. Exam scores are clipped normal integers
    inside the schedule's bands; bonus points can lift a student into a
    higher batch.
    """
    rng = np.random.default_rng(seed)
    count = config.num_students

    exam = np.rint(rng.normal(config.score_mean, config.score_sd, size=count)).astype(np.int64)
    exam = np.clip(exam, schedule.lowest_score, max(config.score_max, schedule.lowest_score))
    has_bonus = rng.random(count) < config.bonus_prob
    if config.bonus_values:
        bonus = np.where(has_bonus, rng.choice(np.asarray(config.bonus_values, dtype=np.int64), size=count), 0)
    else:
        bonus = np.zeros(count, dtype=np.int64)
    gender = (rng.random(count) < config.female_prob).astype(np.int64)
    ethnicity = rng.choice(len(config.ethnicity_probs), size=count, p=np.asarray(config.ethnicity_probs))

    preferences = draw_preferences(rng, count, config.num_universities, config.delta)
    planned = np.maximum(1, np.rint(rng.lognormal(config.quota_log_mean, config.quota_log_sigma, config.num_universities)))
    planned = planned.astype(np.int64)
    final = np.minimum(np.ceil(config.quota_ratio * planned).astype(np.int64), config.quota_cap)
    final = np.maximum(final, planned)

    population = Population(
        exam_score=exam,
        bonus=bonus.astype(np.int64),
        gender=gender,
        ethnicity=ethnicity.astype(np.int64),
        batch=schedule.batch_indices(exam + bonus),
        preferences=preferences,
        university_ids=university_ids(config.num_universities),
        planned_quota=planned,
        final_quota=final,
        programs_per_university=config.programs_per_university,
        accept_any_prob=config.accept_any_prob,
    )
    logger.info(
        f"Generated {count} students across {config.num_universities} universities "
        f"({int(final.sum())} final seats)"
    )
    return population


def population_from_rows(scores: Sequence[int], preferences: Sequence[Sequence[int]], quotas: Sequence[int],
                         schedule: BatchSchedule, planned: Optional[Sequence[int]] = None, **features):
    """Small hand-built cohort; `preferences` are university indices."""
    scores = np.asarray(scores, dtype=np.int64)
    count = len(scores)
    quotas = np.asarray(quotas, dtype=np.int64)
    return Population(
        exam_score=scores,
        bonus=np.asarray(features.get('bonus', np.zeros(count)), dtype=np.int64),
        gender=np.asarray(features.get('gender', np.zeros(count)), dtype=np.int64),
        ethnicity=np.asarray(features.get('ethnicity', np.zeros(count)), dtype=np.int64),
        batch=schedule.batch_indices(scores + np.asarray(features.get('bonus', np.zeros(count)), dtype=np.int64)),
        preferences=np.asarray(preferences, dtype=np.int64).reshape(count, len(quotas)),
        university_ids=features.get('university_ids', university_ids(len(quotas))),
        planned_quota=quotas if planned is None else np.asarray(planned, dtype=np.int64),
        final_quota=quotas,
        programs_per_university=features.get('programs_per_university', 8),
        accept_any_prob=features.get('accept_any_prob', 0.5),
    )
