"""
Hourly university-level snapshots.

A snapshot set holds, for every hour, one table of applicant rows in file
order: universities in the order of the university table, and inside each
university by score with bonus descending. Ties inside a university keep
the simulator's hidden order (true id ascending). True ids never appear in
the rows; they live in an optional sidecar aligned with the rows.
"""
import logging
import os
from dataclasses import dataclass
from typing import Dict, Mapping, NamedTuple, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
import yaml

from core.conf import admissions_settings
from core.exceptions import InvalidInputError

from .population import PROGRAM_COLUMNS
from .schedule import BatchSchedule

logger = logging.getLogger(__name__)

LINK_KEY_COLUMNS = ['score_with_bonus', 'score_without_bonus', 'gender', 'ethnicity']
FEATURE_COLUMNS = LINK_KEY_COLUMNS + PROGRAM_COLUMNS + ['accept_any']
ROW_COLUMNS = ['university', 'row'] + FEATURE_COLUMNS
METADATA_KEYS = ('hour', 'university', 'planned_quota', 'final_quota', 'cutoff_planned', 'cutoff_final')
SCHEDULE_FILE = 'schedule.yaml'


def hour_directory(hour):
    return f"hour_{hour:02d}"


# marginal tie-break of a university that still has free seats
OPEN_SEAT = np.iinfo(np.int64).max


class HourRanking(NamedTuple):
    held: np.ndarray
    cutoff_final: np.ndarray
    cutoff_planned: np.ndarray
    marginal_final: np.ndarray
    marginal_planned: np.ndarray


def _quota_cutoffs(ranked_scores, ranked_ties, counts, starts, quota):
    cutoffs = np.zeros(len(quota), dtype=np.int64)
    marginal = np.full(len(quota), OPEN_SEAT, dtype=np.int64)
    full = counts >= quota
    cutoffs[full] = ranked_scores[starts[full] + quota[full] - 1]
    marginal[full] = ranked_ties[starts[full] + quota[full] - 1]
    return cutoffs, marginal


def rank_applicants(university, score, tie_break, planned_quota, final_quota) -> HourRanking:
    """
    College side of one hour over integer university codes (-1 = no
    application). Each university holds its best applicants up to the final
    quota, ranked by score descending then `tie_break` ascending.

    A cutoff is the score of the quota-th applicant when there are that many,
    else 0. The marginal is that applicant's tie-break, OPEN_SEAT otherwise.
    """
    planned_quota = np.asarray(planned_quota, dtype=np.int64)
    final_quota = np.asarray(final_quota, dtype=np.int64)
    applied = np.flatnonzero(university >= 0)
    order = applied[np.lexsort((tie_break[applied], -score[applied], university[applied]))]
    ranked_university = university[order]
    counts = np.bincount(ranked_university, minlength=len(final_quota))
    starts = np.concatenate(([0], np.cumsum(counts)[:-1])).astype(np.int64)
    rank = np.arange(len(order)) - starts[ranked_university]

    held = np.zeros(len(university), dtype=bool)
    held[order[rank < final_quota[ranked_university]]] = True
    ranked_scores, ranked_ties = score[order], tie_break[order]
    cutoff_final, marginal_final = _quota_cutoffs(ranked_scores, ranked_ties, counts, starts, final_quota)
    cutoff_planned, marginal_planned = _quota_cutoffs(ranked_scores, ranked_ties, counts, starts, planned_quota)
    return HourRanking(held, cutoff_final, cutoff_planned, marginal_final, marginal_planned)


def clears_cutoff(score, tie_break, cutoff, marginal):
    """Whether an applicant would be held: above the cutoff, or tied with it and ahead of the marginal holder."""
    return (score > cutoff) | ((score == cutoff) & (tie_break <= marginal))


def _row_numbers(sorted_codes):
    """Position of each entry inside its run of equal codes."""
    if len(sorted_codes) == 0:
        return np.zeros(0, dtype=np.int64)
    boundaries = np.flatnonzero(np.diff(sorted_codes)) + 1
    starts = np.zeros(len(sorted_codes), dtype=np.int64)
    starts[boundaries] = boundaries
    return np.arange(len(sorted_codes)) - np.maximum.accumulate(starts)


@dataclass(frozen=True, eq=False)
class SnapshotSet:
    schedule: BatchSchedule
    universities: Tuple[str, ...]
    quotas: pd.DataFrame
    cutoffs: Mapping[int, pd.DataFrame]
    rows: Mapping[int, pd.DataFrame]
    truth: Optional[Mapping[int, np.ndarray]] = None

    def __post_init__(self):
        object.__setattr__(self, 'universities', tuple(self.universities))
        if self.truth is not None:
            for hour, frame in self.rows.items():
                if hour not in self.truth or len(self.truth[hour]) != len(frame):
                    raise InvalidInputError(f"Ground truth does not cover the rows of hour {hour}")

    @property
    def hours(self):
        return tuple(sorted(self.rows))

    @property
    def has_truth(self):
        return self.truth is not None

    def frame(self, hour) -> pd.DataFrame:
        return self.rows[hour]

    def university_rows(self, hour, university) -> pd.DataFrame:
        frame = self.rows[hour]
        return frame[frame['university'] == university]

    def truth_at(self, hour) -> np.ndarray:
        if self.truth is None:
            raise InvalidInputError("This snapshot set carries no ground truth")
        return self.truth[hour]

    def university_codes(self, hour) -> np.ndarray:
        """File-order index of each row's university."""
        index = {university: code for code, university in enumerate(self.universities)}
        return self.rows[hour]['university'].map(index).to_numpy(dtype=np.int64)

    def without_truth(self) -> 'SnapshotSet':
        return SnapshotSet(self.schedule, self.universities, self.quotas, self.cutoffs, self.rows, None)

    def up_to(self, hour) -> 'SnapshotSet':
        """The hours up to and including `hour`."""
        keep = [h for h in self.hours if h <= hour]
        if not keep:
            raise InvalidInputError(f"No snapshots at or before hour {hour}")
        return SnapshotSet(
            self.schedule, self.universities, self.quotas,
            {h: self.cutoffs[h] for h in keep},
            {h: self.rows[h] for h in keep},
            None if self.truth is None else {h: self.truth[h] for h in keep},
        )

    def truth_frame(self) -> pd.DataFrame:
        parts = []
        for hour in self.hours:
            frame = self.rows[hour][['university', 'row']].copy()
            frame.insert(0, 'hour', hour)
            frame['true_id'] = self.truth_at(hour)
            parts.append(frame)
        return pd.concat(parts, ignore_index=True)

    @classmethod
    def from_history(cls, population, schedule: BatchSchedule, history: Sequence) -> 'SnapshotSet':
        """Build the published tables from the clearinghouse's per-hour states."""
        university_ids = np.asarray(population.university_ids)
        quotas = pd.DataFrame(
            {'planned_quota': population.planned_quota, 'final_quota': population.final_quota},
            index=pd.Index(population.university_ids, name='university'),
        )
        rows, cutoffs, truth = {}, {}, {}
        for state in history:
            applied = np.flatnonzero(state.university >= 0)
            order = applied[np.lexsort((applied, -population.score[applied], state.university[applied]))]
            codes = state.university[order]
            frame = pd.DataFrame({
                'university': university_ids[codes],
                'row': _row_numbers(codes),
                'score_with_bonus': population.score[order],
                'score_without_bonus': population.exam_score[order],
                'gender': population.gender[order],
                'ethnicity': population.ethnicity[order],
            })
            for k, column in enumerate(PROGRAM_COLUMNS):
                frame[column] = state.programs[order, k]
            frame['accept_any'] = state.accept_any[order].astype(np.int64)
            rows[state.hour] = frame
            truth[state.hour] = order.astype(np.int64)
            cutoffs[state.hour] = pd.DataFrame(
                {'cutoff_planned': state.cutoff_planned, 'cutoff_final': state.cutoff_final},
                index=quotas.index,
            )
        return cls(schedule, population.university_ids, quotas, cutoffs, rows, truth)

    @classmethod
    def from_records(cls, schedule: BatchSchedule, universities: Sequence[str], final_quota: Sequence[int],
                     records: pd.DataFrame, planned_quota: Optional[Sequence[int]] = None) -> 'SnapshotSet':
        """
        Hand-built snapshot set. `records` has one row per (hour, student):
        hour, university, true_id and any of the feature columns (missing
        features are zero). Cutoffs are recomputed from the rows.
        """
        universities = tuple(universities)
        final_quota = np.asarray(final_quota, dtype=np.int64)
        planned_quota = final_quota if planned_quota is None else np.asarray(planned_quota, dtype=np.int64)
        index = {university: code for code, university in enumerate(universities)}
        unknown = set(records['university']) - set(index)
        if unknown:
            raise InvalidInputError(f"Records name unknown universities {sorted(unknown)}")

        records = records.copy()
        if 'score_without_bonus' not in records:
            records['score_without_bonus'] = records['score_with_bonus']
        for column in FEATURE_COLUMNS:
            if column not in records:
                records[column] = 0
        records['code'] = records['university'].map(index)

        quotas = pd.DataFrame(
            {'planned_quota': planned_quota, 'final_quota': final_quota},
            index=pd.Index(universities, name='university'),
        )
        rows, cutoffs, truth = {}, {}, {}
        for hour in schedule.hours:
            at_hour = records[records['hour'] == hour]
            if at_hour['true_id'].duplicated().any():
                raise InvalidInputError(f"A student appears twice at hour {hour}")
            at_hour = at_hour.sort_values(
                ['code', 'score_with_bonus', 'true_id'], ascending=[True, False, True], kind='mergesort'
            )
            codes = at_hour['code'].to_numpy(dtype=np.int64)
            scores = at_hour['score_with_bonus'].to_numpy(dtype=np.int64)
            ids = at_hour['true_id'].to_numpy(dtype=np.int64)
            ranking = rank_applicants(codes, scores, ids, planned_quota, final_quota)
            cutoff_final, cutoff_planned = ranking.cutoff_final, ranking.cutoff_planned
            frame = at_hour[FEATURE_COLUMNS].astype(np.int64).reset_index(drop=True)
            frame.insert(0, 'row', _row_numbers(codes))
            frame.insert(0, 'university', at_hour['university'].to_numpy())
            rows[hour] = frame
            truth[hour] = ids
            cutoffs[hour] = pd.DataFrame(
                {'cutoff_planned': cutoff_planned, 'cutoff_final': cutoff_final}, index=quotas.index
            )
        return cls(schedule, universities, quotas, cutoffs, rows, truth)

    def write(self, directory, truth_directory=None):
        """Write one CSV per (hour, university), plus the truth sidecar when given a directory for it."""
        os.makedirs(directory, exist_ok=True)
        written = []
        header = {
            'schema_version': admissions_settings.SCHEMA_VERSION,
            'schedule': self.schedule.to_dict(),
            'universities': list(self.universities),
        }
        path = os.path.join(directory, SCHEDULE_FILE)
        with open(path, 'w', encoding='utf-8') as handle:
            yaml.safe_dump(header, handle, sort_keys=False)
        written.append(path)

        for hour in self.hours:
            hour_path = os.path.join(directory, hour_directory(hour))
            os.makedirs(hour_path, exist_ok=True)
            frame = self.rows[hour]
            for university in self.universities:
                metadata = {
                    'hour': hour,
                    'university': university,
                    'planned_quota': int(self.quotas.at[university, 'planned_quota']),
                    'final_quota': int(self.quotas.at[university, 'final_quota']),
                    'cutoff_planned': int(self.cutoffs[hour].at[university, 'cutoff_planned']),
                    'cutoff_final': int(self.cutoffs[hour].at[university, 'cutoff_final']),
                }
                path = os.path.join(hour_path, f"{university}.csv")
                with open(path, 'w', encoding='utf-8', newline='') as handle:
                    for key in METADATA_KEYS:
                        handle.write(f"# {key}={metadata[key]}\n")
                    frame.loc[frame['university'] == university, FEATURE_COLUMNS].to_csv(
                        handle, index=False, lineterminator='\n'
                    )
                written.append(path)

        if truth_directory is not None and self.truth is not None:
            os.makedirs(truth_directory, exist_ok=True)
            for hour in self.hours:
                path = os.path.join(truth_directory, f"{hour_directory(hour)}.csv")
                sidecar = self.rows[hour][['university', 'row']].copy()
                sidecar.insert(0, 'hour', hour)
                sidecar['true_id'] = self.truth[hour]
                sidecar.to_csv(path, index=False, lineterminator='\n')
                written.append(path)
        logger.info(f"Wrote {len(written)} snapshot files to {directory}")
        return written

    @classmethod
    def read(cls, directory, truth_directory=None) -> 'SnapshotSet':
        path = os.path.join(directory, SCHEDULE_FILE)
        try:
            with open(path, encoding='utf-8') as handle:
                header = yaml.safe_load(handle)
        except OSError as exc:
            raise InvalidInputError(f"{path}: cannot read snapshot header ({exc})")
        if not isinstance(header, dict) or header.get('schema_version') != admissions_settings.SCHEMA_VERSION:
            raise InvalidInputError(f"{path}: missing or unsupported schema_version")
        schedule = BatchSchedule.from_dict(header['schedule'])
        universities = tuple(header['universities'])

        quotas = {}
        rows, cutoffs, truth = {}, {}, {}
        for hour in schedule.hours:
            parts = []
            hour_cutoffs = []
            for university in universities:
                path = os.path.join(directory, hour_directory(hour), f"{university}.csv")
                metadata, frame = _read_snapshot_file(path)
                quotas.setdefault(university, (metadata['planned_quota'], metadata['final_quota']))
                hour_cutoffs.append((metadata['cutoff_planned'], metadata['cutoff_final']))
                frame.insert(0, 'row', np.arange(len(frame), dtype=np.int64))
                frame.insert(0, 'university', university)
                parts.append(frame)
            rows[hour] = pd.concat(parts, ignore_index=True)
            cutoffs[hour] = pd.DataFrame(
                hour_cutoffs, columns=['cutoff_planned', 'cutoff_final'],
                index=pd.Index(universities, name='university'),
            )
            if truth_directory is not None:
                truth[hour] = _read_truth(truth_directory, hour, rows[hour])

        quota_frame = pd.DataFrame(
            [quotas[u] for u in universities], columns=['planned_quota', 'final_quota'],
            index=pd.Index(universities, name='university'),
        )
        logger.info(f"Read snapshots for {len(rows)} hours and {len(universities)} universities from {directory}")
        return cls(schedule, universities, quota_frame, cutoffs, rows, truth if truth_directory is not None else None)


def _read_snapshot_file(path) -> Tuple[Dict[str, int], pd.DataFrame]:
    metadata = {}
    try:
        with open(path, encoding='utf-8') as handle:
            for line in handle:
                if not line.startswith('#'):
                    break
                key, _, value = line[1:].strip().partition('=')
                metadata[key] = value
        frame = pd.read_csv(path, comment='#', dtype=np.int64)
    except (OSError, ValueError) as exc:
        raise InvalidInputError(f"{path}: cannot read snapshot ({exc})")
    missing = [key for key in METADATA_KEYS if key not in metadata]
    if missing or list(frame.columns) != FEATURE_COLUMNS:
        raise InvalidInputError(f"{path}: malformed snapshot (missing metadata {missing} or wrong columns)")
    for key in METADATA_KEYS[2:]:
        metadata[key] = int(metadata[key])
    return metadata, frame


def _read_truth(truth_directory, hour, frame):
    path = os.path.join(truth_directory, f"{hour_directory(hour)}.csv")
    try:
        sidecar = pd.read_csv(path)
    except (OSError, ValueError) as exc:
        raise InvalidInputError(f"{path}: cannot read ground truth ({exc})")
    if len(sidecar) != len(frame) or not (
        (sidecar['university'].to_numpy() == frame['university'].to_numpy()).all()
        and (sidecar['row'].to_numpy() == frame['row'].to_numpy()).all()
    ):
        raise InvalidInputError(f"{path}: ground truth rows do not match the snapshot rows")
    return sidecar['true_id'].to_numpy(dtype=np.int64)
