"""
Backward record linkage over hourly snapshots.

Ids are handed out at the last hour and carried back one hour pair at a
time. For each pair the earlier rows take the id of a later row by, in this
order: frozen carry (students whose deadline has passed cannot change),
Rule 1 (same university, characteristics and program choices), Rule 2
(same university and characteristics), a cross-university search on the
characteristics alone, and finally a fresh id. Every tie is broken by data
order: universities in file order, rows in snapshot order.
"""
import enum
import logging
from dataclasses import dataclass
from typing import Dict, List, Mapping, NamedTuple, Optional, Tuple

import numpy as np
import pandas as pd

from imsim.schedule import BatchSchedule
from imsim.snapshots import FEATURE_COLUMNS, LINK_KEY_COLUMNS, SnapshotSet

logger = logging.getLogger(__name__)

RULE1_KEYS = ['university'] + FEATURE_COLUMNS
RULE2_KEYS = ['university'] + LINK_KEY_COLUMNS


class LinkRule(str, enum.Enum):
    FROZEN_CARRY = 'frozen_carry'
    RULE1 = 'rule1'
    RULE2 = 'rule2'
    CROSS_UNIVERSITY = 'cross_university'
    FRESH = 'fresh'


class LinkKey(NamedTuple):
    score_with_bonus: int
    score_without_bonus: int
    gender: int
    ethnicity: int
    programs: Optional[Tuple[int, ...]] = None

    @classmethod
    def of(cls, row, with_programs=False):
        programs = tuple(int(row[c]) for c in FEATURE_COLUMNS[len(LINK_KEY_COLUMNS):]) if with_programs else None
        return cls(*(int(row[c]) for c in LINK_KEY_COLUMNS), programs=programs)


@dataclass(frozen=True)
class LinkageWarning:
    hour: int
    university: Optional[str]
    message: str

    def __str__(self):
        where = f"hour {self.hour}" + (f", {self.university}" if self.university else "")
        return f"{where}: {self.message}"


@dataclass(frozen=True)
class ChangeEvent:
    student_id: int
    hour: int
    from_university: str
    to_university: str


@dataclass(frozen=True, eq=False)
class LinkageResult:
    """
    Per hour, aligned with the snapshot rows: `ids` holds each row's inferred
    id, `rules` how the row got it from the next hour, and `partners` the
    next-hour row it was linked to (-1 for fresh ids).
    """
    rows: Mapping[int, pd.DataFrame]
    ids: Mapping[int, np.ndarray]
    rules: Mapping[int, np.ndarray]
    partners: Mapping[int, np.ndarray]
    change_events: Tuple[ChangeEvent, ...]
    new_id_count: int
    warnings: Tuple[LinkageWarning, ...] = ()

    @property
    def hours(self):
        return tuple(sorted(self.rows))

    def rule_counts(self) -> Dict[str, int]:
        counts = {rule.value: 0 for rule in LinkRule}
        for hour in self.hours[:-1]:
            values, totals = np.unique(self.rules[hour].astype(str), return_counts=True)
            for value, total in zip(values, totals):
                counts[value] += int(total)
        return counts

    def trajectory_frame(self) -> pd.DataFrame:
        """One line per (hour, row) in data order: id, hour, university, row, features, rule."""
        parts = []
        for hour in self.hours:
            frame = self.rows[hour][['university', 'row'] + FEATURE_COLUMNS].copy()
            frame.insert(0, 'hour', hour)
            frame.insert(0, 'id', self.ids[hour])
            frame['rule'] = self.rules[hour].astype(str)
            parts.append(frame)
        return pd.concat(parts, ignore_index=True)


def _pair_in_order(earlier: pd.DataFrame, later: pd.DataFrame, keys: List[str]):
    """
    Pair the k-th earlier row with the k-th later row sharing the same key
    values. Returns row positions (earlier, later).
    """
    if earlier.empty or later.empty:
        return np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64)
    left = earlier[keys].copy()
    left['_occurrence'] = left.groupby(keys, sort=False).cumcount()
    left['_position'] = earlier.index
    right = later[keys].copy()
    right['_occurrence'] = right.groupby(keys, sort=False).cumcount()
    right['_position'] = later.index
    merged = left.merge(right, on=keys + ['_occurrence'], suffixes=('_earlier', '_later'))
    return (
        merged['_position_earlier'].to_numpy(dtype=np.int64),
        merged['_position_later'].to_numpy(dtype=np.int64),
    )


def _uneven_groups(earlier, later, keys):
    """Key groups present on both sides with different sizes."""
    left = earlier.groupby(keys, sort=False).size()
    right = later.groupby(keys, sort=False).size()
    both = pd.concat([left.rename('earlier'), right.rename('later')], axis=1, join='inner')
    return both[both['earlier'] != both['later']]


def frozen_mask(frame: pd.DataFrame, schedule: BatchSchedule, hour) -> np.ndarray:
    """Rows whose batch deadline is at or before `hour`: they cannot change in the next hour."""
    scores = frame['score_with_bonus'].to_numpy(dtype=np.int64)
    return schedule.deadlines(schedule.batch_indices(scores)) <= hour


def link_snapshots(snapshots: SnapshotSet, schedule: Optional[BatchSchedule] = None) -> LinkageResult:
    """
    Reconstruct student trajectories from snapshots without ids.
    """
    schedule = snapshots.schedule if schedule is None else schedule
    hours = snapshots.hours
    rows = {hour: snapshots.frame(hour).reset_index(drop=True) for hour in hours}
    last = hours[-1]

    ids = {last: np.arange(len(rows[last]), dtype=np.int64)}
    rules = {last: np.full(len(rows[last]), LinkRule.FRESH.value, dtype=object)}
    partners = {last: np.full(len(rows[last]), -1, dtype=np.int64)}
    next_id = len(rows[last])
    new_ids = 0
    events = []
    warnings = []

    for earlier_hour, later_hour in reversed(list(zip(hours, hours[1:]))):
        earlier, later = rows[earlier_hour], rows[later_hour]
        partner = np.full(len(earlier), -1, dtype=np.int64)
        rule = np.full(len(earlier), LinkRule.FRESH.value, dtype=object)
        claimed = np.zeros(len(later), dtype=bool)

        def link(earlier_positions, later_positions, how):
            partner[earlier_positions] = later_positions
            rule[earlier_positions] = how.value
            claimed[later_positions] = True

        frozen_earlier = frozen_mask(earlier, schedule, earlier_hour)
        frozen_later = frozen_mask(later, schedule, earlier_hour)
        link(*_pair_in_order(earlier[frozen_earlier], later[frozen_later], ['university']), LinkRule.FROZEN_CARRY)
        for university, counts in _uneven_groups(earlier[frozen_earlier], later[frozen_later], ['university']).iterrows():
            warnings.append(LinkageWarning(
                later_hour, university,
                f"{counts['earlier']} frozen rows at hour {earlier_hour} but {counts['later']} at hour {later_hour}",
            ))

        link(*_pair_in_order(earlier[partner < 0], later[~claimed], RULE1_KEYS), LinkRule.RULE1)

        open_earlier, open_later = earlier[partner < 0], later[~claimed]
        for key, counts in _uneven_groups(open_earlier, open_later, RULE2_KEYS).iterrows():
            warnings.append(LinkageWarning(
                later_hour, key[0],
                f"{counts['earlier']} earlier and {counts['later']} later rows share characteristics "
                f"{tuple(int(v) for v in key[1:])}; paired in data order",
            ))
        link(*_pair_in_order(open_earlier, open_later, RULE2_KEYS), LinkRule.RULE2)

        cross_earlier, cross_later = _pair_in_order(earlier[partner < 0], later[~claimed], LINK_KEY_COLUMNS)
        link(cross_earlier, cross_later, LinkRule.CROSS_UNIVERSITY)

        fresh = np.flatnonzero(partner < 0)
        hour_ids = np.full(len(earlier), -1, dtype=np.int64)
        linked = partner >= 0
        hour_ids[linked] = ids[later_hour][partner[linked]]
        hour_ids[fresh] = np.arange(next_id, next_id + len(fresh))
        next_id += len(fresh)
        new_ids += len(fresh)

        for e, l in zip(cross_earlier, cross_later):
            events.append(ChangeEvent(
                student_id=int(hour_ids[e]),
                hour=later_hour,
                from_university=earlier.at[e, 'university'],
                to_university=later.at[l, 'university'],
            ))
        ids[earlier_hour], rules[earlier_hour], partners[earlier_hour] = hour_ids, rule, partner
        logger.debug(
            f"Linked hour {earlier_hour} to {later_hour}: {len(cross_earlier)} cross-university, {len(fresh)} fresh"
        )

    for hour in hours:
        hour_warnings = [w for w in warnings if w.hour == hour]
        if hour_warnings:
            logger.warning(f"Hour {hour}: {len(hour_warnings)} ambiguous or uneven candidate groups resolved in data order")
    events.sort(key=lambda e: (e.hour, e.student_id))
    logger.info(f"Linked {len(hours)} hours: {len(events)} change events, {new_ids} fresh ids before the last hour")
    return LinkageResult(
        rows=rows,
        ids=ids,
        rules=rules,
        partners=partners,
        change_events=tuple(events),
        new_id_count=new_ids,
        warnings=tuple(warnings),
    )
