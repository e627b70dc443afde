"""
Trajectory and ground-truth files for the linker.
"""
import glob
import logging
import os
from typing import Dict

import numpy as np
import pandas as pd

from core.exceptions import InvalidInputError, LinkageTruthMismatch
from imsim.snapshots import FEATURE_COLUMNS

from .linking import ChangeEvent, LinkageResult, LinkRule

logger = logging.getLogger(__name__)

TRAJECTORY_COLUMNS = ['id', 'hour', 'university', 'row'] + FEATURE_COLUMNS + ['rule']
TRUTH_COLUMNS = ['hour', 'university', 'row', 'true_id']


def write_trajectories(result: LinkageResult, path):
    frame = result.trajectory_frame()
    frame.to_csv(path, index=False, lineterminator='\n')
    logger.info(f"Wrote {len(frame)} trajectory rows to {path}")
    return path


def read_trajectories(path) -> LinkageResult:
    """
    Rebuild a linkage from its trajectory file. A row links to the row with
    the same id in the next hour; warnings are not stored in the file.
    """
    try:
        frame = pd.read_csv(path)
    except (OSError, ValueError) as exc:
        raise InvalidInputError(f"{path}: cannot read trajectories ({exc})")
    if list(frame.columns) != TRAJECTORY_COLUMNS:
        raise InvalidInputError(f"{path}: expected columns {TRAJECTORY_COLUMNS}")
    unknown = set(frame['rule']) - {rule.value for rule in LinkRule}
    if unknown:
        raise InvalidInputError(f"{path}: unknown rules {sorted(unknown)}")

    hours = sorted(int(h) for h in frame['hour'].unique())
    rows, ids, rules, partners = {}, {}, {}, {}
    for hour in hours:
        at_hour = frame[frame['hour'] == hour].reset_index(drop=True)
        if at_hour['id'].duplicated().any():
            raise InvalidInputError(f"{path}: an id appears twice at hour {hour}")
        rows[hour] = at_hour[['university', 'row'] + FEATURE_COLUMNS]
        ids[hour] = at_hour['id'].to_numpy(dtype=np.int64)
        rules[hour] = at_hour['rule'].to_numpy(dtype=object)

    events = []
    new_ids = 0
    for hour, next_hour in zip(hours, hours[1:]):
        position = pd.Series(np.arange(len(ids[next_hour])), index=ids[next_hour])
        partner = position.reindex(ids[hour]).fillna(-1).to_numpy(dtype=np.int64)
        partner[rules[hour] == LinkRule.FRESH.value] = -1
        partners[hour] = partner
        new_ids += int((partner < 0).sum())
        for e in np.flatnonzero(partner >= 0):
            source = rows[hour].at[e, 'university']
            target = rows[next_hour].at[partner[e], 'university']
            if source != target:
                events.append(ChangeEvent(int(ids[hour][e]), next_hour, source, target))
    partners[hours[-1]] = np.full(len(ids[hours[-1]]), -1, dtype=np.int64)
    return LinkageResult(
        rows=rows,
        ids=ids,
        rules=rules,
        partners=partners,
        change_events=tuple(events),
        new_id_count=new_ids,
    )


def read_truth(path) -> pd.DataFrame:
    """Ground truth from one CSV file or a directory of per-hour sidecar files."""
    files = sorted(glob.glob(os.path.join(path, '*.csv'))) if os.path.isdir(path) else [path]
    if not files:
        raise InvalidInputError(f"{path}: no ground-truth files found")
    try:
        frame = pd.concat([pd.read_csv(name) for name in files], ignore_index=True)
    except (OSError, ValueError) as exc:
        raise InvalidInputError(f"{path}: cannot read ground truth ({exc})")
    if list(frame.columns) != TRUTH_COLUMNS:
        raise InvalidInputError(f"{path}: expected columns {TRUTH_COLUMNS}")
    return frame


def align_truth(result: LinkageResult, truth: pd.DataFrame) -> Dict[int, np.ndarray]:
    """True ids per hour in the order of the linkage rows."""
    aligned = {}
    for hour in result.hours:
        keys = result.rows[hour][['university', 'row']].copy()
        try:
            matched = keys.merge(
                truth[truth['hour'] == hour], on=['university', 'row'], how='left', validate='one_to_one'
            )
        except pd.errors.MergeError as exc:
            raise LinkageTruthMismatch(f"Hour {hour}: duplicate ground-truth rows ({exc})")
        if matched['true_id'].isna().any() or len(matched) != len(keys):
            raise LinkageTruthMismatch(f"Hour {hour}: rows without a ground-truth id")
        aligned[hour] = matched['true_id'].to_numpy(dtype=np.int64)
    extra = set(truth['hour'].unique()) - set(result.hours)
    if extra:
        raise LinkageTruthMismatch(f"Ground truth names hours {sorted(extra)} that the linkage lacks")
    for hour in result.hours:
        if (truth['hour'] == hour).sum() != len(aligned[hour]):
            raise LinkageTruthMismatch(f"Hour {hour}: ground truth has rows the linkage lacks")
    return aligned
