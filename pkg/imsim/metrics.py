"""
Outcome measures for a finished clearinghouse run.
"""
import logging
from dataclasses import dataclass
from typing import Dict

import numpy as np
import pandas as pd

from core.domain import Matching
from core.exceptions import InvalidInputError

from .snapshots import OPEN_SEAT, clears_cutoff

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class OutcomeMetrics:
    """
    `assignment_rates` is indexed by hour with one column per batch. A
    student counts as tentatively assigned when her score with bonus meets
    the final-quota cutoff of the university she applies to that hour.
    `unassigned_above_prior_cutoff` compares scores with prior final cutoffs
    (ties count); `unassigned_ahead_of_prior_marginal` also applies the id
    tie-break, so students who lost a tie at the cutoff are left out.
    """
    population_size: int
    void_count: int
    assignment_rates: pd.DataFrame
    changed_final_round: int
    changed_final_round_and_rejected: int
    unassigned_above_prior_cutoff: int
    unassigned_ahead_of_prior_marginal: int
    admitted_by_rank: int
    admitted_by_cutoff: int
    measure_divergence: int

    def to_dict(self):
        return {
            'population_size': self.population_size,
            'void_count': self.void_count,
            'changed_final_round': self.changed_final_round,
            'changed_final_round_and_rejected': self.changed_final_round_and_rejected,
            'unassigned_above_prior_cutoff': self.unassigned_above_prior_cutoff,
            'unassigned_ahead_of_prior_marginal': self.unassigned_ahead_of_prior_marginal,
            'admitted_by_rank': self.admitted_by_rank,
            'admitted_by_cutoff': self.admitted_by_cutoff,
            'measure_divergence': self.measure_divergence,
        }


def _locations(snapshots, size):
    """(hours x students) university codes, -1 where the student has no row."""
    location = np.full((len(snapshots.hours), size), -1, dtype=np.int64)
    for k, hour in enumerate(snapshots.hours):
        ids = snapshots.truth_at(hour)
        if len(ids) and (ids.min() < 0 or ids.max() >= size):
            raise InvalidInputError(f"Ground truth at hour {hour} names students outside the population")
        location[k, ids] = snapshots.university_codes(hour)
    return location


def _final_marginals(snapshots, hour):
    """True id of each university's final-quota-th row at `hour`, OPEN_SEAT below quota."""
    codes = snapshots.university_codes(hour)
    ids = snapshots.truth_at(hour)
    quota = snapshots.quotas['final_quota'].to_numpy(dtype=np.int64)
    marginal = np.full(len(quota), OPEN_SEAT, dtype=np.int64)
    at_quota = snapshots.frame(hour)['row'].to_numpy() == quota[codes] - 1
    marginal[codes[at_quota]] = ids[at_quota]
    return marginal


def _meets_cutoff(location, cutoffs, score):
    """Per (hour, student): has a row and the score meets that hour's cutoff."""
    present = location >= 0
    cutoff_at = np.take_along_axis(cutoffs, np.where(present, location, 0), axis=1)
    return present & (score[None, :] >= cutoff_at)


def compute_metrics(snapshots, final: Matching, population) -> OutcomeMetrics:
    """
    Every count is over true student ids. "Prior cutoff" means the final
    cutoff of any university the student applied to before the last hour.
    """
    if not snapshots.has_truth:
        raise InvalidInputError("Outcome metrics need a snapshot set with ground-truth ids")
    size = population.size
    hours = snapshots.hours
    score = population.score
    location = _locations(snapshots, size)
    cutoffs = np.stack([snapshots.cutoffs[h]['cutoff_final'].to_numpy(dtype=np.int64) for h in hours])
    by_cutoff = _meets_cutoff(location, cutoffs, score)

    index = {university: code for code, university in enumerate(snapshots.universities)}
    assigned = [final.college_of(population.student_label(i)) for i in range(size)]
    final_codes = np.array([-1 if u is None else index[u] for u in assigned], dtype=np.int64)
    unassigned = final_codes < 0

    rates = {}
    for batch in snapshots.schedule.batches:
        members = population.batch == batch.index
        rates[batch.index] = by_cutoff[:, members].mean(axis=1) if members.any() else np.full(len(hours), np.nan)
    assignment_rates = pd.DataFrame(rates, index=pd.Index(hours, name='hour'))
    assignment_rates.columns.name = 'batch'

    deadline_index = snapshots.schedule.deadlines(population.batch) - hours[0]
    eligible = np.flatnonzero((population.batch > 0) & (deadline_index >= 1) & (deadline_index < len(hours)))
    at_deadline = location[deadline_index[eligible], eligible]
    before = location[deadline_index[eligible] - 1, eligible]
    changed = np.zeros(size, dtype=bool)
    changed[eligible] = (at_deadline >= 0) & (before >= 0) & (at_deadline != before)

    last_cutoffs = cutoffs[-1]
    earlier = location[:-1]
    applied_earlier = earlier >= 0
    prior = np.where(applied_earlier, earlier, 0)
    above_prior = applied_earlier & (score[None, :] >= last_cutoffs[prior])
    envy = unassigned & above_prior.any(axis=0)
    marginal = _final_marginals(snapshots, hours[-1])
    ahead_prior = applied_earlier & clears_cutoff(score[None, :], np.arange(size)[None, :], last_cutoffs[prior], marginal[prior])
    ranked_envy = unassigned & ahead_prior.any(axis=0)

    admitted_rank = ~unassigned
    admitted_cutoff = by_cutoff[-1]
    void_count = int((location < 0).all(axis=0).sum())

    metrics = OutcomeMetrics(
        population_size=size,
        void_count=void_count,
        assignment_rates=assignment_rates,
        changed_final_round=int(changed.sum()),
        changed_final_round_and_rejected=int((changed & unassigned).sum()),
        unassigned_above_prior_cutoff=int(envy.sum()),
        unassigned_ahead_of_prior_marginal=int(ranked_envy.sum()),
        admitted_by_rank=int(admitted_rank.sum()),
        admitted_by_cutoff=int(admitted_cutoff.sum()),
        measure_divergence=int((admitted_rank ^ admitted_cutoff).sum()),
    )
    logger.info(
        f"Outcome metrics: {metrics.changed_final_round} changed in their final hour, "
        f"{metrics.unassigned_above_prior_cutoff} unassigned above a prior cutoff"
    )
    return metrics


def assignment_rate_table(metrics: OutcomeMetrics) -> pd.DataFrame:
    """Long, plot-ready form of the hourly assignment rates: hour, batch, rate."""
    frame = metrics.assignment_rates.rename_axis(columns=None).reset_index()
    return (
        frame.melt(id_vars='hour', var_name='batch', value_name='rate')
        .sort_values(['batch', 'hour'], kind='mergesort')
        .reset_index(drop=True)
    )


def staggered_closing_pattern(metrics: OutcomeMetrics, schedule) -> Dict[int, bool]:
    """
    For every batch after the first: does its rate rise from the previous
    batch's deadline hour to its own, or is it already 1 there?
    """
    rates = metrics.assignment_rates
    pattern = {}
    for previous, batch in zip(schedule.batches, schedule.batches[1:]):
        before = rates.at[previous.deadline_hour, batch.index]
        after = rates.at[batch.deadline_hour, batch.index]
        pattern[batch.index] = bool(after > before or np.isclose(before, 1.0))
    return pattern


def cutoff_movement_table(snapshots) -> pd.DataFrame:
    """
    Share of universities whose final-quota cutoff went up, down or stayed
    put since the previous hour: one row per hour after the first.
    """
    hours = snapshots.hours
    cutoffs = np.stack([snapshots.cutoffs[h]['cutoff_final'].to_numpy(dtype=np.int64) for h in hours])
    step = np.diff(cutoffs, axis=0)
    return pd.DataFrame({
        'hour': np.asarray(hours[1:], dtype=np.int64),
        'up': (step > 0).mean(axis=1),
        'down': (step < 0).mean(axis=1),
        'same': (step == 0).mean(axis=1),
    })
