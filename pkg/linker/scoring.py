"""
Score a linkage against simulator ground truth.
"""
import logging
from collections import Counter
from dataclasses import dataclass
from typing import Dict, Mapping, Tuple

import numpy as np
import pandas as pd
from scipy import sparse
from scipy.optimize import linear_sum_assignment
from scipy.sparse.csgraph import connected_components

from core.exceptions import LinkageTruthMismatch
from imsim.snapshots import LINK_KEY_COLUMNS

from .linking import LinkageResult, LinkRule

logger = logging.getLogger(__name__)

RULE2_SCOPE = ['university'] + LINK_KEY_COLUMNS


def _ratio(numerator, denominator):
    # vacuous ratios count as perfect
    return 1.0 if denominator == 0 else numerator / denominator


@dataclass(frozen=True)
class RuleAccuracy:
    rule: str
    links: int
    correct: int

    @property
    def accuracy(self):
        return _ratio(self.correct, self.links)

    def to_dict(self):
        return {'rule': self.rule, 'links': self.links, 'correct': self.correct, 'accuracy': self.accuracy}


@dataclass(frozen=True)
class LinkageScore:
    rows: int
    inferred_links: int
    true_links: int
    correct_links: int
    id_agreement: int
    inferred_changes: int
    true_changes: int
    correct_changes: int
    frozen_links: int
    frozen_correct: int
    frozen_unique_links: int
    frozen_unique_correct: int
    new_id_count: int
    rule_accuracy: Tuple[RuleAccuracy, ...]
    key_histogram: Mapping[int, int]

    @property
    def link_precision(self):
        return _ratio(self.correct_links, self.inferred_links)

    @property
    def link_recall(self):
        return _ratio(self.correct_links, self.true_links)

    @property
    def id_accuracy(self):
        """Share of rows whose inferred id maps to their true id under the best relabeling."""
        return _ratio(self.id_agreement, self.rows)

    @property
    def change_precision(self):
        return _ratio(self.correct_changes, self.inferred_changes)

    @property
    def change_recall(self):
        return _ratio(self.correct_changes, self.true_changes)

    @property
    def frozen_accuracy(self):
        return _ratio(self.frozen_correct, self.frozen_links)

    @property
    def frozen_unique_accuracy(self):
        return _ratio(self.frozen_unique_correct, self.frozen_unique_links)

    @property
    def lower_bound_holds(self):
        return self.inferred_changes <= self.true_changes

    def to_dict(self):
        return {
            'rows': self.rows,
            'link_precision': self.link_precision,
            'link_recall': self.link_recall,
            'id_accuracy': self.id_accuracy,
            'inferred_links': self.inferred_links,
            'true_links': self.true_links,
            'change_precision': self.change_precision,
            'change_recall': self.change_recall,
            'inferred_changes': self.inferred_changes,
            'true_changes': self.true_changes,
            'lower_bound_holds': self.lower_bound_holds,
            'frozen_links': self.frozen_links,
            'frozen_accuracy': self.frozen_accuracy,
            'frozen_unique_links': self.frozen_unique_links,
            'frozen_unique_accuracy': self.frozen_unique_accuracy,
            'new_id_count': self.new_id_count,
            'rule_accuracy': [r.to_dict() for r in self.rule_accuracy],
            'key_histogram': {str(size): count for size, count in sorted(self.key_histogram.items())},
        }


def check_truth(result: LinkageResult, truth: Mapping[int, np.ndarray]):
    if set(truth) != set(result.hours):
        raise LinkageTruthMismatch(
            f"Ground truth covers hours {sorted(truth)}, the linkage covers {list(result.hours)}"
        )
    for hour in result.hours:
        if len(truth[hour]) != len(result.rows[hour]):
            raise LinkageTruthMismatch(
                f"Hour {hour}: {len(truth[hour])} ground-truth ids for {len(result.rows[hour])} rows"
            )
        if len(np.unique(truth[hour])) != len(truth[hour]):
            raise LinkageTruthMismatch(f"Hour {hour}: a ground-truth id appears on two rows")


def link_key_histogram(rows: Mapping[int, pd.DataFrame]) -> Dict[int, int]:
    """How many LinkKeys are shared by k rows inside one university-hour, for every k."""
    histogram = Counter()
    for frame in rows.values():
        if frame.empty:
            continue
        sizes = frame.groupby(RULE2_SCOPE, sort=False).size()
        histogram.update({int(size): int(count) for size, count in sizes.value_counts().items()})
    return dict(sorted(histogram.items()))


def id_agreement(result: LinkageResult, truth: Mapping[int, np.ndarray]) -> int:
    """
    Rows on which inferred and true ids agree under the one-to-one relabeling
    that maximizes agreement. The co-occurrence graph is split into connected
    components and each component is solved as an assignment problem.
    """
    inferred = np.concatenate([result.ids[h] for h in result.hours])
    actual = np.concatenate([truth[h] for h in result.hours])
    if len(inferred) == 0:
        return 0
    _, inferred_codes = np.unique(inferred, return_inverse=True)
    _, true_codes = np.unique(actual, return_inverse=True)
    num_inferred, num_true = inferred_codes.max() + 1, true_codes.max() + 1
    weights = sparse.coo_matrix(
        (np.ones(len(inferred), dtype=np.int64), (inferred_codes, true_codes)), shape=(num_inferred, num_true)
    ).tocsr()
    weights.sum_duplicates()

    graph = sparse.bmat([[None, weights], [weights.T, None]])
    _, labels = connected_components(graph, directed=False)
    left, right = labels[:num_inferred], labels[num_inferred:]
    left_sizes = np.bincount(left, minlength=labels.max() + 1)
    right_sizes = np.bincount(right, minlength=labels.max() + 1)

    entries = weights.tocoo()
    entry_component = left[entries.row]
    totals = np.bincount(entry_component, weights=entries.data, minlength=labels.max() + 1)
    simple = (left_sizes == 1) & (right_sizes == 1)
    agreement = int(totals[simple].sum())

    left_order = np.argsort(left, kind='stable')
    right_order = np.argsort(right, kind='stable')
    left_starts = np.concatenate(([0], np.cumsum(left_sizes)))
    right_starts = np.concatenate(([0], np.cumsum(right_sizes)))
    for component in np.flatnonzero(~simple & (left_sizes > 0) & (right_sizes > 0)):
        members = left_order[left_starts[component]:left_starts[component + 1]]
        partners = right_order[right_starts[component]:right_starts[component + 1]]
        block = weights[members][:, partners].toarray()
        row_index, col_index = linear_sum_assignment(block, maximize=True)
        agreement += int(block[row_index, col_index].sum())
    return agreement


def score_linkage(result: LinkageResult, truth: Mapping[int, np.ndarray]) -> LinkageScore:
    """
    Precision and recall of identity links between consecutive hours and of
    change events, relabeling-free id accuracy, frozen-carry accuracy and
    per-rule accuracy.
    """
    check_truth(result, truth)
    hours = result.hours
    inferred_links = true_links = correct_links = 0
    inferred_changes = true_changes = correct_changes = 0
    frozen_links = frozen_correct = frozen_unique_links = frozen_unique_correct = 0
    per_rule = {rule.value: [0, 0] for rule in LinkRule if rule is not LinkRule.FRESH}

    for hour, next_hour in zip(hours, hours[1:]):
        earlier, later = result.rows[hour], result.rows[next_hour]
        partner = result.partners[hour]
        linked = np.flatnonzero(partner >= 0)
        targets = partner[linked]
        correct = truth[hour][linked] == truth[next_hour][targets]
        earlier_university = earlier['university'].to_numpy()
        later_university = later['university'].to_numpy()
        moved = earlier_university[linked] != later_university[targets]

        _, at_hour, at_next = np.intersect1d(truth[hour], truth[next_hour], return_indices=True)
        inferred_links += len(linked)
        true_links += len(at_hour)
        correct_links += int(correct.sum())
        inferred_changes += int(moved.sum())
        true_changes += int((earlier_university[at_hour] != later_university[at_next]).sum())
        correct_changes += int((moved & correct).sum())

        rules = result.rules[hour][linked].astype(str)
        for rule in per_rule:
            chosen = rules == rule
            per_rule[rule][0] += int(chosen.sum())
            per_rule[rule][1] += int((chosen & correct).sum())

        frozen = rules == LinkRule.FROZEN_CARRY.value
        unique_earlier = ~earlier.duplicated(RULE2_SCOPE, keep=False).to_numpy()
        unique_later = ~later.duplicated(RULE2_SCOPE, keep=False).to_numpy()
        unique = frozen & unique_earlier[linked] & unique_later[targets]
        frozen_links += int(frozen.sum())
        frozen_correct += int((frozen & correct).sum())
        frozen_unique_links += int(unique.sum())
        frozen_unique_correct += int((unique & correct).sum())

    score = LinkageScore(
        rows=sum(len(result.rows[h]) for h in hours),
        inferred_links=inferred_links,
        true_links=true_links,
        correct_links=correct_links,
        id_agreement=id_agreement(result, truth),
        inferred_changes=inferred_changes,
        true_changes=true_changes,
        correct_changes=correct_changes,
        frozen_links=frozen_links,
        frozen_correct=frozen_correct,
        frozen_unique_links=frozen_unique_links,
        frozen_unique_correct=frozen_unique_correct,
        new_id_count=result.new_id_count,
        rule_accuracy=tuple(RuleAccuracy(rule, links, hits) for rule, (links, hits) in per_rule.items()),
        key_histogram=link_key_histogram(result.rows),
    )
    if not score.lower_bound_holds:
        logger.warning(
            f"Inferred {score.inferred_changes} change events, more than the {score.true_changes} true ones"
        )
    logger.info(
        f"Linkage scored: link precision {score.link_precision:.4f}, recall {score.link_recall:.4f}, "
        f"id accuracy {score.id_accuracy:.4f}"
    )
    return score
