import os
import tempfile

import numpy as np
import pandas as pd
from django.test import SimpleTestCase

from core.exceptions import LinkageTruthMismatch
from imsim.clearinghouse import BehaviorConfig, run_clearinghouse
from imsim.population import PopulationConfig, generate_population
from imsim.schedule import BatchSchedule
from imsim.snapshots import SnapshotSet

from .io import align_truth, read_trajectories, read_truth, write_trajectories
from .linking import LinkageResult, LinkKey, LinkRule, link_snapshots
from .scoring import link_key_histogram, score_linkage

UNIVERSITIES = ('c1', 'c2', 'c3')


def fixture(schedule, records, quotas=(5, 5, 5)):
    return SnapshotSet.from_records(schedule, UNIVERSITIES, list(quotas), pd.DataFrame(records))


def row(hour, university, true_id, score, **features):
    return dict(hour=hour, university=university, true_id=true_id, score_with_bonus=score, **features)


def simulated(seed, num_students=800, **behavior):
    schedule = BatchSchedule.default()
    config = PopulationConfig(num_students=num_students, num_universities=15, quota_log_mean=4.0)
    population = generate_population(config, schedule, seed=seed)
    settings = dict(revision_prob=0.5, program_revision_prob=0.2)
    settings.update(behavior)
    return run_clearinghouse(population, schedule, BehaviorConfig(**settings), seed=seed)


class LinkingRuleTests(SimpleTestCase):

    def test_no_changes_unique_keys(self):
        """Test stable students with unique characteristics keep one id and change nothing"""
        schedule = BatchSchedule.single_batch(3)
        records = [
            row(hour, university, student, score, program_1=student + 1)
            for hour in (1, 2, 3)
            for student, (university, score) in enumerate([('c1', 9), ('c1', 7), ('c2', 5)])
        ]
        snapshots = fixture(schedule, records)
        result = link_snapshots(snapshots.without_truth())
        self.assertEqual(result.change_events, ())
        self.assertEqual(result.new_id_count, 0)
        for hour in (1, 2):
            np.testing.assert_array_equal(result.ids[hour], result.ids[3])
            self.assertTrue((result.rules[hour] == LinkRule.RULE1.value).all())
        score = score_linkage(result, snapshots.truth)
        self.assertEqual(score.link_precision, 1.0)
        self.assertEqual(score.link_recall, 1.0)
        self.assertEqual(score.id_accuracy, 1.0)

    def test_program_change_uses_rule_two(self):
        """Test a student who only changes programs is linked by university"""
        schedule = BatchSchedule.single_batch(2)
        snapshots = fixture(schedule, [
            row(1, 'c1', 0, 9, program_1=1), row(2, 'c1', 0, 9, program_1=2),
        ])
        result = link_snapshots(snapshots)
        self.assertEqual(result.rules[1][0], LinkRule.RULE2.value)
        self.assertEqual(result.ids[1][0], result.ids[2][0])
        self.assertEqual(result.change_events, ())

    def test_cross_university_move(self):
        """Test a move between universities becomes a change event"""
        schedule = BatchSchedule.single_batch(2)
        snapshots = fixture(schedule, [
            row(1, 'c1', 0, 9), row(1, 'c2', 1, 8),
            row(2, 'c3', 0, 9, program_1=3), row(2, 'c2', 1, 8),
        ])
        result = link_snapshots(snapshots)
        self.assertEqual(len(result.change_events), 1)
        event = result.change_events[0]
        self.assertEqual((event.hour, event.from_university, event.to_university), (2, 'c1', 'c3'))
        moved = np.flatnonzero(snapshots.frame(1)['score_with_bonus'].to_numpy() == 9)[0]
        self.assertEqual(result.rules[1][moved], LinkRule.CROSS_UNIVERSITY.value)
        self.assertTrue(score_linkage(result, snapshots.truth).change_recall == 1.0)

    def test_unmatched_row_gets_fresh_id(self):
        """Test an earlier row with no counterpart gets a new id"""
        schedule = BatchSchedule.single_batch(2)
        snapshots = fixture(schedule, [row(1, 'c1', 0, 9), row(1, 'c1', 1, 4), row(2, 'c1', 0, 9)])
        result = link_snapshots(snapshots)
        self.assertEqual(result.new_id_count, 1)
        self.assertEqual(list(result.rules[1]), [LinkRule.RULE1.value, LinkRule.FRESH.value])
        self.assertNotIn(result.ids[1][1], result.ids[2])

    def test_frozen_carry(self):
        """Test rows past their deadline are carried, duplicates in data order"""
        schedule = BatchSchedule.from_bands([600, 0])
        records = []
        for hour in (1, 2, 3, 4):
            records += [row(hour, 'c1', 0, 700), row(hour, 'c1', 1, 700), row(hour, 'c2', 2, 500)]
        snapshots = fixture(schedule, records)
        result = link_snapshots(snapshots)
        self.assertEqual(list(result.rules[3][:2]), [LinkRule.FROZEN_CARRY.value] * 2)
        self.assertEqual(result.rules[3][2], LinkRule.RULE1.value)
        self.assertEqual(result.rules[2][0], LinkRule.RULE1.value)
        score = score_linkage(result, snapshots.truth)
        self.assertEqual(score.frozen_links, 2)
        self.assertEqual(score.frozen_accuracy, 1.0)
        self.assertEqual(score.frozen_unique_links, 0)

    def test_identical_keys_swap_universities(self):
        """Test two look-alike students trading places are read as staying put"""
        schedule = BatchSchedule.single_batch(2)
        snapshots = fixture(schedule, [
            row(1, 'c1', 0, 6), row(1, 'c2', 1, 6),
            row(2, 'c2', 0, 6), row(2, 'c1', 1, 6),
        ])
        result = link_snapshots(snapshots.without_truth())
        score = score_linkage(result, snapshots.truth)
        self.assertEqual(score.true_changes, 2)
        self.assertEqual(score.inferred_changes, 0)
        self.assertLess(len(result.change_events), score.true_changes)
        self.assertEqual(score.correct_links, 0)

    def test_uneven_groups_warn(self):
        """Test leftover candidates sharing characteristics are reported, not raised"""
        schedule = BatchSchedule.single_batch(2)
        snapshots = fixture(schedule, [
            row(1, 'c1', 0, 6, program_1=1), row(1, 'c1', 1, 6, program_1=2),
            row(2, 'c1', 0, 6, program_1=3), row(2, 'c2', 1, 6, program_1=4),
        ])
        result = link_snapshots(snapshots)
        self.assertTrue(result.warnings)
        self.assertEqual(result.warnings[0].university, 'c1')
        self.assertIn('paired in data order', str(result.warnings[0]))
        self.assertEqual(result.new_id_count, 0)

    def test_link_key(self):
        """Test the LinkKey reads the four characteristics and optionally the programs"""
        data = {'score_with_bonus': 7, 'score_without_bonus': 5, 'gender': 1, 'ethnicity': 2,
                'program_1': 3, 'program_2': 0, 'program_3': 0, 'program_4': 0, 'program_5': 0,
                'program_6': 0, 'accept_any': 1}
        self.assertEqual(LinkKey.of(data), LinkKey(7, 5, 1, 2))
        self.assertEqual(LinkKey.of(data, with_programs=True).programs, (3, 0, 0, 0, 0, 0, 1))


class SimulatedLinkageTests(SimpleTestCase):

    def test_conservation_and_unique_ids(self):
        """Test every row gets one id and no id repeats within an hour"""
        run = simulated(seed=3)
        result = link_snapshots(run.snapshots.without_truth())
        for hour in result.hours:
            self.assertEqual(len(result.ids[hour]), len(run.snapshots.frame(hour)))
            self.assertEqual(len(np.unique(result.ids[hour])), len(result.ids[hour]))

    def test_frozen_links_exact(self):
        """Test frozen carries are always correct on simulator output"""
        for seed in range(3):
            run = simulated(seed=seed)
            score = score_linkage(link_snapshots(run.snapshots.without_truth()), run.snapshots.truth)
            self.assertGreater(score.frozen_links, 0)
            self.assertEqual(score.frozen_accuracy, 1.0)
            self.assertEqual(score.frozen_unique_accuracy, 1.0)
            self.assertTrue(score.lower_bound_holds)

    def test_prefix_consistent(self):
        """Test linking a prefix of hours keeps the same frozen carries"""
        run = simulated(seed=7)
        full = link_snapshots(run.snapshots.without_truth())
        prefix = link_snapshots(run.snapshots.up_to(7).without_truth())
        for hour in prefix.hours[:-1]:
            frozen = prefix.rules[hour] == LinkRule.FROZEN_CARRY.value
            np.testing.assert_array_equal(full.rules[hour][frozen], prefix.rules[hour][frozen])
            np.testing.assert_array_equal(full.partners[hour][frozen], prefix.partners[hour][frozen])

    def test_all_fresh_has_zero_change_recall(self):
        """Test a linkage that never links finds no change events"""
        run = simulated(seed=5)
        snapshots = run.snapshots
        offset = 0
        ids, rules, partners = {}, {}, {}
        for hour in snapshots.hours:
            count = len(snapshots.frame(hour))
            ids[hour] = np.arange(offset, offset + count)
            rules[hour] = np.full(count, LinkRule.FRESH.value, dtype=object)
            partners[hour] = np.full(count, -1)
            offset += count
        result = LinkageResult(dict(snapshots.rows), ids, rules, partners, (), offset)
        score = score_linkage(result, snapshots.truth)
        self.assertGreater(score.true_changes, 0)
        self.assertEqual(score.change_recall, 0.0)
        self.assertEqual(score.link_recall, 0.0)

    def test_perfect_linkage_under_relabeling(self):
        """Test true ids under any relabeling score perfectly"""
        run = simulated(seed=9)
        snapshots = run.snapshots
        relabel = np.random.default_rng(0).permutation(run.population.size) + 1000
        ids, rules, partners = {}, {}, {}
        for hour, next_hour in zip(snapshots.hours, snapshots.hours[1:] + (None,)):
            truth = snapshots.truth_at(hour)
            ids[hour] = relabel[truth]
            rules[hour] = np.full(len(truth), LinkRule.RULE1.value, dtype=object)
            if next_hour is None:
                partners[hour] = np.full(len(truth), -1)
            else:
                position = pd.Series(np.arange(len(snapshots.truth_at(next_hour))), index=snapshots.truth_at(next_hour))
                partners[hour] = position.reindex(truth).fillna(-1).to_numpy(dtype=np.int64)
        result = LinkageResult(dict(snapshots.rows), ids, rules, partners, (), 0)
        score = score_linkage(result, snapshots.truth)
        self.assertEqual(score.link_precision, 1.0)
        self.assertEqual(score.link_recall, 1.0)
        self.assertEqual(score.id_accuracy, 1.0)
        self.assertEqual(score.change_precision, 1.0)

    def test_truth_mismatch(self):
        """Test truth that does not cover the rows is refused"""
        run = simulated(seed=2, num_students=200)
        result = link_snapshots(run.snapshots.without_truth())
        truth = dict(run.snapshots.truth)
        truth[result.hours[0]] = truth[result.hours[0]][:-1]
        with self.assertRaises(LinkageTruthMismatch):
            score_linkage(result, truth)
        truth.pop(result.hours[0])
        with self.assertRaises(LinkageTruthMismatch):
            score_linkage(result, truth)

    def test_histogram(self):
        """Test the duplicate histogram counts LinkKeys by group size"""
        schedule = BatchSchedule.single_batch(1)
        snapshots = fixture(schedule, [row(1, 'c1', 0, 6), row(1, 'c1', 1, 6), row(1, 'c2', 2, 6)])
        self.assertEqual(link_key_histogram(snapshots.rows), {1: 1, 2: 1})

    def test_files(self):
        """Test trajectories and the truth sidecar read back into the same score"""
        run = simulated(seed=11, num_students=300)
        result = link_snapshots(run.snapshots.without_truth())
        expected = score_linkage(result, run.snapshots.truth)
        with tempfile.TemporaryDirectory() as directory:
            run.snapshots.write(os.path.join(directory, 'snapshots'), os.path.join(directory, 'truth'))
            path = write_trajectories(result, os.path.join(directory, 'trajectories.csv'))
            loaded = read_trajectories(path)
            truth = align_truth(loaded, read_truth(os.path.join(directory, 'truth')))
        self.assertEqual(loaded.change_events, result.change_events)
        self.assertEqual(loaded.new_id_count, result.new_id_count)
        self.assertEqual(score_linkage(loaded, truth).to_dict(), expected.to_dict())
