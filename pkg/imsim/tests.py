import os
import tempfile

import numpy as np
import pandas as pd
from django.test import SimpleTestCase

from core.domain import Matching
from core.exceptions import InvalidInputError
from mechanisms.tcdm import run_tcdm

from .clearinghouse import BehaviorConfig, run_clearinghouse, straightforward_applications
from .metrics import assignment_rate_table, compute_metrics, cutoff_movement_table, staggered_closing_pattern
from .population import PopulationConfig, generate_population, population_from_rows
from .schedule import BatchSchedule
from .serializers import ImsimConfigSerializer
from .snapshots import FEATURE_COLUMNS, OPEN_SEAT, SnapshotSet, clears_cutoff, rank_applicants

EXAMPLE_UNIVERSITIES = ('c1', 'c2', 'c3', 'c4')


def example_population(schedule):
    return population_from_rows(
        [4, 3, 2, 1],
        [[0, 1, 2, 3], [0, 1, 3, 2], [1, 2, 0, 3], [2, 3, 0, 1]],
        [1, 1, 1, 1],
        schedule,
        university_ids=EXAMPLE_UNIVERSITIES,
    )


def example_records(scores, placements):
    """placements: {hour: [university per true id]}"""
    rows = [
        {'hour': hour, 'university': university, 'true_id': student, 'score_with_bonus': scores[student]}
        for hour, universities in placements.items()
        for student, university in enumerate(universities)
    ]
    return pd.DataFrame(rows)


def small_config(**overrides):
    values = dict(num_students=600, num_universities=12, quota_log_mean=3.9, quota_log_sigma=0.3)
    values.update(overrides)
    return PopulationConfig(**values)


class ScheduleTests(SimpleTestCase):

    def test_default_schedule(self):
        """Test the default schedule has nine batches closing at hours 3 through 11"""
        schedule = BatchSchedule.default()
        self.assertEqual(len(schedule.batches), 9)
        self.assertEqual([b.deadline_hour for b in schedule.batches], list(range(3, 12)))
        self.assertEqual(schedule.hours, tuple(range(1, 12)))
        self.assertIsNone(schedule.batches[0].upper)
        self.assertEqual(schedule.batches[1].upper, 669)

    def test_batch_indices(self):
        """Test batch membership by score with bonus, zero below every band"""
        schedule = BatchSchedule.default()
        scores = np.array([700, 670, 669, 640, 431, 430, 429])
        np.testing.assert_array_equal(schedule.batch_indices(scores), [1, 1, 2, 2, 9, 9, 0])
        self.assertEqual(schedule.batch_of(455), 9)
        self.assertIsNone(schedule.batch_of(10))

    def test_overlapping_bands_rejected(self):
        """Test bands out of descending order are refused"""
        with self.assertRaises(InvalidInputError):
            BatchSchedule.from_bands([600, 650])

    def test_mandatory_entry_after_first_deadline_rejected(self):
        """Test a mandatory entry hour past the first deadline is refused"""
        with self.assertRaises(InvalidInputError):
            BatchSchedule.from_bands([600, 500], mandatory_entry_hour=4, first_deadline=3)

    def test_single_batch(self):
        """Test a single batch with T revision hours closes at opening + T - 1"""
        schedule = BatchSchedule.single_batch(3)
        self.assertEqual(schedule.hours, (1, 2, 3))
        self.assertEqual(schedule.last_deadline, 3)
        self.assertEqual(BatchSchedule.from_dict(schedule.to_dict()), schedule)


class PopulationTests(SimpleTestCase):

    def test_every_default_band_populated(self):
        """Test a default-sized cohort puts students in every default band"""
        schedule = BatchSchedule.default()
        population = generate_population(PopulationConfig(), schedule, seed=3)
        counts = np.bincount(population.batch, minlength=10)
        self.assertEqual(counts[0], 0)
        self.assertTrue((counts[1:] > 0).all())

    def test_seeded_population_is_reproducible(self):
        """Test the same seed gives the same cohort"""
        schedule = BatchSchedule.default()
        first = generate_population(small_config(), schedule, seed=8)
        second = generate_population(small_config(), schedule, seed=8)
        pd.testing.assert_frame_equal(first.student_frame(), second.student_frame())
        pd.testing.assert_frame_equal(first.university_frame(), second.university_frame())

    def test_common_value_limit(self):
        """Test delta = 1 gives every student the same university ordering"""
        population = generate_population(small_config(delta=1.0), BatchSchedule.default(), seed=5)
        self.assertTrue((population.preferences == population.preferences[0]).all())

    def test_quotas(self):
        """Test final quotas stretch the planned ones by the configured ratio"""
        population = generate_population(small_config(), BatchSchedule.default(), seed=5)
        expected = np.minimum(np.ceil(1.2 * population.planned_quota), 1000)
        np.testing.assert_array_equal(population.final_quota, expected.astype(np.int64))

    def test_zero_universities_rejected(self):
        """Test a config without universities is refused"""
        with self.assertRaises(InvalidInputError):
            PopulationConfig(num_universities=0)

    def test_to_instance(self):
        """Test the cohort converts to an instance in priority order"""
        population = example_population(BatchSchedule.single_batch(2))
        instance = population.to_instance()
        self.assertEqual(instance.students, ('s0', 's1', 's2', 's3'))
        self.assertEqual(instance.preferences['s2'], ('c2', 'c3', 'c1', 'c4'))


class SnapshotTests(SimpleTestCase):

    def test_rank_applicants(self):
        """Test holds and both cutoff bases at one university"""
        university = np.array([0, 0, 0, 0, -1])
        score = np.array([9, 8, 7, 6, 99])
        ranking = rank_applicants(university, score, np.arange(5), [2], [3])
        np.testing.assert_array_equal(ranking.held, [True, True, True, False, False])
        self.assertEqual(ranking.cutoff_final[0], 7)
        self.assertEqual(ranking.cutoff_planned[0], 8)
        self.assertEqual(ranking.marginal_final[0], 2)
        self.assertEqual(ranking.marginal_planned[0], 1)

    def test_rank_applicants_ties_by_id(self):
        """Test equal scores are held in tie-break order"""
        ranking = rank_applicants(np.array([0, 0]), np.array([5, 5]), np.array([1, 0]), [1], [1])
        np.testing.assert_array_equal(ranking.held, [False, True])
        self.assertEqual(ranking.cutoff_final[0], 5)
        self.assertEqual(ranking.marginal_final[0], 0)

    def test_spare_capacity_cutoff_zero(self):
        """Test a university below quota publishes cutoff 0"""
        ranking = rank_applicants(np.array([0, 1]), np.array([5, 4]), np.arange(2), [2, 1], [2, 1])
        np.testing.assert_array_equal(ranking.cutoff_final, [0, 4])
        np.testing.assert_array_equal(ranking.cutoff_planned, [0, 4])
        np.testing.assert_array_equal(ranking.marginal_final, [OPEN_SEAT, 1])

    def test_rows_in_data_order(self):
        """Test rows are grouped by university in file order, scores descending inside"""
        schedule = BatchSchedule.default()
        run = run_clearinghouse(generate_population(small_config(), schedule, seed=2), schedule, seed=2)
        for hour in run.snapshots.hours:
            frame = run.snapshots.frame(hour)
            codes = run.snapshots.university_codes(hour)
            self.assertTrue((np.diff(codes) >= 0).all())
            for _, group in frame.groupby('university'):
                self.assertTrue((np.diff(group['score_with_bonus'].to_numpy()) <= 0).all())
                np.testing.assert_array_equal(group['row'].to_numpy(), np.arange(len(group)))

    def test_one_row_per_student_per_hour(self):
        """Test no student appears twice in an hour"""
        schedule = BatchSchedule.default()
        run = run_clearinghouse(generate_population(small_config(), schedule, seed=4), schedule, seed=4)
        for hour in run.snapshots.hours:
            ids = run.snapshots.truth_at(hour)
            self.assertEqual(len(ids), len(np.unique(ids)))

    def test_files_keep_truth_apart(self):
        """Test written snapshots carry no ids and read back with the sidecar"""
        schedule = BatchSchedule.default()
        run = run_clearinghouse(
            generate_population(small_config(num_students=200), schedule, seed=6), schedule,
            BehaviorConfig(revision_prob=0.5, program_revision_prob=0.3), seed=6,
        )
        with tempfile.TemporaryDirectory() as directory:
            snapshot_dir = os.path.join(directory, 'snapshots')
            truth_dir = os.path.join(directory, 'truth')
            run.snapshots.write(snapshot_dir, truth_dir)
            with open(os.path.join(snapshot_dir, 'hour_05', 'U001.csv'), encoding='utf-8') as handle:
                text = handle.read()
            self.assertIn('# cutoff_final=', text)
            self.assertNotIn('true_id', text)

            blind = SnapshotSet.read(snapshot_dir)
            self.assertFalse(blind.has_truth)
            full = SnapshotSet.read(snapshot_dir, truth_dir)
        for hour in run.snapshots.hours:
            pd.testing.assert_frame_equal(full.frame(hour), run.snapshots.frame(hour), check_dtype=False)
            pd.testing.assert_frame_equal(full.cutoffs[hour], run.snapshots.cutoffs[hour], check_dtype=False)
            np.testing.assert_array_equal(full.truth_at(hour), run.snapshots.truth_at(hour))

    def test_missing_snapshot_directory(self):
        """Test reading a missing directory names the path"""
        with self.assertRaisesRegex(InvalidInputError, 'schedule.yaml'):
            SnapshotSet.read('/nonexistent/snapshots')

    def test_from_records_rejects_duplicates(self):
        """Test a student placed twice in one hour is refused"""
        records = pd.DataFrame([
            {'hour': 1, 'university': 'c1', 'true_id': 0, 'score_with_bonus': 5},
            {'hour': 1, 'university': 'c2', 'true_id': 0, 'score_with_bonus': 5},
        ])
        with self.assertRaises(InvalidInputError):
            SnapshotSet.from_records(BatchSchedule.single_batch(1), ('c1', 'c2'), [1, 1], records)


class ClearinghouseTests(SimpleTestCase):

    def test_reduces_to_tcdm(self):
        """Test one batch with every student revising each hour equals TCDM over 100 configs"""
        for seed in range(100):
            rng = np.random.default_rng(seed)
            count = int(rng.integers(2, 9))
            num_universities = int(rng.integers(1, 6))
            rounds = int(rng.integers(1, 5))
            scores = rng.choice(np.arange(1, 1000), size=count, replace=False)
            preferences = [rng.permutation(num_universities) for _ in range(count)]
            quotas = rng.integers(1, 3, size=num_universities)
            schedule = BatchSchedule.single_batch(rounds)
            population = population_from_rows(scores, preferences, quotas, schedule)

            run = run_clearinghouse(population, schedule, BehaviorConfig(revision_prob=1.0), seed=seed)
            expected = run_tcdm(population.to_instance(), rounds).final
            self.assertEqual(run.final, expected, f"config {seed}")

    def test_example_one_two_hours(self):
        """Test the textbook instance over two hours ends like two TCDM rounds"""
        schedule = BatchSchedule.single_batch(2)
        run = run_clearinghouse(example_population(schedule), schedule, seed=1)
        self.assertEqual(run.final.to_dict(), {'s0': 'c1', 's1': 'c2', 's2': None, 's3': 'c3'})
        np.testing.assert_array_equal(run.history[0].cutoff_final, [4, 2, 1, 0])
        np.testing.assert_array_equal(run.history[1].cutoff_final, [4, 3, 1, 0])

    def test_tied_loser_moves_on(self):
        """Test a student who loses a tie at the cutoff applies to her next choice"""
        schedule = BatchSchedule.single_batch(4)
        population = population_from_rows([500, 500], [[0, 1], [0, 1]], [1, 1], schedule)
        run = run_clearinghouse(population, schedule, BehaviorConfig(revision_prob=1.0), seed=3)
        self.assertEqual(run.final.unassigned(), ())
        self.assertEqual(run.final.to_dict(), {'s0': 'U001', 's1': 'U002'})
        np.testing.assert_array_equal(run.history[1].university, [0, 1])

    def test_ties_at_cutoff(self):
        """Test a tie at the cutoff clears it only ahead of the marginal holder"""
        preferences = np.array([[0, 1], [0, 1]])
        scores = np.array([500, 500])
        cutoffs = np.array([500, 0])
        current = np.array([0, -1])
        marginal = np.array([1, OPEN_SEAT])
        choice = straightforward_applications(
            preferences, scores, cutoffs, current, tie_breaks=np.array([2, 0]), marginal=marginal
        )
        np.testing.assert_array_equal(choice, [1, 0])
        np.testing.assert_array_equal(straightforward_applications(preferences, scores, cutoffs, current), [0, 0])
        self.assertTrue(clears_cutoff(7, 0, 0, OPEN_SEAT))
        self.assertFalse(clears_cutoff(6, 0, 7, OPEN_SEAT))

    def test_first_hour_uses_top_choices(self):
        """Test nothing is published before the opening hour, so everyone starts at the top"""
        schedule = BatchSchedule.default()
        population = generate_population(small_config(), schedule, seed=9)
        run = run_clearinghouse(population, schedule, BehaviorConfig(revision_prob=0.3), seed=9)
        np.testing.assert_array_equal(run.history[0].university, population.preferences[:, 0])

    def test_decisions_use_published_cutoffs(self):
        """Test each move targets the top university whose previous-hour cutoff the score meets"""
        schedule = BatchSchedule.default()
        population = generate_population(small_config(), schedule, seed=12)
        run = run_clearinghouse(population, schedule, BehaviorConfig(revision_prob=0.4), seed=12)
        for previous, state in zip(run.history, run.history[1:]):
            moved = np.flatnonzero(state.university != previous.university)
            expected = straightforward_applications(
                population.preferences[moved], population.score[moved],
                previous.cutoff_final, previous.university[moved],
                tie_breaks=moved, marginal=previous.marginal_final,
            )
            np.testing.assert_array_equal(state.university[moved], expected)
            self.assertFalse(previous.held[moved].any())

    def test_frozen_after_deadline(self):
        """Test no application changes after the student's batch deadline"""
        schedule = BatchSchedule.default()
        population = generate_population(small_config(), schedule, seed=21)
        run = run_clearinghouse(
            population, schedule, BehaviorConfig(revision_prob=0.5, program_revision_prob=0.5), seed=21
        )
        deadline = schedule.deadlines(population.batch)
        by_hour = {state.hour: state for state in run.history}
        for state in run.history:
            frozen = deadline < state.hour
            at_deadline = np.array([by_hour[d].university[i] for i, d in enumerate(deadline) if d < state.hour])
            np.testing.assert_array_equal(state.university[frozen], at_deadline)
            programs = np.array([by_hour[d].programs[i] for i, d in enumerate(deadline) if d < state.hour])
            np.testing.assert_array_equal(state.programs[frozen].reshape(programs.shape), programs)

    def test_all_frozen_snapshots_identical(self):
        """Test snapshots after the last deadline repeat the last deadline's tables"""
        schedule = BatchSchedule.from_bands([600, 0], total_hours=6)
        population = generate_population(small_config(num_students=300), schedule, seed=30)
        run = run_clearinghouse(population, schedule, BehaviorConfig(revision_prob=0.5), seed=30)
        last = schedule.last_deadline
        for hour in range(last + 1, 7):
            pd.testing.assert_frame_equal(run.snapshots.frame(hour), run.snapshots.frame(last))
            pd.testing.assert_frame_equal(run.snapshots.cutoffs[hour], run.snapshots.cutoffs[last])

    def test_deterministic(self):
        """Test the same seed reproduces every snapshot"""
        schedule = BatchSchedule.default()
        population = generate_population(small_config(), schedule, seed=14)
        behavior = BehaviorConfig(revision_prob=0.5, late_entry_prob=0.2, program_revision_prob=0.2)
        first = run_clearinghouse(population, schedule, behavior, seed=14)
        second = run_clearinghouse(population, schedule, behavior, seed=14)
        self.assertEqual(first.final, second.final)
        for hour in schedule.hours:
            pd.testing.assert_frame_equal(first.snapshots.frame(hour), second.snapshots.frame(hour))

    def test_late_entrants_void(self):
        """Test students entering after the mandatory hour never appear and stay unmatched"""
        schedule = BatchSchedule.default()
        population = generate_population(small_config(), schedule, seed=17)
        run = run_clearinghouse(population, schedule, BehaviorConfig(late_entry_prob=0.5), seed=17)
        self.assertTrue(run.void.any())
        seen = np.concatenate([run.snapshots.truth_at(h) for h in run.snapshots.hours])
        self.assertFalse(np.isin(np.flatnonzero(run.void), seen).any())
        for student in np.flatnonzero(run.void):
            self.assertIsNone(run.final.college_of(population.student_label(student)))
        self.assertEqual(run.metrics.void_count, int(run.void.sum()))

    def test_final_matching_respects_quotas(self):
        """Test no university holds more than its final quota"""
        schedule = BatchSchedule.default()
        population = generate_population(small_config(), schedule, seed=19)
        run = run_clearinghouse(population, schedule, BehaviorConfig(revision_prob=0.5), seed=19)
        quotas = dict(zip(population.university_ids, population.final_quota))
        for university, count in run.final.occupancy().items():
            self.assertLessEqual(count, quotas[university])

    def test_invalid_behavior(self):
        """Test an unknown cutoff basis and a zero revision probability are refused"""
        with self.assertRaises(InvalidInputError):
            BehaviorConfig(cutoff_basis='median')
        with self.assertRaises(InvalidInputError):
            BehaviorConfig(revision_prob=0.0)


class MetricsTests(SimpleTestCase):

    def example_fixture(self):
        schedule = BatchSchedule.single_batch(2)
        population = example_population(schedule)
        records = example_records(
            [4, 3, 2, 1], {1: ['c1', 'c1', 'c3', 'c3'], 2: ['c1', 'c2', 'c2', 'c3']}
        )
        snapshots = SnapshotSet.from_records(schedule, EXAMPLE_UNIVERSITIES, [1, 1, 1, 1], records)
        final = Matching({'s0': 'c1', 's1': 'c2', 's2': None, 's3': 'c3'})
        return snapshots, final, population

    def test_example_one_fixture(self):
        """Test the rejected student who once applied above a final cutoff is counted"""
        snapshots, final, population = self.example_fixture()
        metrics = compute_metrics(snapshots, final, population)
        self.assertEqual(metrics.unassigned_above_prior_cutoff, 1)
        self.assertEqual(metrics.unassigned_ahead_of_prior_marginal, 1)
        self.assertEqual(metrics.changed_final_round, 2)
        self.assertEqual(metrics.changed_final_round_and_rejected, 1)
        self.assertEqual(metrics.admitted_by_rank, 3)
        self.assertEqual(metrics.admitted_by_cutoff, 3)
        self.assertEqual(metrics.measure_divergence, 0)
        self.assertEqual(metrics.void_count, 0)
        self.assertEqual(list(metrics.assignment_rates[1]), [0.5, 0.75])

    def test_tied_loser_not_ahead_of_marginal(self):
        """Test a student who lost a tie at a prior cutoff is not counted ahead of the marginal"""
        schedule = BatchSchedule.single_batch(2)
        population = population_from_rows(
            [5, 5, 6], [[0, 1], [0, 1], [1, 0]], [1, 1], schedule, university_ids=('c1', 'c2')
        )
        records = example_records([5, 5, 6], {1: ['c1', 'c1', 'c2'], 2: ['c1', 'c1', 'c2']})
        snapshots = SnapshotSet.from_records(schedule, ('c1', 'c2'), [1, 1], records)
        final = Matching({'s0': 'c1', 's1': None, 's2': 'c2'})
        metrics = compute_metrics(snapshots, final, population)
        self.assertEqual(metrics.unassigned_above_prior_cutoff, 1)
        self.assertEqual(metrics.unassigned_ahead_of_prior_marginal, 0)

    def test_fixture_cutoffs(self):
        """Test the fixture publishes the hand-traced cutoffs"""
        snapshots, _, _ = self.example_fixture()
        self.assertEqual(list(snapshots.cutoffs[1]['cutoff_final']), [4, 0, 2, 0])
        self.assertEqual(list(snapshots.cutoffs[2]['cutoff_final']), [4, 3, 1, 0])

    def test_cutoff_movement_table(self):
        """Test the movement shares of a fixture whose cutoffs go both ways"""
        snapshots, _, _ = self.example_fixture()
        table = cutoff_movement_table(snapshots)
        self.assertEqual(list(table.columns), ['hour', 'up', 'down', 'same'])
        self.assertEqual(table.to_dict('records'), [{'hour': 2, 'up': 0.25, 'down': 0.25, 'same': 0.5}])

    def test_simulated_cutoffs_never_fall(self):
        """Test no simulated hour lowers a final-quota cutoff"""
        schedule = BatchSchedule.default()
        population = generate_population(small_config(), schedule, seed=41)
        behaviors = [
            BehaviorConfig(revision_prob=0.5),
            BehaviorConfig(revision_prob=0.7, late_entry_prob=0.2, program_revision_prob=0.3),
            BehaviorConfig(revision_prob=1.0, cutoff_basis='planned'),
        ]
        for behavior in behaviors:
            table = cutoff_movement_table(run_clearinghouse(population, schedule, behavior, seed=41).snapshots)
            self.assertEqual(len(table), len(schedule.hours) - 1)
            self.assertEqual(table['down'].max(), 0.0, behavior)
            np.testing.assert_allclose(table[['up', 'down', 'same']].sum(axis=1), 1.0)

    def test_everyone_assigned(self):
        """Test nobody is counted as unassigned above a prior cutoff when all are placed"""
        schedule = BatchSchedule.single_batch(3)
        population = population_from_rows([9, 8, 7, 6, 5], [[0]] * 5, [10], schedule)
        run = run_clearinghouse(population, schedule, seed=2)
        self.assertEqual(len(run.final.unassigned()), 0)
        self.assertEqual(run.metrics.unassigned_above_prior_cutoff, 0)

    def test_tie_free_measures_agree(self):
        """Test the rank and cutoff measures coincide without score ties"""
        for seed in range(20):
            rng = np.random.default_rng(seed)
            count = 30
            scores = rng.choice(np.arange(1, 10000), size=count, replace=False)
            preferences = [rng.permutation(4) for _ in range(count)]
            schedule = BatchSchedule.single_batch(3)
            population = population_from_rows(scores, preferences, rng.integers(1, 6, size=4), schedule)
            run = run_clearinghouse(population, schedule, BehaviorConfig(revision_prob=0.6), seed=seed)
            self.assertEqual(run.metrics.measure_divergence, 0)

    def test_tied_cutoff_diverges(self):
        """Test a tie at the cutoff separates the two measures"""
        schedule = BatchSchedule.single_batch(1)
        population = population_from_rows([5, 5], [[0], [0]], [1], schedule)
        run = run_clearinghouse(population, schedule, seed=0)
        self.assertEqual(run.metrics.admitted_by_rank, 1)
        self.assertEqual(run.metrics.admitted_by_cutoff, 2)
        self.assertEqual(run.metrics.measure_divergence, 1)

    def test_needs_truth(self):
        """Test metrics refuse a snapshot set without ids"""
        snapshots, final, population = self.example_fixture()
        with self.assertRaises(InvalidInputError):
            compute_metrics(snapshots.without_truth(), final, population)

    def test_counts_bounded(self):
        """Test every count stays within the population size"""
        schedule = BatchSchedule.default()
        population = generate_population(small_config(), schedule, seed=23)
        metrics = run_clearinghouse(population, schedule, BehaviorConfig(revision_prob=0.5), seed=23).metrics
        for value in metrics.to_dict().values():
            self.assertLessEqual(value, population.size)
        self.assertLessEqual(metrics.changed_final_round_and_rejected, metrics.changed_final_round)

    def test_rate_table_and_staggered_closing(self):
        """Test each batch's rate climbs into its own deadline hour"""
        schedule = BatchSchedule.default()
        config = PopulationConfig(num_students=3000, num_universities=40, quota_log_mean=4.3)
        population = generate_population(config, schedule, seed=20180620)
        run = run_clearinghouse(population, schedule, BehaviorConfig(revision_prob=0.5), seed=20180620)
        table = assignment_rate_table(run.metrics)
        self.assertEqual(list(table.columns), ['hour', 'batch', 'rate'])
        self.assertEqual(len(table), len(schedule.hours) * len(schedule.batches))
        pattern = staggered_closing_pattern(run.metrics, schedule)
        self.assertEqual(sorted(pattern), list(range(2, 10)))
        self.assertTrue(all(pattern.values()), pattern)


class ConfigSerializerTests(SimpleTestCase):

    def test_defaults(self):
        """Test a config with only the schema version takes every default"""
        serializer = ImsimConfigSerializer(data={'schema_version': 1})
        self.assertTrue(serializer.is_valid(), serializer.errors)
        config = serializer.save()
        self.assertEqual(len(config['schedule'].batches), 9)
        self.assertEqual(config['population'], PopulationConfig())
        self.assertEqual(config['behavior'].cutoff_basis, 'final')

    def test_nested_values(self):
        """Test nested sections build their domain objects"""
        serializer = ImsimConfigSerializer(data={
            'schema_version': 1,
            'seed': 4,
            'population': {'num_students': 100, 'delta': 1.0},
            'schedule': {'lower_bounds': [600, 500], 'first_deadline': 2},
            'behavior': {'revision_prob': 0.5, 'cutoff_basis': 'planned'},
        })
        self.assertTrue(serializer.is_valid(), serializer.errors)
        config = serializer.save()
        self.assertEqual(config['seed'], 4)
        self.assertEqual(config['population'].num_students, 100)
        self.assertEqual(config['schedule'].last_deadline, 3)
        self.assertEqual(config['behavior'].cutoff_basis, 'planned')

    def test_unknown_field(self):
        """Test unknown fields are rejected at every level"""
        self.assertFalse(ImsimConfigSerializer(data={'schema_version': 1, 'colour': 'red'}).is_valid())
        self.assertFalse(ImsimConfigSerializer(data={'schema_version': 1, 'behavior': {'rho': 1}}).is_valid())

    def test_schema_version(self):
        """Test a config from another schema version is refused"""
        serializer = ImsimConfigSerializer(data={'schema_version': 2})
        self.assertFalse(serializer.is_valid())
        self.assertIn('schema_version', serializer.errors)

    def test_domain_validation_surfaces(self):
        """Test domain invariants come back as serializer errors"""
        serializer = ImsimConfigSerializer(data={'schema_version': 1, 'behavior': {'revision_prob': 0}})
        self.assertFalse(serializer.is_valid())
        serializer = ImsimConfigSerializer(data={'schema_version': 1, 'schedule': {'lower_bounds': [500, 600]}})
        self.assertFalse(serializer.is_valid())

    def test_features_listed(self):
        """Test the published feature columns end with the accept-any flag"""
        self.assertEqual(FEATURE_COLUMNS[:4], ['score_with_bonus', 'score_without_bonus', 'gender', 'ethnicity'])
        self.assertEqual(FEATURE_COLUMNS[-1], 'accept_any')
