import contextlib
import filecmp
import json
import os
import tempfile
from io import StringIO
from unittest import mock

import pandas as pd
import yaml
from django.core.management import call_command
from django.core.management.base import CommandError
from django.test import SimpleTestCase

from core.exceptions import AcceptanceCheckFailed
from imsim.metrics import cutoff_movement_table

from . import pipeline


def write_instance(directory, payload=None):
    path = os.path.join(directory, 'instance.json')
    with open(path, 'w', encoding='utf-8') as handle:
        json.dump(payload if payload is not None else pipeline.running_example().to_dict(), handle)
    return path


def command_json(name, **options):
    stdout = StringIO()
    call_command(name, stdout=stdout, **options)
    return json.loads(stdout.getvalue())


SMALL_IMSIM_CONFIG = {
    'schema_version': 1,
    'seed': 17,
    'population': {'num_students': 400, 'num_universities': 10, 'quota_log_mean': 3.9},
    'behavior': {'revision_prob': 0.5, 'program_revision_prob': 0.2},
}


class MechanismCommandTests(SimpleTestCase):

    def test_da(self):
        """Test the da command prints the assignment and the audit"""
        with tempfile.TemporaryDirectory() as directory:
            result = command_json('da', instance=write_instance(directory), audit=True)
        self.assertEqual(result['assignment'], pipeline.RUNNING_EXAMPLE_DA)
        self.assertTrue(result['audit']['is_stable'])
        self.assertEqual(result['audit']['justified_envy_count'], 0)

    def test_constrained_da(self):
        """Test a list-length cap of one leaves the second applicant to c1 out"""
        with tempfile.TemporaryDirectory() as directory:
            result = command_json('da', instance=write_instance(directory), max_choices=1)
        self.assertIsNone(result['assignment']['i2'])

    def test_tcdm_writes_trajectory(self):
        """Test the tcdm command writes the two-round trajectory to --out"""
        with tempfile.TemporaryDirectory() as directory:
            out = os.path.join(directory, 'nested', 'trajectory.json')
            call_command('tcdm', instance=write_instance(directory), rounds=2, effects=True, out=out)
            with open(out, encoding='utf-8') as handle:
                result = json.load(handle)
        self.assertEqual(result['final'], pipeline.RUNNING_EXAMPLE_TCDM)
        self.assertEqual(len(result['rounds']), 2)
        self.assertEqual(result['effects']['i3'], 'direct')

    def test_tcdm_deviation_report(self):
        """Test the stranded student of the two-round run profits by listing c3 first"""
        with tempfile.TemporaryDirectory() as directory:
            result = command_json('tcdm', instance=write_instance(directory), rounds=2, deviation='i3')
        report = result['deviation']
        self.assertIsNone(report['truthful_outcome'])
        self.assertEqual(report['best_outcome'], 'c3')
        self.assertTrue(report['profitable'])
        self.assertTrue(report['exhaustive'])
        self.assertEqual(report['orders_tried'], 24)

    def test_tcdm_unknown_deviator(self):
        """Test a deviator missing from the instance exits with code 1"""
        with tempfile.TemporaryDirectory() as directory:
            with self.assertRaises(CommandError) as raised:
                call_command('tcdm', instance=write_instance(directory), deviation='nobody', stdout=StringIO())
        self.assertEqual(raised.exception.returncode, 1)

    def test_unknown_instance_field(self):
        """Test an instance file with an undeclared field exits with code 1"""
        payload = dict(pipeline.running_example().to_dict(), deadline=3)
        with tempfile.TemporaryDirectory() as directory:
            with self.assertRaises(CommandError) as raised:
                call_command('da', instance=write_instance(directory, payload), stdout=StringIO())
        self.assertEqual(raised.exception.returncode, 1)

    def test_invalid_round_budget(self):
        """Test a zero round budget is refused before any work"""
        with tempfile.TemporaryDirectory() as directory:
            with self.assertRaises(CommandError) as raised:
                call_command('tcdm', instance=write_instance(directory), rounds=0, stdout=StringIO())
        self.assertEqual(raised.exception.returncode, 1)

    def test_missing_instance_file(self):
        """Test a missing instance file is reported with its path"""
        with self.assertRaises(CommandError) as raised:
            call_command('da', instance='/nonexistent/instance.json', stdout=StringIO())
        self.assertEqual(raised.exception.returncode, 1)
        self.assertIn('/nonexistent/instance.json', str(raised.exception))


class ExanteCommandTests(SimpleTestCase):

    def test_distribution_table(self):
        """Test the exact DA table of the running example"""
        with tempfile.TemporaryDirectory() as directory:
            out = os.path.join(directory, 'da.csv')
            call_command('exante', n=4, caps=[1, 1, 1, 1], mechanism='da', out=out)
            frame = pd.read_csv(out, dtype={'exact': str})
        self.assertEqual(len(frame), 20)
        lowest = frame[frame['position'] == 4]
        self.assertEqual(list(lowest['exact']), ['1/4', '1/4', '1/4', '1/4', '0'])

    def test_dominance_report(self):
        """Test the ex-ante report for two rounds holds"""
        report = command_json('exante', n=4, caps=[1, 1, 1, 1], rounds=2, report='prop4')
        self.assertTrue(report['holds'])
        self.assertEqual(len(report['positions']), 4)

    def test_report_needs_rounds(self):
        """Test reports without a round budget exit with code 1"""
        with self.assertRaises(CommandError) as raised:
            call_command('exante', n=4, caps=[1, 1, 1, 1], report='prop5', stdout=StringIO())
        self.assertEqual(raised.exception.returncode, 1)

    def test_budget_exceeded(self):
        """Test an enumeration over budget exits with code 1"""
        with self.assertRaises(CommandError) as raised:
            call_command('exante', n=4, caps=[1, 1, 1, 1], rounds=2, budget=10, stdout=StringIO())
        self.assertEqual(raised.exception.returncode, 1)

    def test_monte_carlo_seeded(self):
        """Test the same seed gives the same CDF table and another seed a different one"""
        tables = []
        for seed in (5, 5, 6):
            stdout = StringIO()
            call_command('mc', n=4, caps=[1, 1, 1, 1], rounds=2, delta=[0.5], sims=200,
                         seed=seed, stdout=stdout)
            tables.append(stdout.getvalue())
        self.assertEqual(tables[0], tables[1])
        self.assertNotEqual(tables[0], tables[2])
        self.assertTrue(tables[0].startswith('delta,position,mechanism,outcome,probability,cumulative'))

    def test_command_line_flags(self):
        """Test exante takes --n and --caps, and mc takes several --delta values"""
        stdout = StringIO()
        call_command('exante', '--n', '3', '--caps', '1', '1', '1', '--mechanism', 'da', stdout=stdout)
        self.assertEqual(len(pd.read_csv(StringIO(stdout.getvalue()))), 12)

        stdout = StringIO()
        call_command('mc', '--n', '3', '--caps', '1', '1', '1', '--rounds', '1',
                     '--delta', '0.2', '0.6', '--sims', '50', '--seed', '3', stdout=stdout)
        frame = pd.read_csv(StringIO(stdout.getvalue()))
        self.assertEqual(sorted(frame['delta'].unique()), [0.2, 0.6])


class SimulationCommandTests(SimpleTestCase):

    def test_simulate_link_score(self):
        """Test imsim output feeds link, and link-score reads both back"""
        with tempfile.TemporaryDirectory() as directory:
            config = os.path.join(directory, 'imsim.yaml')
            with open(config, 'w', encoding='utf-8') as handle:
                yaml.safe_dump(SMALL_IMSIM_CONFIG, handle)
            out = os.path.join(directory, 'run')
            call_command('imsim', config=config, out=out)
            self.assertTrue(os.path.isfile(os.path.join(out, 'snapshots', 'schedule.yaml')))
            self.assertTrue(os.path.isfile(os.path.join(out, 'snapshots', 'hour_01', 'U001.csv')))
            with open(os.path.join(out, 'metrics.json'), encoding='utf-8') as handle:
                self.assertEqual(json.load(handle)['population_size'], 400)
            movement = pd.read_csv(os.path.join(out, 'cutoff_movement.csv'))
            self.assertEqual(list(movement.columns), ['hour', 'up', 'down', 'same'])
            self.assertEqual(movement['down'].max(), 0.0)

            trajectories = os.path.join(directory, 'trajectories.csv')
            call_command('link', snapshots=os.path.join(out, 'snapshots'), out=trajectories, stderr=StringIO())
            score = command_json('link_score', result=trajectories, truth=os.path.join(out, 'truth'))
        self.assertGreater(score['link_precision'], 0.9)
        self.assertEqual(score['frozen_unique_accuracy'], 1.0)
        self.assertTrue(score['lower_bound_holds'])

    def test_seed_flag_overrides_config(self):
        """Test --seed replaces the seed in the config file"""
        with tempfile.TemporaryDirectory() as directory:
            config = os.path.join(directory, 'imsim.yaml')
            with open(config, 'w', encoding='utf-8') as handle:
                yaml.safe_dump(SMALL_IMSIM_CONFIG, handle)
            for name, seed in (('a', None), ('b', 17), ('c', 18)):
                options = {} if seed is None else {'seed': seed}
                call_command('imsim', config=config, out=os.path.join(directory, name), **options)
            same = os.path.join('snapshots', 'hour_05', 'U001.csv')
            self.assertTrue(filecmp.cmp(os.path.join(directory, 'a', same), os.path.join(directory, 'b', same), shallow=False))
            self.assertFalse(filecmp.cmp(
                os.path.join(directory, 'a', 'metrics.json'), os.path.join(directory, 'c', 'metrics.json'), shallow=False
            ) and filecmp.cmp(os.path.join(directory, 'a', same), os.path.join(directory, 'c', same), shallow=False))

    def test_bad_config(self):
        """Test an unknown config field exits with code 1"""
        with tempfile.TemporaryDirectory() as directory:
            config = os.path.join(directory, 'imsim.yaml')
            with open(config, 'w', encoding='utf-8') as handle:
                yaml.safe_dump(dict(SMALL_IMSIM_CONFIG, speed=2), handle)
            with self.assertRaises(CommandError) as raised:
                call_command('imsim', config=config, out=os.path.join(directory, 'run'))
        self.assertEqual(raised.exception.returncode, 1)

    def test_link_score_mismatch(self):
        """Test scoring against truth from another run exits with code 1"""
        with tempfile.TemporaryDirectory() as directory:
            config = os.path.join(directory, 'imsim.yaml')
            with open(config, 'w', encoding='utf-8') as handle:
                yaml.safe_dump(SMALL_IMSIM_CONFIG, handle)
            call_command('imsim', config=config, out=os.path.join(directory, 'a'))
            other = dict(SMALL_IMSIM_CONFIG, population=dict(SMALL_IMSIM_CONFIG['population'], num_students=300))
            with open(config, 'w', encoding='utf-8') as handle:
                yaml.safe_dump(other, handle)
            call_command('imsim', config=config, out=os.path.join(directory, 'b'))
            trajectories = os.path.join(directory, 'trajectories.csv')
            call_command('link', snapshots=os.path.join(directory, 'a', 'snapshots'), out=trajectories, stderr=StringIO())
            with self.assertRaises(CommandError) as raised:
                call_command('link_score', result=trajectories, truth=os.path.join(directory, 'b', 'truth'),
                             stdout=StringIO())
        self.assertEqual(raised.exception.returncode, 1)


class ReproduceTests(SimpleTestCase):

    def small_bundle(self, out, seed):
        with contextlib.suppress(AcceptanceCheckFailed):
            pipeline.reproduce(out, seed=seed, monte_carlo_sims=200, linker_seeds=1,
                               random_instances=20, reduction_configs=5)

    def test_bundle_is_byte_identical(self):
        """Test two runs with one seed write identical bundles"""
        with tempfile.TemporaryDirectory() as directory:
            first, second = os.path.join(directory, 'first'), os.path.join(directory, 'second')
            self.small_bundle(first, 4)
            self.small_bundle(second, 4)
            names = [
                pipeline.RANK_TABLE, pipeline.RUNNING_EXAMPLE_FILE, pipeline.DOMINANCE_REPORT,
                pipeline.ROUND_BUDGET_REPORT, pipeline.CORRELATED_CDFS, pipeline.LINKAGE_SCORE,
                pipeline.ACCEPTANCE, os.path.join(pipeline.IMSIM_DEMO_DIR, 'metrics.json'),
                os.path.join(pipeline.IMSIM_DEMO_DIR, 'assignment_rates.csv'),
                os.path.join(pipeline.IMSIM_DEMO_DIR, 'cutoff_movement.csv'),
            ]
            match, mismatch, errors = filecmp.cmpfiles(first, second, names, shallow=False)
        self.assertEqual((mismatch, errors), ([], []))
        self.assertEqual(len(match), len(names))

    def test_seed_changes_only_simulated_files(self):
        """Test another seed changes the simulated files and keeps the exact ones"""
        with tempfile.TemporaryDirectory() as directory:
            first, second = os.path.join(directory, 'first'), os.path.join(directory, 'second')
            self.small_bundle(first, 4)
            self.small_bundle(second, 5)
            exact = [pipeline.RANK_TABLE, pipeline.RUNNING_EXAMPLE_FILE, pipeline.DOMINANCE_REPORT,
                     pipeline.ROUND_BUDGET_REPORT]
            match, _, _ = filecmp.cmpfiles(first, second, exact, shallow=False)
            self.assertEqual(sorted(match), sorted(exact))
            self.assertFalse(filecmp.cmp(
                os.path.join(first, pipeline.CORRELATED_CDFS), os.path.join(second, pipeline.CORRELATED_CDFS),
                shallow=False,
            ))

    def test_failed_check_exits_two(self):
        """Test a failing acceptance check becomes exit code 2"""
        with mock.patch('cli.management.commands.reproduce.reproduce', side_effect=AcceptanceCheckFailed(['linkage'])):
            with self.assertRaises(CommandError) as raised:
                call_command('reproduce', out='unused', stdout=StringIO())
        self.assertEqual(raised.exception.returncode, 2)
        self.assertIn('linkage', str(raised.exception))

    def test_reproduce_needs_out(self):
        """Test the bundle command refuses to run without an output directory"""
        with self.assertRaises(CommandError) as raised:
            call_command('reproduce', stdout=StringIO())
        self.assertEqual(raised.exception.returncode, 1)


class AcceptanceTests(SimpleTestCase):
    """Full-size acceptance checks at the default seed"""

    seed = 20180620

    def test_rank_table(self):
        """Test the exact running-example table matches the printed two-decimal values"""
        check = pipeline.check_rank_table(*pipeline.rank_table())
        self.assertTrue(check.passed, check.detail)

    def test_running_example(self):
        """Test the running example's TCDM and DA matchings and the rank of i4"""
        _, check = pipeline.running_example_report()
        self.assertTrue(check.passed, check.detail)

    def test_da_equivalence(self):
        """Test unbounded TCDM equals stable DA on 1000 random instances"""
        check = pipeline.check_da_equivalence(self.seed)
        self.assertEqual(check.detail['instances'], 1000)
        self.assertTrue(check.passed, check.detail)

    def test_redistribution(self):
        """Test every TCDM winner has an unassigned higher-priority witness on 1000 instances"""
        check = pipeline.check_redistribution(self.seed)
        self.assertTrue(check.passed, check.detail)
        self.assertGreater(check.detail['students_better_off'], 0)

    def test_ex_ante_reports(self):
        """Test the dominance cases and the round-budget trends"""
        _, dominance = pipeline.dominance_reports()
        report, trends = pipeline.round_budget_report()
        self.assertTrue(dominance.passed, dominance.detail)
        self.assertTrue(trends.passed, trends.detail)
        self.assertFalse(report['literal_first_choice_statement_holds'])

    def test_correlated_cdfs(self):
        """Test the three correlated-utility checks at 2000 simulations"""
        frame, checks = pipeline.correlated_cdfs(self.seed)
        self.assertEqual(sorted(frame['delta'].unique()), [0.0, 0.2, 0.4, 0.6, 0.8, 1.0])
        for check in checks:
            self.assertTrue(check.passed, f"{check.name}: {check.detail}")

    def test_clearinghouse_reduction(self):
        """Test 100 single-batch configs end where TCDM ends"""
        check = pipeline.check_reduction(self.seed)
        self.assertEqual(check.detail['configs'], 100)
        self.assertTrue(check.passed, check.detail)

    def test_linkage(self):
        """Test linkage accuracy and the change-event bound over 20 seeded cohorts"""
        summaries = pipeline.linkage_seeds(self.seed)
        self.assertEqual(len(summaries), 20)
        self.assertGreaterEqual(summaries[0]['rows'], 5000)
        check = pipeline.check_linkage(summaries)
        self.assertTrue(check.passed, check.detail)

    def test_cutoff_monotonicity(self):
        """Test the demo run's cutoffs never fall and a falling hour fails the check"""
        movement = cutoff_movement_table(pipeline.demo_run(self.seed).snapshots)
        check = pipeline.check_cutoff_monotonicity(movement)
        self.assertTrue(check.passed, check.detail)
        falling = pd.DataFrame({'hour': [2, 3], 'up': [0.5, 0.0], 'down': [0.0, 0.25], 'same': [0.5, 0.75]})
        check = pipeline.check_cutoff_monotonicity(falling)
        self.assertFalse(check.passed)
        self.assertEqual(check.detail['falling_hours'], [3])
