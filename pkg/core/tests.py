import json
import os
import tempfile

import numpy as np
from django.test import SimpleTestCase, override_settings
from hypothesis import given, settings
from hypothesis import strategies as st
from rest_framework import serializers

from mechanisms.da import run_da
from mechanisms.tcdm import run_tcdm

from .audit import (
    Outcome,
    ParetoOrder,
    audit_stability,
    compute_cutoffs,
    pareto_compare,
    redistribution_violations,
    redistribution_witnesses,
    winners_and_losers,
)
from .conf import admissions_settings
from .domain import OUTSIDE_OPTION, CutoffVector, Matching, ProblemInstance
from .exceptions import InvalidInputError
from .generators import random_instance, ranked_instance
from .serializers import AuditReportSerializer, MatchingSerializer, ProblemInstanceSerializer, read_instance

seeds = st.integers(min_value=0, max_value=2 ** 32 - 1)


def running_example():
    return ranked_instance(
        [1, 1, 1, 1],
        [(0, 1, 2, 3), (0, 1, 3, 2), (1, 2, 0, 3), (2, 3, 0, 1)],
    )


def two_round_matching():
    return Matching({'i1': 'c1', 'i2': 'c2', 'i3': None, 'i4': 'c3'})


class ProblemInstanceTests(SimpleTestCase):

    def test_build_orders_by_score(self):
        """Test students are put in descending score order"""
        instance = ProblemInstance.build({'a': 3, 'b': 9, 'c': 5}, {'x': 1}, {'a': ['x'], 'b': ['x'], 'c': []})
        self.assertEqual(instance.students, ('b', 'c', 'a'))
        self.assertEqual(instance.priority_index('b'), 0)

    def test_rejects_tied_scores(self):
        """Test equal scores are refused"""
        with self.assertRaises(InvalidInputError):
            ProblemInstance.build({'a': 3, 'b': 3}, {'x': 1}, {'a': ['x'], 'b': ['x']})

    def test_rejects_unknown_college(self):
        """Test a preference list naming an unknown college is refused"""
        with self.assertRaises(InvalidInputError):
            ProblemInstance.build({'a': 3}, {'x': 1}, {'a': ['y']})

    def test_rejects_bad_capacity(self):
        """Test zero and boolean capacities are refused"""
        for capacity in (0, True):
            with self.assertRaises(InvalidInputError):
                ProblemInstance.build({'a': 3}, {'x': capacity}, {'a': ['x']})

    def test_outside_option(self):
        """Test colleges after the outside option rank below being unassigned"""
        instance = ProblemInstance.build({'a': 3}, {'x': 1, 'y': 1}, {'a': ['x', OUTSIDE_OPTION, 'y']})
        self.assertEqual(instance.acceptable('a'), ('x',))
        self.assertTrue(instance.prefers('a', None, 'y'))
        self.assertTrue(instance.prefers('a', 'x', None))
        self.assertEqual(instance.rank_of('a', 'x'), 1)
        self.assertIsNone(instance.rank_of('a', 'y'))

    def test_unlisted_college_is_worst(self):
        """Test a college missing from a list ranks below everything listed"""
        instance = ProblemInstance.build({'a': 3}, {'x': 1, 'y': 1}, {'a': ['x']})
        self.assertTrue(instance.prefers('a', None, 'y'))
        self.assertIsNone(instance.rank_of('a', 'y'))

    def test_with_preferences(self):
        """Test replacing one list leaves the rest untouched"""
        instance = running_example()
        changed = instance.with_preferences('i4', ['c4'])
        self.assertEqual(changed.acceptable('i4'), ('c4',))
        self.assertEqual(changed.acceptable('i1'), instance.acceptable('i1'))


class MatchingTests(SimpleTestCase):

    def test_over_capacity(self):
        """Test a college holding more students than seats is infeasible"""
        matching = Matching({'i1': 'c1', 'i2': 'c1', 'i3': None, 'i4': None})
        with self.assertRaises(InvalidInputError):
            matching.check_feasible(running_example())

    def test_must_cover_students(self):
        """Test a matching missing a student is infeasible"""
        with self.assertRaises(InvalidInputError):
            Matching({'i1': 'c1'}).check_feasible(running_example())

    def test_views(self):
        """Test occupancy and unassigned students"""
        matching = two_round_matching()
        self.assertEqual(matching.unassigned(), ('i3',))
        self.assertEqual(matching.occupancy()['c3'], 1)
        self.assertEqual(matching.assigned_to('c4'), ())


class CutoffTests(SimpleTestCase):

    def test_full_colleges(self):
        """Test cutoffs of the DA matching are the held scores"""
        instance = running_example()
        cutoffs = compute_cutoffs(instance, run_da(instance))
        self.assertEqual(cutoffs.to_dict(), {'c1': 4, 'c2': 3, 'c3': 2, 'c4': 1})

    def test_spare_capacity(self):
        """Test a college with a free seat has cutoff zero"""
        cutoffs = compute_cutoffs(running_example(), two_round_matching())
        self.assertEqual(cutoffs.to_dict(), {'c1': 4, 'c2': 3, 'c3': 1, 'c4': 0})

    def test_admits(self):
        """Test meeting a cutoff includes equality"""
        cutoffs = CutoffVector({'c1': 4})
        self.assertTrue(cutoffs.admits(4, 'c1'))
        self.assertFalse(cutoffs.admits(3, 'c1'))

    def test_larger_capacity(self):
        """Test the cutoff is the lowest score once every seat is taken"""
        instance = ranked_instance([2], [(0,), (0,), (0,)])
        self.assertEqual(compute_cutoffs(instance, run_da(instance)).of('c1'), 2)


class AuditTests(SimpleTestCase):

    def test_da_stable(self):
        """Test the running example's DA matching has no blocking pairs"""
        instance = running_example()
        report = audit_stability(instance, run_da(instance))
        self.assertTrue(report.is_stable)
        self.assertEqual(report.justified_envy_count, 0)

    def test_two_round_matching_unstable(self):
        """Test i3 blocks with c3 and with the empty c4 after two rounds"""
        report = audit_stability(running_example(), two_round_matching())
        self.assertFalse(report.is_stable)
        self.assertEqual(set(report.blocking_pairs), {('i3', 'c3'), ('i3', 'c4')})
        self.assertEqual(report.justified_envy_count, 1)

    def test_blocking_student(self):
        """Test a student placed beyond the outside option blocks alone"""
        instance = ProblemInstance.build({'a': 3}, {'x': 1, 'y': 1}, {'a': ['x', OUTSIDE_OPTION, 'y']})
        report = audit_stability(instance, Matching({'a': 'y'}))
        self.assertEqual(report.blocking_students, ('a',))
        self.assertIn(('a', 'x'), report.blocking_pairs)

    @given(seeds)
    @settings(max_examples=200, deadline=None)
    def test_da_always_stable(self, seed):
        """Test DA passes the audit on random instances"""
        instance = random_instance(np.random.default_rng(seed), truncate_prob=0.3)
        self.assertTrue(audit_stability(instance, run_da(instance)).is_stable)

    def test_serializer(self):
        """Test the audit report serializes with its cutoffs"""
        report = audit_stability(running_example(), two_round_matching())
        data = AuditReportSerializer(report).data
        self.assertFalse(data['is_stable'])
        self.assertEqual(data['cutoffs']['c4'], 0)
        self.assertEqual(data['blocking_students'], [])


class ComparisonTests(SimpleTestCase):

    def test_pareto_incomparable(self):
        """Test DA and two-round TCDM each favour someone in the running example"""
        instance = running_example()
        self.assertEqual(pareto_compare(instance, run_da(instance), two_round_matching()), ParetoOrder.INCOMPARABLE)

    def test_pareto_dominance(self):
        """Test removing a student's seat makes the other matching dominate"""
        instance = running_example()
        worse = Matching(dict(run_da(instance).to_dict(), i4=None))
        self.assertEqual(pareto_compare(instance, run_da(instance), worse), ParetoOrder.A_DOMINATES)
        self.assertEqual(pareto_compare(instance, worse, run_da(instance)), ParetoOrder.B_DOMINATES)
        self.assertEqual(pareto_compare(instance, worse, worse), ParetoOrder.EQUAL)

    def test_winners_and_losers(self):
        """Test i4 gains and i3 loses from the time constraint"""
        instance = running_example()
        outcomes = winners_and_losers(instance, two_round_matching(), run_da(instance))
        self.assertEqual(outcomes['i4'], Outcome.BETTER)
        self.assertEqual(outcomes['i3'], Outcome.WORSE)
        self.assertEqual(outcomes['i1'], Outcome.SAME)

    def test_redistribution_witness(self):
        """Test i4's gain is witnessed by the unassigned i3"""
        instance = running_example()
        self.assertEqual(redistribution_witnesses(instance, two_round_matching(), run_da(instance)), {'i4': 'i3'})

    def test_missing_witness_is_reported(self):
        """Test a gain without an unassigned higher-priority student is a violation"""
        instance = running_example()
        fabricated = Matching({'i1': 'c1', 'i2': 'c2', 'i3': 'c4', 'i4': 'c3'})
        self.assertEqual(redistribution_violations(instance, fabricated, run_da(instance)), ['i4'])

    @given(seeds, st.integers(min_value=1, max_value=3))
    @settings(max_examples=200, deadline=None)
    def test_gains_always_witnessed(self, seed, rounds):
        """Test every TCDM gain on random instances has a witness"""
        instance = random_instance(np.random.default_rng(seed))
        tcdm = run_tcdm(instance, rounds).final
        self.assertEqual(redistribution_violations(instance, tcdm, run_da(instance)), [])


class SerializerTests(SimpleTestCase):

    def payload(self, **changes):
        data = running_example().to_dict()
        data.update(changes)
        return data

    def test_round_trip_instance(self):
        """Test a valid payload builds the same instance"""
        serializer = ProblemInstanceSerializer(data=self.payload())
        self.assertTrue(serializer.is_valid(), serializer.errors)
        self.assertEqual(serializer.save(), running_example())

    def test_unknown_field(self):
        """Test undeclared fields are rejected"""
        serializer = ProblemInstanceSerializer(data=self.payload(deadline=3))
        self.assertFalse(serializer.is_valid())
        self.assertIn('deadline', serializer.errors)

    def test_bad_scores(self):
        """Test boolean, zero and text scores are rejected"""
        for score in (True, 0, '5'):
            students = [{'id': 'i1', 'score': score}] + running_example().to_dict()['students'][1:]
            self.assertFalse(ProblemInstanceSerializer(data=self.payload(students=students)).is_valid())

    def test_duplicate_ids(self):
        """Test duplicate college ids are rejected"""
        colleges = self.payload()['colleges'] + [{'id': 'c1', 'capacity': 1}]
        serializer = ProblemInstanceSerializer(data=self.payload(colleges=colleges))
        self.assertFalse(serializer.is_valid())
        self.assertIn('colleges', serializer.errors)

    def test_domain_errors_surface(self):
        """Test instance invariants become validation errors"""
        preferences = dict(self.payload()['preferences'], i1=['c9'])
        self.assertFalse(ProblemInstanceSerializer(data=self.payload(preferences=preferences)).is_valid())

    def test_matching_against_instance(self):
        """Test a matching over capacity is rejected in the instance's context"""
        assignment = {'i1': 'c1', 'i2': 'c1', 'i3': None, 'i4': None}
        serializer = MatchingSerializer(data={'assignment': assignment}, context={'instance': running_example()})
        self.assertFalse(serializer.is_valid())
        ok = MatchingSerializer(data={'assignment': two_round_matching().to_dict()}, context={'instance': running_example()})
        self.assertTrue(ok.is_valid(), ok.errors)
        self.assertEqual(ok.save(), two_round_matching())

    def test_read_instance(self):
        """Test instance files are read and bad JSON is a validation error"""
        with tempfile.TemporaryDirectory() as directory:
            good = os.path.join(directory, 'good.json')
            with open(good, 'w', encoding='utf-8') as handle:
                json.dump(self.payload(), handle)
            bad = os.path.join(directory, 'bad.json')
            with open(bad, 'w', encoding='utf-8') as handle:
                handle.write('{"students": [')
            self.assertEqual(read_instance(good), running_example())
            with self.assertRaises(serializers.ValidationError):
                read_instance(bad)


class SettingsTests(SimpleTestCase):

    def test_defaults(self):
        """Test the configured defaults"""
        self.assertEqual(admissions_settings.DEFAULT_SEED, 20180620)
        self.assertEqual(admissions_settings.SCHEMA_VERSION, 1)
        self.assertEqual(admissions_settings.CUTOFF_BASIS, 'final')

    def test_override(self):
        """Test overriding the settings block is picked up and undone"""
        with override_settings(ADMISSIONS={'LINKER_SEEDS': 3}):
            self.assertEqual(admissions_settings.LINKER_SEEDS, 3)
            self.assertEqual(admissions_settings.MONTE_CARLO_SIMS, 2000)
        self.assertEqual(admissions_settings.LINKER_SEEDS, 20)

    def test_unknown_setting(self):
        """Test unknown names raise AttributeError"""
        with self.assertRaises(AttributeError):
            admissions_settings.NOT_A_SETTING
