import numpy as np
from django.test import SimpleTestCase
from hypothesis import given, settings
from hypothesis import strategies as st

from core.audit import audit_stability
from core.domain import OUTSIDE_OPTION, CutoffVector, Matching, ProblemInstance
from core.exceptions import InvalidInputError
from core.generators import random_instance, ranked_instance

from .da import run_constrained_da, run_da, serial_dictatorship
from .deviation import unilateral_deviation_check
from .registry import Mechanism, run_mechanism
from .serializers import TcdmTrajectorySerializer
from .strategy import straightforward_choice
from .tcdm import TimeConstraintEffect, minimal_convergence_t, run_tcdm, time_constraint_effects

seeds = st.integers(min_value=0, max_value=2 ** 32 - 1)


def example_one():
    return ranked_instance(
        [1, 1, 1, 1],
        [(0, 1, 2, 3), (0, 1, 3, 2), (1, 2, 0, 3), (2, 3, 0, 1)],
    )


class DeferredAcceptanceTests(SimpleTestCase):

    def test_example_one(self):
        """Test DA places every student as in the textbook run"""
        matching = run_da(example_one())
        self.assertEqual(matching.to_dict(), {'i1': 'c1', 'i2': 'c2', 'i3': 'c3', 'i4': 'c4'})

    def test_single_student_single_college(self):
        """Test a lone student gets the college only when it precedes the outside option"""
        listed = ProblemInstance.build({'a': 7}, {'x': 1}, {'a': ['x']})
        declined = ProblemInstance.build({'a': 7}, {'x': 1}, {'a': [OUTSIDE_OPTION, 'x']})
        self.assertEqual(run_da(listed).college_of('a'), 'x')
        self.assertIsNone(run_da(declined).college_of('a'))

    def test_matches_serial_dictatorship(self):
        """Test DA equals serial dictatorship on random 6x6 unit-capacity instances"""
        rng = np.random.default_rng(11)
        for _ in range(200):
            num = 6
            orders = [rng.permutation(num) for _ in range(num)]
            instance = ranked_instance([1] * num, orders)
            self.assertEqual(run_da(instance), serial_dictatorship(instance))

    @given(seeds)
    @settings(max_examples=200, deadline=None)
    def test_matches_serial_dictatorship_with_capacities(self, seed):
        """Test DA equals serial dictatorship with truncated lists and larger capacities"""
        instance = random_instance(np.random.default_rng(seed), truncate_prob=0.3)
        self.assertEqual(run_da(instance), serial_dictatorship(instance))

    def test_constrained_da_cuts_lists(self):
        """Test constrained DA with one choice leaves the second applicant to c1 out"""
        matching = run_constrained_da(example_one(), 1)
        self.assertEqual(matching.to_dict(), {'i1': 'c1', 'i2': None, 'i3': 'c2', 'i4': 'c3'})

    def test_constrained_da_rejects_zero_cap(self):
        """Test constrained DA refuses a cap below one"""
        with self.assertRaises(ValueError):
            run_constrained_da(example_one(), 0)


class StraightforwardChoiceTests(SimpleTestCase):

    def test_rejected_student_moves_down(self):
        """Test i2, rejected at c1 in round one, applies to c2"""
        cutoffs = CutoffVector({'c1': 4, 'c2': 2, 'c3': 1, 'c4': 0})
        self.assertEqual(straightforward_choice('i2', example_one(), cutoffs, None), 'c2')

    def test_held_student_stays(self):
        """Test a held student keeps applying to the holding college"""
        cutoffs = CutoffVector({'c1': 100, 'c2': 100, 'c3': 100, 'c4': 100})
        self.assertEqual(straightforward_choice('i4', example_one(), cutoffs, 'c4'), 'c4')

    def test_empty_budget_set(self):
        """Test a student priced out of every college applies nowhere"""
        cutoffs = CutoffVector({'c1': 4, 'c2': 4, 'c3': 4, 'c4': 4})
        self.assertIsNone(straightforward_choice('i4', example_one(), cutoffs, None))

    def test_zero_cutoffs_give_top_choice(self):
        """Test the first round application is the top of the list"""
        zeros = CutoffVector.zeros(['c1', 'c2', 'c3', 'c4'])
        self.assertEqual(straightforward_choice('i3', example_one(), zeros, None), 'c2')


class TcdmTests(SimpleTestCase):

    def test_example_one_two_rounds(self):
        """Test TCDM with two rounds leaves i3 unassigned"""
        trajectory = run_tcdm(example_one(), 2)
        self.assertEqual(trajectory.final.to_dict(), {'i1': 'c1', 'i2': 'c2', 'i3': None, 'i4': 'c3'})
        self.assertEqual(trajectory.rounds_used, 2)
        self.assertFalse(trajectory.converged)
        self.assertEqual(trajectory.rounds[0].rejected, ('i2',))
        self.assertEqual(trajectory.rounds[1].applications['i2'], 'c2')
        self.assertEqual(trajectory.rounds[1].cutoffs.to_dict(), {'c1': 4, 'c2': 3, 'c3': 1, 'c4': 0})

    def test_example_one_time_constraint_effects(self):
        """Test i3 suffers the direct effect and i4 gains from the indirect one"""
        instance = example_one()
        effects = time_constraint_effects(instance, run_tcdm(instance, 2), run_da(instance))
        self.assertEqual(effects['i3'], TimeConstraintEffect.DIRECT)
        self.assertEqual(effects['i4'], TimeConstraintEffect.INDIRECT)
        self.assertEqual(effects['i1'], TimeConstraintEffect.NONE)

    def test_example_two_first_choice(self):
        """Test i4 gets her first choice under TCDM and her second under DA"""
        instance = example_one()
        self.assertEqual(instance.rank_of('i4', run_tcdm(instance, 2).final.college_of('i4')), 1)
        self.assertEqual(instance.rank_of('i4', run_da(instance).college_of('i4')), 2)

    def test_single_round_shared_top_choice(self):
        """Test with one round the lower-priority of two rivals ends unassigned"""
        instance = ranked_instance([1, 1], [(0, 1), (0, 1)])
        final = run_tcdm(instance, 1).final
        self.assertEqual(final.college_of('i1'), 'c1')
        self.assertIsNone(final.college_of('i2'))

    def test_round_budget_must_be_positive(self):
        """Test a zero round budget is refused"""
        with self.assertRaises(InvalidInputError):
            run_tcdm(example_one(), 0)

    def test_minimal_convergence_example_one(self):
        """Test the textbook instance needs four simultaneous rounds"""
        instance = example_one()
        t = minimal_convergence_t(instance)
        self.assertEqual(t, 4)
        self.assertEqual(run_tcdm(instance, t).final, run_da(instance))
        self.assertNotEqual(run_tcdm(instance, t - 1).final, run_da(instance))

    def test_minimal_convergence_distinct_first_choices(self):
        """Test one round suffices when first choices do not collide"""
        instance = ranked_instance([1, 1, 1], [(0, 1, 2), (1, 0, 2), (2, 1, 0)])
        self.assertEqual(minimal_convergence_t(instance), 1)

    def test_minimal_convergence_identical_preferences(self):
        """Test identical preferences with n = m need n rounds"""
        for num in range(1, 7):
            instance = ranked_instance([1] * num, [tuple(range(num))] * num)
            self.assertEqual(minimal_convergence_t(instance), num)

    def test_deterministic(self):
        """Test identical inputs give identical serialized trajectories"""
        first = TcdmTrajectorySerializer(run_tcdm(example_one(), 3)).data
        second = TcdmTrajectorySerializer(run_tcdm(example_one(), 3)).data
        self.assertEqual(first, second)
        self.assertEqual(first['final'], {'i1': 'c1', 'i2': 'c2', 'i3': 'c3', 'i4': None})
        self.assertEqual(len(first['rounds']), 3)

    @given(seeds, st.integers(min_value=1, max_value=4))
    @settings(max_examples=200, deadline=None)
    def test_trajectory_invariants(self, seed, rounds):
        """Test cutoff monotonicity, hold persistence and the round budget"""
        instance = random_instance(np.random.default_rng(seed), truncate_prob=0.2)
        trajectory = run_tcdm(instance, rounds)
        self.assertLessEqual(trajectory.rounds_used, rounds)
        self.assertEqual(trajectory.final, trajectory.rounds[-1].tentative)

        for before, after in zip(trajectory.rounds, trajectory.rounds[1:]):
            for college in instance.colleges:
                self.assertLessEqual(before.cutoffs.of(college), after.cutoffs.of(college))
            for student in instance.students:
                held = before.tentative.college_of(student)
                if held is None:
                    continue
                self.assertEqual(after.applications[student], held)
                if after.tentative.college_of(student) != held:
                    for rival in after.tentative.assigned_to(held):
                        self.assertGreater(instance.score_of(rival), instance.score_of(student))

        for record in trajectory.rounds:
            record.tentative.check_feasible(instance)

    def test_unbounded_rounds_reach_da(self):
        """Test TCDM without a budget converges to the stable DA matching on 1000 instances"""
        rng = np.random.default_rng(2018)
        for _ in range(1000):
            instance = random_instance(rng, truncate_prob=0.2)
            trajectory = run_tcdm(instance, None)
            self.assertTrue(trajectory.converged)
            self.assertEqual(trajectory.final, run_da(instance))
            self.assertTrue(audit_stability(instance, trajectory.final).is_stable)

            t = minimal_convergence_t(instance)
            self.assertLessEqual(t, len(instance.students))
            self.assertEqual(run_tcdm(instance, t).final, run_da(instance))


class DeviationTests(SimpleTestCase):

    def test_single_round_deviation_pays(self):
        """Test with one round the lower-priority rival profits by targeting her second option"""
        instance = ranked_instance([1, 1], [(0, 1), (0, 1)])
        report = unilateral_deviation_check(instance, 'i2', rounds=1)
        self.assertTrue(report.profitable)
        self.assertIsNone(report.truthful_outcome)
        self.assertEqual(report.best_outcome, 'c2')
        self.assertTrue(report.exhaustive)
        self.assertEqual(report.orders_tried, 2)

    def test_top_priority_never_profits(self):
        """Test the top-priority student has nothing to gain"""
        for rounds in (1, 2, None):
            report = unilateral_deviation_check(example_one(), 'i1', rounds=rounds)
            self.assertFalse(report.profitable)

    def test_unbinding_rounds_no_profitable_deviation(self):
        """Test straightforward play is a best response when rounds do not bind"""
        rng = np.random.default_rng(7)
        for _ in range(25):
            instance = random_instance(rng, max_students=5, max_colleges=4)
            for student in instance.students:
                report = unilateral_deviation_check(instance, student, rounds=None)
                self.assertFalse(report.profitable, msg=f"{student} in {instance.to_dict()}")

    def test_sampled_orders_are_seeded(self):
        """Test sampled deviations are reproducible"""
        instance = example_one()
        first = unilateral_deviation_check(instance, 'i3', rounds=2, sample=5, seed=3)
        second = unilateral_deviation_check(instance, 'i3', rounds=2, sample=5, seed=3)
        self.assertEqual(first, second)
        self.assertFalse(first.exhaustive)

    def test_unknown_deviator(self):
        """Test an unknown deviator is rejected"""
        with self.assertRaises(InvalidInputError):
            unilateral_deviation_check(example_one(), 'nobody')


class RegistryTests(SimpleTestCase):

    def test_dispatch(self):
        """Test each mechanism name reaches its engine"""
        instance = example_one()
        self.assertEqual(run_mechanism(Mechanism.DA, instance), run_da(instance))
        self.assertEqual(run_mechanism('tcdm', instance, 2), run_tcdm(instance, 2).final)
        self.assertEqual(run_mechanism('cda', instance, 1), run_constrained_da(instance, 1))
        self.assertIsInstance(run_mechanism('tcdm', instance), Matching)

    def test_constrained_da_needs_cap(self):
        """Test constrained DA without a cap is refused"""
        with self.assertRaises(InvalidInputError):
            run_mechanism(Mechanism.CDA, example_one())
