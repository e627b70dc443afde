from fractions import Fraction

from django.test import SimpleTestCase
from hypothesis import given, settings
from hypothesis import strategies as st

from core.exceptions import EnumerationBudgetExceeded, InvalidInputError, PropositionViolation
from mechanisms.registry import Mechanism

from .distributions import CapacityPrefix, CorrelatedUtilityConfig, RankDistribution, is_unconstrained
from .enumeration import exact_distribution
from .montecarlo import cdf_dominates, monte_carlo_correlated, outside_sigma_band
from .propositions import cached_distribution, check_prop4, check_prop5, corollary1_threshold, expected_utility

TABLE_TCDM = {
    1: (1, 0, 0, 0, 0),
    2: (0.75, 0.25, 0, 0, 0),
    3: (0.5, 0.29, 0.12, 0, 0.09),
    4: (0.27, 0.20, 0.15, 0.09, 0.29),
}
TABLE_DA = {
    1: (1, 0, 0, 0, 0),
    2: (0.75, 0.25, 0, 0, 0),
    3: (0.5, 0.33, 0.17, 0, 0),
    4: (0.25, 0.25, 0.25, 0.25, 0),
}


def running_example(mechanism, rounds=2):
    return cached_distribution(4, (1, 1, 1, 1), rounds if mechanism is Mechanism.TCDM else None, mechanism)


class DistributionTypeTests(SimpleTestCase):

    def test_capacity_prefix(self):
        """Test capacities are sorted ascending before prefix sums"""
        prefix = CapacityPrefix.from_capacities([3, 1, 2])
        self.assertEqual(prefix.sorted_capacities, (1, 2, 3))
        self.assertEqual(prefix.prefix_sums, (1, 3, 6))
        self.assertEqual(prefix.sigma(7), 6)
        self.assertEqual(prefix.total, 6)

    def test_unit_capacities_two_rounds(self):
        """Test positions 1 and 2 are unconstrained with unit capacities and two rounds"""
        flags = [is_unconstrained(p, 2, [1, 1, 1, 1]) for p in range(1, 5)]
        self.assertEqual(flags, [True, True, False, False])

    def test_large_small_college(self):
        """Test one round leaves position 2 unconstrained only when the smallest college has two seats"""
        self.assertTrue(is_unconstrained(2, 1, [2, 2, 3]))
        self.assertFalse(is_unconstrained(2, 1, [2, 1, 1]))

    @given(st.lists(st.integers(min_value=1, max_value=5), min_size=1, max_size=6), st.integers(1, 6))
    @settings(max_examples=100, deadline=None)
    def test_top_position_always_unconstrained(self, capacities, rounds):
        """Test position 1 is never constrained"""
        self.assertTrue(is_unconstrained(1, rounds, capacities))

    def test_distribution_must_sum_to_one(self):
        """Test an exact distribution that does not sum to one is refused"""
        with self.assertRaises(InvalidInputError):
            RankDistribution(1, [Fraction(1, 2), Fraction(1, 3), 0])

    def test_delta_range(self):
        """Test the correlation weight must lie in [0, 1]"""
        with self.assertRaises(InvalidInputError):
            CorrelatedUtilityConfig(delta=1.5, num_sims=10, seed=1)
        with self.assertRaises(InvalidInputError):
            CorrelatedUtilityConfig(delta=0.5, num_sims=0, seed=1)


class ExactDistributionTests(SimpleTestCase):

    def test_running_example_table(self):
        """Test the four-student running example matches the published two-decimal table"""
        for mechanism, table in ((Mechanism.TCDM, TABLE_TCDM), (Mechanism.DA, TABLE_DA)):
            for dist in running_example(mechanism):
                for got, expected in zip(dist.as_floats(), table[dist.position]):
                    self.assertAlmostEqual(got, expected, delta=0.005, msg=f"{mechanism} position {dist.position}")

    def test_exact_rows(self):
        """Test the rows known in closed form are exact"""
        quarter = Fraction(1, 4)
        self.assertEqual(running_example(Mechanism.DA)[3].probs, (quarter, quarter, quarter, quarter, 0))
        self.assertEqual(running_example(Mechanism.DA)[1].probs, (Fraction(3, 4), quarter, 0, 0, 0))
        self.assertEqual(running_example(Mechanism.TCDM)[1].probs, (Fraction(3, 4), quarter, 0, 0, 0))
        for mechanism in (Mechanism.TCDM, Mechanism.DA):
            self.assertEqual(running_example(mechanism)[0].probs, (1, 0, 0, 0, 0))

    def test_sums_exactly_one(self):
        """Test every exact distribution sums to exactly one"""
        for dist in running_example(Mechanism.TCDM) + running_example(Mechanism.DA):
            self.assertTrue(dist.is_exact)
            self.assertEqual(sum(dist.probs), 1)
            self.assertTrue(all(p >= 0 for p in dist.probs))

    def test_lowest_position_uniform_under_da(self):
        """Test the lowest of n positions is uniform over ranks under DA with n unit colleges"""
        for num in (2, 3):
            last = exact_distribution(num, [1] * num, mechanism=Mechanism.DA)[-1]
            self.assertEqual(last.probs, tuple([Fraction(1, num)] * num) + (0,))

    def test_full_profiles_agree(self):
        """Test enumerating lower-priority students too changes nothing"""
        for rounds in (1, 2):
            short = exact_distribution(3, [1, 1, 1], rounds)
            full = exact_distribution(3, [1, 1, 1], rounds, full_profiles=True)
            self.assertEqual([d.probs for d in short], [d.probs for d in full])

    def test_target_order_symmetry(self):
        """Test the fixed order of the target does not matter"""
        for mechanism, rounds in ((Mechanism.TCDM, 1), (Mechanism.TCDM, 2), (Mechanism.DA, None)):
            identity = exact_distribution(3, [1, 1, 1], rounds, mechanism)
            reversed_order = exact_distribution(3, [1, 1, 1], rounds, mechanism, target_order=(2, 1, 0))
            self.assertEqual([d.probs for d in identity], [d.probs for d in reversed_order])

    def test_budget_refusal(self):
        """Test enumeration beyond the budget is refused with the required count"""
        with self.assertRaises(EnumerationBudgetExceeded) as caught:
            exact_distribution(5, [1] * 5, 2, budget=1000)
        self.assertEqual(caught.exception.required, 120 ** 4)
        self.assertEqual(caught.exception.budget, 1000)

    def test_constrained_da_single_choice(self):
        """Test constrained DA with one choice matches TCDM with one round"""
        cda = exact_distribution(3, [1, 1, 1], 1, Mechanism.CDA)
        tcdm = exact_distribution(3, [1, 1, 1], 1, Mechanism.TCDM)
        self.assertEqual([d.probs for d in cda], [d.probs for d in tcdm])


class PropositionTests(SimpleTestCase):

    def test_prop4_cases(self):
        """Test the four ex-ante clauses on every required configuration"""
        cases = [(3, (1, 1, 1), 1), (4, (1, 1, 1, 1), 1), (4, (1, 1, 1, 1), 2), (4, (1, 1, 1, 1), 3), (4, (2, 1, 1), 1)]
        for num, capacities, rounds in cases:
            report = check_prop4(num, capacities, rounds)
            self.assertTrue(report.holds, msg=f"{num} {capacities} {rounds}")

    def test_prop4_margins(self):
        """Test the margins of the running example"""
        report = check_prop4(4, (1, 1, 1, 1), 2)
        third, fourth = report.positions[2], report.positions[3]
        self.assertTrue(third.constrained)
        self.assertEqual(third.first_choice_margin, 0)
        self.assertGreater(fourth.first_choice_margin, 0)
        self.assertGreater(fourth.unassigned_margin, 0)
        self.assertTrue(report.positions[1].identical)

    def test_prop4_converged_rounds(self):
        """Test enough rounds make every position identical to DA"""
        report = check_prop4(3, (1, 1, 1), 3)
        self.assertTrue(all(p.identical for p in report.positions))

    def test_violation_is_assertion(self):
        """Test violations are assertion errors carrying position and rank"""
        violation = PropositionViolation(3, 2, "example")
        self.assertIsInstance(violation, AssertionError)
        self.assertEqual((violation.position, violation.rank), (3, 2))

    def test_prop5_running_example(self):
        """Test the round-budget trends of the running example"""
        report = check_prop5(4, (1, 1, 1, 1), 4)
        self.assertTrue(report.first_choice_weakly_decreasing)
        self.assertTrue(report.lower_ranks_weakly_increasing)
        self.assertTrue(report.unassigned_weakly_decreasing)
        self.assertTrue(report.converges_to_da)
        self.assertEqual(report.flags, ())
        self.assertFalse(report.literal_first_choice_statement_holds)
        self.assertIn('decreases', report.direction_finding)

        fourth = report.trends[3]
        self.assertGreaterEqual(fourth.first_choice[1], fourth.first_choice[3])
        self.assertEqual(fourth.first_choice[3], Fraction(1, 4))
        self.assertEqual(report.trends[0].first_choice_direction, 'constant')

    def test_corollary_threshold(self):
        """Test the first-choice utility threshold against direct expected utilities"""
        tcdm, da = running_example(Mechanism.TCDM)[3], running_example(Mechanism.DA)[3]
        lower = (3, 2, 1)
        threshold = corollary1_threshold(tcdm, da, lower)
        self.assertIsInstance(threshold, Fraction)
        at = expected_utility(tcdm, (threshold,) + lower) - expected_utility(da, (threshold,) + lower)
        self.assertEqual(at, 0)
        epsilon = Fraction(1, 1000)
        self.assertGreater(expected_utility(tcdm, (threshold + epsilon,) + lower), expected_utility(da, (threshold + epsilon,) + lower))
        self.assertLess(expected_utility(tcdm, (threshold - epsilon,) + lower), expected_utility(da, (threshold - epsilon,) + lower))

    def test_corollary_threshold_edge_cases(self):
        """Test zero lower utilities give zero and equal first-choice odds give no threshold"""
        tcdm, da = running_example(Mechanism.TCDM), running_example(Mechanism.DA)
        self.assertEqual(corollary1_threshold(tcdm[3], da[3], (0, 0, 0)), 0)
        self.assertIsNone(corollary1_threshold(tcdm[2], da[2], (3, 2, 1)))


class MonteCarloTests(SimpleTestCase):

    def test_identical_preferences(self):
        """Test common preferences leave positions 3 and 4 unassigned under two-round TCDM"""
        result = monte_carlo_correlated(4, [1, 1, 1, 1], 2, CorrelatedUtilityConfig(delta=1.0, num_sims=300, seed=5))
        for dist in result.tcdm[2:]:
            self.assertEqual(dist.unassigned, 1.0)
        self.assertEqual(result.da[3].rank(4), 1.0)

    def test_independent_preferences_match_exact(self):
        """Test uncorrelated estimates fall inside the three-sigma bands of the exact values"""
        sims = 2000
        result = monte_carlo_correlated(4, [1, 1, 1, 1], 2, CorrelatedUtilityConfig(delta=0.0, num_sims=sims, seed=20180620))
        self.assertEqual(outside_sigma_band(result.tcdm, running_example(Mechanism.TCDM), sims), [])
        self.assertEqual(outside_sigma_band(result.da, running_example(Mechanism.DA), sims), [])

    def test_position_three_dominance(self):
        """Test DA's rank CDF dominates TCDM's for the third position under partial correlation"""
        for delta in (0.2, 0.4, 0.6, 0.8):
            result = monte_carlo_correlated(4, [1, 1, 1, 1], 2, CorrelatedUtilityConfig(delta=delta, num_sims=400, seed=9))
            self.assertTrue(cdf_dominates(result.da[2], result.tcdm[2], ranks=range(1, 5)), msg=str(delta))

    def test_reproducible_across_workers(self):
        """Test the worker count does not change the counts"""
        config = CorrelatedUtilityConfig(delta=0.4, num_sims=60, seed=3)
        serial = monte_carlo_correlated(4, [1, 1, 1, 1], 2, config)
        pooled = monte_carlo_correlated(4, [1, 1, 1, 1], 2, config, threads=2)
        self.assertTrue((serial.tcdm_counts == pooled.tcdm_counts).all())
        self.assertTrue((serial.da_counts == pooled.da_counts).all())

    def test_cdf_frame(self):
        """Test the CDF table ends at one for every position and mechanism"""
        result = monte_carlo_correlated(4, [1, 1, 1, 1], 2, CorrelatedUtilityConfig(delta=0.6, num_sims=50, seed=1))
        frame = result.cdf_frame()
        self.assertEqual(len(frame), 2 * 4 * 5)
        last = frame[frame['outcome'] == 'unassigned']
        self.assertTrue(((last['cumulative'] - 1).abs() < 1e-9).all())
