import itertools

import numpy as np

from opfgap.bounds import (dcopf_no_flow_limits, gap_percent, unit_costs,
    case_costs, negative_resistance_count, LowerBound, InfeasibleBoundError,
    GapError, NOT_VALID)
from opfgap.matpower import CaseData, PMIN, PMAX
from opfgap.network import build_network

from tests.base import (OpfTestCase, fixture_case, published_case, _bus_row,
    _gen_row, PROPERTY_SEEDS)

# =============================================================================

def generator_case(load, limits):
    """One bus, one generator per (pmin, pmax) pair."""
    bus = [_bus_row(1, 3, pd=load)]
    gen = [_gen_row(1, pmin=pmin, pmax=pmax) for pmin, pmax in limits]
    return CaseData('gens', 100, bus, gen, np.zeros((0, 11)))


def vertex_minimum(load, pmin, pmax, costs):
    """Brute force: the optimum of a box-constrained single balance LP sits
    where all but one generator is at a bound."""
    best = None
    n = len(costs)
    for free in range(n):
        others = [count for count in range(n) if count != free]
        for corner in itertools.product([0, 1], repeat=n - 1):
            dispatch = np.zeros(n)
            for count, upper in zip(others, corner):
                dispatch[count] = pmax[count] if upper else pmin[count]

            dispatch[free] = load - dispatch.sum()
            if pmin[free] - 1e-9 <= dispatch[free] <= pmax[free] + 1e-9:
                value = costs @ dispatch
                if best is None or value < best:
                    best = value

    return best


class TestMeritOrder(OpfTestCase):
    def test_single_generator(self):
        net = build_network(generator_case(4, [(0, 10)]))
        lb = dcopf_no_flow_limits(net)
        self.assertAlmostEqual(4.0, lb.value)
        self.assertTrue(lb.valid)
        self.assertAllClose([4.0], lb.dispatch, atol=1e-9)

    def test_cheapest_first(self):
        net = build_network(generator_case(8, [(0, 5), (0, 5), (0, 5)]))
        lb = dcopf_no_flow_limits(net, [1, 2, 3])
        self.assertAllClose([5, 3, 0], lb.dispatch, atol=1e-9)
        self.assertAlmostEqual(11.0, lb.value)

        # ties keep network order
        lb = dcopf_no_flow_limits(net, [1, 1, 1])
        self.assertAllClose([5, 3, 0], lb.dispatch, atol=1e-9)

    def test_minimum_outputs(self):
        net = build_network(generator_case(8, [(2, 5), (1, 5), (0, 5)]))
        lb = dcopf_no_flow_limits(net, [3, 2, 1])
        self.assertAllClose([2, 1, 5], lb.dispatch, atol=1e-9)
        self.assertAlmostEqual(13.0, lb.value)

    def test_vertex_enumeration(self):
        for seed in range(PROPERTY_SEEDS):
            rng = np.random.RandomState(seed)
            n = rng.randint(1, 7)
            pmin = np.round(rng.uniform(0, 20, n))
            pmax = pmin + np.round(rng.uniform(1, 50, n))
            costs = np.round(rng.uniform(0, 10, n), 2)
            load = rng.uniform(pmin.sum(), pmax.sum())

            net = build_network(generator_case(load, zip(pmin, pmax)))
            lb = dcopf_no_flow_limits(net, costs)
            self.assertAlmostEqual(vertex_minimum(load, pmin, pmax, costs),
                lb.value, places=6)
            self.assertAlmostEqual(load, lb.dispatch.sum(), places=6)

    def test_case9(self):
        net = build_network(fixture_case('case9'))
        lb = dcopf_no_flow_limits(net, unit_costs(net))
        self.assertAlmostEqual(315.0, lb.value)
        self.assertTrue(lb.valid)

        lb = dcopf_no_flow_limits(net, case_costs(net))
        self.assertAllClose([10, 35, 270], lb.dispatch, atol=1e-9)
        self.assertAlmostEqual(362.0, lb.value)

    def test_negative_resistance(self):
        case = fixture_case('case5_mixed')
        net = build_network(case)
        self.assertEqual(1, negative_resistance_count(net))
        self.assertEqual(1, negative_resistance_count(net, case))

        lb = dcopf_no_flow_limits(net)
        self.assertAlmostEqual(120.0, lb.value)
        self.assertFalse(lb.valid)
        self.assertIn('negative resistance', lb.reason)

        lb = dcopf_no_flow_limits(net, case_costs(net), case)
        self.assertAlmostEqual(260.0, lb.value)
        self.assertAllClose([20, 100], lb.dispatch, atol=1e-9)

    def test_infeasible(self):
        net = build_network(generator_case(30, [(0, 10), (0, 10)]))
        with self.assertRaises(InfeasibleBoundError) as context:
            dcopf_no_flow_limits(net)
        self.assertAlmostEqual(10.0, context.exception.shortfall)

        net = build_network(generator_case(5, [(10, 20)]))
        with self.assertRaises(InfeasibleBoundError) as context:
            dcopf_no_flow_limits(net)
        self.assertAlmostEqual(-5.0, context.exception.shortfall)

    def test_clamped_pmin(self):
        case = fixture_case('case5_mixed')
        gen = np.array(case.gen)
        gen[:, PMIN] = 0
        gen[:, PMAX] = [150, 100, 50]
        net = build_network(case.replace(gen=gen))
        self.assertAlmostEqual(120.0, dcopf_no_flow_limits(net).value)


class TestGap(OpfTestCase):
    def test_gap(self):
        self.assertAlmostEqual(1.47, gap_percent(LowerBound(5733.4, True),
            5817.6), places=2)
        self.assertAlmostEqual(0.0, gap_percent(LowerBound(315, True), 315))

    def test_not_valid(self):
        lb = LowerBound(120, False, 'negative resistance')
        self.assertEqual(NOT_VALID, gap_percent(lb, 130))

    def test_errors(self):
        with self.assertRaises(GapError):
            gap_percent(LowerBound(0, True), 10)

        with self.assertRaises(GapError):
            gap_percent(LowerBound(10, True), -1)


class TestPublishedBounds(OpfTestCase):
    def test_sum_of_loads(self):
        case = published_case('case1354pegase')
        net = build_network(case)
        lb = dcopf_no_flow_limits(net, raw_case=case)
        self.assertAlmostEqual(73059.7, lb.value, delta=0.1)
