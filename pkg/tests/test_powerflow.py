import numpy as np

from opfgap.matpower import PQ
from opfgap.network import build_network, build_admittance, branch_losses
from opfgap.powerflow.limits import evaluate_feasible_point, FLOW_MODES
from opfgap.powerflow.newton import (solve_powerflow, polar_jacobian,
    mismatch, scheduled_injection, bus_types, PfSolution, initial_voltage)

from tests.base import (OpfTestCase, fixture_case, published_case,
    random_case, two_bus_case, single_bus_case, PROPERTY_SEEDS)

# =============================================================================

def two_bus_voltage(y):
    """Closed form receiving end voltage of a 1 pu unity power factor load
    fed from a 1 pu source: u - |u|^2 = 1 / conj(y)."""
    w = 1 / np.conj(y)
    b = 2 * w.real - 1
    m = (-b + np.sqrt(b * b - 4 * abs(w) ** 2)) / 2
    return m + w


class TestNewton(OpfTestCase):
    def test_two_bus_oracle(self):
        for y in [1 - 10j, 2 - 20j, 0.5 - 4j]:
            net = build_network(two_bus_case(y))
            sol = solve_powerflow(net, 'flat', tol=1e-12)
            self.assertTrue(sol.converged)
            self.assertAlmostEqual(two_bus_voltage(y), sol.v[1], places=10)

            # slack supplies load plus losses
            losses = (1 - sol.v[1]) * np.conj(y * (1 - sol.v[1]))
            self.assertAlmostEqual(100 * (1 + losses.real), sol.objective,
                places=8)

    def test_flat_start_exact(self):
        net = build_network(single_bus_case(load=0))
        sol = solve_powerflow(net, 'flat')
        self.assertTrue(sol.converged)
        self.assertEqual(0, sol.iterations)
        self.assertAllClose([1.0], sol.v)

    def test_flat_start_profile(self):
        for net in [build_network(fixture_case('case9')),
                build_network(random_case(5))]:
            v = initial_voltage(net, 'flat')
            self.assertAllClose(np.zeros(net.n_bus), np.angle(v))

            # 1 pu everywhere except the generator setpoints
            controlled = net.gen_bus[net.bus_types[net.gen_bus] != PQ]
            expected = np.ones(net.n_bus)
            expected[controlled] = [net.vg[net.gen_bus == bus][-1] for bus in
                controlled]
            self.assertAllClose(expected, np.abs(v))

            first = solve_powerflow(net, 'flat')
            second = solve_powerflow(net, v)
            self.assertTrue(first.converged)
            self.assertAllClose(first.v, second.v)
            self.assertEqual(first.iterations, second.iterations)

        with self.assertRaises(ValueError):
            initial_voltage(net, 'warm')

    def test_case9(self):
        net = build_network(fixture_case('case9'))
        sol = solve_powerflow(net, 'case')
        self.assertTrue(sol.converged)
        self.assertLessEqual(sol.max_mismatch, 1e-8)
        self.assertEqual('ok', sol.quality)

        # setpoints held at PV and reference buses
        self.assertAllClose([1.04, 1.025, 1.025], np.abs(sol.v[:3]),
            atol=1e-12)
        self.assertAllClose([1.63, 0.85], sol.pg[1:], atol=1e-8)
        self.assertAlmostEqual(71.64, sol.pg[0] * 100, delta=0.01)
        self.assertAlmostEqual(319.64, sol.objective, delta=0.01)

    def test_loss_identity(self):
        for seed in range(10):
            net = build_network(random_case(seed))
            adm = build_admittance(net)
            sol = solve_powerflow(net, 'flat', adm=adm)
            self.assertTrue(sol.converged)

            shunt = np.sum(np.abs(sol.v) ** 2 * net.gs)
            balance = sol.pg.sum() - net.pd.sum() - \
                branch_losses(adm, sol.v).sum() - shunt
            self.assertAlmostEqual(0.0, balance, places=7)

    def test_jacobian_finite_differences(self):
        step = 1e-6
        for seed in range(PROPERTY_SEEDS):
            net = build_network(random_case(seed, n_bus=3 + seed % 8))
            adm = build_admittance(net)
            pv, pq = bus_types(net)
            pvpq = np.r_[pv, pq]
            sbus = scheduled_injection(net)

            rng = np.random.RandomState(seed)
            va = rng.uniform(-0.2, 0.2, net.n_bus)
            vm = rng.uniform(0.95, 1.05, net.n_bus)

            def evaluate(x):
                a, m = va.copy(), vm.copy()
                a[pvpq] = x[:len(pvpq)]
                m[pq] = x[len(pvpq):]
                return mismatch(adm, m * np.exp(1j * a), sbus, pvpq, pq)

            x0 = np.r_[va[pvpq], vm[pq]]
            numeric = np.zeros((len(x0), len(x0)))
            for count in range(len(x0)):
                delta = np.zeros(len(x0))
                delta[count] = step
                numeric[:, count] = (evaluate(x0 + delta) -
                    evaluate(x0 - delta)) / (2 * step)

            analytic = polar_jacobian(adm, vm * np.exp(1j * va), pvpq,
                pq).toarray()
            error = np.abs(analytic - numeric).max() / np.abs(analytic).max()
            self.assertLess(error, 1e-5)

    def test_iteration_limit(self):
        net = build_network(fixture_case('case9'))
        sol = solve_powerflow(net, 'flat', max_iter=1)
        self.assertFalse(sol.converged)
        self.assertEqual('failed', sol.quality)
        self.assertIn('no convergence', sol.message)

    def test_collapse_reported(self):
        # far more load than the line can carry, Newton cannot converge
        net = build_network(two_bus_case(1 - 10j, load=2000))
        sol = solve_powerflow(net, 'flat')
        self.assertFalse(sol.converged)

    def test_bad_start(self):
        net = build_network(fixture_case('case9'))
        with self.assertRaises(ValueError):
            solve_powerflow(net, 'warm')

    def test_published_snapshot(self):
        net = build_network(published_case('case89pegase'))
        sol = solve_powerflow(net, 'case')
        self.assertTrue(sol.converged)
        self.assertLessEqual(sol.max_mismatch, 1e-8)


class TestLimits(OpfTestCase):
    def setUp(self):
        self.net = build_network(fixture_case('case9'))
        self.sol = solve_powerflow(self.net, 'case')

    def test_inside(self):
        for mode in FLOW_MODES:
            report = evaluate_feasible_point(self.net, self.sol, mode)
            self.assertTrue(report.feasible, report.violations)
            self.assertEqual(0.0, max(report.worst.values()))

    def test_voltage_violation(self):
        v = np.array(self.sol.v)
        v[4] = 1.2 * v[4] / abs(v[4])
        sol = PfSolution(v, self.sol.pg, self.sol.qg, True, 0, 100)

        report = evaluate_feasible_point(self.net, sol, 'none')
        self.assertFalse(report.feasible)
        self.assertEqual(1, len(report.violations))
        self.assertEqual('vmmax', report.violations[0].kind)
        self.assertEqual(4, report.violations[0].index)
        self.assertAlmostEqual(0.1, report.worst['vm'])

    def test_generator_and_flow(self):
        pg = np.array(self.sol.pg)
        pg[0] = 3.0
        sol = PfSolution(self.sol.v, pg, self.sol.qg, True, 0, 100)
        report = evaluate_feasible_point(self.net, sol, 'none')
        self.assertAlmostEqual(0.5, report.worst['pg'])

        # branch 5-6 carries a few tens of MVA, a 10 MVA rating is violated
        case = fixture_case('case9')
        branch = np.array(case.branch)
        branch[2, 5] = 10
        net = build_network(case.replace(branch=branch))
        sol = solve_powerflow(net, 'case')
        for mode in ('S', 'I'):
            report = evaluate_feasible_point(net, sol, mode)
            flows = [v for v in report.violations if v.kind == 'flow']
            self.assertEqual([2], [v.index for v in flows])
            self.assertGreater(report.worst['flow'], 0)

        self.assertTrue(evaluate_feasible_point(net, sol, 'none').feasible)

    def test_preconditions(self):
        sol = PfSolution(self.sol.v, self.sol.pg, self.sol.qg, False, 1, 100)
        with self.assertRaises(ValueError):
            evaluate_feasible_point(self.net, sol, 'none')

        with self.assertRaises(ValueError):
            evaluate_feasible_point(self.net, self.sol, 'X')
