import csv, io, json, os, tempfile
from unittest import TestCase
from unittest.mock import patch

from opfgap.bounds import NOT_VALID
from opfgap.ledger import BoundLedger, run_pipeline, process_case
from opfgap.scribe import render_table, render_tables, format_cell, TABLES
from opfgap.settings import settings
from opfgap.stats import compute_stats

from tests.base import data_file

# =============================================================================

CASE9 = data_file('case9.m')
MIXED = data_file('case5_mixed.m')
MALFORMED = data_file('malformed.m')
LOSSES = data_file('case3_losses.m')


class TestPipeline(TestCase):
    def test_empty(self):
        self.assertEqual(([], [], 0), run_pipeline([]))

    def test_failure_isolated(self):
        ledgers, errors, status = run_pipeline([CASE9, MALFORMED, MIXED],
            verb='stats')
        self.assertEqual(1, status)
        self.assertEqual(['case9', 'case5_mixed'], [l.case for l in ledgers])
        self.assertEqual(1, len(errors))
        self.assertEqual(MALFORMED, errors[0][0])
        self.assertIn('line 6', errors[0][1])

        ledgers, errors, status = run_pipeline([data_file('missing.m')],
            verb='stats')
        self.assertEqual(([], 1), (ledgers, status))

    def test_bad_gencost_isolated(self):
        with open(LOSSES) as f:
            text = f.read()

        with tempfile.TemporaryDirectory() as directory:
            bad = os.path.join(directory, 'short_costs.m')
            with open(bad, 'w') as f:
                f.write(text)
                f.write('mpc.gencost = [\n    2 0 0 3 1;\n    2 0 0 3 1;\n];\n')

            ledgers, errors, status = run_pipeline([CASE9, bad, LOSSES],
                verb='stats')

        self.assertEqual(1, status)
        self.assertEqual(['case9', 'case3_losses'], [l.case for l in ledgers])
        self.assertEqual(1, len(errors))
        self.assertEqual(bad, errors[0][0])
        self.assertIn('gencost row 1', errors[0][1])

    def test_unexpected_failure_isolated(self):
        def failing(net, case):
            if case.name == 'case9':
                raise KeyError('boom')
            return compute_stats(net, case)

        with patch('opfgap.ledger.compute_stats', side_effect=failing):
            with self.assertLogs('opfgap.ledger', 'ERROR'):
                ledgers, errors, status = run_pipeline([CASE9, MIXED],
                    verb='stats')

        self.assertEqual(1, status)
        self.assertEqual(['case5_mixed'], [l.case for l in ledgers])
        self.assertEqual([(CASE9, "'boom'")], errors)

    def test_stats(self):
        ledgers, _, status = run_pipeline([MIXED], verb='stats')
        self.assertEqual(0, status)
        ledger = ledgers[0]
        self.assertEqual((5, 3, 5, 2), (ledger.n_bus, ledger.n_gen,
            ledger.n_branch, ledger.n_transformer))
        self.assertEqual(3, len(ledger.warnings))
        self.assertIsNone(ledger.dcopf_lb)
        self.assertIsNone(ledger.n_var)

    def test_bounds(self):
        config = dict(settings, flow_mode='all')
        ledger = process_case(CASE9, config, 'bounds')
        self.assertAlmostEqual(315.0, ledger.dcopf_lb)
        self.assertTrue(ledger.lb_valid)
        self.assertTrue(ledger.pf_converged)
        self.assertAlmostEqual(319.64, ledger.pf_objective, delta=0.01)

        self.assertEqual({'S', 'I', 'none'}, set(ledger.acopf))
        self.assertEqual('none', ledger.gap_flow_mode)
        self.assertLessEqual(ledger.acopf['none'], ledger.pf_objective)
        self.assertGreater(ledger.gap, 0)
        self.assertAlmostEqual(100 * (ledger.acopf['none'] - 315) / 315,
            ledger.gap)
        self.assertEqual('ok', ledger.acopf_quality['none'])

    def test_invalid_bound(self):
        ledger = process_case(MIXED, dict(settings), 'bounds')
        self.assertAlmostEqual(120.0, ledger.dcopf_lb)
        self.assertFalse(ledger.lb_valid)
        self.assertEqual(NOT_VALID, ledger.gap)

    def test_clamp(self):
        config = dict(settings, clamp_pmin=True)
        ledger = process_case(MIXED, config, 'bounds')
        self.assertAlmostEqual(120.0, ledger.dcopf_lb)

    def test_outputs(self):
        with tempfile.TemporaryDirectory() as directory:
            config = {'out':directory}
            ledgers, errors, status = run_pipeline([CASE9, MALFORMED],
                config, 'all')
            self.assertEqual(1, status)

            names = set(os.listdir(directory))
            for name in ['case9_impedance.csv', 'case9_voltage.csv',
                    'case9.qcqp', 'case9.dat-s', 'ledger.json']:
                self.assertIn(name, names)
            for name in TABLES:
                self.assertIn(f'{name}.csv', names)

            with open(os.path.join(directory, 'ledger.json')) as f:
                data = json.load(f)

            self.assertEqual(['case9'], [c['case'] for c in data['cases']])
            self.assertEqual(18, data['cases'][0]['n_var'])
            self.assertEqual(MALFORMED, data['errors'][0]['path'])

            with open(os.path.join(directory, 'case9.qcqp')) as f:
                self.assertIn('n_ineq 48', f.read())

    def test_qcqp_only(self):
        with tempfile.TemporaryDirectory() as directory:
            config = {'out':directory, 'representation':'complex'}
            ledgers, _, _ = run_pipeline([CASE9], config, 'qcqp')
            self.assertEqual(['case9.qcqp'], sorted(name for name in
                os.listdir(directory) if name.startswith('case9')))

        self.assertEqual('complex', ledgers[0].representation)
        self.assertEqual(9, ledgers[0].n_var)

    def test_deterministic(self):
        paths = [CASE9, MIXED]
        first, _, _ = run_pipeline(paths, verb='bounds')
        second, _, _ = run_pipeline(paths, {'jobs':2}, 'bounds')
        self.assertEqual([l.as_dict() for l in first],
            [l.as_dict() for l in second])

    def test_bad_verb(self):
        with self.assertRaises(ValueError):
            run_pipeline([CASE9], verb='solve')

        with self.assertRaises(AttributeError):
            BoundLedger('x', colour=True)

# =============================================================================

class TestScribe(TestCase):
    def setUp(self):
        self.ledgers = [
            BoundLedger('case9', dcopf_lb=315.0, acopf={'none':315.96},
                gap_flow_mode='none', gap=0.3047619, lb_valid=True),
            BoundLedger('case5_mixed', dcopf_lb=120.0, acopf={},
                gap_flow_mode='none', gap=NOT_VALID),
        ]

    def test_cells(self):
        self.assertEqual('315.0', format_cell(314.96, 'mw'))
        self.assertEqual('1.47', format_cell(1.4686, 'pct'))
        self.assertEqual('12', format_cell(12, 'int'))
        self.assertEqual('-', format_cell(None, 'mw', '-'))
        self.assertEqual(NOT_VALID, format_cell(NOT_VALID, 'pct'))

    def test_text(self):
        text = render_table(self.ledgers, 'losses')
        lines = text.splitlines()
        self.assertEqual('losses', lines[0])
        self.assertTrue(lines[1].startswith('case'))
        self.assertTrue(lines[3].startswith('case9 '))
        self.assertTrue(lines[3].endswith('0.30'))
        self.assertIn('316.0', lines[3])
        self.assertTrue(lines[4].endswith(NOT_VALID))
        self.assertIn(' - ', lines[4])
        self.assertNotIn('\x1b', text)

        coloured = render_table(self.ledgers, 'losses', colour=True)
        self.assertIn('\x1b', coloured)

    def test_csv(self):
        rows = list(csv.reader(io.StringIO(render_table(self.ledgers,
            'losses', 'csv'))))
        self.assertEqual(['case', 'DCOPF MW', 'OPF MW', 'gap %'], rows[0])
        self.assertEqual(['case9', '315.0', '316.0', '0.30'], rows[1])
        self.assertEqual(['case5_mixed', '120.0', '', NOT_VALID], rows[2])

    def test_json(self):
        data = json.loads(render_tables(self.ledgers, 'json', ['losses',
            'general']))
        self.assertEqual(['losses', 'general'], list(data))
        self.assertEqual(315.96, data['losses'][0]['OPF MW'])
        self.assertIsNone(data['general'][1]['buses'])

    def test_several(self):
        text = render_tables(self.ledgers, 'text', None)
        for name in TABLES:
            self.assertIn(name + '\n', text)

        self.assertEqual(render_table(self.ledgers, 'general'),
            render_tables(self.ledgers, table='general'))

    def test_errors(self):
        with self.assertRaises(ValueError):
            render_table(self.ledgers, 'sizes')

        with self.assertRaises(ValueError):
            render_table(self.ledgers, 'losses', 'xml')

        with self.assertRaises(ValueError):
            render_tables(self.ledgers, 'json', ['sizes'])
