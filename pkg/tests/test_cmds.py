import csv, importlib, io, json, os, sys, tempfile
from importlib.machinery import SourceFileLoader

from pathlib import Path
from unittest import TestCase

from waelstow import capture_stdout, capture_stderr

from tests.base import data_file

# =============================================================================

def load_command(mod_name):
    test_file = Path(__file__).resolve()
    scripts = test_file.parent.parent / 'bin'
    scripts = scripts.resolve()
    filename = str(scripts / mod_name)

    # Load the file as if it were a module, under a name that does not
    # shadow the package of the same name
    mod_name = f'{mod_name}_script'
    loader = SourceFileLoader(mod_name, filename)
    spec = importlib.util.spec_from_loader(mod_name, loader)
    module = importlib.util.module_from_spec(spec)
    sys.modules[mod_name] = module
    spec.loader.exec_module(module)

    return module


def run_command(*args):
    """Runs bin/opfgap with `args`, returns (status, stdout, stderr)."""
    sys.argv = ['opfgap'] + list(args)
    opfgap = load_command('opfgap')

    with capture_stderr() as errors:
        with capture_stdout() as captured:
            status = opfgap.main()

            content = captured.getvalue()

        error_content = errors.getvalue()

    return status, content, error_content

# =============================================================================

class TestCommands(TestCase):
    def test_stats(self):
        status, content, _ = run_command('stats', '-q', data_file('case9.m'))
        self.assertEqual(0, status)
        self.assertNotIn('\x1b', content)

        lines = content.splitlines()
        self.assertEqual('general', lines[0])
        self.assertTrue(lines[3].startswith('case9'))
        self.assertTrue(lines[3].endswith('315.0'))
        self.assertIn('voltage_levels', lines)
        self.assertIn('negative_rx', lines)

    def test_bounds_csv(self):
        status, content, _ = run_command('bounds', '-q', '--format', 'csv',
            '--table', 'losses', data_file('case9.m'))
        self.assertEqual(0, status)

        rows = list(csv.reader(io.StringIO(content)))
        self.assertEqual(['case', 'DCOPF MW', 'OPF MW', 'gap %'], rows[0])
        self.assertEqual(['case9', '315.0'], rows[1][:2])
        self.assertGreater(float(rows[1][3]), 0)
        self.assertEqual(2, len(rows))

    def test_config_file(self):
        with tempfile.TemporaryDirectory() as directory:
            config = os.path.join(directory, 'config.json')
            with open(config, 'w') as f:
                json.dump({'flow_mode':'all', 'representation':'complex'}, f)

            status, content, _ = run_command('all', '-q', '--format', 'json',
                '--config', config, '--repr', 'real', '--out', directory,
                data_file('case9.m'))
            self.assertEqual(0, status)
            self.assertTrue(os.path.exists(os.path.join(directory,
                'case9.dat-s')))

        data = json.loads(content)
        limits = data['flow_limits'][0]
        self.assertTrue(all(limits[key] is not None for key in ['S MW',
            'I MW', 'none MW']))

        # the flag wins over the file
        self.assertEqual(18, data['qcqp_sizes'][0]['nVAR'])

    def test_failed_case(self):
        status, content, errors = run_command('qcqp', '-q', '--no-colour',
            data_file('malformed.m'), data_file('case3_losses.m'))
        self.assertEqual(1, status)
        self.assertIn('case3_losses', content)
        self.assertIn('malformed.m: line 6', errors)

    def test_bad_config(self):
        with tempfile.TemporaryDirectory() as directory:
            config = os.path.join(directory, 'config.json')
            with open(config, 'w') as f:
                json.dump({'colour_scheme':'dark'}, f)

            with self.assertRaises(SystemExit):
                run_command('stats', '--config', config, data_file('case9.m'))

            # a misspelled choice is rejected before any case runs
            with open(config, 'w') as f:
                json.dump({'flow_mode':'None'}, f)

            with self.assertRaises(SystemExit):
                run_command('bounds', '--config', config, data_file('case9.m'))
