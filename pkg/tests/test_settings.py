import json, os, tempfile
from unittest import TestCase

from opfgap.ledger import run_pipeline
from opfgap.settings import (settings, load_config, merge_config,
    solver_options, ConfigError, SOLVER_KEYS, CHOICES)

# =============================================================================

class TestSettings(TestCase):
    def _write(self, directory, content):
        filename = os.path.join(directory, 'config.json')
        with open(filename, 'w') as f:
            f.write(content)

        return filename

    def test_layers(self):
        self.assertEqual(settings, merge_config())

        with tempfile.TemporaryDirectory() as directory:
            filename = self._write(directory, json.dumps({'flow_mode':'S',
                'max_iter':50}))
            self.assertEqual({'flow_mode':'S', 'max_iter':50},
                load_config(filename))

            config = merge_config({'flow_mode':'I', 'start':None}, filename)
            self.assertEqual('I', config['flow_mode'])
            self.assertEqual(50, config['max_iter'])
            self.assertEqual(settings['start'], config['start'])

        # defaults untouched
        self.assertEqual('none', settings['flow_mode'])

    def test_errors(self):
        with tempfile.TemporaryDirectory() as directory:
            with self.assertRaises(ConfigError):
                load_config(self._write(directory, '{"flow_mode": '))

            with self.assertRaises(ConfigError):
                load_config(self._write(directory, '["S"]'))

            with self.assertRaises(ConfigError):
                load_config(self._write(directory, '{"speed": 3}'))

        with self.assertRaises(ConfigError):
            merge_config({'speed':3})

        # values outside the fixed choices
        with tempfile.TemporaryDirectory() as directory:
            filename = self._write(directory, json.dumps({'flow_mode':'s'}))
            with self.assertRaises(ConfigError):
                merge_config(filename=filename)

            # a valid flag does not hide a bad file value of another key
            with self.assertRaises(ConfigError):
                merge_config({'representation':'real'}, filename)

            config = merge_config({'flow_mode':'S'}, filename)
            self.assertEqual('S', config['flow_mode'])

        for key in CHOICES:
            with self.assertRaises(ConfigError):
                merge_config({key:'polar'})

        with self.assertRaises(ConfigError):
            run_pipeline([], {'start':'warm'})

        with self.assertRaises(OSError):
            load_config('/nonexistent/config.json')

    def test_solver_options(self):
        options = solver_options({'feastol':1e-3, 'flow_mode':'S'})
        self.assertEqual(set(SOLVER_KEYS), set(options))
        self.assertEqual(1e-3, options['feastol'])
        self.assertEqual(settings['opttol'], options['opttol'])
        self.assertEqual(settings['max_iter'], solver_options()['max_iter'])
