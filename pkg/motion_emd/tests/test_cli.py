import io
import json
import tempfile
import unittest
from pathlib import Path
from unittest.mock import MagicMock, patch

import numpy as np
import pandas as pd
from PIL import Image

from motion_emd.attention import FlowGuidedAttention
from motion_emd.cli import COMMANDS, run
from motion_emd.errors import DatasetError
from motion_emd.motion_traces import MotionTrace, write_trace_csv


class TestCliParsing(unittest.TestCase):
    """
    TestCase for argument handling and exit codes
    """

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.root = Path(self.tmp.name)

    def tearDown(self):
        self.tmp.cleanup()

    def test_unknown_flag(self):
        self.assertEqual(run(['synth', '--bogus']), 1)

    def test_missing_verb(self):
        self.assertEqual(run([]), 1)

    @patch('sys.stdout', new_callable=io.StringIO)
    def test_help(self, stdout_mock):
        """Tests that --help exits cleanly
        :param stdout_mock: StringIO collecting the help text
        """
        self.assertEqual(run(['--help']), 0)
        self.assertIn('attn-demo', stdout_mock.getvalue())

    def test_verb_help_lists_defaults(self):
        expected = {
            'synth': ['default: 300', 'default: 64', 'config key n_frames'],
            'emd': ['default: 4 (config key n_imfs)', 'default: mu_m'],
            'featurize': ['default: 4 (config key n_imfs)', 'default: 1 (config key n_workers)'],
            'train': ['default: 100 (config key epochs)', 'default: 4 (config key n_imfs)'],
            'eval': ['default: test'],
        }
        for verb in COMMANDS:
            with patch('sys.stdout', new_callable=io.StringIO) as stdout_mock:
                self.assertEqual(run([verb, '--help']), 0)
            text = ' '.join(stdout_mock.getvalue().split())
            self.assertIn('random seed (default: 0)', text)
            for fragment in expected.get(verb, []):
                self.assertIn(fragment, text)

    def test_bad_config_path(self):
        missing = self.root / 'bad_path.cfg'
        with self.assertLogs('motion_emd.cli', level='ERROR') as logs:
            self.assertEqual(run(['train', '--config', str(missing)]), 2)
        self.assertIn('bad_path.cfg', '\n'.join(logs.output))

    def test_missing_required_flag(self):
        self.assertEqual(run(['train', '--manifest', 'm.csv']), 1)

    def test_overrides_reach_the_verb(self):
        handler = MagicMock(return_value=0)
        with patch.dict(COMMANDS, {'train': handler}):
            code = run(['train', '--manifest', 'm.csv', '--out', 'model.txt', '--workers', '3',
                        '--epochs', '5', '--n-imfs', '3', '--mask', 'direction'])
        self.assertEqual(code, 0)
        args, cfg = handler.call_args[0]
        self.assertEqual(args.manifest, Path('m.csv'))
        self.assertEqual((cfg.n_workers, cfg.epochs, cfg.n_imfs), (3, 5, 3))
        self.assertEqual(cfg.mask(), ('mu_d', 'sigma_d'))

    def test_data_errors_exit_two(self):
        handler = MagicMock(side_effect=DatasetError('Clip s0_a: insufficient frames'))
        with patch.dict(COMMANDS, {'featurize': handler}):
            with self.assertLogs('motion_emd.cli', level='ERROR') as logs:
                code = run(['featurize', '--manifest', 'm.csv', '--out', 'f.csv'])
        self.assertEqual(code, 2)
        self.assertIn('insufficient frames', logs.output[0])

    def test_bad_mask_is_a_config_error(self):
        self.assertEqual(run(['featurize', '--manifest', 'm.csv', '--out', 'f.csv',
                              '--mask', 'colour']), 2)


class TestCliVerbs(unittest.TestCase):
    """
    TestCase for the emd, attn-demo and synth -> train -> eval verbs
    """

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.root = Path(self.tmp.name)

    def tearDown(self):
        self.tmp.cleanup()

    def test_emd(self):
        trace = self.root / 't.csv'
        write_trace_csv(MotionTrace(np.random.default_rng(0).normal(size=(4, 31))), trace)
        out = self.root / 'imfs.csv'
        self.assertEqual(run(['emd', '--trace', str(trace), '--n-imfs', '4',
                              '--out', str(out)]), 0)
        self.assertEqual(list(pd.read_csv(out).columns),
                         ['t', 'imf1', 'imf2', 'imf3', 'imf4', 'residual'])

    def test_emd_all_series(self):
        trace = self.root / 't.csv'
        write_trace_csv(MotionTrace(np.random.default_rng(1).normal(size=(4, 15))), trace)
        self.assertEqual(run(['emd', '--trace', str(trace), '--series', 'all',
                              '--out', str(self.root / 'imfs.csv')]), 0)
        for name in ('mu_m', 'sigma_m', 'mu_d', 'sigma_d'):
            self.assertTrue((self.root / 'imfs_{}.csv'.format(name)).is_file())

    def test_emd_trace_missing_columns(self):
        trace = self.root / 't.csv'
        trace.write_text('frame,a,b\n0,1.0,2.0\n1,1.5,2.5\n')
        with self.assertLogs('motion_emd.cli', level='ERROR') as logs:
            self.assertEqual(run(['emd', '--trace', str(trace),
                                  '--out', str(self.root / 'imfs.csv')]), 2)
        self.assertIn('lacks trace columns', logs.output[0])

    def test_emd_empty_trace(self):
        trace = self.root / 't.csv'
        trace.write_text('')
        with self.assertLogs('motion_emd.cli', level='ERROR'):
            self.assertEqual(run(['emd', '--trace', str(trace),
                                  '--out', str(self.root / 'imfs.csv')]), 2)

    def test_emd_non_numeric_trace(self):
        trace = self.root / 't.csv'
        trace.write_text('frame,mu_m,sigma_m,mu_d,sigma_d\n0,1,2,3,x\n1,1,2,3,4\n')
        with self.assertLogs('motion_emd.cli', level='ERROR'):
            self.assertEqual(run(['emd', '--trace', str(trace),
                                  '--out', str(self.root / 'imfs.csv')]), 2)

    @patch('sys.stdout', new_callable=io.StringIO)
    @patch.object(FlowGuidedAttention, 'gradient_check', return_value={'w1': 1e-6, 'w2': 3e-2})
    def test_attn_demo_failed_check(self, check_mock, stdout_mock):
        """Tests that a failed gradient check exits with 2
        :param check_mock: gradient check reporting one bad parameter
        :param stdout_mock: StringIO collecting the printed summary
        """
        with self.assertLogs('motion_emd.cli', level='ERROR'):
            code = run(['attn-demo', '--seed', '1', '--out', str(self.root / 'as.pgm')])
        self.assertEqual(code, 2)
        check_mock.assert_called_once_with(1)
        self.assertIn('FAIL', stdout_mock.getvalue())

    @patch('sys.stdout', new_callable=io.StringIO)
    def test_attn_demo(self, stdout_mock):
        """Tests the attention map file and the gradient-check summary
        :param stdout_mock: StringIO collecting the printed summary
        """
        first, second = self.root / 'as.pgm', self.root / 'again.pgm'
        self.assertEqual(run(['attn-demo', '--seed', '1', '--out', str(first)]), 0)
        self.assertEqual(run(['attn-demo', '--seed', '1', '--out', str(second)]), 0)
        with Image.open(first) as image:
            self.assertEqual((image.mode, image.size), ('L', (16, 16)))
        self.assertEqual(first.read_bytes(), second.read_bytes())
        self.assertIn('PASS', stdout_mock.getvalue())

    @patch('sys.stdout', new_callable=io.StringIO)
    def test_synth_train_eval(self, stdout_mock):
        """Tests the verbs chained over a small synthetic dataset
        :param stdout_mock: StringIO collecting the report printed by eval
        """
        data, model = self.root / 'data', self.root / 'model.txt'
        self.assertEqual(run(['synth', '--out', str(data), '--clips', '18', '--frame-size', '32',
                              '--frames', '8', '--seed', '7']), 0)
        self.assertTrue((data / 'manifest.csv').is_file())
        self.assertEqual(len(list((data / 'clips').iterdir())), 18)
        config = str(data / 'config.cfg')
        self.assertEqual(run(['train', '--config', config, '--manifest', str(data / 'manifest.csv'),
                              '--epochs', '2', '--out', str(model)]), 0)
        self.assertIn('# n_imfs = 4', model.read_text())
        self.assertEqual(len(pd.read_csv(self.root / 'model.txt.log.csv')), 2)
        self.assertEqual(run(['eval', '--config', config, '--manifest', str(data / 'manifest.csv'),
                              '--model', str(model)]), 0)
        report = json.loads(stdout_mock.getvalue())
        self.assertEqual(report['n_samples'], 6)
        self.assertEqual(len(report['confusion']), 3)


if __name__ == '__main__':
    unittest.main()
