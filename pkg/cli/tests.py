import contextlib
import io
import tempfile
from pathlib import Path

import numpy as np
import pandas as pd
from django.core.management import call_command
from django.core.management.base import CommandError
from django.test import SimpleTestCase

from core.exceptions import ConfigurationError
from evaluation.services import evaluate
from glm.services import fit_logistic
from nn.models import Activation
from sim.models import Column, Dataset
from sim.services import read_csv, simulate, write_csv

from .config import load_config
from .management.commands.importance import parse_groups
from .management.commands.simulate import Command as SimulateCommand
from .plots import activation_context, nice_ticks
from .reports import fmt, row_group
from .services import build_methods, holdout_split, load_model

SMALL_RUN = """\
seed: 7
sim:
  n: 300
  imbalanced_n: 1500
nn:
  epochs: 5
eval:
  replicates: 3
interpret:
  permutations: 5
  shapley_samples: 5
  shapley_rows: 20
  lime_samples: 50
"""


class CommandTestCase(SimpleTestCase):
    def setUp(self):
        directory = tempfile.TemporaryDirectory()
        self.addCleanup(directory.cleanup)
        self.tmp = Path(directory.name)

    def write(self, name, text):
        path = self.tmp / name
        path.write_text(text, encoding='utf-8')
        return path

    def call(self, name, *args, **options):
        stdout = io.StringIO()
        options.setdefault('threads', 2)
        call_command(name, *args, stdout=stdout, stderr=io.StringIO(), **options)
        return stdout.getvalue()

    def assertExitCode(self, code, name, *args, **options):
        with self.assertRaises(CommandError) as raised:
            self.call(name, *args, **options)
        self.assertEqual(raised.exception.returncode, code)
        return raised.exception


class ConfigTests(CommandTestCase):
    def test_defaults_without_file(self):
        config = load_config(environ={})
        self.assertEqual(config.section('sim')['n'], 1000)
        self.assertEqual(config.architecture(imbalanced=True).hidden, (3, 2))
        self.assertEqual(config.split().replicates, 100)
        self.assertIsNone(config.source)

    def test_file_overrides_defaults(self):
        config = load_config(self.write('run.yaml', SMALL_RUN), environ={})
        self.assertEqual(config.seed, 7)
        self.assertEqual(config.sim_config().n, 300)
        self.assertEqual(config.sim_config(imbalanced=True).n, 1500)
        self.assertEqual(config.train_config().epochs, 5)
        self.assertEqual(config.train_config().seed, 7)
        self.assertEqual(config.section('eval')['train_fraction'], 2 / 3)

    def test_environment_seed_wins(self):
        path = self.write('run.yaml', SMALL_RUN)
        self.assertEqual(load_config(path, environ={'RISKLAB_SEED': '17'}).seed, 17)
        with self.assertRaises(ConfigurationError):
            load_config(path, environ={'RISKLAB_SEED': 'seventeen'})

    def test_environment_seed_replaces_the_sim_seed(self):
        path = self.write('run.yaml', 'seed: 3\nsim:\n  n: 50\n  seed: 11\n')
        pinned = load_config(path, environ={})
        self.assertEqual((pinned.seed, pinned.sim_config().seed), (3, 11))
        config = load_config(path, environ={'RISKLAB_SEED': '17'})
        self.assertEqual((config.seed, config.sim_config().seed), (17, 17))

    def test_unknown_key_reports_line(self):
        path = self.write('run.yaml', 'sim:\n  n: 100\n  bogus: 1\n')
        with self.assertRaises(ConfigurationError) as raised:
            load_config(path, environ={})
        self.assertEqual(raised.exception.line, 3)
        self.assertIn("unknown key 'sim.bogus'", str(raised.exception))

    def test_unknown_section(self):
        with self.assertRaises(ConfigurationError) as raised:
            load_config(self.write('run.yaml', 'seed: 1\nplots:\n  dpi: 3\n'), environ={})
        self.assertEqual(raised.exception.line, 2)

    def test_nested_unknown_key(self):
        text = 'sim:\n  distributions:\n    Z1:\n      kind: normal\n      mean: 0\n'
        with self.assertRaises(ConfigurationError) as raised:
            load_config(self.write('run.yaml', text), environ={})
        self.assertEqual(raised.exception.line, 5)
        self.assertIn('sim.distributions.Z1.mean', str(raised.exception))

    def test_invalid_value_reports_field(self):
        with self.assertRaises(ConfigurationError) as raised:
            load_config(self.write('run.yaml', 'nn:\n  epochs: 0\n'), environ={})
        self.assertEqual(raised.exception.line, 2)
        self.assertIn('nn.epochs:', str(raised.exception))

    def test_broken_yaml(self):
        with self.assertRaises(ConfigurationError):
            load_config(self.write('run.yaml', 'sim: [1, 2\n'), environ={})

    def test_missing_file(self):
        with self.assertRaises(ConfigurationError):
            load_config(self.tmp / 'absent.yaml', environ={})


class SimulateCommandTests(CommandTestCase):
    def test_writes_dataset(self):
        config = self.write('run.yaml', SMALL_RUN)
        output = self.call('simulate', config=str(config), out=str(self.tmp / 'data.csv'))
        self.assertIn('n=300 d=6', output)
        data = read_csv(self.tmp / 'data.csv')
        self.assertEqual(data.n_rows, 300)
        self.assertEqual(data.columns[0].kind, 'categorical')

    def test_reruns_are_byte_identical(self):
        config = str(self.write('run.yaml', SMALL_RUN))
        self.call('simulate', config=config, out=str(self.tmp / 'first.csv'))
        self.call('simulate', config=config, out=str(self.tmp / 'second.csv'))
        self.assertEqual((self.tmp / 'first.csv').read_bytes(), (self.tmp / 'second.csv').read_bytes())

    def test_imbalanced(self):
        config = str(self.write('run.yaml', SMALL_RUN))
        self.call('simulate', config=config, out=str(self.tmp / 'rare.csv'), imbalanced=True)
        data = read_csv(self.tmp / 'rare.csv')
        self.assertEqual(data.n_rows, 1500)
        self.assertLessEqual(abs(data.positive_rate - 0.033), 0.0034)

    def test_configuration_errors_exit_with_one(self):
        config = self.write('bad.yaml', 'sim:\n  n: 0\n')
        error = self.assertExitCode(1, 'simulate', config=str(config), out=str(self.tmp / 'data.csv'))
        self.assertIn('sim.n', str(error))
        self.assertExitCode(1, 'simulate', config=str(self.tmp / 'absent.yaml'), out=str(self.tmp / 'data.csv'))
        self.assertExitCode(1, 'simulate', out=str(self.tmp / 'data.csv'), threads=0)

    def test_missing_config_prints_usage(self):
        stderr = io.StringIO()
        with self.assertRaises(CommandError) as raised:
            call_command('simulate', config=str(self.tmp / 'absent.yaml'), out=str(self.tmp / 'data.csv'),
                         threads=2, stdout=io.StringIO(), stderr=stderr)
        self.assertEqual(raised.exception.returncode, 1)
        self.assertIn('does not exist', str(raised.exception))
        self.assertIn('usage:', stderr.getvalue())
        self.assertIn('--config', stderr.getvalue())

    def test_usage_errors_exit_with_one(self):
        stderr = io.StringIO()
        command = SimulateCommand(stdout=io.StringIO(), stderr=stderr)
        with self.assertRaises(SystemExit) as raised:
            command.run_from_argv(['manage.py', 'simulate'])
        self.assertEqual(raised.exception.code, 1)
        self.assertIn('usage:', stderr.getvalue())
        self.assertIn('--out', stderr.getvalue())

    def test_help_lists_defaults(self):
        stdout = io.StringIO()
        with contextlib.redirect_stdout(stdout), self.assertRaises(SystemExit) as raised:
            SimulateCommand().run_from_argv(['manage.py', 'simulate', '--help'])
        self.assertEqual(raised.exception.code, 0)
        self.assertIn('(default:', stdout.getvalue())


class PlotCommandTests(CommandTestCase):
    def test_activation_figure(self):
        self.call('plot_activations', out=str(self.tmp / 'activations.svg'))
        text = (self.tmp / 'activations.svg').read_text(encoding='utf-8')
        self.assertEqual(text.count('<path'), 5)
        for name in ('Sigmoid', 'Hyperbolic tangent', 'ELU(a=1)', 'RELU(a=0)',
                     'SELU(a=1.6733, b=1.0507)'):
            self.assertIn(name, text)
        frame = activation_context()['frame']
        self.assertIn(f"{frame.x(0.0):.2f},{frame.y(0.5):.2f}", text)

    def test_figure_is_deterministic(self):
        self.call('plot_activations', out=str(self.tmp / 'a.svg'))
        self.call('plot_activations', out=str(self.tmp / 'b.svg'))
        self.assertEqual((self.tmp / 'a.svg').read_bytes(), (self.tmp / 'b.svg').read_bytes())

    def test_too_few_points(self):
        self.assertExitCode(1, 'plot_activations', out=str(self.tmp / 'a.svg'), points=1)

    def test_frame_covers_every_curve(self):
        frame = activation_context()['frame']
        self.assertEqual((frame.x_min, frame.x_max, frame.y_min, frame.y_max), (-4.0, 4.0, -2, 5))
        self.assertEqual(Activation('selu').label(), 'SELU(a=1.6733, b=1.0507)')

    def test_ticks(self):
        self.assertEqual(nice_ticks(-4.0, 4.0), [-4.0, -2.0, 0.0, 2.0, 4.0])
        self.assertEqual(nice_ticks(0.0, 1.0), [0.0, 0.25, 0.5, 0.75, 1.0])


class FitCommandTests(CommandTestCase):
    def setUp(self):
        super().setUp()
        self.config = str(self.write('run.yaml', SMALL_RUN))
        self.data = str(self.tmp / 'data.csv')
        self.call('simulate', config=self.config, out=self.data)

    def test_glm_outputs(self):
        out_dir = self.tmp / 'glm'
        self.call('fit_glm', config=self.config, data=self.data, out_dir=str(out_dir))
        for name in ('glm_fit.yaml', 'coefficients.csv', 'coefficients.md', 'odds_ratios.csv', 'holdout.csv'):
            self.assertTrue((out_dir / name).is_file(), name)
        self.assertEqual(read_csv(out_dir / 'holdout.csv').n_rows, 100)
        fit = load_model(out_dir / 'glm_fit.yaml')
        self.assertEqual(fit.n_obs, 200)
        lines = (out_dir / 'odds_ratios.csv').read_text(encoding='utf-8').splitlines()
        self.assertEqual(lines[0], 'feature,odds_ratio,ci_low,ci_high')
        self.assertEqual(len(lines), 7)

    def test_penalized_glm_has_no_odds_ratios(self):
        out_dir = self.tmp / 'ridge'
        self.call('fit_glm', config=self.config, data=self.data, out_dir=str(out_dir), penalty='ridge', lam=1.0,
                  fit_on='full')
        self.assertFalse((out_dir / 'odds_ratios.csv').exists())
        self.assertFalse((out_dir / 'holdout.csv').exists())
        self.assertIn('(intercept)', (out_dir / 'coefficients.md').read_text(encoding='utf-8'))

    def test_missing_input_exits_with_two(self):
        self.assertExitCode(2, 'fit_glm', config=self.config, data=str(self.tmp / 'absent.csv'),
                            out_dir=str(self.tmp / 'glm'))

    def test_nn_outputs(self):
        out_dir = self.tmp / 'nn'
        self.call('fit_nn', config=self.config, data=self.data, out_dir=str(out_dir))
        model = load_model(out_dir / 'nn_model.yaml')
        self.assertEqual(model.layer_sizes, (6, 3, 2))
        history = (out_dir / 'loss_history.csv').read_text(encoding='utf-8').splitlines()
        self.assertEqual(history[0], 'epoch,loss')
        self.assertEqual(len(history), 7)


class ImportanceCommandTests(CommandTestCase):
    def setUp(self):
        super().setUp()
        self.config = str(self.write('run.yaml', SMALL_RUN))
        data = str(self.tmp / 'data.csv')
        self.call('simulate', config=self.config, out=data)
        self.out_dir = self.tmp / 'out'
        self.call('fit_glm', config=self.config, data=data, out_dir=str(self.out_dir))
        self.model = str(self.out_dir / 'glm_fit.yaml')
        self.holdout = str(self.out_dir / 'holdout.csv')

    def importance(self, method, **options):
        return self.call('importance', config=self.config, model=self.model, data=self.holdout, method=method,
                         out_dir=str(self.out_dir), **options)

    def test_permutation_report_groups_factors(self):
        self.importance('permutation', metric='p_g', permutations=4)
        text = (self.out_dir / 'importance_permutation.md').read_text(encoding='utf-8')
        self.assertIn('## Relevant factors', text)
        self.assertIn('## Irrelevant factors', text)
        self.assertLess(text.index('| X1 |'), text.index('| Z1 |'))
        self.assertTrue((self.out_dir / 'importance_permutation.svg').is_file())

    def test_grouped_permutation(self):
        self.importance('permutation', metric='p_g', permutations=3, groups='X1+X2,Z1+Z2+Z3')
        header, *rows = (self.out_dir / 'importance_permutation.csv').read_text(encoding='utf-8').splitlines()
        self.assertEqual(len(rows), 2)
        self.assertTrue(rows[0].startswith('X1+X2,'))

    def test_attributions(self):
        for method in ('lek', 'shapley', 'lime'):
            output = self.importance(method)
            self.assertIn('X2:', output)
            self.assertTrue((self.out_dir / f'importance_{method}.csv').is_file())
        self.assertTrue((self.out_dir / 'lek_X2.svg').is_file())
        self.assertFalse((self.out_dir / 'lek_X1.svg').exists())

    def test_garson_needs_a_network(self):
        self.assertExitCode(1, 'importance', config=self.config, model=self.model, data=self.holdout,
                            method='garson', out_dir=str(self.out_dir))

    def test_garson_needs_one_hidden_layer(self):
        data = str(self.tmp / 'data.csv')
        nn_dir = self.tmp / 'nn'
        self.call('fit_nn', config=self.config, data=data, out_dir=str(nn_dir), imbalanced_architecture=True)
        self.assertExitCode(1, 'importance', config=self.config, model=str(nn_dir / 'nn_model.yaml'),
                            data=str(nn_dir / 'holdout.csv'), method='garson', out_dir=str(nn_dir))

    def test_schema_mismatch(self):
        self.assertExitCode(1, 'importance', config=self.config, model=self.model, data=self.wide_csv(6),
                            method='lime', out_dir=str(self.out_dir))

    def test_shapley_width_limit(self):
        wide = self.wide_csv(16)
        wide_dir = self.tmp / 'wide'
        self.call('fit_glm', config=self.config, data=wide, out_dir=str(wide_dir), fit_on='full')
        error = self.assertExitCode(1, 'importance', config=self.config, model=str(wide_dir / 'glm_fit.yaml'),
                                    data=wide, method='shapley', out_dir=str(wide_dir))
        self.assertIn('15', str(error))

    def wide_csv(self, d):
        generator = np.random.default_rng(d)
        data = Dataset(generator.normal(size=(120, d)), tuple(Column(f'W{j + 1}') for j in range(d)),
                       generator.integers(0, 2, size=120))
        return str(write_csv(data, self.tmp / f'wide{d}.csv'))

    def test_parse_groups(self):
        self.assertEqual(parse_groups('X1+X2, Z1'), [['X1', 'X2'], ['Z1']])
        self.assertIsNone(parse_groups(''))


class EvaluateCommandTests(CommandTestCase):
    def test_tables(self):
        config = str(self.write('run.yaml', SMALL_RUN))
        data = str(self.tmp / 'data.csv')
        self.call('simulate', config=config, out=data)
        out_dir = self.tmp / 'eval'
        self.call('evaluate', config=config, data=data, out_dir=str(out_dir), methods=['GLM'], replicates=4)
        counts = (out_dir / 'counts.csv').read_text(encoding='utf-8').splitlines()
        self.assertEqual(len(counts), 5)
        self.assertIn('GLM', (out_dir / 'evaluation.md').read_text(encoding='utf-8'))
        self.assertExitCode(1, 'evaluate', config=config, data=data, out_dir=str(out_dir), methods=['SVM'])


class ReproduceTablesTests(CommandTestCase):
    def test_quick_run_is_deterministic(self):
        config = str(self.write('run.yaml', SMALL_RUN))
        names = ('simulated.csv', 'table1.csv', 'table1.md', 'table1_counts.csv', 'table2.csv', 'table2.md',
                 'table3.csv', 'table3.md', 'imbalance.csv', 'imbalance.md')
        self.call('reproduce_tables', config=config, out_dir=str(self.tmp / 'first'), quick=True, threads=1)
        self.call('reproduce_tables', config=config, out_dir=str(self.tmp / 'second'), quick=True, threads=3)
        for name in names:
            self.assertEqual((self.tmp / 'first' / name).read_bytes(), (self.tmp / 'second' / name).read_bytes(), name)
        table3 = (self.tmp / 'first' / 'table3.md').read_text(encoding='utf-8')
        self.assertIn('10 permutations', table3)

    def test_tables_match_direct_computation(self):
        path = self.write('run.yaml', SMALL_RUN)
        out_dir = self.tmp / 'tables'
        self.call('reproduce_tables', config=str(path), out_dir=str(out_dir), quick=True)

        config = load_config(path)
        data = simulate(config.sim_config())
        train_part, _ = holdout_split(data, config.section('glm')['train_fraction'], config.seed)
        fit = fit_logistic(train_part)
        table2 = pd.read_csv(out_dir / 'table2.csv')
        np.testing.assert_allclose(table2['estimate'], fit.coefficients, atol=1e-4)

        report = evaluate(data, build_methods(config, ('GLM',)), config.split(replicates=10))
        table1 = pd.read_csv(out_dir / 'table1.csv').set_index('method')
        self.assertAlmostEqual(table1.loc['GLM', 'p_g'], report.summary('GLM').p_g.mean, delta=1e-4)
        self.assertEqual(table1.loc['GLM', 'replicates'], 10)


class ReportHelperTests(SimpleTestCase):
    def test_formatting(self):
        self.assertEqual(fmt(None), '')
        self.assertEqual(fmt(float('nan')), '')
        self.assertEqual(fmt(3), '3')
        self.assertEqual(fmt(0.123456, 3), '0.123')

    def test_row_groups(self):
        self.assertEqual([row_group(name) for name in ('X2', 'Z3', 'age')], ['relevant', 'irrelevant', 'other'])
