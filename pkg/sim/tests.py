import tempfile
from dataclasses import replace
from pathlib import Path

import numpy as np
from django.test import SimpleTestCase

from core.exceptions import ConfigurationError, ConvergenceError, SchemaError

from .models import CATEGORICAL, CONTINUOUS, Column, Dataset, DistributionSpec, SimConfig
from .serializers import SimConfigSerializer
from .services import read_csv, simulate, simulate_imbalanced, write_csv


class SimulateTests(SimpleTestCase):
    def test_default_shape(self):
        data = simulate(SimConfig(seed=1))
        self.assertEqual(data.values.shape, (1000, 6))
        self.assertEqual(data.feature_names, ('X1', 'X2', 'X3', 'Z1', 'Z2', 'Z3'))
        self.assertTrue(set(np.unique(data.label)) <= {0, 1})
        self.assertEqual(data.columns[0].kind, CATEGORICAL)
        self.assertEqual(data.columns[1].kind, CONTINUOUS)
        self.assertEqual(data.provenance['intercept'], 0.0)

    def test_same_seed_same_dataset(self):
        first = simulate(SimConfig(seed=9))
        second = simulate(SimConfig(seed=9))
        np.testing.assert_array_equal(first.values, second.values)
        np.testing.assert_array_equal(first.label, second.label)
        self.assertFalse(np.array_equal(first.values, simulate(SimConfig(seed=10)).values))

    def test_first_rows_for_the_default_seed(self):
        seed = 20240601
        n = 1000
        data = simulate(SimConfig(n=n, seed=seed))

        def stream(*key):
            return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=key)))

        # feature j on stream (0, j), the logit noise on (1,), the label uniforms on (2,)
        expected = np.column_stack([
            stream(0, 0).binomial(3, 0.3, size=n),
            stream(0, 1).exponential(1.0, size=n),
            stream(0, 2).poisson(3.0, size=n),
            stream(0, 3).binomial(2, 0.5, size=n),
            stream(0, 4).normal(3.0, 1.0, size=n),
            stream(0, 5).poisson(5.0, size=n),
        ]).astype(float)
        eta = expected[:, 0] + 2.0 * expected[:, 1] - expected[:, 2] + 0.1 * stream(1).normal(size=n)
        label = stream(2).random(n) < 1.0 / (1.0 + np.exp(-eta))

        np.testing.assert_array_equal(data.values[:10], expected[:10])
        np.testing.assert_array_equal(data.label[:10], label[:10].astype(int))
        self.assertEqual(data.provenance['seed'], 20240601)

    def test_columns_use_their_own_streams(self):
        config = SimConfig(seed=4)
        changed = replace(config, x_distributions=(DistributionSpec('binomial', {'p': 0.8, 'size': 3}),)
                          + config.x_distributions[1:])
        base, other = simulate(config), simulate(changed)
        self.assertFalse(np.array_equal(base.values[:, 0], other.values[:, 0]))
        np.testing.assert_array_equal(base.values[:, 1:], other.values[:, 1:])

    def test_larger_intercept_never_removes_positives(self):
        config = SimConfig(seed=2)
        low = simulate(config.with_intercept(-1.0))
        high = simulate(config.with_intercept(1.0))
        self.assertTrue(np.all(low.label <= high.label))
        self.assertGreater(high.positive_rate, low.positive_rate)

    def test_marginals(self):
        data = simulate(SimConfig(n=20000, seed=3))
        self.assertTrue(set(np.unique(data.values[:, 0])) <= {0.0, 1.0, 2.0, 3.0})
        self.assertAlmostEqual(data.values[:, 0].mean(), 0.9, delta=0.05)
        self.assertAlmostEqual(data.values[:, 1].mean(), 1.0, delta=0.05)
        self.assertAlmostEqual(data.values[:, 2].mean(), 3.0, delta=0.08)
        self.assertAlmostEqual(data.values[:, 4].mean(), 3.0, delta=0.05)
        self.assertAlmostEqual(data.values[:, 4].std(), 1.0, delta=0.05)
        self.assertTrue(np.all(data.values[:, 1] >= 0))

    def test_invalid_sizes(self):
        with self.assertRaises(ConfigurationError):
            simulate(SimConfig(n=0))
        with self.assertRaises(ConfigurationError):
            simulate(SimConfig(noise_sd=-1.0))

    def test_noise_as_variance(self):
        self.assertAlmostEqual(SimConfig(noise_sd=0.04, noise_is_variance=True).noise_scale, 0.2)
        self.assertAlmostEqual(SimConfig(noise_sd=0.04).noise_scale, 0.04)


class ImbalancedTests(SimpleTestCase):
    def test_hits_target_rate(self):
        data = simulate_imbalanced(SimConfig(n=4356, seed=5), 0.033)
        self.assertLessEqual(abs(data.positive_rate - 0.033), 0.0033 + 1e-12)
        self.assertLess(data.provenance['intercept'], 0.0)

    def test_balanced_target_allowed(self):
        data = simulate_imbalanced(SimConfig(n=2000, seed=5), 0.5)
        self.assertAlmostEqual(data.positive_rate, 0.5, delta=0.05)

    def test_target_out_of_range(self):
        with self.assertRaises(ConfigurationError):
            simulate_imbalanced(SimConfig(seed=1), 0.6)
        with self.assertRaises(ConfigurationError):
            simulate_imbalanced(SimConfig(seed=1), 0.0)

    def test_unattainable_with_few_rows(self):
        # with five rows the rate moves in steps of 0.2
        with self.assertRaises(ConvergenceError):
            simulate_imbalanced(SimConfig(n=5, seed=1), 0.033)


class DatasetTests(SimpleTestCase):
    def test_rejects_bad_labels_and_missing_values(self):
        columns = (Column('a'),)
        with self.assertRaises(SchemaError):
            Dataset(np.zeros((2, 1)), columns, [0, 2])
        with self.assertRaises(SchemaError):
            Dataset(np.array([[np.nan], [1.0]]), columns, [0, 1])
        with self.assertRaises(SchemaError):
            Dataset(np.zeros((2, 2)), columns, [0, 1])

    def test_arrays_are_read_only(self):
        data = simulate(SimConfig(n=10, seed=1))
        with self.assertRaises(ValueError):
            data.values[0, 0] = 1.0

    def test_take_and_with_column(self):
        data = simulate(SimConfig(n=10, seed=1))
        subset = data.take([0, 2])
        np.testing.assert_array_equal(subset.values, data.values[[0, 2]])
        replaced = data.with_column(1, np.zeros(10))
        self.assertTrue(np.all(replaced.values[:, 1] == 0))
        self.assertEqual(data.column_index('Z2'), 4)
        with self.assertRaises(SchemaError):
            data.column_index('W')


class CsvTests(SimpleTestCase):
    def test_sidecar_keeps_column_kinds(self):
        data = simulate(SimConfig(n=50, seed=8))
        with tempfile.TemporaryDirectory() as directory:
            path = write_csv(data, Path(directory) / 'data.csv')
            header = path.read_text(encoding='utf-8').splitlines()[0]
            self.assertEqual(header, 'X1,X2,X3,Z1,Z2,Z3,label')
            loaded = read_csv(path)
        np.testing.assert_allclose(loaded.values, data.values)
        np.testing.assert_array_equal(loaded.label, data.label)
        self.assertEqual(loaded.columns, data.columns)

    def test_kinds_inferred_without_sidecar(self):
        with tempfile.TemporaryDirectory() as directory:
            path = Path(directory) / 'data.csv'
            path.write_text('a,b,label\n1,0.5,0\n2,1.5,1\n1,2.5,0\n', encoding='utf-8')
            loaded = read_csv(path)
        self.assertEqual(loaded.columns[0].kind, CATEGORICAL)
        self.assertEqual(loaded.columns[0].levels, (1, 2))
        self.assertEqual(loaded.columns[1].kind, CONTINUOUS)

    def test_missing_label_column(self):
        with tempfile.TemporaryDirectory() as directory:
            path = Path(directory) / 'data.csv'
            path.write_text('a,b\n1,2\n', encoding='utf-8')
            with self.assertRaises(SchemaError):
                read_csv(path)


class SerializerTests(SimpleTestCase):
    def test_overrides_distribution(self):
        serializer = SimConfigSerializer(data={
            'n': 20, 'noise_sd': 0.1, 'distributions': {'Z2': {'kind': 'normal', 'mu': 0.0, 'sd': 2.0}},
        })
        self.assertTrue(serializer.is_valid(), serializer.errors)
        config = serializer.save()
        self.assertEqual(config.distributions[4], DistributionSpec('normal', {'mu': 0.0, 'sd': 2.0}))
        self.assertEqual(config.n, 20)

    def test_rejects_bad_parameters(self):
        serializer = SimConfigSerializer(data={
            'n': 20, 'noise_sd': 0.1, 'distributions': {'X1': {'kind': 'binomial', 'p': 1.5, 'size': 3}},
        })
        self.assertFalse(serializer.is_valid())
        self.assertIn('distributions', serializer.errors)

    def test_rejects_unknown_feature(self):
        serializer = SimConfigSerializer(data={'n': 20, 'noise_sd': 0.1, 'distributions': {'W1': {'kind': 'poisson', 'lam': 1}}})
        self.assertFalse(serializer.is_valid())
