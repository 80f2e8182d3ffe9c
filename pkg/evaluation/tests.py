import numpy as np
from django.conf import settings
from django.test import SimpleTestCase

from core.exceptions import ClassError, ConfigurationError, UndefinedMetricError
from core.utils import substream
from nn.models import Architecture, TrainConfig
from sim.models import Column, Dataset, SimConfig
from sim.services import simulate, simulate_imbalanced

from .models import SplitSpec, confusion_counts, summarize
from .serializers import EvalSettingsSerializer, split_from_settings
from .services import duplicate_minority, evaluate, glm_method, nn_method, split_rows


class ColumnScore:
    """Model whose positive-class probability is one of the feature columns"""

    def __init__(self, column):
        self.column = column

    def predict(self, matrix):
        return np.asarray(matrix)[:, self.column]


def column_method(column):
    return lambda train, seed: ColumnScore(column)


def scored_dataset(n_rows, positives, seed=0):
    """Column 0 repeats the label, column 1 is noise unrelated to it"""
    generator = np.random.default_rng(seed)
    label = np.zeros(n_rows, dtype=int)
    label[generator.choice(n_rows, positives, replace=False)] = 1
    values = np.column_stack([label.astype(float), generator.uniform(size=n_rows)])
    return Dataset(values, (Column('truth'), Column('noise')), label)


class DuplicationTests(SimpleTestCase):
    def test_small_minority(self):
        data = scored_dataset(11, 1)
        duplicated = duplicate_minority(data, seed=1)
        self.assertEqual(duplicated.positives, 10)
        self.assertEqual(duplicated.negatives, 10)

    def test_study_sizes(self):
        data = scored_dataset(4356, 142)
        duplicated = duplicate_minority(data, seed=2)
        self.assertEqual(duplicated.positives, 142 * 29)
        self.assertEqual(duplicated.positives, 4118)
        self.assertEqual(duplicated.negatives, 4214)
        # every minority row appears the same number of times
        rows, counts = np.unique(duplicated.values[duplicated.label == 1, 1], return_counts=True)
        self.assertEqual(rows.size, 142)
        self.assertTrue(np.all(counts == 29))

    def test_shuffled_and_seeded(self):
        data = scored_dataset(50, 5)
        first = duplicate_minority(data, seed=3)
        self.assertFalse(np.array_equal(first.label[:45], np.zeros(45)))
        np.testing.assert_array_equal(first.values, duplicate_minority(data, seed=3).values)

    def test_balanced_data_is_only_shuffled(self):
        # 13 // 7 leaves a single copy of every row
        data = scored_dataset(20, 7)
        shuffled = duplicate_minority(data, seed=4)
        self.assertEqual(shuffled.n_rows, 20)
        self.assertEqual(shuffled.positives, 7)
        self.assertFalse(np.array_equal(shuffled.values, data.values))
        np.testing.assert_array_equal(np.sort(shuffled.values[:, 1]), np.sort(data.values[:, 1]))
        np.testing.assert_array_equal(shuffled.values, duplicate_minority(data, seed=4).values)

    def test_single_class(self):
        with self.assertRaises(ClassError):
            duplicate_minority(scored_dataset(10, 0))


class ConfusionTests(SimpleTestCase):
    def test_identities(self):
        generator = np.random.default_rng(0)
        label = generator.integers(0, 2, size=200)
        counts = confusion_counts(label, generator.uniform(size=200), 0.4)
        self.assertEqual(counts.positives, int(label.sum()))
        self.assertEqual(counts.total, 200)
        self.assertAlmostEqual(
            counts.p_g, (counts.positives * counts.p_d + counts.negatives * counts.p_nd) / counts.total
        )

    def test_threshold_is_inclusive(self):
        counts = confusion_counts([1, 0], [0.5, 0.49])
        self.assertEqual((counts.tp, counts.fn, counts.tn, counts.fp), (1, 0, 1, 0))

    def test_undefined_rates(self):
        counts = confusion_counts([0, 0], [0.1, 0.9])
        self.assertIsNone(counts.p_d)
        self.assertEqual(counts.p_nd, 0.5)
        with self.assertRaises(ConfigurationError):
            counts.metric('auc')

    def test_summaries(self):
        estimate = summarize([0.5, None, 0.7, 0.6])
        self.assertEqual(estimate.n, 3)
        self.assertAlmostEqual(estimate.mean, 0.6)
        self.assertAlmostEqual(estimate.width, 2 * 1.96 * 0.1 / np.sqrt(3))
        self.assertIsNone(summarize([None]))
        percentile = summarize(np.linspace(0, 1, 401), ci='percentile')
        self.assertAlmostEqual(percentile.ci_low, 0.025)
        self.assertAlmostEqual(percentile.ci_high, 0.975)


class SplitTests(SimpleTestCase):
    def test_partition(self):
        train, test = split_rows(100, 2 / 3, substream(1, 0))
        self.assertEqual(train.size, 67)
        self.assertEqual(sorted(np.concatenate([train, test]).tolist()), list(range(100)))

    def test_both_parts_non_empty(self):
        train, test = split_rows(3, 0.05, substream(1, 0))
        self.assertEqual((train.size, test.size), (1, 2))
        train, test = split_rows(3, 0.99, substream(1, 0))
        self.assertEqual((train.size, test.size), (2, 1))

    def test_invalid_spec(self):
        for options in ({'train_fraction': 1.0}, {'replicates': 0}, {'threshold': 0.0},
                        {'duplication': 'smote'}, {'ci': 'bootstrap'}):
            with self.assertRaises(ConfigurationError):
                SplitSpec(**options)

    def test_settings(self):
        serializer = EvalSettingsSerializer(data=settings.RISKLAB['EVAL'])
        self.assertTrue(serializer.is_valid(), serializer.errors)
        split = split_from_settings(serializer.validated_data, 9, imbalanced=True, replicates=4)
        self.assertEqual((split.train_fraction, split.duplication, split.replicates, split.seed),
                         (0.75, 'before_split', 4, 9))
        invalid = EvalSettingsSerializer(data={**settings.RISKLAB['EVAL'], 'threshold': 1.0})
        self.assertFalse(invalid.is_valid())
        self.assertIn('threshold', invalid.errors)


class EvaluateTests(SimpleTestCase):
    def test_perfect_and_uninformative_predictors(self):
        data = scored_dataset(2000, 1000, seed=4)
        report = evaluate(data, {'perfect': column_method(0), 'noise': column_method(1)},
                          SplitSpec(replicates=20, seed=4))
        perfect = report.summary('perfect')
        for estimate in (perfect.p_d, perfect.p_nd, perfect.p_g):
            self.assertEqual(estimate.mean, 1.0)
            self.assertEqual(estimate.width, 0.0)
        noise = report.summary('noise')
        self.assertAlmostEqual(noise.p_d.mean, 0.5, delta=0.05)
        self.assertAlmostEqual(noise.p_nd.mean, 0.5, delta=0.05)
        self.assertEqual(len(report.counts), 40)
        self.assertEqual([item.replicate for item in report.counts_for('noise')], list(range(20)))
        self.assertEqual(report.methods, ('perfect', 'noise'))

    def test_replicates_without_test_positives_are_skipped(self):
        data = scored_dataset(60, 2, seed=5)
        report = evaluate(data, {'perfect': column_method(0)},
                          SplitSpec(replicates=20, seed=5, duplication='off'))
        summary = report.summary('perfect')
        self.assertTrue(summary.skipped_p_d)
        self.assertEqual(summary.p_d.n, 20 - len(summary.skipped_p_d))
        self.assertEqual(summary.p_nd.n, 20)

    def test_single_class_data(self):
        data = scored_dataset(30, 0)
        with self.assertRaises(UndefinedMetricError):
            evaluate(data, {'perfect': column_method(0)}, SplitSpec(replicates=3, duplication='off'))
        with self.assertRaises(ClassError):
            evaluate(data, {'perfect': column_method(0)}, SplitSpec(replicates=3))

    def test_duplication_before_the_split_is_the_default(self):
        self.assertEqual(SplitSpec().duplication, 'before_split')
        self.assertEqual(settings.RISKLAB['EVAL']['duplication'], 'before_split')
        data = scored_dataset(400, 20, seed=9)
        report = evaluate(data, {'perfect': column_method(0)}, SplitSpec(replicates=4, seed=9))
        # 380 // 20 copies of each positive, split 2/3 : 1/3
        for counts in report.counts:
            self.assertEqual(counts.total, 760 - 507)
            self.assertGreater(counts.positives, 60)

    def test_thread_count_does_not_change_results(self):
        data = simulate(SimConfig(n=300, seed=6))
        methods = {'GLM': glm_method()}
        split = SplitSpec(replicates=6, seed=6)
        single = evaluate(data, methods, split, threads=1)
        pooled = evaluate(data, methods, split, threads=4)
        self.assertEqual(single.counts, pooled.counts)
        self.assertEqual(single.summary('GLM'), pooled.summary('GLM'))

    def test_glm_accuracy_on_simulated_data(self):
        # the Bayes classifier of the default design is right about 83 % of the time
        data = simulate(SimConfig(seed=8))
        report = evaluate(data, {'GLM': glm_method()}, SplitSpec(replicates=10, seed=8))
        summary = report.summary('GLM')
        self.assertGreater(summary.p_g.mean, 0.75)
        self.assertLess(summary.p_g.mean, 0.88)
        self.assertLess(summary.p_g.ci_low, summary.p_g.mean)

    def test_network_and_glm_on_simulated_data(self):
        data = simulate(SimConfig(seed=20240601))
        methods = {'GLM': glm_method(), 'NN': nn_method(Architecture((3,)), TrainConfig())}
        report = evaluate(data, methods, SplitSpec(replicates=10, seed=20240601), threads=4)
        glm, network = report.summary('GLM'), report.summary('NN')
        for summary in (glm, network):
            self.assertGreater(summary.p_g.mean, 0.76, summary.method)
            self.assertLess(summary.p_g.mean, 0.85, summary.method)
        # both fit the same splits; the network detects about as many positives
        self.assertGreaterEqual(network.p_d.mean, glm.p_d.mean - 0.03)
        self.assertLess(abs(network.p_g.mean - glm.p_g.mean), 0.03)

    def test_duplication_narrows_the_interval(self):
        data = simulate_imbalanced(SimConfig(n=4356, seed=5), 0.033)
        methods = {'GLM': glm_method()}
        plain = evaluate(data, methods, SplitSpec(train_fraction=0.75, replicates=20, seed=5, duplication='off'))
        duplicated = evaluate(data, methods, SplitSpec(train_fraction=0.75, replicates=20, seed=5,
                                                       duplication='before_split'))
        self.assertGreaterEqual(plain.summary('GLM').p_d.width, 2 * duplicated.summary('GLM').p_d.width)
        self.assertGreater(duplicated.summary('GLM').p_d.mean, plain.summary('GLM').p_d.mean)

    def test_train_only_duplication_keeps_test_rows_distinct(self):
        data = scored_dataset(400, 20, seed=7)
        report = evaluate(data, {'perfect': column_method(0)},
                          SplitSpec(replicates=5, seed=7, duplication='train_only'))
        for counts in report.counts:
            self.assertEqual(counts.total, 400 - 267)
