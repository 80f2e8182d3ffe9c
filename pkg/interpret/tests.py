import itertools

import numpy as np
from django.test import SimpleTestCase
from scipy.special import expit

from core.exceptions import (
    ConfigurationError,
    RankError,
    SchemaError,
    SizeError,
    UndefinedMetricError,
    UnsupportedArchitectureError,
    UnsupportedFeatureError,
)
from core.utils import STREAM_PERMUTATIONS, substream
from evaluation.models import confusion_counts
from glm.services import fit_logistic
from nn.models import Architecture, NnModel, TrainConfig
from nn.services import train
from sim.models import CATEGORICAL, Column, Dataset, SimConfig
from sim.services import simulate

from .models import DOWN
from .services import garson, lek_profile, lime_explain, permutation_importance, shapley, shapley_values


class LinearScore:
    """Stand-in model: a linear score, optionally passed through the logistic link"""

    def __init__(self, coefficients, intercept=0.0, logistic=True):
        self.coefficients = np.asarray(coefficients, dtype=float)
        self.intercept = float(intercept)
        self.logistic = logistic
        self.feature_names = tuple(f'x{j + 1}' for j in range(self.coefficients.size))

    def predict(self, matrix):
        score = self.intercept + np.atleast_2d(matrix) @ self.coefficients
        return expit(score) if self.logistic else score


def normal_dataset(n_rows=200, d=3, seed=0, label_from=None):
    generator = np.random.default_rng(seed)
    values = generator.normal(size=(n_rows, d))
    if label_from is None:
        label = generator.integers(0, 2, size=n_rows)
    else:
        label = (generator.uniform(size=n_rows) < label_from.predict(values)).astype(int)
    return Dataset(values, tuple(Column(f'x{j + 1}') for j in range(d)), label)


def network(input_weights, output_weights):
    """One-hidden-layer network with zero biases"""
    input_weights = np.asarray(input_weights, dtype=float)
    output_weights = np.asarray(output_weights, dtype=float)
    d, hidden = input_weights.shape
    return NnModel(
        (d, hidden, output_weights.shape[1]),
        (np.vstack([np.zeros(hidden), input_weights]), np.vstack([np.zeros(output_weights.shape[1]), output_weights])),
    )


class PermutationImportanceTests(SimpleTestCase):
    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.model = LinearScore([2.0, 0.0, -1.0])
        cls.data = normal_dataset(300, seed=1, label_from=cls.model)

    def test_unused_feature_keeps_baseline(self):
        report = permutation_importance(self.model, self.data, metric='p_g', n_repeats=20, seed=3)
        self.assertAlmostEqual(report.score_of('x2'), report.baseline, places=12)
        self.assertEqual(report.extras['direction'][0], DOWN)
        self.assertEqual(report.ranking()[0], 'x1')
        self.assertEqual(set(report.extras['metrics']), {'p_d', 'p_nd', 'p_g'})
        self.assertTrue(np.all(report.ci_low <= report.scores) and np.all(report.scores <= report.ci_high))

    def test_single_feature_matches_label_shuffle(self):
        model = LinearScore([1.5])
        data = normal_dataset(150, d=1, seed=2, label_from=model)
        report = permutation_importance(model, data, metric='p_g', n_repeats=25, seed=11)

        generator = substream(11, STREAM_PERMUTATIONS, 0)
        probability = model.predict(data.values)
        shuffled = []
        for _ in range(25):
            inverse = np.argsort(generator.permutation(data.n_rows))
            shuffled.append(confusion_counts(data.label[inverse], probability).p_g)
        self.assertAlmostEqual(report.scores[0], np.mean(shuffled), places=12)

    def test_groups_are_permuted_jointly(self):
        report = permutation_importance(self.model, self.data, n_repeats=10, groups=[['x1', 'x2'], ['x3']])
        self.assertEqual(report.feature_names, ('x1+x2', 'x3'))
        self.assertEqual(report.extras['groups'], [['x1', 'x2'], ['x3']])
        with self.assertRaises(ConfigurationError):
            permutation_importance(self.model, self.data, n_repeats=10, groups=[[]])

    def test_thread_count_does_not_change_results(self):
        single = permutation_importance(self.model, self.data, n_repeats=15, seed=5, threads=1)
        pooled = permutation_importance(self.model, self.data, n_repeats=15, seed=5, threads=4)
        np.testing.assert_array_equal(single.scores, pooled.scores)
        np.testing.assert_array_equal(single.ci_high, pooled.ci_high)

    def test_undefined_metric(self):
        negatives = Dataset(self.data.values, self.data.columns, np.zeros(self.data.n_rows, dtype=int))
        with self.assertRaises(UndefinedMetricError):
            permutation_importance(self.model, negatives, metric='p_d', n_repeats=5)
        with self.assertRaises(ConfigurationError):
            permutation_importance(self.model, self.data, metric='auc', n_repeats=5)

    def test_relevant_factors_matter_for_a_glm(self):
        data = simulate(SimConfig(n=3000, seed=12))
        fit = fit_logistic(data.take(np.arange(2000)))
        report = permutation_importance(fit, data.take(np.arange(2000, 3000)), metric='p_g', n_repeats=20, seed=12)
        drops = dict(zip(report.feature_names, report.drops))
        self.assertGreater(drops['X2'], drops['X1'])
        self.assertGreater(drops['X3'], drops['X1'])
        for name in ('Z1', 'Z2', 'Z3'):
            self.assertLess(abs(drops[name]), 0.03)
            self.assertGreater(drops['X1'], drops[name])

    def test_relevant_factors_matter_for_a_network(self):
        data = simulate(SimConfig(n=1000, seed=20240601))
        model = train(data.take(np.arange(667)), Architecture((3,)), TrainConfig(seed=20240601))
        report = permutation_importance(model, data.take(np.arange(667, 1000)), metric='p_d',
                                        n_repeats=100, seed=20240601, threads=4)
        drops = dict(zip(report.feature_names, report.drops))
        for name in ('X1', 'X2', 'X3'):
            self.assertGreater(drops[name], 0.01, name)
        self.assertGreater(min(drops['X2'], drops['X3']), drops['X1'])
        for name in ('Z1', 'Z2', 'Z3'):
            self.assertLess(abs(drops[name]), 0.03, name)


class GarsonTests(SimpleTestCase):
    def test_single_hidden_neuron(self):
        report = garson(network([[3.0], [-1.0]], [[1.0, -1.0]]))
        np.testing.assert_allclose(report.scores, [0.75, 0.25])
        self.assertEqual(report.ranking(), ['x1', 'x2'])

    def test_symmetric_inputs_share_equally(self):
        report = garson(network([[1.0, -2.0], [-1.0, 2.0]], [[0.0, 0.5], [1.0, 0.0]]))
        np.testing.assert_allclose(report.scores, [0.5, 0.5])

    def test_hidden_relabelling_does_not_matter(self):
        inputs = np.array([[0.2, 1.5, -0.7], [2.0, -0.3, 0.4], [-1.1, 0.9, 0.05]])
        outputs = np.array([[0.3, -0.2], [1.0, 0.4], [-0.6, 0.8]])
        order = [2, 0, 1]
        first = garson(network(inputs, outputs))
        second = garson(network(inputs[:, order], outputs[order]))
        np.testing.assert_allclose(first.scores, second.scores, rtol=1e-12)
        self.assertAlmostEqual(first.scores.sum(), 1.0)

    def test_zero_weights(self):
        report = garson(network(np.zeros((4, 2)), np.zeros((2, 2))))
        np.testing.assert_allclose(report.scores, 0.25)
        self.assertTrue(report.notes)

    def test_needs_one_hidden_layer(self):
        model = NnModel((2, 2, 2, 2), (np.zeros((3, 2)), np.zeros((3, 2)), np.zeros((3, 2))))
        with self.assertRaises(UnsupportedArchitectureError):
            garson(model)


class LekProfileTests(SimpleTestCase):
    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.data = normal_dataset(100, seed=4)
        cls.model = LinearScore([1.0, 0.0, -0.5])

    def test_increasing_response(self):
        profile = lek_profile(self.model, self.data, 'x1', grid_points=15)
        self.assertEqual(profile.probabilities.shape, (5, 15))
        self.assertTrue(np.all(np.diff(profile.probabilities, axis=1) > 0))
        self.assertTrue(np.all(profile.derivatives > 0))
        self.assertFalse(profile.is_flat)
        self.assertAlmostEqual(profile.grid[0], self.data.values[:, 0].min())
        self.assertAlmostEqual(profile.grid[-1], self.data.values[:, 0].max())

    def test_unused_feature_is_flat(self):
        profile = lek_profile(self.model, self.data, 'x2', quantiles=(0.5,))
        self.assertTrue(profile.is_flat)
        np.testing.assert_allclose(profile.derivatives, 0.0, atol=1e-12)

    def test_higher_quantiles_lower_the_curve(self):
        # x3 enters with a negative weight, so pinning it higher lowers P
        profile = lek_profile(self.model, self.data, 'x1', quantiles=(0.0, 1.0))
        self.assertTrue(np.all(profile.probabilities[1] < profile.probabilities[0]))

    def test_invalid_requests(self):
        columns = (Column('g', CATEGORICAL, (0, 1)),) + self.data.columns[1:]
        categorical = Dataset(np.column_stack([np.arange(100) % 2, self.data.values[:, 1:]]), columns,
                              self.data.label)
        with self.assertRaises(UnsupportedFeatureError):
            lek_profile(self.model, categorical, 'g')
        with self.assertRaises(ConfigurationError):
            lek_profile(self.model, self.data, 'x1', grid_points=1)
        with self.assertRaises(SchemaError):
            lek_profile(self.model, self.data, 'w')


def permutation_oracle(table, d):
    """Average marginal contribution over all orderings of the players"""
    phi = np.zeros(d)
    orderings = list(itertools.permutations(range(d)))
    for ordering in orderings:
        mask = 0
        for player in ordering:
            phi[player] += table[mask | 1 << player] - table[mask]
            mask |= 1 << player
    return phi / len(orderings)


class ShapleyValueTests(SimpleTestCase):
    def test_additive_game(self):
        weights = np.array([0.5, 2.0, 0.0, 1.25])
        phi = shapley_values(lambda subset: float(sum(weights[list(subset)])), 4)
        np.testing.assert_allclose(phi, weights, atol=1e-12)

    def test_matches_permutation_average(self):
        d = 4
        table = np.random.default_rng(0).normal(size=1 << d)
        table[0] = 0.0
        phi = shapley_values(lambda subset: table[sum(1 << i for i in subset)], d)
        np.testing.assert_allclose(phi, permutation_oracle(table, d), atol=1e-12)
        self.assertAlmostEqual(phi.sum(), table[-1], places=12)

    def test_linearity_in_the_game(self):
        generator = np.random.default_rng(1)
        first, second = generator.normal(size=8), generator.normal(size=8)

        def game(table):
            return lambda subset: table[sum(1 << i for i in subset)]

        combined = shapley_values(game(first + second), 3)
        np.testing.assert_allclose(combined, shapley_values(game(first), 3) + shapley_values(game(second), 3),
                                   atol=1e-12)

    def test_dummy_player(self):
        phi = shapley_values(lambda subset: float(len(set(subset) - {1})) ** 2, 3)
        self.assertAlmostEqual(phi[1], 0.0, places=12)

    def test_size_limits(self):
        with self.assertRaises(SizeError):
            shapley_values(lambda subset: 0.0, 16)
        with self.assertRaises(ConfigurationError):
            shapley_values(lambda subset: 0.0, 0)


class ShapleyModelTests(SimpleTestCase):
    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.data = normal_dataset(150, seed=5)

    def test_efficiency(self):
        report = shapley(LinearScore([1.0, -2.0, 0.5]), self.data, mc_samples=30, seed=2, outer_rows=100)
        self.assertAlmostEqual(report.scores.sum(), report.baseline, places=10)
        self.assertEqual(report.extras['outer_rows'], 100)
        self.assertEqual(report.extras['subset_values']['{}'], 0.0)
        self.assertTrue(report.notes)

    def test_linear_model_ordering(self):
        report = shapley(LinearScore([1.0, 2.0, 0.0], logistic=False), self.data, mc_samples=200, seed=3,
                         outer_rows=150)
        phi = report.scores
        self.assertGreater(phi[1], phi[0])
        self.assertGreater(phi[0], abs(phi[2]))
        self.assertLess(abs(phi[2]), 0.1 * report.baseline)

    def test_unused_feature_gets_zero(self):
        report = shapley(LinearScore([1.0, 0.0, -1.0]), self.data, mc_samples=20, seed=4, outer_rows=50)
        self.assertAlmostEqual(report.scores[1], 0.0, places=12)

    def test_constant_model(self):
        report = shapley(LinearScore([0.0, 0.0, 0.0], intercept=0.3), self.data, mc_samples=10, outer_rows=40)
        np.testing.assert_allclose(report.scores, 0.0, atol=1e-15)

    def test_thread_count_does_not_change_results(self):
        model = LinearScore([1.0, -2.0, 0.5])
        single = shapley(model, self.data, mc_samples=10, seed=6, outer_rows=60, threads=1)
        pooled = shapley(model, self.data, mc_samples=10, seed=6, outer_rows=60, threads=3)
        np.testing.assert_array_equal(single.scores, pooled.scores)

    def test_too_many_features(self):
        wide = normal_dataset(10, d=16, seed=0)
        with self.assertRaises(SizeError):
            shapley(LinearScore(np.ones(16)), wide)


class LimeTests(SimpleTestCase):
    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.data = normal_dataset(300, d=4, seed=7)
        cls.instance = np.array([1.2, -0.4, 2.0, 0.3])

    def test_linear_model_recovered_without_kernel(self):
        theta = np.array([1.0, -2.0, 0.5, 3.0])
        model = LinearScore(theta, intercept=0.7, logistic=False)
        explanation = lime_explain(model, self.instance, self.data, n_features=4, n_perturb=200,
                                   kernel_width=float('inf'), seed=1)
        baseline = self.data.values.mean(axis=0)
        np.testing.assert_allclose(explanation.coefficients, theta * (self.instance - baseline), atol=1e-6)
        self.assertAlmostEqual(explanation.intercept, 0.7 + theta @ baseline, places=6)
        self.assertLess(explanation.loss, 1e-12)
        np.testing.assert_array_equal(explanation.masks[0], 1.0)
        np.testing.assert_array_equal(explanation.kernel_weights, 1.0)

    def test_constant_model(self):
        explanation = lime_explain(LinearScore(np.zeros(4), 0.4), self.instance, self.data, n_features=2, seed=2)
        np.testing.assert_allclose(explanation.coefficients, 0.0, atol=1e-10)
        self.assertAlmostEqual(explanation.intercept, expit(0.4), places=10)

    def test_full_budget_is_the_global_weighted_fit(self):
        model = LinearScore([0.8, -0.3, 1.1, 0.0])
        explanation = lime_explain(model, self.instance, self.data, n_features=4, n_perturb=300, seed=3,
                                   selection='highest_weights')
        design = np.column_stack([np.ones(300), explanation.masks])
        root = np.sqrt(explanation.kernel_weights)
        expected = np.linalg.lstsq(design * root[:, None], explanation.outputs * root, rcond=None)[0]
        np.testing.assert_allclose(explanation.coefficients, expected[1:], atol=1e-10)
        self.assertAlmostEqual(explanation.intercept, expected[0], places=10)

    def test_highest_weights_keeps_largest_effects(self):
        theta = np.array([0.1, -2.0, 0.05, 1.0])
        model = LinearScore(theta, logistic=False)
        explanation = lime_explain(model, self.instance, self.data, n_features=2, kernel_width=float('inf'),
                                   seed=4, selection='highest_weights')
        effects = np.abs(theta * (self.instance - self.data.values.mean(axis=0)))
        self.assertEqual(set(explanation.selected), set(np.argsort(-effects)[:2].tolist()))
        self.assertEqual(np.count_nonzero(explanation.coefficients), 2)

    def test_forward_selection_respects_budget(self):
        explanation = lime_explain(LinearScore([1.0, -1.0, 0.5, 2.0]), self.instance, self.data, n_features=2,
                                   seed=5)
        self.assertEqual(len(explanation.selected), 2)
        report = explanation.as_report()
        self.assertEqual(len(report.extras['selected']), 2)
        self.assertAlmostEqual(report.extras['fidelity_loss'], explanation.loss)

    def test_same_seed_same_explanation(self):
        model = LinearScore([1.0, -1.0, 0.5, 2.0])
        first = lime_explain(model, self.instance, self.data, seed=6)
        second = lime_explain(model, self.instance, self.data, seed=6)
        np.testing.assert_array_equal(first.masks, second.masks)
        np.testing.assert_array_equal(first.coefficients, second.coefficients)

    def test_tiny_kernel_leaves_no_information(self):
        with self.assertRaises(RankError):
            lime_explain(LinearScore([1.0, -1.0, 0.5, 2.0]), self.instance, self.data, kernel_width=1e-6)

    def test_invalid_requests(self):
        model = LinearScore(np.ones(4))
        for options in ({'n_features': 0}, {'n_features': 5}, {'n_perturb': 4}, {'kernel_width': 0.0},
                        {'selection': 'lasso_path'}):
            with self.assertRaises(ConfigurationError):
                lime_explain(model, self.instance, self.data, **options)
        with self.assertRaises(SchemaError):
            lime_explain(model, np.zeros(3), self.data)
