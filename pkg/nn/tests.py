import math

import numpy as np
from django.test import SimpleTestCase

from core.documents import dump_document, load_document
from core.exceptions import ConfigurationError, DivergenceError, SchemaError
from glm.services import fit_logistic, predict_proba
from sim.models import Column, Dataset, SimConfig
from sim.services import simulate

from .models import ACTIVATION_DEFAULTS, Activation, Architecture, NnModel, TrainConfig
from .serializers import NnModelSerializer, NnSettingsSerializer, architecture_from_settings
from .services import (
    accuracy,
    activation,
    collapse_linear,
    cross_entropy,
    entropy,
    forward,
    gradients,
    initialize,
    kl_divergence,
    loss,
    one_hot,
    train,
)

KINKED = ('relu', 'elu', 'selu')


def random_problem(seed, n_rows=8, n_inputs=3):
    generator = np.random.default_rng(seed)
    return generator.normal(size=(n_rows, n_inputs)), generator.integers(0, 2, size=n_rows)


def with_weights(model, weights):
    return NnModel(model.layer_sizes, tuple(weights), model.activation, model.feature_names,
                   model.input_shift, model.input_scale)


def zero_network(arch, n_inputs):
    model = initialize(arch, n_inputs, TrainConfig(seed=0))
    return with_weights(model, [np.zeros_like(layer) for layer in model.weights])


def numerical_gradients(model, problem, kind, step=1e-6):
    result = []
    for index, layer in enumerate(model.weights):
        estimate = np.zeros_like(layer)
        for position in np.ndindex(layer.shape):
            values = []
            for sign in (1.0, -1.0):
                weights = [matrix.copy() for matrix in model.weights]
                weights[index][position] += sign * step
                values.append(loss(with_weights(model, weights), problem, kind))
            estimate[position] = (values[0] - values[1]) / (2 * step)
        result.append(estimate)
    return result


class ActivationTests(SimpleTestCase):
    def test_reference_values(self):
        self.assertEqual(activation('sigmoid', 0.0), 0.5)
        self.assertAlmostEqual(float(activation('tanh', 1.0)), math.tanh(1.0))
        self.assertAlmostEqual(float(activation('selu', 1.0)), 1.0507)
        self.assertAlmostEqual(float(activation('selu', -1.0)), 1.0507 * 1.6733 * math.expm1(-1.0))
        self.assertAlmostEqual(float(activation('elu', -1.0)), math.expm1(-1.0))
        self.assertEqual(float(activation('relu', -2.0)), 0.0)
        self.assertAlmostEqual(float(activation('relu', -2.0, a=0.1)), -0.2)
        self.assertEqual(float(activation('identity', -3.5)), -3.5)

    def test_large_inputs_stay_finite(self):
        u = np.array([-800.0, 800.0])
        for kind in ACTIVATION_DEFAULTS:
            self.assertTrue(np.all(np.isfinite(activation(kind, u))), kind)

    def test_unused_parameters_dropped(self):
        self.assertIsNone(Activation('tanh', a=3.0).a)
        self.assertEqual(Activation('selu').b, 1.0507)
        with self.assertRaises(ConfigurationError):
            Activation('swish')


class ForwardTests(SimpleTestCase):
    def test_softmax_rows_sum_to_one(self):
        matrix, _ = random_problem(1, n_rows=50)
        for kind in ACTIVATION_DEFAULTS:
            model = initialize(Architecture((4, 3), Activation(kind)), 3, TrainConfig(seed=2, init_scale=25.0))
            probabilities = forward(model, matrix)
            np.testing.assert_allclose(probabilities.sum(axis=1), 1.0, atol=1e-12)
            self.assertTrue(np.all(probabilities >= 0))

    def test_single_row_and_schema(self):
        model = initialize(Architecture((2,)), 3, TrainConfig(seed=1))
        self.assertEqual(forward(model, np.zeros(3)).shape, (2,))
        with self.assertRaises(SchemaError):
            forward(model, np.zeros(4))

    def test_identity_network_collapses_to_linear_model(self):
        matrix, _ = random_problem(3, n_rows=20, n_inputs=4)
        model = initialize(Architecture((5, 3), Activation('identity')), 4, TrainConfig(seed=3),
                           input_shift=np.arange(4.0), input_scale=np.array([1.0, 2.0, 0.5, 3.0]))
        intercepts, slopes = collapse_linear(model)
        np.testing.assert_allclose(intercepts + matrix @ slopes, model.activations(matrix)[2], atol=1e-10)

    def test_zero_weights_give_uniform_output(self):
        matrix, _ = random_problem(5, n_rows=12, n_inputs=4)
        for kind in ACTIVATION_DEFAULTS:
            model = zero_network(Architecture((4, 3), Activation(kind), n_classes=3), 4)
            np.testing.assert_allclose(model.forward(matrix), np.full((12, 3), 1 / 3), atol=1e-15)

    def test_identity_network_reproduces_glm_probabilities(self):
        data = simulate(SimConfig(n=200, seed=9))
        fit = fit_logistic(data)
        # one hidden unit carries the GLM logit, the output logits are (0, logit)
        hidden = np.vstack([[fit.intercept], fit.slopes[:, None]])
        output = np.array([[0.0, 0.0], [0.0, 1.0]])
        model = NnModel((6, 1, 2), (hidden, output), Activation('identity'), data.feature_names)
        np.testing.assert_allclose(model.predict(data.values), predict_proba(fit, data), atol=1e-12)
        intercepts, slopes = collapse_linear(model)
        np.testing.assert_allclose(slopes[:, 1] - slopes[:, 0], fit.slopes, atol=1e-12)
        self.assertAlmostEqual(intercepts[1] - intercepts[0], fit.intercept, delta=1e-12)

    def test_collapse_needs_identity(self):
        model = initialize(Architecture((2,)), 3, TrainConfig(seed=1))
        with self.assertRaises(SchemaError):
            collapse_linear(model)


class LossTests(SimpleTestCase):
    def test_cross_entropy_splits_into_entropy_and_divergence(self):
        generator = np.random.default_rng(4)
        targets = generator.dirichlet(np.ones(3), size=10)
        model = initialize(Architecture((4,), n_classes=3), 2, TrainConfig(seed=4))
        probabilities = model.forward(generator.normal(size=(10, 2)))
        value, clamped = cross_entropy(targets, probabilities)
        self.assertEqual(clamped, 0)
        self.assertAlmostEqual(value, entropy(targets) + kl_divergence(targets, probabilities),
                               delta=1e-12 * max(1.0, value))

    def test_uniform_output_on_one_row_costs_log_two(self):
        model = zero_network(Architecture((3,)), 4)
        self.assertAlmostEqual(loss(model, (np.ones((1, 4)), [1])), math.log(2), delta=1e-15)
        self.assertAlmostEqual(loss(model, (np.ones((1, 4)), [0]), 'quadratic'), 0.5, delta=1e-15)

    def test_probability_floor(self):
        value, clamped = cross_entropy([[0.0, 1.0]], [[1.0, 0.0]])
        self.assertEqual(clamped, 1)
        self.assertAlmostEqual(value, -math.log(1e-12))

    def test_one_hot(self):
        np.testing.assert_array_equal(one_hot([1, 0]), [[0.0, 1.0], [1.0, 0.0]])
        with self.assertRaises(SchemaError):
            one_hot([2])


class GradientTests(SimpleTestCase):
    def test_backpropagation_matches_finite_differences(self):
        checked = 0
        for kind in ACTIVATION_DEFAULTS:
            for seed in range(10):
                problem = random_problem(seed)
                model = initialize(Architecture((4, 3), Activation(kind)), 3, TrainConfig(seed=seed))
                pre = model.activations(problem[0])[0]
                if kind in KINKED and min(np.min(np.abs(v)) for v in pre) < 1e-3:
                    continue
                for loss_kind in ('quadratic', 'cross_entropy'):
                    analytic = gradients(model, problem, loss_kind)
                    numeric = numerical_gradients(model, problem, loss_kind)
                    for exact, estimate in zip(analytic, numeric):
                        scale = max(1.0, np.max(np.abs(exact)))
                        self.assertLess(np.max(np.abs(exact - estimate)) / scale, 1e-5, (kind, seed, loss_kind))
                    checked += 1
        self.assertGreater(checked, 60)


class TrainingTests(SimpleTestCase):
    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.data = simulate(SimConfig(n=300, seed=6))

    def test_loss_decreases(self):
        model = train(self.data, Architecture((3,)), TrainConfig(epochs=30, seed=1))
        self.assertEqual(len(model.history), 31)
        self.assertLess(model.history[-1], model.history[0])
        self.assertEqual(model.feature_names, self.data.feature_names)

    def test_separable_points_are_all_classified(self):
        generator = np.random.default_rng(11)
        matrix = np.vstack([generator.normal(-2.0, 0.5, size=(10, 2)), generator.normal(2.0, 0.5, size=(10, 2))])
        data = Dataset(matrix, (Column('u'), Column('v')), np.repeat([0, 1], 10))
        model = train(data, Architecture((3,)), TrainConfig(learning_rate=0.5, epochs=200, batch_size=5, seed=3))
        self.assertEqual(accuracy(model, data), 1.0)

    def test_same_seed_same_weights(self):
        config = TrainConfig(epochs=5, seed=7)
        first = train(self.data, Architecture((3,)), config)
        second = train(self.data, Architecture((3,)), config)
        for a, b in zip(first.weights, second.weights):
            np.testing.assert_array_equal(a, b)
        other = train(self.data, Architecture((3,)), TrainConfig(epochs=5, seed=8))
        self.assertFalse(np.array_equal(first.weights[0], other.weights[0]))

    def test_divergence(self):
        with np.errstate(all='ignore'):
            with self.assertRaises(DivergenceError) as raised:
                train(self.data, Architecture((3,), Activation('identity')),
                      TrainConfig(learning_rate=1e300, epochs=3, seed=1))
        self.assertGreaterEqual(raised.exception.epoch, 1)
        self.assertEqual(raised.exception.exit_code, 3)

    def test_invalid_configuration(self):
        for build in (
            lambda: Architecture(()),
            lambda: Architecture((0,)),
            lambda: Architecture((3,), n_classes=1),
            lambda: TrainConfig(learning_rate=0.0),
            lambda: TrainConfig(epochs=0),
            lambda: TrainConfig(loss='hinge'),
        ):
            with self.assertRaises(ConfigurationError):
                build()


class PersistenceTests(SimpleTestCase):
    def test_document_restores_predictions(self):
        data = simulate(SimConfig(n=100, seed=2))
        model = train(data, Architecture((3, 2), Activation('selu')), TrainConfig(epochs=3, seed=2))
        text = dump_document('nn-model', NnModelSerializer().to_representation(model))
        serializer = NnModelSerializer(data=load_document(text, 'nn-model'))
        self.assertTrue(serializer.is_valid(), serializer.errors)
        restored = serializer.save()
        self.assertEqual(restored.layer_sizes, (6, 3, 2, 2))
        self.assertEqual(restored.activation, model.activation)
        np.testing.assert_array_equal(restored.forward(data.values), model.forward(data.values))

    def test_settings_section(self):
        section = {
            'hidden': [3], 'imbalanced_hidden': [2], 'activation': 'relu', 'activation_a': 0.01,
            'activation_b': None, 'loss': 'quadratic', 'learning_rate': 0.1, 'epochs': 10,
            'batch_size': 16, 'init_scale': 1.0, 'standardize': True,
        }
        serializer = NnSettingsSerializer(data=section)
        self.assertTrue(serializer.is_valid(), serializer.errors)
        arch = architecture_from_settings(serializer.validated_data, imbalanced=True)
        self.assertEqual(arch.hidden, (2,))
        self.assertEqual(arch.activation.a, 0.01)
        invalid = NnSettingsSerializer(data={**section, 'learning_rate': 0})
        self.assertFalse(invalid.is_valid())
        self.assertIn('learning_rate', invalid.errors)
