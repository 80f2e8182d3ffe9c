import math

import numpy as np
from django.test import SimpleTestCase

from core.documents import dump_document, load_document
from core.exceptions import ConfigurationError, InferenceUnavailableError, SchemaError, SingularityError
from sim.models import Column, Dataset, SimConfig
from sim.services import simulate

from .models import GlmFit, PenaltySpec
from .serializers import GlmFitSerializer, GlmSettingsSerializer
from .services import fit_logistic, odds_ratio_table, predict_proba, score_vector

TRUTH = np.array([1.0, 2.0, -1.0])


def training_part(seed, n=1000):
    """First two thirds of a simulated sample (rows are exchangeable)"""
    data = simulate(SimConfig(n=n, seed=seed))
    return data.take(np.arange(int(round(2 * n / 3))))


class UnpenalizedFitTests(SimpleTestCase):
    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.data = training_part(seed=1)
        cls.fit = fit_logistic(cls.data)

    def test_relevant_factors_recovered(self):
        slopes = self.fit.slopes[:3]
        se = self.fit.standard_errors[1:4]
        self.assertTrue(np.all(np.abs(slopes - TRUTH) <= 3 * se), (slopes, se))
        self.assertTrue(np.all(self.fit.p_values[1:4] < 1e-6))

    def test_score_vanishes_at_optimum(self):
        self.assertTrue(self.fit.converged)
        self.assertLess(np.max(np.abs(score_vector(self.fit, self.data))), 1e-6)

    def test_deviance_never_increases(self):
        trace = np.array(self.fit.deviance_trace)
        self.assertTrue(np.all(np.diff(trace) <= 1e-9 * np.abs(trace[:-1])))
        self.assertAlmostEqual(trace[-1], self.fit.deviance, places=6)
        self.assertLess(self.fit.deviance, self.fit.null_deviance)

    def test_wald_quantities(self):
        se = self.fit.standard_errors
        np.testing.assert_allclose(self.fit.z_values, self.fit.coefficients / se)
        intervals = self.fit.confidence_intervals()
        np.testing.assert_allclose(intervals[:, 1] - intervals[:, 0], 2 * 1.96 * se)
        self.assertAlmostEqual(self.fit.aic, self.fit.deviance + 14)
        self.assertAlmostEqual(self.fit.bic, self.fit.deviance + math.log(self.fit.n_obs) * 7)

    def test_odds_ratios(self):
        rows = odds_ratio_table(self.fit)
        self.assertEqual([row.feature for row in rows], list(self.data.feature_names))
        theta, se = self.fit.coefficients[2], self.fit.standard_errors[2]
        self.assertAlmostEqual(rows[1].odds_ratio, math.exp(theta))
        self.assertAlmostEqual(rows[1].ci_low, math.exp(theta - 1.96 * se))
        self.assertAlmostEqual(rows[1].ci_high, math.exp(theta + 1.96 * se))

    def test_predict_proba_checks_columns(self):
        probabilities = predict_proba(self.fit, self.data)
        self.assertTrue(np.all((probabilities > 0) & (probabilities < 1)))
        renamed = Dataset(self.data.values, tuple(Column(f'c{j}') for j in range(6)), self.data.label)
        with self.assertRaises(SchemaError):
            predict_proba(self.fit, renamed)


class CoefficientRecoveryTests(SimpleTestCase):
    def test_twenty_seeds(self):
        estimates, z_p_values = [], []
        for seed in range(1, 21):
            fit = fit_logistic(training_part(seed))
            estimates.append(fit.slopes[:3])
            z_p_values.append(fit.p_values[4:7])
        self.assertTrue(np.all(np.abs(np.mean(estimates, axis=0) - TRUTH) <= 0.25))
        # irrelevant factors stay insignificant in at least 18 of 20 samples
        self.assertTrue(np.all((np.array(z_p_values) >= 0.01).sum(axis=0) >= 18))


class PenalizedFitTests(SimpleTestCase):
    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.data = training_part(seed=2)

    def test_ridge_tends_to_unpenalized(self):
        plain = fit_logistic(self.data)
        ridge = fit_logistic(self.data, PenaltySpec('ridge', 1e-10))
        np.testing.assert_allclose(ridge.coefficients, plain.coefficients, atol=1e-4)

    def test_ridge_shrinks(self):
        plain = fit_logistic(self.data)
        ridge = fit_logistic(self.data, PenaltySpec('ridge', 50.0))
        self.assertLess(np.linalg.norm(ridge.slopes * self.data.values.std(axis=0)),
                        np.linalg.norm(plain.slopes * self.data.values.std(axis=0)))

    def test_lasso_zeroes_irrelevant_factors(self):
        lasso = fit_logistic(self.data, PenaltySpec('lasso', 60.0))
        np.testing.assert_array_equal(lasso.slopes[3:], 0.0)
        self.assertNotEqual(lasso.slopes[1], 0.0)

    def test_lasso_large_penalty_keeps_intercept_only(self):
        lasso = fit_logistic(self.data, PenaltySpec('lasso', 1e5))
        np.testing.assert_array_equal(lasso.slopes, 0.0)
        rate = self.data.positive_rate
        self.assertAlmostEqual(lasso.intercept, math.log(rate / (1 - rate)), places=5)

    def test_no_wald_inference(self):
        ridge = fit_logistic(self.data, PenaltySpec('ridge', 1.0))
        self.assertFalse(ridge.inference_available)
        with self.assertRaises(InferenceUnavailableError):
            odds_ratio_table(ridge)
        with self.assertRaises(InferenceUnavailableError):
            ridge.p_values
        self.assertIsNone(ridge.coefficient_rows()[1][2])

    def test_invalid_penalty(self):
        with self.assertRaises(ConfigurationError):
            PenaltySpec('elastic', 1.0)
        with self.assertRaises(ConfigurationError):
            PenaltySpec('ridge', -1.0)


class DegenerateDataTests(SimpleTestCase):
    def test_collinear_columns(self):
        x = np.arange(20, dtype=float)
        data = Dataset(np.column_stack([x, 2 * x]), (Column('a'), Column('b')), np.arange(20) % 2)
        with self.assertRaises(SingularityError):
            fit_logistic(data)

    def test_separation_is_reported_not_raised(self):
        data = Dataset(np.array([[-2.0], [-1.0], [1.0], [2.0]]), (Column('a'),), [0, 0, 1, 1])
        fit = fit_logistic(data)
        self.assertTrue(fit.separated)
        np.testing.assert_array_equal(fit.predict(data.values) > 0.5, [False, False, True, True])

    def test_single_class_labels_diverge_with_a_warning(self):
        data = training_part(seed=4, n=300)
        zeros = Dataset(data.values, data.columns, np.zeros(data.n_rows))
        for penalty in (None, PenaltySpec('ridge', 1.0), PenaltySpec('lasso', 1.0)):
            fit = fit_logistic(zeros, penalty)
            self.assertTrue(fit.separated, penalty)
            self.assertFalse(fit.converged, penalty)
            self.assertLess(fit.intercept, -10.0)
            self.assertTrue(np.all(fit.predict(zeros.values) < 1e-4))

    def test_two_support_points_match_the_likelihood_grid(self):
        x = np.array([[0.0]] * 3 + [[1.0]] * 3)
        label = np.array([1, 0, 0, 1, 1, 0])
        fit = fit_logistic(Dataset(x, (Column('x'),), label))
        # positive rates 1/3 and 2/3 at the two points
        np.testing.assert_allclose(fit.coefficients, [-math.log(2), 2 * math.log(2)], atol=1e-6)
        self.assertFalse(fit.separated)

        intercepts, slopes = np.meshgrid(np.linspace(-2, 1, 301), np.linspace(-1, 3, 401), indexing='ij')
        eta = intercepts[..., None] + slopes[..., None] * x[:, 0]
        log_likelihood = (label * eta - np.logaddexp(0.0, eta)).sum(axis=-1)
        best = np.unravel_index(np.argmax(log_likelihood), log_likelihood.shape)
        self.assertAlmostEqual(fit.coefficients[0], intercepts[best], delta=0.03)
        self.assertAlmostEqual(fit.coefficients[1], slopes[best], delta=0.03)

    def test_zero_coefficients_give_even_odds(self):
        data = training_part(seed=2, n=60)
        fit = GlmFit(data.feature_names, np.zeros(data.n_features + 1))
        np.testing.assert_array_equal(predict_proba(fit, data), np.full(data.n_rows, 0.5))


class PersistenceTests(SimpleTestCase):
    def test_document_restores_predictions(self):
        data = training_part(seed=3, n=300)
        fit = fit_logistic(data)
        text = dump_document('glm-fit', GlmFitSerializer().to_representation(fit))
        serializer = GlmFitSerializer(data=load_document(text, 'glm-fit'))
        self.assertTrue(serializer.is_valid(), serializer.errors)
        restored = serializer.save()
        np.testing.assert_allclose(restored.predict(data.values), fit.predict(data.values), rtol=1e-12)
        np.testing.assert_allclose(restored.standard_errors, fit.standard_errors, rtol=1e-12)

    def test_settings_section(self):
        serializer = GlmSettingsSerializer(data={
            'penalty': 'lasso', 'lam': 0.5, 'fit_on': 'full', 'train_fraction': 1.0, 'tol': 1e-8, 'max_iter': 10,
        })
        self.assertFalse(serializer.is_valid())
        self.assertIn('train_fraction', serializer.errors)
