import numpy as np
from django.apps import apps
from django.conf import settings
from django.test import SimpleTestCase

from .documents import dump_document, load_document
from .exceptions import (
    EXIT_IO,
    EXIT_NUMERICAL,
    EXIT_USAGE,
    ConfigurationError,
    DivergenceError,
    DocumentError,
    SingularityError,
)
from .utils import STREAM_FEATURES, STREAM_NOISE, derive_seed, run_parallel, substream


class StreamTests(SimpleTestCase):
    def test_same_key_same_draws(self):
        first = substream(11, STREAM_FEATURES, 2).random(5)
        second = substream(11, STREAM_FEATURES, 2).random(5)
        np.testing.assert_array_equal(first, second)

    def test_keys_are_independent(self):
        features = substream(11, STREAM_FEATURES, 0).random(5)
        noise = substream(11, STREAM_NOISE).random(5)
        other_seed = substream(12, STREAM_FEATURES, 0).random(5)
        self.assertFalse(np.allclose(features, noise))
        self.assertFalse(np.allclose(features, other_seed))

    def test_missing_seed_rejected(self):
        with self.assertRaises(ValueError):
            substream(None, 1)

    def test_derive_seed_is_stable(self):
        self.assertEqual(derive_seed(5, 3, 1), derive_seed(5, 3, 1))
        self.assertNotEqual(derive_seed(5, 3, 1), derive_seed(5, 3, 2))
        self.assertGreaterEqual(derive_seed(5, 3, 1), 0)


class RunParallelTests(SimpleTestCase):
    def test_results_follow_task_order(self):
        def draw(task):
            return float(substream(3, task).random())

        serial = run_parallel(draw, range(20), threads=1)
        threaded = run_parallel(draw, range(20), threads=4)
        self.assertEqual(serial, threaded)

    def test_empty_task_list(self):
        self.assertEqual(run_parallel(lambda task: task, [], threads=4), [])


class DocumentTests(SimpleTestCase):
    def test_body_survives(self):
        text = dump_document('glm-fit', {'coefficients': [0.5, -1.25]})
        self.assertEqual(load_document(text, 'glm-fit'), {'coefficients': [0.5, -1.25]})

    def test_wrong_kind(self):
        text = dump_document('glm-fit', {'a': 1})
        with self.assertRaises(DocumentError):
            load_document(text, 'nn-model')

    def test_minor_version_accepted_major_rejected(self):
        minor = "format: risklab\nversion: '1.3'\nkind: nn-model\nbody: {a: 1}\n"
        self.assertEqual(load_document(minor, 'nn-model'), {'a': 1})
        major = "format: risklab\nversion: '2.0'\nkind: nn-model\nbody: {a: 1}\n"
        with self.assertRaisesMessage(DocumentError, 'unsupported document version'):
            load_document(major, 'nn-model')

    def test_garbage(self):
        with self.assertRaises(DocumentError):
            load_document('a: [1, 2', 'glm-fit')
        with self.assertRaises(DocumentError):
            load_document('just text', 'glm-fit')


class ExceptionTests(SimpleTestCase):
    def test_exit_codes(self):
        self.assertEqual(ConfigurationError('x').exit_code, EXIT_USAGE)
        self.assertEqual(DocumentError('x').exit_code, EXIT_IO)
        self.assertEqual(SingularityError('x').exit_code, EXIT_NUMERICAL)

    def test_messages(self):
        self.assertEqual(str(ConfigurationError('unknown key', line=4)), 'line 4: unknown key')
        error = DivergenceError(17)
        self.assertEqual(error.epoch, 17)
        self.assertIn('epoch 17', str(error))


class ProjectSettingsTests(SimpleTestCase):
    def test_no_model_or_decimal_settings(self):
        self.assertEqual(settings.REST_FRAMEWORK, {'UNAUTHENTICATED_USER': None})
        for label in ('core', 'sim', 'glm', 'nn', 'interpret', 'evaluation', 'cli'):
            self.assertNotIn('default_auto_field', vars(type(apps.get_app_config(label))), label)
