"""Experiment files.

An experiment file is a YAML mapping with an optional top-level ``seed`` and
the sections ``sim``, ``glm``, ``nn``, ``eval``, ``interpret`` and
``output``. Anything left out falls back to ``settings.RISKLAB``; unknown
keys are rejected with the line they appear on.
"""
import copy
import logging
import os
from dataclasses import dataclass, field
from pathlib import Path

import yaml
from django.conf import settings
from rest_framework import serializers

from core.exceptions import ConfigurationError
from evaluation.serializers import split_from_settings
from glm.models import PenaltySpec
from nn.serializers import architecture_from_settings, train_config_from_settings

from .serializers import SECTIONS

logger = logging.getLogger(__name__)

SEED_KEY = 'seed'
SEED_ENVIRONMENT = 'RISKLAB_SEED'


def _line(node):
    return node.start_mark.line + 1


def _check_keys(node, serializer, path, lines):
    if not isinstance(node, yaml.MappingNode):
        raise ConfigurationError(f"'{path}' must be a mapping", _line(node))
    for key_node, value_node in node.value:
        key = key_node.value
        if key not in serializer.fields:
            raise ConfigurationError(f"unknown key '{path}.{key}'", _line(key_node))
        lines[(path, key)] = _line(key_node)
        child = serializer.fields[key]
        if isinstance(child, serializers.Serializer) and isinstance(value_node, yaml.MappingNode):
            _check_keys(value_node, child, f'{path}.{key}', lines)
        elif isinstance(child, serializers.DictField) and isinstance(child.child, serializers.Serializer):
            if isinstance(value_node, yaml.MappingNode):
                for inner_key, inner_value in value_node.value:
                    _check_keys(inner_value, child.child, f'{path}.{key}.{inner_key.value}', lines)


def _first_error(errors):
    """Flatten DRF's nested error structure down to (field, message)"""
    if isinstance(errors, dict):
        name, detail = next(iter(errors.items()))
        inner, message = _first_error(detail)
        return ([] if name == 'non_field_errors' else [name]) + inner, message
    if isinstance(errors, list) and errors:
        return _first_error(errors[0])
    return [], str(errors)


def _compose(text):
    try:
        return yaml.compose(text, Loader=yaml.SafeLoader), yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, 'problem_mark', None)
        raise ConfigurationError(
            f"invalid YAML: {getattr(exc, 'problem', None) or exc}", mark.line + 1 if mark else None
        ) from exc


def _resolve_seed(raw, environ):
    value = environ.get(SEED_ENVIRONMENT)
    source = SEED_ENVIRONMENT
    if value in (None, ''):
        value = raw.get(SEED_KEY, settings.RISKLAB['SEED'])
        source = 'configuration'
    try:
        seed = int(value)
    except (TypeError, ValueError):
        raise ConfigurationError(f"seed from {source} must be an integer, got {value!r}") from None
    if seed < 0:
        raise ConfigurationError(f"seed from {source} must be >= 0")
    return seed, source


@dataclass(frozen=True)
class ExperimentConfig:
    seed: int
    sections: dict = field(default_factory=dict)
    source: str = None

    def section(self, name):
        return self.sections[name]

    def sim_config(self, imbalanced=False):
        data = dict(self.sections['sim'])
        data.setdefault('seed', self.seed)
        if imbalanced:
            data['n'] = data['imbalanced_n']
        return SECTIONS['sim'][1]().create(data)

    @property
    def target_positive_rate(self):
        return self.sections['sim']['target_positive_rate']

    def penalty(self):
        glm = self.sections['glm']
        return PenaltySpec(glm['penalty'], glm['lam'])

    def architecture(self, imbalanced=False):
        return architecture_from_settings(self.sections['nn'], imbalanced)

    def train_config(self, seed=None):
        return train_config_from_settings(self.sections['nn'], self.seed if seed is None else seed)

    def split(self, imbalanced=False, **overrides):
        return split_from_settings(self.sections['eval'], self.seed, imbalanced, **overrides)

    @property
    def output_directory(self):
        return Path(self.sections['output']['directory'])

    @property
    def float_digits(self):
        return self.sections['output']['float_digits']


def load_config(path=None, environ=None):
    """Parse and validate an experiment file (or the bare defaults when `path` is None)"""
    environ = os.environ if environ is None else environ
    text = ''
    if path is not None:
        path = Path(path)
        if not path.is_file():
            raise ConfigurationError(f"configuration file {path} does not exist")
        text = path.read_text(encoding='utf-8')

    root, raw = _compose(text)
    raw = raw or {}
    lines = {}
    if root is not None:
        if not isinstance(root, yaml.MappingNode):
            raise ConfigurationError("the configuration must be a mapping of sections", _line(root))
        for key_node, value_node in root.value:
            name = key_node.value
            if name == SEED_KEY:
                continue
            if name not in SECTIONS:
                raise ConfigurationError(f"unknown section '{name}'", _line(key_node))
            lines[(name, None)] = _line(key_node)
            if isinstance(value_node, yaml.ScalarNode) and value_node.value in ('', '~', 'null'):
                continue
            _check_keys(value_node, SECTIONS[name][1](), name, lines)

    sections = {}
    for name, (settings_key, serializer_class) in SECTIONS.items():
        merged = copy.deepcopy(settings.RISKLAB[settings_key])
        merged.update(raw.get(name) or {})
        serializer = serializer_class(data=merged)
        if not serializer.is_valid():
            fields, message = _first_error(serializer.errors)
            key = fields[0] if fields else None
            line = lines.get((name, key), lines.get((name, None)))
            raise ConfigurationError(f"{'.'.join([name] + fields)}: {message}", line)
        sections[name] = dict(serializer.validated_data)

    seed, source = _resolve_seed(raw, environ)
    if source == SEED_ENVIRONMENT:
        # the environment seed also replaces a seed pinned in the sim section
        sections['sim']['seed'] = seed
    config = ExperimentConfig(seed, sections, str(path) if path else None)
    logger.debug(f"Loaded configuration from {config.source or 'defaults'} (seed {config.seed})")
    return config
