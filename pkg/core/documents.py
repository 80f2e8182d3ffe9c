"""Versioned plain-text container for fitted models.

A document is a YAML mapping::

    format: risklab
    version: '1.0'
    kind: glm-fit
    body: {...}

Readers accept any document whose major version matches ``FORMAT_VERSION``.
"""
import logging
from pathlib import Path

import yaml
from packaging.version import InvalidVersion, Version

from .exceptions import DocumentError

logger = logging.getLogger(__name__)

FORMAT_NAME = 'risklab'
FORMAT_VERSION = Version('1.0')


def dump_document(kind, body):
    header = {
        'format': FORMAT_NAME,
        'version': str(FORMAT_VERSION),
        'kind': kind,
        'body': body,
    }
    return yaml.safe_dump(header, sort_keys=False, default_flow_style=None, width=100)


def load_document(text, kind):
    try:
        document = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise DocumentError(f"not a valid YAML document: {exc}") from exc

    if not isinstance(document, dict) or document.get('format') != FORMAT_NAME:
        raise DocumentError(f"not a {FORMAT_NAME} document")
    try:
        version = Version(str(document.get('version')))
    except InvalidVersion as exc:
        raise DocumentError(f"invalid document version {document.get('version')!r}") from exc
    if version.major != FORMAT_VERSION.major:
        raise DocumentError(f"unsupported document version {version} (expected {FORMAT_VERSION.major}.x)")
    if document.get('kind') != kind:
        raise DocumentError(f"expected a {kind} document, found {document.get('kind')!r}")
    body = document.get('body')
    if not isinstance(body, dict):
        raise DocumentError("document body is missing")
    return body


def write_document(path, kind, body):
    path = Path(path)
    path.write_text(dump_document(kind, body), encoding='utf-8')
    logger.info(f"Wrote {kind} document to {path}")
    return path


def read_document(path, kind):
    return load_document(Path(path).read_text(encoding='utf-8'), kind)


def peek_kind(path):
    """Return the `kind` tag of a document without validating its body"""
    try:
        document = yaml.safe_load(Path(path).read_text(encoding='utf-8'))
    except yaml.YAMLError as exc:
        raise DocumentError(f"not a valid YAML document: {exc}") from exc
    if not isinstance(document, dict) or document.get('format') != FORMAT_NAME:
        raise DocumentError(f"{path} is not a {FORMAT_NAME} document")
    return document.get('kind')
