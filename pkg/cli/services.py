import logging

from core.documents import peek_kind, read_document, write_document
from core.exceptions import ConfigurationError, DocumentError, RisklabError, SchemaError
from core.utils import STREAM_SPLIT, substream
from evaluation.services import glm_method, nn_method, split_rows
from glm.serializers import GlmFitSerializer
from nn.serializers import NnModelSerializer

logger = logging.getLogger(__name__)

GLM_KIND = 'glm-fit'
NN_KIND = 'nn-model'

DOCUMENT_SERIALIZERS = {
    GLM_KIND: GlmFitSerializer,
    NN_KIND: NnModelSerializer,
}

METHOD_NAMES = ('GLM', 'NN')


def holdout_split(data, train_fraction, seed):
    """One seeded train / test partition, as used by the single-fit commands"""
    train_rows, test_rows = split_rows(data.n_rows, train_fraction, substream(seed, STREAM_SPLIT))
    return data.take(train_rows), data.take(test_rows)


def save_model(model, path):
    kind = NN_KIND if hasattr(model, 'layer_sizes') else GLM_KIND
    return write_document(path, kind, DOCUMENT_SERIALIZERS[kind]().to_representation(model))


def load_model(path):
    kind = peek_kind(path)
    if kind not in DOCUMENT_SERIALIZERS:
        raise DocumentError(f"{path} holds an unsupported document kind {kind!r}")
    serializer = DOCUMENT_SERIALIZERS[kind](data=read_document(path, kind))
    if not serializer.is_valid():
        raise DocumentError(f"{path} is not a valid {kind} document: {serializer.errors}")
    try:
        model = serializer.save()
    except RisklabError as exc:
        raise DocumentError(f"{path}: {exc}") from exc
    logger.info(f"Loaded {kind} from {path}")
    return model


def check_schema(model, data):
    if tuple(model.feature_names) != tuple(data.feature_names):
        raise SchemaError(
            f"data columns {list(data.feature_names)} do not match the model's {list(model.feature_names)}"
        )


def build_methods(config, names=METHOD_NAMES, imbalanced=False):
    """Named fitters for `evaluate`, configured from the experiment file"""
    glm = config.section('glm')
    factories = {
        'GLM': lambda: glm_method(config.penalty(), tol=glm['tol'], max_iter=glm['max_iter']),
        'NN': lambda: nn_method(config.architecture(imbalanced), config.train_config()),
    }
    unknown = [name for name in names if name not in factories]
    if unknown:
        raise ConfigurationError(f"unknown methods {', '.join(unknown)}")
    return {name: factories[name]() for name in names}
