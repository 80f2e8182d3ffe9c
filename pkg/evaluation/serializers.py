from rest_framework import serializers

from .models import CI_CHOICES, DUPLICATION_CHOICES, SplitSpec


class EvalSettingsSerializer(serializers.Serializer):
    train_fraction = serializers.FloatField()
    imbalanced_train_fraction = serializers.FloatField()
    replicates = serializers.IntegerField(min_value=1)
    duplication = serializers.ChoiceField(choices=DUPLICATION_CHOICES)
    imbalanced_duplication = serializers.ChoiceField(choices=DUPLICATION_CHOICES)
    threshold = serializers.FloatField()
    ci = serializers.ChoiceField(choices=CI_CHOICES)

    def _open_unit(self, value):
        if not 0.0 < value < 1.0:
            raise serializers.ValidationError("must be strictly between 0 and 1")
        return value

    validate_train_fraction = _open_unit
    validate_imbalanced_train_fraction = _open_unit
    validate_threshold = _open_unit


def split_from_settings(section, seed, imbalanced=False, **overrides):
    values = {
        'train_fraction': section['imbalanced_train_fraction'] if imbalanced else section['train_fraction'],
        'replicates': section['replicates'],
        'seed': seed,
        'duplication': section['imbalanced_duplication'] if imbalanced else section['duplication'],
        'threshold': section['threshold'],
        'ci': section['ci'],
    }
    values.update(overrides)
    return SplitSpec(**values)
