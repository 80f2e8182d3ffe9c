import numpy as np
from rest_framework import serializers

from .models import ACTIVATION_CHOICES, LOSS_CHOICES, Activation, Architecture, NnModel, TrainConfig


class NnSettingsSerializer(serializers.Serializer):
    hidden = serializers.ListField(child=serializers.IntegerField(min_value=1), min_length=1)
    imbalanced_hidden = serializers.ListField(child=serializers.IntegerField(min_value=1), min_length=1)
    activation = serializers.ChoiceField(choices=ACTIVATION_CHOICES)
    activation_a = serializers.FloatField(allow_null=True)
    activation_b = serializers.FloatField(allow_null=True)
    loss = serializers.ChoiceField(choices=LOSS_CHOICES)
    learning_rate = serializers.FloatField()
    epochs = serializers.IntegerField(min_value=1)
    batch_size = serializers.IntegerField(min_value=1)
    init_scale = serializers.FloatField()
    standardize = serializers.BooleanField()

    def validate_learning_rate(self, value):
        if value <= 0:
            raise serializers.ValidationError("must be > 0")
        return value

    def validate_init_scale(self, value):
        if value <= 0:
            raise serializers.ValidationError("must be > 0")
        return value


def architecture_from_settings(section, imbalanced=False):
    activation = Activation(section['activation'], section.get('activation_a'), section.get('activation_b'))
    hidden = section['imbalanced_hidden'] if imbalanced else section['hidden']
    return Architecture(tuple(hidden), activation)


def train_config_from_settings(section, seed):
    return TrainConfig(
        loss=section['loss'],
        learning_rate=section['learning_rate'],
        epochs=section['epochs'],
        batch_size=section['batch_size'],
        seed=seed,
        init_scale=section['init_scale'],
        standardize=section['standardize'],
    )


class ActivationSerializer(serializers.Serializer):
    kind = serializers.ChoiceField(choices=ACTIVATION_CHOICES)
    a = serializers.FloatField(allow_null=True, required=False)
    b = serializers.FloatField(allow_null=True, required=False)


class NnModelSerializer(serializers.Serializer):
    """Body of an `nn-model` document; weights are stored row-major"""
    layer_sizes = serializers.ListField(child=serializers.IntegerField(min_value=1), min_length=3)
    activation = ActivationSerializer()
    feature_names = serializers.ListField(child=serializers.CharField())
    input_shift = serializers.ListField(child=serializers.FloatField())
    input_scale = serializers.ListField(child=serializers.FloatField())
    weights = serializers.ListField(child=serializers.ListField(child=serializers.FloatField()))
    history = serializers.ListField(child=serializers.FloatField(), required=False)

    def to_representation(self, model):
        return {
            'layer_sizes': list(model.layer_sizes),
            'activation': {'kind': model.activation.kind, 'a': model.activation.a, 'b': model.activation.b},
            'feature_names': list(model.feature_names),
            'input_shift': [float(value) for value in model.input_shift],
            'input_scale': [float(value) for value in model.input_scale],
            'weights': [[float(value) for value in layer.ravel(order='C')] for layer in model.weights],
            'history': [float(value) for value in model.history],
        }

    def validate(self, attrs):
        sizes = attrs['layer_sizes']
        if len(attrs['weights']) != len(sizes) - 1:
            raise serializers.ValidationError("one weight block per layer transition is required")
        for index, block in enumerate(attrs['weights']):
            if len(block) != (sizes[index] + 1) * sizes[index + 1]:
                raise serializers.ValidationError(f"weight block {index + 1} has the wrong length")
        return attrs

    def create(self, validated_data):
        sizes = validated_data['layer_sizes']
        weights = tuple(
            np.array(block).reshape(sizes[index] + 1, sizes[index + 1])
            for index, block in enumerate(validated_data['weights'])
        )
        activation = validated_data['activation']
        return NnModel(
            layer_sizes=tuple(sizes),
            weights=weights,
            activation=Activation(activation['kind'], activation.get('a'), activation.get('b')),
            feature_names=tuple(validated_data['feature_names']),
            input_shift=np.array(validated_data['input_shift']),
            input_scale=np.array(validated_data['input_scale']),
            history=tuple(validated_data.get('history', ())),
        )
