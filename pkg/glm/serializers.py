import numpy as np
from rest_framework import serializers

from .models import PENALTY_CHOICES, GlmFit, PenaltySpec

FIT_ON_CHOICES = [
    ('train', 'Training split'),
    ('full', 'Full sample'),
]


class GlmSettingsSerializer(serializers.Serializer):
    penalty = serializers.ChoiceField(choices=PENALTY_CHOICES)
    lam = serializers.FloatField(min_value=0.0)
    fit_on = serializers.ChoiceField(choices=FIT_ON_CHOICES)
    train_fraction = serializers.FloatField(min_value=0.0, max_value=1.0)
    tol = serializers.FloatField(min_value=0.0)
    max_iter = serializers.IntegerField(min_value=1)

    def validate_train_fraction(self, value):
        if not 0.0 < value < 1.0:
            raise serializers.ValidationError("must be strictly between 0 and 1")
        return value


class PenaltySerializer(serializers.Serializer):
    kind = serializers.ChoiceField(choices=PENALTY_CHOICES)
    lam = serializers.FloatField(min_value=0.0)


def _lower_triangle(matrix):
    return [[float(value) for value in matrix[i, : i + 1]] for i in range(matrix.shape[0])]


def _from_lower_triangle(rows):
    size = len(rows)
    matrix = np.zeros((size, size))
    for i, row in enumerate(rows):
        if len(row) != i + 1:
            raise serializers.ValidationError("covariance rows must form a lower triangle")
        matrix[i, : i + 1] = row
    return matrix + np.tril(matrix, -1).T


class GlmFitSerializer(serializers.Serializer):
    """Body of a `glm-fit` document"""
    feature_names = serializers.ListField(child=serializers.CharField())
    coefficients = serializers.ListField(child=serializers.FloatField())
    covariance_lower = serializers.ListField(
        child=serializers.ListField(child=serializers.FloatField()), allow_null=True
    )
    penalty = PenaltySerializer()
    iterations = serializers.IntegerField(min_value=0)
    converged = serializers.BooleanField()
    deviance = serializers.FloatField()
    null_deviance = serializers.FloatField()
    n_obs = serializers.IntegerField(min_value=0)
    warnings = serializers.ListField(child=serializers.CharField(), required=False)

    def to_representation(self, fit):
        return {
            'feature_names': list(fit.feature_names),
            'coefficients': [float(value) for value in fit.coefficients],
            'covariance_lower': None if fit.covariance is None else _lower_triangle(fit.covariance),
            'penalty': {'kind': fit.penalty.kind, 'lam': float(fit.penalty.lam)},
            'iterations': int(fit.iterations),
            'converged': bool(fit.converged),
            'deviance': float(fit.deviance),
            'null_deviance': float(fit.null_deviance),
            'n_obs': int(fit.n_obs),
            'warnings': list(fit.warnings),
        }

    def validate(self, attrs):
        if len(attrs['coefficients']) != len(attrs['feature_names']) + 1:
            raise serializers.ValidationError("expected an intercept plus one coefficient per feature")
        lower = attrs.get('covariance_lower')
        if lower is not None and len(lower) != len(attrs['coefficients']):
            raise serializers.ValidationError("covariance size does not match the coefficients")
        return attrs

    def create(self, validated_data):
        lower = validated_data['covariance_lower']
        return GlmFit(
            feature_names=tuple(validated_data['feature_names']),
            coefficients=np.array(validated_data['coefficients']),
            covariance=None if lower is None else _from_lower_triangle(lower),
            penalty=PenaltySpec(**validated_data['penalty']),
            iterations=validated_data['iterations'],
            converged=validated_data['converged'],
            deviance=validated_data['deviance'],
            null_deviance=validated_data['null_deviance'],
            n_obs=validated_data['n_obs'],
            warnings=tuple(validated_data.get('warnings', ())),
        )
