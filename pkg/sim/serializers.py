from rest_framework import serializers

from core.exceptions import ConfigurationError

from .models import DISTRIBUTION_CHOICES, FEATURE_NAMES, DistributionSpec, SimConfig


class DistributionSerializer(serializers.Serializer):
    kind = serializers.ChoiceField(choices=DISTRIBUTION_CHOICES)
    p = serializers.FloatField(required=False)
    size = serializers.IntegerField(required=False)
    rate = serializers.FloatField(required=False)
    lam = serializers.FloatField(required=False)
    mu = serializers.FloatField(required=False)
    sd = serializers.FloatField(required=False)

    def validate(self, attrs):
        kind = attrs.pop('kind')
        spec = DistributionSpec(kind, attrs)
        try:
            spec.validate()
        except ConfigurationError as exc:
            raise serializers.ValidationError(str(exc).lstrip(': '))
        return spec


class SimConfigSerializer(serializers.Serializer):
    n = serializers.IntegerField(min_value=1)
    a = serializers.ListField(child=serializers.FloatField(), min_length=3, max_length=3, required=False)
    b = serializers.ListField(child=serializers.FloatField(), min_length=3, max_length=3, required=False)
    intercept = serializers.FloatField(required=False)
    noise_sd = serializers.FloatField(min_value=0.0)
    noise_is_variance = serializers.BooleanField(required=False)
    seed = serializers.IntegerField(min_value=0, required=False)
    distributions = serializers.DictField(child=DistributionSerializer(), required=False)
    target_positive_rate = serializers.FloatField(required=False)
    imbalanced_n = serializers.IntegerField(min_value=1, required=False)

    def validate_distributions(self, value):
        unknown = set(value) - set(FEATURE_NAMES)
        if unknown:
            raise serializers.ValidationError(f"unknown features: {', '.join(sorted(unknown))}")
        return value

    def validate_target_positive_rate(self, value):
        if not 0.0 < value <= 0.5:
            raise serializers.ValidationError("must be in (0, 0.5]")
        return value

    def create(self, validated_data):
        data = dict(validated_data)
        overrides = data.pop('distributions', {})
        data.pop('target_positive_rate', None)
        data.pop('imbalanced_n', None)
        defaults = SimConfig()
        specs = list(defaults.distributions)
        for index, name in enumerate(FEATURE_NAMES):
            if name in overrides:
                specs[index] = overrides[name]
        for key in ('a', 'b'):
            if key in data:
                data[key] = tuple(data[key])
        return SimConfig(x_distributions=tuple(specs[:3]), z_distributions=tuple(specs[3:]), **data).validate()
