from rest_framework import serializers

from evaluation.models import METRIC_CHOICES

LIME_SELECTION_CHOICES = [
    ('forward', 'Greedy forward selection by weighted fit'),
    ('highest_weights', 'Largest coefficients of the full weighted fit'),
]


class InterpretSettingsSerializer(serializers.Serializer):
    permutations = serializers.IntegerField(min_value=1)
    metric = serializers.ChoiceField(choices=METRIC_CHOICES)
    lek_grid = serializers.IntegerField(min_value=2)
    lek_quantiles = serializers.ListField(
        child=serializers.FloatField(min_value=0.0, max_value=1.0), min_length=1
    )
    shapley_samples = serializers.IntegerField(min_value=1)
    shapley_rows = serializers.IntegerField(min_value=1)
    lime_features = serializers.IntegerField(min_value=1)
    lime_samples = serializers.IntegerField(min_value=2)
    lime_kernel_width = serializers.FloatField(allow_null=True)
    lime_selection = serializers.ChoiceField(choices=LIME_SELECTION_CHOICES)

    def validate_lime_kernel_width(self, value):
        if value is not None and value <= 0:
            raise serializers.ValidationError("must be > 0")
        return value
