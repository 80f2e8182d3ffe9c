from rest_framework import serializers

from evaluation.serializers import EvalSettingsSerializer
from glm.serializers import GlmSettingsSerializer
from interpret.serializers import InterpretSettingsSerializer
from nn.serializers import NnSettingsSerializer
from sim.serializers import SimConfigSerializer


class OutputSettingsSerializer(serializers.Serializer):
    directory = serializers.CharField()
    float_digits = serializers.IntegerField(min_value=0, max_value=12)


# Experiment file section -> (settings.RISKLAB key, serializer)
SECTIONS = {
    'sim': ('SIM', SimConfigSerializer),
    'glm': ('GLM', GlmSettingsSerializer),
    'nn': ('NN', NnSettingsSerializer),
    'eval': ('EVAL', EvalSettingsSerializer),
    'interpret': ('INTERPRET', InterpretSettingsSerializer),
    'output': ('OUTPUT', OutputSettingsSerializer),
}
