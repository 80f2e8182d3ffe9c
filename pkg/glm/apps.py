from django.apps import AppConfig


class GlmConfig(AppConfig):
    name = 'glm'
