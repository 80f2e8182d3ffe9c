from django.apps import AppConfig


class InterpretConfig(AppConfig):
    name = 'interpret'
