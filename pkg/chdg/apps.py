from django.apps import AppConfig


class ChdgConfig(AppConfig):
    name = 'chdg'
    verbose_name = 'Cahn-Hilliard DG'
