from django.apps import AppConfig


class ExanteConfig(AppConfig):
    default_auto_field = 'django.db.models.BigAutoField'
    name = 'exante'
    verbose_name = 'Ex-ante Assignment Distributions'
