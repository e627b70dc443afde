from django.apps import AppConfig


class LinkerConfig(AppConfig):
    default_auto_field = 'django.db.models.BigAutoField'
    name = 'linker'
    verbose_name = 'Snapshot Record Linkage'
