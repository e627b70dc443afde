from django.apps import AppConfig


class ImsimConfig(AppConfig):
    default_auto_field = 'django.db.models.BigAutoField'
    name = 'imsim'
    verbose_name = 'Staggered-closing Clearinghouse'
