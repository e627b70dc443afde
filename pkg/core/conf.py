"""
Project settings access.

Values come from the ADMISSIONS dict in the Django settings module, merged
over DEFAULTS. Library code reads `admissions_settings.ENUMERATION_BUDGET`
and so on whenever a caller leaves the matching argument as None.
"""
from django.conf import settings
from django.core.signals import setting_changed

DEFAULTS = {
    'ENUMERATION_BUDGET': 10 ** 7,
    'DEFAULT_SEED': 20180620,
    'MONTE_CARLO_SIMS': 2000,
    'MONTE_CARLO_DELTAS': (0.2, 0.4, 0.6, 0.8, 1.0),
    'SIGMA_BAND': 3,
    'RANDOM_INSTANCE_COUNT': 1000,
    'REDUCTION_CONFIGS': 100,
    'LINKER_SEEDS': 20,
    'SCHEMA_VERSION': 1,
    'CUTOFF_BASIS': 'final',
}


class AdmissionsSettings:
    def __init__(self, defaults=None):
        self.defaults = defaults or DEFAULTS
        self._cached = set()

    @property
    def user_settings(self):
        if not hasattr(self, '_user_settings'):
            self._user_settings = getattr(settings, 'ADMISSIONS', {})
        return self._user_settings

    def __getattr__(self, attr):
        if attr not in self.defaults:
            raise AttributeError(f"Invalid admissions setting: '{attr}'")
        value = self.user_settings.get(attr, self.defaults[attr])
        self._cached.add(attr)
        setattr(self, attr, value)
        return value

    def reload(self):
        for attr in self._cached:
            delattr(self, attr)
        self._cached.clear()
        if hasattr(self, '_user_settings'):
            delattr(self, '_user_settings')


admissions_settings = AdmissionsSettings(DEFAULTS)


def reload_admissions_settings(*args, **kwargs):
    if kwargs['setting'] == 'ADMISSIONS':
        admissions_settings.reload()


setting_changed.connect(reload_admissions_settings)
