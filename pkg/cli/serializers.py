from rest_framework import serializers

from core.conf import admissions_settings
from core.serializers import StrictSerializer
from exante.distributions import outcome_labels
from mechanisms.registry import Mechanism


class RunConfigSerializer(StrictSerializer):
    """
    Options shared by every subcommand. Subclasses add their own payload
    """
    seed = serializers.IntegerField(min_value=0, required=False)
    threads = serializers.IntegerField(min_value=1, default=1)
    out = serializers.CharField(required=False)

    def validate(self, attrs):
        attrs.setdefault('seed', admissions_settings.DEFAULT_SEED)
        return attrs


class CapacitiesField(serializers.ListField):
    child = serializers.IntegerField(min_value=1)

    def __init__(self, **kwargs):
        kwargs.setdefault('allow_empty', False)
        super().__init__(**kwargs)


class DaOptionsSerializer(RunConfigSerializer):
    instance = serializers.CharField()
    max_choices = serializers.IntegerField(min_value=1, required=False)
    audit = serializers.BooleanField(default=False)


class TcdmOptionsSerializer(RunConfigSerializer):
    instance = serializers.CharField()
    rounds = serializers.IntegerField(min_value=1, required=False)
    effects = serializers.BooleanField(default=False)
    deviation = serializers.CharField(required=False)
    sample = serializers.IntegerField(min_value=1, required=False)


class ExanteOptionsSerializer(RunConfigSerializer):
    REPORTS = ('distribution', 'prop4', 'prop5')

    n = serializers.IntegerField(min_value=1)
    caps = CapacitiesField()
    rounds = serializers.IntegerField(min_value=1, required=False)
    mechanism = serializers.ChoiceField(choices=[m.value for m in Mechanism], default=Mechanism.TCDM.value)
    report = serializers.ChoiceField(choices=REPORTS, default='distribution')
    budget = serializers.IntegerField(min_value=1, required=False)
    full_profiles = serializers.BooleanField(default=False)

    def validate(self, attrs):
        attrs = super().validate(attrs)
        needs_rounds = attrs['report'] != 'distribution' or attrs['mechanism'] == Mechanism.CDA.value
        if needs_rounds and 'rounds' not in attrs:
            raise serializers.ValidationError({'rounds': "This report needs a round budget."})
        if attrs['report'] != 'distribution' and attrs['full_profiles']:
            raise serializers.ValidationError({'full_profiles': "Only the distribution report enumerates full profiles."})
        return attrs


class McOptionsSerializer(RunConfigSerializer):
    n = serializers.IntegerField(min_value=1)
    caps = CapacitiesField()
    rounds = serializers.IntegerField(min_value=1, required=False)
    delta = serializers.ListField(child=serializers.FloatField(min_value=0, max_value=1), allow_empty=False, required=False)
    sims = serializers.IntegerField(min_value=1, required=False)

    def validate(self, attrs):
        attrs = super().validate(attrs)
        attrs.setdefault('delta', list(admissions_settings.MONTE_CARLO_DELTAS))
        attrs.setdefault('sims', admissions_settings.MONTE_CARLO_SIMS)
        return attrs


class ImsimOptionsSerializer(RunConfigSerializer):
    """`out` is the output directory"""
    config = serializers.CharField(required=False)
    out = serializers.CharField()


class LinkOptionsSerializer(RunConfigSerializer):
    snapshots = serializers.CharField()


class LinkScoreOptionsSerializer(RunConfigSerializer):
    result = serializers.CharField()
    truth = serializers.CharField()


class ReproduceOptionsSerializer(RunConfigSerializer):
    """`out` is the bundle directory"""
    out = serializers.CharField()


class DistributionRowSerializer(serializers.Serializer):
    """One (mechanism, position, outcome) cell of an exact rank table"""
    mechanism = serializers.CharField(read_only=True)
    position = serializers.IntegerField(read_only=True)
    outcome = serializers.CharField(read_only=True)
    exact = serializers.CharField(read_only=True)
    probability = serializers.FloatField(read_only=True)
    rounded = serializers.FloatField(read_only=True)


def distribution_rows(mechanism, distributions):
    rows = []
    for dist in distributions:
        for label, exact, rounded in zip(outcome_labels(dist.num_colleges), dist.probs, dist.rounded()):
            rows.append({
                'mechanism': mechanism,
                'position': dist.position,
                'outcome': label,
                'exact': str(exact),
                'probability': float(exact),
                'rounded': rounded,
            })
    return DistributionRowSerializer(rows, many=True).data
