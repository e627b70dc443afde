import yaml
from rest_framework import serializers

from core.conf import admissions_settings
from core.exceptions import InvalidInputError
from core.serializers import StrictSerializer

from .clearinghouse import CUTOFF_BASES, BehaviorConfig
from .population import PopulationConfig
from .schedule import DEFAULT_BAND_LOWER_BOUNDS, BatchSchedule


class SchemaVersionField(serializers.IntegerField):
    def to_internal_value(self, data):
        value = super().to_internal_value(data)
        if value != admissions_settings.SCHEMA_VERSION:
            raise serializers.ValidationError(
                f"Unsupported schema_version {value}, expected {admissions_settings.SCHEMA_VERSION}."
            )
        return value


def _build(factory, attrs):
    try:
        return factory(**attrs)
    except InvalidInputError as exc:
        raise serializers.ValidationError(str(exc))


class PopulationConfigSerializer(StrictSerializer):
    num_students = serializers.IntegerField(min_value=1, default=5000)
    num_universities = serializers.IntegerField(min_value=1, default=60)
    score_mean = serializers.FloatField(default=560.0)
    score_sd = serializers.FloatField(min_value=0, default=70.0)
    score_max = serializers.IntegerField(default=750)
    bonus_prob = serializers.FloatField(min_value=0, max_value=1, default=0.1)
    bonus_values = serializers.ListField(child=serializers.IntegerField(min_value=1), default=[5, 10, 20])
    delta = serializers.FloatField(min_value=0, max_value=1, default=0.5)
    quota_log_mean = serializers.FloatField(default=4.0)
    quota_log_sigma = serializers.FloatField(min_value=0, default=0.5)
    quota_ratio = serializers.FloatField(min_value=1, default=1.2)
    quota_cap = serializers.IntegerField(min_value=1, default=1000)
    programs_per_university = serializers.IntegerField(min_value=1, default=8)
    accept_any_prob = serializers.FloatField(min_value=0, max_value=1, default=0.5)
    female_prob = serializers.FloatField(min_value=0, max_value=1, default=0.5)
    ethnicity_probs = serializers.ListField(
        child=serializers.FloatField(min_value=0, max_value=1), allow_empty=False, default=[0.8, 0.15, 0.05]
    )

    def validate(self, attrs):
        attrs['config'] = _build(PopulationConfig, dict(attrs))
        return attrs

    def create(self, validated_data):
        return validated_data['config']


class ScheduleConfigSerializer(StrictSerializer):
    """Batches from descending score lower bounds, one deadline hour apart"""
    lower_bounds = serializers.ListField(
        child=serializers.IntegerField(), allow_empty=False, default=list(DEFAULT_BAND_LOWER_BOUNDS)
    )
    opening_hour = serializers.IntegerField(min_value=0, default=1)
    mandatory_entry_hour = serializers.IntegerField(min_value=0, default=2)
    first_deadline = serializers.IntegerField(min_value=0, default=3)
    total_hours = serializers.IntegerField(min_value=1, allow_null=True, default=None)

    def validate(self, attrs):
        attrs['schedule'] = _build(BatchSchedule.from_bands, dict(attrs))
        return attrs

    def create(self, validated_data):
        return validated_data['schedule']


class BehaviorConfigSerializer(StrictSerializer):
    revision_prob = serializers.FloatField(min_value=0, max_value=1, default=1.0)
    late_entry_prob = serializers.FloatField(min_value=0, max_value=1, default=0.0)
    program_revision_prob = serializers.FloatField(min_value=0, max_value=1, default=0.0)
    cutoff_basis = serializers.ChoiceField(choices=CUTOFF_BASES, required=False)

    def validate(self, attrs):
        attrs['behavior'] = _build(BehaviorConfig, dict(attrs))
        return attrs

    def create(self, validated_data):
        return validated_data['behavior']


class ImsimConfigSerializer(StrictSerializer):
    """
    YAML run configuration for the clearinghouse simulator:
    {schema_version, seed?, population: {...}, schedule: {...}, behavior: {...}}
    """
    schema_version = SchemaVersionField()
    seed = serializers.IntegerField(min_value=0, required=False)
    population = PopulationConfigSerializer(required=False)
    schedule = ScheduleConfigSerializer(required=False)
    behavior = BehaviorConfigSerializer(required=False)

    def validate(self, attrs):
        for key, nested in (('population', PopulationConfigSerializer),
                            ('schedule', ScheduleConfigSerializer),
                            ('behavior', BehaviorConfigSerializer)):
            if key not in attrs:
                serializer = nested(data={})
                serializer.is_valid(raise_exception=True)
                attrs[key] = serializer.validated_data
        return attrs

    def create(self, validated_data):
        return {
            'seed': validated_data.get('seed'),
            'population': validated_data['population']['config'],
            'schedule': validated_data['schedule']['schedule'],
            'behavior': validated_data['behavior']['behavior'],
        }


class OutcomeMetricsSerializer(serializers.Serializer):
    population_size = serializers.IntegerField(read_only=True)
    void_count = serializers.IntegerField(read_only=True)
    changed_final_round = serializers.IntegerField(read_only=True)
    changed_final_round_and_rejected = serializers.IntegerField(read_only=True)
    unassigned_above_prior_cutoff = serializers.IntegerField(read_only=True)
    unassigned_ahead_of_prior_marginal = serializers.IntegerField(read_only=True)
    admitted_by_rank = serializers.IntegerField(read_only=True)
    admitted_by_cutoff = serializers.IntegerField(read_only=True)
    measure_divergence = serializers.IntegerField(read_only=True)


def read_imsim_config(path):
    """Load and validate a YAML run configuration, raising serializers.ValidationError on bad content."""
    try:
        with open(path, encoding='utf-8') as handle:
            payload = yaml.safe_load(handle)
    except OSError as exc:
        raise serializers.ValidationError(f"{path}: cannot read config ({exc})")
    except yaml.YAMLError as exc:
        raise serializers.ValidationError(f"{path}: not valid YAML ({exc})")
    serializer = ImsimConfigSerializer(data=payload)
    serializer.is_valid(raise_exception=True)
    return serializer.save()
