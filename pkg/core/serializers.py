import json
import math
from collections.abc import Mapping

from rest_framework import serializers

from .audit import AuditReport
from .domain import Matching, ProblemInstance
from .exceptions import InvalidInputError


class StrictSerializer(serializers.Serializer):
    """
    Serializer that rejects fields it does not declare
    """

    def to_internal_value(self, data):
        if isinstance(data, Mapping):
            unknown = sorted(set(data) - set(self.fields))
            if unknown:
                raise serializers.ValidationError({name: ["Unknown field."] for name in unknown})
        return super().to_internal_value(data)


class ScoreField(serializers.Field):
    """Strictly positive integer or real score"""
    default_error_messages = {
        'invalid': 'A score must be a positive number.',
    }

    def to_internal_value(self, data):
        if isinstance(data, bool) or not isinstance(data, (int, float)):
            self.fail('invalid')
        if not math.isfinite(data) or data <= 0:
            self.fail('invalid')
        return data

    def to_representation(self, value):
        return value


class StudentEntrySerializer(StrictSerializer):
    id = serializers.CharField(max_length=64)
    score = ScoreField()


class CollegeEntrySerializer(StrictSerializer):
    id = serializers.CharField(max_length=64)
    capacity = serializers.IntegerField(min_value=1)


class ProblemInstanceSerializer(StrictSerializer):
    """
    Serializer for the JSON instance file:
    {students: [{id, score}], colleges: [{id, capacity}], preferences: {id: [college, ...]}}
    """
    students = StudentEntrySerializer(many=True, allow_empty=False)
    colleges = CollegeEntrySerializer(many=True, allow_empty=False)
    preferences = serializers.DictField(
        child=serializers.ListField(child=serializers.CharField(max_length=64), allow_empty=True)
    )

    def validate(self, attrs):
        """
        Check the cross-field invariants by building the instance
        """
        scores = {}
        for entry in attrs['students']:
            if entry['id'] in scores:
                raise serializers.ValidationError({'students': f"Duplicate student id {entry['id']}."})
            scores[entry['id']] = entry['score']

        capacities = {}
        for entry in attrs['colleges']:
            if entry['id'] in capacities:
                raise serializers.ValidationError({'colleges': f"Duplicate college id {entry['id']}."})
            capacities[entry['id']] = entry['capacity']

        try:
            attrs['instance'] = ProblemInstance.build(scores, capacities, attrs['preferences'])
        except InvalidInputError as exc:
            raise serializers.ValidationError(str(exc))
        return attrs

    def create(self, validated_data):
        return validated_data['instance']

    def to_representation(self, instance):
        return instance.to_dict()


class MatchingSerializer(serializers.Serializer):
    """Matching as {studentId: collegeId | null}"""
    assignment = serializers.DictField(child=serializers.CharField(allow_null=True))

    def validate(self, attrs):
        instance = self.context.get('instance')
        matching = Matching(attrs['assignment'])
        if instance is not None:
            try:
                matching.check_feasible(instance)
            except InvalidInputError as exc:
                raise serializers.ValidationError(str(exc))
        attrs['matching'] = matching
        return attrs

    def create(self, validated_data):
        return validated_data['matching']

    def to_representation(self, matching):
        return {'assignment': matching.to_dict()}


class AuditReportSerializer(serializers.Serializer):
    is_stable = serializers.BooleanField(read_only=True)
    blocking_pairs = serializers.ListField(
        child=serializers.ListField(child=serializers.CharField()), read_only=True
    )
    blocking_students = serializers.ListField(child=serializers.CharField(), read_only=True)
    justified_envy_count = serializers.IntegerField(read_only=True)
    cutoffs = serializers.SerializerMethodField()

    def get_cutoffs(self, report: AuditReport):
        return report.cutoffs.to_dict() if report.cutoffs is not None else None


def read_instance(path):
    """Load and validate an instance file, raising serializers.ValidationError on bad content."""
    with open(path, encoding='utf-8') as handle:
        try:
            payload = json.load(handle)
        except json.JSONDecodeError as exc:
            raise serializers.ValidationError(f"{path}: not valid JSON ({exc})")
    serializer = ProblemInstanceSerializer(data=payload)
    serializer.is_valid(raise_exception=True)
    return serializer.save()
