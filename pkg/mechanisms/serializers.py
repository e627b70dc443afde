from rest_framework import serializers


class RoundRecordSerializer(serializers.Serializer):
    """One TCDM round: applications, tentative matching, published cutoffs"""
    index = serializers.IntegerField(read_only=True)
    applications = serializers.SerializerMethodField()
    tentative = serializers.SerializerMethodField()
    cutoffs = serializers.SerializerMethodField()
    rejected = serializers.ListField(child=serializers.CharField(), read_only=True)

    def get_applications(self, record):
        return dict(record.applications)

    def get_tentative(self, record):
        return record.tentative.to_dict()

    def get_cutoffs(self, record):
        return record.cutoffs.to_dict()


class TcdmTrajectorySerializer(serializers.Serializer):
    round_budget = serializers.IntegerField(read_only=True, allow_null=True)
    converged = serializers.BooleanField(read_only=True)
    rounds_used = serializers.IntegerField(read_only=True)
    rounds = RoundRecordSerializer(many=True, read_only=True)
    final = serializers.SerializerMethodField()

    def get_final(self, trajectory):
        return trajectory.final.to_dict()


class DeviationReportSerializer(serializers.Serializer):
    deviator = serializers.CharField(read_only=True)
    round_budget = serializers.IntegerField(read_only=True, allow_null=True)
    truthful_outcome = serializers.CharField(read_only=True, allow_null=True)
    best_outcome = serializers.CharField(read_only=True, allow_null=True)
    best_order = serializers.ListField(child=serializers.CharField(), read_only=True)
    orders_tried = serializers.IntegerField(read_only=True)
    exhaustive = serializers.BooleanField(read_only=True)
    profitable = serializers.BooleanField(read_only=True)
