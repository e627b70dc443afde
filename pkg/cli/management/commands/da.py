from core.audit import audit_stability
from core.serializers import AuditReportSerializer, read_instance
from mechanisms.da import run_constrained_da, run_da

from cli.base import SimulationCommand
from cli.serializers import DaOptionsSerializer


class Command(SimulationCommand):
    help = 'Run student-proposing deferred acceptance on an instance file'
    options_serializer = DaOptionsSerializer

    def add_command_arguments(self, parser):
        parser.add_argument('--instance', required=True, help='Instance JSON file')
        parser.add_argument('--max-choices', type=int, help='Cut every list to its first K acceptable colleges')
        parser.add_argument('--audit', action='store_true', help='Add the stability audit of the matching')

    def run(self, config):
        instance = read_instance(config['instance'])
        if 'max_choices' in config:
            matching = run_constrained_da(instance, config['max_choices'])
        else:
            matching = run_da(instance)
        payload = {'assignment': matching.to_dict()}
        if config['audit']:
            payload['audit'] = AuditReportSerializer(audit_stability(instance, matching)).data
        self.emit_json(payload, config)
