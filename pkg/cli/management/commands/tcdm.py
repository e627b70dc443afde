from core.serializers import read_instance
from mechanisms.da import run_da
from mechanisms.deviation import unilateral_deviation_check
from mechanisms.serializers import DeviationReportSerializer, TcdmTrajectorySerializer
from mechanisms.tcdm import run_tcdm, time_constraint_effects

from cli.base import SimulationCommand
from cli.serializers import TcdmOptionsSerializer


class Command(SimulationCommand):
    help = 'Run the time-constrained dynamic mechanism and print its round-by-round trajectory'
    options_serializer = TcdmOptionsSerializer

    def add_command_arguments(self, parser):
        parser.add_argument('--instance', required=True, help='Instance JSON file')
        parser.add_argument('--rounds', type=int, help='Round budget T; omit to run until nothing changes')
        parser.add_argument('--effects', action='store_true', help='Classify each student against DA')
        parser.add_argument('--deviation', help='Student whose best unilateral misreport is searched')
        parser.add_argument('--sample', type=int, help='Random orders to try instead of every order')

    def run(self, config):
        instance = read_instance(config['instance'])
        trajectory = run_tcdm(instance, config.get('rounds'))
        payload = dict(TcdmTrajectorySerializer(trajectory).data)
        if config['effects']:
            effects = time_constraint_effects(instance, trajectory, run_da(instance))
            payload['effects'] = {student: effect.value for student, effect in effects.items()}
        if 'deviation' in config:
            report = unilateral_deviation_check(
                instance, config['deviation'], config.get('rounds'), sample=config.get('sample'), seed=config['seed']
            )
            payload['deviation'] = DeviationReportSerializer(report).data
        self.emit_json(payload, config)
