import pandas as pd

from exante.enumeration import exact_distribution
from exante.propositions import check_prop4, check_prop5
from mechanisms.registry import Mechanism

from cli.base import SimulationCommand
from cli.serializers import ExanteOptionsSerializer, distribution_rows


class Command(SimulationCommand):
    help = 'Exact ex-ante rank distributions and the TCDM versus DA reports'
    options_serializer = ExanteOptionsSerializer

    def add_command_arguments(self, parser):
        parser.add_argument('--n', type=int, required=True, help='Number of students')
        parser.add_argument('--caps', type=int, nargs='+', required=True, help='College capacities')
        parser.add_argument('--rounds', type=int, help='TCDM round budget, or list cap for cda')
        parser.add_argument('--mechanism', choices=[m.value for m in Mechanism])
        parser.add_argument('--report', choices=ExanteOptionsSerializer.REPORTS)
        parser.add_argument('--budget', type=int, help='Largest number of profiles to enumerate')
        parser.add_argument('--full-profiles', action='store_true', help='Enumerate lower-priority students too')

    def run(self, config):
        n, capacities = config['n'], config['caps']
        if config['report'] == 'prop4':
            report = check_prop4(n, capacities, config['rounds'], strict=False, budget=config.get('budget'))
            self.emit_json(report.to_dict(), config)
        elif config['report'] == 'prop5':
            self.emit_json(check_prop5(n, capacities, config['rounds'], budget=config.get('budget')).to_dict(), config)
        else:
            mechanism = Mechanism(config['mechanism'])
            rounds = None if mechanism is Mechanism.DA else config.get('rounds')
            distributions = exact_distribution(
                n, capacities, rounds, mechanism, budget=config.get('budget'), full_profiles=config['full_profiles']
            )
            self.emit_csv(pd.DataFrame(list(distribution_rows(mechanism.value, distributions))), config)
