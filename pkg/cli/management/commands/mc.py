from exante.montecarlo import sweep_deltas

from cli.base import SimulationCommand
from cli.serializers import McOptionsSerializer


class Command(SimulationCommand):
    help = 'Monte Carlo rank CDFs of TCDM and DA under correlated utilities'
    options_serializer = McOptionsSerializer

    def add_command_arguments(self, parser):
        parser.add_argument('--n', type=int, required=True, help='Number of students')
        parser.add_argument('--caps', type=int, nargs='+', required=True, help='College capacities')
        parser.add_argument('--rounds', type=int, help='TCDM round budget; omit to run until nothing changes')
        parser.add_argument('--delta', type=float, nargs='+', help='Weights of the common value, one run each')
        parser.add_argument('--sims', type=int, help='Simulations per delta')

    def run(self, config):
        _, frame = sweep_deltas(
            config['n'], config['caps'], config.get('rounds'),
            deltas=config['delta'], num_sims=config['sims'], seed=config['seed'], threads=config['threads'],
        )
        self.emit_csv(frame, config)
