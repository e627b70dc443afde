from linker.io import align_truth, read_trajectories, read_truth
from linker.scoring import score_linkage

from cli.base import SimulationCommand
from cli.serializers import LinkScoreOptionsSerializer


class Command(SimulationCommand):
    help = 'Score a trajectory file against simulator ground truth'
    options_serializer = LinkScoreOptionsSerializer

    def add_command_arguments(self, parser):
        parser.add_argument('--result', required=True, help='Trajectory CSV written by link')
        parser.add_argument('--truth', required=True, help='Ground-truth CSV or directory of sidecar files')

    def run(self, config):
        result = read_trajectories(config['result'])
        score = score_linkage(result, align_truth(result, read_truth(config['truth'])))
        self.emit_json(score.to_dict(), config)
