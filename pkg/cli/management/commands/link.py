from imsim.snapshots import SnapshotSet
from linker.io import write_trajectories
from linker.linking import link_snapshots

from cli.base import SimulationCommand
from cli.serializers import LinkOptionsSerializer


class Command(SimulationCommand):
    help = 'Link hourly snapshots into student trajectories'
    options_serializer = LinkOptionsSerializer

    def add_command_arguments(self, parser):
        parser.add_argument('--snapshots', required=True, help='Snapshot directory written by imsim')

    def run(self, config):
        result = link_snapshots(SnapshotSet.read(config['snapshots']))
        for warning in result.warnings:
            self.stderr.write(str(warning))
        out = config.get('out')
        if out:
            self.ensure_parent(out)
            write_trajectories(result, out)
        else:
            self.stdout.write(result.trajectory_frame().to_csv(index=False, lineterminator='\n'), ending='')
