from cli.base import SimulationCommand
from cli.pipeline import reproduce
from cli.serializers import ReproduceOptionsSerializer


class Command(SimulationCommand):
    help = 'Write the full reproduction bundle and run every acceptance check'
    options_serializer = ReproduceOptionsSerializer
    out_aliases = ('--outdir',)

    def run(self, config):
        checks = reproduce(config['out'], seed=config['seed'], threads=config['threads'])
        self.stdout.write(self.style.SUCCESS(f"{len(checks)} checks passed, bundle in {config['out']}"))
