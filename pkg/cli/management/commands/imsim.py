import logging
import os

from core.conf import admissions_settings
from imsim.clearinghouse import run_clearinghouse
from imsim.metrics import assignment_rate_table, cutoff_movement_table
from imsim.population import generate_population
from imsim.serializers import ImsimConfigSerializer, OutcomeMetricsSerializer, read_imsim_config

from cli.base import SimulationCommand, write_csv, write_json
from cli.serializers import ImsimOptionsSerializer

logger = logging.getLogger(__name__)


def default_run_config():
    serializer = ImsimConfigSerializer(data={'schema_version': admissions_settings.SCHEMA_VERSION})
    serializer.is_valid(raise_exception=True)
    return serializer.save()


class Command(SimulationCommand):
    help = 'Simulate the staggered-closing clearinghouse and write hourly snapshots'
    options_serializer = ImsimOptionsSerializer
    out_aliases = ('--outdir',)

    def add_command_arguments(self, parser):
        parser.add_argument('--config', help='YAML run configuration; defaults apply when omitted')

    def handle(self, *args, **options):
        self.seed_given = options.get('seed') is not None
        return super().handle(*args, **options)

    def run(self, config):
        run_config = read_imsim_config(config['config']) if 'config' in config else default_run_config()
        # --seed wins over the seed in the config file
        seed = config['seed']
        if not self.seed_given and run_config['seed'] is not None:
            seed = run_config['seed']
        out = config['out']

        population = generate_population(run_config['population'], run_config['schedule'], seed=seed)
        run = run_clearinghouse(population, run_config['schedule'], run_config['behavior'], seed=seed)
        run.snapshots.write(os.path.join(out, 'snapshots'), os.path.join(out, 'truth'))
        write_json(OutcomeMetricsSerializer(run.metrics).data, os.path.join(out, 'metrics.json'))
        write_csv(assignment_rate_table(run.metrics), os.path.join(out, 'assignment_rates.csv'))
        write_csv(cutoff_movement_table(run.snapshots), os.path.join(out, 'cutoff_movement.csv'))
        logger.info(f"Simulated {population.size} students over {len(run.schedule.hours)} hours with seed {seed}")
