"""
Shared plumbing for the management commands.

Every subcommand takes `--seed`, `--threads` and `--out`, validates its
options with a RunConfigSerializer before doing any work, and maps domain
errors to exit codes: 1 for bad input, 2 for failed acceptance checks.
"""
import logging
import os

import pandas as pd
from django.core.management.base import BaseCommand, CommandError
from rest_framework import serializers
from rest_framework.renderers import JSONRenderer

from core.exceptions import AcceptanceCheckFailed, EnumerationBudgetExceeded, InvalidInputError

from .serializers import RunConfigSerializer

logger = logging.getLogger(__name__)

# options every Django command receives
DJANGO_OPTIONS = {'verbosity', 'settings', 'pythonpath', 'traceback', 'no_color', 'force_color', 'skip_checks', 'stdout', 'stderr'}

VALIDATION_EXIT = 1
ACCEPTANCE_EXIT = 2


def render_json(data) -> bytes:
    return JSONRenderer().render(data, renderer_context={'indent': 2}) + b'\n'


def write_json(data, path):
    with open(path, 'wb') as handle:
        handle.write(render_json(data))
    logger.info(f"Wrote {path}")
    return path


def write_csv(frame: pd.DataFrame, path):
    frame.to_csv(path, index=False, lineterminator='\n')
    logger.info(f"Wrote {path}")
    return path


def error_message(exc):
    if isinstance(exc, serializers.ValidationError):
        return f"Invalid options: {exc.detail}"
    return str(exc)


class SimulationCommand(BaseCommand):
    options_serializer = RunConfigSerializer
    out_aliases = ()

    def add_arguments(self, parser):
        parser.add_argument('--seed', type=int, help='Seed for every random stream of the run')
        parser.add_argument('--threads', type=int, help='Worker processes for independent simulations')
        parser.add_argument('--out', *self.out_aliases, dest='out', help='Output file or directory')
        self.add_command_arguments(parser)

    def add_command_arguments(self, parser):
        pass

    def validate_options(self, options):
        payload = {
            key: value for key, value in options.items()
            if key not in DJANGO_OPTIONS and value is not None
        }
        serializer = self.options_serializer(data=payload)
        serializer.is_valid(raise_exception=True)
        return serializer.validated_data

    def handle(self, *args, **options):
        try:
            config = self.validate_options(options)
            self.run(config)
        except (serializers.ValidationError, InvalidInputError, EnumerationBudgetExceeded) as exc:
            message = error_message(exc)
            logger.error(message)
            raise CommandError(message, returncode=VALIDATION_EXIT)
        except OSError as exc:
            message = f"{exc.filename or ''}: {exc.strerror or exc}"
            logger.error(message)
            raise CommandError(message, returncode=VALIDATION_EXIT)
        except AcceptanceCheckFailed as exc:
            logger.error(str(exc))
            raise CommandError(str(exc), returncode=ACCEPTANCE_EXIT)

    def run(self, config):
        raise NotImplementedError('subclasses of SimulationCommand must provide a run() method')

    def emit_json(self, data, config):
        """Write to `--out` when given, else to stdout."""
        out = config.get('out')
        if out:
            self.ensure_parent(out)
            write_json(data, out)
        else:
            self.stdout.write(render_json(data).decode('utf-8'), ending='')

    def emit_csv(self, frame: pd.DataFrame, config):
        out = config.get('out')
        if out:
            self.ensure_parent(out)
            write_csv(frame, out)
        else:
            self.stdout.write(frame.to_csv(index=False, lineterminator='\n'), ending='')

    @staticmethod
    def ensure_parent(path):
        parent = os.path.dirname(os.path.abspath(path))
        os.makedirs(parent, exist_ok=True)
