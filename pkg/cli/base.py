import argparse
import logging
import sys
import time
from contextlib import contextmanager
from pathlib import Path

import numpy as np
from django.conf import settings
from django.core.management.base import BaseCommand, CommandError, DjangoHelpFormatter

from core.exceptions import EXIT_IO, EXIT_NUMERICAL, EXIT_USAGE, ConfigurationError, RisklabError

from .config import load_config

logger = logging.getLogger(__name__)


class HelpFormatter(DjangoHelpFormatter, argparse.ArgumentDefaultsHelpFormatter):
    """Django's formatter, with every option's default appended to its help"""


class RisklabCommand(BaseCommand):
    """Base class of every risklab command

    Subclasses implement `run(**options)`. Domain errors become a
    `CommandError` carrying the exit code of their class (1 usage, 2 I/O,
    3 numerical); argument and configuration errors exit with 1 after
    printing the usage line.
    """
    requires_system_checks = []
    uses_config = True

    def create_parser(self, prog_name, subcommand, **kwargs):
        kwargs.setdefault('formatter_class', HelpFormatter)
        parser = super().create_parser(prog_name, subcommand, **kwargs)
        parser.called_from_command_line = False
        self._usage = parser.format_usage()
        return parser

    def run_from_argv(self, argv):
        try:
            super().run_from_argv(argv)
        except CommandError as exc:
            # Raised by the parser itself; errors from `handle` exit inside run_from_argv.
            self.stderr.write(self._usage.rstrip())
            self.stderr.write(str(exc))
            sys.exit(EXIT_USAGE)

    def add_arguments(self, parser):
        if self.uses_config:
            parser.add_argument('--config', help='Experiment file (YAML); omitted sections use the built-in defaults')
        parser.add_argument(
            '--threads', type=int, default=settings.RISKLAB['THREADS'],
            help='Maximum number of worker threads',
        )

    def handle(self, *args, **options):
        self.stage = None
        started = time.perf_counter()
        try:
            if options.get('threads') is not None and options['threads'] < 1:
                raise ConfigurationError("--threads must be >= 1")
            self.config = load_config(options.get('config')) if self.uses_config else None
            self.run(**options)
        except RisklabError as exc:
            if exc.exit_code == EXIT_USAGE:
                self.stderr.write(self._usage.rstrip())
            raise CommandError(self._describe(exc), returncode=exc.exit_code) from exc
        except (np.linalg.LinAlgError, FloatingPointError) as exc:
            raise CommandError(self._describe(exc), returncode=EXIT_NUMERICAL) from exc
        except OSError as exc:
            raise CommandError(self._describe(f"I/O error: {exc}"), returncode=EXIT_IO) from exc
        elapsed = time.perf_counter() - started
        logger.info(f"{self.__module__.rsplit('.', 1)[-1]} finished in {elapsed:.1f} s")
        self.stdout.write(f"Finished in {elapsed:.1f} s")

    def run(self, **options):
        raise NotImplementedError('subclasses of RisklabCommand must provide a run() method')

    def _describe(self, exc):
        return f"{self.stage}: {exc}" if self.stage else str(exc)

    @contextmanager
    def in_stage(self, name):
        previous, self.stage = self.stage, name
        logger.info(f"Stage {name}")
        yield
        self.stage = previous

    def input_file(self, path):
        path = Path(path)
        if not path.is_file():
            raise CommandError(f"input file {path} does not exist", returncode=EXIT_IO)
        return path

    def output_directory(self, path=None):
        directory = Path(path) if path else self.config.output_directory
        directory.mkdir(parents=True, exist_ok=True)
        return directory

    def output_file(self, path):
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        return path
