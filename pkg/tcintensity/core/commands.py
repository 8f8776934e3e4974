"""Base class for the tcintensity management commands."""

from __future__ import annotations

import logging
from dataclasses import fields
from typing import TYPE_CHECKING
from typing import Any

from django.core.management.base import BaseCommand
from django.core.management.base import CommandError

from tcintensity.core.exceptions import IntensityError
from tcintensity.core.runconfig import RunConfig

if TYPE_CHECKING:
    from argparse import ArgumentParser

PACKAGE_LOGGER = "tcintensity"


class IntensityCommand(BaseCommand):
    """Adds the shared --config/--seed/--out/--quiet flags and maps library errors to exit codes.

    Subclasses implement ``add_command_arguments`` and ``run``. Every option
    whose name is a :class:`RunConfig` field overrides the config file.
    """

    def add_arguments(self, parser: ArgumentParser) -> None:
        parser.add_argument("--config", type=str, default=None, help="JSON run configuration file")
        parser.add_argument("--seed", type=int, default=None, help="Master seed")
        parser.add_argument("--out", type=str, default=None, help="Output directory")
        parser.add_argument("--quiet", action="store_true", help="Only report warnings and errors")
        self.add_command_arguments(parser)

    def add_command_arguments(self, parser: ArgumentParser) -> None:
        pass

    def handle(self, *args, **options) -> None:
        self.quiet = options["quiet"]
        package_logger = logging.getLogger(PACKAGE_LOGGER)
        level = package_logger.level
        if self.quiet:
            package_logger.setLevel(logging.WARNING)
        try:
            names = {f.name for f in fields(RunConfig)}
            flags = {key: value for key, value in options.items() if key in names}
            config = RunConfig.build(options["config"], **flags)
            self.run(config, **options)
        except IntensityError as e:
            self.stderr.write(self.style.ERROR(str(e)))
            raise CommandError(str(e), returncode=e.exit_code) from e
        finally:
            package_logger.setLevel(level)

    def run(self, config: RunConfig, /, **options: Any) -> None:
        raise NotImplementedError

    def progress(self, message: str) -> None:
        if not self.quiet:
            self.stdout.write(message)

    def success(self, message: str) -> None:
        if not self.quiet:
            self.stdout.write(self.style.SUCCESS(message))
