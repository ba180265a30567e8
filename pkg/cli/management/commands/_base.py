"""
Shared plumbing for the pipeline management commands.

Every command accepts the common flags below, resolves a RunConfig
(settings < --config file < flags), echoes it into --out-dir and runs under
the numpy error state configured for the environment. Domain errors become
CommandError so the process exits nonzero.
"""

import logging
from pathlib import Path

import numpy as np
from django.conf import settings
from django.core.management.base import BaseCommand, CommandError

from cli.exceptions import ConfigError
from cli.services.run_config import FIELD_TYPES, resolve_run_config, write_config_echo, write_run_meta
from deformation.exceptions import TrainingDiverged
from matching.services.losses import LOSS_KINDS

logger = logging.getLogger(__name__)


class DkeCommand(BaseCommand):
    command_name = ''

    def add_arguments(self, parser):
        parser.add_argument('--config', type=str, help='JSON file with RunConfig values')
        parser.add_argument('--seed', type=int, help='Run seed')
        parser.add_argument('--n-vertices', type=int, help='Contour vertices N (default 128)')
        parser.add_argument('--shrink-ratio', type=float, help='Kernel shrink ratio r (default 0.4)')
        parser.add_argument('--loss', choices=LOSS_KINDS, help='Contour loss kind')
        parser.add_argument('--iterations', type=int, help='Expansion iterations (default 1)')
        parser.add_argument('--iou-threshold', type=float, help='Evaluation match threshold (default 0.5)')
        parser.add_argument('--out-dir', type=str, help='Directory receiving every artifact of the run')
        parser.add_argument('--dataset', type=str, help='Dataset file (JSON Lines); generated from the config when omitted')
        self.add_command_arguments(parser)

    def add_command_arguments(self, parser):
        pass

    def handle(self, *args, **options):
        overrides = {name: options.get(name) for name in FIELD_TYPES if name in options}
        try:
            cfg = resolve_run_config(options.get('config'), overrides)
        except ConfigError as e:
            raise CommandError(f"Invalid configuration: {e}") from e

        out_dir = Path(cfg.out_dir)
        try:
            write_config_echo(cfg, out_dir)
            write_run_meta(out_dir, self.command_name)
            with np.errstate(all=settings.NUMPY_ERRSTATE):
                extra = {k: v for k, v in options.items() if k != 'out_dir'}
                self.run(cfg, out_dir, **extra)
        except TrainingDiverged as e:
            raise CommandError(f"{self.command_name}: {e}") from e
        except (ValueError, OSError) as e:
            logger.debug("%s failed", self.command_name, exc_info=True)
            raise CommandError(f"{self.command_name} failed: {e}") from e

    def run(self, cfg, out_dir: Path, **options):
        raise NotImplementedError

    def check_min_f(self, cfg, f_value: float, label: str):
        """Acceptance gate for CI: fail the command when F falls below --min-f."""
        if cfg.min_f is None:
            return
        if f_value < cfg.min_f:
            raise CommandError(f"{label}: F {f_value:.1f} is below the required {cfg.min_f:.1f}")
        self.stdout.write(self.style.SUCCESS(f"{label}: F {f_value:.1f} >= {cfg.min_f:.1f}"))
