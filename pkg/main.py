# ============================================================================
# main.py - Command-line entry point
# ============================================================================

import logging
import sys
from typing import Optional, Sequence

import click

from config import APP_DESCRIPTION, APP_NAME, APP_VERSION, LOG_DIR, LOG_LEVEL
from shared.errors import PlanGenError
from shared.logging import setup_logging

# Import commands
from apps.corpus.commands import synth_command
from apps.inference.commands import generate_command
from apps.metrics.commands import evaluate_command
from apps.stylelab.commands import label_command
from apps.training.commands import train_command

logger = logging.getLogger(__name__)


@click.group(name=APP_NAME, help=APP_DESCRIPTION)
@click.version_option(APP_VERSION, prog_name=APP_NAME)
@click.option("--log-level", type=click.Choice(["debug", "info", "warning", "error"]), default=LOG_LEVEL,
              show_default=True)
@click.option("--log-dir", type=click.Path(file_okay=False), default=LOG_DIR, show_default=True)
def cli(log_level, log_dir):
    setup_logging(log_level, log_dir)


cli.add_command(synth_command)
cli.add_command(label_command)
cli.add_command(train_command)
cli.add_command(generate_command)
cli.add_command(evaluate_command)


def cli_dispatch(argv: Optional[Sequence[str]] = None) -> int:
    """Run one command and map failures to exit codes: 0 success, 2 usage or input error, 1 anything else"""
    try:
        rv = cli.main(args=list(argv) if argv is not None else None, prog_name=APP_NAME, standalone_mode=False)
    except click.UsageError as e:
        e.show()
        return 2
    except click.ClickException as e:
        e.show()
        return e.exit_code
    except click.Abort:
        click.echo("Aborted", err=True)
        return 1
    except PlanGenError as e:
        logger.error(f"{type(e).__name__}: {e}")
        click.echo(f"Error: {e}", err=True)
        return 2
    except Exception as e:
        logger.exception(f"Unexpected failure: {e}")
        click.echo(f"Error: {e}", err=True)
        return 1
    return rv if isinstance(rv, int) else 0


if __name__ == "__main__":
    sys.exit(cli_dispatch())
