from typing import List, Optional
import logging
import os
import sys

from catenoid_lab.core import config as settings

THREAD_VARIABLES = ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS")


def requested_threads(argv: List[str]) -> Optional[int]:
    """Value of --threads in argv, or None when the flag is absent or malformed."""
    for i, arg in enumerate(argv):
        value = None
        if arg == "--threads" and i + 1 < len(argv):
            value = argv[i + 1]
        elif arg.startswith("--threads="):
            value = arg.split("=", 1)[1]
        if value is not None:
            return int(value) if value.isdigit() and int(value) >= 1 else None
    return None


def limit_threads(argv: List[str]) -> None:
    threads = requested_threads(argv)
    for name in THREAD_VARIABLES:
        if threads is not None:
            os.environ[name] = str(threads)
        else:
            os.environ.setdefault(name, str(settings.DEFAULT_THREADS))


# BLAS and OpenMP pools read these once, so they must be fixed before numpy loads
limit_threads(sys.argv[1:])

import click  # noqa: E402

from catenoid_lab.cli.commands import cli  # noqa: E402
from catenoid_lab.core.exceptions import LabError, NumericalTerminationError  # noqa: E402

logger = logging.getLogger(__name__)


def configure_logging(level: str = settings.LOG_LEVEL, log_file: str = settings.LOG_FILE) -> None:
    logging.basicConfig(
        level=getattr(logging, str(level).upper(), logging.INFO),
        format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
        handlers=[
            logging.FileHandler(log_file),
            logging.StreamHandler()
        ]
    )


def run(argv: Optional[List[str]] = None) -> int:
    """
    Run one subcommand and map the outcome to an exit status:
    0 success, 2 usage or configuration, 3 numerical termination or failed audit, 4 I/O, 1 unexpected.
    """
    argv = list(sys.argv[1:] if argv is None else argv)
    limit_threads(argv)
    try:
        result = cli.main(args=argv, prog_name="catenoid-lab", standalone_mode=False, obj={"argv": argv})
    except click.UsageError as exc:
        exc.show()
        return 2
    except click.ClickException as exc:
        exc.show()
        return exc.exit_code
    except click.Abort:
        logger.error("Aborted")
        return 1
    except NumericalTerminationError as exc:
        logger.warning(f"⚠️ {exc.detail}")
        return exc.exit_code
    except LabError as exc:
        logger.error(f"❌ {exc.error_code}: {exc.detail}")
        return exc.exit_code
    except Exception as exc:
        logger.error(f"❌ Unexpected error: {str(exc)}", exc_info=True)
        return 1
    return result if isinstance(result, int) else 0


if __name__ == "__main__":
    configure_logging()
    sys.exit(run())
