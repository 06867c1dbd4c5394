"""Process-wide defaults for scorehazard.

The values below are read by the command line and used as keyword defaults
by the library. ``Setup`` changes them for the running process, the same way
the output folder and verbosity are set once at the top of a script::

    import scorehazard as sh

    sh.config.Setup(folder="runs/2024-q1", verbose=1)
"""

import logging
import os
import sys
from typing import Optional

ENV_OUTPUT_DIR = "SCOREHAZARD_OUTPUT_DIR"

# Estimation defaults
confidence_level = 0.95
variance_mode = "greenwood"
alpha_in = 0.05
alpha_out = 0.10
collinearity_threshold = 0.95
tol = 1e-9
max_iter = 50

# Backblaze preparation
lookback_days = 5
hours_per_year = 8760.0

# Output
folder_save = os.environ.get(ENV_OUTPUT_DIR, ".")
verbose_level = 1

_LEVELS = {0: logging.WARNING, 1: logging.INFO, 2: logging.DEBUG}


class _StderrHandler(logging.StreamHandler):
    """Stream handler bound to whatever sys.stderr is when a record is emitted."""

    def emit(self, record: logging.LogRecord) -> None:
        self.stream = sys.stderr
        super().emit(record)


def default_output_dir() -> str:
    """Return the output folder, re-reading the environment if never overridden."""
    if folder_save != ".":
        return folder_save
    return os.environ.get(ENV_OUTPUT_DIR, ".")


class Setup:
    """Configure the output folder and logging verbosity.

    Attributes:
        folder: Folder where artifacts are written when no explicit path is given.
        verbose: 0 = warnings only, 1 = stage messages, 2 = optimizer detail.
    """

    def __init__(
        self,
        folder: Optional[str] = None,
        verbose: int = 1,
        show: bool = False,
    ) -> None:
        """Apply the settings.

        Args:
            folder: Output folder. ``None`` keeps the current value, which
                defaults to ``$SCOREHAZARD_OUTPUT_DIR`` or ``"."``.
            verbose: Logging verbosity, 0 to 2.
            show: Print the resulting settings.
        """
        global folder_save, verbose_level
        if folder is not None:
            folder_save = folder
        self.folder = default_output_dir()
        self.verbose = verbose
        verbose_level = verbose
        logger = logging.getLogger("scorehazard")
        logger.setLevel(_LEVELS.get(verbose, logging.DEBUG))
        if not any(isinstance(h, _StderrHandler) for h in logger.handlers):
            handler = _StderrHandler()
            handler.setFormatter(
                logging.Formatter("%(levelname)s %(name)s: %(message)s")
            )
            logger.addHandler(handler)
        if show:
            self.info()

    def info(self) -> None:
        """Print the active settings."""
        print("\n----------")
        print("Output folder: " + str(self.folder))
        print("Confidence level: " + str(confidence_level))
        print("Variance mode: " + variance_mode)
        print("Stepwise alpha in/out: " + str(alpha_in) + " / " + str(alpha_out))
        print("Lookback days: " + str(lookback_days))
        print("----------\n")
