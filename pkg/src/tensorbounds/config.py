"""Process-wide resource budgets.

Both can be overridden through the environment so that CLI runs and batch
manifests pick them up without extra flags.
"""

import os

#: Maximum number of entries (dense cells) any constructed object may hold.
ENTRY_BUDGET = int(os.environ.get("TENSORBOUNDS_ENTRY_BUDGET", 2_000_000))

#: Default wall-clock budget in seconds for budgeted searches.
TIME_BUDGET = float(os.environ.get("TENSORBOUNDS_BUDGET", 300))

VERSION = "0.1.0"
