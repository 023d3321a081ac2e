import os

from .errors import ConfigError

THREADS_ENV = "SSDR_THREADS"


def query_workers() -> int:
    """Worker count for KD-tree queries, from the SSDR_THREADS env var.

    0 or unset means "auto" (all cores, i.e. -1 for scipy). Results of every
    query are independent of this value; it only caps parallelism.
    """
    raw = os.environ.get(THREADS_ENV, "").strip()
    if not raw:
        return -1
    try:
        n = int(raw)
    except ValueError:
        raise ConfigError(f"{THREADS_ENV} must be an integer, got {raw!r}") from None
    if n < 0:
        raise ConfigError(f"{THREADS_ENV} must be >= 0, got {n}")
    return -1 if n == 0 else n
