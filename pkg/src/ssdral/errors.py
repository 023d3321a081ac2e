class ConfigError(ValueError):
    """Bad configuration: unknown keys, invalid values, inconsistent settings."""


class DataError(ValueError):
    """Bad input data: malformed files, out-of-range labels, empty inputs."""
