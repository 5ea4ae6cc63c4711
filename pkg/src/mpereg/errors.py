"""Exception types shared across the registration pipeline."""


class ConfigError(ValueError):
    """Invalid configuration file content or malformed CLI parameters."""


class CloudFormatError(ValueError):
    """Unparseable point-cloud or transform file."""

    def __init__(self, path, line_no, message):
        super().__init__(f"{path}:{line_no}: {message}")
        self.path = str(path)
        self.line_no = line_no


class DegenerateConfigurationError(RuntimeError):
    """Numerical degeneracy: rank-deficient fit or unresolvable geometry."""
