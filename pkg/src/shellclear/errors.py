"""Exception hierarchy shared by the simulator modules and the CLI."""


class ShellClearError(Exception):
    """Base class for all simulator errors."""


class ParameterError(ShellClearError, ValueError):
    """A physical or configuration parameter violates its invariant."""


class ShapeError(ShellClearError, ValueError):
    """An array argument has the wrong length."""


class NumericalInstabilityError(ShellClearError, ArithmeticError):
    """A simulation produced non-finite values.

    ``component`` names the offending state entry (e.g. ``"t_blanket[7]"``).
    """

    def __init__(self, message, component=None, scenario=None):
        super().__init__(message)
        self.component = component
        self.scenario = scenario


class SequencingError(ShellClearError, RuntimeError):
    """An operation was called before a prerequisite artifact existed."""


class InsufficientDataError(ShellClearError, ValueError):
    """Not enough samples to form an estimate."""


class ConfigError(ShellClearError, ValueError):
    """Scenario configuration could not be parsed or validated."""

    def __init__(self, message, key=None):
        super().__init__(message)
        self.key = key


class ConfigParseError(ConfigError):
    """The config file is not valid YAML (or not a mapping)."""
