# core/errors.py

class PredifixError(Exception):
    """
    Root of every error raised by predifix.
    The CLI maps subclasses to exit codes; library callers can catch this one type.
    """


class ConfigError(PredifixError, RuntimeError):
    """Invalid or missing configuration value."""
