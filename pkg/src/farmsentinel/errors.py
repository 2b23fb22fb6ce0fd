"""Error hierarchy shared across the package."""


class SentinelError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(SentinelError):
    """Invalid configuration; message carries the offending field path."""


class StartupError(SentinelError):
    """A component failed to come up (detector spawn, source open, ...)."""


class DetectorFault(SentinelError):
    """A detector backend misbehaved: protocol violation, timeout or crash."""


class ProtocolError(DetectorFault):
    """The adapter emitted a line the strict wire parser rejects."""


class InferTimeout(DetectorFault):
    """The adapter did not answer an INFER within the configured timeout."""


class StreamFault(SentinelError):
    """A frame source failed mid-run (device disconnect, decode error)."""


class DatasetError(SentinelError):
    """Ground-truth dataset could not be parsed; carries file and line."""

    def __init__(self, message, path=None, line_no=None):
        if path is not None:
            where = f"{path}:{line_no}" if line_no is not None else str(path)
            message = f"{where}: {message}"
        super().__init__(message)
        self.path = path
        self.line_no = line_no


class UndefinedMetric(SentinelError):
    """A metric has no defined value (e.g. AP with zero ground truths)."""


class GatewayError(SentinelError):
    """Alert delivery or command polling failed."""


class GatewayAuthError(GatewayError):
    """The messaging service rejected the bot token; fatal."""
