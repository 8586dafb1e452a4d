"""Error types shared across the gateway simulator.

Every error carries a stable ``code`` string so REST adapters and tests can
match on it without depending on exception class identity.
"""

from __future__ import annotations


class GatewayError(Exception):
    """Base class for all simulator errors."""

    code = "ERROR"
    http_status = 500

    def __init__(self, message: str = ""):
        super().__init__(message or self.code)


class NotFound(GatewayError):
    code = "NOT_FOUND"
    http_status = 404


class Conflict(GatewayError):
    code = "CONFLICT"
    http_status = 409


class MalformedRequest(GatewayError):
    code = "MALFORMED_REQUEST"
    http_status = 400


class OssUnavailable(GatewayError):
    code = "OSS_UNAVAILABLE"
    http_status = 503


# --- VNF store ---

class DuplicateEdge(GatewayError):
    code = "DUPLICATE_EDGE"
    http_status = 409


class InconsistentKind(GatewayError):
    code = "INCONSISTENT_KIND"
    http_status = 400


class NoConversionPath(NotFound):
    """No chain of registered images converts between the two interfaces."""


# --- NFVI / MANO ---

class UnknownImage(NotFound):
    code = "UNKNOWN_IMAGE"


class CapacityExceeded(GatewayError):
    code = "CAPACITY_EXCEEDED"
    http_status = 409


class NotRunning(GatewayError):
    code = "NOT_RUNNING"
    http_status = 409


class CompositionMismatch(GatewayError):
    code = "COMPOSITION_MISMATCH"
    http_status = 400


class SourceMismatch(GatewayError):
    code = "SOURCE_MISMATCH"
    http_status = 409


# --- data plane ---

class UnsupportedCode(GatewayError):
    code = "UNSUPPORTED_CODE"


class MissingBody(GatewayError):
    code = "MISSING_BODY"


class ParseError(GatewayError):
    code = "PARSE_ERROR"


class UnknownCommand(GatewayError):
    code = "UNKNOWN_COMMAND"


class ChainDown(GatewayError):
    code = "CHAIN_DOWN"


# --- devices / dispatch ---

class RobotBusy(GatewayError):
    code = "ROBOT_BUSY"


class AllReplicasDown(GatewayError):
    code = "ALL_DOWN"


class IoError(GatewayError):
    code = "IO_ERROR"
