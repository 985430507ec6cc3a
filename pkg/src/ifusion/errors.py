"""Error hierarchy shared by all layers.

Every error carries a stable machine code; the NBI maps each code to
exactly one HTTP status (see ifusion.nbi.ERROR_TABLE).
"""

from __future__ import annotations


class IfusionError(Exception):
    """Base error. ``code`` is the stable machine-readable identifier."""

    code = "INTERNAL"

    def __init__(self, detail: str = "", **context):
        self.detail = detail
        self.context = context
        super().__init__(f"{self.code}: {detail}" if detail else self.code)

    def to_dict(self) -> dict:
        out = {"code": self.code, "detail": self.detail}
        if self.context:
            out["context"] = {k: str(v) for k, v in self.context.items()}
        return out


# -- device plane ------------------------------------------------------------

class UnknownDevice(IfusionError):
    code = "UNKNOWN_DEVICE"


class SchemaViolation(IfusionError):
    code = "SCHEMA_VIOLATION"


class LockedByOther(IfusionError):
    code = "LOCKED_BY_OTHER"


class ValidationFailed(IfusionError):
    code = "VALIDATION_FAILED"


class SeqOutOfRange(IfusionError):
    code = "SEQ_OUT_OF_RANGE"


class UnknownCommand(IfusionError):
    code = "UNKNOWN_COMMAND"


class UnknownParam(IfusionError):
    code = "UNKNOWN_PARAM"


class BadValue(IfusionError):
    code = "BAD_VALUE"


# -- mediation ---------------------------------------------------------------

class UnmappedPath(IfusionError):
    code = "UNMAPPED_PATH"


class UnmappedParam(IfusionError):
    code = "UNMAPPED_PARAM"


class LegacyRejected(IfusionError):
    code = "LEGACY_REJECTED"


class CompensationFailed(IfusionError):
    code = "COMPENSATION_FAILED"


# -- controllers -------------------------------------------------------------

class UnknownNode(IfusionError):
    code = "UNKNOWN_NODE"


class UnknownPort(IfusionError):
    code = "UNKNOWN_PORT"


class NoPath(IfusionError):
    """CSPF found no feasible route. ``reason`` is PRUNED_ALL or DISCONNECTED."""

    code = "NO_PATH"

    def __init__(self, detail: str = "", reason: str = "PRUNED_ALL", **context):
        self.reason = reason
        super().__init__(detail, reason=reason, **context)


class UnknownLsp(IfusionError):
    code = "UNKNOWN_LSP"


class BadState(IfusionError):
    code = "BAD_STATE"


class CommitFailed(IfusionError):
    code = "COMMIT_FAILED"


class TagExhausted(IfusionError):
    code = "TAG_EXHAUSTED"


class Blocked(IfusionError):
    code = "BLOCKED"


class UnknownOch(IfusionError):
    code = "UNKNOWN_OCH"


class OchInUse(IfusionError):
    code = "OCH_IN_USE"


class UnknownOdu(IfusionError):
    code = "UNKNOWN_ODU"


class InvalidConfig(IfusionError):
    code = "INVALID_CONFIG"


class UnknownLink(IfusionError):
    code = "UNKNOWN_LINK"


class LinkDown(IfusionError):
    code = "LINK_DOWN"


class OutOfRangeModulation(IfusionError):
    code = "OUT_OF_RANGE_MODULATION"


# -- orchestrator ------------------------------------------------------------

class NoDomainPath(IfusionError):
    code = "NO_DOMAIN_PATH"


class DomainInfeasible(IfusionError):
    code = "DOMAIN_INFEASIBLE"

    def __init__(self, domain: str, reason: str, detail: str = ""):
        self.domain = domain
        self.reason = reason
        super().__init__(detail or f"{domain}: {reason}", domain=domain, reason=reason)


class ReserveFailed(IfusionError):
    code = "RESERVE_FAILED"


class RollbackIncomplete(IfusionError):
    code = "ROLLBACK_INCOMPLETE"


class OpticalBlocked(IfusionError):
    code = "OPTICAL_BLOCKED"


class StillNoPath(IfusionError):
    code = "STILL_NO_PATH"


class UnknownService(IfusionError):
    code = "UNKNOWN_SERVICE"


class InvalidIntent(IfusionError):
    code = "INVALID_INTENT"


# -- harness -----------------------------------------------------------------

class ParseError(IfusionError):
    code = "PARSE_ERROR"

    def __init__(self, detail: str = "", line: int | None = None):
        self.line = line
        ctx = {"line": line} if line is not None else {}
        super().__init__(detail, **ctx)


class StepFailed(IfusionError):
    code = "STEP_FAILED"
