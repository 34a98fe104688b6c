"""Exception hierarchy for the consolidation engine.

Exit-code mapping lives in the CLI; everything here is a plain exception
with enough payload to render a useful message.
"""

from __future__ import annotations


class EngineError(Exception):
    """Base class for all engine errors."""


class ConfigError(EngineError):
    """Invalid or missing configuration."""


class SchemaError(EngineError):
    """A file or record violates its documented schema."""

    def __init__(self, message: str, *, path: str | None = None, field: str | None = None):
        detail = message
        if path:
            detail += f" (file: {path})"
        if field:
            detail += f" (field: {field})"
        super().__init__(detail)
        self.path = path
        self.field = field


class ConflictError(EngineError):
    """Duplicate identifiers where uniqueness is required."""


class IntegrityError(EngineError):
    """Dangling cross-references between artifacts."""


class ContractError(EngineError):
    """A caller violated an operation's precondition."""


class ProviderError(EngineError):
    """Terminal provider failure (non-2xx after retries, etc.)."""

    def __init__(self, message: str, *, status: int | None = None, body: str | None = None):
        detail = message
        if status is not None:
            detail += f" [status {status}]"
        if body:
            detail += f": {body[:200]}"
        super().__init__(detail)
        self.status = status
        self.body = body


class RetriableError(EngineError):
    """Transient transport failure; the provider retries these internally."""


class MissingFixtureError(ProviderError):
    """Replay provider has no fixture for the request digest."""

    def __init__(self, digest: str):
        super().__init__(f"missing fixture for request digest {digest}")
        self.digest = digest


class ExtractionParseError(EngineError):
    """Provider output for fact extraction could not be parsed."""

    def __init__(self, message: str, raw: str):
        super().__init__(f"{message}: {raw[:200]}")
        self.raw = raw


class PartialOutputError(EngineError):
    """Synthesis returned fewer parseable examples than requested."""

    def __init__(self, fact_id: str, parsed: int, requested: int):
        super().__init__(
            f"fact {fact_id}: parsed {parsed} of {requested} requested examples"
        )
        self.fact_id = fact_id
        self.parsed = parsed
        self.requested = requested


class AssemblyError(EngineError):
    """A fact ended up with no usable synthesized examples."""


class BudgetError(EngineError):
    """A summary exceeded its token budget after the re-prompt."""

    def __init__(self, actual: int, target: int):
        super().__init__(f"summary is {actual} tokens, budget {target}")
        self.actual = actual
        self.target = target


class LengthError(EngineError):
    """A continuation fell outside its length tolerance."""


class DegenerateError(EngineError):
    """A statistic is undefined for this input (zero variance, constant curve)."""


class DependencyError(EngineError):
    """A pipeline stage ran before its prerequisites."""


class IngestError(EngineError):
    """An externally produced artifact (answers file) failed schema checks."""
