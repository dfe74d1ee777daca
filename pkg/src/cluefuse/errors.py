"""Exception types shared across the package.

The CLI maps :class:`ConfigError` to exit code 2 and every other
:class:`CluefuseError` (plus I/O errors) to exit code 1.
"""


class CluefuseError(Exception):
    """Base class for all package-specific errors."""


class ConfigError(CluefuseError):
    """Invalid configuration: unknown key, bad value, missing required setting."""


class DuplicatePassageError(CluefuseError):
    """A corpus contained the same passage id twice."""

    def __init__(self, passage_id: str):
        super().__init__(f"duplicate passage id: {passage_id!r}")
        self.passage_id = passage_id


class EmptyCorpusError(CluefuseError):
    """An index build was attempted over zero passages."""


class UnknownDocumentError(CluefuseError):
    """A document ordinal or passage id does not exist in the index/corpus."""


class IndexFormatError(CluefuseError):
    """An index file is corrupt, truncated, or not an index file at all."""


class IndexVersionError(CluefuseError):
    """An index file was written with an unsupported format version."""

    def __init__(self, found: int, supported: int):
        super().__init__(
            f"unsupported index format version {found} (this build reads version {supported})"
        )
        self.found = found
        self.supported = supported


class MalformedRecordError(CluefuseError):
    """A JSON-Lines record failed schema validation.

    Carries the source location (line number or query id) so batch jobs can
    report exactly which record is broken.
    """

    def __init__(self, message: str, *, line: int | None = None, qid: str | None = None):
        where = []
        if line is not None:
            where.append(f"line {line}")
        if qid is not None:
            where.append(f"qid {qid!r}")
        suffix = f" ({', '.join(where)})" if where else ""
        super().__init__(message + suffix)
        self.line = line
        self.qid = qid


class EndpointError(CluefuseError):
    """A generation endpoint kept failing after all retry attempts."""
