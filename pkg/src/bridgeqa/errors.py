"""Exception hierarchy shared across the toolkit.

Every error raised by library code derives from BridgeQAError so the CLI
can map failures onto machine-parsable error classes.
"""


class BridgeQAError(Exception):
    """Base class for all toolkit errors."""

    category = "internal"


class TreeParseError(BridgeQAError):
    """Malformed bracketed tree input."""

    category = "parse"

    def __init__(self, message, line=None, column=None):
        loc = ""
        if line is not None:
            loc = f" at line {line}" + (f", column {column}" if column is not None else "")
        super().__init__(message + loc)
        self.line = line
        self.column = column


class HeadNotFoundError(BridgeQAError):
    """NP contains no noun-tagged token to serve as its head."""

    category = "head-not-found"


class DegenerateMentionError(BridgeQAError):
    """Stripping determiners would leave an empty mention."""

    category = "degenerate-mention"


class SynthesisError(BridgeQAError):
    """Sentence rewrite produced an unusable result."""

    category = "synthesis"


class DecodeError(BridgeQAError):
    """Span decoding could not interpret its inputs."""

    category = "decode"


class ReconciliationError(BridgeQAError):
    """Ids in two files that must align do not."""

    category = "reconciliation"


class SchemaError(BridgeQAError):
    """A file does not conform to its documented schema."""

    category = "validation"


class ConfigError(BridgeQAError):
    """Invalid configuration value or file."""

    category = "config"


class InputError(BridgeQAError):
    """Missing or unreadable input file."""

    category = "file-not-found"
