"""Exception types shared across the toolkit.

Exit-code mapping used by the CLI: ParseError and ValidationError exit 1,
OSError exits 2, InvariantError exits 3.
"""


class CharmtError(Exception):
    """Base class for all toolkit errors."""


class ParseError(CharmtError):
    """Malformed input file content.

    Carries the source path and 1-based line number when known.
    """

    def __init__(self, message: str, path: str | None = None, line: int | None = None):
        self.path = path
        self.line = line
        prefix = ""
        if path is not None:
            prefix = f"{path}:"
            if line is not None:
                prefix += f"{line}:"
            prefix += " "
        elif line is not None:
            prefix = f"line {line}: "
        super().__init__(prefix + message)


class ValidationError(CharmtError):
    """Well-formed input that violates a domain invariant or precondition."""


class InvariantError(CharmtError):
    """Internal invariant violation; indicates a toolkit bug."""
