"""Exception types shared across the toolkit."""

from __future__ import annotations


class RefpackError(Exception):
    """Base class for toolkit-specific failures."""


class FastaParseError(RefpackError):
    """Malformed FASTA input. Carries the 1-based line number."""

    def __init__(self, message: str, line: int):
        super().__init__(f"line {line}: {message}")
        self.line = line


class ChecksumMismatch(RefpackError):
    """Supplied reference does not match the checksum recorded at build time."""


class CorruptStream(RefpackError):
    """Compressed token stream failed structural validation.

    ``group`` and ``slot`` locate the offending group ordinal and slot index
    when they are known.
    """

    def __init__(self, message: str, *, group: int | None = None, slot: int | None = None):
        where = ""
        if group is not None:
            where = f" (group {group}" + (f", slot {slot}" if slot is not None else "") + ")"
        super().__init__(message + where)
        self.group = group
        self.slot = slot


class CorruptContainer(RefpackError):
    """Container file failed structural validation."""
