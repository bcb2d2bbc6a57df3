"""Exception hierarchy: input problems (CLI exit 1) vs. broken internal invariants (exit 2)."""


class NrstereoError(Exception):
    """Base class for all errors raised by this package."""


class InputError(NrstereoError, ValueError):
    """Invalid user-supplied data: bad files, bad dimensions, bad parameters."""


class MissingFileError(InputError):
    def __init__(self, path, detail="file not found"):
        super().__init__(f"{detail}: {path}")
        self.path = str(path)


class CorruptImageError(InputError):
    def __init__(self, path, detail=""):
        msg = f"cannot decode image: {path}"
        if detail:
            msg += f" ({detail})"
        super().__init__(msg)
        self.path = str(path)


class UnsupportedFormatError(InputError):
    def __init__(self, path, detail=""):
        msg = f"unsupported image format: {path}"
        if detail:
            msg += f" ({detail})"
        super().__init__(msg)
        self.path = str(path)


class DimensionError(InputError):
    """Image/mask/map dimensions violate an operation's preconditions."""


class UnsupportedBlockError(NrstereoError):
    """A block has no support samples at all; the caller must substitute a fallback."""


class InvariantError(NrstereoError, RuntimeError):
    """An internal consistency check failed; indicates a bug, not bad input."""
