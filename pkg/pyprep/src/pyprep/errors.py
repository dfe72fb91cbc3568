class PrepError(Exception):
    """Base class for conversion/rendering failures."""


class PrepFormatError(PrepError):
    """An input file does not match its documented layout."""


class MissingFilesError(PrepError):
    """Expected corpus recordings are absent; lists every missing file."""

    def __init__(self, missing: list[str]):
        self.missing = list(missing)
        super().__init__("missing recordings: " + ", ".join(self.missing))


class ChannelNotFoundError(PrepError):
    """The drive-end channel key is absent; names the candidates found."""
