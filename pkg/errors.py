"""Exceptions raised across the DFML toolkit."""


class DfmlError(Exception):
    """Base class for every failure the toolkit reports."""


# === DESCRIPTION DOCUMENTS ===
class DfmlParseError(DfmlError):
    pass


class UnsupportedFeatureError(DfmlParseError):
    pass


class LocationError(DfmlParseError):
    pass


class LinearizeError(DfmlError):
    pass


# === READING ===
class ReadError(DfmlError):
    pass


class DecodeError(ReadError):
    pass


class TruncatedDataError(ReadError):
    """Data ended inside an item; `path` and `occurrence` name the failing read."""

    def __init__(self, path, occurrence, message):
        super().__init__(f"{path} (occurrence {occurrence}): {message}")
        self.path = path
        self.occurrence = occurrence


class SelectionError(ReadError):
    pass


# === CODE GENERATION ===
class CodegenError(DfmlError):
    pass


class UnknownTargetError(CodegenError):
    pass
