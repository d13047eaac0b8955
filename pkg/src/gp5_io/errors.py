"""Typed errors raised while reading GuitarPro 5 data."""

from typing import Optional


class Gp5Error(Exception):
    """Base class for GP5 reading errors."""


class UnsupportedVersionError(Gp5Error):
    def __init__(self, version: str):
        self.version = version
        super().__init__(f"unsupported GuitarPro version tag {version!r}")


class MalformedFileError(Gp5Error):
    """The byte stream is truncated or internally inconsistent."""

    def __init__(self, message: str, offset: Optional[int] = None):
        self.offset = offset
        where = f" at byte {offset}" if offset is not None else ""
        super().__init__(f"{message}{where}")
