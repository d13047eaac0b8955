"""GuitarPro 5 binary reading and writing for the Song model."""

from .errors import Gp5Error, MalformedFileError, UnsupportedVersionError
from .reader import Gp5Document, read_gp5, read_gp5_document
from .writer import ensure_playable, write_gp5

__all__ = [
    "Gp5Document",
    "Gp5Error",
    "MalformedFileError",
    "UnsupportedVersionError",
    "ensure_playable",
    "read_gp5",
    "read_gp5_document",
    "write_gp5",
]
