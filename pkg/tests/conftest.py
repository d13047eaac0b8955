"""
Test Configuration and Fixtures

Common test utilities and fixtures for TabTokens tests.
"""

import os
import tempfile

import pytest

# Load test environment
os.environ.setdefault("TABTOKENS_WORKERS", "2")
os.environ.setdefault("TABTOKENS_LOG_LEVEL", "WARNING")
os.environ.setdefault("TABTOKENS_EMIT_MEASURE_REPEAT", "true")
os.environ.setdefault("CATALOG_PROVIDER", "stub")
os.environ.setdefault("CATALOG_CLIENT_ID", "")
os.environ.setdefault("CATALOG_CLIENT_SECRET", "")
os.environ.setdefault("CATALOG_REQUESTS_PER_SECOND", "0")
os.environ.setdefault(
    "GENRE_CACHE_FILE",
    os.path.join(tempfile.gettempdir(), "tabtokens_test_genre_cache.jsonl"),
)

from src.gp5_io import write_gp5  # noqa: E402
from src.tokenizer import encode, write_tokens  # noqa: E402
from tests.factories import drum_and_bass_song, random_song, riff_song  # noqa: E402


@pytest.fixture
def riff():
    """Four measures of a palm-muted riff on one distorted guitar."""
    return riff_song()


@pytest.fixture
def band():
    """A drums and bass song with a tempo change."""
    return drum_and_bass_song()


@pytest.fixture
def riff_gp5(tmp_path, riff):
    """The riff written to a GP5 file."""
    path = tmp_path / "riff.gp5"
    path.write_bytes(write_gp5(riff))
    return path


@pytest.fixture
def token_corpus(tmp_path):
    """A directory of 20 token files encoded from seeded random songs."""
    corpus = tmp_path / "corpus"
    corpus.mkdir()
    for seed in range(20):
        write_tokens(corpus / f"song_{seed:02d}.tokens.txt", encode(random_song(seed)))
    return corpus


@pytest.fixture
def genre_cache_path(tmp_path):
    """Path of an empty genre cache file."""
    return tmp_path / "genre_cache.jsonl"
