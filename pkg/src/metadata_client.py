"""
Genre Metadata Client

Looks up genre tags for (artist, title) pairs in a music catalog web API and
keeps them in a local JSON-lines cache. Network or payload problems never
raise: the lookup comes back as an unresolved record instead.
"""

import json
import logging
import os
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from datetime import datetime, timezone
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

import attr
import requests
from dotenv import load_dotenv

load_dotenv()

logger = logging.getLogger(__name__)

# Catalog configuration
CATALOG_PROVIDER = os.getenv("CATALOG_PROVIDER", "stub")
CATALOG_API_URL = os.getenv("CATALOG_API_URL", "https://api.spotify.com/v1")
CATALOG_TOKEN_URL = os.getenv(
    "CATALOG_TOKEN_URL", "https://accounts.spotify.com/api/token"
)
CATALOG_CLIENT_ID = os.getenv("CATALOG_CLIENT_ID")
CATALOG_CLIENT_SECRET = os.getenv("CATALOG_CLIENT_SECRET")
CATALOG_MAX_RETRIES = int(os.getenv("CATALOG_MAX_RETRIES", "3"))
CATALOG_REQUESTS_PER_SECOND = float(os.getenv("CATALOG_REQUESTS_PER_SECOND", "5"))
GENRE_CACHE_FILE = os.getenv("GENRE_CACHE_FILE", "genre_cache.jsonl")

RETRY_STATUSES = (429, 500, 502, 503, 504)
MAX_RETRY_AFTER_SECONDS = 60.0
REQUEST_TIMEOUT_SECONDS = 10

UNRESOLVED = "unresolved"


def normalize_genres(tags: Iterable[str]) -> Tuple[str, ...]:
    """Lowercase, trimmed, deduplicated tags in first-seen order."""
    seen: Dict[str, None] = {}
    for tag in tags:
        if isinstance(tag, str) and tag.strip():
            seen.setdefault(" ".join(tag.lower().split()), None)
    return tuple(seen)


def cache_key(artist: str, title: str) -> Tuple[str, str]:
    return (" ".join(artist.lower().split()), " ".join(title.lower().split()))


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


@attr.s(frozen=True, slots=True)
class GenreRecord:
    artist = attr.ib(type=str)
    title = attr.ib(type=str)
    genres = attr.ib(factory=tuple, converter=normalize_genres)
    source = attr.ib(default="")
    fetched_at = attr.ib(factory=_now)
    resolved = attr.ib(default=False)
    note = attr.ib(default="")

    @property
    def key(self) -> Tuple[str, str]:
        return cache_key(self.artist, self.title)

    def to_dict(self) -> dict:
        return {
            "artist": self.artist,
            "title": self.title,
            "genres": list(self.genres),
            "source": self.source,
            "fetched_at": self.fetched_at,
            "resolved": self.resolved,
            "note": self.note,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "GenreRecord":
        return cls(
            artist=data["artist"],
            title=data["title"],
            genres=data.get("genres", ()),
            source=data.get("source", ""),
            fetched_at=data.get("fetched_at", ""),
            resolved=bool(data.get("resolved", False)),
            note=data.get("note", ""),
        )


class RateLimiter:
    """Spaces calls at least 1/requests_per_second apart across threads."""

    def __init__(self, requests_per_second: float = CATALOG_REQUESTS_PER_SECOND):
        self.interval = 1.0 / requests_per_second if requests_per_second > 0 else 0.0
        self._lock = threading.Lock()
        self._next_slot = 0.0

    def wait(self) -> None:
        if not self.interval:
            return
        with self._lock:
            now = time.monotonic()
            delay = self._next_slot - now
            self._next_slot = max(now, self._next_slot) + self.interval
        if delay > 0:
            time.sleep(delay)


class GenreCache:
    """
    Genre records kept in memory and appended to a JSON-lines file, one
    record per line. When a key appears more than once the last line wins.
    """

    def __init__(self, path: Optional[Union[str, Path]] = GENRE_CACHE_FILE):
        self.path = Path(path) if path else None
        self._records: Dict[Tuple[str, str], GenreRecord] = {}
        self._lock = threading.Lock()
        if self.path and self.path.exists():
            self._load()

    def _load(self) -> None:
        with open(self.path, encoding="utf-8") as f:
            for number, line in enumerate(f, start=1):
                if not line.strip():
                    continue
                try:
                    record = GenreRecord.from_dict(json.loads(line))
                except (ValueError, KeyError, TypeError) as e:
                    logger.warning(f"Skipping cache line {number} of {self.path}: {e}")
                    continue
                self._records[record.key] = record
        logger.debug(f"Loaded {len(self._records)} cached genre records")

    def get(self, artist: str, title: str) -> Optional[GenreRecord]:
        with self._lock:
            return self._records.get(cache_key(artist, title))

    def put(self, record: GenreRecord) -> None:
        with self._lock:
            self._records[record.key] = record
            if self.path:
                with open(self.path, "a", encoding="utf-8") as f:
                    f.write(json.dumps(record.to_dict(), sort_keys=True) + "\n")

    def records(self) -> List[GenreRecord]:
        with self._lock:
            return list(self._records.values())

    def __len__(self) -> int:
        return len(self._records)


class StubCatalogProvider:
    """In-memory catalog for offline runs and tests."""

    name = "stub"
    match_note = "exact"

    def __init__(self, catalog: Optional[Dict[Tuple[str, str], Sequence[str]]] = None):
        self.catalog = {
            cache_key(artist, title): list(tags)
            for (artist, title), tags in (catalog or {}).items()
        }
        self.calls = 0

    def search(self, artist: str, title: str) -> Optional[List[str]]:
        """Tags for the pair, or None when the catalog has no match."""
        self.calls += 1
        return self.catalog.get(cache_key(artist, title))


class SpotifyCatalogProvider:
    """
    Catalog lookups against the Spotify Web API with client credentials.

    One track search per lookup; the genres are those of the first result's
    primary artist.
    """

    name = "spotify"
    match_note = "first-match"

    def __init__(
        self,
        client_id: Optional[str] = CATALOG_CLIENT_ID,
        client_secret: Optional[str] = CATALOG_CLIENT_SECRET,
        api_url: str = CATALOG_API_URL,
        token_url: str = CATALOG_TOKEN_URL,
        max_retries: int = CATALOG_MAX_RETRIES,
        limiter: Optional[RateLimiter] = None,
    ):
        self.client_id = client_id
        self.client_secret = client_secret
        self.api_url = api_url.rstrip("/")
        self.token_url = token_url
        self.max_retries = max_retries
        self.limiter = limiter or RateLimiter()
        self.session = requests.Session()
        self.session.headers.update({"User-Agent": "TabTokens/1.0"})
        self._token: Optional[str] = None
        self._token_expires = 0.0
        self._token_lock = threading.Lock()

    def _retry_delay(self, response: requests.Response, attempt: int) -> float:
        retry_after = response.headers.get("Retry-After")
        try:
            delay = float(retry_after) if retry_after is not None else 2.0**attempt
        except ValueError:
            delay = 2.0**attempt
        return min(max(delay, 0.0), MAX_RETRY_AFTER_SECONDS)

    def _make_request(self, method: str, url: str, **kwargs) -> Optional[dict]:
        """Send a request with bounded retries on rate limits and server errors."""
        for attempt in range(self.max_retries + 1):
            self.limiter.wait()
            try:
                response = self.session.request(
                    method, url, timeout=REQUEST_TIMEOUT_SECONDS, **kwargs
                )
                retryable = response.status_code in RETRY_STATUSES
                if retryable and attempt < self.max_retries:
                    delay = self._retry_delay(response, attempt)
                    logger.warning(
                        f"Catalog returned {response.status_code}, "
                        f"retrying in {delay:.1f}s"
                    )
                    time.sleep(delay)
                    continue
                response.raise_for_status()
                return response.json()
            except requests.exceptions.RequestException as e:
                logger.error(f"Catalog request failed: {e}")
                return None
            except ValueError as e:
                logger.error(f"Catalog returned malformed JSON: {e}")
                return None
        return None

    def _access_token(self) -> Optional[str]:
        with self._token_lock:
            if self._token and time.monotonic() < self._token_expires:
                return self._token
            if not (self.client_id and self.client_secret):
                logger.error("Catalog credentials are not configured")
                return None
            payload = self._make_request(
                "POST",
                self.token_url,
                data={"grant_type": "client_credentials"},
                auth=(self.client_id, self.client_secret),
            )
            try:
                self._token = payload["access_token"]
                lifetime = float(payload.get("expires_in", 3600))
            except (TypeError, KeyError, ValueError):
                logger.error("Catalog token response was malformed")
                return None
            self._token_expires = time.monotonic() + lifetime - 30
            return self._token

    def search(self, artist: str, title: str) -> Optional[List[str]]:
        """Genres of the best match, or None when nothing usable came back."""
        token = self._access_token()
        if token is None:
            return None
        headers = {"Authorization": f"Bearer {token}"}
        query = f'track:"{title}" artist:"{artist}"' if title else f'artist:"{artist}"'
        found = self._make_request(
            "GET",
            f"{self.api_url}/search",
            params={"q": query, "type": "track", "limit": 1},
            headers=headers,
        )
        try:
            items = found["tracks"]["items"]
            if not items:
                logger.info(f"No catalog match for {artist} - {title}")
                return None
            artist_id = items[0]["artists"][0]["id"]
        except (TypeError, KeyError, IndexError):
            logger.warning(f"Malformed search payload for {artist} - {title}")
            return None

        details = self._make_request(
            "GET", f"{self.api_url}/artists/{artist_id}", headers=headers
        )
        try:
            genres = details["genres"]
        except (TypeError, KeyError):
            logger.warning(f"Malformed artist payload for {artist_id}")
            return None
        if not isinstance(genres, list):
            return None
        return genres


def get_provider(offline: bool = False):
    """The configured provider; the stub when offline or without credentials."""
    if offline or CATALOG_PROVIDER == "stub":
        return StubCatalogProvider()
    if CATALOG_PROVIDER != "spotify":
        logger.warning(f"Unknown CATALOG_PROVIDER '{CATALOG_PROVIDER}', using stub")
        return StubCatalogProvider()
    if not (CATALOG_CLIENT_ID and CATALOG_CLIENT_SECRET):
        logger.warning("Catalog credentials missing, using the offline stub")
        return StubCatalogProvider()
    return SpotifyCatalogProvider()


def lookup_genres(
    artist: str, title: str, cache: GenreCache, provider=None
) -> GenreRecord:
    """
    Genre tags for one song.

    Cache hits make no request. Resolved lookups are cached; unresolved ones
    are returned but not cached, so a later run tries again.
    """
    if not artist or not artist.strip():
        return GenreRecord(artist or "", title, resolved=False, note="no artist")

    cached = cache.get(artist, title)
    if cached is not None:
        logger.debug(f"Genre cache hit for {artist} - {title}")
        return cached

    provider = provider or get_provider()
    genres = provider.search(artist, title)
    if genres is None:
        return GenreRecord(
            artist, title, (), provider.name, resolved=False, note=UNRESOLVED
        )
    record = GenreRecord(
        artist, title, genres, provider.name, resolved=True, note=provider.match_note
    )
    cache.put(record)
    logger.info(f"Genres for {artist} - {title}: {list(record.genres)}")
    return record


def lookup_many(
    pairs: Iterable[Tuple[str, str]],
    cache: GenreCache,
    provider=None,
    workers: int = 4,
) -> List[GenreRecord]:
    """Concurrent lookup_genres over many pairs, results in input order."""
    provider = provider or get_provider()
    pairs = list(pairs)
    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        return list(
            pool.map(
                lambda pair: lookup_genres(pair[0], pair[1], cache, provider), pairs
            )
        )
