"""Malware-analysis providers.

The directory-of-fixtures provider is the reference implementation (one JSON
document per hash, named "<hash>.json") so the pipeline runs offline; the HTTP
provider targets a live repository with the same document schema.
"""

from __future__ import annotations

import json
import logging
import os
import threading
import time
from pathlib import Path
from typing import Protocol

import requests

log = logging.getLogger(__name__)


class ProviderError(Exception):
    """Transient transport or provider failure; the fetch may be retried."""


class AnalysisDataError(Exception):
    """The provider returned a document violating the analysis schema."""

    def __init__(self, field: str, message: str):
        self.field = field
        super().__init__(f"{field}: {message}")


class AnalysisProvider(Protocol):
    def fetch(self, hash_value: str) -> dict | None:
        """Raw analysis document for the hash, or None when unknown."""
        ...


class FixtureProvider:
    def __init__(self, root: str | Path):
        self.root = Path(root)

    def fetch(self, hash_value: str) -> dict | None:
        path = self.root / f"{hash_value.lower()}.json"
        if not path.is_file():
            return None
        try:
            return json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise AnalysisDataError("document", f"invalid JSON in {path.name}: {exc}") from exc


class HttpProvider:
    """Hash lookup against a live repository; the API key is only ever read
    from the named environment variable."""

    def __init__(
        self,
        base_url: str,
        api_key_env: str,
        rate_limit: float = 4.0,
        timeout: float = 30.0,
    ):
        api_key = os.environ.get(api_key_env, "")
        if not api_key:
            raise ProviderError(f"API key environment variable {api_key_env!r} is not set")
        self.base_url = base_url.rstrip("/")
        self.timeout = timeout
        self._min_interval = 1.0 / rate_limit if rate_limit > 0 else 0.0
        self._last_request = 0.0
        self._lock = threading.Lock()
        self._session = requests.Session()
        self._session.headers["Authorization"] = f"Bearer {api_key}"

    def _throttle(self) -> None:
        with self._lock:
            wait = self._last_request + self._min_interval - time.monotonic()
            if wait > 0:
                time.sleep(wait)
            self._last_request = time.monotonic()

    def fetch(self, hash_value: str) -> dict | None:
        self._throttle()
        url = f"{self.base_url}/{hash_value.lower()}"
        try:
            response = self._session.get(url, timeout=self.timeout)
        except requests.RequestException as exc:
            raise ProviderError(f"request to {url} failed: {exc}") from exc
        if response.status_code == 404:
            return None
        if response.status_code != 200:
            raise ProviderError(f"{url} returned HTTP {response.status_code}")
        try:
            return response.json()
        except ValueError as exc:
            raise AnalysisDataError("document", f"response is not JSON: {exc}") from exc


class CachingProvider:
    """Memoizes fetches so a hash seen from several reports is queried once.

    Retryable errors are not cached; data errors are re-raised consistently.
    """

    def __init__(self, inner: AnalysisProvider):
        self.inner = inner
        self._cache: dict[str, dict | None] = {}
        self._lock = threading.Lock()

    @property
    def query_count(self) -> int:
        return len(self._cache)

    def fetch(self, hash_value: str) -> dict | None:
        key = hash_value.lower()
        with self._lock:
            if key in self._cache:
                return self._cache[key]
        document = self.inner.fetch(key)
        with self._lock:
            self._cache[key] = document
        return document
