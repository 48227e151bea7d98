"""Collect malware-analysis records by hash and expand over dropped hashes.

Expansion is breadth-first with a visited set, one level at a time: every
fetch inside a level may run concurrently, but levels are merged in sorted
hash order, so the result does not depend on completion order.
"""

from __future__ import annotations

import datetime as dt
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

from .events import (
    Attribute,
    CATEGORY_ARTIFACTS,
    CATEGORY_EXTERNAL,
    CATEGORY_NETWORK,
    CATEGORY_OTHER,
    CATEGORY_PAYLOAD,
)
from .extraction import classify_hash, is_valid_hash, is_valid_ip
from .providers import AnalysisDataError, AnalysisProvider, ProviderError

log = logging.getLogger(__name__)

_LIST_FIELDS = (
    "filenames",
    "contacted_ips",
    "contacted_urls",
    "pdb_paths",
    "code_sign_serials",
    "mutexes",
    "file_mappings",
    "strings",
    "dropped_hashes",
)


@dataclass
class AnalysisRecord:
    """Normalized malware-analysis result for one sample."""

    md5: str | None = None
    sha1: str | None = None
    sha256: str | None = None
    compile_timestamp: dt.datetime | None = None
    filenames: list[str] = field(default_factory=list)
    contacted_ips: list[str] = field(default_factory=list)
    contacted_urls: list[str] = field(default_factory=list)
    pdb_paths: list[str] = field(default_factory=list)
    code_sign_serials: list[str] = field(default_factory=list)
    mutexes: list[str] = field(default_factory=list)
    file_mappings: list[str] = field(default_factory=list)
    strings: list[str] = field(default_factory=list)
    dropped_hashes: list[str] = field(default_factory=list)

    def own_hashes(self) -> list[str]:
        return [h for h in (self.md5, self.sha1, self.sha256) if h]

    @classmethod
    def from_document(cls, document: dict) -> "AnalysisRecord":
        """Validate and normalize a raw provider document.

        Hashes are lowercased, the record's own hashes are dropped from
        ``dropped_hashes``, and any field violating the schema raises
        :class:`AnalysisDataError` naming that field.
        """
        if not isinstance(document, dict):
            raise AnalysisDataError("document", "expected a JSON object")

        hashes: dict[str, str | None] = {}
        for name in ("md5", "sha1", "sha256"):
            value = document.get(name)
            if value in (None, ""):
                hashes[name] = None
                continue
            if not isinstance(value, str) or not is_valid_hash(value):
                raise AnalysisDataError(name, f"invalid hash value {value!r}")
            value = value.lower()
            if classify_hash(value).value != name:
                raise AnalysisDataError(name, f"{value!r} is not a {name} digest")
            hashes[name] = value
        if not any(hashes.values()):
            raise AnalysisDataError("md5/sha1/sha256", "record carries no hash at all")

        timestamp = None
        raw_ts = document.get("compile_timestamp")
        if raw_ts not in (None, ""):
            if not isinstance(raw_ts, str):
                raise AnalysisDataError("compile_timestamp", f"expected ISO-8601 string, got {raw_ts!r}")
            try:
                timestamp = dt.datetime.fromisoformat(raw_ts.replace("Z", "+00:00"))
            except ValueError as exc:
                raise AnalysisDataError("compile_timestamp", str(exc)) from exc
            if timestamp.tzinfo is None:
                timestamp = timestamp.replace(tzinfo=dt.timezone.utc)
            timestamp = timestamp.astimezone(dt.timezone.utc)

        lists: dict[str, list[str]] = {}
        for name in _LIST_FIELDS:
            raw = document.get(name, [])
            if not isinstance(raw, list) or not all(isinstance(v, str) for v in raw):
                raise AnalysisDataError(name, "expected a list of strings")
            lists[name] = list(raw)

        for ip in lists["contacted_ips"]:
            if not is_valid_ip(ip):
                raise AnalysisDataError("contacted_ips", f"invalid IP address {ip!r}")

        own = set(h for h in hashes.values() if h)
        dropped: list[str] = []
        for value in lists["dropped_hashes"]:
            if not is_valid_hash(value):
                raise AnalysisDataError("dropped_hashes", f"invalid hash value {value!r}")
            value = value.lower()
            if value not in own and value not in dropped:
                dropped.append(value)
        lists["dropped_hashes"] = dropped

        return cls(
            md5=hashes["md5"],
            sha1=hashes["sha1"],
            sha256=hashes["sha256"],
            compile_timestamp=timestamp,
            **lists,
        )

    def to_document(self) -> dict:
        document: dict = {
            "md5": self.md5,
            "sha1": self.sha1,
            "sha256": self.sha256,
            "compile_timestamp": self.compile_timestamp.isoformat() if self.compile_timestamp else None,
        }
        for name in _LIST_FIELDS:
            document[name] = list(getattr(self, name))
        return document


@dataclass
class EnrichmentResult:
    """Outcome of one transitive collection run."""

    records: dict[str, AnalysisRecord] = field(default_factory=dict)
    missing: set[str] = field(default_factory=set)
    discovered: set[str] = field(default_factory=set)
    query_count: int = 0

    def all_hashes(self) -> set[str]:
        return set(self.records) | self.missing | self.discovered

    def to_document(self) -> dict:
        return {
            "records": {h: self.records[h].to_document() for h in sorted(self.records)},
            "missing": sorted(self.missing),
            "discovered": sorted(self.discovered),
            "query_count": self.query_count,
        }

    @classmethod
    def from_document(cls, document: dict) -> "EnrichmentResult":
        return cls(
            records={h: AnalysisRecord.from_document(doc) for h, doc in document["records"].items()},
            missing=set(document["missing"]),
            discovered=set(document["discovered"]),
            query_count=int(document["query_count"]),
        )


def fetch_analysis(hash_value: str, provider: AnalysisProvider) -> AnalysisRecord | None:
    """One normalized analysis record, or None when the provider has no
    analysis for the hash (such hashes still become bare malware events)."""
    classify_hash(hash_value)
    document = provider.fetch(hash_value.lower())
    if document is None:
        return None
    return AnalysisRecord.from_document(document)


def _fetch_with_retry(
    hash_value: str,
    provider: AnalysisProvider,
    retries: int,
    backoff: float,
) -> AnalysisRecord | None:
    attempt = 0
    while True:
        try:
            return fetch_analysis(hash_value, provider)
        except ProviderError as exc:
            attempt += 1
            if attempt > retries:
                log.warning("giving up on %s after %d retries: %s", hash_value, retries, exc)
                return None
            if backoff > 0:
                time.sleep(backoff * (2 ** (attempt - 1)))


def enrich_transitively(
    seeds: set[str],
    provider: AnalysisProvider,
    depth_limit: int = 2,
    *,
    retries: int = 3,
    backoff: float = 0.5,
    max_workers: int = 4,
) -> EnrichmentResult:
    """Expand from the seed hashes over ``dropped_hashes``, breadth-first.

    Seeds sit at depth 1. Every hash is queried at most once; hashes first
    seen beyond ``depth_limit`` are recorded as discovered but never queried,
    which bounds the walk even on adversarial (cyclic) analysis graphs.
    """
    if not seeds:
        raise ValueError("seed set must not be empty")
    if depth_limit < 1:
        raise ValueError("depth_limit must be >= 1")
    seed_set = {h.lower() for h in seeds}
    for seed in seed_set:
        classify_hash(seed)

    records: dict[str, AnalysisRecord] = {}
    missing: set[str] = set()
    discovered: set[str] = set()
    visited: set[str] = set()

    frontier = sorted(seed_set)
    depth = 1
    while frontier and depth <= depth_limit:
        visited.update(frontier)
        with ThreadPoolExecutor(max_workers=min(max_workers, len(frontier))) as pool:
            futures = {h: pool.submit(_fetch_with_retry, h, provider, retries, backoff) for h in frontier}
            # Sorted iteration keeps both the merge and error propagation deterministic.
            results = {h: futures[h].result() for h in sorted(futures)}

        next_frontier: set[str] = set()
        for hash_value in sorted(results):
            record = results[hash_value]
            if record is None:
                missing.add(hash_value)
                continue
            records[hash_value] = record
            for dropped in record.dropped_hashes:
                if dropped not in seed_set:
                    discovered.add(dropped)
                if dropped not in visited:
                    next_frontier.add(dropped)

        depth += 1
        frontier = sorted(next_frontier) if depth <= depth_limit else []

    return EnrichmentResult(records, missing, discovered, len(visited))


def record_to_attributes(record: AnalysisRecord, origin_report: str) -> list[Attribute]:
    """Attribute items for a malware event, ending with the back-link comment
    that names the originating report."""
    attributes: list[Attribute] = []
    for position, name in enumerate(record.filenames):
        comment = "original_filename" if position == 0 else ""
        attributes.append(Attribute(CATEGORY_EXTERNAL, comment, name, "filename"))
    for ip in record.contacted_ips:
        attributes.append(Attribute(CATEGORY_NETWORK, "", ip, "ip-src"))
    for url in record.contacted_urls:
        attributes.append(Attribute(CATEGORY_NETWORK, "", url, "url"))
    for hash_value in record.own_hashes():
        attributes.append(Attribute(CATEGORY_PAYLOAD, "", hash_value, classify_hash(hash_value).value))
    for path in record.pdb_paths:
        attributes.append(Attribute(CATEGORY_ARTIFACTS, "", path, "pdb"))
    for serial in record.code_sign_serials:
        attributes.append(Attribute(CATEGORY_ARTIFACTS, "", serial, "code-sign"))
    for value in [*record.mutexes, *record.file_mappings, *record.strings]:
        attributes.append(Attribute(CATEGORY_ARTIFACTS, "", value, "other"))
    attributes.append(Attribute(CATEGORY_OTHER, "", origin_report, "comment"))
    return attributes
