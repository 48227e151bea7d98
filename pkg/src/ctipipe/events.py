"""Event schema: report events hold parsed indicators, malware events hold
analysis-derived attributes, and a back-link comment ties each malware event
to the report it came from."""

from __future__ import annotations

import datetime as dt
import re
from dataclasses import dataclass, field
from typing import TYPE_CHECKING

from .extraction import Indicator, IndicatorKind, classify_hash

if TYPE_CHECKING:
    from .enrichment import AnalysisRecord

REPORT = "report"
MALWARE = "malware"

CATEGORY_EXTERNAL = "External analysis"
CATEGORY_NETWORK = "Network activity"
CATEGORY_PAYLOAD = "Payload installation"
CATEGORY_ARTIFACTS = "Artifacts dropped"
CATEGORY_OTHER = "Other"

HASH_TYPES = frozenset({"md5", "sha1", "sha256"})

# Every attribute type token the store can contain.
ATTRIBUTE_TYPES = frozenset({
    "md5", "sha1", "sha256", "ip-src", "url", "hostname", "email",
    "vulnerability", "registry", "filename", "pdb", "code-sign", "other",
    "comment",
})

_HASH_INFO_RE = re.compile(r"[0-9a-fA-F]+")


@dataclass
class Attribute:
    category: str
    comment: str
    value: str
    type: str
    id: int = 0


@dataclass
class Event:
    id: int
    date: dt.date
    info: str
    kind: str
    attributes: list[Attribute] = field(default_factory=list)


@dataclass
class EventSet:
    """One report event plus the malware events derived from it."""

    report_title: str
    report_event: Event
    malware_events: list[Event] = field(default_factory=list)


def is_back_link(attribute: Attribute) -> bool:
    """The comment attribute naming a malware event's originating report."""
    return attribute.type == "comment" and attribute.category == CATEGORY_OTHER


def distinct_pairs(event_set: EventSet) -> set[tuple[str, str]]:
    """Distinct (type, value) pairs across the whole set, back-links excluded."""
    pairs: set[tuple[str, str]] = set()
    for event in [event_set.report_event, *event_set.malware_events]:
        for attribute in event.attributes:
            if not is_back_link(attribute):
                pairs.add((attribute.type, attribute.value))
    return pairs


# How each parsed indicator kind maps onto (category, attribute type).
_INDICATOR_ATTRIBUTE = {
    IndicatorKind.URL: (CATEGORY_NETWORK, "url"),
    IndicatorKind.HOSTNAME: (CATEGORY_NETWORK, "hostname"),
    IndicatorKind.IP: (CATEGORY_NETWORK, "ip-src"),
    IndicatorKind.EMAIL: (CATEGORY_NETWORK, "email"),
    IndicatorKind.MD5: (CATEGORY_PAYLOAD, "md5"),
    IndicatorKind.SHA1: (CATEGORY_PAYLOAD, "sha1"),
    IndicatorKind.SHA256: (CATEGORY_PAYLOAD, "sha256"),
    IndicatorKind.FILENAME: (CATEGORY_EXTERNAL, "filename"),
    IndicatorKind.CVE: (CATEGORY_EXTERNAL, "vulnerability"),
    IndicatorKind.REGISTRY: (CATEGORY_EXTERNAL, "registry"),
    IndicatorKind.PDB: (CATEGORY_ARTIFACTS, "pdb"),
}


def build_report_event(title: str, publication_date: dt.date, indicators: list[Indicator]) -> Event:
    """Turn a parsed report into a report event; ids are assigned on append."""
    if not title:
        raise ValueError("report title must not be empty")
    attributes = []
    for indicator in indicators:
        category, type_token = _INDICATOR_ATTRIBUTE[indicator.kind]
        attributes.append(Attribute(category, "", indicator.value, type_token))
    return Event(0, publication_date, title, REPORT, attributes)


def build_malware_event(
    hash_value: str,
    record: "AnalysisRecord | None",
    origin: str,
    fallback_date: dt.date,
) -> Event:
    """Build a malware event for ``hash_value``.

    The event date is the analysis compile timestamp when known, otherwise the
    originating report's publication date. Without analysis the event carries
    just its own hash and the back-link.
    """
    hash_kind = classify_hash(hash_value)
    hash_value = hash_value.lower()
    if record is not None:
        from .enrichment import record_to_attributes

        attributes = record_to_attributes(record, origin)
        date = record.compile_timestamp.date() if record.compile_timestamp else fallback_date
    else:
        attributes = [
            Attribute(CATEGORY_PAYLOAD, "", hash_value, hash_kind.value),
            Attribute(CATEGORY_OTHER, "", origin, "comment"),
        ]
        date = fallback_date
    return Event(0, date, hash_value, MALWARE, attributes)


def looks_like_hash(value: str) -> bool:
    return bool(_HASH_INFO_RE.fullmatch(value)) and len(value) in (32, 40, 64)


def event_to_document(event: Event) -> dict:
    """Serialize with exactly the exchange field names and order."""
    return {
        "id": event.id,
        "date": event.date.isoformat(),
        "info": event.info,
        "Attribute": [
            {
                "category": a.category,
                "comment": a.comment,
                "value": a.value,
                "type": a.type,
                "id": a.id,
            }
            for a in event.attributes
        ],
    }


def document_to_event(document: dict) -> Event:
    """Inverse of :func:`event_to_document`; the event kind is re-derived
    from the info field (a bare hash means a malware event)."""
    try:
        event_id = int(document["id"])
        date = dt.date.fromisoformat(document["date"])
        info = document["info"]
        items = document["Attribute"]
    except (KeyError, TypeError, ValueError) as exc:
        raise ValueError(f"malformed event document: {exc}") from exc
    attributes = []
    for item in items:
        try:
            attributes.append(
                Attribute(item["category"], item["comment"], item["value"], item["type"], int(item["id"]))
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ValueError(f"malformed attribute item: {exc}") from exc
    kind = MALWARE if looks_like_hash(info) else REPORT
    return Event(event_id, date, info, kind, attributes)


def export_misp(event: Event) -> dict:
    """Exchange document for one event, importable by a MISP-style consumer."""
    return event_to_document(event)


def import_misp(document: dict) -> Event:
    return document_to_event(document)


def group_event_sets(events: list[Event]) -> list[EventSet]:
    """Reconstruct event sets by following malware back-links to report titles."""
    sets: dict[str, EventSet] = {}
    for event in events:
        if event.kind == REPORT:
            if event.info in sets:
                raise ValueError(f"duplicate report event for {event.info!r}")
            sets[event.info] = EventSet(event.info, event)
    for event in events:
        if event.kind != MALWARE:
            continue
        back_links = [a for a in event.attributes if is_back_link(a)]
        if len(back_links) != 1:
            raise ValueError(f"malware event {event.id} has {len(back_links)} back-links")
        origin = back_links[0].value
        if origin not in sets:
            raise ValueError(f"malware event {event.id} references unknown report {origin!r}")
        sets[origin].malware_events.append(event)
    return sorted(sets.values(), key=lambda s: s.report_event.id)
