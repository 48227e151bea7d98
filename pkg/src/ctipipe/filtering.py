"""Merge redundant attributes and flag noise.

Two cheap filters run per event (exact duplicate merge, denylist of values the
operating system generates on its own), plus a dataset-wide heuristic: a value
that appears across several event sets which otherwise have little in common
is noise with high probability, because keeping it would correlate unrelated
incidents. Flagging is advisory; removal is the operator's call.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from fnmatch import fnmatchcase
from pathlib import Path

from .events import (
    ATTRIBUTE_TYPES,
    Event,
    EventSet,
    HASH_TYPES,
    MALWARE,
    distinct_pairs,
)


class DenylistError(Exception):
    """Raised at load time for a malformed denylist pattern."""


@dataclass(frozen=True)
class DenyRule:
    pattern: str
    type_scope: str | None = None

    def matches(self, attribute_type: str, value: str) -> bool:
        if self.type_scope is not None and attribute_type != self.type_scope:
            return False
        return fnmatchcase(value.lower(), self.pattern.lower())


# Files the OS produces regardless of what the malware intended.
DEFAULT_DENYLIST: tuple[DenyRule, ...] = (
    DenyRule("desktop.ini"),
    DenyRule("thumbs.db"),
    DenyRule("pagefile.sys"),
    DenyRule("hiberfil.sys"),
    DenyRule("ntuser.dat*"),
    DenyRule("kernel32.dll", "filename"),
    DenyRule("ntdll.dll", "filename"),
    DenyRule("user32.dll", "filename"),
    DenyRule("advapi32.dll", "filename"),
    DenyRule("msvcrt.dll", "filename"),
)


def parse_denylist(lines: list[str]) -> list[DenyRule]:
    """One pattern per line, optional "type:" scope prefix, "#" comments."""
    rules = []
    for number, raw in enumerate(lines, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        scope = None
        pattern = line
        if ":" in line:
            prefix, rest = line.split(":", 1)
            prefix, rest = prefix.strip(), rest.strip()
            if prefix in ATTRIBUTE_TYPES:
                scope, pattern = prefix, rest
        if not pattern:
            raise DenylistError(f"line {number}: empty pattern")
        rules.append(DenyRule(pattern, scope))
    return rules


def load_denylist(path: str | Path) -> list[DenyRule]:
    return parse_denylist(Path(path).read_text(encoding="utf-8").splitlines())


def dedup_attributes(event: Event) -> Event:
    """Merge attributes equal on (type, value), keeping the first occurrence's
    position and id and joining distinct non-empty comments with "; ".

    Duplicates across different events are deliberately left alone: shared
    values are the correlation signal.
    """
    order: list[tuple[str, str]] = []
    first: dict[tuple[str, str], int] = {}
    comments: dict[tuple[str, str], list[str]] = {}
    for position, attribute in enumerate(event.attributes):
        key = (attribute.type, attribute.value)
        if key not in first:
            first[key] = position
            order.append(key)
            comments[key] = []
        if attribute.comment and attribute.comment not in comments[key]:
            comments[key].append(attribute.comment)
    merged = []
    for key in order:
        attribute = replace(event.attributes[first[key]], comment="; ".join(comments[key]))
        merged.append(attribute)
    return replace(event, attributes=merged)


def _protected(event: Event, attribute) -> bool:
    # Back-links carry the event-set ground truth; a malware event's own
    # hashes are its identity. Neither may be filtered away.
    if attribute.type == "comment":
        return True
    return event.kind == MALWARE and attribute.type in HASH_TYPES


def apply_denylist(event: Event, denylist: list[DenyRule]) -> Event:
    kept = [
        a
        for a in event.attributes
        if _protected(event, a) or not any(rule.matches(a.type, a.value) for rule in denylist)
    ]
    return replace(event, attributes=kept)


def drop_values(event: Event, values: set[str]) -> Event:
    """Remove attributes whose value was flagged, honoring the same
    protections as the denylist."""
    kept = [a for a in event.attributes if _protected(event, a) or a.value not in values]
    return replace(event, attributes=kept)


@dataclass
class NoiseReport:
    scores: dict[str, float]
    threshold: float
    flagged: set[str]


def _jaccard(a: set, b: set) -> float:
    if not a and not b:
        return 0.0
    return len(a & b) / len(a | b)


def contextual_noise_scores(dataset: list[EventSet], threshold: float = 0.7) -> NoiseReport:
    """Score every attribute value by how much it looks like cross-set noise.

    For a value present in k of K event sets, the score is
    (k / K) * (1 - mean pairwise Jaccard similarity of those sets with the
    value itself excluded). A value shared by many mutually dissimilar sets
    scores near 1; a value confined to a single set scores 0.
    """
    if not 0.0 <= threshold <= 1.0:
        raise ValueError(f"threshold must be within [0, 1], got {threshold}")
    if len(dataset) < 2:
        raise ValueError("need at least two event sets to score noise")

    set_pairs = [distinct_pairs(event_set) for event_set in dataset]
    membership: dict[str, list[int]] = {}
    for index, pairs in enumerate(set_pairs):
        for _, value in pairs:
            membership.setdefault(value, [])
            if index not in membership[value]:
                membership[value].append(index)

    total = len(dataset)
    scores: dict[str, float] = {}
    for value, indices in membership.items():
        k = len(indices)
        if k < 2:
            scores[value] = 0.0
            continue
        reduced = [{p for p in set_pairs[i] if p[1] != value} for i in indices]
        similarities = [
            _jaccard(reduced[i], reduced[j])
            for i in range(k)
            for j in range(i + 1, k)
        ]
        mean_similarity = sum(similarities) / len(similarities)
        scores[value] = (k / total) * (1.0 - mean_similarity)

    flagged = {value for value, score in scores.items() if score >= threshold}
    return NoiseReport(scores, threshold, flagged)
