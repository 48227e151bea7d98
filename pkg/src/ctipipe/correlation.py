"""Correlate events through shared and similar attribute values.

Exact edges come from plain string matching, the approach commercial
intelligence services take. That misses near-identical infrastructure like
"bartsimpson.com" vs "bsimpson.net", so name-like values also get a fuzzy
pass: a longest-common-subsequence ratio over canonical forms (registrable
domain label, basename without extension, or the lowercased string).
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .events import Event, EventSet, distinct_pairs, is_back_link

EXACT = "exact"
FUZZY = "fuzzy"

# Types eligible for similarity matching. Hashes, IPs, and CVEs are identities:
# nearly-equal ones are unrelated, so they never fuzzy-match.
NAME_LIKE_TYPES = frozenset({"hostname", "url", "email", "filename", "pdb", "other"})

DEFAULT_PUBLIC_SUFFIXES = frozenset({"com", "net", "org"})

DEFAULT_FUZZY_THRESHOLD = 0.8


@dataclass(frozen=True)
class Edge:
    a: int
    b: int
    kind: str
    data_type: str
    value_a: str
    value_b: str
    weight: float


@dataclass
class GraphOptions:
    fuzzy: bool = False
    threshold: float = DEFAULT_FUZZY_THRESHOLD
    cross_set_only: bool = False
    public_suffixes: frozenset[str] = DEFAULT_PUBLIC_SUFFIXES


@dataclass
class CorrelationGraph:
    nodes: dict[int, tuple[str, str]]  # event id -> (kind, info)
    edges: list[Edge] = field(default_factory=list)


def lcs_length(x: str, y: str) -> int:
    """Longest common subsequence length, iterative two-row DP."""
    if not x or not y:
        return 0
    previous = [0] * (len(y) + 1)
    for cx in x:
        current = [0]
        for j, cy in enumerate(y, start=1):
            if cx == cy:
                current.append(previous[j - 1] + 1)
            else:
                current.append(max(current[j - 1], previous[j]))
        previous = current
    return previous[-1]


def lcs_ratio(x: str, y: str) -> float:
    """2*LCS / (|x| + |y|); 1.0 exactly when the strings are equal."""
    if not x and not y:
        return 1.0
    return 2.0 * lcs_length(x, y) / (len(x) + len(y))


def _host_of(value: str) -> str:
    host = value.split("://", 1)[-1]
    host = host.split("/", 1)[0].split("?", 1)[0]
    if "@" in host:
        host = host.rsplit("@", 1)[-1]
    return host.split(":", 1)[0]


def canonical_name(value: str, data_type: str, suffixes: frozenset[str] = DEFAULT_PUBLIC_SUFFIXES) -> str:
    """Canonical form used for similarity.

    Hostnames and URLs reduce to the registrable-domain label with the public
    suffix stripped; filenames to the basename without its extension; anything
    else to the lowercased, trimmed string.
    """
    if data_type in ("hostname", "url"):
        labels = _host_of(value).lower().split(".")
        if len(labels) >= 2 and labels[-1] in suffixes:
            return labels[-2]
        return ".".join(labels)
    if data_type == "filename":
        basename = value.replace("\\", "/").rsplit("/", 1)[-1].lower()
        return basename.rsplit(".", 1)[0] if "." in basename else basename
    return value.strip().lower()


def name_similarity(
    value_a: str,
    value_b: str,
    data_type: str,
    suffixes: frozenset[str] = DEFAULT_PUBLIC_SUFFIXES,
) -> float:
    return lcs_ratio(
        canonical_name(value_a, data_type, suffixes),
        canonical_name(value_b, data_type, suffixes),
    )


def _event_pairs(event: Event, cross_set_only: bool) -> set[tuple[str, str]]:
    return {
        (a.type, a.value)
        for a in event.attributes
        if not (cross_set_only and is_back_link(a))
    }


def exact_edges(events: list[Event], *, cross_set_only: bool = False) -> list[Edge]:
    """One edge per event pair per identical (type, value).

    With ``cross_set_only`` the back-link comments are skipped: they connect
    an event set's own members, which is already known ground truth.
    """
    owners: dict[tuple[str, str], list[int]] = {}
    for event in events:
        for pair in sorted(_event_pairs(event, cross_set_only)):
            owners.setdefault(pair, [])
            if event.id not in owners[pair]:
                owners[pair].append(event.id)
    edges = []
    for (data_type, value), ids in owners.items():
        ids = sorted(ids)
        for i in range(len(ids)):
            for j in range(i + 1, len(ids)):
                edges.append(Edge(ids[i], ids[j], EXACT, data_type, value, value, 1.0))
    edges.sort(key=lambda e: (e.a, e.b, e.data_type, e.value_a, e.value_b))
    return edges


def fuzzy_edges(
    events: list[Event],
    threshold: float = DEFAULT_FUZZY_THRESHOLD,
    *,
    suffixes: frozenset[str] = DEFAULT_PUBLIC_SUFFIXES,
) -> list[Edge]:
    """Similarity edges between distinct name-like values of the same type.

    Equal values are exact_edges' business and never produce a fuzzy edge,
    so no event pair carries both kinds for the same value pair.
    """
    if not 0.0 < threshold <= 1.0:
        raise ValueError(f"threshold must be within (0, 1], got {threshold}")
    by_type: dict[str, list[tuple[str, int]]] = {}
    for event in events:
        for data_type, value in sorted(_event_pairs(event, False)):
            if data_type in NAME_LIKE_TYPES:
                entry = (value, event.id)
                bucket = by_type.setdefault(data_type, [])
                if entry not in bucket:
                    bucket.append(entry)
    edges: set[Edge] = set()
    for data_type, entries in by_type.items():
        for i, (value_i, id_i) in enumerate(entries):
            for value_j, id_j in entries[i + 1:]:
                if id_i == id_j or value_i == value_j:
                    continue
                similarity = name_similarity(value_i, value_j, data_type, suffixes)
                if similarity >= threshold:
                    a, b = (id_i, id_j) if id_i < id_j else (id_j, id_i)
                    va, vb = (value_i, value_j) if id_i < id_j else (value_j, value_i)
                    edges.add(Edge(a, b, FUZZY, data_type, va, vb, round(similarity, 9)))
    return sorted(edges, key=lambda e: (e.a, e.b, e.data_type, e.value_a, e.value_b))


def event_set_similarity(a: EventSet, b: EventSet) -> float:
    """Jaccard index over the distinct (type, value) pairs of two event sets,
    back-links excluded; 0.0 when both sets are empty."""
    pairs_a, pairs_b = distinct_pairs(a), distinct_pairs(b)
    if not pairs_a and not pairs_b:
        return 0.0
    return len(pairs_a & pairs_b) / len(pairs_a | pairs_b)


def build_graph(events: list[Event], options: GraphOptions | None = None) -> CorrelationGraph:
    options = options or GraphOptions()
    nodes = {event.id: (event.kind, event.info) for event in events}
    edges = exact_edges(events, cross_set_only=options.cross_set_only)
    if options.fuzzy:
        edges.extend(fuzzy_edges(events, options.threshold, suffixes=options.public_suffixes))
        edges.sort(key=lambda e: (e.a, e.b, e.kind, e.data_type, e.value_a, e.value_b))
    return CorrelationGraph(nodes, edges)


def find_path(graph: CorrelationGraph, start: int, goal: int) -> list[int] | None:
    """Shortest path by hop count; ties prefer the larger minimum edge weight
    along the path, then the smaller node-id sequence. None when disconnected."""
    if start not in graph.nodes:
        raise ValueError(f"unknown event id {start}")
    if goal not in graph.nodes:
        raise ValueError(f"unknown event id {goal}")
    if start == goal:
        return [start]

    weight: dict[tuple[int, int], float] = {}
    adjacency: dict[int, set[int]] = {node: set() for node in graph.nodes}
    for edge in graph.edges:
        adjacency[edge.a].add(edge.b)
        adjacency[edge.b].add(edge.a)
        key = (min(edge.a, edge.b), max(edge.a, edge.b))
        weight[key] = max(weight.get(key, 0.0), edge.weight)

    distance = {start: 0}
    frontier = [start]
    while frontier and goal not in distance:
        next_frontier = []
        for node in frontier:
            for neighbor in adjacency[node]:
                if neighbor not in distance:
                    distance[neighbor] = distance[node] + 1
                    next_frontier.append(neighbor)
        frontier = next_frontier
    if goal not in distance:
        return None

    # Best path per node: maximize the bottleneck weight, then take the
    # lexicographically smallest id sequence.
    best: dict[int, tuple[float, tuple[int, ...]]] = {start: (float("inf"), (start,))}
    by_level: dict[int, list[int]] = {}
    for node, dist in distance.items():
        by_level.setdefault(dist, []).append(node)
    for dist in range(1, distance[goal] + 1):
        for node in sorted(by_level.get(dist, [])):
            candidates = []
            for neighbor in adjacency[node]:
                if distance.get(neighbor) == dist - 1 and neighbor in best:
                    bottleneck, path = best[neighbor]
                    pair = (min(node, neighbor), max(node, neighbor))
                    candidates.append((min(bottleneck, weight[pair]), path + (node,)))
            if candidates:
                best[node] = max(candidates, key=lambda c: (c[0], tuple(-i for i in c[1])))
    return list(best[goal][1])


def temporal_timeline(events: list[Event]) -> list[tuple]:
    """(date, event id, kind, info) ascending by date, ties by id. Malware
    events already carry their compile date when the analysis had one."""
    entries = [(e.date, e.id, e.kind, e.info) for e in events]
    entries.sort(key=lambda entry: (entry[0], entry[1]))
    return entries


def _dot_escape(text: str) -> str:
    return text.replace("\\", "\\\\").replace('"', '\\"')


def graph_to_dot(graph: CorrelationGraph) -> str:
    lines = ["graph correlation {"]
    for node_id in sorted(graph.nodes):
        kind, info = graph.nodes[node_id]
        lines.append(f'  {node_id} [label="{_dot_escape(info)}" kind="{kind}"];')
    for edge in graph.edges:
        if edge.kind == EXACT:
            label = f"{edge.data_type}={edge.value_a}"
        else:
            label = f"{edge.data_type}≈{edge.weight:.3f}"
        lines.append(f'  {edge.a} -- {edge.b} [label="{_dot_escape(label)}"];')
    lines.append("}")
    return "\n".join(lines) + "\n"


def graph_to_json(graph: CorrelationGraph) -> dict:
    return {
        "nodes": [
            {"id": node_id, "kind": kind, "info": info}
            for node_id, (kind, info) in sorted(graph.nodes.items())
        ],
        "edges": [
            {
                "a": e.a,
                "b": e.b,
                "kind": e.kind,
                "data_type": e.data_type,
                "value_a": e.value_a,
                "value_b": e.value_b,
                "weight": e.weight,
            }
            for e in graph.edges
        ],
    }
