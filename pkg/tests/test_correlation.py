import datetime as dt
import random
from functools import lru_cache

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ctipipe.correlation import (
    EXACT,
    FUZZY,
    GraphOptions,
    build_graph,
    canonical_name,
    event_set_similarity,
    exact_edges,
    find_path,
    fuzzy_edges,
    graph_to_dot,
    graph_to_json,
    lcs_length,
    lcs_ratio,
    name_similarity,
    temporal_timeline,
)
from ctipipe.events import Attribute, Event, EventSet, MALWARE, REPORT
from ctipipe.store import load_all

from conftest import DATA_DIR, random_event

DATE = dt.date(2017, 1, 1)


def event(event_id, pairs, kind=REPORT, info=None, date=DATE):
    attributes = [Attribute("Other", "", value, type_token) for type_token, value in pairs]
    return Event(event_id, date, info or f"e{event_id}.pdf", kind, attributes)


def oracle_lcs(x, y):
    @lru_cache(maxsize=None)
    def rec(i, j):
        if i == 0 or j == 0:
            return 0
        if x[i - 1] == y[j - 1]:
            return rec(i - 1, j - 1) + 1
        return max(rec(i - 1, j), rec(i, j - 1))

    return rec(len(x), len(y))


class TestLcs:
    @pytest.mark.parametrize(
        "x,y,length",
        [
            ("", "", 0),
            ("abc", "", 0),
            ("abc", "abc", 3),
            ("abc", "acb", 2),
            ("bartsimpson", "bsimpson", 8),
        ],
    )
    def test_known_lengths(self, x, y, length):
        assert lcs_length(x, y) == length

    @given(st.text(alphabet="abcd", max_size=12), st.text(alphabet="abcd", max_size=12))
    @settings(max_examples=150)
    def test_matches_recursive_oracle(self, x, y):
        assert lcs_length(x, y) == oracle_lcs(x, y)

    @given(st.text(alphabet="abcdef", max_size=16), st.text(alphabet="abcdef", max_size=16))
    @settings(max_examples=150)
    def test_ratio_bounds(self, x, y):
        ratio = lcs_ratio(x, y)
        assert 0.0 <= ratio <= 1.0
        assert lcs_ratio(x, y) == lcs_ratio(y, x)
        if x == y:
            assert ratio == 1.0

    def test_ratio_one_only_for_equal(self):
        assert lcs_ratio("abc", "abc") == 1.0
        assert lcs_ratio("abc", "abcd") < 1.0


class TestCanonicalForms:
    @pytest.mark.parametrize(
        "value,data_type,expected",
        [
            ("bartsimpson.com", "hostname", "bartsimpson"),
            ("bsimpson.net", "hostname", "bsimpson"),
            ("WWW.BartSimpson.COM", "hostname", "bartsimpson"),
            ("http://www.bartsimpson.com/path?q=1", "url", "bartsimpson"),
            ("https://user@portal.bsimpson.net:8443/x", "url", "bsimpson"),
            ("evil.xyz", "hostname", "evil.xyz"),  # unknown suffix: kept whole
            ("zhcat.exe", "filename", "zhcat"),
            ("C:\\tools\\ZhCat.EXE", "filename", "zhcat"),
            ("archive.tar.gz", "filename", "archive.tar"),
            ("  Mixed Case Marker  ", "other", "mixed case marker"),
            ("e:\\P\\x.pdb", "pdb", "e:\\p\\x.pdb"),
        ],
    )
    def test_canonical(self, value, data_type, expected):
        assert canonical_name(value, data_type) == expected

    def test_custom_suffixes(self):
        assert canonical_name("update.example.dev", "hostname", frozenset({"dev"})) == "example"


class TestExactEdges:
    def test_shared_filename_links_pair(self):
        events = load_all(DATA_DIR / "golden_store.jsonl")
        edges = exact_edges(events)
        shared = [e for e in edges if e.data_type == "filename"]
        assert [(e.a, e.b, e.value_a) for e in shared] == [(1, 2, "zhcat.exe")]

    def test_no_shared_values(self):
        edges = exact_edges([event(1, [("other", "x")]), event(2, [("other", "y")])])
        assert edges == []

    def test_three_way_share_is_complete(self):
        events = [event(i, [("ip-src", "7.7.7.7")]) for i in (1, 2, 3)]
        edges = exact_edges(events)
        assert [(e.a, e.b) for e in edges] == [(1, 2), (1, 3), (2, 3)]
        assert all(e.weight == 1.0 for e in edges)

    def test_same_value_different_type_no_edge(self):
        edges = exact_edges([event(1, [("other", "x")]), event(2, [("filename", "x")])])
        assert edges == []

    def test_cross_set_only_skips_back_links(self):
        title = "origin.pdf"
        events = [
            Event(1, DATE, "a" * 32, MALWARE, [
                Attribute("Payload installation", "", "a" * 32, "md5"),
                Attribute("Other", "", title, "comment"),
            ]),
            Event(2, DATE, "b" * 32, MALWARE, [
                Attribute("Payload installation", "", "b" * 32, "md5"),
                Attribute("Other", "", title, "comment"),
            ]),
        ]
        assert len(exact_edges(events)) == 1
        assert exact_edges(events, cross_set_only=True) == []

    def test_duplicate_attributes_yield_single_edge(self):
        events = [
            event(1, [("other", "x"), ("other", "x")]),
            event(2, [("other", "x")]),
        ]
        assert len(exact_edges(events)) == 1

    def brute_force(self, events, cross_set_only=False):
        found = set()
        for left in events:
            for right in events:
                if left.id >= right.id:
                    continue
                for la in left.attributes:
                    for ra in right.attributes:
                        if cross_set_only and la.type == "comment":
                            continue
                        if la.type == ra.type and la.value == ra.value:
                            found.add((left.id, right.id, la.type, la.value))
        return found

    def test_matches_brute_force_on_random_fixtures(self):
        rng = random.Random(99)
        for _ in range(30):
            events = [random_event(rng, i) for i in range(1, rng.randint(2, 10))]
            got = {(e.a, e.b, e.data_type, e.value_a) for e in exact_edges(events)}
            assert got == self.brute_force(events)

    def test_permutation_invariant(self):
        rng = random.Random(13)
        events = [random_event(rng, i) for i in range(1, 9)]
        baseline = exact_edges(events)
        shuffled = events[:]
        rng.shuffle(shuffled)
        assert exact_edges(shuffled) == baseline


class TestFuzzyEdges:
    def test_paper_domain_pair_links(self):
        events = [
            event(1, [("hostname", "bartsimpson.com")]),
            event(2, [("hostname", "bsimpson.net")]),
        ]
        edges = fuzzy_edges(events, threshold=0.8)
        assert len(edges) == 1
        edge = edges[0]
        assert edge.kind == FUZZY
        assert edge.weight == pytest.approx(16 / 19, abs=1e-9)

    def test_identical_values_never_fuzzy(self):
        events = [event(1, [("hostname", "a.com")]), event(2, [("hostname", "a.com")])]
        assert fuzzy_edges(events, threshold=0.1) == []

    def test_dissimilar_domains_not_linked(self):
        events = [
            event(1, [("hostname", "example.com")]),
            event(2, [("hostname", "zqwtkv.net")]),
        ]
        # canonical "example" vs "zqwtkv": LCS is empty, ratio 0.
        assert name_similarity("example.com", "zqwtkv.net", "hostname") == 0.0
        assert fuzzy_edges(events, threshold=0.8) == []

    def test_hashes_ips_cves_never_fuzzy(self):
        events = [
            event(1, [("md5", "a" * 32), ("ip-src", "1.2.3.4"), ("vulnerability", "CVE-2017-0001")]),
            event(2, [("md5", "a" * 31 + "b"), ("ip-src", "1.2.3.5"), ("vulnerability", "CVE-2017-0002")]),
        ]
        assert fuzzy_edges(events, threshold=0.5) == []

    def test_same_event_values_not_compared(self):
        events = [event(1, [("hostname", "cdn.lure-download.net"), ("hostname", "lure-download.net")])]
        assert fuzzy_edges(events, threshold=0.8) == []

    def test_threshold_validated(self):
        with pytest.raises(ValueError):
            fuzzy_edges([], threshold=0.0)

    def test_no_pair_gets_exact_and_fuzzy_for_same_values(self):
        events = [
            event(1, [("hostname", "bartsimpson.com"), ("other", "shared")]),
            event(2, [("hostname", "bartsimpson.com"), ("other", "shared")]),
        ]
        graph = build_graph(events, GraphOptions(fuzzy=True, threshold=0.5))
        pairs_exact = {(e.a, e.b, e.value_a, e.value_b) for e in graph.edges if e.kind == EXACT}
        pairs_fuzzy = {(e.a, e.b, e.value_a, e.value_b) for e in graph.edges if e.kind == FUZZY}
        assert pairs_exact and not pairs_exact & pairs_fuzzy


class TestEventSetSimilarity:
    def set_of(self, index, pairs):
        title = f"s{index}.pdf"
        return EventSet(title, event(index, pairs, info=title))

    def test_identical_sets(self):
        a = self.set_of(1, [("other", "x"), ("other", "y")])
        b = self.set_of(2, [("other", "x"), ("other", "y")])
        assert event_set_similarity(a, b) == 1.0

    def test_disjoint_sets(self):
        a = self.set_of(1, [("other", "x")])
        b = self.set_of(2, [("other", "y")])
        assert event_set_similarity(a, b) == 0.0

    def test_two_shared_of_six(self):
        a = self.set_of(1, [("other", "s1"), ("other", "s2"), ("other", "a1"), ("other", "a2")])
        b = self.set_of(2, [("other", "s1"), ("other", "s2"), ("other", "b1"), ("other", "b2")])
        assert event_set_similarity(a, b) == pytest.approx(1 / 3)

    def test_both_empty(self):
        assert event_set_similarity(self.set_of(1, []), self.set_of(2, [])) == 0.0

    def test_back_links_excluded(self):
        title = "same.pdf"
        left = EventSet(title, event(1, [], info=title), [
            Event(3, DATE, "a" * 32, MALWARE, [Attribute("Other", "", title, "comment")]),
        ])
        right = EventSet(title, event(2, [], info=title), [
            Event(4, DATE, "b" * 32, MALWARE, [Attribute("Other", "", title, "comment")]),
        ])
        assert event_set_similarity(left, right) == 0.0


class TestPaths:
    def lazarus_events(self):
        return [
            event(1, [("md5", "4e" * 16), ("hostname", "updates.winterlace.org")], info="A.pdf"),
            event(2, [("md5", "4e" * 16), ("ip-src", "203.0.113.77")], info="B.pdf"),
            event(3, [("ip-src", "203.0.113.77"), ("hostname", "lure-download.net")], info="C.pdf"),
        ]

    def test_two_hop_path(self):
        graph = build_graph(self.lazarus_events())
        assert find_path(graph, 1, 3) == [1, 2, 3]

    def test_self_path(self):
        graph = build_graph(self.lazarus_events())
        assert find_path(graph, 2, 2) == [2]

    def test_disconnected(self):
        events = self.lazarus_events() + [event(9, [("other", "isolated")], info="D.pdf")]
        graph = build_graph(events)
        assert find_path(graph, 1, 9) is None

    def test_unknown_id_rejected(self):
        graph = build_graph(self.lazarus_events())
        with pytest.raises(ValueError):
            find_path(graph, 1, 404)

    def test_tie_broken_by_bottleneck_weight(self):
        # Two 2-hop routes: via 2 the first hop is fuzzy (weight < 1), via 3
        # both hops are exact. The stronger bottleneck wins over the lower id.
        events = [
            event(1, [("hostname", "brightwater.com"), ("other", "left-link")]),
            event(2, [("hostname", "brightwaters.com"), ("other", "mid-link")]),
            event(3, [("other", "left-link"), ("other", "right-link")]),
            event(4, [("other", "mid-link"), ("other", "right-link")]),
        ]
        graph = build_graph(events, GraphOptions(fuzzy=True, threshold=0.8))
        fuzzy = [e for e in graph.edges if e.kind == FUZZY]
        assert [(e.a, e.b) for e in fuzzy] == [(1, 2)]
        path = find_path(graph, 1, 4)
        assert path == [1, 3, 4]

    def test_tie_broken_by_smaller_ids(self):
        events = [
            event(1, [("other", "left"), ("other", "right")]),
            event(2, [("other", "left"), ("other", "goal")]),
            event(3, [("other", "right"), ("other", "goal")]),
            event(4, [("other", "goal")]),
        ]
        graph = build_graph(events)
        assert find_path(graph, 1, 4) == [1, 2, 4]

    def test_path_is_minimal_and_exists_in_graph(self):
        rng = random.Random(31)
        for _ in range(20):
            events = [random_event(rng, i) for i in range(1, rng.randint(3, 10))]
            graph = build_graph(events)
            adjacency = {}
            for e in graph.edges:
                adjacency.setdefault(e.a, set()).add(e.b)
                adjacency.setdefault(e.b, set()).add(e.a)
            ids = [e.id for e in events]
            start, goal = rng.choice(ids), rng.choice(ids)
            path = find_path(graph, start, goal)
            # independent BFS for the reference distance
            distances = {start: 0}
            queue = [start]
            while queue:
                node = queue.pop(0)
                for nxt in adjacency.get(node, ()):
                    if nxt not in distances:
                        distances[nxt] = distances[node] + 1
                        queue.append(nxt)
            if goal not in distances:
                assert path is None
            else:
                assert path is not None
                assert len(path) - 1 == distances[goal]
                for a, b in zip(path, path[1:]):
                    assert b in adjacency.get(a, set())


class TestTimeline:
    def test_compiled_before_published(self):
        malware = event(2, [], kind=MALWARE, info="a" * 32, date=dt.date(2013, 5, 1))
        report = event(1, [], info="r.pdf", date=dt.date(2014, 12, 3))
        timeline = temporal_timeline([report, malware])
        assert [entry[1] for entry in timeline] == [2, 1]

    def test_equal_dates_ordered_by_id(self):
        timeline = temporal_timeline([
            event(2852, [], info="Cylance_Operation_Cleaver_Report.pdf", date=dt.date(2014, 12, 3)),
            event(2741, [], kind=MALWARE, info="836ef6b06c5fd52ecc910a3e3408004a", date=dt.date(2014, 12, 3)),
        ])
        assert [entry[1] for entry in timeline] == [2741, 2852]
        assert timeline[0][2] == MALWARE


class TestExports:
    def test_dot_output(self):
        graph = build_graph([
            event(1, [("filename", "zhcat.exe")], info='report "one".pdf'),
            event(2, [("filename", "zhcat.exe")], info="a" * 32, kind=MALWARE),
        ])
        dot = graph_to_dot(graph)
        assert dot.startswith("graph correlation {")
        assert '1 -- 2 [label="filename=zhcat.exe"];' in dot
        assert '\\"one\\"' in dot  # quotes escaped

    def test_dot_fuzzy_label_uses_similarity(self):
        graph = build_graph(
            [event(1, [("hostname", "bartsimpson.com")]), event(2, [("hostname", "bsimpson.net")])],
            GraphOptions(fuzzy=True),
        )
        assert "hostname\u22480.842" in graph_to_dot(graph)

    def test_json_mirror(self):
        events = [event(1, [("other", "x")]), event(2, [("other", "x")])]
        payload = graph_to_json(build_graph(events))
        assert [node["id"] for node in payload["nodes"]] == [1, 2]
        assert payload["edges"][0] == {
            "a": 1, "b": 2, "kind": "exact", "data_type": "other",
            "value_a": "x", "value_b": "x", "weight": 1.0,
        }
