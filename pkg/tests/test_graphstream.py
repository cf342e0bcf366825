import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dygad.errors import ConfigError, DataError
from dygad.graphstream import (
    GraphStream,
    Snapshot,
    build_stream,
    ingest_edge_list,
    inject_anomalies,
    parse_edge_events,
    split_train_test,
)


def write_lines(tmp_path, lines, name="edges.txt"):
    path = tmp_path / name
    path.write_text("\n".join(lines) + "\n")
    return str(path)


class TestParsing:
    def test_whitespace_and_comma_fields(self, tmp_path):
        path = write_lines(tmp_path, ["1 2 10", "3,4,11", "5\t6\t12"])
        events = parse_edge_events(path)
        assert [(e.src, e.dst, e.time) for e in events] == [
            (1, 2, 10), (3, 4, 11), (5, 6, 12)]

    def test_comments_and_blanks_skipped(self, tmp_path):
        path = write_lines(tmp_path, ["# header", "% other style", "", "1 2 3"])
        assert len(parse_edge_events(path)) == 1

    def test_wrong_field_count_reports_line(self, tmp_path):
        path = write_lines(tmp_path, ["1 2 3", "4 5"])
        with pytest.raises(DataError, match="line 2"):
            parse_edge_events(path)

    def test_non_integer_field(self, tmp_path):
        path = write_lines(tmp_path, ["1 2 x"])
        with pytest.raises(DataError, match="integers"):
            parse_edge_events(path)

    def test_negative_timestamp(self, tmp_path):
        path = write_lines(tmp_path, ["1 2 -5"])
        with pytest.raises(DataError, match="negative"):
            parse_edge_events(path)

    def test_empty_file_errors(self, tmp_path):
        path = write_lines(tmp_path, ["# only a comment"])
        with pytest.raises(DataError, match="no events"):
            parse_edge_events(path)

    def test_missing_file_names_path(self, tmp_path):
        with pytest.raises(DataError, match="nope.txt"):
            parse_edge_events(str(tmp_path / "nope.txt"))


class TestBuildStream:
    def test_sorted_by_time_stable(self, tmp_path):
        # equal timestamps keep file order; later timestamp sorts after
        path = write_lines(tmp_path, ["5 6 2", "1 2 1", "3 4 1"])
        gs = ingest_edge_list(path, snapshot_size=10)
        snap = gs.snapshots[0]
        # dense ids follow first appearance in *sorted* order: 1,2,3,4,5,6
        assert snap.edges == [(0, 1), (2, 3), (4, 5)]
        assert gs.node_ids == [1, 2, 3, 4, 5, 6]

    def test_self_loops_dropped(self, tmp_path):
        path = write_lines(tmp_path, ["1 1 0", "1 2 1"])
        gs = ingest_edge_list(path, snapshot_size=10)
        assert gs.edge_count == 1

    def test_all_self_loops_gives_empty_stream(self, tmp_path):
        path = write_lines(tmp_path, ["1 1 0", "2 2 1"])
        gs = ingest_edge_list(path, snapshot_size=10)
        assert gs.snapshot_count == 0 and gs.node_count == 0

    def test_undirected_dedup_keeps_first(self, tmp_path):
        path = write_lines(tmp_path, ["1 2 0", "2 1 5", "1 2 9"])
        gs = ingest_edge_list(path, snapshot_size=10)
        assert gs.edge_count == 1

    def test_chunking(self, tmp_path):
        lines = [f"{i} {i + 1} {i}" for i in range(7)]
        gs = ingest_edge_list(write_lines(tmp_path, lines), snapshot_size=3)
        assert [len(s) for s in gs.snapshots] == [3, 3, 1]
        assert [s.index for s in gs.snapshots] == [0, 1, 2]

    def test_snapshot_size_must_be_positive(self, tmp_path):
        path = write_lines(tmp_path, ["1 2 0"])
        with pytest.raises(ConfigError):
            ingest_edge_list(path, snapshot_size=0)

    def test_degree_sums_to_twice_edges(self, tmp_path):
        lines = [f"{i} {(i * 3 + 1) % 10} {i}" for i in range(20)]
        gs = ingest_edge_list(write_lines(tmp_path, lines), snapshot_size=6)
        for snap in gs.snapshots:
            assert snap.degree.sum() == 2 * len(snap)

    def test_csr_matches_edges(self):
        snap = Snapshot(0, [(0, 1), (1, 2), (0, 3)], 5)
        indptr, indices = snap.csr()
        assert indptr.tolist() == [0, 2, 4, 5, 6, 6]
        assert sorted(indices[0:2].tolist()) == [1, 3]
        assert sorted(indices[2:4].tolist()) == [0, 2]

    def test_active_nodes(self):
        snap = Snapshot(0, [(0, 3)], 6)
        assert snap.active_nodes.tolist() == [0, 3]

    def test_from_snapshot_edges_rejects_bad_input(self):
        with pytest.raises(DataError, match="self-loop"):
            GraphStream.from_snapshot_edges([[(1, 1)]], 3)
        with pytest.raises(DataError, match="out of range"):
            GraphStream.from_snapshot_edges([[(0, 9)]], 3)
        with pytest.raises(DataError, match="duplicate"):
            GraphStream.from_snapshot_edges([[(0, 1), (1, 0)]], 3)

    def test_content_hash_sensitivity(self):
        a = GraphStream.from_snapshot_edges([[(0, 1)]], 3)
        b = GraphStream.from_snapshot_edges([[(0, 2)]], 3)
        assert a.content_hash() != b.content_hash()
        assert a.content_hash() == GraphStream.from_snapshot_edges([[(0, 1)]], 3).content_hash()


class TestSplit:
    def make(self, t):
        return GraphStream.from_snapshot_edges([[(0, 1)] for _ in range(t)], 2)

    def test_even_split(self):
        train, test = split_train_test(self.make(10), 0.5)
        assert list(train) == list(range(5)) and list(test) == list(range(5, 10))

    def test_floor_behavior(self):
        train, test = split_train_test(self.make(5), 0.5)
        assert len(train) == 2 and len(test) == 3

    def test_bad_ratio(self):
        with pytest.raises(ConfigError):
            split_train_test(self.make(4), 1.0)

    def test_too_few_snapshots(self):
        with pytest.raises(DataError):
            split_train_test(self.make(1), 0.5)

    def test_empty_side(self):
        with pytest.raises(DataError):
            split_train_test(self.make(3), 0.1)


class TestInjection:
    def make_stream(self, n=30, m=40, seed=0):
        rng = np.random.default_rng(seed)
        edges = set()
        while len(edges) < m:
            u, v = rng.integers(0, n, 2)
            if u != v:
                edges.add((min(u, v), max(u, v)))
        return GraphStream.from_snapshot_edges([sorted(edges)], n)

    def test_counts_and_labels(self):
        gs = self.make_stream()
        labeled = inject_anomalies(gs, [0], 0.10, seed=1)
        normals = [e for e in labeled if e.label == 0]
        anomalies = [e for e in labeled if e.label == 1]
        assert len(normals) == 40
        assert len(anomalies) == 4  # floor(0.1 * 40 + 0.5)

    def test_rounding_half_up(self):
        gs = self.make_stream(m=5)
        labeled = inject_anomalies(gs, [0], 0.10, seed=1)
        # 0.1 * 5 = 0.5 rounds up to 1
        assert sum(e.label for e in labeled) == 1

    def test_injected_absent_and_distinct(self):
        gs = self.make_stream()
        labeled = inject_anomalies(gs, [0], 0.2, seed=3)
        inj = [e.edge for e in labeled if e.label == 1]
        assert len(set(inj)) == len(inj)
        for u, v in inj:
            assert u != v
            assert not gs.snapshots[0].has_edge(u, v)

    def test_deterministic(self):
        gs = self.make_stream()
        a = inject_anomalies(gs, [0], 0.15, seed=9)
        b = inject_anomalies(gs, [0], 0.15, seed=9)
        assert a == b

    def test_complete_graph_gives_up(self):
        # K_5 has no absent pairs at all
        edges = [(i, j) for i in range(5) for j in range(i + 1, 5)]
        gs = GraphStream.from_snapshot_edges([edges], 5)
        with pytest.raises(DataError, match="absent pairs"):
            inject_anomalies(gs, [0], 0.2, seed=0)

    def test_bad_percentage(self):
        gs = self.make_stream()
        with pytest.raises(ConfigError):
            inject_anomalies(gs, [0], 0.0, seed=0)

    @settings(max_examples=25, deadline=None)
    @given(seed=st.integers(0, 10_000), pct=st.floats(0.05, 0.5))
    def test_injection_never_collides(self, seed, pct):
        gs = self.make_stream(seed=seed % 7)
        labeled = inject_anomalies(gs, [0], pct, seed=seed)
        for e in labeled:
            if e.label == 1:
                assert e.edge not in gs.snapshots[0].edge_set
