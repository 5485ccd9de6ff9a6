"""Dataset files, synthetic pattern graphs, and query grounding."""

import numpy as np
import pytest

from rocone.data import (
    KnowledgeGraph,
    PatternSpec,
    QueryDataset,
    generate_synthetic,
    generate_translation_kg,
    ground_queries,
    load_dataset_dir,
    load_graph,
    load_graph_split,
    load_queries,
    queries_from_edges,
    save_dataset_dir,
    save_graph,
    save_graph_split,
    save_queries,
    template_answers,
)
from rocone.errors import ConfigError, DataError, ParseError
from rocone.querylang import (
    QUERY_TYPES,
    GroundedQuery,
    build_adjacency,
    build_template,
    symbolic_answers,
)


class TestGraphFiles:
    def test_round_trip(self, tmp_path):
        triples = [(0, 0, 1), (1, 1, 2), (2, 0, 0)]
        path = tmp_path / "train.txt"
        save_graph_split(path, triples, 3, 2, "train")
        manifest, loaded = load_graph_split(path)
        assert manifest == {"entities": 3, "relations": 2, "split": "train"}
        assert loaded == triples

    def test_missing_version_line(self, tmp_path):
        path = tmp_path / "train.txt"
        path.write_text('{"entities": 1}\n')
        with pytest.raises(ParseError, match="version"):
            load_graph_split(path)

    def test_unknown_version_rejected(self, tmp_path):
        path = tmp_path / "train.txt"
        path.write_text("#version 2\n{}\n")
        with pytest.raises(ParseError):
            load_graph_split(path)

    def test_malformed_line_number_reported(self, tmp_path):
        path = tmp_path / "train.txt"
        path.write_text(
            '#version 1\n{"entities": 3, "relations": 1, "split": "train"}\n'
            "0\t0\t1\n0\tx\t2\n"
        )
        with pytest.raises(ParseError, match=":4"):
            load_graph_split(path)

    def test_duplicate_triple_rejected(self):
        with pytest.raises(DataError, match="duplicate"):
            KnowledgeGraph(3, 1, {"train": ((0, 0, 1), (0, 0, 1))})

    def test_id_overflow_rejected(self):
        with pytest.raises(DataError, match="out of range"):
            KnowledgeGraph(3, 1, {"train": ((0, 0, 5),)})

    def test_graph_dir_round_trip(self, tmp_path):
        graph = generate_translation_kg(8, (1, 2), seed=0)
        save_graph(graph, tmp_path)
        loaded = load_graph(tmp_path)
        assert loaded.n_entities == graph.n_entities
        assert loaded.splits["train"] == graph.splits["train"]

    def test_missing_train_split(self, tmp_path):
        with pytest.raises(DataError, match="train"):
            load_graph(tmp_path)


class TestQueryFiles:
    def test_round_trip_with_empty_sets(self, tmp_path):
        ds = QueryDataset({
            "1p": (GroundedQuery("1p", (0,), (1,), frozenset({2, 3}), frozenset()),),
            "2i": (GroundedQuery("2i", (0, 1), (0, 1), frozenset(),
                                 frozenset({4})),),
        })
        path = tmp_path / "q.txt"
        save_queries(path, ds)
        loaded = load_queries(path)
        assert loaded.by_type["1p"] == ds.by_type["1p"]
        assert loaded.by_type["2i"] == ds.by_type["2i"]

    def test_require_hard(self, tmp_path):
        ds = QueryDataset({
            "1p": (GroundedQuery("1p", (0,), (0,), frozenset({1}), frozenset()),),
        })
        path = tmp_path / "q.txt"
        save_queries(path, ds)
        with pytest.raises(DataError, match="hard"):
            load_queries(path, require_hard=True)

    def test_unknown_type_rejected(self, tmp_path):
        path = tmp_path / "q.txt"
        path.write_text("#version 1\n9p\t0\t0\t1\t2\n")
        with pytest.raises(ParseError, match="9p"):
            load_queries(path)

    def test_dataset_dir_round_trip(self, tmp_path):
        graph, holdout = generate_synthetic(
            PatternSpec("symmetric", 12, 10, 0.2), seed=0
        )
        train_qs = queries_from_edges(graph, "train")
        save_dataset_dir(tmp_path, graph, {"train": train_qs, "test": holdout})
        g2, qs2 = load_dataset_dir(tmp_path)
        assert g2.splits == graph.splits
        assert qs2["train"].by_type == train_qs.by_type
        assert qs2["test"].by_type == holdout.by_type


class TestPatternSpec:
    def test_holdout_range(self):
        with pytest.raises(ConfigError):
            PatternSpec("symmetric", 10, 5, 1.5)

    def test_infeasible_pairs(self):
        with pytest.raises(ConfigError, match="infeasible"):
            PatternSpec("symmetric", 5, 100, 0.2)

    def test_unknown_pattern(self):
        with pytest.raises(ConfigError):
            PatternSpec("cyclic", 10, 5, 0.2)


class TestGenerateSynthetic:
    def test_symmetric_counts(self):
        """10 pairs at holdout 0.2: 8 reverse edges in train, 2 held out."""
        graph, holdout = generate_synthetic(
            PatternSpec("symmetric", 20, 10, 0.2), seed=1
        )
        assert len(graph.splits["train"]) == 10 + 8
        assert len(graph.splits["test"]) == 2
        holdout.require_hard_answers()

    def test_symmetric_reverses(self):
        graph, _ = generate_synthetic(PatternSpec("symmetric", 20, 10, 0.2), seed=2)
        all_edges = set(graph.triples("train", "test"))
        for h, r, t in all_edges:
            assert (t, r, h) in all_edges

    def test_deterministic(self):
        a = generate_synthetic(PatternSpec("inverse-pair", 15, 12, 0.25), seed=7)
        b = generate_synthetic(PatternSpec("inverse-pair", 15, 12, 0.25), seed=7)
        assert a[0].splits == b[0].splits
        assert a[1].by_type == b[1].by_type

    def test_composition_has_supporting_paths(self):
        graph, holdout = generate_synthetic(
            PatternSpec("composition-triple", 25, 15, 0.2), seed=3
        )
        adj = graph.adjacency("train")
        for q in holdout.by_type["1p"]:
            assert q.relations == (2,)
            a = q.anchors[0]
            for c in q.hard_answers:
                mids = adj.get((a, 0), set())
                assert any(c in adj.get((b, 1), set()) for b in mids)

    def test_inverse_pair_structure(self):
        graph, holdout = generate_synthetic(
            PatternSpec("inverse-pair", 15, 12, 0.25), seed=4
        )
        assert graph.n_relations == 2
        for q in holdout.by_type["1p"]:
            assert q.relations == (1,)

    def test_random_feasibility_guard(self):
        with pytest.raises(ConfigError, match="infeasible"):
            generate_synthetic(
                PatternSpec("random", 5, 0, 0.2, n_relations=1, n_triples=100),
                seed=0,
            )


class TestTemplateAnswers:
    def test_1p_is_tail_set(self):
        adj = build_adjacency([(0, 0, 1), (0, 0, 2), (1, 0, 2)])
        assert template_answers("1p", (0,), (0,), adj, 3) == {1, 2}

    def test_2i_is_intersection_of_1p(self):
        adj = build_adjacency([(0, 0, 2), (0, 0, 3), (1, 1, 3), (1, 1, 4)])
        a = template_answers("1p", (0,), (0,), adj, 5)
        b = template_answers("1p", (1,), (1,), adj, 5)
        assert template_answers("2i", (0, 1), (0, 1), adj, 5) == a & b

    @pytest.mark.parametrize("tag", QUERY_TYPES)
    def test_agrees_with_ast_evaluator(self, tag):
        """Straight-line per-template sets match the generic AST oracle."""
        graph = generate_translation_kg(10, (2, 1, 2), seed=5)
        adj = graph.adjacency("train")
        rng = np.random.default_rng(6)
        from rocone.querylang import template_slots
        n_anchor, n_rel = template_slots(tag)
        node = build_template(tag)
        for _ in range(30):
            anchors = tuple(int(a) for a in rng.integers(0, 10, n_anchor))
            rels = tuple(int(r) for r in rng.integers(0, 3, n_rel))
            assert template_answers(tag, anchors, rels, adj, 10) == \
                symbolic_answers(node, anchors, rels, adj, 10)


class TestGroundQueries:
    @pytest.fixture(scope="class")
    def graph(self):
        spec = PatternSpec("random", n_entities=20, n_pairs=0, holdout=0.25,
                           n_relations=3, n_triples=110)
        return generate_synthetic(spec, seed=8)[0]

    def test_training_queries_have_easy_answers(self, graph):
        ds = ground_queries(graph, ("1p", "2i"), 10, seed=9, eval_split=None)
        for qs in ds.by_type.values():
            for q in qs:
                assert q.easy_answers
                assert not q.hard_answers

    def test_eval_queries_have_hard_answers(self, graph):
        ds = ground_queries(graph, QUERY_TYPES, 5, seed=10, eval_split="test",
                            max_attempts_per_query=200)
        for qs in ds.by_type.values():
            for q in qs:
                assert q.hard_answers

    def test_partitions_match_oracle(self, graph):
        """Easy/hard partitions agree with the brute-force AST evaluator."""
        ds = ground_queries(graph, QUERY_TYPES, 5, seed=11, eval_split="test",
                            max_attempts_per_query=200)
        adj_train = graph.adjacency("train")
        adj_full = graph.adjacency("train", "test")
        for tag, qs in ds.by_type.items():
            node = build_template(tag)
            for q in qs:
                easy = symbolic_answers(node, q.anchors, q.relations,
                                        adj_train, graph.n_entities)
                full = symbolic_answers(node, q.anchors, q.relations,
                                        adj_full, graph.n_entities)
                assert q.easy_answers == frozenset(easy)
                assert q.hard_answers == frozenset(full - easy)

    def test_unsatisfiable_skips_with_warning(self, caplog):
        graph = KnowledgeGraph(4, 1, {"train": ((0, 0, 1),), "test": ()})
        import logging
        with caplog.at_level(logging.WARNING, logger="rocone.data"):
            ds = ground_queries(graph, ("3p",), 5, seed=12, eval_split=None,
                                max_attempts_per_query=5)
        assert len(ds.by_type.get("3p", ())) < 5
        assert any("skipped" in rec.message for rec in caplog.records)

    def test_deterministic(self, graph):
        a = ground_queries(graph, ("2i", "pni"), 8, seed=13, eval_split="test")
        b = ground_queries(graph, ("2i", "pni"), 8, seed=13, eval_split="test")
        assert a.by_type == b.by_type


class TestQueriesFromEdges:
    def test_groups_by_head_relation(self):
        graph = KnowledgeGraph(
            4, 2, {"train": ((0, 0, 1), (0, 0, 2), (1, 1, 3))}
        )
        ds = queries_from_edges(graph)
        qs = {(q.anchors, q.relations): q.easy_answers for q in ds.by_type["1p"]}
        assert qs[((0,), (0,))] == {1, 2}
        assert qs[((1,), (1,))] == {3}
