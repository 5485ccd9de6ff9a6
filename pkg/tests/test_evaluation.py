"""Filtered ranking, MRR, and report assembly."""

import numpy as np
import pytest

from rocone.data import QueryDataset, generate_translation_kg, queries_from_edges
from rocone.errors import ContractViolationError
from rocone.evaluation import (
    EvalReport,
    _batched_distances,
    aggregate_reports,
    evaluate,
    mrr,
    rank_entity,
    rank_from_distances,
    training_view,
)
from rocone.geometry import PI, ConeBatch
from rocone.operators import ConeSet, init_param_store
from rocone.querylang import GroundedQuery
from rocone.training import TrainConfig, train
from rocone import diffcore as dc
from rocone.operators import DCone, distance_core


class TestRankFromDistances:
    def test_strictly_closest_is_rank_one(self):
        assert rank_from_distances(np.array([0.5, 0.1, 0.9]), 1, set()) == 1

    def test_all_competitors_filtered(self):
        assert rank_from_distances(np.array([0.5, 0.1, 0.9]), 2, {0, 1}) == 1

    def test_counting_example(self):
        """Competitors {0.1, 0.2, 0.3, 0.4} vs target 0.25: two are closer."""
        d = np.array([0.1, 0.2, 0.3, 0.4, 0.25])
        assert rank_from_distances(d, 4, set()) == 3

    def test_ties_rank_worse(self):
        d = np.array([0.25, 0.4, 0.25])
        assert rank_from_distances(d, 0, set()) == 2

    def test_filtered_target_rejected(self):
        with pytest.raises(ContractViolationError):
            rank_from_distances(np.array([0.1, 0.2]), 0, {0})

    def test_monotone_transform_invariance(self):
        rng = np.random.default_rng(0)
        d = rng.uniform(0, 5, 30)
        filt = {3, 7}
        for target in (0, 11, 29):
            base = rank_from_distances(d, target, filt)
            assert rank_from_distances(3.0 * d + 1.0, target, filt) == base


class TestMrr:
    def test_single_best(self):
        assert mrr([1]) == 1.0

    def test_arithmetic(self):
        assert mrr([1, 2, 4]) == pytest.approx((1 + 0.5 + 0.25) / 3.0)

    def test_worst_case(self):
        assert mrr([50] * 7) == pytest.approx(1.0 / 50.0)

    def test_empty_rejected(self):
        with pytest.raises(ContractViolationError):
            mrr([])


class TestDistanceEquivalence:
    def test_plain_matches_differentiable(self):
        """The evaluation kernel mirrors the training-path distance."""
        rng = np.random.default_rng(1)
        d = 5
        members = [
            ConeBatch(rng.uniform(-PI, PI, d), rng.uniform(0, 2 * PI, d))
            for _ in range(2)
        ]
        entity_axis = rng.uniform(-PI, PI, size=(7, d))
        plain = _batched_distances(
            [c.theta_ax.reshape(1, -1) for c in members],
            [c.theta_ap.reshape(1, -1) for c in members],
            entity_axis, 0.3,
        )
        diff = distance_core(
            [DCone(dc.as_value(c.theta_ax.reshape(1, -1)),
                   dc.as_value(c.theta_ap.reshape(1, -1))) for c in members],
            dc.as_value(entity_axis.reshape(1, 7, d)),
            0.3,
        )
        np.testing.assert_allclose(plain, diff.data, atol=1e-12)


class TestRankEntity:
    def test_uses_filtered_protocol(self):
        rng = np.random.default_rng(2)
        store = init_param_store(6, 1, 4, rng)
        q_embed = ConeSet([ConeBatch.point(store["entity_axis"].data[3])])
        # entity 3 sits exactly on the cone: rank 1 unfiltered
        assert rank_entity(q_embed, 3, set(), store, 0.2) == 1


class TestEvaluate:
    @staticmethod
    def _trained(seed=3, epochs=200):
        graph = generate_translation_kg(10, (1, 1), seed=seed)
        dataset = queries_from_edges(graph)
        cfg = TrainConfig(d=16, batch=16, negatives=8, gamma=3.0, lr=1e-2,
                          lam=0.1, epochs=epochs, seed=seed)
        store = init_param_store(10, 2, 16, np.random.default_rng(seed))
        train(cfg, dataset, graph, store)
        return store, dataset

    def test_single_query_rank_one(self):
        rng = np.random.default_rng(4)
        store = init_param_store(5, 1, 4, rng)
        target_axis = store["entity_axis"].data[2]
        # plant the query exactly on entity 2
        store["entity_axis"].data[0] = target_axis + 0.5
        store["relation_raw_ax"].data[0] = 0.5 * 0 - 0.5  # rotate 0 -> near 2
        store["relation_raw_ax"].data[0] = target_axis - store["entity_axis"].data[0]
        store["relation_raw_ap"].data[0] = -1e9
        ds = QueryDataset({
            "1p": (GroundedQuery("1p", (0,), (0,), frozenset(), frozenset({2})),),
        })
        report = evaluate(store, ds, 0.2)
        assert report.per_type["1p"] == (1.0, 1)

    def test_memorized_graph_scores_high(self):
        store, dataset = self._trained()
        report = evaluate(store, training_view(dataset), 0.1)
        assert report.per_type["1p"][0] >= 0.95

    def test_deterministic(self):
        store, dataset = self._trained(epochs=5)
        a = evaluate(store, training_view(dataset), 0.1)
        b = evaluate(store, training_view(dataset), 0.1)
        assert a.to_tsv() == b.to_tsv()
        assert a.to_json() == b.to_json()

    def test_report_layout(self):
        report = EvalReport({"1p": (0.5, 10), "2u": (0.25, 4), "2in": (0.125, 8)})
        tsv = report.to_tsv()
        assert "1p\t0.500000\t10" in tsv
        assert "epfo_avg" in tsv and "negation_avg" in tsv
        assert report.epfo_average == pytest.approx(0.375)
        assert report.negation_average == pytest.approx(0.125)

    def test_aggregate_over_seeds(self):
        a = EvalReport({"1p": (0.5, 10)})
        b = EvalReport({"1p": (0.7, 10)})
        agg = aggregate_reports([a, b])
        mean, std, count = agg["1p"]
        assert mean == pytest.approx(0.6)
        assert std == pytest.approx(0.1)
        assert count == 10


class TestTrainingView:
    def test_answers_become_hard(self):
        ds = QueryDataset({
            "1p": (GroundedQuery("1p", (0,), (0,), frozenset({1, 2}),
                                 frozenset({3})),),
        })
        view = training_view(ds)
        q = view.by_type["1p"][0]
        assert q.easy_answers == frozenset()
        assert q.hard_answers == {1, 2, 3}
