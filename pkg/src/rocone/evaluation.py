"""Filtered ranking and mean-reciprocal-rank reporting per query type."""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .data import QueryDataset
from .diffcore import ParamStore
from .errors import ContractViolationError
from .operators import ConeSet
from .querylang import (
    EPFO_TYPES,
    NEGATION_TYPES,
    QUERY_TYPES,
    GroundedQuery,
    execute_batch,
)


def _batched_distances(
    branches_ax: list[np.ndarray],
    branches_ap: list[np.ndarray],
    entity_axis: np.ndarray,
    lam: float,
) -> np.ndarray:
    """Plain-numpy distances, queries (B, d) against all entities (E, d).

    Mirrors the differentiable distance exactly; the pairing is covered by
    an equivalence test.
    """
    phis = np.asarray(entity_axis, dtype=np.float64)
    t_re, t_im = np.cos(phis), np.sin(phis)  # (E, d)
    best = None
    for ax, ap in zip(branches_ax, branches_ap):
        ax = ax[:, None, :]  # (B, 1, d)
        half = 0.5 * ap[:, None, :]
        theta_u, theta_l = ax + half, ax - half
        u_re, u_im = np.cos(theta_u), np.sin(theta_u)
        l_re, l_im = np.cos(theta_l), np.sin(theta_l)
        c_re, c_im = np.cos(ax), np.sin(ax)
        d_up = np.sum(np.abs(u_re - t_re) + np.abs(u_im - t_im), axis=-1)
        d_lo = np.sum(np.abs(l_re - t_re) + np.abs(l_im - t_im), axis=-1)
        d_out = np.minimum(d_up, d_lo)
        d_ax = np.sum(np.abs(c_re - t_re) + np.abs(c_im - t_im), axis=-1)
        d_cap = np.sum(np.abs(u_re - c_re) + np.abs(u_im - c_im), axis=-1)
        d_in = np.minimum(d_ax, d_cap)
        d_com = d_out + lam * d_in
        best = d_com if best is None else np.minimum(best, d_com)
    return best


def rank_from_distances(distances: np.ndarray, target: int, filter_out) -> int:
    """Filtered rank of ``target`` among entity distances.

    Competitors in ``filter_out`` are ignored; ties count as ranked ahead of
    the target (pessimistic).  Any strictly monotone transform of the
    distances leaves the result unchanged.
    """
    distances = np.asarray(distances, dtype=np.float64)
    if target in filter_out:
        raise ContractViolationError("target must not be filtered out")
    mask = np.ones(distances.shape[0], dtype=bool)
    for e in filter_out:
        mask[e] = False
    mask[target] = False
    return 1 + int(np.count_nonzero(distances[mask] <= distances[target]))


def rank_entity(
    q_embed: ConeSet,
    target: int,
    filter_out,
    params: ParamStore,
    lam: float,
) -> int:
    """Filtered rank of an entity under a plain cone-set embedding."""
    distances = _batched_distances(
        [c.theta_ax.reshape(1, -1) for c in q_embed.members],
        [c.theta_ap.reshape(1, -1) for c in q_embed.members],
        params["entity_axis"].data,
        lam,
    )[0]
    return rank_from_distances(distances, target, filter_out)


def mrr(ranks) -> float:
    """Mean reciprocal rank of a sequence of positive integer ranks."""
    ranks = list(ranks)
    if not ranks:
        raise ContractViolationError("mrr of an empty rank list")
    return float(np.mean([1.0 / r for r in ranks]))


@dataclass
class EvalReport:
    """Per-type MRR table plus positive-query counts.

    Reciprocal ranks are averaged over each query's hard answers first,
    then over queries of the type (documented in the report header).
    """

    per_type: dict[str, tuple[float, int]]

    @property
    def epfo_average(self) -> float | None:
        vals = [m for t, (m, _) in self.per_type.items() if t in EPFO_TYPES]
        return float(np.mean(vals)) if vals else None

    @property
    def negation_average(self) -> float | None:
        vals = [m for t, (m, _) in self.per_type.items() if t in NEGATION_TYPES]
        return float(np.mean(vals)) if vals else None

    def to_tsv(self) -> str:
        lines = [
            "# MRR per query type; reciprocal ranks averaged per query "
            "over hard answers, then per type",
            "type\tmrr\tcount",
        ]
        for tag in QUERY_TYPES:
            if tag in self.per_type:
                m, n = self.per_type[tag]
                lines.append(f"{tag}\t{m:.6f}\t{n}")
        if self.epfo_average is not None:
            lines.append(f"epfo_avg\t{self.epfo_average:.6f}\t-")
        if self.negation_average is not None:
            lines.append(f"negation_avg\t{self.negation_average:.6f}\t-")
        return "\n".join(lines) + "\n"

    def to_json(self) -> str:
        doc = {
            "per_type": {
                tag: {"mrr": round(m, 10), "count": n}
                for tag, (m, n) in sorted(self.per_type.items())
            },
            "epfo_average": self.epfo_average,
            "negation_average": self.negation_average,
        }
        return json.dumps(doc, sort_keys=True, indent=2) + "\n"


def query_reciprocal_rank(
    query: GroundedQuery,
    distances: np.ndarray,
) -> float:
    """Mean reciprocal rank over one query's hard answers, each ranked with
    every other known answer filtered out."""
    known = query.easy_answers | query.hard_answers
    rrs = []
    for answer in sorted(query.hard_answers):
        rank = rank_from_distances(distances, answer, known - {answer})
        rrs.append(1.0 / rank)
    return float(np.mean(rrs))


def evaluate(
    store: ParamStore,
    dataset: QueryDataset,
    lam: float,
    variant: str = "base",
) -> EvalReport:
    """Filtered MRR of every hard answer in the dataset, per query type."""
    entity_axis = store["entity_axis"].data
    per_type: dict[str, tuple[float, int]] = {}
    for tag in QUERY_TYPES:
        queries = [q for q in dataset.by_type.get(tag, ()) if q.hard_answers]
        if not queries:
            continue
        anchors = np.asarray([q.anchors for q in queries])
        relations = np.asarray([q.relations for q in queries])
        branches = execute_batch(
            tag, anchors, relations, store, variant=variant, mode="infer"
        )
        distances = _batched_distances(
            [b.ax.data for b in branches],
            [b.ap.data for b in branches],
            entity_axis,
            lam,
        )
        rrs = [
            query_reciprocal_rank(q, distances[i]) for i, q in enumerate(queries)
        ]
        per_type[tag] = (float(np.mean(rrs)), len(queries))
    return EvalReport(per_type)


def training_view(dataset: QueryDataset) -> QueryDataset:
    """Re-cast training queries for memorization scoring: every known
    answer becomes a ranked (hard) target."""
    by_type = {}
    for tag, queries in dataset.by_type.items():
        by_type[tag] = tuple(
            GroundedQuery(q.structure, q.anchors, q.relations,
                          frozenset(), q.easy_answers | q.hard_answers)
            for q in queries
        )
    return QueryDataset(by_type)


def aggregate_reports(reports: list[EvalReport]) -> dict[str, tuple[float, float, int]]:
    """Mean and standard deviation of per-type MRR across seeds."""
    tags = sorted({t for r in reports for t in r.per_type})
    out: dict[str, tuple[float, float, int]] = {}
    for tag in tags:
        vals = [r.per_type[tag][0] for r in reports if tag in r.per_type]
        counts = [r.per_type[tag][1] for r in reports if tag in r.per_type]
        out[tag] = (float(np.mean(vals)), float(np.std(vals)), counts[0])
    return out
