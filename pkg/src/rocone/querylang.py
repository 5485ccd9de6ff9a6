"""First-order query structures, DNF rewriting, and the embedding executor.

Queries are DAG trees built from five node kinds: anchors (constant
entities), relation projections, intersections, unions, and negations.
Only the 14 fixed benchmark structures are supported; anchors and relations
are referenced by template slot so one template serves every grounding.

Tag naming: ``p`` projection hop, ``i`` intersection, ``u`` union, ``n``
negation; e.g. ``2in`` intersects one positive and one negated branch.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Union as TypingUnion

import numpy as np

from . import diffcore as dc
from . import operators as ops
from .errors import ConfigError, ContractViolationError, DataError
from .geometry import ConeBatch
from .operators import (
    ConeSet,
    DCone,
    INTERSECTION_PARAM_NAMES,
    NEURAL_PARAM_NAMES,
)

QUERY_TYPES = (
    "1p", "2p", "3p", "2i", "3i", "pi", "ip", "2u", "up",
    "2in", "3in", "inp", "pin", "pni",
)
EPFO_TYPES = ("1p", "2p", "3p", "2i", "3i", "pi", "ip", "2u", "up")
NEGATION_TYPES = ("2in", "3in", "inp", "pin", "pni")
# Structures seen during training; the rest are evaluated zero-shot.
TRAIN_TYPES = ("1p", "2p", "3p", "2i", "3i", "2in", "3in", "inp", "pin", "pni")


@dataclass(frozen=True)
class Anchor:
    slot: int


@dataclass(frozen=True)
class Projection:
    child: "QueryNode"
    slot: int


@dataclass(frozen=True)
class Intersection:
    children: tuple["QueryNode", ...]


@dataclass(frozen=True)
class Union:
    children: tuple["QueryNode", ...]


@dataclass(frozen=True)
class Negation:
    child: "QueryNode"


QueryNode = TypingUnion[Anchor, Projection, Intersection, Union, Negation]


def _p(child, slot):
    return Projection(child, slot)


_TEMPLATES: dict[str, QueryNode] = {
    "1p": _p(Anchor(0), 0),
    "2p": _p(_p(Anchor(0), 0), 1),
    "3p": _p(_p(_p(Anchor(0), 0), 1), 2),
    "2i": Intersection((_p(Anchor(0), 0), _p(Anchor(1), 1))),
    "3i": Intersection((_p(Anchor(0), 0), _p(Anchor(1), 1), _p(Anchor(2), 2))),
    "pi": Intersection((_p(_p(Anchor(0), 0), 1), _p(Anchor(1), 2))),
    "ip": _p(Intersection((_p(Anchor(0), 0), _p(Anchor(1), 1))), 2),
    "2u": Union((_p(Anchor(0), 0), _p(Anchor(1), 1))),
    "up": _p(Union((_p(Anchor(0), 0), _p(Anchor(1), 1))), 2),
    "2in": Intersection((_p(Anchor(0), 0), Negation(_p(Anchor(1), 1)))),
    "3in": Intersection(
        (_p(Anchor(0), 0), _p(Anchor(1), 1), Negation(_p(Anchor(2), 2)))
    ),
    "inp": _p(Intersection((_p(Anchor(0), 0), Negation(_p(Anchor(1), 1)))), 2),
    "pin": Intersection((_p(_p(Anchor(0), 0), 1), Negation(_p(Anchor(1), 2)))),
    "pni": Intersection((Negation(_p(_p(Anchor(0), 0), 1)), _p(Anchor(1), 2))),
}


def build_template(tag: str) -> QueryNode:
    """Canonical AST for one of the 14 benchmark structures."""
    if tag not in _TEMPLATES:
        raise ConfigError(f"unknown query type {tag!r}, expected one of {QUERY_TYPES}")
    return _TEMPLATES[tag]


def _count_slots(node: QueryNode) -> tuple[int, int]:
    if isinstance(node, Anchor):
        return node.slot + 1, 0
    if isinstance(node, Projection):
        a, r = _count_slots(node.child)
        return a, max(r, node.slot + 1)
    if isinstance(node, Negation):
        return _count_slots(node.child)
    a = r = 0
    for child in node.children:
        ca, cr = _count_slots(child)
        a, r = max(a, ca), max(r, cr)
    return a, r


def template_slots(tag: str) -> tuple[int, int]:
    """(anchor count, relation count) of a template."""
    return _count_slots(build_template(tag))


def validate_structure(node: QueryNode) -> None:
    """Check the invariant that negation appears only directly under an
    intersection (true of all 14 templates)."""

    def walk(n: QueryNode, parent_is_intersection: bool) -> None:
        if isinstance(n, Negation):
            if not parent_is_intersection:
                raise ContractViolationError(
                    "negation is only supported directly under an intersection"
                )
            walk(n.child, False)
        elif isinstance(n, Projection):
            walk(n.child, False)
        elif isinstance(n, (Intersection, Union)):
            for child in n.children:
                walk(child, isinstance(n, Intersection))

    walk(node, False)


def dnf_branches(node: QueryNode) -> list[QueryNode]:
    """Union-free conjunctive branches equivalent to ``node``."""
    if isinstance(node, Anchor):
        return [node]
    if isinstance(node, Projection):
        return [Projection(b, node.slot) for b in dnf_branches(node.child)]
    if isinstance(node, Negation):
        inner = dnf_branches(node.child)
        if len(inner) > 1:
            raise ConfigError(
                "unsupported structure: negation above a union is not among "
                "the 14 query types"
            )
        return [Negation(inner[0])]
    if isinstance(node, Intersection):
        parts = [dnf_branches(c) for c in node.children]
        return [Intersection(tuple(combo)) for combo in itertools.product(*parts)]
    if isinstance(node, Union):
        out: list[QueryNode] = []
        for child in node.children:
            out.extend(dnf_branches(child))
        return out
    raise ContractViolationError(f"not a query node: {node!r}")


def to_dnf(node: QueryNode) -> QueryNode:
    """Lift all unions to the root; the result is a union of union-free
    branches (or a single union-free tree)."""
    branches = dnf_branches(node)
    if len(branches) == 1:
        return branches[0]
    return Union(tuple(branches))


@dataclass(frozen=True)
class GroundedQuery:
    """A template instantiated with entity and relation ids.

    ``easy_answers`` are reachable in the training graph; ``hard_answers``
    require edges beyond it (the ranked targets in filtered evaluation).
    """

    structure: str
    anchors: tuple[int, ...]
    relations: tuple[int, ...]
    easy_answers: frozenset[int] = field(default_factory=frozenset)
    hard_answers: frozenset[int] = field(default_factory=frozenset)

    def __post_init__(self):
        n_anchor, n_rel = template_slots(self.structure)
        if len(self.anchors) != n_anchor or len(self.relations) != n_rel:
            raise DataError(
                f"{self.structure} query expects {n_anchor} anchors and "
                f"{n_rel} relations, got {len(self.anchors)}/{len(self.relations)}"
            )
        if self.easy_answers & self.hard_answers:
            raise DataError(
                f"easy and hard answers overlap in {self.structure} query "
                f"{self.anchors}/{self.relations}"
            )

    @property
    def all_answers(self) -> frozenset[int]:
        return self.easy_answers | self.hard_answers


# ---------------------------------------------------------------------------
# Symbolic (set-semantics) evaluation: the brute-force oracle
# ---------------------------------------------------------------------------


def build_adjacency(triples) -> dict[tuple[int, int], set[int]]:
    adj: dict[tuple[int, int], set[int]] = {}
    for h, r, t in triples:
        adj.setdefault((h, r), set()).add(t)
    return adj


def symbolic_answers(
    node: QueryNode,
    anchors: tuple[int, ...],
    relations: tuple[int, ...],
    adjacency: dict[tuple[int, int], set[int]],
    n_entities: int,
) -> set[int]:
    """Exact answer set of a query under graph-traversal semantics.

    Negation complements within the full entity set.
    """
    if isinstance(node, Anchor):
        return {anchors[node.slot]}
    if isinstance(node, Projection):
        reached: set[int] = set()
        rel = relations[node.slot]
        for e in symbolic_answers(node.child, anchors, relations, adjacency, n_entities):
            reached |= adjacency.get((e, rel), set())
        return reached
    if isinstance(node, Intersection):
        result: set[int] | None = None
        for child in node.children:
            s = symbolic_answers(child, anchors, relations, adjacency, n_entities)
            result = s if result is None else result & s
        return result if result is not None else set()
    if isinstance(node, Union):
        result = set()
        for child in node.children:
            result |= symbolic_answers(child, anchors, relations, adjacency, n_entities)
        return result
    if isinstance(node, Negation):
        inner = symbolic_answers(node.child, anchors, relations, adjacency, n_entities)
        return set(range(n_entities)) - inner
    raise ContractViolationError(f"not a query node: {node!r}")


# ---------------------------------------------------------------------------
# Differentiable execution
# ---------------------------------------------------------------------------


def _variant_extras(
    store: dc.ParamStore, variant: str, rel_ids: np.ndarray
) -> dict[str, dc.DiffValue]:
    if variant == "se":
        b = rel_ids.shape[0]
        return {
            "se_scale": dc.reshape(dc.take(store["se_scale"], rel_ids), (b, 1)),
            "se_shift": dc.reshape(dc.take(store["se_shift"], rel_ids), (b, 1)),
        }
    if variant == "neural":
        return {name: store[name] for name in NEURAL_PARAM_NAMES}
    return {}


def execute_batch(
    structure: str,
    anchors: np.ndarray,
    relations: np.ndarray,
    store: dc.ParamStore,
    variant: str = "base",
    mode: str = "train",
) -> list[DCone]:
    """Embed a batch of same-structure queries.

    ``anchors`` is (B, n_anchor) and ``relations`` (B, n_rel); returns the
    DNF branches, each a (B, d) cone.  Evaluation runs bottom-up from the
    anchor constants to the target variable; the union, if any, stays at
    the root as the list of branches.
    """
    anchors = np.atleast_2d(np.asarray(anchors, dtype=np.int64))
    relations = np.atleast_2d(np.asarray(relations, dtype=np.int64))
    n_anchor, n_rel = template_slots(structure)
    if anchors.shape[1] != n_anchor or relations.shape[1] != n_rel:
        raise DataError(
            f"{structure} batch expects {n_anchor} anchor and {n_rel} relation "
            f"columns, got {anchors.shape[1]}/{relations.shape[1]}"
        )
    n_entities = store["entity_axis"].shape[0]
    n_relations = store["relation_raw_ax"].shape[0]
    if anchors.size and (anchors.min() < 0 or anchors.max() >= n_entities):
        raise DataError(f"entity id out of range in {structure} query batch")
    if relations.size and (relations.min() < 0 or relations.max() >= n_relations):
        raise DataError(f"relation id out of range in {structure} query batch")

    weights = {name: store[name] for name in INTERSECTION_PARAM_NAMES}

    def exec_node(node: QueryNode) -> DCone:
        if isinstance(node, Anchor):
            return ops.entity_cone(store, anchors[:, node.slot])
        if isinstance(node, Projection):
            cone = exec_node(node.child)
            rel_ids = relations[:, node.slot]
            rel_ax, rel_ap = ops.relation_views(store, rel_ids)
            extras = _variant_extras(store, variant, rel_ids)
            return ops.project_core(cone, rel_ax, rel_ap, variant, extras)
        if isinstance(node, Intersection):
            parts = []
            for child in node.children:
                if isinstance(child, Negation):
                    parts.append(ops.negate_core(exec_node(child.child)))
                else:
                    parts.append(exec_node(child))
            return ops.intersect_core(parts, weights, mode=mode)
        raise ContractViolationError(
            f"cannot execute node {type(node).__name__} outside DNF position"
        )

    root = to_dnf(build_template(structure))
    validate_structure(root)
    branches = root.children if isinstance(root, Union) else (root,)
    return [exec_node(branch) for branch in branches]


def execute(
    query: GroundedQuery,
    store: dc.ParamStore,
    variant: str = "base",
) -> ConeSet:
    """Embed one grounded query into a canonical cone set."""
    branches = execute_batch(
        query.structure,
        np.asarray([query.anchors]),
        np.asarray([query.relations]),
        store,
        variant=variant,
        mode="infer",
    )
    return ConeSet(
        [ConeBatch(b.ax.data.reshape(-1), b.ap.data.reshape(-1)) for b in branches]
    )
