"""Knowledge-graph and query-dataset loading, synthetic pattern generation,
and query grounding.

On-disk formats (both carry a leading ``#version 1`` line):

* Graph split file: a JSON manifest line ``{"entities": E, "relations": R,
  "split": "train"}`` followed by one ``head<TAB>relation<TAB>tail`` line
  per triple (integer ids).
* Query file: one record per line,
  ``type<TAB>anchors<TAB>relations<TAB>easy<TAB>hard`` with comma-separated
  ids and ``-`` for an empty set.

Grounded answers are computed here with straight-line per-template set
logic; the generic AST evaluator in ``querylang`` stays independent so the
two can cross-check each other.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError, DataError, ParseError
from .querylang import (
    QUERY_TYPES,
    GroundedQuery,
    build_adjacency,
    template_slots,
)

logger = logging.getLogger(__name__)

FORMAT_VERSION = 1
SPLITS = ("train", "valid", "test")

Triple = tuple[int, int, int]


@dataclass(frozen=True)
class KnowledgeGraph:
    """Entity/relation id spaces plus per-split triple views."""

    n_entities: int
    n_relations: int
    splits: dict[str, tuple[Triple, ...]]

    def __post_init__(self):
        for split, triples in self.splits.items():
            if split not in SPLITS:
                raise DataError(f"unknown split {split!r}")
            seen = set()
            for h, r, t in triples:
                if not (0 <= h < self.n_entities and 0 <= t < self.n_entities):
                    raise DataError(
                        f"entity id out of range in {split} triple ({h},{r},{t})"
                    )
                if not 0 <= r < self.n_relations:
                    raise DataError(
                        f"relation id out of range in {split} triple ({h},{r},{t})"
                    )
                if (h, r, t) in seen:
                    raise DataError(f"duplicate triple ({h},{r},{t}) in {split}")
                seen.add((h, r, t))

    def triples(self, *splits: str) -> tuple[Triple, ...]:
        chosen = splits or ("train",)
        out: list[Triple] = []
        for split in chosen:
            out.extend(self.splits.get(split, ()))
        return tuple(out)

    def adjacency(self, *splits: str) -> dict[tuple[int, int], set[int]]:
        return build_adjacency(self.triples(*splits))


@dataclass
class QueryDataset:
    """Grounded queries grouped by structure tag."""

    by_type: dict[str, tuple[GroundedQuery, ...]] = field(default_factory=dict)

    def __len__(self) -> int:
        return sum(len(qs) for qs in self.by_type.values())

    def counts(self) -> dict[str, int]:
        return {tag: len(qs) for tag, qs in self.by_type.items()}

    def all_queries(self) -> list[GroundedQuery]:
        out: list[GroundedQuery] = []
        for tag in QUERY_TYPES:
            out.extend(self.by_type.get(tag, ()))
        return out

    def require_hard_answers(self) -> None:
        for tag, qs in self.by_type.items():
            for q in qs:
                if not q.hard_answers:
                    raise DataError(
                        f"evaluation query {tag} {q.anchors}/{q.relations} "
                        "has no hard answers"
                    )


@dataclass(frozen=True)
class PatternSpec:
    """Recipe for a synthetic relation-pattern graph.

    ``n_pairs`` counts pattern instances (pairs, or chains for the
    composition pattern); ``holdout`` is the fraction of pattern-implied
    edges withheld from training and exposed as hard answers.
    """

    pattern: str
    n_entities: int
    n_pairs: int
    holdout: float
    n_relations: int = 1
    n_triples: int = 0

    PATTERNS = ("symmetric", "anti-symmetric", "inverse-pair",
                "composition-triple", "random")

    def __post_init__(self):
        if self.pattern not in self.PATTERNS:
            raise ConfigError(
                f"unknown pattern {self.pattern!r}, expected one of {self.PATTERNS}"
            )
        if not 0.0 < self.holdout < 1.0:
            raise ConfigError(f"holdout fraction must be in (0, 1), got {self.holdout}")
        if self.n_entities < 3:
            raise ConfigError("need at least 3 entities")
        max_pairs = self.n_entities * (self.n_entities - 1) // 2
        if self.pattern != "random" and self.n_pairs > max_pairs:
            raise ConfigError(
                f"{self.n_pairs} pairs infeasible for {self.n_entities} entities "
                f"(max {max_pairs})"
            )


# ---------------------------------------------------------------------------
# File IO
# ---------------------------------------------------------------------------


def _check_version_line(line: str, path: str) -> None:
    if line.strip() != f"#version {FORMAT_VERSION}":
        raise ParseError(
            f"unsupported format version line {line.strip()!r} "
            f"(expected '#version {FORMAT_VERSION}')",
            path, 1,
        )


def save_graph_split(
    path, triples, n_entities: int, n_relations: int, split: str
) -> None:
    path = Path(path)
    manifest = json.dumps(
        {"entities": n_entities, "relations": n_relations, "split": split},
        sort_keys=True,
    )
    with path.open("w", encoding="utf-8") as fh:
        fh.write(f"#version {FORMAT_VERSION}\n")
        fh.write(manifest + "\n")
        for h, r, t in triples:
            fh.write(f"{h}\t{r}\t{t}\n")


def load_graph_split(path) -> tuple[dict, list[Triple]]:
    path = Path(path)
    if not path.exists():
        raise DataError(f"graph file not found: {path}")
    with path.open("r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise ParseError("empty graph file", str(path), 1)
    _check_version_line(lines[0], str(path))
    if len(lines) < 2:
        raise ParseError("missing manifest line", str(path), 2)
    try:
        manifest = json.loads(lines[1])
    except json.JSONDecodeError as exc:
        raise ParseError(f"bad manifest: {exc}", str(path), 2) from exc
    for key in ("entities", "relations", "split"):
        if key not in manifest:
            raise ParseError(f"manifest missing key {key!r}", str(path), 2)
    triples: list[Triple] = []
    for lineno, line in enumerate(lines[2:], start=3):
        if not line.strip():
            continue
        parts = line.split("\t")
        if len(parts) != 3:
            raise ParseError(
                f"expected 3 tab-separated fields, got {len(parts)}",
                str(path), lineno,
            )
        try:
            h, r, t = (int(p) for p in parts)
        except ValueError as exc:
            raise ParseError(f"non-integer id in {line!r}", str(path), lineno) from exc
        triples.append((h, r, t))
    return manifest, triples


def save_graph(graph: KnowledgeGraph, out_dir) -> None:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    for split, triples in graph.splits.items():
        save_graph_split(
            out_dir / f"{split}.txt", triples,
            graph.n_entities, graph.n_relations, split,
        )


def load_graph(path) -> KnowledgeGraph:
    """Load a dataset directory (train.txt plus optional valid/test.txt)."""
    path = Path(path)
    if not path.is_dir():
        raise DataError(f"dataset directory not found: {path}")
    splits: dict[str, tuple[Triple, ...]] = {}
    counts: tuple[int, int] | None = None
    for split in SPLITS:
        f = path / f"{split}.txt"
        if not f.exists():
            if split == "train":
                raise DataError(f"missing required graph file {f}")
            continue
        manifest, triples = load_graph_split(f)
        if manifest["split"] != split:
            raise DataError(
                f"{f} declares split {manifest['split']!r}, expected {split!r}"
            )
        this = (int(manifest["entities"]), int(manifest["relations"]))
        if counts is not None and this != counts:
            raise DataError(f"entity/relation counts disagree across splits in {path}")
        counts = this
        splits[split] = tuple(triples)
    assert counts is not None
    return KnowledgeGraph(counts[0], counts[1], splits)


def _encode_ids(ids) -> str:
    ids = sorted(ids)
    return ",".join(str(i) for i in ids) if ids else "-"


def _decode_ids(text: str, path: str, lineno: int) -> tuple[int, ...]:
    if text == "-":
        return ()
    try:
        return tuple(int(p) for p in text.split(","))
    except ValueError as exc:
        raise ParseError(f"bad id list {text!r}", path, lineno) from exc


def save_queries(path, dataset: QueryDataset) -> None:
    path = Path(path)
    with path.open("w", encoding="utf-8") as fh:
        fh.write(f"#version {FORMAT_VERSION}\n")
        for tag in QUERY_TYPES:
            for q in dataset.by_type.get(tag, ()):
                fh.write(
                    "\t".join((
                        tag,
                        ",".join(str(i) for i in q.anchors),
                        ",".join(str(i) for i in q.relations),
                        _encode_ids(q.easy_answers),
                        _encode_ids(q.hard_answers),
                    )) + "\n"
                )


def load_queries(path, require_hard: bool = False) -> QueryDataset:
    path = Path(path)
    if not path.exists():
        raise DataError(f"query file not found: {path}")
    with path.open("r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise ParseError("empty query file", str(path), 1)
    _check_version_line(lines[0], str(path))
    by_type: dict[str, list[GroundedQuery]] = {}
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        parts = line.split("\t")
        if len(parts) != 5:
            raise ParseError(
                f"expected 5 tab-separated fields, got {len(parts)}",
                str(path), lineno,
            )
        tag = parts[0]
        if tag not in QUERY_TYPES:
            raise ParseError(f"unknown query type {tag!r}", str(path), lineno)
        anchors = _decode_ids(parts[1], str(path), lineno)
        relations = _decode_ids(parts[2], str(path), lineno)
        easy = frozenset(_decode_ids(parts[3], str(path), lineno))
        hard = frozenset(_decode_ids(parts[4], str(path), lineno))
        try:
            query = GroundedQuery(tag, anchors, relations, easy, hard)
        except DataError as exc:
            raise ParseError(str(exc), str(path), lineno) from exc
        by_type.setdefault(tag, []).append(query)
    dataset = QueryDataset({tag: tuple(qs) for tag, qs in by_type.items()})
    if require_hard:
        dataset.require_hard_answers()
    return dataset


def load_dataset_dir(path) -> tuple[KnowledgeGraph, dict[str, QueryDataset]]:
    """Load a full dataset directory: graph splits plus per-split queries."""
    path = Path(path)
    graph = load_graph(path)
    queries: dict[str, QueryDataset] = {}
    for split in SPLITS:
        f = path / f"{split}-queries.txt"
        if f.exists():
            queries[split] = load_queries(f, require_hard=(split != "train"))
    return graph, queries


def save_dataset_dir(
    out_dir, graph: KnowledgeGraph, queries: dict[str, QueryDataset]
) -> None:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    save_graph(graph, out_dir)
    for split, dataset in queries.items():
        save_queries(out_dir / f"{split}-queries.txt", dataset)


# ---------------------------------------------------------------------------
# Straight-line per-template answers (cross-checked against the AST oracle)
# ---------------------------------------------------------------------------


def _tails(adj, e: int, r: int) -> set[int]:
    return set(adj.get((e, r), ()))


def _expand(adj, sources: set[int], r: int) -> set[int]:
    out: set[int] = set()
    for e in sources:
        out |= _tails(adj, e, r)
    return out


def template_answers(
    tag: str,
    anchors: tuple[int, ...],
    relations: tuple[int, ...],
    adj: dict[tuple[int, int], set[int]],
    n_entities: int,
) -> set[int]:
    """Answer set of one grounded template, written out case by case."""
    a, r = anchors, relations
    if tag == "1p":
        return _tails(adj, a[0], r[0])
    if tag == "2p":
        return _expand(adj, _tails(adj, a[0], r[0]), r[1])
    if tag == "3p":
        return _expand(adj, _expand(adj, _tails(adj, a[0], r[0]), r[1]), r[2])
    if tag == "2i":
        return _tails(adj, a[0], r[0]) & _tails(adj, a[1], r[1])
    if tag == "3i":
        return (_tails(adj, a[0], r[0]) & _tails(adj, a[1], r[1])
                & _tails(adj, a[2], r[2]))
    if tag == "pi":
        two_hop = _expand(adj, _tails(adj, a[0], r[0]), r[1])
        return two_hop & _tails(adj, a[1], r[2])
    if tag == "ip":
        inter = _tails(adj, a[0], r[0]) & _tails(adj, a[1], r[1])
        return _expand(adj, inter, r[2])
    if tag == "2u":
        return _tails(adj, a[0], r[0]) | _tails(adj, a[1], r[1])
    if tag == "up":
        return _expand(adj, _tails(adj, a[0], r[0]) | _tails(adj, a[1], r[1]), r[2])
    if tag == "2in":
        return _tails(adj, a[0], r[0]) - _tails(adj, a[1], r[1])
    if tag == "3in":
        return (_tails(adj, a[0], r[0]) & _tails(adj, a[1], r[1])) \
            - _tails(adj, a[2], r[2])
    if tag == "inp":
        kept = _tails(adj, a[0], r[0]) - _tails(adj, a[1], r[1])
        return _expand(adj, kept, r[2])
    if tag == "pin":
        two_hop = _expand(adj, _tails(adj, a[0], r[0]), r[1])
        return two_hop - _tails(adj, a[1], r[2])
    if tag == "pni":
        two_hop = _expand(adj, _tails(adj, a[0], r[0]), r[1])
        return _tails(adj, a[1], r[2]) - two_hop
    raise ConfigError(f"unknown query type {tag!r}")


# ---------------------------------------------------------------------------
# Synthetic pattern graphs
# ---------------------------------------------------------------------------


def _sample_pairs(rng: np.random.Generator, n_entities: int, n_pairs: int):
    """Distinct unordered pairs, deterministic given the generator state."""
    pairs: set[tuple[int, int]] = set()
    while len(pairs) < n_pairs:
        a, b = rng.choice(n_entities, size=2, replace=False)
        pairs.add((min(int(a), int(b)), max(int(a), int(b))))
    return sorted(pairs)


def _holdout_count(n: int, fraction: float) -> int:
    held = int(round(n * fraction))
    return min(max(held, 1), n - 1) if n > 1 else 0


def generate_synthetic(
    spec: PatternSpec, seed: int
) -> tuple[KnowledgeGraph, QueryDataset]:
    """Build a pattern graph plus its held-out evaluation queries.

    The held-out edges land in the ``test`` split; the returned dataset
    contains the matching single-hop queries (easy answers come from the
    training graph, hard answers are the held-out tails).
    """
    rng = np.random.default_rng(seed)
    train: list[Triple] = []
    heldout: list[Triple] = []

    if spec.pattern == "symmetric":
        pairs = _sample_pairs(rng, spec.n_entities, spec.n_pairs)
        n_held = _holdout_count(len(pairs), spec.holdout)
        held_idx = set(rng.choice(len(pairs), size=n_held, replace=False).tolist())
        for i, (x, y) in enumerate(pairs):
            train.append((x, 0, y))
            (heldout if i in held_idx else train).append((y, 0, x))
        n_relations = 1
    elif spec.pattern == "anti-symmetric":
        pairs = _sample_pairs(rng, spec.n_entities, spec.n_pairs)
        n_held = _holdout_count(len(pairs), spec.holdout)
        held_idx = set(rng.choice(len(pairs), size=n_held, replace=False).tolist())
        for i, (x, y) in enumerate(pairs):
            (heldout if i in held_idx else train).append((x, 0, y))
        n_relations = 1
    elif spec.pattern == "inverse-pair":
        pairs = _sample_pairs(rng, spec.n_entities, spec.n_pairs)
        n_held = _holdout_count(len(pairs), spec.holdout)
        held_idx = set(rng.choice(len(pairs), size=n_held, replace=False).tolist())
        for i, (x, y) in enumerate(pairs):
            train.append((x, 0, y))
            (heldout if i in held_idx else train).append((y, 1, x))
        n_relations = 2
    elif spec.pattern == "composition-triple":
        chains: set[tuple[int, int, int]] = set()
        while len(chains) < spec.n_pairs:
            a, b, c = rng.choice(spec.n_entities, size=3, replace=False)
            chains.add((int(a), int(b), int(c)))
        ordered = sorted(chains)
        n_held = _holdout_count(len(ordered), spec.holdout)
        held_idx = set(rng.choice(len(ordered), size=n_held, replace=False).tolist())
        for i, (a, b, c) in enumerate(ordered):
            train.append((a, 0, b))
            train.append((b, 1, c))
            (heldout if i in held_idx else train).append((a, 2, c))
        n_relations = 3
    else:  # random
        n_relations = max(1, spec.n_relations)
        n_triples = spec.n_triples or spec.n_pairs
        cap = spec.n_entities * spec.n_entities * n_relations
        if n_triples > cap // 2:
            raise ConfigError(
                f"{n_triples} triples infeasible for this graph size (cap {cap // 2})"
            )
        triples: set[Triple] = set()
        while len(triples) < n_triples:
            h = int(rng.integers(spec.n_entities))
            t = int(rng.integers(spec.n_entities))
            r = int(rng.integers(n_relations))
            if h != t:
                triples.add((h, r, t))
        ordered_triples = sorted(triples)
        n_held = _holdout_count(len(ordered_triples), spec.holdout)
        held_idx = set(
            rng.choice(len(ordered_triples), size=n_held, replace=False).tolist()
        )
        for i, triple in enumerate(ordered_triples):
            (heldout if i in held_idx else train).append(triple)

    # Deduplicate (symmetric self-pairs cannot occur; reverse edges may
    # coincide with forward edges only in the random pattern).
    train = sorted(set(train))
    heldout = sorted(set(heldout) - set(train))
    graph = KnowledgeGraph(
        spec.n_entities, n_relations,
        {"train": tuple(train), "test": tuple(heldout)},
    )

    adj_train = graph.adjacency("train")
    by_group: dict[tuple[int, int], set[int]] = {}
    for h, r, t in heldout:
        by_group.setdefault((h, r), set()).add(t)
    queries = []
    for (h, r), hard in sorted(by_group.items()):
        easy = _tails(adj_train, h, r)
        queries.append(
            GroundedQuery("1p", (h,), (r,), frozenset(easy - hard), frozenset(hard))
        )
    return graph, QueryDataset({"1p": tuple(queries)} if queries else {})


def generate_translation_kg(
    n_entities: int,
    offsets_per_relation: tuple[int, ...] = (2, 2, 1, 1),
    seed: int = 0,
) -> KnowledgeGraph:
    """A cyclic-group KG: relation r maps i to i + o (mod n) for each of its
    offsets.

    Every relation is a translation on Z_n, so a rotation model can
    represent the graph exactly; relations with two offsets need an open
    cone (one offset per boundary).  Used by the memorization checks, which
    want a dense graph that is representable by construction.
    """
    rng = np.random.default_rng(seed)
    triples: list[Triple] = []
    for r, n_offsets in enumerate(offsets_per_relation):
        offsets = rng.choice(np.arange(1, n_entities), size=n_offsets, replace=False)
        for i in range(n_entities):
            for o in offsets:
                triples.append((i, r, (i + int(o)) % n_entities))
    return KnowledgeGraph(
        n_entities, len(offsets_per_relation),
        {"train": tuple(sorted(set(triples))), "test": ()},
    )


def queries_from_edges(graph: KnowledgeGraph, split: str = "train") -> QueryDataset:
    """Single-hop training queries: one per (head, relation) group."""
    adj = graph.adjacency(split)
    queries = [
        GroundedQuery("1p", (h,), (r,), frozenset(tails), frozenset())
        for (h, r), tails in sorted(adj.items())
    ]
    return QueryDataset({"1p": tuple(queries)} if queries else {})


# ---------------------------------------------------------------------------
# Query grounding
# ---------------------------------------------------------------------------


def _reverse_adjacency(triples):
    radj: dict[int, list[tuple[int, int]]] = {}
    for h, r, t in triples:
        radj.setdefault(t, []).append((h, r))
    return {t: sorted(set(edges)) for t, edges in radj.items()}


def _walk_template(tag: str):
    """Backward-sampling plan: for each template, the anchor is reached from
    a target by the listed relation-slot chain (innermost hop last)."""
    plans = {
        "1p": [((0,), 0)],
        "2p": [((1, 0), 0)],
        "3p": [((2, 1, 0), 0)],
        "2i": [((0,), 0), ((1,), 1)],
        "3i": [((0,), 0), ((1,), 1), ((2,), 2)],
        "pi": [((1, 0), 0), ((2,), 1)],
        "ip": [((2,), None), ((0,), 0), ((1,), 1)],
        "2u": [((0,), 0), ((1,), 1)],
        "up": [((2,), None), ((0,), 0), ((1,), 1)],
        "2in": [((0,), 0), ((1,), 1)],
        "3in": [((0,), 0), ((1,), 1), ((2,), 2)],
        "inp": [((2,), None), ((0,), 0), ((1,), 1)],
        "pin": [((1, 0), 0), ((2,), 1)],
        "pni": [((1, 0), 0), ((2,), 1)],
    }
    return plans[tag]


def _sample_grounding(
    tag: str,
    rng: np.random.Generator,
    radj: dict[int, list[tuple[int, int]]],
    n_entities: int,
) -> tuple[tuple[int, ...], tuple[int, ...]] | None:
    """One random template instantiation, or None if a walk dead-ends.

    Walks backward from a random target entity; negated branches walk from
    an independently chosen target so they stay satisfiable without forcing
    the main target into them.
    """
    n_anchor, n_rel = template_slots(tag)
    anchors = [-1] * n_anchor
    relations = [-1] * n_rel

    def step_back(entity: int) -> tuple[int, int] | None:
        edges = radj.get(entity)
        if not edges:
            return None
        return edges[int(rng.integers(len(edges)))]

    def walk_chain(rel_slots: tuple[int, ...], anchor_slot: int, target: int) -> bool:
        node = target
        for slot in rel_slots:
            back = step_back(node)
            if back is None:
                return False
            node, relations[slot] = back
        anchors[anchor_slot] = node
        return True

    target = int(rng.integers(n_entities))
    plan = _walk_template(tag)
    if plan[0][1] is None:
        # Structures with a projection above the intersection/union: first
        # hop back through the outer relation, then ground the branches.
        back = step_back(target)
        if back is None:
            return None
        target, relations[plan[0][0][0]] = back
        plan = plan[1:]
    negated_branches = {
        "2in": {1}, "3in": {2}, "inp": {1}, "pin": {1}, "pni": {0},
    }.get(tag, set())
    union_branches = {"2u", "up"}
    for branch_idx, (rel_slots, anchor_slot) in enumerate(plan):
        branch_target = target
        if branch_idx in negated_branches or (
            tag in union_branches and branch_idx > 0
        ):
            branch_target = int(rng.integers(n_entities))
        if not walk_chain(rel_slots, anchor_slot, branch_target):
            return None
    return tuple(anchors), tuple(relations)


def ground_queries(
    graph: KnowledgeGraph,
    types,
    n_per_type: int,
    seed: int,
    eval_split: str | None = "test",
    max_attempts_per_query: int = 100,
) -> QueryDataset:
    """Randomly instantiate templates with non-empty answer sets.

    Easy answers come from train-graph traversal; hard answers from the
    train+eval graph minus the easy set.  With ``eval_split=None`` the
    queries are training queries (empty hard sets, non-empty easy sets).
    Unsatisfiable draws are skipped after bounded retries, with a warning
    reporting the per-type shortfall.
    """
    adj_train = graph.adjacency("train")
    if eval_split:
        if eval_split not in graph.splits:
            raise DataError(f"graph has no {eval_split!r} split")
        full_triples = graph.triples("train", eval_split)
    else:
        full_triples = graph.triples("train")
    adj_full = build_adjacency(full_triples)
    radj = _reverse_adjacency(full_triples)
    rng = np.random.default_rng(seed)

    by_type: dict[str, tuple[GroundedQuery, ...]] = {}
    for tag in types:
        if tag not in QUERY_TYPES:
            raise ConfigError(f"unknown query type {tag!r}")
        queries: list[GroundedQuery] = []
        seen: set[tuple] = set()
        attempts_left = n_per_type * max_attempts_per_query
        while len(queries) < n_per_type and attempts_left > 0:
            attempts_left -= 1
            grounding = _sample_grounding(tag, rng, radj, graph.n_entities)
            if grounding is None or grounding in seen:
                continue
            anchors, relations = grounding
            easy = template_answers(tag, anchors, relations, adj_train,
                                    graph.n_entities)
            full = template_answers(tag, anchors, relations, adj_full,
                                    graph.n_entities)
            hard = full - easy
            if eval_split and not hard:
                continue
            if not eval_split and not easy:
                continue
            seen.add(grounding)
            queries.append(
                GroundedQuery(tag, anchors, relations,
                              frozenset(easy), frozenset(hard))
            )
        if len(queries) < n_per_type:
            logger.warning(
                "grounding %s: only %d of %d instances found "
                "(%d skipped after bounded retries)",
                tag, len(queries), n_per_type, n_per_type - len(queries),
            )
        if queries:
            by_type[tag] = tuple(queries)
    return QueryDataset(by_type)
