"""Negative sampling, the margin loss, and the training loop."""

from __future__ import annotations

import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import diffcore as dc
from .data import KnowledgeGraph, QueryDataset
from .diffcore import DiffValue, OptimizerState, ParamStore, adam_step, save_checkpoint
from .errors import ConfigError, DataError, NumericError
from .operators import ConeSet, DCone, VARIANTS, distance_core
from .querylang import GroundedQuery, execute_batch


@dataclass
class TrainConfig:
    """Hyperparameters of one training run."""

    d: int = 64
    batch: int = 128
    negatives: int = 512
    gamma: float = 20.0
    lr: float = 1e-4
    lam: float = 0.02
    epochs: int = 100
    seed: int = 0
    variant: str = "base"
    checkpoint_every: int = 0  # epochs between checkpoints; 0 = only at end

    def __post_init__(self):
        if self.gamma <= 0:
            raise ConfigError(f"margin gamma must be positive, got {self.gamma}")
        if not 0.0 < self.lam < 1.0:
            raise ConfigError(f"lambda must be in (0, 1), got {self.lam}")
        if self.negatives < 1:
            raise ConfigError(f"need at least one negative, got {self.negatives}")
        if self.variant not in VARIANTS:
            raise ConfigError(
                f"unknown variant {self.variant!r}, expected one of {VARIANTS}"
            )

    def as_dict(self) -> dict:
        return {
            "d": self.d, "batch": self.batch, "negatives": self.negatives,
            "gamma": self.gamma, "lr": self.lr, "lam": self.lam,
            "epochs": self.epochs, "seed": self.seed, "variant": self.variant,
        }


def eligible_negatives(query: GroundedQuery, n_entities: int) -> np.ndarray:
    """Sorted ids of every entity that is not a known answer of the query."""
    answers = query.all_answers
    if len(answers) >= n_entities:
        raise DataError(
            f"no eligible negatives: query {query.structure} "
            f"{query.anchors}/{query.relations} answers cover all entities"
        )
    return np.setdiff1d(
        np.arange(n_entities), np.fromiter(answers, dtype=np.int64, count=len(answers))
    )


def negative_sample(
    query: GroundedQuery,
    k: int,
    rng: np.random.Generator,
    n_entities: int,
    eligible: np.ndarray | None = None,
) -> np.ndarray:
    """k entity ids uniform over the non-answers of a query (with
    replacement)."""
    if eligible is None:
        eligible = eligible_negatives(query, n_entities)
    return eligible[rng.integers(0, len(eligible), size=k)]


def _distances_to_ids(
    branches: list[DCone],
    ids: np.ndarray,
    store: ParamStore,
    lam: float,
) -> DiffValue:
    """Distances (B, m) from query embeddings to the listed entity ids.

    When the id matrix is wider than the entity table, distances to all
    entities are computed once and the id columns gathered; the two routes
    give identical values and gradients.
    """
    n_entities = store["entity_axis"].shape[0]
    b, m = ids.shape
    if m > n_entities:
        # One (1, E, d) lookup broadcast across the batch, then a column
        # gather; far cheaper than materializing (B, m, d) duplicates.
        d = store["entity_axis"].shape[1]
        target_ax = dc.reshape(
            dc.take(store["entity_axis"], np.arange(n_entities)),
            (1, n_entities, d),
        )
        all_dist = distance_core(branches, target_ax, lam)
        return dc.take_along_last(all_dist, ids)
    target_ax = dc.take(store["entity_axis"], ids)
    return distance_core(branches, target_ax, lam)


def loss_batch(
    branches: list[DCone],
    positives: np.ndarray,
    negatives: np.ndarray,
    store: ParamStore,
    gamma: float,
    lam: float,
) -> DiffValue:
    """Mean negative-sampling loss of a same-structure batch.

    Per query: -log sigma(gamma - d(positive)) minus the mean over the k
    negatives of log sigma(d(negative) - gamma).
    """
    positives = np.asarray(positives, dtype=np.int64)
    negatives = np.asarray(negatives, dtype=np.int64)
    b = positives.shape[0]
    ids = np.concatenate([positives.reshape(b, 1), negatives], axis=1)
    dist = _distances_to_ids(branches, ids, store, lam)
    pos_d = dc.reshape(dc.take_along_last(dist, np.zeros((b, 1), dtype=np.int64)), (b,))
    neg_d = dc.take_along_last(
        dist, 1 + np.broadcast_to(np.arange(negatives.shape[1]), negatives.shape)
    )
    pos_term = -dc.logsigmoid(gamma - pos_d)
    neg_term = -dc.mean(dc.logsigmoid(neg_d - gamma), axis=-1)
    return dc.mean(pos_term + neg_term, axis=0)


def loss(
    q_embed: ConeSet,
    positive: int,
    negatives,
    gamma: float,
    lam: float,
    params: ParamStore,
) -> DiffValue:
    """Single-query loss over a plain cone-set embedding.

    Gradients flow to the entity table only (the embedding is a constant
    here); training uses ``loss_batch`` on live execution graphs.
    """
    negatives = np.asarray(list(negatives), dtype=np.int64)
    branches = [
        DCone(dc.as_value(c.theta_ax.reshape(1, -1)),
              dc.as_value(c.theta_ap.reshape(1, -1)))
        for c in q_embed.members
    ]
    out = loss_batch(
        branches,
        np.asarray([positive], dtype=np.int64),
        negatives.reshape(1, -1),
        params, gamma, lam,
    )
    if not np.isfinite(out.data).all():
        raise NumericError("non-finite loss value")
    return out


@dataclass
class EpochRecord:
    epoch: int
    mean_loss: float
    wall_ms: float


def loss_log_lines(records: list[EpochRecord], include_wall: bool = True) -> str:
    """Render the per-epoch loss log (epoch, mean loss, wall milliseconds).

    Wall time is inherently nondeterministic, so determinism checks compare
    the log with ``include_wall=False``.
    """
    lines = []
    for rec in records:
        cells = [str(rec.epoch), f"{rec.mean_loss:.12g}"]
        if include_wall:
            cells.append(f"{rec.wall_ms:.3f}")
        lines.append("\t".join(cells))
    return "\n".join(lines) + ("\n" if lines else "")


def train(
    cfg: TrainConfig,
    dataset: QueryDataset,
    graph: KnowledgeGraph,
    store: ParamStore,
    out_dir=None,
) -> tuple[ParamStore, list[EpochRecord], OptimizerState]:
    """Run the optimization loop; deterministic given the seed.

    Mini-batches mix query structures uniformly by instance; each batch is
    grouped by structure for vectorized execution and applies one optimizer
    step.  A NaN loss aborts with the last epoch's parameters retained (and
    written as a checkpoint when ``out_dir`` is given).
    """
    rng = np.random.default_rng(cfg.seed)
    state = OptimizerState(store, cfg.lr)
    queries = dataset.all_queries()
    if not queries and cfg.epochs > 0:
        raise DataError("training dataset is empty")
    answers_per_query = [np.fromiter(sorted(q.all_answers), dtype=np.int64)
                         for q in queries]
    eligible_per_query = [eligible_negatives(q, graph.n_entities) for q in queries]
    out_dir = Path(out_dir) if out_dir is not None else None
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)

    records: list[EpochRecord] = []
    last_good = store.copy_data()
    for epoch in range(cfg.epochs):
        t0 = time.perf_counter()
        order = rng.permutation(len(queries))
        epoch_loss = 0.0
        n_seen = 0
        for start in range(0, len(order), cfg.batch):
            chunk = order[start:start + cfg.batch]
            groups: dict[str, list[int]] = {}
            for qi in chunk:
                groups.setdefault(queries[qi].structure, []).append(int(qi))
            total: DiffValue | None = None
            for tag, idxs in groups.items():
                anchors = np.asarray([queries[i].anchors for i in idxs])
                relations = np.asarray([queries[i].relations for i in idxs])
                branches = execute_batch(
                    tag, anchors, relations, store,
                    variant=cfg.variant, mode="train",
                )
                positives = np.asarray(
                    [answers_per_query[i][rng.integers(len(answers_per_query[i]))]
                     for i in idxs]
                )
                negs = np.stack(
                    [negative_sample(queries[i], cfg.negatives, rng,
                                     graph.n_entities,
                                     eligible=eligible_per_query[i])
                     for i in idxs]
                )
                group_loss = dc.multiply(
                    loss_batch(branches, positives, negs, store, cfg.gamma, cfg.lam),
                    float(len(idxs)),
                )
                total = group_loss if total is None else total + group_loss
            assert total is not None
            batch_loss = dc.multiply(total, 1.0 / len(chunk))
            value = float(batch_loss.data)
            if not np.isfinite(value):
                if out_dir is not None:
                    store.load_data(last_good)
                    save_checkpoint(
                        out_dir / "checkpoint.npz", store, cfg.as_dict()
                    )
                raise NumericError(
                    f"NaN loss at epoch {epoch}; last good checkpoint retained"
                )
            batch_loss.backward()
            adam_step(store, state)
            epoch_loss += value * len(chunk)
            n_seen += len(chunk)
        wall_ms = (time.perf_counter() - t0) * 1000.0
        mean_loss = epoch_loss / max(n_seen, 1)
        records.append(EpochRecord(epoch, mean_loss, wall_ms))
        last_good = store.copy_data()
        if out_dir is not None and cfg.checkpoint_every and \
                (epoch + 1) % cfg.checkpoint_every == 0:
            save_checkpoint(out_dir / "checkpoint.npz", store, cfg.as_dict())
    if out_dir is not None:
        save_checkpoint(out_dir / "checkpoint.npz", store, cfg.as_dict())
        (out_dir / "loss-log.tsv").write_text(loss_log_lines(records))
    return store, records, state
