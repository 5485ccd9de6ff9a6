"""Logical operators over cones and the query-answer distance functions.

All operators are written once against the ``diffcore`` DAG and exposed in
two forms: the batched differentiable core used by the executor and the
training loop, and plain ``ConeBatch`` wrappers matching the geometry types.

Projection variants:

* ``base``   - counterclockwise rotation: axis += rotation angle, aperture
               += aperture delta, clamped to [0, 2pi].
* ``trunc``  - same, but the aperture is truncated at pi.
* ``se``     - rotation on the axis only; the aperture is squashed through a
               per-relation sigmoid (shrink/expand) instead of rotated.
* ``neural`` - no rotation: an MLP maps the summed (cone, relation) angles to
               the output cone; the no-pattern ablation baseline.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from . import diffcore as dc
from .diffcore import DiffValue, ParamStore
from .errors import ConfigError, ContractViolationError, DegenerateInputError
from .geometry import (
    PI,
    TWO_PI,
    ConeBatch,
    RelationRotation,
    UnitComplexVec,
    flip_axis,
    wrap_angle,
)

VARIANTS = ("base", "trunc", "se", "neural")

# Sigmoid argument giving an initial relation aperture of ~0.1 radians.
_RAW_AP_INIT = float(np.log((0.1 / TWO_PI) / (1.0 - 0.1 / TWO_PI)))


class DCone(NamedTuple):
    """Differentiable cone: axis and aperture arrays of shape (batch, d)."""

    ax: DiffValue
    ap: DiffValue


@dataclass(frozen=True)
class MLPSpec:
    """Layer widths of the learned intersection components.

    The attention network maps concatenated lower/upper boundary angles
    (2d) through a hidden layer of width d to per-dimension logits (d); it
    is bias-free because the downstream softmax ignores input-uniform logit
    shifts.  The cardinality network is a DeepSets pair: inner 2d -> d,
    outer d -> d, with biases.  Hidden activations are rectified-linear.
    """

    d: int
    activation: str = "relu"

    @property
    def attention_widths(self) -> tuple[int, int, int]:
        return (2 * self.d, self.d, self.d)

    @property
    def deepsets_inner_widths(self) -> tuple[int, int]:
        return (2 * self.d, self.d)

    @property
    def deepsets_outer_widths(self) -> tuple[int, int]:
        return (self.d, self.d)


@dataclass(frozen=True)
class ConeSet:
    """Disjunction-normal-form query embedding: one cone per branch."""

    members: tuple[ConeBatch, ...]

    def __init__(self, members: Sequence[ConeBatch]):
        members = tuple(members)
        if not members:
            raise ContractViolationError("ConeSet must be non-empty")
        object.__setattr__(self, "members", members)

    def __len__(self) -> int:
        return len(self.members)


def _uniform_linear(rng: np.random.Generator, fan_in: int, shape) -> np.ndarray:
    bound = 1.0 / np.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=shape)


INTERSECTION_PARAM_NAMES = (
    "attn_w1", "attn_w2",
    "ds_inner_w", "ds_inner_b", "ds_outer_w", "ds_outer_b",
)

NEURAL_PARAM_NAMES = (
    "proj_w1", "proj_b1",
    "proj_w_ax", "proj_b_ax", "proj_w_ap", "proj_b_ap",
)


@dataclass
class IntersectionWeights:
    """Weights of the attention and DeepSets networks (see ``MLPSpec``)."""

    attn_w1: np.ndarray
    attn_w2: np.ndarray
    ds_inner_w: np.ndarray
    ds_inner_b: np.ndarray
    ds_outer_w: np.ndarray
    ds_outer_b: np.ndarray

    @classmethod
    def init(cls, d: int, rng: np.random.Generator) -> "IntersectionWeights":
        return cls(
            attn_w1=_uniform_linear(rng, 2 * d, (2 * d, d)),
            attn_w2=_uniform_linear(rng, d, (d, d)),
            ds_inner_w=_uniform_linear(rng, 2 * d, (2 * d, d)),
            ds_inner_b=_uniform_linear(rng, 2 * d, (d,)),
            ds_outer_w=_uniform_linear(rng, d, (d, d)),
            ds_outer_b=_uniform_linear(rng, d, (d,)),
        )

    @classmethod
    def zeros(cls, d: int) -> "IntersectionWeights":
        """All-zero weights: uniform attention, gate sigma(0) = 0.5."""
        return cls(
            attn_w1=np.zeros((2 * d, d)),
            attn_w2=np.zeros((d, d)),
            ds_inner_w=np.zeros((2 * d, d)),
            ds_inner_b=np.zeros(d),
            ds_outer_w=np.zeros((d, d)),
            ds_outer_b=np.zeros(d),
        )

    def as_diff(self) -> dict[str, DiffValue]:
        return {
            name: dc.as_value(getattr(self, name))
            for name in INTERSECTION_PARAM_NAMES
        }


def init_param_store(
    n_entities: int,
    n_relations: int,
    d: int,
    rng: np.random.Generator,
    variant: str = "base",
) -> ParamStore:
    """Create and initialize every learnable group the model needs.

    Entity embeddings are axis-only (their aperture is fixed at zero).
    Relation apertures start near 0.1 radians so early cones stay narrow.
    """
    if variant not in VARIANTS:
        raise ConfigError(f"unknown variant {variant!r}, expected one of {VARIANTS}")
    store = ParamStore()
    store.register("entity_axis", rng.uniform(-PI, PI, size=(n_entities, d)))
    store.register("relation_raw_ax", rng.uniform(-PI, PI, size=(n_relations, d)))
    # Jitter keeps initial apertures near 0.1 rad while breaking the exact
    # ties that would otherwise sit on the min-reduction kink.
    store.register(
        "relation_raw_ap",
        _RAW_AP_INIT + rng.uniform(-0.2, 0.2, size=(n_relations, d)),
    )
    weights = IntersectionWeights.init(d, rng)
    for name in INTERSECTION_PARAM_NAMES:
        store.register(name, getattr(weights, name))
    if variant == "se":
        store.register("se_scale", np.ones(n_relations))
        store.register("se_shift", np.zeros(n_relations))
    if variant == "neural":
        store.register("proj_w1", _uniform_linear(rng, 2 * d, (2 * d, 2 * d)))
        store.register("proj_b1", _uniform_linear(rng, 2 * d, (2 * d,)))
        store.register("proj_w_ax", _uniform_linear(rng, 2 * d, (2 * d, d)))
        store.register("proj_b_ax", _uniform_linear(rng, 2 * d, (d,)))
        store.register("proj_w_ap", _uniform_linear(rng, 2 * d, (2 * d, d)))
        store.register("proj_b_ap", _uniform_linear(rng, 2 * d, (d,)))
    return store


# ---------------------------------------------------------------------------
# Differentiable core (shapes: cones (B, d), entity targets (B, m, d))
# ---------------------------------------------------------------------------


def entity_cone(store: ParamStore, entity_ids: np.ndarray) -> DCone:
    """Point cones for a batch of entity ids."""
    ax = dc.take(store["entity_axis"], entity_ids)
    return DCone(ax, dc.as_value(np.zeros(ax.shape)))


def relation_views(store: ParamStore, rel_ids: np.ndarray) -> tuple[DiffValue, DiffValue]:
    """Constrained rotation angles for a batch of relation ids."""
    ax = dc.wrap_to_pi(dc.take(store["relation_raw_ax"], rel_ids))
    ap = dc.multiply(dc.sigmoid(dc.take(store["relation_raw_ap"], rel_ids)), TWO_PI)
    return ax, ap


def project_core(
    cone: DCone,
    rel_ax: DiffValue,
    rel_ap: DiffValue,
    variant: str,
    extras: dict[str, DiffValue] | None = None,
) -> DCone:
    """Apply one relation hop to a batch of cones."""
    extras = extras or {}
    if variant == "base":
        return DCone(cone.ax + rel_ax, dc.clamp(cone.ap + rel_ap, 0.0, TWO_PI))
    if variant == "trunc":
        return DCone(cone.ax + rel_ax, dc.clamp(cone.ap + rel_ap, 0.0, PI))
    if variant == "se":
        scale, shift = extras["se_scale"], extras["se_shift"]
        squashed = dc.sigmoid(scale * (cone.ap - PI) + shift)
        return DCone(cone.ax + rel_ax, dc.multiply(squashed, TWO_PI))
    if variant == "neural":
        b, d = cone.ax.shape[0], cone.ax.shape[-1]
        x = dc.concat([cone.ax + rel_ax, cone.ap + rel_ap], axis=-1)
        h = dc.relu(dc.matmul(dc.reshape(x, (b, 2 * d)), extras["proj_w1"])
                    + extras["proj_b1"])
        ax = dc.multiply(
            dc.tanh(dc.matmul(h, extras["proj_w_ax"]) + extras["proj_b_ax"]), PI
        )
        ap = dc.multiply(
            dc.tanh(dc.matmul(h, extras["proj_w_ap"]) + extras["proj_b_ap"]) + 1.0,
            PI,
        )
        return DCone(ax, ap)
    raise ConfigError(f"unknown variant {variant!r}, expected one of {VARIANTS}")


def negate_core(cone: DCone) -> DCone:
    """Complement: antipodal axis, aperture 2pi - aperture."""
    return DCone(cone.ax + PI, TWO_PI - cone.ap)


def _boundary_features(ax_stack: DiffValue, ap_stack: DiffValue) -> DiffValue:
    """Concatenated [lower; upper] boundary angles, shape (n, B, 2d)."""
    half = dc.multiply(ap_stack, 0.5)
    return dc.concat([ax_stack - half, ax_stack + half], axis=-1)


def _attention_logits(flat: DiffValue, w1, w2) -> DiffValue:
    # The attention head carries no biases: the softmax is invariant to
    # logit shifts that are uniform across its inputs, which is exactly the
    # direction a bias moves (always for the output layer, and for the
    # hidden layer whenever a unit's relu state agrees across inputs), so
    # biases there are inert by symmetry.
    return dc.matmul(dc.relu(dc.matmul(flat, w1)), w2)


def semantic_average_core(
    cones: Sequence[DCone],
    weights: dict[str, DiffValue],
    mode: str = "infer",
) -> DiffValue:
    """Attention-weighted circular mean of the input axes, shape (B, d).

    A zero resultant vector (fully cancelling inputs) raises
    ``DegenerateInputError`` in inference mode; in training mode the
    attention logits are perturbed by 1e-12 and the average recomputed.
    """
    if len(cones) == 1:
        # Attention over a single input is identically 1, so the average
        # is the input axis; returning it directly is exact in values and
        # gradients (the weights receive zero gradient either way).
        return cones[0].ax
    ax_stack = dc.stack([c.ax for c in cones], axis=0)
    ap_stack = dc.stack([c.ap for c in cones], axis=0)
    n, b, d = ax_stack.shape
    feats = dc.reshape(_boundary_features(ax_stack, ap_stack), (n * b, 2 * d))
    logits = dc.reshape(
        _attention_logits(feats, weights["attn_w1"], weights["attn_w2"]),
        (n, b, d),
    )
    for attempt in range(2):
        if attempt == 1:
            # Deterministic tie-break: tilt the logits per input branch.
            tilt = 1e-12 * np.arange(1, n + 1).reshape(n, 1, 1)
            attn = dc.softmax(logits + tilt, axis=0)
        else:
            attn = dc.softmax(logits, axis=0)
        x = dc.sum_reduce(dc.multiply(attn, dc.cos(ax_stack)), axis=0)
        y = dc.sum_reduce(dc.multiply(attn, dc.sin(ax_stack)), axis=0)
        # Fully cancelling inputs leave only rounding crumbs (~1e-16);
        # the 1e-12 tie-break tilt lifts genuine signal back above this.
        degenerate = x.data ** 2 + y.data ** 2 < 1e-28
        if not np.any(degenerate):
            return dc.atan2(y, x)
        if mode != "train":
            bad = int(np.argmax(degenerate))
            raise DegenerateInputError(
                f"zero resultant vector at dimension {bad % d}"
            )
    raise DegenerateInputError("zero resultant vector persists after perturbation")


def card_min_core(
    cones: Sequence[DCone],
    weights: dict[str, DiffValue],
) -> DiffValue:
    """Gated minimum of the input apertures, shape (B, d), in [0, 2pi]."""
    ax_stack = dc.stack([c.ax for c in cones], axis=0)
    ap_stack = dc.stack([c.ap for c in cones], axis=0)
    n, b, d = ax_stack.shape
    feats = dc.reshape(_boundary_features(ax_stack, ap_stack), (n * b, 2 * d))
    inner = dc.relu(dc.matmul(feats, weights["ds_inner_w"]) + weights["ds_inner_b"])
    pooled = dc.mean(dc.reshape(inner, (n, b, d)), axis=0)
    gate = dc.sigmoid(dc.matmul(pooled, weights["ds_outer_w"]) + weights["ds_outer_b"])
    return dc.multiply(dc.min_reduce(ap_stack, axis=0), gate)


def intersect_core(
    cones: Sequence[DCone],
    weights: dict[str, DiffValue],
    mode: str = "infer",
) -> DCone:
    return DCone(
        semantic_average_core(cones, weights, mode=mode),
        card_min_core(cones, weights),
    )


def _l1(a_re, a_im, b_re, b_im) -> DiffValue:
    """L1 distance between complex vectors: sum over the last axis of
    |Re delta| + |Im delta| (the L1 norm of the stacked real/imag parts)."""
    return dc.sum_reduce(
        dc.absolute(a_re - b_re) + dc.absolute(a_im - b_im), axis=-1
    )


def distance_core(
    members: Sequence[DCone],
    target_ax: DiffValue,
    lam: float,
    alt_inside: bool = False,
) -> DiffValue:
    """Distance from entity vectors to a DNF cone set.

    ``members`` hold (B, d) cones; ``target_ax`` holds (B, m, d) entity
    angles.  Returns (B, m): per member the outside distance plus ``lam``
    times the inside distance, minimized over members.

    The inside distance is min(|axis - target|_1, |upper - axis|_1); its
    second term is independent of the target and acts as a per-cone cap.
    With ``alt_inside`` the cap is replaced by |upper - target|_1.
    """
    if not members:
        raise ContractViolationError("distance over an empty cone set")
    if not 0.0 < lam < 1.0:
        raise ContractViolationError(f"lambda must be in (0, 1), got {lam}")
    t_re, t_im = dc.cos(target_ax), dc.sin(target_ax)
    m = target_ax.shape[1]
    per_member = []
    for cone in members:
        cb, d_ = cone.ax.shape[0], cone.ax.shape[-1]
        zeros_bm = np.zeros((cb, m))
        ax = dc.reshape(cone.ax, (cb, 1, d_))
        half = dc.reshape(dc.multiply(cone.ap, 0.5), (cb, 1, d_))
        theta_u = ax + half
        theta_l = ax - half
        u_re, u_im = dc.cos(theta_u), dc.sin(theta_u)
        l_re, l_im = dc.cos(theta_l), dc.sin(theta_l)
        c_re, c_im = dc.cos(ax), dc.sin(ax)
        d_out = dc.min_reduce(
            dc.stack([_l1(u_re, u_im, t_re, t_im),
                      _l1(l_re, l_im, t_re, t_im)], axis=0),
            axis=0,
        )
        d_ax = _l1(c_re, c_im, t_re, t_im)
        if alt_inside:
            d_cap = _l1(u_re, u_im, t_re, t_im)
        else:
            # (B, 1) cap broadcast against the (B, m) axis term.
            d_cap = _l1(u_re, u_im, c_re, c_im) + zeros_bm
        d_in = dc.min_reduce(dc.stack([d_ax, d_cap], axis=0), axis=0)
        per_member.append(d_out + dc.multiply(d_in, lam))
    if len(per_member) == 1:
        return per_member[0]
    return dc.min_reduce(dc.stack(per_member, axis=0), axis=0)


# ---------------------------------------------------------------------------
# Plain ConeBatch wrappers
# ---------------------------------------------------------------------------


def _lift(c: ConeBatch) -> DCone:
    return DCone(
        dc.as_value(c.theta_ax.reshape(1, -1)),
        dc.as_value(c.theta_ap.reshape(1, -1)),
    )


def _lower(cone: DCone) -> ConeBatch:
    return ConeBatch(cone.ax.data.reshape(-1), cone.ap.data.reshape(-1))


def project(
    q: ConeBatch,
    r: RelationRotation,
    variant: str = "base",
    *,
    se_scale: float = 1.0,
    se_shift: float = 0.0,
    neural_weights: dict[str, np.ndarray] | None = None,
) -> ConeBatch:
    """Rotate a cone by a relation (see module docstring for variants)."""
    if variant not in VARIANTS:
        raise ConfigError(f"unknown variant {variant!r}, expected one of {VARIANTS}")
    extras: dict[str, DiffValue] = {}
    if variant == "se":
        extras = {
            "se_scale": dc.as_value(float(se_scale)),
            "se_shift": dc.as_value(float(se_shift)),
        }
    elif variant == "neural":
        if neural_weights is None:
            raise ConfigError("variant 'neural' needs projection MLP weights")
        extras = {k: dc.as_value(v) for k, v in neural_weights.items()}
    rel_ax = dc.as_value(r.theta_ax_r.reshape(1, -1))
    rel_ap = dc.as_value(r.theta_ap_r.reshape(1, -1))
    return _lower(project_core(_lift(q), rel_ax, rel_ap, variant, extras))


def semantic_average(
    cones: Sequence[ConeBatch],
    weights: IntersectionWeights,
    mode: str = "infer",
) -> np.ndarray:
    """Attention-weighted circular mean of the cone axes (an angle vector)."""
    if not cones:
        raise ContractViolationError("semantic_average of an empty sequence")
    out = semantic_average_core([_lift(c) for c in cones], weights.as_diff(), mode)
    return out.data.reshape(-1)


def card_min(
    cones: Sequence[ConeBatch],
    weights: IntersectionWeights,
) -> np.ndarray:
    """Gated aperture minimum (an angle vector in [0, 2pi])."""
    if not cones:
        raise ContractViolationError("card_min of an empty sequence")
    out = card_min_core([_lift(c) for c in cones], weights.as_diff())
    return out.data.reshape(-1)


def intersect(
    cones: Sequence[ConeBatch],
    weights: IntersectionWeights,
    mode: str = "infer",
) -> ConeBatch:
    """Intersection: semantic-average axis, gated-minimum aperture."""
    return ConeBatch(
        semantic_average(cones, weights, mode=mode),
        card_min(cones, weights),
    )


def negate(q: ConeBatch) -> ConeBatch:
    """Complement cone: antipodal axis, aperture 2pi - aperture.

    Exact bitwise involution on canonical cones: on the canonical grids both
    the single-branch axis flip and the aperture reflection are exact float
    operations (pi and 2pi are integer multiples of the grid steps).
    """
    return ConeBatch(flip_axis(q.theta_ax), TWO_PI - q.theta_ap)


def union(branches: Sequence[ConeSet]) -> ConeSet:
    """Disjunction: concatenate branch members, preserving order."""
    if not branches:
        raise ContractViolationError("union of an empty sequence")
    members: list[ConeBatch] = []
    for b in branches:
        members.extend(b.members)
    return ConeSet(members)


def distance(
    target: UnitComplexVec,
    q: ConeSet,
    lam: float,
    alt_inside: bool = False,
) -> float:
    """Combined outside+inside distance from a unit vector to a cone set."""
    target_ax = wrap_angle(np.arctan2(target.im, target.re))
    members = [_lift(c) for c in q.members]
    t = dc.as_value(np.asarray(target_ax).reshape(1, 1, -1))
    out = distance_core(members, t, lam, alt_inside=alt_inside)
    return float(out.data.reshape(()))


def distance_to_entities(
    q: ConeSet,
    entity_axis: np.ndarray,
    lam: float,
    alt_inside: bool = False,
) -> np.ndarray:
    """Plain-numpy distances from every entity to a cone set.

    ``entity_axis`` is the (|E|, d) table of entity axis angles.  Mirrors
    ``distance_core`` without building a DAG; the two are cross-checked in
    the test suite.
    """
    phis = np.asarray(entity_axis, dtype=np.float64)
    t_re, t_im = np.cos(phis), np.sin(phis)
    best = None
    for c in q.members:
        theta_u = c.theta_ax + 0.5 * c.theta_ap
        theta_l = c.theta_ax - 0.5 * c.theta_ap
        u_re, u_im = np.cos(theta_u), np.sin(theta_u)
        l_re, l_im = np.cos(theta_l), np.sin(theta_l)
        c_re, c_im = np.cos(c.theta_ax), np.sin(c.theta_ax)
        d_up = np.sum(np.abs(u_re - t_re) + np.abs(u_im - t_im), axis=-1)
        d_lo = np.sum(np.abs(l_re - t_re) + np.abs(l_im - t_im), axis=-1)
        d_out = np.minimum(d_up, d_lo)
        d_ax = np.sum(np.abs(c_re - t_re) + np.abs(c_im - t_im), axis=-1)
        if alt_inside:
            d_cap = d_up
        else:
            d_cap = np.sum(np.abs(u_re - c_re) + np.abs(u_im - c_im))
        d_in = np.minimum(d_ax, d_cap)
        d_com = d_out + lam * d_in
        best = d_com if best is None else np.minimum(best, d_com)
    return best


def compose_rotations(r1: RelationRotation, r2: RelationRotation) -> RelationRotation:
    """Angle-sum composition of two rotations (apertures add, clipped)."""
    ax = wrap_angle(r1.theta_ax_r + r2.theta_ax_r)
    ap = np.clip(r1.theta_ap_r + r2.theta_ap_r, 0.0, TWO_PI)
    return RelationRotation.from_angles(ax, ap)


def inverse_rotation(r: RelationRotation) -> RelationRotation:
    """The rotation undoing ``r``'s axis action, with zero aperture delta."""
    return RelationRotation.from_angles(wrap_angle(-r.theta_ax_r), np.zeros(r.d))
