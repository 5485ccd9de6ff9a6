"""Logical operators over cones: projection variants, intersection,
negation, union, distance, and the relation-pattern lemmas."""

import math

import numpy as np
import pytest
from scipy.special import expit

from rocone.errors import ConfigError, ContractViolationError, DegenerateInputError
from rocone.geometry import (
    PI,
    TWO_PI,
    ConeBatch,
    RelationRotation,
    UnitComplexVec,
    boundaries,
    wrap_angle,
)
from rocone.operators import (
    ConeSet,
    IntersectionWeights,
    card_min,
    compose_rotations,
    distance,
    distance_to_entities,
    intersect,
    inverse_rotation,
    negate,
    project,
    semantic_average,
    union,
)


def random_cone(rng, d=6, ap_max=TWO_PI):
    return ConeBatch(rng.uniform(-PI, PI, d), rng.uniform(0.0, ap_max, d))


def rotation(ax, ap):
    return RelationRotation.from_angles(np.atleast_1d(ax), np.atleast_1d(ap))


class TestProject:
    def test_identity_rotation_is_exact(self):
        rng = np.random.default_rng(0)
        q = random_cone(rng, d=4)
        r = RelationRotation.identity(4)
        out = project(q, r)
        np.testing.assert_array_equal(out.theta_ax, q.theta_ax)
        np.testing.assert_array_equal(out.theta_ap, q.theta_ap)

    def test_quarter_turn(self):
        q = ConeBatch([0.0], [math.pi / 2.0])
        r = rotation(math.pi / 2.0, 0.0)
        out = project(q, r)
        np.testing.assert_array_equal(out.theta_ax, [math.pi / 2.0])
        np.testing.assert_array_equal(out.theta_ap, [math.pi / 2.0])

    def test_matches_complex_product(self):
        """Boundary form equals the elementwise complex product h o r when
        no clamp activates."""
        rng = np.random.default_rng(1)
        for _ in range(100):
            q = random_cone(rng, ap_max=0.8)
            r = rotation(rng.uniform(-PI, PI, 6), rng.uniform(0.0, 0.8, 6))
            out = project(q, r)
            h_u, h_l = boundaries(q)
            # rotation boundary vectors: r_u at ax_r + ap_r/2, r_l at ax_r - ap_r/2
            ru = np.exp(1j * (r.theta_ax_r + r.theta_ap_r / 2.0))
            rl = np.exp(1j * (r.theta_ax_r - r.theta_ap_r / 2.0))
            want_u = (h_u.re + 1j * h_u.im) * ru
            want_l = (h_l.re + 1j * h_l.im) * rl
            got_u, got_l = boundaries(out)
            np.testing.assert_allclose(got_u.re + 1j * got_u.im, want_u, atol=1e-9)
            np.testing.assert_allclose(got_l.re + 1j * got_l.im, want_l, atol=1e-9)

    def test_base_clamps_at_two_pi(self):
        q = ConeBatch([0.0], [5.0])
        out = project(q, rotation(0.0, 3.0))
        assert out.theta_ap[0] == TWO_PI

    def test_trunc_clamps_at_pi(self):
        q = ConeBatch([0.0], [2.0])
        out = project(q, rotation(0.3, 2.0), variant="trunc")
        assert out.theta_ap[0] == PI
        assert out.theta_ax[0] == pytest.approx(0.3, abs=1e-12)

    def test_se_squashes_aperture(self):
        q = ConeBatch([0.2], [1.0])
        r = rotation(0.5, 1.5)  # aperture delta unused by se
        out = project(q, r, variant="se", se_scale=2.0, se_shift=0.25)
        expect = TWO_PI * expit(2.0 * (1.0 - PI) + 0.25)
        assert out.theta_ap[0] == pytest.approx(expect, abs=1e-12)
        assert out.theta_ax[0] == pytest.approx(wrap_angle(0.2 + 0.5), abs=1e-12)

    def test_neural_variant_ranges(self):
        rng = np.random.default_rng(2)
        d = 5
        weights = {
            "proj_w1": rng.normal(size=(2 * d, 2 * d)),
            "proj_b1": rng.normal(size=2 * d),
            "proj_w_ax": rng.normal(size=(2 * d, d)),
            "proj_b_ax": rng.normal(size=d),
            "proj_w_ap": rng.normal(size=(2 * d, d)),
            "proj_b_ap": rng.normal(size=d),
        }
        q = random_cone(rng, d=d)
        out = project(q, rotation(rng.uniform(-PI, PI, d), rng.uniform(0, 2, d)),
                      variant="neural", neural_weights=weights)
        assert np.all(out.theta_ap >= 0.0) and np.all(out.theta_ap <= TWO_PI)
        assert np.all(out.theta_ax >= -PI) and np.all(out.theta_ax < PI)

    def test_unknown_variant(self):
        q = ConeBatch([0.0], [0.0])
        with pytest.raises(ConfigError):
            project(q, rotation(0.0, 0.0), variant="bogus")

    def test_neural_without_weights(self):
        with pytest.raises(ConfigError):
            project(ConeBatch([0.0], [0.0]), rotation(0.0, 0.0), variant="neural")


class TestSemanticAverage:
    def test_single_input_exact(self):
        rng = np.random.default_rng(3)
        c = random_cone(rng)
        w = IntersectionWeights.init(c.d, rng)
        np.testing.assert_array_equal(semantic_average([c], w), c.theta_ax)

    def test_opposed_axes_uniform_attention(self):
        """Zeroed weights give uniform attention; +-alpha axes average to 0."""
        alpha = 0.9
        a = ConeBatch([alpha, alpha], [0.4, 0.4])
        b = ConeBatch([-alpha, -alpha], [0.4, 0.4])
        out = semantic_average([a, b], IntersectionWeights.zeros(2))
        np.testing.assert_allclose(out, [0.0, 0.0], atol=1e-12)

    def test_coincident_axes_any_weights(self):
        rng = np.random.default_rng(4)
        beta = rng.uniform(-PI, PI, 3)
        a = ConeBatch(beta, rng.uniform(0, 1, 3))
        b = ConeBatch(beta, rng.uniform(0, 1, 3))
        out = semantic_average([a, b], IntersectionWeights.init(3, rng))
        np.testing.assert_allclose(out, ConeBatch(beta, np.zeros(3)).theta_ax,
                                    atol=1e-12)

    def test_degenerate_resultant_errors_in_inference(self):
        # Axes at +-pi/2 with uniform attention cancel exactly: x = y = 0.
        a = ConeBatch([PI / 2.0], [0.0])
        b = ConeBatch([-PI / 2.0], [0.0])
        with pytest.raises(DegenerateInputError):
            semantic_average([a, b], IntersectionWeights.zeros(1))

    def test_degenerate_resultant_perturbed_in_training(self):
        a = ConeBatch([PI / 2.0], [0.0])
        b = ConeBatch([-PI / 2.0], [0.0])
        out = semantic_average([a, b], IntersectionWeights.zeros(1), mode="train")
        assert np.isfinite(out).all()


class TestCardMin:
    def test_bounded_by_min(self):
        rng = np.random.default_rng(5)
        for _ in range(200):
            cones = [random_cone(rng, d=4) for _ in range(3)]
            w = IntersectionWeights.init(4, rng)
            out = card_min(cones, w)
            floor = np.minimum.reduce([c.theta_ap for c in cones])
            assert np.all(out <= floor)
            assert np.all(out >= 0.0)

    def test_point_input_pins_zero(self):
        rng = np.random.default_rng(6)
        cones = [random_cone(rng, d=3), ConeBatch.point(rng.uniform(-PI, PI, 3))]
        out = card_min(cones, IntersectionWeights.init(3, rng))
        np.testing.assert_array_equal(out, np.zeros(3))

    def test_matches_straight_line_reference(self):
        """Independent re-implementation of the gated-minimum equations."""
        rng = np.random.default_rng(7)
        d = 4
        cones = [random_cone(rng, d=d) for _ in range(2)]
        w = IntersectionWeights.init(d, rng)
        got = card_min(cones, w)

        feats = np.stack([
            np.concatenate([c.theta_ax - c.theta_ap / 2.0,
                            c.theta_ax + c.theta_ap / 2.0])
            for c in cones
        ])  # (2, 2d)
        inner = np.maximum(feats @ w.ds_inner_w + w.ds_inner_b, 0.0)
        pooled = inner.mean(axis=0)
        gate = expit(pooled @ w.ds_outer_w + w.ds_outer_b)
        want = np.minimum(cones[0].theta_ap, cones[1].theta_ap) * gate
        np.testing.assert_allclose(got, want, atol=1e-12)


class TestIntersect:
    def test_single_input_keeps_axis_shrinks_aperture(self):
        rng = np.random.default_rng(8)
        c = random_cone(rng, d=5)
        out = intersect([c], IntersectionWeights.init(5, rng))
        np.testing.assert_array_equal(out.theta_ax, c.theta_ax)
        assert np.all(out.theta_ap <= c.theta_ap)

    def test_permutation_invariance(self):
        """Invariant up to accumulation order: within 1e-12."""
        rng = np.random.default_rng(9)
        cones = [random_cone(rng, d=4) for _ in range(3)]
        w = IntersectionWeights.init(4, rng)
        a = intersect(cones, w)
        b = intersect(cones[::-1], w)
        np.testing.assert_allclose(a.theta_ax, b.theta_ax, atol=1e-12)
        np.testing.assert_allclose(a.theta_ap, b.theta_ap, atol=1e-12)

    def test_matches_straight_line_reference(self):
        """Three-cone intersection against a from-scratch evaluation."""
        rng = np.random.default_rng(10)
        d = 3
        cones = [random_cone(rng, d=d) for _ in range(3)]
        w = IntersectionWeights.init(d, rng)
        got = intersect(cones, w)

        feats = np.stack([
            np.concatenate([c.theta_ax - c.theta_ap / 2.0,
                            c.theta_ax + c.theta_ap / 2.0])
            for c in cones
        ])  # (3, 2d)
        logits = np.maximum(feats @ w.attn_w1, 0.0) @ w.attn_w2
        e = np.exp(logits - logits.max(axis=0, keepdims=True))
        attn = e / e.sum(axis=0, keepdims=True)
        x = np.sum(attn * np.cos([c.theta_ax for c in cones]), axis=0)
        y = np.sum(attn * np.sin([c.theta_ax for c in cones]), axis=0)
        want_ax = np.arctan2(y, x)
        inner = np.maximum(feats @ w.ds_inner_w + w.ds_inner_b, 0.0)
        gate = expit(inner.mean(axis=0) @ w.ds_outer_w + w.ds_outer_b)
        want_ap = np.minimum.reduce([c.theta_ap for c in cones]) * gate
        np.testing.assert_allclose(got.theta_ax, want_ax, atol=1e-12)
        np.testing.assert_allclose(got.theta_ap, want_ap, atol=1e-12)


class TestNegate:
    def test_involution_bitwise(self):
        rng = np.random.default_rng(11)
        for _ in range(500):
            c = random_cone(rng)
            back = negate(negate(c))
            np.testing.assert_array_equal(back.theta_ax, c.theta_ax)
            np.testing.assert_array_equal(back.theta_ap, c.theta_ap)

    def test_worked_example(self):
        out = negate(ConeBatch([0.0], [math.pi / 2.0]))
        np.testing.assert_array_equal(out.theta_ax, [-math.pi])
        np.testing.assert_allclose(out.theta_ap, [3.0 * math.pi / 2.0], atol=1e-15)

    def test_boundary_swap_semantics(self):
        """New upper boundary is the old lower boundary (and vice versa)."""
        rng = np.random.default_rng(12)
        c = random_cone(rng, ap_max=TWO_PI * 0.99)
        n = negate(c)
        h_u, h_l = boundaries(c)
        n_u, n_l = boundaries(n)
        np.testing.assert_allclose(n_u.re, h_l.re, atol=1e-9)
        np.testing.assert_allclose(n_u.im, h_l.im, atol=1e-9)
        np.testing.assert_allclose(n_l.re, h_u.re, atol=1e-9)
        np.testing.assert_allclose(n_l.im, h_u.im, atol=1e-9)

    def test_point_complement_is_full_circle(self):
        p = ConeBatch.point([0.4, -2.2])
        out = negate(p)
        np.testing.assert_array_equal(out.theta_ap, [TWO_PI, TWO_PI])


class TestUnion:
    def test_singleton(self):
        c = ConeBatch([0.0], [1.0])
        s = ConeSet([c])
        assert union([s]).members == s.members

    def test_concatenation_order(self):
        rng = np.random.default_rng(13)
        a = ConeSet([random_cone(rng) for _ in range(2)])
        b = ConeSet([random_cone(rng) for _ in range(3)])
        out = union([a, b])
        assert len(out) == 5
        assert out.members[:2] == a.members
        assert out.members[2:] == b.members

    def test_empty_rejected(self):
        with pytest.raises(ContractViolationError):
            ConeSet([])


class TestDistance:
    def test_target_on_point_cone(self):
        c = ConeBatch.point([0.7, -1.1])
        target = UnitComplexVec(np.cos([0.7, -1.1]), np.sin([0.7, -1.1]))
        assert distance(target, ConeSet([c]), lam=0.5) == pytest.approx(0.0, abs=1e-12)

    def test_hand_worked_value(self):
        """d=1 cone (axis 0, aperture pi/2), target (1, 0): outside distance
        (1 - sqrt2/2) + sqrt2/2 = 1, inside 0."""
        c = ConeBatch([0.0], [math.pi / 2.0])
        target = UnitComplexVec([1.0], [0.0])
        for lam in (0.1, 0.5, 0.9):
            assert distance(target, ConeSet([c]), lam) == pytest.approx(1.0, abs=1e-12)

    def test_singleton_set_equals_member(self):
        rng = np.random.default_rng(14)
        c = random_cone(rng, d=4)
        phi = rng.uniform(-PI, PI, 4)
        target = UnitComplexVec(np.cos(phi), np.sin(phi))
        d1 = distance(target, ConeSet([c]), 0.3)
        d2 = distance_to_entities(ConeSet([c]), phi.reshape(1, -1), 0.3)[0]
        assert d1 == pytest.approx(d2, abs=1e-12)

    def test_nonnegative_and_union_bound(self):
        rng = np.random.default_rng(15)
        for _ in range(100):
            members = [random_cone(rng, d=3) for _ in range(3)]
            phi = rng.uniform(-PI, PI, 3)
            target = UnitComplexVec(np.cos(phi), np.sin(phi))
            d_all = distance(target, ConeSet(members), 0.4)
            assert d_all >= 0.0
            for m in members:
                assert d_all <= distance(target, ConeSet([m]), 0.4) + 1e-12

    def test_lambda_out_of_range(self):
        c = ConeSet([ConeBatch([0.0], [1.0])])
        target = UnitComplexVec([1.0], [0.0])
        with pytest.raises(ContractViolationError):
            distance(target, c, 0.0)

    def test_alt_inside_reading(self):
        rng = np.random.default_rng(16)
        c = random_cone(rng, d=4, ap_max=1.0)
        phi = rng.uniform(-PI, PI, 4)
        target = UnitComplexVec(np.cos(phi), np.sin(phi))
        d_default = distance(target, ConeSet([c]), 0.5)
        d_alt = distance(target, ConeSet([c]), 0.5, alt_inside=True)
        assert np.isfinite(d_default) and np.isfinite(d_alt)


class TestRelationPatternLemmas:
    """Executable forms of the rotation-pattern lemmas (no-clamp regime)."""

    def test_composition(self):
        rng = np.random.default_rng(17)
        for _ in range(200):
            q = ConeBatch(rng.uniform(-PI, PI, 4), rng.uniform(0, 0.5, 4))
            r1 = rotation(rng.uniform(-PI, PI, 4), rng.uniform(0, 0.4, 4))
            r2 = rotation(rng.uniform(-PI, PI, 4), rng.uniform(0, 0.4, 4))
            two_hop = project(project(q, r1), r2)
            composed = project(q, compose_rotations(r1, r2))
            np.testing.assert_allclose(two_hop.theta_ax, composed.theta_ax, atol=1e-9)
            np.testing.assert_allclose(two_hop.theta_ap, composed.theta_ap, atol=1e-9)

    def test_symmetry_condition_positive(self):
        """wrap(2 axis) = 0 and zero aperture delta: projecting twice is the
        identity."""
        rng = np.random.default_rng(18)
        for _ in range(100):
            ax_r = rng.choice([0.0, -PI], size=4)
            r = rotation(ax_r, np.zeros(4))
            q = ConeBatch(rng.uniform(-PI, PI, 4), rng.uniform(0, TWO_PI, 4))
            back = project(project(q, r), r)
            np.testing.assert_allclose(back.theta_ax, q.theta_ax, atol=1e-9)
            np.testing.assert_allclose(back.theta_ap, q.theta_ap, atol=1e-9)

    def test_symmetry_condition_negative(self):
        """A rotation violating the condition is not an involution."""
        rng = np.random.default_rng(19)
        for _ in range(100):
            ax_r = rng.uniform(0.3, PI - 0.3, 4) * rng.choice([-1.0, 1.0], 4)
            r = rotation(ax_r, np.zeros(4))
            q = ConeBatch(rng.uniform(-PI, PI, 4), rng.uniform(0, 1.0, 4))
            back = project(project(q, r), r)
            assert np.max(np.abs(wrap_angle(back.theta_ax - q.theta_ax))) > 1e-6

    def test_inversion_round_trip(self):
        rng = np.random.default_rng(20)
        for _ in range(100):
            r = rotation(rng.uniform(-PI, PI, 4), np.zeros(4))
            q = ConeBatch(rng.uniform(-PI, PI, 4), rng.uniform(0, TWO_PI, 4))
            back = project(project(q, r), inverse_rotation(r))
            np.testing.assert_allclose(back.theta_ax, q.theta_ax, atol=1e-9)
            np.testing.assert_allclose(back.theta_ap, q.theta_ap, atol=1e-9)

    def test_inversion_negative_direction(self):
        """A wrong inverse axis or a nonzero aperture delta breaks the trip."""
        rng = np.random.default_rng(21)
        for _ in range(100):
            r = rotation(rng.uniform(0.3, 2.5, 4), np.zeros(4))
            wrong = rotation(-r.theta_ax_r + 0.05, np.zeros(4))
            q = ConeBatch(rng.uniform(-PI, PI, 4), rng.uniform(0, 1.0, 4))
            back = project(project(q, r), wrong)
            assert np.max(np.abs(wrap_angle(back.theta_ax - q.theta_ax))) > 1e-6
        r_ap = rotation(np.zeros(4), np.full(4, 0.5))
        q = ConeBatch(np.zeros(4), np.full(4, 1.0))
        back = project(project(q, r_ap), inverse_rotation(r_ap))
        assert np.max(np.abs(back.theta_ap - q.theta_ap)) > 0.4


class TestOutputInvariants:
    def test_operator_outputs_stay_canonical(self):
        rng = np.random.default_rng(22)
        w = IntersectionWeights.init(4, rng)
        for _ in range(100):
            cones = [random_cone(rng, d=4) for _ in range(3)]
            r = rotation(rng.uniform(-PI, PI, 4), rng.uniform(0, TWO_PI, 4))
            outputs = [
                project(cones[0], r),
                project(cones[0], r, variant="trunc"),
                intersect(cones, w),
                negate(cones[1]),
            ]
            for out in outputs:
                assert np.all(out.theta_ax >= -PI) and np.all(out.theta_ax < PI)
                assert np.all(out.theta_ap >= 0.0) and np.all(out.theta_ap <= TWO_PI)
