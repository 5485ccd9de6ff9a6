"""Canonical cone geometry on the unit circle of the complex plane.

A query region is a product of d planar cones, each described by an axis
angle in [-pi, pi) and an aperture in [0, 2pi].  Everything here is plain
float64 numpy; the differentiable mirror of these operations lives in
``operators``.

Canonical angles are quantized to power-of-two grids (spacing 2^-51 for
axes, 2^-50 for apertures).  float64 pi is exactly 7074237752028440 * 2^-51,
so on these grids adding or subtracting pi (and 2pi) is exact integer
arithmetic and the complement operation is an exact involution.  The
quantization error (< 4.5e-16) is far below every tolerance used by the
angle algebra.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import expit, logit

from .errors import DegenerateInputError, DomainError

PI = math.pi
TWO_PI = 2.0 * math.pi

# pi == AXIS_PI_STEPS * AXIS_GRID == APERTURE_PI_STEPS * APERTURE_GRID exactly.
AXIS_GRID = 2.0 ** -51
APERTURE_GRID = 2.0 ** -50

UNIT_MODULUS_TOL = 1e-9


def _as_angle_array(values, name: str) -> np.ndarray:
    arr = np.asarray(values, dtype=np.float64)
    if not np.all(np.isfinite(arr)):
        raise DomainError(f"{name} must be finite, got {arr}")
    return arr


def wrap_angle(x):
    """Reduce an angle (scalar or array) to the half-open range [-pi, pi).

    The result is congruent to ``x`` modulo 2pi; the boundary value pi maps
    to -pi.  Raises ``DomainError`` on non-finite input.
    """
    arr = _as_angle_array(x, "angle")
    wrapped = arr - TWO_PI * np.floor((arr + PI) / TWO_PI)
    # floor() can be off by one when x + pi rounds across a multiple of 2pi;
    # both fixups are exact on the canonical grid.
    wrapped = np.where(wrapped < -PI, wrapped + TWO_PI, wrapped)
    wrapped = np.where(wrapped >= PI, wrapped - TWO_PI, wrapped)
    if np.isscalar(x) or np.ndim(x) == 0:
        return float(wrapped)
    return wrapped


def snap_axis(theta_ax: np.ndarray) -> np.ndarray:
    """Quantize wrapped axis angles onto the 2^-51 grid, keeping [-pi, pi)."""
    snapped = np.round(theta_ax * 2.0 ** 51) * AXIS_GRID
    return np.where(snapped >= PI, -PI, snapped)


def snap_aperture(theta_ap: np.ndarray) -> np.ndarray:
    """Clamp apertures to [0, 2pi] and quantize onto the 2^-50 grid."""
    clamped = np.clip(theta_ap, 0.0, TWO_PI)
    return np.round(clamped * 2.0 ** 50) * APERTURE_GRID


def flip_axis(theta_ax: np.ndarray) -> np.ndarray:
    """Rotate wrapped axis angles by pi, staying in [-pi, pi).

    Uses the single-branch form ``x +- pi`` (never ``wrap(x + pi)``) so the
    operation is exact, and therefore a bitwise involution, on the canonical
    axis grid.
    """
    return np.where(theta_ax < 0.0, theta_ax + PI, theta_ax - PI)


@dataclass(frozen=True)
class ConeBatch:
    """One query region: d per-dimension (axis, aperture) angle pairs.

    Construction canonicalizes: axes are wrapped to [-pi, pi) and apertures
    clamped to [0, 2pi], both snapped to their grids.  An entity (a single
    point on each unit circle) is a cone with aperture identically zero.
    """

    theta_ax: np.ndarray
    theta_ap: np.ndarray

    def __init__(self, theta_ax, theta_ap):
        ax = _as_angle_array(theta_ax, "theta_ax")
        ap = _as_angle_array(theta_ap, "theta_ap")
        if ax.shape != ap.shape:
            raise DomainError(
                f"axis/aperture shape mismatch: {ax.shape} vs {ap.shape}"
            )
        ax = snap_axis(np.atleast_1d(wrap_angle(ax)))
        ap = snap_aperture(np.atleast_1d(ap))
        ax.setflags(write=False)
        ap.setflags(write=False)
        object.__setattr__(self, "theta_ax", ax)
        object.__setattr__(self, "theta_ap", ap)

    @property
    def d(self) -> int:
        return self.theta_ax.shape[-1]

    @classmethod
    def point(cls, theta_ax) -> "ConeBatch":
        """Entity embedding: zero aperture, upper boundary == lower boundary."""
        ax = np.atleast_1d(np.asarray(theta_ax, dtype=np.float64))
        return cls(ax, np.zeros_like(ax))

    def is_point(self) -> bool:
        return bool(np.all(self.theta_ap == 0.0))


@dataclass(frozen=True)
class UnitComplexVec:
    """A vector of unit-modulus complex numbers, stored as (re, im) pairs."""

    re: np.ndarray
    im: np.ndarray

    def __init__(self, re, im):
        re = np.atleast_1d(np.asarray(re, dtype=np.float64))
        im = np.atleast_1d(np.asarray(im, dtype=np.float64))
        if re.shape != im.shape:
            raise DomainError(f"re/im shape mismatch: {re.shape} vs {im.shape}")
        modulus_err = np.abs(re * re + im * im - 1.0)
        if not np.all(np.isfinite(re)) or not np.all(np.isfinite(im)):
            raise DomainError("unit complex vector must be finite")
        if np.any(modulus_err > UNIT_MODULUS_TOL):
            worst = int(np.argmax(modulus_err))
            raise DomainError(
                f"non-unit modulus at index {worst}: |z|^2 = "
                f"{float(re.flat[worst] ** 2 + im.flat[worst] ** 2)!r}"
            )
        re.setflags(write=False)
        im.setflags(write=False)
        object.__setattr__(self, "re", re)
        object.__setattr__(self, "im", im)

    @classmethod
    def from_angle(cls, theta) -> "UnitComplexVec":
        theta = np.asarray(theta, dtype=np.float64)
        return cls(np.cos(theta), np.sin(theta))


def arg(x, y) -> np.ndarray:
    """Angle of the points (x[i], y[i]), wrapped to [-pi, pi).

    Raises ``DegenerateInputError`` (with the first offending index) if any
    point is the zero vector.
    """
    x = np.atleast_1d(np.asarray(x, dtype=np.float64))
    y = np.atleast_1d(np.asarray(y, dtype=np.float64))
    zero = (x == 0.0) & (y == 0.0)
    if np.any(zero):
        raise DegenerateInputError(
            f"zero vector at index {int(np.argmax(zero))}"
        )
    angles = np.arctan2(y, x)
    return np.where(angles >= PI, -PI, angles)


def boundaries(c: ConeBatch) -> tuple[UnitComplexVec, UnitComplexVec]:
    """Counter-clockwise upper and lower boundary vectors of a cone.

    Upper boundary is at axis + aperture/2, lower at axis - aperture/2.
    """
    half_ap = c.theta_ap * 0.5
    upper = c.theta_ax + half_ap
    lower = c.theta_ax - half_ap
    return UnitComplexVec.from_angle(upper), UnitComplexVec.from_angle(lower)


def axis_vector(c: ConeBatch) -> UnitComplexVec:
    """Unit vector along the cone axis; independent of the aperture."""
    return UnitComplexVec.from_angle(c.theta_ax)


def cone_from_boundaries(h_upper: UnitComplexVec, h_lower: UnitComplexVec) -> ConeBatch:
    """Recover the (axis, aperture) form from boundary vectors.

    Identical boundaries decode as aperture 0 (a point), never 2pi; the two
    are indistinguishable in boundary form, which is why the angle form is
    canonical.
    """
    theta_u = arg(h_upper.re, h_upper.im)
    theta_l = arg(h_lower.re, h_lower.im)
    theta_ap = np.mod(theta_u - theta_l, TWO_PI)
    theta_ax = wrap_angle(theta_l + 0.5 * theta_ap)
    return ConeBatch(theta_ax, theta_ap)


@dataclass(frozen=True)
class RelationRotation:
    """A relation's action: per-dimension axis rotation plus aperture delta.

    ``raw_ax`` and ``raw_ap`` are the unconstrained parameter arrays; the
    constrained views are ``theta_ax_r = wrap(raw_ax)`` in [-pi, pi) and
    ``theta_ap_r = 2pi * sigmoid(raw_ap)`` in [0, 2pi], valid for any raw
    values (including the infinite raws produced by ``from_angles`` for
    exact endpoint apertures).
    """

    raw_ax: np.ndarray
    raw_ap: np.ndarray

    def __init__(self, raw_ax, raw_ap):
        raw_ax = np.atleast_1d(np.asarray(raw_ax, dtype=np.float64))
        raw_ap = np.atleast_1d(np.asarray(raw_ap, dtype=np.float64))
        if raw_ax.shape != raw_ap.shape:
            raise DomainError(
                f"raw_ax/raw_ap shape mismatch: {raw_ax.shape} vs {raw_ap.shape}"
            )
        if not np.all(np.isfinite(raw_ax)):
            raise DomainError("raw_ax must be finite")
        if np.any(np.isnan(raw_ap)):
            raise DomainError("raw_ap must not be NaN")
        raw_ax.setflags(write=False)
        raw_ap.setflags(write=False)
        object.__setattr__(self, "raw_ax", raw_ax)
        object.__setattr__(self, "raw_ap", raw_ap)

    @property
    def theta_ax_r(self) -> np.ndarray:
        return snap_axis(np.atleast_1d(wrap_angle(self.raw_ax)))

    @property
    def theta_ap_r(self) -> np.ndarray:
        return TWO_PI * expit(self.raw_ap)

    @property
    def d(self) -> int:
        return self.raw_ax.shape[-1]

    @classmethod
    def from_angles(cls, theta_ax_r, theta_ap_r) -> "RelationRotation":
        """Build a rotation from constrained angles.

        Apertures of exactly 0 or 2pi map to infinite raws so the
        constrained view reproduces the endpoint exactly.
        """
        ax = np.atleast_1d(_as_angle_array(theta_ax_r, "theta_ax_r"))
        ap = np.atleast_1d(_as_angle_array(theta_ap_r, "theta_ap_r"))
        if np.any(ap < 0.0) or np.any(ap > TWO_PI):
            raise DomainError(f"theta_ap_r outside [0, 2pi]: {ap}")
        with np.errstate(divide="ignore"):
            raw_ap = logit(ap / TWO_PI)
        return cls(wrap_angle(ax), raw_ap)

    @classmethod
    def identity(cls, d: int) -> "RelationRotation":
        return cls.from_angles(np.zeros(d), np.zeros(d))
