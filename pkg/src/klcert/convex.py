"""Shared vocabulary for finite-dimensional convex optimization.

Objectives are bundles of oracles (value, least-norm subgradient, proximal
map, gradient) acting on 1-D float64 arrays.  Indicator-type objectives take
the value +inf; infinities are kept out of float arithmetic by the tagged
:class:`ExtReal`.  Projectable convex sets (balls, halfspaces, affine sets
and their intersections) live here as well, since they back both feasibility
objectives and exact distance computations.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Optional, Sequence

import numpy as np

Array = np.ndarray


class UnsupportedOracleError(RuntimeError):
    """Raised when an operation requires an oracle the objective lacks."""


def as_point(x, dimension: Optional[int] = None) -> Array:
    """Validate a point: 1-D float64 array with finite entries."""
    arr = np.atleast_1d(np.asarray(x, dtype=float))
    if arr.ndim != 1:
        raise ValueError(f"point must be 1-D, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("point has non-finite entries")
    if dimension is not None and arr.shape[0] != dimension:
        raise ValueError(
            f"dimension mismatch: expected {dimension}, got {arr.shape[0]}"
        )
    return arr


# ---------------------------------------------------------------------------
# extended reals
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ExtReal:
    """A value in (-inf, +inf].

    +inf is an explicit tag, never an IEEE float operand, so differences like
    f(x) - min f cannot silently produce NaN.
    """

    value: float = 0.0
    infinite: bool = False

    def __post_init__(self):
        if not self.infinite and not math.isfinite(self.value):
            raise ValueError("finite ExtReal built from a non-finite float")

    @property
    def is_finite(self) -> bool:
        return not self.infinite

    def finite_value(self) -> float:
        if self.infinite:
            raise ValueError("ExtReal is +inf; no finite value available")
        return self.value

    def as_float(self) -> float:
        """Collapse to a float for record keeping only (never arithmetic)."""
        return math.inf if self.infinite else self.value

    def __sub__(self, other: float) -> "ExtReal":
        if self.infinite:
            return EXT_INF
        return ExtReal(self.value - float(other))

    def _cmp_key(self) -> float:
        # Used for ordering only; the tag keeps +inf out of arithmetic.
        return math.inf if self.infinite else self.value

    def __lt__(self, other) -> bool:
        o = other._cmp_key() if isinstance(other, ExtReal) else float(other)
        return self._cmp_key() < o

    def __le__(self, other) -> bool:
        o = other._cmp_key() if isinstance(other, ExtReal) else float(other)
        return self._cmp_key() <= o

    def __gt__(self, other) -> bool:
        return not self.__le__(other)

    def __ge__(self, other) -> bool:
        return not self.__lt__(other)


EXT_INF = ExtReal(0.0, infinite=True)


# ---------------------------------------------------------------------------
# projectable convex sets
# ---------------------------------------------------------------------------
#
# Each set implements project(x), distance(x) and contains(x, tol); project
# and distance broadcast over a leading batch axis.


@dataclass(frozen=True)
class Ball:
    """Euclidean ball {x : ||x - center|| <= radius}."""

    center: Array
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "center", as_point(self.center))
        if self.radius < 0:
            raise ValueError("radius must be nonnegative")

    def project(self, x: Array) -> Array:
        x = np.asarray(x, dtype=float)
        d = x - self.center
        nrm = np.linalg.norm(d, axis=-1, keepdims=True)
        scale = np.where(nrm > self.radius, self.radius / np.maximum(nrm, 1e-300), 1.0)
        return self.center + scale * d

    def distance(self, x: Array) -> float | Array:
        x = np.asarray(x, dtype=float)
        nrm = np.linalg.norm(x - self.center, axis=-1)
        return np.maximum(nrm - self.radius, 0.0)

    def contains(self, x: Array, tol: float = 1e-9):
        return self.distance(x) <= tol

    def boundary_normal(self, x: Array) -> Array:
        d = x - self.center
        n = np.linalg.norm(d)
        if n == 0.0:
            raise ValueError("normal undefined at the center")
        return d / n

    def to_dict(self) -> dict:
        return {"kind": "ball", "center": self.center.tolist(), "radius": self.radius}


@dataclass(frozen=True)
class Halfspace:
    """Halfspace {x : <normal, x> <= offset}."""

    normal: Array
    offset: float

    def __post_init__(self):
        object.__setattr__(self, "normal", as_point(self.normal))
        if np.linalg.norm(self.normal) == 0.0:
            raise ValueError("normal must be nonzero")

    def project(self, x: Array) -> Array:
        x = np.asarray(x, dtype=float)
        slack = x @ self.normal - self.offset
        excess = np.maximum(slack, 0.0) / (self.normal @ self.normal)
        return x - excess[..., None] * self.normal

    def distance(self, x: Array) -> float | Array:
        x = np.asarray(x, dtype=float)
        slack = x @ self.normal - self.offset
        return np.maximum(slack, 0.0) / np.linalg.norm(self.normal)

    def contains(self, x: Array, tol: float = 1e-9):
        return self.distance(x) <= tol

    def boundary_normal(self, x: Array) -> Array:
        return self.normal / np.linalg.norm(self.normal)

    def to_dict(self) -> dict:
        return {
            "kind": "halfspace",
            "normal": self.normal.tolist(),
            "offset": self.offset,
        }


@dataclass(frozen=True)
class AffineSet:
    """Affine set {x : E x = e}; projection via the pseudoinverse."""

    matrix: Array
    rhs: Array

    def __post_init__(self):
        E = np.atleast_2d(np.asarray(self.matrix, dtype=float))
        e = np.atleast_1d(np.asarray(self.rhs, dtype=float))
        if E.shape[0] != e.shape[0]:
            raise ValueError("matrix/rhs row mismatch")
        object.__setattr__(self, "matrix", E)
        object.__setattr__(self, "rhs", e)

    @cached_property
    def _pinv(self) -> Array:
        return np.linalg.pinv(self.matrix)

    def project(self, x: Array) -> Array:
        x = np.asarray(x, dtype=float)
        resid = x @ self.matrix.T - self.rhs
        return x - resid @ self._pinv.T

    def distance(self, x: Array) -> float | Array:
        x = np.asarray(x, dtype=float)
        return np.linalg.norm(x - self.project(x), axis=-1)

    def contains(self, x: Array, tol: float = 1e-9):
        return self.distance(x) <= tol

    def to_dict(self) -> dict:
        return {
            "kind": "affine",
            "matrix": self.matrix.tolist(),
            "rhs": self.rhs.tolist(),
        }


@dataclass(frozen=True)
class SingletonSet:
    """A single point, the degenerate convex set."""

    point: Array

    def __post_init__(self):
        object.__setattr__(self, "point", as_point(self.point))

    def project(self, x: Array) -> Array:
        x = np.asarray(x, dtype=float)
        return np.broadcast_to(self.point, x.shape).copy()

    def distance(self, x: Array) -> float | Array:
        x = np.asarray(x, dtype=float)
        return np.linalg.norm(x - self.point, axis=-1)

    def contains(self, x: Array, tol: float = 1e-9):
        return self.distance(x) <= tol

    def to_dict(self) -> dict:
        return {"kind": "singleton", "point": self.point.tolist()}


def dykstra_projection(
    sets: Sequence,
    x: Array,
    tol: float = 1e-12,
    max_cycles: int = 5000,
) -> Array:
    """Project onto the intersection of convex sets with Dykstra's scheme.

    Plain cyclic projections converge to *some* intersection point; the
    Dykstra correction terms are what make the limit the nearest one, which
    is required whenever the returned point feeds an exact distance.
    Broadcasts over a leading batch axis.
    """
    if not sets:
        raise ValueError("need at least one set")
    y = np.asarray(x, dtype=float).copy()
    increments = [np.zeros_like(y) for _ in sets]
    for _ in range(max_cycles):
        start = y.copy()
        for i, s in enumerate(sets):
            target = y + increments[i]
            z = s.project(target)
            increments[i] = target - z
            y = z
        move = np.max(np.linalg.norm(y - start, axis=-1))
        violation = max(np.max(np.atleast_1d(s.distance(y))) for s in sets)
        if move <= tol and violation <= 10 * tol:
            break
    return y


@dataclass(frozen=True)
class IntersectionSet:
    """Intersection of projectable convex sets; projection via Dykstra."""

    sets: tuple
    tol: float = 1e-12
    max_cycles: int = 5000

    def __post_init__(self):
        object.__setattr__(self, "sets", tuple(self.sets))

    def project(self, x: Array) -> Array:
        return dykstra_projection(self.sets, x, self.tol, self.max_cycles)

    def distance(self, x: Array) -> float | Array:
        x = np.asarray(x, dtype=float)
        return np.linalg.norm(x - self.project(x), axis=-1)

    def contains(self, x: Array, tol: float = 1e-9):
        result = None
        for s in self.sets:
            c = np.atleast_1d(s.contains(x, tol))
            result = c if result is None else (result & c)
        if result.size == 1:
            return bool(result[0])
        return result

    def to_dict(self) -> dict:
        return {"kind": "intersection", "sets": [s.to_dict() for s in self.sets]}


_SET_KINDS = {}


def set_from_dict(data: dict):
    kind = data["kind"]
    if kind == "ball":
        return Ball(np.asarray(data["center"], dtype=float), float(data["radius"]))
    if kind == "halfspace":
        return Halfspace(np.asarray(data["normal"], dtype=float), float(data["offset"]))
    if kind == "affine":
        return AffineSet(np.asarray(data["matrix"], dtype=float),
                         np.asarray(data["rhs"], dtype=float))
    if kind == "singleton":
        return SingletonSet(np.asarray(data["point"], dtype=float))
    if kind == "intersection":
        return IntersectionSet(tuple(set_from_dict(d) for d in data["sets"]))
    raise ValueError(f"unknown set kind {kind!r}")


# ---------------------------------------------------------------------------
# objectives
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ConvexObjective:
    """A proper closed convex function given through oracles.

    value_fn returns a float for finite values or EXT_INF for points outside
    the domain.  subgradient_fn returns the least-norm element of the
    subdifferential, or None when the subdifferential is empty.  prox_fn maps
    (x, step) to argmin_z f(z) + ||z - x||^2 / (2 step).  The minimum value is
    stored, not recomputed: tiny instances carry an exact or brute-force
    minimum so that value gaps stay trustworthy at high accuracy.
    """

    dimension: int
    value_fn: Callable[[Array], float | ExtReal]
    min_value: float = 0.0
    subgradient_fn: Optional[Callable[[Array], Optional[Array]]] = None
    prox_fn: Optional[Callable[[Array, float], Array]] = None
    gradient_fn: Optional[Callable[[Array], Array]] = None
    lipschitz: Optional[float] = None
    name: str = ""


def evaluate(obj: ConvexObjective, x) -> ExtReal:
    """Objective value at x as an extended real."""
    x = as_point(x, obj.dimension)
    v = obj.value_fn(x)
    if isinstance(v, ExtReal):
        return v
    return ExtReal(float(v))


def value_gap(obj: ConvexObjective, x) -> ExtReal:
    """f(x) - min f, +inf outside the domain."""
    return evaluate(obj, x) - obj.min_value


def min_norm_subgradient(obj: ConvexObjective, x) -> Optional[Array]:
    """Least-norm subgradient at x, or None when x is outside dom(subdiff)."""
    x = as_point(x, obj.dimension)
    if obj.subgradient_fn is not None:
        return obj.subgradient_fn(x)
    if obj.gradient_fn is not None:
        return obj.gradient_fn(x)
    raise UnsupportedOracleError(
        f"objective {obj.name or '<anonymous>'} provides no subgradient oracle"
    )


def subgradient_norm(obj: ConvexObjective, x) -> float:
    """||least-norm subgradient||; +inf sentinel outside dom(subdiff)."""
    g = min_norm_subgradient(obj, x)
    if g is None:
        return math.inf
    return float(np.linalg.norm(g))


def prox(obj: ConvexObjective, x, step: float) -> Array:
    """Proximal map of obj at x with the given positive step."""
    x = as_point(x, obj.dimension)
    if step <= 0:
        raise ValueError("prox step must be positive")
    if obj.prox_fn is None:
        raise UnsupportedOracleError(
            f"objective {obj.name or '<anonymous>'} provides no prox oracle"
        )
    return obj.prox_fn(x, float(step))


@dataclass(frozen=True)
class CompositeObjective:
    """Sum h + g with h smooth (gradient, Lipschitz constant) and g prox-friendly."""

    smooth: ConvexObjective
    nonsmooth: ConvexObjective

    def __post_init__(self):
        if self.smooth.dimension != self.nonsmooth.dimension:
            raise ValueError("smooth/nonsmooth dimension mismatch")
        if self.smooth.gradient_fn is None:
            raise ValueError("smooth part needs a gradient oracle")
        if self.smooth.lipschitz is None or self.smooth.lipschitz < 0:
            raise ValueError("smooth part needs a nonnegative Lipschitz constant")
        if self.nonsmooth.prox_fn is None:
            raise ValueError("nonsmooth part needs a prox oracle")

    @property
    def dimension(self) -> int:
        return self.smooth.dimension

    @property
    def lipschitz(self) -> float:
        return float(self.smooth.lipschitz)

    def value(self, x) -> ExtReal:
        v = evaluate(self.nonsmooth, x)
        if not v.is_finite:
            return EXT_INF
        return ExtReal(v.value + evaluate(self.smooth, x).finite_value())


# ---------------------------------------------------------------------------
# standard building blocks
# ---------------------------------------------------------------------------


def quadratic_objective(center, weight: float = 0.5, min_value: float = 0.0) -> ConvexObjective:
    """f(x) = weight * ||x - center||^2 with exact oracles."""
    c = as_point(center)
    w = float(weight)
    if w <= 0:
        raise ValueError("weight must be positive")

    def val(x):
        d = x - c
        return w * float(d @ d) + min_value

    def grad(x):
        return 2.0 * w * (x - c)

    def prx(x, step):
        return (x + 2.0 * w * step * c) / (1.0 + 2.0 * w * step)

    return ConvexObjective(
        dimension=c.shape[0], value_fn=val, min_value=min_value,
        gradient_fn=grad, subgradient_fn=grad, prox_fn=prx,
        lipschitz=2.0 * w, name="quadratic",
    )


def soft_threshold(x: Array, threshold: float) -> Array:
    """Componentwise shrinkage, the prox of threshold * ||.||_1."""
    return np.sign(x) * np.maximum(np.abs(x) - threshold, 0.0)


def scaled_l1(dimension: int, weight: float) -> ConvexObjective:
    """f(x) = weight * ||x||_1."""
    w = float(weight)
    if w < 0:
        raise ValueError("weight must be nonnegative")

    def val(x):
        return w * float(np.abs(x).sum())

    def subgrad(x):
        # Least-norm element: weight*sign on the support, soft part off it.
        out = np.where(x != 0.0, w * np.sign(x), 0.0)
        return out

    def prx(x, step):
        return soft_threshold(x, w * step)

    return ConvexObjective(
        dimension=dimension, value_fn=val, min_value=0.0,
        subgradient_fn=subgrad, prox_fn=prx, name="l1",
    )


def indicator(set_, dimension: int) -> ConvexObjective:
    """Indicator of a projectable convex set; prox is the projection."""

    def val(x):
        return 0.0 if bool(set_.contains(x, tol=1e-12)) else EXT_INF

    def subgrad(x):
        # 0 is always the least-norm element of the normal cone on the set.
        if bool(set_.contains(x, tol=1e-12)):
            return np.zeros(dimension)
        return None

    def prx(x, step):
        return set_.project(x)

    return ConvexObjective(
        dimension=dimension, value_fn=val, min_value=0.0,
        subgradient_fn=subgrad, prox_fn=prx, name="indicator",
    )


def least_squares(A, y) -> ConvexObjective:
    """h(x) = 0.5 * ||A x - y||^2; Lipschitz constant is ||A||_2^2."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    y = np.atleast_1d(np.asarray(y, dtype=float))
    if A.shape[0] != y.shape[0]:
        raise ValueError("A/y row mismatch")
    spectral = float(np.linalg.norm(A, 2)) if A.size else 0.0

    def val(x):
        r = A @ x - y
        return 0.5 * float(r @ r)

    def grad(x):
        return A.T @ (A @ x - y)

    return ConvexObjective(
        dimension=A.shape[1], value_fn=val, min_value=0.0,
        gradient_fn=grad, subgradient_fn=grad,
        lipschitz=spectral ** 2, name="least-squares",
    )


def zero_objective(dimension: int) -> ConvexObjective:
    """The zero function: smooth with L = 0 and identity prox."""
    return ConvexObjective(
        dimension=dimension,
        value_fn=lambda x: 0.0,
        min_value=0.0,
        gradient_fn=lambda x: np.zeros(dimension),
        subgradient_fn=lambda x: np.zeros(dimension),
        prox_fn=lambda x, step: x.copy(),
        lipschitz=0.0,
        name="zero",
    )


def lasso_objective(A, y, mu: float, min_value: float = 0.0) -> ConvexObjective:
    """f(x) = 0.5 ||A x - y||^2 + mu ||x||_1 with a least-norm subgradient oracle."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    y = np.atleast_1d(np.asarray(y, dtype=float))
    mu = float(mu)
    if mu <= 0:
        raise ValueError("mu must be positive")

    def val(x):
        r = A @ x - y
        return 0.5 * float(r @ r) + mu * float(np.abs(x).sum())

    def subgrad(x):
        g = A.T @ (A @ x - y)
        out = np.where(
            x != 0.0,
            g + mu * np.sign(x),
            np.sign(g) * np.maximum(np.abs(g) - mu, 0.0),
        )
        return out

    return ConvexObjective(
        dimension=A.shape[1], value_fn=val, min_value=min_value,
        subgradient_fn=subgrad, name="lasso",
    )


def lasso_composite(A, y, mu: float) -> CompositeObjective:
    """Least-squares plus scaled l1, the standard composite split."""
    h = least_squares(A, y)
    g = scaled_l1(h.dimension, mu)
    return CompositeObjective(smooth=h, nonsmooth=g)


def feasibility_objective(sets: Sequence, weights, min_value: float = 0.0) -> ConvexObjective:
    """f(x) = 0.5 * sum_i w_i dist^2(x, C_i); gradient is x - sum_i w_i P_i(x)."""
    sets = tuple(sets)
    w = np.atleast_1d(np.asarray(weights, dtype=float))
    if len(sets) != w.shape[0]:
        raise ValueError("one weight per set required")
    if np.any(w <= 0) or abs(w.sum() - 1.0) > 1e-12:
        raise ValueError("weights must be positive and sum to one")
    dim = None
    for s in sets:
        d = getattr(s, "center", getattr(s, "normal", getattr(s, "point", None)))
        if d is not None:
            dim = len(d)
            break
    if dim is None:
        raise ValueError("could not infer dimension from the sets")

    def val(x):
        return 0.5 * float(sum(wi * float(np.asarray(s.distance(x)) ** 2)
                               for wi, s in zip(w, sets)))

    def grad(x):
        out = np.zeros_like(x)
        for wi, s in zip(w, sets):
            out += wi * (x - s.project(x))
        return out

    return ConvexObjective(
        dimension=dim, value_fn=val, min_value=min_value,
        gradient_fn=grad, subgradient_fn=grad, lipschitz=1.0,
        name="feasibility",
    )


def half_squared_distance(set_, dimension: int) -> ConvexObjective:
    """h(x) = 0.5 dist^2(x, C): smooth with gradient x - P_C(x) and L = 1."""

    def val(x):
        return 0.5 * float(np.asarray(set_.distance(x)) ** 2)

    def grad(x):
        return x - set_.project(x)

    return ConvexObjective(
        dimension=dimension, value_fn=val, min_value=0.0,
        gradient_fn=grad, subgradient_fn=grad, lipschitz=1.0,
        name="half-squared-distance",
    )


def alternating_objective(c1, c2, dimension: int) -> ConvexObjective:
    """g(x) = indicator(C1) + 0.5 dist^2(x, C2).

    The least-norm subgradient needs the normal cone of C1, so C1 must be a
    Ball or a Halfspace (the only boundary geometries exposed here).
    """

    def val(x):
        if not bool(c1.contains(x, tol=1e-12)):
            return EXT_INF
        return 0.5 * float(np.asarray(c2.distance(x)) ** 2)

    def subgrad(x):
        if not bool(c1.contains(x, tol=1e-12)):
            return None
        v = x - c2.project(x)
        # distance(x) is zero on all of C1, so detect the boundary by slack
        if isinstance(c1, Ball):
            slack = c1.radius - np.linalg.norm(x - c1.center)
        elif isinstance(c1, Halfspace):
            slack = (c1.offset - x @ c1.normal) / np.linalg.norm(c1.normal)
        else:
            raise UnsupportedOracleError(
                "normal cone available only for Ball or Halfspace C1"
            )
        if slack > 1e-12:
            return v
        n = c1.boundary_normal(x)
        t = max(0.0, -float(v @ n))
        return v + t * n

    return ConvexObjective(
        dimension=dimension, value_fn=val, min_value=0.0,
        subgradient_fn=subgrad, name="alternating",
    )
