"""Reproducible test-problem generators with trustworthy minimum values.

Every generated instance is desk-scale by design: small enough that the
minimum value can be pinned down independently of the solver under test
(dense grid plus a local polish for l1-regularized least squares, exact
geometry for feasibility and quadratic families).  Stored minima are always
values of feasible points, so they overestimate the true minimum — the safe
direction for every certified inequality downstream.
"""

from __future__ import annotations

import json
import math
import os
import tempfile
from dataclasses import dataclass
from typing import Optional

import numpy as np

from klcert.convex import (
    Array,
    Ball,
    Halfspace,
    as_point,
    soft_threshold,
)
from klcert.error_bounds import (
    FeasibilityInstance,
    LassoInstance,
    LinearSystemPair,
)

GRID_RESOLUTION = {1: 1e-3, 2: 1e-3, 3: 1e-2}


# ---------------------------------------------------------------------------
# l1-regularized least squares
# ---------------------------------------------------------------------------


def lasso_value(A: Array, y: Array, mu: float, x: Array) -> float:
    r = A @ x - y
    return 0.5 * float(r @ r) + mu * float(np.abs(x).sum())


def lasso_grid_minimum(A: Array, y: Array, mu: float,
                       box_radius: Optional[float] = None,
                       resolution: Optional[float] = None
                       ) -> tuple[Array, float]:
    """Dense-grid minimizer over the box certain to contain argmin.

    f(0) = ||y||^2 / 2 forces ||argmin||_1 <= ||y||^2 / (2 mu), so the box
    radius defaults to that bound.  Only for n <= 3.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    y = np.atleast_1d(np.asarray(y, dtype=float))
    n = A.shape[1]
    if n > 3:
        raise ValueError("grid oracle is limited to n <= 3")
    if box_radius is None:
        box_radius = float(y @ y) / (2.0 * mu)
    if resolution is None:
        resolution = GRID_RESOLUTION[n]
    axis = np.arange(-box_radius, box_radius + 0.5 * resolution, resolution)
    if n == 1:
        inner = np.zeros((1, 0))
    else:
        mesh = np.meshgrid(*([axis] * (n - 1)), indexing="ij")
        inner = np.stack(mesh, axis=-1).reshape(-1, n - 1)
    best_v = math.inf
    best_x = np.zeros(n)
    pts = np.empty((inner.shape[0], n))
    pts[:, 1:] = inner
    for first in axis:
        pts[:, 0] = first
        r = pts @ A.T - y
        vals = 0.5 * np.einsum("ij,ij->i", r, r) + mu * np.abs(pts).sum(axis=1)
        i = int(np.argmin(vals))
        if vals[i] < best_v:
            best_v = float(vals[i])
            best_x = pts[i].copy()
    return best_x, best_v


def lasso_polish(A: Array, y: Array, mu: float, x_start,
                 max_iters: int = 200000) -> Array:
    """Drive a point to a proximal-gradient fixed point of the l1 problem.

    Iterates x <- soft_threshold(x - grad/L, mu/L) until the update stops
    moving in double precision; convexity makes any fixed point a global
    minimizer, so the start only affects how long this takes.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    y = np.atleast_1d(np.asarray(y, dtype=float))
    x = as_point(x_start, A.shape[1]).copy()
    L = float(np.linalg.norm(A, 2)) ** 2
    if L == 0.0:
        return np.zeros_like(x)
    lam = 1.0 / L
    AtA = A.T @ A
    Aty = A.T @ y
    for _ in range(max_iters):
        xn = soft_threshold(x - lam * (AtA @ x - Aty), lam * mu)
        if np.array_equal(xn, x):
            break
        if np.max(np.abs(xn - x)) < 1e-17 * max(1.0, float(np.max(np.abs(x)))):
            x = xn
            break
        x = xn
    return x


def lasso_coordinate_descent(A: Array, y: Array, mu: float, x0,
                             sweeps: int = 100000,
                             tol: float = 1e-16) -> Array:
    """Exact cyclic coordinate minimization of the l1 problem.

    Each coordinate update is a closed-form soft threshold, so the sweep
    limit only matters for ill-conditioned instances.  Used as a solver in
    its own right and as an independent cross-check of the grid+polish
    reference minima.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    y = np.atleast_1d(np.asarray(y, dtype=float))
    x = as_point(x0, A.shape[1]).copy()
    col_sq = np.einsum("ij,ij->j", A, A)
    for _ in range(sweeps):
        r = y - A @ x
        delta = 0.0
        for j in range(x.shape[0]):
            if col_sq[j] == 0.0:
                continue
            rho = float(A[:, j] @ r) + col_sq[j] * x[j]
            new = math.copysign(max(abs(rho) - mu, 0.0), rho) / col_sq[j]
            if new != x[j]:
                r = r - A[:, j] * (new - x[j])
                delta = max(delta, abs(new - x[j]))
                x[j] = new
        if delta <= tol * max(1.0, float(np.max(np.abs(x)))):
            break
    return x


def lasso_reference_minimum(A: Array, y: Array, mu: float,
                            use_grid: bool = True) -> tuple[Array, float]:
    """Brute-force minimizer: dense grid (n <= 3) seeding a polish to a
    proximal fixed point.  Above n = 3 the polish runs from the origin,
    which convexity makes equally valid, just not grid-certified."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    n = A.shape[1]
    if use_grid and n <= 3:
        seed_point, _ = lasso_grid_minimum(A, y, mu)
    else:
        seed_point = np.zeros(n)
    xstar = lasso_polish(A, y, mu, seed_point)
    return xstar, lasso_value(np.atleast_2d(A), np.atleast_1d(y), mu, xstar)


def generate_lasso_instance(n: int = 2, m: Optional[int] = None,
                            mu: Optional[float] = None, seed: int = 0
                            ) -> "GeneratedInstance":
    """Random well-posed instance with a reference minimizer.

    m >= n keeps the quadratic part strictly convex (unique minimizer, so
    the solution set is an honest singleton); moderate ||y|| and mu keep the
    grid box small enough for the n <= 3 reference oracle.
    """
    if n < 1:
        raise ValueError("need n >= 1")
    if m is None:
        m = n + 1
    if m < n:
        raise ValueError("need m >= n so the minimizer is unique")
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((m, n))
    A /= max(1.0, float(np.linalg.norm(A, 2)))
    x_true = rng.uniform(-0.5, 0.5, n)
    y = A @ x_true + 0.1 * rng.standard_normal(m)
    norm_y = float(np.linalg.norm(y))
    target = rng.uniform(0.8, 1.2)
    if norm_y > 0:
        y *= target / norm_y
    if mu is None:
        mu = float(rng.uniform(0.45, 0.9) if n <= 2 else rng.uniform(0.6, 0.9))
    x0 = rng.uniform(-1.0, 1.0, n)
    xstar, min_value = lasso_reference_minimum(A, y, mu)
    payload = {
        "A": A.tolist(),
        "y": y.tolist(),
        "mu": mu,
        "x0": x0.tolist(),
        "minimizer": xstar.tolist(),
        "min_value": min_value,
        "grid_certified": n <= 3,
    }
    return GeneratedInstance(family="lasso", seed=seed, payload=payload)


def lasso_from_payload(payload: dict) -> tuple[LassoInstance, float, Array]:
    inst = LassoInstance(
        A=np.asarray(payload["A"], dtype=float),
        y=np.asarray(payload["y"], dtype=float),
        mu=float(payload["mu"]),
        x0=np.asarray(payload["x0"], dtype=float),
    )
    return inst, float(payload["min_value"]), np.asarray(payload["minimizer"],
                                                         dtype=float)


# ---------------------------------------------------------------------------
# convex feasibility
# ---------------------------------------------------------------------------


def generate_feasibility_instance(dim: int = 2, num_sets: int = 2,
                                  seed: int = 0,
                                  kinds: tuple = ("ball", "halfspace"),
                                  geometry: str = "generic"
                                  ) -> "GeneratedInstance":
    """Balls/halfspaces built around a declared inner ball B(xbar, R).

    Construction guarantees B(xbar, R) sits inside every set with slack; the
    start is pushed far enough out that the feasibility objective is
    strictly positive at x0 (a zero initial gap has nothing to certify).

    geometry="lens" instead builds two large balls facing each other whose
    boundaries meet at a shallow wedge, with the start beside the wedge rim
    — deep overlaps make alternating projections finish in a step or two,
    while the lens makes them crawl, which is the regime worth watching.
    """
    if geometry == "lens":
        return _lens_feasibility_instance(dim, seed)
    if geometry != "generic":
        raise ValueError(f"unknown geometry {geometry!r}")
    if num_sets < 2:
        raise ValueError("need at least two sets")
    rng = np.random.default_rng(seed)
    # If one set swallows the others (P_1(x) always lands in C_2, say) no
    # start gives the alternating variant a positive gap; redraw the whole
    # geometry rather than fight it.
    for _ in range(64):
        xbar = rng.uniform(-1.0, 1.0, dim)
        R = float(rng.uniform(0.3, 0.8))
        sets = []
        for i in range(num_sets):
            kind = kinds[int(rng.integers(len(kinds)))]
            slack = float(rng.uniform(0.05, 0.5))
            if kind == "ball":
                direction = rng.standard_normal(dim)
                direction /= max(float(np.linalg.norm(direction)), 1e-12)
                shift = float(rng.uniform(0.0, 1.0))
                center = xbar + shift * direction
                sets.append(Ball(center, shift + R + slack))
            else:
                normal = rng.standard_normal(dim)
                normal /= max(float(np.linalg.norm(normal)), 1e-12)
                sets.append(Halfspace(normal, float(normal @ xbar) + R + slack))
        w = rng.uniform(0.5, 1.5, num_sets)
        w /= w.sum()
        inst = FeasibilityInstance(sets=tuple(sets), xbar=xbar, R=R, weights=w)

        x0 = None
        for _ in range(64):
            direction = rng.standard_normal(dim)
            direction /= max(float(np.linalg.norm(direction)), 1e-12)
            t = float(rng.uniform(1.5 * R, 4.0 * R))
            candidate = xbar + t * direction
            # Barycentric needs a positive objective at x0; alternating needs
            # a positive distance to the second set after landing in the
            # first.
            worst = max(float(np.atleast_1d(s.distance(candidate))[0])
                        for s in sets)
            dist_second = float(np.atleast_1d(sets[1].distance(
                sets[0].project(candidate)))[0])
            if worst > 1e-3 and dist_second > 1e-3:
                x0 = candidate
                break
        if x0 is not None:
            payload = {"instance": inst.to_dict(), "x0": x0.tolist()}
            return GeneratedInstance(family="feasibility", seed=seed,
                                     payload=payload)
    raise RuntimeError("could not place a start with a positive gap")


def _lens_feasibility_instance(dim: int, seed: int) -> "GeneratedInstance":
    """Two balls of radius a + R centered at xbar -/+ a e: both contain
    B(xbar, R) tangentially, and for a >> R their boundaries cross at a
    wedge of half-angle about sqrt(2 R / a).  Starting beside the wedge rim
    sends alternating projections zigzagging toward the vertex."""
    rng = np.random.default_rng(seed)
    xbar = rng.uniform(-1.0, 1.0, dim)
    R = float(rng.uniform(0.05, 0.12))
    a = R * float(rng.uniform(20.0, 40.0))
    e = rng.standard_normal(dim)
    e /= max(float(np.linalg.norm(e)), 1e-12)
    sets = (Ball(xbar - a * e, a + R), Ball(xbar + a * e, a + R))
    w = rng.uniform(0.5, 1.5, 2)
    inst = FeasibilityInstance(sets=sets, xbar=xbar, R=R,
                               weights=w / w.sum())
    f = rng.standard_normal(dim)
    f -= (f @ e) * e
    f /= max(float(np.linalg.norm(f)), 1e-12)
    rim = math.sqrt(2.0 * a * R + R * R)  # transverse rim radius
    x0 = xbar + (rim + R * float(rng.uniform(0.5, 1.5))) * f
    payload = {"instance": inst.to_dict(), "x0": x0.tolist()}
    return GeneratedInstance(family="feasibility", seed=seed, payload=payload)


def feasibility_from_payload(payload: dict) -> tuple[FeasibilityInstance, Array]:
    inst = FeasibilityInstance.from_dict(payload["instance"])
    return inst, np.asarray(payload["x0"], dtype=float)


def tight_quadratic_instance(dim: int = 2, seed: int = 0) -> "GeneratedInstance":
    """Two copies of one ball: f = 0.5 dist(., C)^2, whose quadratic growth
    constant is exactly 1.  The matching hand certificate has zero margin
    everywhere, so any inflation of its constant must flip the sampling
    checks — the canonical falsification probe."""
    rng = np.random.default_rng(seed)
    center = rng.uniform(-1.0, 1.0, dim)
    radius = float(rng.uniform(0.4, 1.0))
    direction = rng.standard_normal(dim)
    direction /= max(float(np.linalg.norm(direction)), 1e-12)
    x0 = center + radius * float(rng.uniform(1.5, 3.0)) * direction
    ball = Ball(center, radius)
    inst = FeasibilityInstance(sets=(ball, ball), xbar=center, R=radius,
                               weights=np.array([0.5, 0.5]))
    payload = {"instance": inst.to_dict(), "x0": x0.tolist(),
               "growth_constant": 1.0}
    return GeneratedInstance(family="tight-quadratic", seed=seed,
                             payload=payload)


# ---------------------------------------------------------------------------
# uniformly convex quadratics
# ---------------------------------------------------------------------------


def generate_uniformly_convex_instance(n: int = 3,
                                       weight: Optional[float] = None,
                                       seed: int = 0) -> "GeneratedInstance":
    """f(x) = w ||x - center||^2: 2-uniformly convex with modulus 2w and an
    exact known minimizer."""
    rng = np.random.default_rng(seed)
    center = rng.uniform(-1.0, 1.0, n)
    if weight is None:
        weight = float(rng.uniform(0.5, 2.0))
    direction = rng.standard_normal(n)
    direction /= max(float(np.linalg.norm(direction)), 1e-12)
    x0 = center + float(rng.uniform(0.5, 2.0)) * direction
    payload = {
        "center": center.tolist(),
        "weight": weight,
        "x0": x0.tolist(),
        "min_value": 0.0,
    }
    return GeneratedInstance(family="uniformly-convex", seed=seed,
                             payload=payload)


# ---------------------------------------------------------------------------
# random polyhedral pairs (Hoffman-bound cross-checks)
# ---------------------------------------------------------------------------


def generate_linear_system_pair(dim: int = 3, num_ineq: int = 3,
                                num_eq: int = 1, seed: int = 0
                                ) -> LinearSystemPair:
    """Random feasible pair: witness first, constraints placed around it."""
    if not (1 <= num_eq <= dim):
        raise ValueError("need 1 <= num_eq <= dim")
    rng = np.random.default_rng(seed)
    witness = rng.uniform(-1.0, 1.0, dim)
    E = rng.standard_normal((num_eq, dim))
    e = E @ witness
    A = rng.standard_normal((num_ineq, dim))
    a = A @ witness + rng.uniform(0.1, 1.0, num_ineq)
    return LinearSystemPair(A=A, a=a, E=E, e=e, witness=witness)


# ---------------------------------------------------------------------------
# serialization wrapper
# ---------------------------------------------------------------------------


FAMILIES = ("lasso", "feasibility", "uniformly-convex", "tight-quadratic")


@dataclass(frozen=True)
class GeneratedInstance:
    family: str
    seed: int
    payload: dict

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown family {self.family!r}")

    def to_dict(self) -> dict:
        return {
            "schema_version": 1,
            "family": self.family,
            "seed": self.seed,
            "payload": self.payload,
        }

    def to_json(self, path) -> None:
        payload = json.dumps(self.to_dict(), sort_keys=True, indent=2)
        directory = os.path.dirname(os.path.abspath(path)) or "."
        fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
        try:
            with os.fdopen(fd, "w", encoding="ascii") as fh:
                fh.write(payload + "\n")
            os.replace(tmp, path)
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise

    @staticmethod
    def from_dict(data: dict) -> "GeneratedInstance":
        if data.get("schema_version") != 1:
            raise ValueError("unsupported instance schema version")
        return GeneratedInstance(family=data["family"],
                                 seed=int(data.get("seed", 0)),
                                 payload=data["payload"])

    @staticmethod
    def from_json(path) -> "GeneratedInstance":
        with open(path, "r", encoding="ascii") as fh:
            return GeneratedInstance.from_dict(json.load(fh))


def generate_instance(family: str, seed: int = 0, **dims) -> GeneratedInstance:
    """Single entry point used by the command line."""
    if family == "lasso":
        return generate_lasso_instance(seed=seed, **dims)
    if family == "feasibility":
        return generate_feasibility_instance(seed=seed, **dims)
    if family == "uniformly-convex":
        return generate_uniformly_convex_instance(seed=seed, **dims)
    if family == "tight-quadratic":
        return tight_quadratic_instance(seed=seed, **dims)
    raise ValueError(f"unknown family {family!r}")
