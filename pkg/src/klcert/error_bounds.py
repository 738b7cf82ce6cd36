"""Concrete error-bound constants for structured problem classes.

Covers Hoffman constants of polyhedral pairs (enumerated upper bound,
sampled lower bound), the l1-regularized least-squares bound built from the
sign-pattern reformulation, quadratic bounds for convex feasibility via an
interior ball, power profiles for uniformly convex functions, and the
generic exponent rule for piecewise polynomials.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from itertools import combinations, product
from typing import Optional

import numpy as np

from klcert.convex import (
    AffineSet,
    Array,
    Halfspace,
    IntersectionSet,
    as_point,
    dykstra_projection,
    feasibility_objective,
    lasso_composite,
    lasso_objective,
    set_from_dict,
)
from klcert.desingularization import Desingularizer, PowerDesingularizer
from klcert.regions import MetricBall

# Enumeration caps for the exact Hoffman bound; above them the constant must
# be user-supplied or sampled.
HOFFMAN_MAX_STACKED_ROWS = 24
HOFFMAN_MAX_DIM = 10

_RANK_TOL = 1e-10


# ---------------------------------------------------------------------------
# Hoffman constants
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LinearSystemPair:
    """Polyhedron X = {A x <= a} paired with the affine set Y = {E x = e}.

    The Hoffman constant nu of the pair satisfies
    dist(x, X intersect Y) <= nu * ||E x - e|| for every x in X.
    A feasible witness certifies that the intersection is nonempty.
    """

    A: Array
    a: Array
    E: Array
    e: Array
    witness: Array

    def __post_init__(self):
        E = np.atleast_2d(np.asarray(self.E, dtype=float))
        n = E.shape[1]
        A_raw = np.asarray(self.A, dtype=float)
        A = np.atleast_2d(A_raw) if A_raw.size else np.zeros((0, n))
        a_raw = np.asarray(self.a, dtype=float)
        a = np.atleast_1d(a_raw) if a_raw.size else np.zeros(0)
        e = np.atleast_1d(np.asarray(self.e, dtype=float))
        w = as_point(self.witness, E.shape[1])
        if A.shape[0] != a.shape[0]:
            raise ValueError("A/a row mismatch")
        if E.shape[0] != e.shape[0]:
            raise ValueError("E/e row mismatch")
        if A.shape[0] and np.max(A @ w - a) > 1e-9:
            raise ValueError("witness violates the inequality system")
        if np.linalg.norm(E @ w - e) > 1e-9:
            raise ValueError("witness violates the equality system")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "E", E)
        object.__setattr__(self, "e", e)
        object.__setattr__(self, "witness", w)

    @property
    def dimension(self) -> int:
        return self.E.shape[1]

    def stacked(self) -> Array:
        return np.vstack([self.A, self.E]) if self.A.size else self.E.copy()

    def inequality_sets(self):
        return [Halfspace(self.A[i], self.a[i]) for i in range(self.A.shape[0])]

    def intersection_sets(self):
        return self.inequality_sets() + [AffineSet(self.E, self.e)]


def _max_pinv_norm_over_bases(stacked: Array, batch: int = 20000) -> float:
    """Max of 1 / sigma_min over row subsets of size rank(stacked).

    Any independent row subset extends to one of these maximal subsets, and
    appending independent rows only shrinks the least nonzero singular value,
    so the maximum over maximal subsets dominates all independent subsets.
    """
    m, n = stacked.shape
    scale = np.linalg.norm(stacked, ord=2)
    rank = int(np.linalg.matrix_rank(stacked, tol=_RANK_TOL * max(scale, 1.0)))
    if rank == 0:
        raise ValueError("stacked system is all zeros")
    best = 0.0
    combos = combinations(range(m), rank)
    while True:
        idx = []
        for _ in range(batch):
            nxt = next(combos, None)
            if nxt is None:
                break
            idx.append(nxt)
        if not idx:
            break
        sub = stacked[np.asarray(idx, dtype=int)]  # (B, rank, n)
        svals = np.linalg.svd(sub, compute_uv=False)
        smin = svals[:, -1]
        ok = smin > _RANK_TOL * max(scale, 1.0)
        if np.any(ok):
            best = max(best, float(np.max(1.0 / smin[ok])))
    if best == 0.0:
        raise ValueError("no full-rank row subset found")
    return best


def hoffman_constant(system: LinearSystemPair, mode: str = "exact", *,
                     max_stacked_rows: int = HOFFMAN_MAX_STACKED_ROWS,
                     max_dim: int = HOFFMAN_MAX_DIM,
                     samples: int = 200, seed: int = 0,
                     sample_scale: float = 2.0) -> tuple[float, str]:
    """Hoffman constant of the pair, with an explicit bound direction.

    exact mode returns ("upper") the basis-enumeration bound: the maximum
    over full-rank row subsets of the stacked system of the norm of the
    associated least-squares solution operator.  Overestimation is safe for
    certification; it only weakens downstream constants.

    sampled mode returns ("lower") the best observed ratio
    dist(x, X intersect Y) / ||E x - e|| over random points of X, with the
    distance solved to high accuracy by Dykstra projections.
    """
    if mode == "exact":
        stacked = system.stacked()
        if stacked.shape[0] > max_stacked_rows or system.dimension > max_dim:
            raise ValueError(
                f"system too large for exact enumeration "
                f"({stacked.shape[0]} rows, dim {system.dimension}); "
                f"use sampled mode or supply the constant"
            )
        return _max_pinv_norm_over_bases(stacked), "upper"
    if mode != "sampled":
        raise ValueError(f"unknown mode {mode!r}")

    rng = np.random.default_rng(seed)
    n = system.dimension
    raw = system.witness + sample_scale * rng.standard_normal((samples, n))
    if system.A.size:
        pts = dykstra_projection(system.inequality_sets(), raw, tol=1e-13)
    else:
        pts = raw
    resid = np.linalg.norm(pts @ system.E.T - system.e, axis=1)
    keep = resid > 1e-9
    if not np.any(keep):
        raise ValueError("no sampled point violates the equality system")
    pts = pts[keep]
    proj = dykstra_projection(system.intersection_sets(), pts, tol=1e-13)
    dist = np.linalg.norm(pts - proj, axis=1)
    ratio = dist / resid[keep]
    return float(np.max(ratio)), "lower"


# ---------------------------------------------------------------------------
# l1-regularized least squares
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LassoInstance:
    """min 0.5 ||A x - y||^2 + mu ||x||_1 together with a starting point."""

    A: Array
    y: Array
    mu: float
    x0: Array

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        y = np.atleast_1d(np.asarray(self.y, dtype=float))
        x0 = as_point(self.x0, A.shape[1])
        if A.shape[0] != y.shape[0]:
            raise ValueError("A/y row mismatch")
        if self.mu <= 0:
            raise ValueError("mu must be positive")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "x0", x0)

    @property
    def dimension(self) -> int:
        return self.A.shape[1]

    def value(self, x) -> float:
        r = self.A @ np.asarray(x, dtype=float) - self.y
        return 0.5 * float(r @ r) + self.mu * float(np.abs(np.asarray(x)).sum())

    def objective(self, min_value: float = 0.0):
        return lasso_objective(self.A, self.y, self.mu, min_value=min_value)

    def composite(self):
        return lasso_composite(self.A, self.y, self.mu)

    @property
    def lipschitz(self) -> float:
        return float(np.linalg.norm(self.A, 2)) ** 2

    def radius_bound(self) -> float:
        """l1 radius R containing every descent iterate started at x0."""
        return max(self.value(self.x0) / self.mu,
                   1.0 + float(self.y @ self.y) / (2.0 * self.mu))


def lasso_sign_system(inst: LassoInstance, R: Optional[float] = None) -> LinearSystemPair:
    """Sign-pattern reformulation whose Hoffman constant drives the bound.

    Lifted variable (x, t) with t standing for ||x||_1: inequalities
    [s, -1] (x, t) <= 0 for every sign vector s (sorted lexicographically
    over {-1, +1}^n) plus t <= R; equalities fix the least-squares image
    [A, 0] and the weighted sum [0, mu].
    """
    n = inst.dimension
    if R is None:
        R = inst.radius_bound()
    sign_rows = np.array(sorted(product((-1.0, 1.0), repeat=n)), dtype=float)
    M = np.hstack([sign_rows, -np.ones((sign_rows.shape[0], 1))])
    top = np.zeros((1, n + 1))
    top[0, n] = 1.0
    A_ineq = np.vstack([M, top])
    a_ineq = np.concatenate([np.zeros(M.shape[0]), [R]])
    E = np.zeros((inst.A.shape[0] + 1, n + 1))
    E[:-1, :n] = inst.A
    E[-1, n] = inst.mu
    # Equality targets at the witness: the lifted optimal point is unknown
    # here, so anchor the witness at the lifted origin (feasible for X) and
    # target its own image, keeping the pair well-posed; only (A_ineq, E)
    # matter for the constant itself.
    witness = np.zeros(n + 1)
    e = E @ witness
    return LinearSystemPair(A=A_ineq, a=a_ineq, E=E, e=e, witness=witness)


def lasso_nu(inst: LassoInstance, mode: str = "exact", **kwargs) -> tuple[float, str]:
    """Hoffman constant of the sign-pattern reformulation pair."""
    n = inst.dimension
    rows = 2 ** n + inst.A.shape[0] + 2
    max_rows = kwargs.pop("max_stacked_rows", HOFFMAN_MAX_STACKED_ROWS)
    if mode == "exact" and rows > max_rows:
        raise ValueError(
            f"reformulation has {rows} stacked rows, over the cap {max_rows}; "
            f"supply nu or use sampled mode"
        )
    return hoffman_constant(lasso_sign_system(inst), mode,
                            max_stacked_rows=max_rows, **kwargs)


@dataclass(frozen=True)
class LassoConstants:
    """Quadratic-growth certificate f - min f >= 2 gamma_R dist^2 on the
    l1 ball of radius R, plus the reciprocal packaging kappa_R."""

    gamma_R: float
    R: float
    kappa_R: float
    nu: float


def lasso_gamma(inst: LassoInstance, nu: float) -> LassoConstants:
    """Growth constants from the Hoffman constant of the reformulation.

    With G = R ||A|| + ||y||:
      kappa_R = nu^2 (2 R mu + 6 G R ||A|| + 2 G^2 + 2)
      gamma_R = 1 / (4 nu^2 (1 + mu R + G (4 R ||A|| + ||y||)))
    and the two satisfy 2 gamma_R kappa_R = 1 exactly.
    """
    if nu <= 0:
        raise ValueError("nu must be positive")
    R = inst.radius_bound()
    norm_A = float(np.linalg.norm(inst.A, 2))
    norm_y = float(np.linalg.norm(inst.y))
    G = R * norm_A + norm_y
    kappa = nu ** 2 * (2.0 * R * inst.mu + 6.0 * G * R * norm_A + 2.0 * G ** 2 + 2.0)
    gamma = 1.0 / (4.0 * nu ** 2 * (1.0 + inst.mu * R + G * (4.0 * R * norm_A + norm_y)))
    return LassoConstants(gamma_R=gamma, R=R, kappa_R=kappa, nu=nu)


# ---------------------------------------------------------------------------
# convex feasibility
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FeasibilityInstance:
    """Projectable sets with a declared interior ball B(xbar, R) inside the
    intersection, plus barycentric weights."""

    sets: tuple
    xbar: Array
    R: float
    weights: Array

    def __post_init__(self):
        sets = tuple(self.sets)
        xbar = as_point(self.xbar)
        w = np.atleast_1d(np.asarray(self.weights, dtype=float))
        if len(sets) < 2:
            raise ValueError("need at least two sets")
        if self.R <= 0:
            raise ValueError("inner radius must be positive")
        if w.shape[0] != len(sets) or np.any(w <= 0) or abs(w.sum() - 1.0) > 1e-12:
            raise ValueError("weights must be positive and sum to one")
        object.__setattr__(self, "sets", sets)
        object.__setattr__(self, "xbar", xbar)
        object.__setattr__(self, "weights", w)

    @property
    def dimension(self) -> int:
        return self.xbar.shape[0]

    def intersection(self) -> IntersectionSet:
        return IntersectionSet(self.sets)

    def objective(self):
        return feasibility_objective(self.sets, self.weights)

    def check_inner_ball(self, samples: int = 256, seed: int = 0,
                         tol: float = 1e-9) -> bool:
        """Sample the declared ball boundary and test membership in each set."""
        rng = np.random.default_rng(seed)
        g = rng.standard_normal((samples, self.dimension))
        g /= np.maximum(np.linalg.norm(g, axis=1, keepdims=True), 1e-300)
        pts = self.xbar + self.R * g
        for s in self.sets:
            if not np.all(np.atleast_1d(s.distance(pts)) <= tol):
                return False
        return True

    def to_dict(self) -> dict:
        return {
            "sets": [s.to_dict() for s in self.sets],
            "xbar": self.xbar.tolist(),
            "R": self.R,
            "weights": self.weights.tolist(),
        }

    @staticmethod
    def from_dict(data: dict) -> "FeasibilityInstance":
        return FeasibilityInstance(
            sets=tuple(set_from_dict(d) for d in data["sets"]),
            xbar=np.asarray(data["xbar"], dtype=float),
            R=float(data["R"]),
            weights=np.asarray(data["weights"], dtype=float),
        )


def feasibility_bound(inst: FeasibilityInstance, x0, variant: str = "barycentric"
                      ) -> Desingularizer:
    """Quadratic-growth desingularizer psi(s) = M s^2 / 2 on the metric ball
    B(xbar, ||x0 - xbar||), which contains every averaged-projection or
    alternating-projection iterate by Fejer monotonicity.

    barycentric (f = 0.5 sum w_i dist^2(., C_i), m sets):
        M = 0.25 * (1 + 2 t / R)^(2 - 2 m) * min_i w_i
    alternating (g = indicator(C1) + 0.5 dist^2(., C2), two sets):
        M = 0.125 * (1 + 2 t / R)^(-2)
    with t = ||x0 - xbar||.
    """
    x0 = as_point(x0, inst.dimension)
    t = float(np.linalg.norm(x0 - inst.xbar))
    ratio = 1.0 + 2.0 * t / inst.R
    m = len(inst.sets)
    if variant == "barycentric":
        M = 0.25 * ratio ** (2 - 2 * m) * float(np.min(inst.weights))
    elif variant == "alternating":
        if m != 2:
            raise ValueError("alternating variant is exposed for two sets only")
        M = 0.125 * ratio ** (-2)
    else:
        raise ValueError(f"unknown variant {variant!r}")
    region = MetricBall(inst.xbar, t)
    # psi(s) = M s^2 / 2  <=>  phi(s) = sqrt(2 s / M)
    return PowerDesingularizer(scale=math.sqrt(2.0 / M), exponent=2.0,
                               r0=math.inf, region=region, ell=M)


# ---------------------------------------------------------------------------
# profiles and exponents
# ---------------------------------------------------------------------------


def uniformly_convex_profile(sigma: float, p: float, alpha0: float) -> Desingularizer:
    """Desingularizer of a p-uniformly convex function with modulus sigma:

        phi(s) = p * sigma^(-1/p) * s^(1/p),  psi(s) = sigma * s^p / p^p,

    with psi' Lipschitz on [0, alpha0] with constant
    (p - 1) * sigma * alpha0^(p-2) / p^(p-1).  Requires p >= 2.
    """
    if sigma <= 0:
        raise ValueError("modulus must be positive")
    if p < 2:
        raise ValueError("profile requires p >= 2 (psi' must vanish at zero "
                         "and stay Lipschitz)")
    if alpha0 <= 0:
        raise ValueError("alpha0 must be positive")
    scale = p * sigma ** (-1.0 / p)
    ell = (p - 1.0) * sigma * alpha0 ** (p - 2.0) / p ** (p - 1.0)
    return PowerDesingularizer(scale=scale, exponent=p, r0=math.inf, ell=ell)


def piecewise_poly_exponent(degree: int, n: int) -> tuple[int, Fraction]:
    """Worst-case growth data for a convex piecewise polynomial on R^n:
    p = (degree - 1)^n + 1 and the companion exponent theta = 1 - 1/p."""
    if degree < 1 or n < 1:
        raise ValueError("degree and n must be positive integers")
    p = (degree - 1) ** n + 1
    return p, Fraction(p - 1, p)


# ---------------------------------------------------------------------------
# plain-text matrix IO
# ---------------------------------------------------------------------------


def write_matrix_text(path, matrix) -> None:
    """Dimensions header then row-major entries, 17 significant digits."""
    M = np.atleast_2d(np.asarray(matrix, dtype=float))
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write(f"{M.shape[0]} {M.shape[1]}\n")
        for row in M:
            fh.write(" ".join(f"{v:.17g}" for v in row) + "\n")


def read_matrix_text(path) -> Array:
    with open(path, "r", encoding="ascii") as fh:
        header = fh.readline().split()
        if len(header) != 2:
            raise ValueError("matrix file needs an 'm n' header line")
        m, n = int(header[0]), int(header[1])
        data = []
        for line in fh:
            if line.strip():
                data.extend(float(tok) for tok in line.split())
    arr = np.asarray(data, dtype=float)
    if arr.size != m * n:
        raise ValueError(f"expected {m * n} entries, found {arr.size}")
    return arr.reshape(m, n)
