"""Geometry and oracle layer: sets, projections, prox, objective builders."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from klcert.convex import (
    EXT_INF,
    AffineSet,
    Ball,
    CompositeObjective,
    ConvexObjective,
    ExtReal,
    Halfspace,
    IntersectionSet,
    SingletonSet,
    UnsupportedOracleError,
    as_point,
    dykstra_projection,
    evaluate,
    feasibility_objective,
    half_squared_distance,
    indicator,
    lasso_objective,
    least_squares,
    min_norm_subgradient,
    prox,
    quadratic_objective,
    scaled_l1,
    soft_threshold,
    subgradient_norm,
    zero_objective,
)

finite_floats = st.floats(min_value=-1e6, max_value=1e6,
                          allow_nan=False, allow_infinity=False)


# ---------------------------------------------------------------------------
# extended reals and point validation
# ---------------------------------------------------------------------------


def test_ext_real_tags_infinity():
    assert EXT_INF.infinite
    assert not EXT_INF.is_finite
    assert (EXT_INF - 5.0).infinite
    v = ExtReal(3.0)
    assert v.is_finite
    assert (v - 1.0).finite_value() == 2.0
    assert v.as_float() == 3.0
    assert math.isinf(EXT_INF.as_float())


def test_ext_real_comparisons():
    assert ExtReal(1.0) < ExtReal(2.0)
    assert ExtReal(2.0) < EXT_INF
    assert not (EXT_INF < ExtReal(2.0))
    assert ExtReal(2.0) <= ExtReal(2.0)


def test_ext_real_finite_value_guards_infinity():
    with pytest.raises(ValueError):
        EXT_INF.finite_value()


def test_as_point_validation():
    x = as_point([1.0, 2.0])
    assert x.shape == (2,) and x.dtype == float
    with pytest.raises(ValueError):
        as_point(np.zeros((2, 2)))
    with pytest.raises(ValueError):
        as_point([1.0, math.nan])
    with pytest.raises(ValueError):
        as_point([1.0, 2.0], dimension=3)


# ---------------------------------------------------------------------------
# sets and projections
# ---------------------------------------------------------------------------


def _sample_sets():
    return [
        Ball(center=np.array([0.5, -1.0]), radius=2.0),
        Halfspace(normal=np.array([1.0, 2.0]), offset=0.5),
        AffineSet(matrix=np.array([[1.0, 1.0]]), rhs=np.array([1.0])),
        SingletonSet(point=np.array([0.3, 0.7])),
    ]


@given(st.lists(finite_floats, min_size=2, max_size=2),
       st.lists(finite_floats, min_size=2, max_size=2))
@settings(max_examples=200)
def test_projection_idempotent_and_nonexpansive(xs, ys):
    x = np.asarray(xs)
    y = np.asarray(ys)
    for s in _sample_sets():
        px, py = s.project(x), s.project(y)
        assert s.contains(px, tol=1e-7)
        assert np.linalg.norm(s.project(px) - px) <= 1e-9 * (1 + np.linalg.norm(px))
        # firm nonexpansiveness implies plain nonexpansiveness
        assert (np.linalg.norm(px - py)
                <= np.linalg.norm(x - y) + 1e-9 * (1 + np.linalg.norm(x - y)))


def test_projection_is_nearest_point_of_set():
    # dist(x, C) <= ||x - z|| for random z in C, with equality only at P(x)
    rng = np.random.default_rng(3)
    for s in _sample_sets():
        for _ in range(50):
            x = rng.normal(size=2) * 3.0
            px = s.project(x)
            z = s.project(rng.normal(size=2) * 3.0)
            assert np.linalg.norm(x - px) <= np.linalg.norm(x - z) + 1e-9


def test_ball_projection_batch_matches_rows(rng):
    ball = Ball(center=np.array([1.0, 0.0, -1.0]), radius=0.7)
    pts = rng.normal(size=(40, 3)) * 2.0
    batch = ball.project(pts)
    assert batch.shape == (40, 3)
    for i in range(40):
        np.testing.assert_allclose(batch[i], ball.project(pts[i]), rtol=0, atol=1e-14)


def test_boundary_normal_is_unit():
    ball = Ball(center=np.zeros(2), radius=2.0)
    n = ball.boundary_normal(np.array([2.0, 0.0]))
    np.testing.assert_allclose(n, [1.0, 0.0], atol=1e-14)
    half = Halfspace(normal=np.array([0.0, 3.0]), offset=0.0)
    n = half.boundary_normal(np.array([5.0, 0.0]))
    np.testing.assert_allclose(n, [0.0, 1.0], atol=1e-14)


def test_dykstra_orthant_is_componentwise_clamp():
    sets = [Halfspace(np.array([1.0, 0.0]), 0.0),
            Halfspace(np.array([0.0, 1.0]), 0.0)]
    p = dykstra_projection(sets, np.array([1.5, 2.5]))
    np.testing.assert_allclose(p, [0.0, 0.0], atol=1e-10)
    p = dykstra_projection(sets, np.array([-1.0, 3.0]))
    np.testing.assert_allclose(p, [-1.0, 0.0], atol=1e-10)


def test_dykstra_finds_nearest_point_of_wedge():
    # K = {x <= y} cap {y <= 0}; from (1, 1) the nearest point is the vertex
    # (0, 0): KKT there needs (1, 1) = m1 (1, -1) + m2 (0, 1), m1 = 1, m2 = 2.
    # Plain cyclic projection stalls on a non-nearest boundary point here.
    sets = [Halfspace(np.array([1.0, -1.0]), 0.0),
            Halfspace(np.array([0.0, 1.0]), 0.0)]
    p = dykstra_projection(sets, np.array([1.0, 1.0]))
    np.testing.assert_allclose(p, [0.0, 0.0], atol=1e-8)


def test_intersection_projection_ball_halfspace_hand_case():
    # {||x|| <= 1, y <= 0} from (2, 2): activate y = 0, clamp x to 1.
    # KKT at (1, 0): (1, 2) = m1 (1, 0) + m2 (0, 1) with m1, m2 >= 0.
    inter = IntersectionSet(sets=(Ball(np.zeros(2), 1.0),
                                  Halfspace(np.array([0.0, 1.0]), 0.0)))
    p = inter.project(np.array([2.0, 2.0]))
    np.testing.assert_allclose(p, [1.0, 0.0], atol=1e-8)
    assert abs(float(inter.distance(np.array([2.0, 2.0]))) - math.sqrt(5.0)) <= 1e-8


# ---------------------------------------------------------------------------
# prox oracles against brute force
# ---------------------------------------------------------------------------


def _grid_prox_1d(value_fn, x, step):
    """Two-stage grid argmin of f(u) + (u - x)^2 / (2 step)."""
    def moreau(u):
        return value_fn(np.array([u])) + (u - x) ** 2 / (2.0 * step)

    grid = np.linspace(x - 5.0, x + 5.0, 2001)
    best = grid[int(np.argmin([moreau(u) for u in grid]))]
    fine = np.linspace(best - 0.01, best + 0.01, 2001)
    return fine[int(np.argmin([moreau(u) for u in fine]))]


@pytest.mark.parametrize("step", [0.2, 1.0, 3.7])
def test_prox_matches_grid_search(step):
    objs = [quadratic_objective(center=[0.7], weight=1.3),
            scaled_l1(dimension=1, weight=0.9)]
    for obj in objs:
        for x in [-2.3, -0.4, 0.0, 0.55, 1.9]:
            u = prox(obj, np.array([x]), step)[0]
            u_grid = _grid_prox_1d(obj.value_fn, x, step)
            assert abs(u - u_grid) <= 2e-5, (obj.name, x, step)


def test_prox_rejects_nonpositive_step():
    obj = scaled_l1(dimension=1, weight=1.0)
    with pytest.raises(ValueError):
        prox(obj, np.zeros(1), 0.0)


@given(st.lists(finite_floats, min_size=2, max_size=2),
       st.lists(finite_floats, min_size=2, max_size=2),
       st.floats(min_value=1e-3, max_value=10.0))
@settings(max_examples=200)
def test_prox_nonexpansive(xs, ys, step):
    x, y = np.asarray(xs), np.asarray(ys)
    for obj in [quadratic_objective(center=[0.3, -0.8], weight=0.9),
                scaled_l1(dimension=2, weight=1.1)]:
        gap = np.linalg.norm(prox(obj, x, step) - prox(obj, y, step))
        assert gap <= np.linalg.norm(x - y) * (1 + 1e-12) + 1e-12


def test_soft_threshold_frozen():
    out = soft_threshold(np.array([3.0, -0.5]), 1.0)
    np.testing.assert_array_equal(out, np.array([2.0, 0.0]))


# ---------------------------------------------------------------------------
# objective builders: convexity, subgradients, gradients
# ---------------------------------------------------------------------------


def _builder_zoo(rng):
    A = rng.normal(size=(3, 2))
    y = rng.normal(size=3)
    sets = (Ball(np.zeros(2), 1.0), Halfspace(np.array([1.0, 1.0]), 0.5))
    return [
        quadratic_objective(center=[0.2, -0.4], weight=0.8),
        scaled_l1(dimension=2, weight=0.6),
        least_squares(A, y),
        lasso_objective(A, y, mu=0.3),
        feasibility_objective(sets, weights=(0.25, 0.75)),
        half_squared_distance(Ball(np.array([1.0, 1.0]), 0.5), dimension=2),
        zero_objective(2),
    ]


def test_builders_are_convex_on_samples(rng):
    # f(t x + (1-t) y) <= t f(x) + (1 - t) f(y) on sampled triples
    for obj in _builder_zoo(rng):
        for _ in range(300):
            x = rng.normal(size=2) * 2.0
            y = rng.normal(size=2) * 2.0
            t = rng.uniform()
            fx = evaluate(obj, x).finite_value()
            fy = evaluate(obj, y).finite_value()
            fm = evaluate(obj, t * x + (1 - t) * y).finite_value()
            assert fm <= t * fx + (1 - t) * fy + 1e-9 * (1 + abs(fx) + abs(fy))


def test_subgradient_inequality_on_samples(rng):
    # f(y) >= f(x) + <g, y - x> for the reported least-norm subgradient
    for obj in _builder_zoo(rng):
        if obj.subgradient_fn is None:
            continue
        for _ in range(300):
            x = rng.normal(size=2) * 2.0
            y = rng.normal(size=2) * 2.0
            g = min_norm_subgradient(obj, x)
            if g is None:
                continue
            fx = evaluate(obj, x).finite_value()
            fy = evaluate(obj, y).finite_value()
            assert fy >= fx + float(g @ (y - x)) - 1e-9 * (1 + abs(fx) + abs(fy))


def test_builder_gradients_match_finite_differences(rng):
    h = 1e-6
    for obj in _builder_zoo(rng):
        if obj.gradient_fn is None:
            continue
        for _ in range(20):
            x = rng.normal(size=2) * 2.0
            g = obj.gradient_fn(x)
            for i in range(2):
                e = np.zeros(2)
                e[i] = h
                fd = (evaluate(obj, x + e).finite_value()
                      - evaluate(obj, x - e).finite_value()) / (2 * h)
                assert abs(g[i] - fd) <= 1e-4 * (1 + abs(g[i]))


def test_indicator_objective_values_and_prox():
    ball = Ball(np.zeros(2), 1.0)
    obj = indicator(ball, dimension=2)
    assert evaluate(obj, np.array([0.5, 0.0])).is_finite
    assert evaluate(obj, np.array([3.0, 0.0])).infinite
    np.testing.assert_allclose(prox(obj, np.array([3.0, 0.0]), 2.0),
                               [1.0, 0.0], atol=1e-12)
    # least-norm normal-cone element on the set is 0
    g = min_norm_subgradient(obj, np.array([1.0, 0.0]))
    np.testing.assert_array_equal(g, np.zeros(2))


def test_min_norm_subgradient_requires_an_oracle():
    obj = ConvexObjective(dimension=1, value_fn=lambda x: float(x[0] ** 2))
    with pytest.raises(UnsupportedOracleError):
        min_norm_subgradient(obj, np.zeros(1))


def test_subgradient_norm_sentinel_outside_domain():
    # indicator subgradient oracle returns None off the set -> +inf norm
    obj = indicator(Ball(np.zeros(2), 1.0), dimension=2)
    assert math.isinf(subgradient_norm(obj, np.array([5.0, 0.0])))
    assert subgradient_norm(obj, np.array([0.5, 0.0])) == 0.0


def test_composite_requires_gradient_and_prox():
    plain = ConvexObjective(dimension=1, value_fn=lambda x: float(x[0] ** 2))
    smooth = quadratic_objective(center=[0.0], weight=0.5)
    with_prox = scaled_l1(dimension=1, weight=1.0)
    with pytest.raises(ValueError):
        CompositeObjective(smooth=plain, nonsmooth=with_prox)
    with pytest.raises(ValueError):
        CompositeObjective(smooth=smooth, nonsmooth=plain)
    comp = CompositeObjective(smooth=smooth, nonsmooth=with_prox)
    assert comp.value(np.array([2.0])).finite_value() == pytest.approx(4.0)


def test_quadratic_lipschitz_and_least_squares_constant(rng):
    obj = quadratic_objective(center=[0.0, 0.0], weight=1.7)
    assert obj.lipschitz == pytest.approx(3.4)
    A = rng.normal(size=(4, 3))
    ls = least_squares(A, rng.normal(size=4))
    assert ls.lipschitz == pytest.approx(np.linalg.norm(A, 2) ** 2, rel=1e-12)
