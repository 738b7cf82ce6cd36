"""Stable region descriptors for certificates.

A region says where a certificate is claimed to hold.  Regions know how to
test membership and how to draw uniform samples of themselves, which is what
the sampling-based verification checks consume.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from klcert.convex import Array, as_point


@dataclass(frozen=True)
class L1Ball:
    """{x : ||x||_1 <= radius}."""

    radius: float

    def __post_init__(self):
        if self.radius <= 0:
            raise ValueError("radius must be positive")

    def contains(self, x, tol: float = 1e-9) -> bool:
        x = np.asarray(x, dtype=float)
        return float(np.abs(x).sum()) <= self.radius + tol

    def sample(self, rng: np.random.Generator, dimension: int, count: int) -> Array:
        # Dirichlet magnitudes give a uniform simplex point; random signs and
        # a U^(1/n) radial factor make the draw uniform in the l1 ball.
        mags = rng.dirichlet(np.ones(dimension), size=count)
        signs = rng.choice([-1.0, 1.0], size=(count, dimension))
        radial = rng.uniform(0.0, 1.0, size=(count, 1)) ** (1.0 / dimension)
        return self.radius * radial * signs * mags

    def to_dict(self) -> dict:
        return {"kind": "l1-ball", "radius": self.radius}


@dataclass(frozen=True)
class MetricBall:
    """{x : ||x - center|| <= radius}."""

    center: Array
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "center", as_point(self.center))
        if self.radius < 0:
            raise ValueError("radius must be nonnegative")

    def contains(self, x, tol: float = 1e-9) -> bool:
        x = np.asarray(x, dtype=float)
        return float(np.linalg.norm(x - self.center)) <= self.radius + tol

    def sample(self, rng: np.random.Generator, dimension: int, count: int) -> Array:
        if dimension != self.center.shape[0]:
            raise ValueError("dimension does not match the center")
        g = rng.standard_normal((count, dimension))
        g /= np.maximum(np.linalg.norm(g, axis=1, keepdims=True), 1e-300)
        radial = rng.uniform(0.0, 1.0, size=(count, 1)) ** (1.0 / dimension)
        return self.center + self.radius * radial * g

    def to_dict(self) -> dict:
        return {
            "kind": "metric-ball",
            "center": self.center.tolist(),
            "radius": self.radius,
        }


@dataclass(frozen=True)
class WholeSpace:
    """No geometric restriction; sampling needs an explicit anchor and scale."""

    def contains(self, x, tol: float = 1e-9) -> bool:
        return True

    def to_dict(self) -> dict:
        return {"kind": "whole-space"}


def region_from_dict(data: dict):
    kind = data["kind"]
    if kind == "l1-ball":
        return L1Ball(float(data["radius"]))
    if kind == "metric-ball":
        return MetricBall(np.asarray(data["center"], dtype=float), float(data["radius"]))
    if kind == "whole-space":
        return WholeSpace()
    raise ValueError(f"unknown region kind {kind!r}")
