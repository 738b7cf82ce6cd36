"""Desingularizing functions and their conversion to and from error bounds.

A desingularizer phi lives on a value band [0, r0): it is continuous,
concave, increasing, phi(0) = 0, and certifies phi'(f(x) - min f) *
||least-norm subgradient|| >= 1 on its region.  Its inverse psi is the
worst-case value profile consumed by the majorant machinery.

Residual certificates say dist(x, argmin) <= omega(f(x) - min f).  Power
residuals omega(s) = (s / gamma)^(1/p) are moderate with constant c = 1/p
(s * omega'(s) >= c * omega(s)), so (1/c) * omega is a desingularizer; the
same rescale works for the two-regime residual (s + s^(1/p)) / gamma0.
Residuals without a derivable moderation constant are refused, since the
conversion may fail for flat residuals.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from klcert.convex import ConvexObjective, subgradient_norm, value_gap
from klcert.regions import WholeSpace, region_from_dict


class NonModerateResidualError(ValueError):
    """Residual has no derivable moderation constant; equivalence may fail."""


def _invert_increasing(fn, target: float, hi0: float, tol: float = 1e-12,
                       max_iter: int = 200) -> float:
    """Solve fn(s) = target for increasing fn with fn(0) <= target, by bisection."""
    if target <= 0.0:
        return 0.0
    hi = hi0
    for _ in range(400):
        if fn(hi) >= target:
            break
        hi *= 2.0
    else:
        raise ValueError("could not bracket the inverse")
    lo = 0.0
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        if mid == lo or mid == hi:
            break
        if fn(mid) >= target:
            hi = mid
        else:
            lo = mid
        if hi - lo <= tol * max(1.0, hi):
            break
    return 0.5 * (lo + hi)


class Desingularizer:
    """Common contract: phi, phi_prime, psi, psi_prime on [0, r0)."""

    r0: float
    c: float
    region: object
    ell: Optional[float]

    def phi(self, s: float) -> float:
        raise NotImplementedError

    def phi_prime(self, s: float) -> float:
        raise NotImplementedError

    def psi(self, alpha: float) -> float:
        raise NotImplementedError

    def psi_prime(self, alpha: float) -> float:
        """Derivative of the inverse: 1 / phi'(psi(alpha))."""
        if alpha == 0.0:
            d = self.phi_prime(1e-300)
            return 0.0 if not math.isfinite(d) else 1.0 / d
        return 1.0 / self.phi_prime(self.psi(alpha))

    def alpha0(self) -> float:
        """phi(r0); +inf when the band is unbounded and phi is."""
        if math.isinf(self.r0):
            return math.inf
        return self.phi(self.r0)

    def psi_prime_lipschitz(self, cap: float) -> Optional[float]:
        """Lipschitz constant of psi' on [0, cap], or None when unavailable."""
        return self.ell

    def to_dict(self) -> dict:
        raise ValueError(f"{type(self).__name__} is not serializable")


class PowerDesingularizer(Desingularizer):
    """phi(s) = scale * s^(1/p) with p >= 1; psi(a) = (a / scale)^p.

    The p = 2 case is the quadratic-inverse profile psi(s) = ell s^2 / 2 with
    ell = 2 / scale^2, the workhorse of linear-rate certificates.
    """

    def __init__(self, scale: float, exponent: float, r0: float = math.inf,
                 region=None, ell: Optional[float] = None):
        if scale <= 0:
            raise ValueError("scale must be positive")
        if exponent < 1:
            raise ValueError("exponent must be at least 1")
        if r0 <= 0:
            raise ValueError("r0 must be positive")
        self.scale = float(scale)
        self.exponent = float(exponent)
        self.r0 = float(r0)
        self.region = region
        self.c = 1.0 / self.exponent
        self.ell = ell if ell is not None else self._default_ell()

    def _default_ell(self) -> Optional[float]:
        p = self.exponent
        if p == 2.0:
            return 2.0 / self.scale ** 2
        if p > 2.0 and math.isfinite(self.r0):
            a0 = self.alpha0()
            return p * (p - 1.0) * a0 ** (p - 2.0) / self.scale ** p
        if p == 1.0:
            return 0.0  # psi' is constant, but psi'(0) != 0 still breaks (A)
        return None

    def phi(self, s: float) -> float:
        if s < 0:
            raise ValueError("phi needs a nonnegative argument")
        return self.scale * s ** (1.0 / self.exponent)

    def phi_prime(self, s: float) -> float:
        if s <= 0:
            return math.inf if self.exponent > 1 else self.scale
        return self.scale / self.exponent * s ** (1.0 / self.exponent - 1.0)

    def psi(self, alpha: float) -> float:
        if alpha < 0:
            raise ValueError("psi needs a nonnegative argument")
        return (alpha / self.scale) ** self.exponent

    def psi_prime(self, alpha: float) -> float:
        p = self.exponent
        if alpha < 0:
            raise ValueError("psi' needs a nonnegative argument")
        if alpha == 0.0:
            return 0.0 if p > 1 else 1.0 / self.scale
        return p * alpha ** (p - 1.0) / self.scale ** p

    def psi_prime_lipschitz(self, cap: float) -> Optional[float]:
        p = self.exponent
        if p == 2.0:
            return 2.0 / self.scale ** 2
        if p > 2.0:
            if not math.isfinite(cap):
                return None
            return p * (p - 1.0) * cap ** (p - 2.0) / self.scale ** p
        if p == 1.0:
            return 0.0
        return None

    def to_dict(self) -> dict:
        return {
            "form": "power",
            "scale": self.scale,
            "exponent": self.exponent,
            "r0": None if math.isinf(self.r0) else self.r0,
            "ell": self.ell,
            "region": self.region.to_dict() if self.region is not None else None,
        }


class GlobalizedDesingularizer(Desingularizer):
    """Piecewise-affine extension: phi below the junction, its tangent above.

    The extension is C^1 at the junction, concave, and desingularizing on the
    whole space whenever the base was on its band; the moderation constant of
    the base remains valid because the tangent grows no slower than c * phi.
    """

    def __init__(self, base: Desingularizer, junction: float):
        if not (0.0 < junction < base.r0):
            raise ValueError("junction must lie strictly inside (0, r0)")
        self.base = base
        self.junction = float(junction)
        self.alpha_junction = base.phi(self.junction)
        self.slope = base.phi_prime(self.junction)
        if not math.isfinite(self.slope) or self.slope <= 0:
            raise ValueError("base slope at the junction must be finite positive")
        self.r0 = math.inf
        self.region = base.region
        self.c = base.c
        self.ell = base.psi_prime_lipschitz(self.alpha_junction)

    def phi(self, s: float) -> float:
        if s < 0:
            raise ValueError("phi needs a nonnegative argument")
        if s <= self.junction:
            return self.base.phi(s)
        return self.base.phi(self.junction) + (s - self.junction) * self.slope

    def phi_prime(self, s: float) -> float:
        if s <= self.junction:
            return self.base.phi_prime(s)
        return self.slope

    def psi(self, alpha: float) -> float:
        if alpha < 0:
            raise ValueError("psi needs a nonnegative argument")
        if alpha <= self.alpha_junction:
            return self.base.psi(alpha)
        return self.junction + (alpha - self.alpha_junction) / self.slope

    def psi_prime(self, alpha: float) -> float:
        if alpha <= self.alpha_junction:
            return self.base.psi_prime(alpha)
        return 1.0 / self.slope

    def psi_prime_lipschitz(self, cap: float) -> Optional[float]:
        # psi' is constant past the junction, so the base constant on the
        # truncated interval bounds the whole thing.
        return self.base.psi_prime_lipschitz(min(cap, self.alpha_junction))

    def to_dict(self) -> dict:
        return {
            "form": "globalized",
            "junction": self.junction,
            "base": self.base.to_dict(),
        }


class TabulatedDesingularizer(Desingularizer):
    """phi given as callables; psi recovered by bisection to 1e-12.

    The moderation constant cannot be inferred from a black box, so it must
    be supplied; without it the error-bound conversion is refused.
    """

    def __init__(self, phi_fn: Callable[[float], float],
                 phi_prime_fn: Callable[[float], float],
                 r0: float, c: float, region=None, ell: Optional[float] = None):
        if not (0.0 < c <= 1.0):
            raise ValueError("moderation constant must lie in (0, 1]")
        if r0 <= 0:
            raise ValueError("r0 must be positive")
        self._phi_fn = phi_fn
        self._phi_prime_fn = phi_prime_fn
        self.r0 = float(r0)
        self.c = float(c)
        self.region = region
        self.ell = ell

    def phi(self, s: float) -> float:
        if s < 0:
            raise ValueError("phi needs a nonnegative argument")
        return float(self._phi_fn(s)) if s > 0 else 0.0

    def phi_prime(self, s: float) -> float:
        return float(self._phi_prime_fn(s))

    def psi(self, alpha: float) -> float:
        if alpha < 0:
            raise ValueError("psi needs a nonnegative argument")
        a0 = self.alpha0()
        if math.isfinite(a0) and alpha > a0 * (1.0 + 1e-12):
            raise ValueError("psi argument beyond phi(r0)")
        hi0 = min(self.r0, 1.0) if math.isfinite(self.r0) else 1.0
        return _invert_increasing(self.phi, alpha, hi0)


# ---------------------------------------------------------------------------
# residual certificates
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ErrorBoundCertificate:
    """dist(x, argmin f) <= residual(f(x) - min f) on the region, for values
    in [0, r0).

    Forms: "power" with omega(s) = (s / gamma)^(1/p); "two-regime" with
    omega(s) = (s + s^(1/p)) / gamma0; "general" wraps an arbitrary callable
    (not serializable, refused by the conversion unless moderate).
    """

    form: str
    p: float
    gamma: Optional[float] = None
    gamma0: Optional[float] = None
    r0: float = math.inf
    region: object = None
    residual_fn: Optional[Callable[[float], float]] = None

    def __post_init__(self):
        if self.form == "power":
            if self.gamma is None or self.gamma <= 0:
                raise ValueError("power residual needs gamma > 0")
        elif self.form == "two-regime":
            if self.gamma0 is None or self.gamma0 <= 0:
                raise ValueError("two-regime residual needs gamma0 > 0")
        elif self.form == "general":
            if self.residual_fn is None:
                raise ValueError("general residual needs a callable")
        else:
            raise ValueError(f"unknown residual form {self.form!r}")
        if self.form in ("power", "two-regime") and self.p < 1:
            raise ValueError("residual exponent p must be at least 1")

    def residual(self, s: float) -> float:
        if s < 0:
            raise ValueError("residual needs a nonnegative argument")
        if self.form == "power":
            return (s / self.gamma) ** (1.0 / self.p)
        if self.form == "two-regime":
            return (s + s ** (1.0 / self.p)) / self.gamma0
        return float(self.residual_fn(s))

    def to_dict(self) -> dict:
        if self.form == "general":
            raise ValueError("general residual certificates are not serializable")
        return {
            "form": self.form,
            "p": self.p,
            "gamma": self.gamma,
            "gamma0": self.gamma0,
            "r0": None if math.isinf(self.r0) else self.r0,
            "region": self.region.to_dict() if self.region is not None else None,
        }

    @staticmethod
    def from_dict(data: dict) -> "ErrorBoundCertificate":
        region = data.get("region")
        return ErrorBoundCertificate(
            form=data["form"],
            p=float(data["p"]),
            gamma=None if data.get("gamma") is None else float(data["gamma"]),
            gamma0=None if data.get("gamma0") is None else float(data["gamma0"]),
            r0=math.inf if data.get("r0") is None else float(data["r0"]),
            region=region_from_dict(region) if region is not None else None,
        )


def desingularizer_from_dict(data: dict) -> Desingularizer:
    form = data["form"]
    if form == "power":
        region = data.get("region")
        return PowerDesingularizer(
            scale=float(data["scale"]),
            exponent=float(data["exponent"]),
            r0=math.inf if data.get("r0") is None else float(data["r0"]),
            region=region_from_dict(region) if region is not None else None,
            ell=None if data.get("ell") is None else float(data["ell"]),
        )
    if form == "globalized":
        base = desingularizer_from_dict(data["base"])
        return GlobalizedDesingularizer(base, float(data["junction"]))
    raise ValueError(f"unknown desingularizer form {form!r}")


# ---------------------------------------------------------------------------
# conversions
# ---------------------------------------------------------------------------


def from_error_bound(cert: ErrorBoundCertificate) -> Desingularizer:
    """Rescale a moderate residual into a desingularizer: phi = (1/c) omega.

    Power and two-regime residuals are moderate with c = 1/p; anything else
    is refused because the equivalence may fail for flat residuals.
    """
    if cert.form == "power":
        p = cert.p
        scale = p * cert.gamma ** (-1.0 / p)
        return PowerDesingularizer(scale=scale, exponent=p, r0=cert.r0,
                                   region=cert.region)
    if cert.form == "two-regime":
        p = cert.p
        g0 = cert.gamma0

        def phi_fn(s: float) -> float:
            return p * (s + s ** (1.0 / p)) / g0

        def phi_prime_fn(s: float) -> float:
            if s <= 0:
                return math.inf if p > 1 else 2.0 / g0
            return (p + s ** ((1.0 - p) / p)) / g0

        return TabulatedDesingularizer(phi_fn, phi_prime_fn, r0=cert.r0,
                                       c=1.0 / p, region=cert.region)
    raise NonModerateResidualError(
        "residual has no derivable moderation constant; the error-bound to "
        "desingularizer equivalence may fail for flat residuals"
    )


def to_error_bound(d: Desingularizer) -> ErrorBoundCertificate:
    """Every desingularizer is itself a residual: dist <= phi(f - min f)."""
    if isinstance(d, PowerDesingularizer):
        gamma = d.scale ** (-d.exponent)
        return ErrorBoundCertificate(form="power", p=d.exponent, gamma=gamma,
                                     r0=d.r0, region=d.region)
    return ErrorBoundCertificate(form="general", p=1.0, residual_fn=d.phi,
                                 r0=d.r0, region=d.region)


def globalize(d: Desingularizer, junction: Optional[float] = None) -> Desingularizer:
    """Extend a desingularizer past its band by its tangent at the junction.

    Default junction: half the validity radius.
    """
    if junction is None:
        if not math.isfinite(d.r0):
            raise ValueError("junction required when the band is unbounded")
        junction = 0.5 * d.r0
    return GlobalizedDesingularizer(d, junction)


def extend_error_bound_globally(gamma: float, p: float, r0: float):
    """Turn a local power bound f >= gamma * dist^p on [f <= r0] into the
    global two-regime residual omega(s) = (s + s^(1/p)) / gamma0.

    Returns (gamma0, certificate) with
    gamma0 = (1 + r0^((p-1)/p)) * gamma^(1/p).
    """
    if gamma <= 0 or p < 1 or r0 <= 0 or not math.isfinite(r0):
        raise ValueError("need gamma > 0, p >= 1 and finite r0 > 0")
    gamma0 = (1.0 + r0 ** ((p - 1.0) / p)) * gamma ** (1.0 / p)
    cert = ErrorBoundCertificate(form="two-regime", p=p, gamma0=gamma0,
                                 r0=math.inf, region=WholeSpace())
    return gamma0, cert


def kl_gap(d: Desingularizer, obj: ConvexObjective, x) -> Optional[float]:
    """phi'(f(x) - min f) * ||least-norm subgradient|| - 1, or None when x is
    outside the certified region or value band (not a failure, just out of
    domain).  +inf when the subdifferential is empty, which certifies
    trivially."""
    gap = value_gap(obj, x)
    if not gap.is_finite:
        return None
    g = gap.finite_value()
    if g <= 0.0 or g >= d.r0:
        return None
    if d.region is not None and not d.region.contains(np.asarray(x, dtype=float)):
        return None
    norm = subgradient_norm(obj, x)
    if math.isinf(norm):
        return math.inf
    return d.phi_prime(g) * norm - 1.0
