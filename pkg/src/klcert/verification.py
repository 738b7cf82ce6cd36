"""Cross-checks between descent runs and their certificates.

Each check produces a CheckResult with one of five statuses:

  pass             worst violation within tolerance
  fail             the certificate's claim is violated where it applies
  region-violated  iterates left the certified region, so the claim is mute
  skipped          prerequisite missing (e.g. no converged minimizer)
  inconclusive     nothing to measure (no valid samples)

Only "fail" counts against a report; the other non-pass statuses mean the
certificate was never contradicted.  Sampling checks are falsification
tools, not proofs: they hunt for counterexamples with seeded, reproducible
draws.
"""

from __future__ import annotations

import json
import math
import os
import tempfile
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from klcert.convex import (
    AffineSet,
    Ball,
    ConvexObjective,
    Halfspace,
    IntersectionSet,
    SingletonSet,
    value_gap,
)
from klcert.descent import DescentRun
from klcert.desingularization import (
    Desingularizer,
    ErrorBoundCertificate,
    PowerDesingularizer,
    kl_gap,
)
from klcert.majorant import MajorantSequence, empirical_prox_steps
from klcert.regions import MetricBall, WholeSpace

STATUSES = ("pass", "fail", "region-violated", "skipped", "inconclusive")


@dataclass(frozen=True)
class CheckResult:
    name: str
    status: str
    worst_violation: Optional[float] = None
    samples: int = 0
    tolerance: float = 0.0
    detail: str = ""

    def __post_init__(self):
        if self.status not in STATUSES:
            raise ValueError(f"unknown status {self.status!r}")

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "status": self.status,
            "worst_violation": self.worst_violation,
            "samples": self.samples,
            "tolerance": self.tolerance,
            "detail": self.detail,
        }

    @staticmethod
    def from_dict(data: dict) -> "CheckResult":
        return CheckResult(
            name=data["name"],
            status=data["status"],
            worst_violation=data.get("worst_violation"),
            samples=int(data.get("samples", 0)),
            tolerance=float(data.get("tolerance", 0.0)),
            detail=data.get("detail", ""),
        )


@dataclass
class CertificationReport:
    checks: list = field(default_factory=list)
    run_id: str = ""
    certificate_id: str = ""

    @property
    def passed(self) -> bool:
        return all(c.status != "fail" for c in self.checks)

    def add(self, check: CheckResult) -> None:
        self.checks.append(check)

    def to_dict(self) -> dict:
        return {
            "schema_version": 1,
            "run_id": self.run_id,
            "certificate_id": self.certificate_id,
            "passed": self.passed,
            "checks": [c.to_dict() for c in self.checks],
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
    def from_dict(data: dict) -> "CertificationReport":
        report = CertificationReport(
            run_id=data.get("run_id", ""),
            certificate_id=data.get("certificate_id", ""),
        )
        for c in data.get("checks", []):
            report.add(CheckResult.from_dict(c))
        return report

    def format_table(self) -> str:
        header = f"{'check':<28} {'status':<16} {'worst':>13} {'n':>7} {'tol':>9}"
        lines = [header, "-" * len(header)]
        for c in self.checks:
            worst = "" if c.worst_violation is None else f"{c.worst_violation:+.3e}"
            lines.append(
                f"{c.name:<28} {c.status:<16} {worst:>13} {c.samples:>7} "
                f"{c.tolerance:>9.1e}"
            )
        lines.append(f"overall: {'PASS' if self.passed else 'FAIL'}")
        return "\n".join(lines)


# ---------------------------------------------------------------------------
# trajectory checks
# ---------------------------------------------------------------------------


def _first_region_exit(region, iterates: np.ndarray) -> Optional[int]:
    if region is None or isinstance(region, WholeSpace):
        return None
    for k in range(iterates.shape[0]):
        if not bool(region.contains(iterates[k])):
            return k
    return None


def check_majorization(run: DescentRun, maj: MajorantSequence,
                       d: Desingularizer, tol: float = 1e-9) -> CheckResult:
    """f(x_k) - min f <= psi(alpha_k) for every k both traces cover.

    A genuine excess inside the certified region fails the check; iterates
    escaping the region downgrade it instead, since the guarantee only
    speaks on the region.
    """
    name = "majorization"
    if run.min_value is None:
        return CheckResult(name, "skipped", tolerance=tol,
                           detail="run has no stored minimum value")
    gaps = run.gaps
    count = min(len(gaps), len(maj.psi_values))
    exit_k = _first_region_exit(d.region, np.asarray(run.iterates)[:count])
    upto = count if exit_k is None else exit_k
    worst = -math.inf
    at = -1
    for k in range(upto):
        v = float(gaps[k]) - float(maj.psi_values[k])
        if v > worst:
            worst, at = v, k
    if upto == 0:
        return CheckResult(name, "region-violated", samples=0, tolerance=tol,
                           detail="start already outside the certified region")
    if worst > tol:
        return CheckResult(name, "fail", worst_violation=worst, samples=upto,
                           tolerance=tol, detail=f"worst excess at k={at}")
    if exit_k is not None:
        return CheckResult(
            name, "region-violated", worst_violation=worst, samples=upto,
            tolerance=tol,
            detail=f"iterate {exit_k} left the certified region; "
                   f"bound held on the in-region prefix")
    return CheckResult(name, "pass", worst_violation=worst, samples=upto,
                       tolerance=tol)


def check_distance_bound(run: DescentRun, maj: MajorantSequence,
                         xstar=None, tol: float = 1e-7) -> CheckResult:
    """||x_k - x*|| <= (b/a) alpha_k + sqrt(psi(alpha_{k-1}) / a), k >= 1.

    x* is the supplied minimizer, or the run's own limit when the trajectory
    has numerically stopped (final step below 1e-10 or exact stationarity).
    """
    name = "distance-bound"
    if xstar is None:
        settled = run.converged or (
            run.num_steps > 0 and float(run.step_norms[-1]) < 1e-10)
        if not settled:
            return CheckResult(name, "skipped", tolerance=tol,
                               detail="run did not converge and no minimizer "
                                      "was supplied")
        xstar = run.final_point()
    xstar = np.asarray(xstar, dtype=float)
    count = min(len(run.iterates), len(maj.alpha))
    if count < 2:
        return CheckResult(name, "skipped", tolerance=tol,
                           detail="need at least one step")
    worst = -math.inf
    at = -1
    for k in range(1, count):
        lhs = float(np.linalg.norm(np.asarray(run.iterates[k]) - xstar))
        v = lhs - maj.distance_bound(k)
        if v > worst:
            worst, at = v, k
    status = "pass" if worst <= tol else "fail"
    return CheckResult(name, status, worst_violation=worst, samples=count - 1,
                       tolerance=tol, detail=f"worst at k={at}")


def check_prox_step_domination(run: DescentRun, d: Desingularizer,
                               zeta_value: float, tol: float = 1e-9,
                               gap_floor: float = 1e-12) -> CheckResult:
    """Empirical scalar steps s_k of the run dominate the certified zeta."""
    name = "prox-step-domination"
    if run.min_value is None:
        return CheckResult(name, "skipped", tolerance=tol,
                           detail="run has no stored minimum value")
    _, s = empirical_prox_steps(run.gaps, d, gap_floor=gap_floor)
    if s.size == 0:
        return CheckResult(name, "inconclusive", tolerance=tol,
                           detail="no steps above the gap floor")
    worst = zeta_value - float(np.min(s))
    status = "pass" if worst <= tol else "fail"
    return CheckResult(name, status, worst_violation=worst,
                       samples=int(s.size), tolerance=tol,
                       detail=f"min s_k = {float(np.min(s)):.6g} "
                              f"vs zeta = {zeta_value:.6g}")


# ---------------------------------------------------------------------------
# sampling checks
# ---------------------------------------------------------------------------


Sampler = Callable[[np.random.Generator, int], np.ndarray]


def region_sampler(region, dimension: int, anchor=None,
                   scale: float = 1.0) -> Sampler:
    """Uniform sampler of a certificate region.

    Unbounded regions need an anchor and scale: draws then come from the
    metric ball around the anchor, which is inside the region trivially.
    """
    if region is None or isinstance(region, WholeSpace):
        center = np.zeros(dimension) if anchor is None else np.asarray(
            anchor, dtype=float)
        ball = MetricBall(center, scale)
        return lambda rng, count: ball.sample(rng, dimension, count)
    return lambda rng, count: region.sample(rng, dimension, count)


def check_kl_sampling(d: Desingularizer, obj: ConvexObjective,
                      sampler: Sampler, n_samples: int = 10000,
                      tol: float = 1e-9, seed: int = 0) -> CheckResult:
    """min over samples of phi'(f(x) - min f) ||subgradient|| - 1 >= -tol.

    Samples outside the value band or the objective's domain do not count;
    they are neither evidence for nor against the certificate.
    """
    name = "kl-sampling"
    rng = np.random.default_rng(seed)
    pts = sampler(rng, n_samples)
    worst_gap = math.inf
    valid = 0
    for x in pts:
        g = kl_gap(d, obj, x)
        if g is None:
            continue
        valid += 1
        if g < worst_gap:
            worst_gap = g
    if valid == 0:
        return CheckResult(name, "inconclusive", samples=0, tolerance=tol,
                           detail="no sample landed in the certified band")
    status = "pass" if worst_gap >= -tol else "fail"
    return CheckResult(name, status, worst_violation=-worst_gap,
                       samples=valid, tolerance=tol,
                       detail=f"min gap {worst_gap:.3e} over {valid} samples")


_EXACT_DISTANCE_SETS = (SingletonSet, Ball, Halfspace, AffineSet,
                        IntersectionSet)


def check_error_bound_sampling(cert: ErrorBoundCertificate,
                               obj: ConvexObjective, solution_set,
                               sampler: Sampler, n_samples: int = 10000,
                               tol: float = 1e-9, seed: int = 0) -> CheckResult:
    """min over samples of residual(f(x) - min f) - dist(x, argmin) >= -tol."""
    name = "error-bound-sampling"
    if not isinstance(solution_set, _EXACT_DISTANCE_SETS):
        return CheckResult(name, "inconclusive", tolerance=tol,
                           detail="solution set has no exact distance oracle")
    rng = np.random.default_rng(seed)
    pts = sampler(rng, n_samples)
    dists = np.atleast_1d(solution_set.distance(pts))
    worst = math.inf
    valid = 0
    for x, dist in zip(pts, dists):
        gap = value_gap(obj, x)
        if not gap.is_finite:
            continue
        g = max(gap.finite_value(), 0.0)
        if g >= cert.r0:
            continue
        valid += 1
        margin = cert.residual(g) - float(dist)
        if margin < worst:
            worst = margin
    if valid == 0:
        return CheckResult(name, "inconclusive", samples=0, tolerance=tol,
                           detail="no sample landed in the certified band")
    status = "pass" if worst >= -tol else "fail"
    return CheckResult(name, status, worst_violation=-worst, samples=valid,
                       tolerance=tol,
                       detail=f"min margin {worst:.3e} over {valid} samples")


# ---------------------------------------------------------------------------
# falsification helpers
# ---------------------------------------------------------------------------


def scale_desingularizer(d: PowerDesingularizer,
                         factor: float) -> PowerDesingularizer:
    """Same certificate with the growth constant gamma scaled by factor.

    gamma scales as scale^(-p), so the new scale is scale * factor^(-1/p);
    for quadratic profiles this multiplies ell by factor.  Scaling a tight
    certificate up must flip a sampling check — that is the falsification
    harness's probe that the checkers can detect bad constants.
    """
    if factor <= 0:
        raise ValueError("factor must be positive")
    return PowerDesingularizer(
        scale=d.scale * factor ** (-1.0 / d.exponent),
        exponent=d.exponent,
        r0=d.r0,
        region=d.region,
    )


def scale_certificate(cert: ErrorBoundCertificate,
                      factor: float) -> ErrorBoundCertificate:
    """Power certificate with gamma scaled by factor (claims grow with it)."""
    if cert.form != "power":
        raise ValueError("only power certificates support constant scaling")
    if factor <= 0:
        raise ValueError("factor must be positive")
    return ErrorBoundCertificate(form="power", p=cert.p,
                                 gamma=cert.gamma * factor, r0=cert.r0,
                                 region=cert.region)
