"""Descent methods that certify their own step inequalities.

Every run records, per step, the objective value, the step norm, and the
norm of an explicit subgradient witness, so that the two certificate
inequalities can be audited after the fact:

  sufficient decrease   f(x_k) + a ||x_k - x_{k-1}||^2 <= f(x_{k-1})
  relative error        ||w_k|| <= b ||x_k - x_{k-1}||,  w_k in subdiff f(x_k)

For the forward-backward step x_+ = prox_{lam g}(x - lam grad h(x)) with
step sizes in [lam_lo, lam_hi], lam_hi < 2/L, the constants are
a = 1/lam_hi - L/2 and b = 1/lam_lo + L; the witness comes exactly from the
prox optimality inclusion, w_+ = (x - x_+)/lam - grad h(x) + grad h(x_+).
A step of exactly zero means stationarity: the run stops there and is
marked converged.
"""

from __future__ import annotations

import json
import math
import os
import tempfile
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from klcert.convex import (
    Array,
    CompositeObjective,
    ConvexObjective,
    as_point,
    half_squared_distance,
    indicator,
    prox,
    zero_objective,
)
from klcert.error_bounds import FeasibilityInstance, LassoInstance
from klcert.tracefmt import write_trace


@dataclass(frozen=True)
class DescentCertificateParams:
    """Constants (a, b) of the two step inequalities."""

    a: float
    b: float

    def __post_init__(self):
        if self.a <= 0 or self.b <= 0:
            raise ValueError("certificate constants must be positive")


@dataclass(frozen=True)
class StepSchedule:
    """Step sizes lam_k with certified bounds lam_lo <= lam_k <= lam_hi."""

    lambda_min: float
    lambda_max: float
    fn: Optional[Callable[[int], float]] = None

    def __post_init__(self):
        if not (0.0 < self.lambda_min <= self.lambda_max):
            raise ValueError("need 0 < lambda_min <= lambda_max")

    def step(self, k: int) -> float:
        lam = self.lambda_min if self.fn is None else float(self.fn(k))
        if not (self.lambda_min - 1e-15 <= lam <= self.lambda_max + 1e-15):
            raise ValueError(f"schedule value {lam} escapes its declared bounds")
        return lam

    @staticmethod
    def constant(lam: float) -> "StepSchedule":
        return StepSchedule(lambda_min=lam, lambda_max=lam)

    @staticmethod
    def over_lipschitz(d: float, lipschitz: float) -> "StepSchedule":
        """Constant step d / L for a relative step size d in (0, 2)."""
        if not (0.0 < d < 2.0):
            raise ValueError("relative step size must lie in (0, 2)")
        if lipschitz <= 0:
            raise ValueError("Lipschitz constant must be positive")
        return StepSchedule.constant(d / lipschitz)


DEFAULT_RELATIVE_STEP = 0.5


def certificate_params(schedule: StepSchedule, lipschitz: float) -> DescentCertificateParams:
    """(a, b) implied by the schedule bounds and the smooth Lipschitz constant."""
    L = float(lipschitz)
    if L < 0:
        raise ValueError("Lipschitz constant must be nonnegative")
    if L > 0 and schedule.lambda_max >= 2.0 / L:
        raise ValueError("largest step must stay strictly below 2/L")
    a = 1.0 / schedule.lambda_max - L / 2.0
    b = 1.0 / schedule.lambda_min + L
    return DescentCertificateParams(a=a, b=b)


@dataclass
class DescentRun:
    """Record of a descent trajectory and its certificate ingredients.

    raw_values holds f(x_k) (math.inf allowed at k = 0 for indicator-type
    objectives started outside the domain; it is a record, not an operand).
    """

    method: str
    params: DescentCertificateParams
    iterates: Array            # (T+1, n)
    raw_values: Array          # (T+1,)
    step_norms: Array          # (T,)
    witness_norms: Array       # (T,)
    step_sizes: Array          # (T,)
    min_value: Optional[float] = None
    converged: bool = False
    metadata: dict = field(default_factory=dict)

    @property
    def num_steps(self) -> int:
        return len(self.step_norms)

    @property
    def gaps(self) -> Array:
        """f(x_k) - min f; requires a stored minimum value."""
        if self.min_value is None:
            raise ValueError("run has no stored minimum value")
        return self.raw_values - self.min_value

    def final_point(self) -> Array:
        return self.iterates[-1]

    def h1_violation(self) -> float:
        """max_k of f(x_k) + a ||step_k||^2 - f(x_{k-1}) over finite pairs."""
        worst = -math.inf
        for k in range(1, len(self.raw_values)):
            prev = self.raw_values[k - 1]
            if math.isinf(prev):
                continue
            lhs = self.raw_values[k] + self.params.a * self.step_norms[k - 1] ** 2
            worst = max(worst, lhs - prev)
        return worst

    def h2_violation(self) -> float:
        """max_k of ||w_k|| - b ||step_k||."""
        if self.num_steps == 0:
            return -math.inf
        return float(np.max(self.witness_norms - self.params.b * self.step_norms))

    def trace_rows(self) -> list[dict]:
        rows = []
        gaps = self.gaps if self.min_value is not None else None
        for k in range(len(self.raw_values)):
            row = {"k": k}
            if gaps is not None:
                row["value_gap"] = float(gaps[k])
            if k >= 1:
                row["step_norm"] = float(self.step_norms[k - 1])
                row["witness_norm"] = float(self.witness_norms[k - 1])
            rows.append(row)
        return rows

    def to_csv(self, path) -> None:
        write_trace(path, self.trace_rows())

    def to_metadata_dict(self) -> dict:
        return {
            "schema_version": 1,
            "method": self.method,
            "a": self.params.a,
            "b": self.params.b,
            "min_value": self.min_value,
            "converged": self.converged,
            "num_steps": self.num_steps,
            "step_sizes": [float(v) for v in self.step_sizes],
            "step_norms": [float(v) for v in self.step_norms],
            "witness_norms": [float(v) for v in self.witness_norms],
            "iterates": [list(map(float, row)) for row in self.iterates],
            "raw_values": [float(v) if not math.isinf(v) else None
                           for v in self.raw_values],
            "metadata": _jsonable(self.metadata),
        }

    def to_metadata_json(self, path) -> None:
        payload = json.dumps(self.to_metadata_dict(), sort_keys=True, indent=2)
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
    def from_metadata_dict(data: dict) -> "DescentRun":
        iterates = np.asarray(data["iterates"], dtype=float)
        raw = np.array([math.inf if v is None else float(v)
                        for v in data["raw_values"]])
        if "step_norms" in data:
            steps = np.asarray(data["step_norms"], dtype=float)
        elif iterates.shape[0] > 1:
            steps = np.linalg.norm(np.diff(iterates, axis=0), axis=1)
        else:
            steps = np.zeros(0)
        meta = data.get("metadata", {})
        witness = np.asarray(data.get("witness_norms",
                                      np.zeros_like(steps)), dtype=float)
        return DescentRun(
            method=data["method"],
            params=DescentCertificateParams(a=float(data["a"]), b=float(data["b"])),
            iterates=iterates,
            raw_values=raw,
            step_norms=steps,
            witness_norms=witness,
            step_sizes=np.asarray(data["step_sizes"], dtype=float),
            min_value=data.get("min_value"),
            converged=bool(data.get("converged", False)),
            metadata=meta,
        )


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    return obj


# ---------------------------------------------------------------------------
# methods
# ---------------------------------------------------------------------------


def forward_backward(composite: CompositeObjective, x0, schedule: StepSchedule,
                     steps: int, min_value: Optional[float] = None,
                     method: str = "forward-backward") -> DescentRun:
    """Proximal-gradient iteration with exact certificate witnesses."""
    if steps < 1:
        raise ValueError("need at least one step")
    params = certificate_params(schedule, composite.lipschitz)
    x = as_point(x0, composite.dimension)
    grad = composite.smooth.gradient_fn

    iterates = [x]
    values = [composite.value(x).as_float()]
    step_norms, witness_norms, step_sizes = [], [], []
    converged = False
    gx = grad(x)
    for k in range(steps):
        lam = schedule.step(k)
        xn = prox(composite.nonsmooth, x - lam * gx, lam)
        move = float(np.linalg.norm(xn - x))
        if move == 0.0:
            converged = True
            break
        gxn = grad(xn)
        witness = (x - xn) / lam - gx + gxn
        iterates.append(xn)
        values.append(composite.value(xn).as_float())
        step_norms.append(move)
        witness_norms.append(float(np.linalg.norm(witness)))
        step_sizes.append(lam)
        x, gx = xn, gxn

    return DescentRun(
        method=method,
        params=params,
        iterates=np.asarray(iterates),
        raw_values=np.asarray(values),
        step_norms=np.asarray(step_norms),
        witness_norms=np.asarray(witness_norms),
        step_sizes=np.asarray(step_sizes),
        min_value=min_value,
        converged=converged,
    )


def ista(inst: LassoInstance, schedule: Optional[StepSchedule] = None,
         steps: int = 1000, min_value: Optional[float] = None) -> DescentRun:
    """Proximal gradient on 0.5||Ax - y||^2 + mu||x||_1 started at inst.x0.

    Default schedule: constant step 0.5 / L with L = ||A^T A||.  Iterates
    stay in the l1 ball of radius inst.radius_bound(); the per-iterate l1
    norms are recorded for auditing.
    """
    L = inst.lipschitz
    if schedule is None:
        schedule = StepSchedule.over_lipschitz(DEFAULT_RELATIVE_STEP, L)
    run = forward_backward(inst.composite(), inst.x0, schedule, steps,
                           min_value=min_value, method="ista")
    l1_norms = [float(np.abs(x).sum()) for x in run.iterates]
    R = inst.radius_bound()
    worst = max(l1_norms)
    if worst > R + 1e-9:
        # Guaranteed for any valid step schedule; tripping it means a bug,
        # not an unlucky instance.
        raise RuntimeError(
            f"iterate escaped the l1 ball: {worst!r} > R = {R!r}")
    run.metadata["l1_norms"] = l1_norms
    run.metadata["radius_bound"] = R
    run.metadata["lipschitz"] = L
    return run


def barycentric_projection(inst: FeasibilityInstance, x0, steps: int = 1000
                           ) -> DescentRun:
    """Averaged projections x_+ = sum_i w_i P_i(x): unit gradient step on
    f = 0.5 sum_i w_i dist^2(., C_i), so a = 1/2 and b = 2.

    The distance to the declared center xbar is recorded per iterate; it is
    nonincreasing (Fejer monotonicity), which keeps the run inside the
    certificate region B(xbar, ||x0 - xbar||)."""
    f = inst.objective()
    composite = CompositeObjective(smooth=f, nonsmooth=zero_objective(f.dimension))
    run = forward_backward(composite, x0, StepSchedule.constant(1.0), steps,
                           min_value=0.0, method="barycentric")
    run.metadata["dist_to_xbar"] = [float(np.linalg.norm(x - inst.xbar))
                                    for x in run.iterates]
    return run


def alternating_projection(inst: FeasibilityInstance, x0, steps: int = 1000
                           ) -> DescentRun:
    """Alternating projections x_+ = P_1(P_2(x)) for exactly two sets.

    This is the forward-backward step with unit step size on
    g = indicator(C_1) + 0.5 dist^2(., C_2), again a = 1/2 and b = 2.
    A start outside C_1 is first projected onto it (recorded in metadata).
    Exposed for two sets only: the averaged variant covers m > 2.
    """
    if len(inst.sets) != 2:
        raise ValueError("alternating projections are exposed for two sets "
                         "only; use barycentric_projection for more")
    c1, c2 = inst.sets
    x0 = as_point(x0, inst.dimension)
    projected_start = False
    if not bool(c1.contains(x0, tol=1e-12)):
        x0 = c1.project(x0)
        projected_start = True
    composite = CompositeObjective(
        smooth=half_squared_distance(c2, inst.dimension),
        nonsmooth=indicator(c1, inst.dimension),
    )
    run = forward_backward(composite, x0, StepSchedule.constant(1.0), steps,
                           min_value=0.0, method="alternating")
    run.metadata["projected_start"] = projected_start
    run.metadata["dist_to_c2"] = [float(np.asarray(c2.distance(x)))
                                  for x in run.iterates]
    run.metadata["dist_to_xbar"] = [float(np.linalg.norm(x - inst.xbar))
                                    for x in run.iterates]
    return run
