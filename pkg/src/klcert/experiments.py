"""End-to-end pipelines: instance -> method -> certificate -> majorant ->
checks -> artifacts.

A config fully determines an experiment; identical configs produce byte-
identical artifacts (seeded sampling, sorted JSON keys, fixed-format CSV).
The certificate block accepts two escape hatches used by the falsification
harness: "scale_gamma" multiplies the growth constant, "override_q"
replaces the certified rate — both exist so the check suite can prove it
catches bad constants.
"""

from __future__ import annotations

import json
import math
import os
import tempfile
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from klcert.convex import (
    CompositeObjective,
    ConvexObjective,
    IntersectionSet,
    SingletonSet,
    alternating_objective,
    half_squared_distance,
    quadratic_objective,
    zero_objective,
)
from klcert.descent import (
    DEFAULT_RELATIVE_STEP,
    DescentRun,
    StepSchedule,
    alternating_projection,
    barycentric_projection,
    certificate_params,
    forward_backward,
    ista,
)
from klcert.desingularization import (
    Desingularizer,
    ErrorBoundCertificate,
    PowerDesingularizer,
    desingularizer_from_dict,
    from_error_bound,
    to_error_bound,
)
from klcert.error_bounds import (
    feasibility_bound,
    lasso_gamma,
    lasso_nu,
    uniformly_convex_profile,
)
from klcert.majorant import (
    MajorantSequence,
    steps_to_epsilon,
    worst_case_sequence,
    zeta,
)
from klcert.problems import (
    GeneratedInstance,
    feasibility_from_payload,
    generate_instance,
    lasso_from_payload,
)
from klcert.regions import L1Ball, WholeSpace
from klcert.tracefmt import write_table, write_trace
from klcert.verification import (
    CertificationReport,
    check_distance_bound,
    check_error_bound_sampling,
    check_kl_sampling,
    check_majorization,
    check_prox_step_domination,
    region_sampler,
    scale_certificate,
    scale_desingularizer,
)


def _atomic_json(path, payload: dict) -> None:
    text = json.dumps(payload, sort_keys=True, indent=2)
    directory = os.path.dirname(os.path.abspath(path)) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="ascii") as fh:
            fh.write(text + "\n")
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


@dataclass
class ExperimentConfig:
    instance: dict
    method: dict = field(default_factory=dict)
    certificate: dict = field(default_factory=dict)
    checks: dict = field(default_factory=dict)
    name: str = ""
    schema_version: int = 1

    def __post_init__(self):
        if self.schema_version != 1:
            raise ValueError("unsupported config schema version")
        if "path" not in self.instance and "family" not in self.instance:
            raise ValueError("instance needs either a path or a family")

    def to_dict(self) -> dict:
        return {
            "schema_version": self.schema_version,
            "name": self.name,
            "instance": self.instance,
            "method": self.method,
            "certificate": self.certificate,
            "checks": self.checks,
        }

    def to_json(self, path) -> None:
        _atomic_json(path, self.to_dict())

    @staticmethod
    def from_dict(data: dict) -> "ExperimentConfig":
        return ExperimentConfig(
            instance=dict(data["instance"]),
            method=dict(data.get("method", {})),
            certificate=dict(data.get("certificate", {})),
            checks=dict(data.get("checks", {})),
            name=data.get("name", ""),
            schema_version=int(data.get("schema_version", 1)),
        )

    @staticmethod
    def from_json(path) -> "ExperimentConfig":
        with open(path, "r", encoding="ascii") as fh:
            return ExperimentConfig.from_dict(json.load(fh))


def load_instance(config: ExperimentConfig) -> GeneratedInstance:
    fields = dict(config.instance)
    if "path" in fields:
        return GeneratedInstance.from_json(fields["path"])
    family = fields.pop("family")
    seed = int(fields.pop("seed", 0))
    return generate_instance(family, seed=seed, **fields)


@dataclass
class PipelineBundle:
    """Everything a family pipeline must deliver to the generic checker."""

    run: DescentRun
    desingularizer: Desingularizer
    certificate: ErrorBoundCertificate
    objective: ConvexObjective
    solution_set: object
    sampler: Callable[[np.random.Generator, int], np.ndarray]
    minimizer: Optional[np.ndarray]
    constants: dict
    certificate_id: str


def _method_steps(method: dict, default: int = 1000) -> int:
    steps = int(method.get("steps", default))
    if steps < 1:
        raise ValueError("need at least one step")
    return steps


def _build_lasso(gi: GeneratedInstance, method: dict, cert_cfg: dict
                 ) -> PipelineBundle:
    inst, min_value, minimizer = lasso_from_payload(gi.payload)
    L = inst.lipschitz
    d_rel = float(method.get("relative_step", DEFAULT_RELATIVE_STEP))
    schedule = StepSchedule.over_lipschitz(d_rel, L)
    run = ista(inst, schedule, _method_steps(method), min_value=min_value)

    source = cert_cfg.get("source", "computed")
    if source == "computed":
        nu, nu_kind = lasso_nu(inst, mode="exact")
    elif source == "supplied":
        nu, nu_kind = float(cert_cfg["nu"]), "supplied"
    else:
        raise ValueError(
            f"unknown certificate source {source!r}; growth constants need "
            "an exact (upper-bound) Hoffman constant or a supplied one")
    consts = lasso_gamma(inst, nu)
    cert = ErrorBoundCertificate(form="power", p=2.0,
                                 gamma=2.0 * consts.gamma_R,
                                 region=L1Ball(consts.R))
    desing = from_error_bound(cert)
    return PipelineBundle(
        run=run,
        desingularizer=desing,
        certificate=cert,
        objective=inst.objective(min_value=min_value),
        solution_set=SingletonSet(minimizer),
        sampler=region_sampler(cert.region, inst.dimension),
        minimizer=minimizer,
        constants={
            "nu": nu, "nu_kind": nu_kind, "gamma_R": consts.gamma_R,
            "kappa_R": consts.kappa_R, "R": consts.R, "lipschitz": L,
            "relative_step": d_rel,
        },
        certificate_id=f"lasso-growth(gamma_R={consts.gamma_R:.6g})",
    )


def _build_feasibility(gi: GeneratedInstance, method: dict, variant: str
                       ) -> PipelineBundle:
    inst, x0 = feasibility_from_payload(gi.payload)
    steps = _method_steps(method)
    if variant == "barycentric":
        run = barycentric_projection(inst, x0, steps)
        objective = inst.objective()
        solution = IntersectionSet(inst.sets)
    elif variant == "alternating":
        run = alternating_projection(inst, x0, steps)
        objective = alternating_objective(inst.sets[0], inst.sets[1],
                                          inst.dimension)
        solution = IntersectionSet(inst.sets[:2])
    else:
        raise ValueError(f"unknown feasibility variant {variant!r}")
    start = np.asarray(run.iterates[0], dtype=float)
    desing = feasibility_bound(inst, start, variant)
    cert = to_error_bound(desing)
    return PipelineBundle(
        run=run,
        desingularizer=desing,
        certificate=cert,
        objective=objective,
        solution_set=solution,
        sampler=region_sampler(desing.region, inst.dimension),
        minimizer=None,
        constants={"M": desing.ell, "variant": variant,
                   "start_distance": float(np.linalg.norm(start - inst.xbar)),
                   "inner_radius": inst.R},
        certificate_id=f"feasibility-{variant}(M={desing.ell:.6g})",
    )


def _build_uniformly_convex(gi: GeneratedInstance, method: dict
                            ) -> PipelineBundle:
    payload = gi.payload
    center = np.asarray(payload["center"], dtype=float)
    weight = float(payload["weight"])
    x0 = np.asarray(payload["x0"], dtype=float)
    obj = quadratic_objective(center, weight=weight)
    composite = CompositeObjective(smooth=obj,
                                   nonsmooth=zero_objective(obj.dimension))
    d_rel = float(method.get("relative_step", DEFAULT_RELATIVE_STEP))
    schedule = StepSchedule.over_lipschitz(d_rel, obj.lipschitz)
    run = forward_backward(composite, x0, schedule, _method_steps(method),
                           min_value=0.0, method="gradient")
    # Modulus of 2-uniform convexity of w ||x - c||^2 is 2w.
    desing = uniformly_convex_profile(sigma=2.0 * weight, p=2.0, alpha0=1.0)
    cert = to_error_bound(desing)
    anchor_scale = 2.0 * float(np.linalg.norm(x0 - center)) + 1.0
    return PipelineBundle(
        run=run,
        desingularizer=desing,
        certificate=cert,
        objective=obj,
        solution_set=SingletonSet(center),
        sampler=region_sampler(desing.region, obj.dimension, anchor=center,
                               scale=anchor_scale),
        minimizer=center,
        constants={"modulus": 2.0 * weight, "lipschitz": obj.lipschitz,
                   "relative_step": d_rel},
        certificate_id=f"uniformly-convex(sigma={2.0 * weight:.6g})",
    )


def _build_tight_quadratic(gi: GeneratedInstance, method: dict
                           ) -> PipelineBundle:
    inst, x0 = feasibility_from_payload(gi.payload)
    ball = inst.sets[0]
    n = inst.dimension
    growth = float(gi.payload.get("growth_constant", 1.0))
    smooth = half_squared_distance(ball, n)
    composite = CompositeObjective(smooth=smooth,
                                   nonsmooth=zero_objective(n))
    run = forward_backward(composite, x0, StepSchedule.constant(1.0),
                           _method_steps(method, default=50), min_value=0.0,
                           method="projection-gradient")
    # f = 0.5 dist^2 grows with constant exactly `growth`; the certificate
    # below has zero slack, which is the whole point of this instance.
    desing = PowerDesingularizer(scale=math.sqrt(2.0 / growth), exponent=2.0,
                                 region=WholeSpace(), ell=growth)
    cert = to_error_bound(desing)
    anchor_scale = 1.2 * float(np.linalg.norm(x0 - ball.center))
    return PipelineBundle(
        run=run,
        desingularizer=desing,
        certificate=cert,
        objective=smooth,
        solution_set=ball,
        sampler=region_sampler(WholeSpace(), n, anchor=ball.center,
                               scale=anchor_scale),
        minimizer=None,
        constants={"growth_constant": growth},
        certificate_id=f"tight-quadratic(M={growth:.6g})",
    )


def build_pipeline(gi: GeneratedInstance, config: ExperimentConfig
                   ) -> PipelineBundle:
    method = dict(config.method)
    name = method.get("name")
    if gi.family == "lasso":
        if name not in (None, "ista"):
            raise ValueError(f"method {name!r} does not apply to this family")
        return _build_lasso(gi, method, config.certificate)
    if gi.family == "feasibility":
        variant = name or "barycentric"
        return _build_feasibility(gi, method, variant)
    if gi.family == "uniformly-convex":
        if name not in (None, "gradient"):
            raise ValueError(f"method {name!r} does not apply to this family")
        return _build_uniformly_convex(gi, method)
    if gi.family == "tight-quadratic":
        return _build_tight_quadratic(gi, method)
    raise ValueError(f"unknown family {gi.family!r}")


def majorant_from_rate(d: Desingularizer, q: float, f0: float, params,
                       steps: int) -> MajorantSequence:
    """Geometric value bounds f0 / q^k packaged as a majorant sequence.

    Exists for the rate-override escape hatch: an inflated q produces bounds
    the run cannot honor, and the majorization check must say so.
    """
    if q <= 1.0:
        raise ValueError("rate q must exceed 1")
    psi_values = np.array([f0 / q ** k for k in range(steps + 1)])
    alpha = np.array([d.phi(float(v)) for v in psi_values])
    ell = d.ell if d.ell is not None else d.psi_prime_lipschitz(float(alpha[0]))
    if ell is None:
        raise ValueError("profile has no Lipschitz constant for its inverse")
    return MajorantSequence(zeta=zeta(params.a, params.b, ell), alpha=alpha,
                            psi_values=psi_values, params=params, ell=ell,
                            closed_form=None)


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    instance: GeneratedInstance
    bundle: PipelineBundle
    majorant: MajorantSequence
    report: CertificationReport
    paths: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.report.passed


def merged_trace_rows(run: DescentRun, maj: MajorantSequence,
                      xstar=None) -> list[dict]:
    rows = []
    for k in range(len(run.raw_values)):
        row = {"k": k}
        if run.min_value is not None and not math.isinf(run.raw_values[k]):
            row["value_gap"] = float(run.raw_values[k]) - run.min_value
        if k < len(maj.psi_values):
            row["value_bound"] = float(maj.psi_values[k])
        if k >= 1:
            row["step_norm"] = float(run.step_norms[k - 1])
            row["witness_norm"] = float(run.witness_norms[k - 1])
            if k < len(maj.alpha):
                row["distance_bound"] = maj.distance_bound(k)
        if xstar is not None:
            row["distance_to_xstar"] = float(
                np.linalg.norm(np.asarray(run.iterates[k]) - xstar))
        rows.append(row)
    return rows


def run_experiment(config: ExperimentConfig,
                   out_dir: Optional[str] = None) -> ExperimentResult:
    gi = load_instance(config)
    bundle = build_pipeline(gi, config)
    run = bundle.run

    cert_cfg = dict(config.certificate)
    desing = bundle.desingularizer
    cert = bundle.certificate
    if "scale_gamma" in cert_cfg:
        factor = float(cert_cfg["scale_gamma"])
        desing = scale_desingularizer(desing, factor)
        cert = scale_certificate(cert, factor)
        bundle.certificate_id += f"*scaled({factor:g})"

    gaps = run.gaps
    f0 = float(gaps[0])
    if f0 <= 0:
        raise ValueError("start is already optimal; nothing to certify")
    if "override_q" in cert_cfg:
        maj = majorant_from_rate(desing, float(cert_cfg["override_q"]), f0,
                                 run.params, run.num_steps)
        bundle.certificate_id += f"*q={float(cert_cfg['override_q']):g}"
    else:
        maj = worst_case_sequence(desing, f0, run.params, run.num_steps)

    checks_cfg = dict(config.checks)
    samples = int(checks_cfg.get("samples", 2000))
    seed = int(checks_cfg.get("seed", 0))
    tol = float(checks_cfg.get("tolerance", 1e-9))

    report = CertificationReport(
        run_id=config.name or f"{gi.family}-seed{gi.seed}",
        certificate_id=bundle.certificate_id,
    )
    report.add(check_majorization(run, maj, desing, tol=tol))
    report.add(check_distance_bound(run, maj, xstar=bundle.minimizer))
    report.add(check_prox_step_domination(run, desing, maj.zeta, tol=tol))
    report.add(check_kl_sampling(desing, bundle.objective, bundle.sampler,
                                 n_samples=samples, tol=tol, seed=seed))
    report.add(check_error_bound_sampling(cert, bundle.objective,
                                          bundle.solution_set, bundle.sampler,
                                          n_samples=samples, tol=tol,
                                          seed=seed + 1))

    result = ExperimentResult(config=config, instance=gi, bundle=bundle,
                              majorant=maj, report=report)
    if out_dir is not None:
        result.paths = write_artifacts(result, out_dir)
    return result


def write_artifacts(result: ExperimentResult, out_dir: str) -> dict:
    os.makedirs(out_dir, exist_ok=True)
    run = result.bundle.run
    maj = result.majorant
    xstar = result.bundle.minimizer
    if xstar is None and (run.converged or (
            run.num_steps > 0 and float(run.step_norms[-1]) < 1e-10)):
        xstar = run.final_point()

    paths = {name: os.path.join(out_dir, name) for name in (
        "instance.json", "run.json", "trace.csv", "majorant.csv",
        "certificate.json", "report.json", "config.json")}
    result.instance.to_json(paths["instance.json"])
    run.to_metadata_json(paths["run.json"])
    write_trace(paths["trace.csv"], merged_trace_rows(run, maj, xstar))
    maj.to_csv(paths["majorant.csv"])
    _atomic_json(paths["certificate.json"], {
        "schema_version": 1,
        "desingularizer": result.bundle.desingularizer.to_dict(),
        "residual": result.bundle.certificate.to_dict(),
        "constants": result.bundle.constants,
        "zeta": maj.zeta,
        "q": None if maj.closed_form is None else maj.closed_form.q,
        "certificate_id": result.bundle.certificate_id,
    })
    result.report.to_json(paths["report.json"])
    result.config.to_json(paths["config.json"])
    return paths


def certify_run(run_path: str, certificate_path: str,
                out_path: Optional[str] = None) -> CertificationReport:
    """Re-check stored artifacts without re-running the method.

    Covers the trajectory checks (majorization, distance, scalar-step
    domination); the sampling checks need live oracles, so they belong to
    run_experiment.
    """
    with open(run_path, "r", encoding="ascii") as fh:
        run = DescentRun.from_metadata_dict(json.load(fh))
    with open(certificate_path, "r", encoding="ascii") as fh:
        cert_doc = json.load(fh)
    desing = desingularizer_from_dict(cert_doc["desingularizer"])
    gaps = run.gaps
    f0 = float(gaps[0])
    maj = worst_case_sequence(desing, f0, run.params, run.num_steps)
    report = CertificationReport(run_id=os.path.basename(run_path),
                                 certificate_id=cert_doc.get(
                                     "certificate_id", "stored"))
    report.add(check_majorization(run, maj, desing))
    report.add(check_distance_bound(run, maj))
    report.add(check_prox_step_domination(run, desing, maj.zeta))
    if out_path is not None:
        report.to_json(out_path)
    return report


# ---------------------------------------------------------------------------
# step-size sweep
# ---------------------------------------------------------------------------


SWEEP_COLUMNS = ("relative_step", "q", "certified_steps", "empirical_steps")


def sweep_relative_step(config: ExperimentConfig, values: Sequence[float],
                        workers: int = 2, epsilon_fraction: float = 0.5,
                        max_steps: int = 20000) -> list[dict]:
    """One row per relative step d: certified rate q(d), certified steps to
    the target gap, and the observed step count of the actual run.

    The certified q(d) = 1 + d (2 - d) gamma_R / ((d + 1)^2 L) peaks at
    d = 1/2 on any grid containing it; runs are capped at max_steps, which
    never matters when the certified count is within budget.
    """
    gi = load_instance(config)
    if gi.family != "lasso":
        raise ValueError("the step-size sweep targets the l1 family")
    inst, min_value, _ = lasso_from_payload(gi.payload)
    L = inst.lipschitz
    cert_cfg = dict(config.certificate)
    if cert_cfg.get("source", "computed") == "supplied":
        nu = float(cert_cfg["nu"])
    else:
        nu, _ = lasso_nu(inst, mode="exact")
    gamma_R = lasso_gamma(inst, nu).gamma_R
    f0 = inst.value(inst.x0) - min_value
    eps = epsilon_fraction * f0

    def job(d_rel: float) -> dict:
        schedule = StepSchedule.over_lipschitz(d_rel, L)
        params = certificate_params(schedule, L)
        q = 1.0 + 2.0 * params.a * gamma_R / params.b ** 2
        certified = steps_to_epsilon(q, f0, eps)
        run = ista(inst, schedule, max(1, min(certified, max_steps)),
                   min_value=min_value)
        gaps = run.gaps
        below = np.nonzero(gaps <= eps)[0]
        empirical = int(below[0]) if below.size else None
        return {"relative_step": float(d_rel), "q": q,
                "certified_steps": certified, "empirical_steps": empirical}

    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        rows = list(pool.map(job, values))
    return rows


def write_sweep(path, rows: Sequence[dict]) -> None:
    write_table(path, SWEEP_COLUMNS, rows)


# ---------------------------------------------------------------------------
# presets
# ---------------------------------------------------------------------------


def preset_configs(name: str) -> list[ExperimentConfig]:
    """Shipped experiment batteries; every battery finishes well under a
    minute.  The two broken-* presets are supposed to exit nonzero — they
    demonstrate that corrupted certificates are caught, not silently passed.
    """
    presets = {
        "tiny-lasso": [
            {
                "name": "tiny-lasso",
                "instance": {"family": "lasso", "n": 2, "m": 3, "seed": 7},
                "method": {"name": "ista", "relative_step": 0.5,
                           "steps": 400},
                "checks": {"samples": 2000, "seed": 11},
            },
        ],
        "feasibility": [
            {
                "name": "feasibility-barycentric",
                "instance": {"family": "feasibility", "dim": 2, "seed": 3},
                "method": {"name": "barycentric", "steps": 600},
                "checks": {"samples": 2000, "seed": 5},
            },
            {
                # Thin-lens geometry: the slow zigzag regime where the
                # certified alternating rate is actually informative.
                "name": "feasibility-alternating",
                "instance": {"family": "feasibility", "dim": 2, "seed": 3,
                             "geometry": "lens"},
                "method": {"name": "alternating", "steps": 600},
                "checks": {"samples": 2000, "seed": 6},
            },
        ],
        "uniformly-convex": [
            {
                "name": "uniformly-convex",
                "instance": {"family": "uniformly-convex", "n": 3, "seed": 5},
                "method": {"name": "gradient", "relative_step": 0.5,
                           "steps": 300},
                "checks": {"samples": 2000, "seed": 7},
            },
        ],
        "tight-quadratic": [
            {
                "name": "tight-quadratic",
                "instance": {"family": "tight-quadratic", "dim": 2,
                             "seed": 9},
                "method": {"steps": 50},
                "checks": {"samples": 2000, "seed": 13},
            },
        ],
        "broken-certificate": [
            {
                "name": "broken-certificate",
                "instance": {"family": "tight-quadratic", "dim": 2,
                             "seed": 9},
                "method": {"steps": 50},
                "certificate": {"scale_gamma": 2.0},
                "checks": {"samples": 2000, "seed": 13},
            },
        ],
        "broken-rate": [
            {
                # Gradient descent at relative step 1/2 contracts the gap by
                # exactly 4 per step; a claimed rate of 6 is unachievable.
                "name": "broken-rate",
                "instance": {"family": "uniformly-convex", "n": 3, "seed": 5},
                "method": {"name": "gradient", "relative_step": 0.5,
                           "steps": 300},
                "certificate": {"override_q": 6.0},
                "checks": {"samples": 2000, "seed": 7},
            },
        ],
    }
    if name not in presets:
        raise ValueError(f"unknown preset {name!r}; "
                         f"available: {', '.join(sorted(presets))}")
    return [ExperimentConfig.from_dict(d) for d in presets[name]]


PRESET_NAMES = ("tiny-lasso", "feasibility", "uniformly-convex",
                "tight-quadratic", "broken-certificate", "broken-rate")
