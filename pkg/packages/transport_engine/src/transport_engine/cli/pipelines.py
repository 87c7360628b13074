"""Experiment pipelines.

Every pipeline takes an experiment context, writes its tables and reports
through the context repository and records summary rows (experiment,
quantity, value) on the context.
"""

import logging
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Any, Callable, Optional

from core.config import ExperimentConfig
from core.models import Artifact, PhantomPairSpec, PhantomSpec, StabilityReport, StabilityRow
from core.repositories import ArtifactRepository
from core.types import ExperimentKind
from core.utils import stable_hash
from transport_engine.coefficients import CoefficientPair, PhantomFactory, PhantomLibrary, load_phantom_file
from transport_engine.forward import BoundarySource, ForwardSolver, operator_mass_check, save_response
from transport_engine.geometry import BoundaryGrid, Domain, PhasePoint
from transport_engine.inversion import (
    KAPPA_COLUMNS,
    RECONSTRUCTION_COLUMNS,
    SINOGRAM_COLUMNS,
    ballistic_ladder,
    extract_k_from_settings,
    reconstruct_from_settings,
    scan_from_settings,
)
from transport_engine.stability import (
    albedo_distance,
    ballistic_weights,
    check_attenuation_stability,
    check_multiple_scattering_tail,
    check_scattering_stability,
    check_sobolev_stability,
    class_membership,
    entry_nodes,
    run_perturbation_ladder,
    scaling_rows,
)

logger = logging.getLogger(__name__)

SUMMARY_COLUMNS = ("experiment", "quantity", "value")
REPORT_ROW_COLUMNS = ("name", "entry_index", "lhs", "rhs", "tolerance", "margin", "passed")

SummaryRow = dict[str, Any]


def phantom_hash(spec: PhantomSpec | PhantomPairSpec) -> str:
    return stable_hash(spec.model_dump(mode="json"))


@dataclass
class ExperimentContext:
    """Everything a pipeline needs besides the numerics."""

    config: ExperimentConfig
    repository: ArtifactRepository
    summary: list[SummaryRow] = field(default_factory=list)

    @cached_property
    def domain(self) -> Domain:
        return Domain.from_settings(self.config.scene.domain)

    @cached_property
    def library(self) -> Optional[PhantomLibrary]:
        if self.config.phantom_file is None:
            return None
        return load_phantom_file(self.config.phantom_file)

    @cached_property
    def config_hash(self) -> str:
        return self.config.config_hash()

    @property
    def horizon(self) -> float:
        return self.config.scene.horizon

    @property
    def threads(self) -> int:
        return self.config.resolved_threads

    def phantom(self) -> PhantomSpec:
        return PhantomFactory.get_phantom(self.config.phantom, self.library)

    def pair(self) -> PhantomPairSpec:
        return PhantomFactory.get_pair(self.config.pair, self.library)

    def solver(self, pair: CoefficientPair) -> ForwardSolver:
        return ForwardSolver.from_config(pair, self.domain, self.config)

    def entry(self) -> PhasePoint:
        """Normal-incidence entry node, the first of every entry set."""
        return entry_nodes(self.domain, 1, seed=self.config.seed)[0]

    def source(self, entry: PhasePoint, epsilon: Optional[float] = None) -> BoundarySource:
        scene = self.config.scene
        epsilon = min(scene.mollifier_ladder) if epsilon is None else epsilon
        width = min(epsilon, scene.source_duration)
        phase_width = 0.0 if scene.point_source else epsilon
        return BoundarySource.mollified(
            self.domain, entry, phase_width, width, scene.source_duration, nodes=self.config.quadrature.source_nodes
        )

    def record(self, quantity: str, value: Any) -> None:
        self.summary.append({"experiment": self.config.experiment.value, "quantity": quantity, "value": value})

    def grid_metadata(self, grid: BoundaryGrid) -> dict[str, float]:
        boundary_nodes, angle_nodes = grid.shape[1:]
        return {
            "boundary_nodes": float(boundary_nodes),
            "angle_nodes": float(angle_nodes),
            "time_bins": float(grid.time_bins),
            "horizon": grid.horizon,
        }

    def save_report(self, stem: str, report: StabilityReport) -> None:
        """Report JSON plus its rows flattened into a CSV with one c_* column per constant."""
        self.repository.save_report(f"{stem}.json", report)
        flat = [row.flat() for row in report.rows]
        constants = sorted({key for row in flat for key in row if key.startswith("c_")})
        sidecar = Artifact(kind="stability-rows", config_hash=self.config_hash)
        self.repository.save_table(f"{stem}-rows.csv", REPORT_ROW_COLUMNS + tuple(constants), flat, sidecar)
        failures = report.failures()
        self.record(f"{stem}.rows", len(report.rows))
        self.record(f"{stem}.failed", len(failures))
        self.record(f"{stem}.min_margin", min((row.margin for row in report.rows), default=math.inf))
        if failures:
            names = sorted({row.name for row in failures})
            logger.warning(f"{len(failures)} of {len(report.rows)} rows failed in {stem}: {names}")


def run_forward(context: ExperimentContext) -> None:
    config = context.config
    spec = context.phantom()
    pair = CoefficientPair.from_spec(spec)
    solver = context.solver(pair)
    source = context.source(context.entry())
    response = solver.solve(source, context.horizon)
    check = operator_mass_check(response, source, slack=config.solver.mass_slack)
    save_response(context.repository, "response.csv", response, context.config_hash, phantom_hash(spec))
    for part, mass in response.masses_by_part().items():
        context.record(f"mass.{part.value}", mass / response.incoming_mass)
    context.record("tail_bound", response.tail_bound)
    context.record("mass_ratio", check.ratio)
    context.record("growth_bound", check.bound)


def run_ballistic_sigma(context: ExperimentContext) -> None:
    config = context.config
    spec = context.phantom()
    pair = CoefficientPair.from_spec(spec)
    solver = context.solver(pair)
    sinogram = scan_from_settings(
        pair, context.domain, config.inversion, solver=solver, scene=config.scene, threads=context.threads
    )
    context.repository.save_table(
        "sinogram.csv", SINOGRAM_COLUMNS, sinogram.to_rows(), sinogram.artifact(context.config_hash, phantom_hash(spec))
    )
    reconstruction = reconstruct_from_settings(sinogram, context.domain, config.inversion, threads=context.threads)
    error = reconstruction.relative_l2_error(pair)
    context.repository.save_table(
        "reconstruction.csv",
        RECONSTRUCTION_COLUMNS,
        reconstruction.to_rows(),
        reconstruction.artifact(context.config_hash, relative_l2_error=error),
    )
    context.record("fbp.relative_l2_error", error)
    context.record("sinogram.flagged", int(sinogram.flagged.sum()))

    entry = context.entry()
    _, estimate = ballistic_ladder(
        solver,
        entry,
        context.horizon,
        config.scene.mollifier_ladder,
        config.scene.source_duration,
        gate_cells=config.inversion.gate_cells,
    )
    context.record("ballistic.limit", estimate.limit)
    context.record("ballistic.exact", float(ballistic_weights(pair, context.domain, [entry])[0]))
    context.record("ballistic.contracting", estimate.contracting)


def run_scatter_k(context: ExperimentContext) -> None:
    config = context.config
    spec = context.phantom()
    pair = CoefficientPair.from_spec(spec)
    solver = context.solver(pair)
    entry = context.entry()
    source = context.source(entry)
    response = solver.solve(source, context.horizon, order=max(config.solver.order, 1))
    depth_nodes = config.quadrature.depth_nodes

    exact = extract_k_from_settings(response, entry, pair, source, config.inversion, depth_nodes=depth_nodes)
    context.repository.save_table(
        "kappa-exact.csv", KAPPA_COLUMNS, exact.to_rows(), exact.artifact(context.config_hash)
    )
    context.record("kappa.exact.samples", len(exact.accepted))
    context.record("kappa.exact.max_relative_error", exact.max_relative_error(pair))

    if context.domain.dimension != 2:
        return
    sinogram = scan_from_settings(pair, context.domain, config.inversion, threads=context.threads)
    reconstruction = reconstruct_from_settings(sinogram, context.domain, config.inversion, threads=context.threads)
    fbp_pair = reconstruction.as_pair(pair)
    fbp = extract_k_from_settings(
        response, entry, fbp_pair, source, config.inversion, depth_nodes=depth_nodes, sigma_source="fbp"
    )
    context.repository.save_table("kappa-fbp.csv", KAPPA_COLUMNS, fbp.to_rows(), fbp.artifact(context.config_hash))
    context.record("kappa.fbp.samples", len(fbp.accepted))
    context.record("kappa.fbp.max_relative_error", fbp.max_relative_error(pair))
    context.record("fbp.relative_l2_error", reconstruction.relative_l2_error(pair))


def _stability_setup(context: ExperimentContext):
    spec = context.pair()
    pair_a = CoefficientPair.from_spec(spec.reference)
    pair_b = CoefficientPair.from_spec(spec.perturbed)
    solver_a, solver_b = context.solver(pair_a), context.solver(pair_b)
    settings = context.config.stability
    entries = entry_nodes(context.domain, settings.entry_count, seed=context.config.seed)
    distance = albedo_distance(solver_a, solver_b, context.horizon, entries, settings, threads=context.threads)
    context.record("distance.lower", distance.lower)
    context.record("distance.upper", distance.upper)
    context.record("distance.upper_explicit", distance.upper_explicit)
    return spec, pair_a, pair_b, solver_a, entries, distance


def _report(
    context: ExperimentContext, spec: PhantomPairSpec, grid: BoundaryGrid, distance, rows: list[StabilityRow]
) -> StabilityReport:
    return StabilityReport(
        config_hash=context.config_hash,
        experiment=context.config.experiment.value,
        pair_hashes=[phantom_hash(spec.reference), phantom_hash(spec.perturbed)],
        grid=context.grid_metadata(grid),
        distance=distance,
        rows=rows,
    )


def run_stability_pointwise(context: ExperimentContext) -> None:
    config = context.config
    spec, pair_a, pair_b, solver_a, entries, distance = _stability_setup(context)
    rows = check_attenuation_stability(
        pair_a, pair_b, context.domain, entries, distance, context.horizon, config.stability
    )
    rows += check_scattering_stability(
        pair_a,
        pair_b,
        context.domain,
        entries,
        distance,
        context.horizon,
        config.stability,
        quadrature=config.quadrature,
        threads=context.threads,
    )
    context.save_report("stability-report", _report(context, spec, solver_a.grid(context.horizon), distance, rows))


def run_stability_sobolev(context: ExperimentContext) -> None:
    config = context.config
    settings = config.stability
    spec, pair_a, pair_b, solver_a, entries, distance = _stability_setup(context)
    rows = check_sobolev_stability(
        pair_a,
        pair_b,
        context.domain,
        entries,
        distance,
        context.horizon,
        settings,
        quadrature=config.quadrature,
        threads=context.threads,
    )
    _, r_tilde = class_membership(pair_a, pair_b)
    rungs = run_perturbation_ladder(
        spec,
        settings.perturbation_ladder,
        context.domain,
        context.horizon,
        entries,
        context.solver,
        settings,
        quadrature=config.quadrature,
        threads=context.threads,
    )
    rows += scaling_rows(rungs, settings.sobolev_order, settings.kernel_order, r_tilde, context.domain.dimension)
    for rung in rungs:
        context.record(f"ladder.{rung.delta:g}.distance", rung.distance)
        context.record(f"ladder.{rung.delta:g}.sigma_difference", rung.sigma_difference)
    context.save_report("stability-report", _report(context, spec, solver_a.grid(context.horizon), distance, rows))


def run_multiple_tail(context: ExperimentContext) -> None:
    config = context.config
    spec = context.phantom()
    pair = CoefficientPair.from_spec(spec)
    solver = context.solver(pair)
    entries = entry_nodes(context.domain, config.stability.entry_count, seed=config.seed)
    rows = check_multiple_scattering_tail(solver, context.horizon, entries, config.stability, threads=context.threads)
    budget = solver.budget(context.horizon)
    context.record("remainder_constant", budget.remainder)
    context.record("two_collision_constant", budget.two_collision)
    report = StabilityReport(
        config_hash=context.config_hash,
        experiment=config.experiment.value,
        pair_hashes=[phantom_hash(spec)],
        grid=context.grid_metadata(solver.grid(context.horizon)),
        rows=rows,
    )
    context.save_report("tail-report", report)


class PipelineFactory:
    """Pure static factory from experiment kinds to pipelines."""

    _pipeline_map: dict[ExperimentKind, Callable[[ExperimentContext], None]] = {
        ExperimentKind.FORWARD: run_forward,
        ExperimentKind.BALLISTIC_SIGMA: run_ballistic_sigma,
        ExperimentKind.SCATTER_K: run_scatter_k,
        ExperimentKind.STABILITY_POINTWISE: run_stability_pointwise,
        ExperimentKind.STABILITY_SOBOLEV: run_stability_sobolev,
        ExperimentKind.MULTIPLE_TAIL: run_multiple_tail,
    }

    @staticmethod
    def get_pipeline(experiment: ExperimentKind | str) -> Callable[[ExperimentContext], None]:
        experiment = ExperimentKind(experiment)
        if experiment not in PipelineFactory._pipeline_map:
            raise ValueError(
                f"Invalid experiment: {experiment}, valid experiments are: {list(PipelineFactory._pipeline_map.keys())}"
            )
        return PipelineFactory._pipeline_map[experiment]
