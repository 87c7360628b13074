import math
from dataclasses import replace

import numpy as np
import pytest

from core.adapters import FilesystemArtifactAdapter
from core.config import SolverSettings
from core.repositories import ArtifactRepository
from core.types import BoundarySign, ResponsePart, SolverBackend
from transport_engine.coefficients import CoefficientPair, PhantomFactory
from transport_engine.errors import GeometryError, GridMismatchError, NumericalGuardError
from transport_engine.forward import (
    AlbedoResponse,
    BoundarySource,
    ForwardSolver,
    PhaseMollifier,
    SolverFactory,
    TemporalMollifier,
    apply_A2,
    apply_U1,
    deposit_arrivals,
    kernel_matrix,
    lift_source,
    load_response,
    operator_mass_check,
    save_response,
)
from transport_engine.geometry import BoundaryGrid, PhasePoint, SphereRule, gauss_legendre
from transport_engine.kernels import ballistic_kernel


def point_source(domain, entry, width=0.05, duration=0.25) -> BoundarySource:
    return BoundarySource.mollified(domain, entry, 0.0, width, duration)


def ones(x, v):
    return np.ones(np.broadcast_shapes(np.shape(x)[:-1], np.shape(v)[:-1]))


@pytest.mark.unit
class TestTemporalMollifier:
    def test_width_is_capped_by_duration(self):
        assert TemporalMollifier.build(0.5, 0.25).width == 0.25
        assert TemporalMollifier.build(0.1, 0.25).centroid == pytest.approx(0.05)

    def test_cdf(self):
        g = TemporalMollifier(0.2)
        assert g.cdf([-0.1, 0.0, 0.1, 0.2, 0.3]) == pytest.approx([0.0, 0.0, 0.5, 1.0, 1.0], abs=1e-9)

    def test_unit_integral(self):
        g = TemporalMollifier(0.2)
        nodes, weights = gauss_legendre(64)
        assert float(0.2 * weights @ g(0.2 * nodes)) == pytest.approx(1.0, rel=1e-6)

    def test_rejects_empty_support(self):
        with pytest.raises(GeometryError, match="positive"):
            TemporalMollifier(0.0)


@pytest.mark.unit
class TestPhaseMollifier:
    def test_particles_carry_unit_mass(self, disk, west_entry):
        particles = PhaseMollifier(disk, west_entry, 0.2).particles()
        assert len(particles) == 36
        assert particles.total == pytest.approx(1.0)
        incoming = np.sum(disk.outward_normal(particles.points) * particles.directions, axis=-1)
        assert np.all(incoming < 0.0)

    def test_point_source(self, disk, west_entry):
        mollifier = PhaseMollifier(disk, west_entry, 0.0)
        assert mollifier.is_point
        assert len(mollifier.particles()) == 1
        with pytest.raises(GeometryError, match="no pointwise density"):
            mollifier.density(west_entry.x, west_entry.v)

    def test_density_peaks_at_center(self, disk, west_entry):
        mollifier = PhaseMollifier(disk, west_entry, 0.2)
        center = float(mollifier.density(west_entry.x, west_entry.v))
        off = float(mollifier.density(disk.boundary_point(math.pi + 0.1), west_entry.v))
        assert center > off > 0.0
        assert float(mollifier.density(disk.boundary_point(0.0), west_entry.v)) == 0.0

    def test_center_must_be_incoming_boundary_point(self, disk):
        with pytest.raises(GeometryError, match="not on the boundary"):
            PhaseMollifier(disk, PhasePoint.planar([0.0, 0.0], 0.0), 0.1)
        with pytest.raises(GeometryError, match="does not point into"):
            PhaseMollifier(disk, PhasePoint.planar([1.0, 0.0], 0.0), 0.1)

    def test_mollified_sources_are_planar(self, ball):
        entry = PhasePoint(np.array([0.0, 0.0, -1.0]), np.array([0.0, 0.0, 1.0]))
        with pytest.raises(GeometryError, match="planar"):
            PhaseMollifier(ball, entry, 0.1)
        assert PhaseMollifier(ball, entry, 0.0).particles().total == 1.0


@pytest.mark.unit
class TestBoundarySource:
    def test_describe(self, disk, west_entry):
        description = BoundarySource.mollified(disk, west_entry, 0.1, 0.05, 0.25).describe()
        assert description["kind"] == "mollified"
        assert description["epsilon1"] == 0.1
        assert description["center_point"] == [-1.0, 0.0]

    def test_tabulated_source(self, disk):
        grid = BoundaryGrid.build(disk, 16, 16, 20, 5.0, sign=BoundarySign.INCOMING)
        table = np.zeros(grid.shape[1:])
        table[8, 0] = 1.0
        source = BoundarySource.tabulated(grid, table, 0.05, 0.25)
        assert source.incoming_mass == pytest.approx((2.0 * math.pi / 16) ** 2)
        centroid = source.centroid()
        assert centroid.x == pytest.approx([-1.0, 0.0])
        assert centroid.v == pytest.approx([1.0, 0.0])
        assert source.describe()["kind"] == "tabulated"

    def test_tabulated_source_validation(self, disk):
        incoming = BoundaryGrid.build(disk, 16, 16, 20, 5.0, sign=BoundarySign.INCOMING)
        with pytest.raises(GeometryError, match="incoming boundary grid"):
            BoundarySource.tabulated(incoming.flipped(), np.zeros((16, 16)), 0.05, 0.25)
        with pytest.raises(GeometryError, match="does not match grid"):
            BoundarySource.tabulated(incoming, np.zeros((8, 16)), 0.05, 0.25)
        with pytest.raises(GeometryError, match="nonnegative"):
            BoundarySource.tabulated(incoming, -np.ones((16, 16)), 0.05, 0.25)


@pytest.mark.unit
class TestDepositArrivals:
    def test_mass_inside_one_bin(self, disk):
        grid = BoundaryGrid.build(disk, 16, 16, 20, 5.0)
        masses = np.zeros(grid.shape)
        deposit_arrivals(masses, grid, [0.1], [3], [5], [2.0], TemporalMollifier(0.05))
        assert masses[0, 3, 5] == pytest.approx(2.0)
        assert masses.sum() == pytest.approx(2.0)

    def test_mass_split_across_bins(self, disk):
        grid = BoundaryGrid.build(disk, 16, 16, 20, 5.0)
        masses = np.zeros(grid.shape)
        deposit_arrivals(masses, grid, [0.24], [0], [0], [1.0], TemporalMollifier(0.05))
        assert masses[0, 0, 0] > 0.0 and masses[1, 0, 0] > 0.0
        assert masses.sum() == pytest.approx(1.0)

    def test_mass_after_horizon_is_dropped(self, disk):
        grid = BoundaryGrid.build(disk, 16, 16, 20, 5.0)
        masses = np.zeros(grid.shape)
        deposit_arrivals(masses, grid, [4.975], [0], [0], [1.0], TemporalMollifier(0.05))
        assert masses.sum() == pytest.approx(0.5, abs=1e-9)


@pytest.mark.unit
class TestOperators:
    def test_free_streaming(self, constant, disk):
        x = np.array([[0.0, 0.0], [0.0, 0.0]])
        v = np.array([[1.0, 0.0], [1.0, 0.0]])
        assert apply_U1(constant, disk, ones, 0.5)(x, v) == pytest.approx([math.exp(-0.25)] * 2)
        assert apply_U1(constant, disk, ones, 1.5)(x, v) == pytest.approx([0.0, 0.0])
        assert apply_U1(constant, disk, ones, 0.0)(x, v) == pytest.approx([1.0, 1.0])

    def test_free_streaming_needs_nonnegative_time(self, constant, disk):
        with pytest.raises(ValueError, match="t >= 0"):
            apply_U1(constant, disk, lambda x, v: x[..., 0], -0.1)

    def test_scattering_gain(self, constant):
        sphere = SphereRule.build(2, 32)
        gained = apply_A2(constant, ones, sphere)
        value = gained(np.array([[0.1, 0.2]]), np.array([[0.0, 1.0]]))
        assert value == pytest.approx([0.05 * 2.0 * math.pi])

    def test_kernel_matrix(self, constant):
        sphere = SphereRule.build(2, 8)
        matrix = kernel_matrix(constant, np.zeros((3, 2)), sphere)
        assert matrix.shape == (3, 8, 8)
        assert matrix.sum(axis=1) == pytest.approx(np.full((3, 8), 0.05 * 2.0 * math.pi))

    def test_lifted_source_follows_characteristics(self, constant, disk, west_entry):
        source = BoundarySource.mollified(disk, west_entry, 0.2, 0.2, 0.25)
        lifted = lift_source(constant, disk, source)
        x, v = np.array([1.0, 0.0]), np.array([1.0, 0.0])
        expected = math.exp(-1.0) * float(source(0.1, west_entry.x, v))
        assert float(lifted(2.1, x, v)) == pytest.approx(expected)
        assert float(lifted(1.9, x, v)) == 0.0


@pytest.mark.unit
class TestForwardSolver:
    def test_ballistic_point_source(self, absorber, disk, west_entry, coarse_solver):
        solver = coarse_solver(absorber, disk)
        response = solver.solve(point_source(disk, west_entry), 5.0, order=0)
        assert response.mass() == pytest.approx(math.exp(-1.0))
        # arrival window [2, 2.05] sits in bin 8 of the east cell
        assert response.part(0)[8, 0, 0] == pytest.approx(math.exp(-1.0))
        assert response.tail_bound == 0.0
        assert response.masses_by_part() == {ResponsePart.BALLISTIC: pytest.approx(math.exp(-1.0))}

    def test_vacuum_transmits_everything(self, vacuum, disk, west_entry, coarse_solver):
        response = coarse_solver(vacuum, disk).solve(point_source(disk, west_entry), 5.0, order=2)
        assert response.mass() == pytest.approx(1.0)
        assert response.mass(1) == 0.0
        assert response.mass(2) == 0.0

    def test_tabulated_source(self, absorber, disk, coarse_solver):
        grid = BoundaryGrid.build(disk, 16, 16, 20, 5.0, sign=BoundarySign.INCOMING)
        table = np.zeros(grid.shape[1:])
        table[8, 0] = 1.0
        source = BoundarySource.tabulated(grid, table, 0.05, 0.25)
        response = coarse_solver(absorber, disk).solve(source, 5.0, order=0)
        assert response.mass() == pytest.approx(source.incoming_mass * math.exp(-1.0))

    @pytest.mark.integration
    def test_single_scatter_mass(self, constant, disk, west_entry, coarse_solver):
        response = coarse_solver(constant, disk, kappa=0.05).solve(point_source(disk, west_entry), 5.0, order=1)
        sphere = SphereRule.build(2, 16)
        nodes, weights = gauss_legendre(64)
        s = 2.0 * nodes
        turns = np.stack([s - 1.0, np.zeros_like(s)], axis=-1)
        exits = disk.exit_distance(turns[:, None, :], sphere.directions[None, :, :])
        expected = 0.05 * float(2.0 * weights @ (np.exp(-0.5 * (s[:, None] + exits)) @ sphere.weights))
        assert response.mass(1) == pytest.approx(expected, rel=1e-3)

    @pytest.mark.integration
    def test_second_order_response(self, constant, disk, west_entry, coarse_solver):
        solver = coarse_solver(constant, disk, kappa=0.05)
        source = point_source(disk, west_entry)
        response = solver.solve(source, 5.0, order=2)
        parts = response.masses_by_part()
        assert set(parts) == {ResponsePart.BALLISTIC, ResponsePart.SINGLE, ResponsePart.DOUBLE}
        assert parts[ResponsePart.SINGLE] > parts[ResponsePart.DOUBLE] >= 0.0
        assert response.tail_bound == solver.budget(5.0).tail_bound(2)
        check = operator_mass_check(response, source)
        assert check.passed
        assert check.ratio < 1.0

    @pytest.mark.parametrize("name", ["absorber", "gaussian-absorber"])
    def test_non_scattering_pair_is_purely_ballistic(self, name, catalog_pair, disk, west_entry, coarse_solver):
        pair = catalog_pair(name)
        response = coarse_solver(pair, disk).solve(point_source(disk, west_entry), 5.0, order=2)
        arrival = ballistic_kernel(pair, disk, PhasePoint.planar([1.0, 0.0], 0.0))
        assert arrival.delay == pytest.approx(2.0)
        assert response.mass() == pytest.approx(arrival.weight, rel=1e-9)
        assert response.part(0)[8, 0, 0] == pytest.approx(arrival.weight, rel=1e-9)
        assert response.mass(1) == response.mass(2) == 0.0
        assert response.tail_bound == 0.0

    @pytest.mark.integration
    def test_response_grows_with_scattering(self, disk, west_entry, coarse_solver):
        spec = PhantomFactory.get_pair("k-shift")
        weak, strong = CoefficientPair.from_spec(spec.reference), CoefficientPair.from_spec(spec.perturbed)
        source = point_source(disk, west_entry)
        responses = [coarse_solver(pair, disk, kappa=0.06).solve(source, 5.0, order=2) for pair in (weak, strong)]
        assert responses[0].mass(0) == pytest.approx(responses[1].mass(0), rel=1e-12)
        assert responses[0].mass(1) < responses[1].mass(1)
        assert responses[0].mass(2) < responses[1].mass(2)
        assert responses[0].mass() < responses[1].mass()

    def test_third_order_uses_tail_of_second(self, absorber, disk, west_entry, coarse_solver):
        solver = coarse_solver(absorber, disk)
        response = solver.solve(point_source(disk, west_entry), 5.0, order=3)
        assert response.order == 3
        assert response.orders == [0, 1, 2]

    def test_closed_form_order_limit(self, absorber, disk, west_entry, coarse_solver):
        with pytest.raises(ValueError, match="N <= 3"):
            coarse_solver(absorber, disk).solve(point_source(disk, west_entry), 5.0, order=4)

    def test_grid_mismatch(self, absorber, disk, west_entry, coarse_solver):
        solver = coarse_solver(absorber, disk)
        other = BoundaryGrid.build(disk, 16, 16, 20, 6.0)
        with pytest.raises(GridMismatchError, match="Grid horizon"):
            solver.solve(point_source(disk, west_entry), 5.0, grid=other)
        with pytest.raises(GridMismatchError, match="Window shape"):
            solver.solve(point_source(disk, west_entry), 5.0, window=np.ones((4, 4), dtype=bool))

    def test_budget_horizon_mismatch(self, absorber, disk, west_entry, coarse_solver):
        with pytest.raises(GridMismatchError, match="Budget horizon"):
            coarse_solver(absorber, disk).solve(point_source(disk, west_entry), 6.0, order=0)

    def test_window_restricts_exits(self, absorber, disk, west_entry, coarse_solver):
        window = np.ones((16, 16), dtype=bool)
        window[0, 0] = False
        response = coarse_solver(absorber, disk).solve(point_source(disk, west_entry), 5.0, order=0, window=window)
        assert response.mass() == 0.0

    def test_invalid_backend(self, absorber, disk):
        with pytest.raises(ValueError):
            SolverFactory.get_backend("monte-carlo", absorber, disk)


@pytest.mark.integration
class TestPicardBackend:
    @pytest.fixture
    def lattice_solver(self, coarse_quadrature, light_kernels, small_budget):
        def build(pair, domain, kappa=0.0):
            settings = SolverSettings(backend=SolverBackend.PICARD, lattice_nodes=16, lattice_time_steps=20)
            return ForwardSolver(
                pair,
                domain,
                quadrature=coarse_quadrature,
                kernels=light_kernels,
                solver=settings,
                budget=small_budget(domain, kappa),
            )

        return build

    def test_point_source_is_rejected(self, constant, disk, west_entry, lattice_solver):
        with pytest.raises(GeometryError, match="eps1 > 0"):
            lattice_solver(constant, disk, 0.05).solve(point_source(disk, west_entry), 5.0, order=1)

    def test_any_order_is_accepted(self, constant, disk, west_entry, lattice_solver):
        source = BoundarySource.mollified(disk, west_entry, 0.3, 0.25, 0.25)
        solver = lattice_solver(constant, disk, 0.05)
        response = solver.solve(source, 5.0, order=4)
        assert response.orders == [0, 1, 2, 3, 4]
        assert response.backend is SolverBackend.PICARD
        assert response.mass(1) > 0.0
        assert all(np.all(np.isfinite(response.part(n))) and np.all(response.part(n) >= 0.0) for n in range(5))
        assert response.tail_bound == solver.budget(5.0).tail_bound(4)

    @pytest.mark.parametrize("name", ["vacuum", "absorber"])
    def test_matches_closed_form_without_scattering(
        self, name, catalog_pair, disk, west_entry, lattice_solver, coarse_solver
    ):
        pair = catalog_pair(name)
        source = BoundarySource.mollified(disk, west_entry, 0.3, 0.25, 0.25)
        lattice = lattice_solver(pair, disk).solve(source, 5.0, order=2)
        closed = coarse_solver(pair, disk).solve(source, 5.0, order=2)
        for n in range(3):
            np.testing.assert_allclose(lattice.part(n), closed.part(n), rtol=0.0, atol=1e-14)
        assert lattice.mass(1) == lattice.mass(2) == 0.0
        assert lattice.mass() == pytest.approx(closed.mass(), rel=1e-12)
        assert operator_mass_check(lattice, source).passed

    def test_vacuum_conserves_mass(self, vacuum, disk, west_entry, lattice_solver):
        source = BoundarySource.mollified(disk, west_entry, 0.3, 0.25, 0.25)
        response = lattice_solver(vacuum, disk).solve(source, 5.0, order=3)
        check = operator_mass_check(response, source)
        assert check.bound == pytest.approx(1.0)
        assert check.ratio == pytest.approx(1.0, abs=1e-6)

    def test_agrees_with_closed_form_within_tail(self, constant, disk, west_entry, lattice_solver, coarse_solver):
        source = BoundarySource.mollified(disk, west_entry, 0.3, 0.25, 0.25)
        lattice = lattice_solver(constant, disk, 0.05).solve(source, 5.0, order=2)
        closed = coarse_solver(constant, disk, kappa=0.05).solve(source, 5.0, order=2)
        np.testing.assert_allclose(lattice.part(0), closed.part(0), rtol=0.0, atol=1e-14)
        gap = abs(lattice.mass() - closed.mass()) / source.incoming_mass
        assert gap <= closed.tail_bound + lattice.tail_bound
        assert 0.0 < lattice.mass(1) and 0.0 < closed.mass(1)


@pytest.mark.unit
class TestAlbedoResponse:
    @pytest.fixture
    def response(self, absorber, disk, west_entry, coarse_solver) -> AlbedoResponse:
        return coarse_solver(absorber, disk).solve(point_source(disk, west_entry), 5.0, order=2)

    def test_density_is_mass_over_measure(self, response):
        grid = response.grid
        density = response.density(0)[8, 0, 0]
        assert density == pytest.approx(response.part(0)[8, 0, 0] / (grid.dt * grid.xi_weights[0, 0]))

    def test_truncated(self, response):
        cut = response.truncated(0, 0.25)
        assert cut.orders == [0]
        assert cut.tail_bound == 0.25
        assert cut.mass() == response.mass(0)

    def test_difference_norm(self, response, disk):
        assert response.difference_norm(response) == 0.0
        other_grid = BoundaryGrid.build(disk, 32, 16, 20, 5.0)
        other = AlbedoResponse(
            grid=other_grid,
            masses={0: np.zeros(other_grid.shape)},
            source_duration=0.25,
            order=0,
            tail_bound=0.0,
            incoming_mass=1.0,
        )
        with pytest.raises(GridMismatchError, match="different grids"):
            response.difference_norm(other)

    def test_rejects_incoming_grid(self, disk):
        grid = BoundaryGrid.build(disk, 16, 16, 20, 5.0, sign=BoundarySign.INCOMING)
        with pytest.raises(GridMismatchError, match="outgoing boundary grid"):
            AlbedoResponse(grid=grid, masses={}, source_duration=0.25, order=0, tail_bound=0.0, incoming_mass=1.0)

    def test_mass_check_trips_on_excess(self, disk, west_entry):
        grid = BoundaryGrid.build(disk, 16, 16, 20, 5.0)
        masses = np.zeros(grid.shape)
        masses[8, 0, 0] = 2.0
        response = AlbedoResponse(
            grid=grid,
            masses={0: masses},
            source_duration=0.25,
            order=0,
            tail_bound=0.0,
            incoming_mass=1.0,
            growth_bound=1.0,
        )
        with pytest.raises(NumericalGuardError, match="exceeds the growth bound"):
            operator_mass_check(response, point_source(disk, west_entry))

    def test_save_and_load(self, response, disk, west_entry, tmp_path):
        with FilesystemArtifactAdapter(tmp_path / "out") as adapter:
            save_response(ArtifactRepository(adapter), "response.csv", response, "cfg", "phantom")
        repository = ArtifactRepository(FilesystemArtifactAdapter(tmp_path / "out", staged=False))
        loaded = load_response(repository, "response.csv", disk)
        assert loaded.orders == [0, 1, 2]
        assert np.array_equal(loaded.part(0), response.part(0))
        assert loaded.tail_bound == response.tail_bound
        assert loaded.source == response.source
        assert loaded.growth_bound == response.growth_bound == 1.0
        assert operator_mass_check(loaded, point_source(disk, west_entry)).passed

    def test_unbounded_growth_survives_round_trip(self, response, disk, tmp_path):
        unbounded = replace(response, growth_bound=math.inf)
        assert unbounded.artifact().growth_bound is None
        with FilesystemArtifactAdapter(tmp_path / "out") as adapter:
            save_response(ArtifactRepository(adapter), "response.csv", unbounded, "cfg", "phantom")
        repository = ArtifactRepository(FilesystemArtifactAdapter(tmp_path / "out", staged=False))
        assert load_response(repository, "response.csv", disk).growth_bound == math.inf
