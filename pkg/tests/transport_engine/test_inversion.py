import math

import numpy as np
import pytest

from core.config import SceneSettings
from core.types import FilterWindow, XRayMode
from transport_engine.errors import GridMismatchError, ReconstructionError
from transport_engine.forward import BoundarySource
from transport_engine.geometry import PhasePoint
from transport_engine.inversion import (
    ParallelBeamGeometry,
    Sinogram,
    analytic_line_integrals,
    broken_ray_depths,
    extract_ballistic,
    extract_k,
    filter_projections,
    ram_lak_kernel,
    ramp_filter,
    reconstruct_sigma,
    richardson_limit,
    xray_transform_scan,
)


def point_source(domain, entry, width=0.05, duration=0.25) -> BoundarySource:
    return BoundarySource.mollified(domain, entry, 0.0, width, duration)


@pytest.mark.unit
class TestParallelBeamGeometry:
    def test_angles_and_offsets(self, disk):
        geometry = ParallelBeamGeometry.covering(disk, 4, 5)
        assert geometry.angles == pytest.approx([0.0, math.pi / 4, math.pi / 2, 3 * math.pi / 4])
        assert geometry.offsets == pytest.approx([-1.0, -0.5, 0.0, 0.5, 1.0])
        assert geometry.spacing == pytest.approx(0.5)
        assert geometry.line_points().shape == (4, 5, 2)

    def test_entry_of_central_line(self, disk):
        geometry = ParallelBeamGeometry.covering(disk, 4, 5)
        entry = geometry.entry(disk, 0, 2)
        assert entry.x == pytest.approx([-1.0, 0.0])
        assert entry.v == pytest.approx([1.0, 0.0])

    def test_rejects_degenerate_geometry(self):
        with pytest.raises(ReconstructionError, match="Invalid parallel-beam geometry"):
            ParallelBeamGeometry(n_angles=0, n_offsets=5, radius=1.0)
        with pytest.raises(ReconstructionError):
            ParallelBeamGeometry(n_angles=4, n_offsets=1, radius=1.0)

    def test_scans_are_planar(self, ball):
        with pytest.raises(ReconstructionError, match="planar"):
            ParallelBeamGeometry.covering(ball, 4, 5)


@pytest.mark.unit
class TestAnalyticScan:
    def test_constant_sigma_times_chord(self, constant, disk):
        geometry = ParallelBeamGeometry.covering(disk, 4, 5)
        values, chords = analytic_line_integrals(constant, disk, geometry)
        assert chords[:, 2] == pytest.approx(np.full(4, 2.0))
        assert values[:, 2] == pytest.approx(np.full(4, 1.0))
        assert values[1, 3] == pytest.approx(0.5 * 2.0 * math.sqrt(0.75))

    def test_lines_missing_the_domain_are_zero(self, constant, disk):
        geometry = ParallelBeamGeometry(n_angles=2, n_offsets=3, radius=2.0)
        values, chords = analytic_line_integrals(constant, disk, geometry)
        assert values[:, 0].tolist() == [0.0, 0.0]
        assert chords[:, 2].tolist() == [0.0, 0.0]

    def test_analytic_sinogram(self, catalog_pair, disk):
        geometry = ParallelBeamGeometry.covering(disk, 8, 17)
        sinogram = xray_transform_scan(catalog_pair("gaussian"), disk, geometry)
        assert sinogram.mode is XRayMode.ANALYTIC
        assert sinogram.values.shape == (8, 17)
        assert np.all(sinogram.values >= 0.0)
        assert len(list(sinogram.samples())) == 8 * 17

    def test_sinograms_on_different_geometries_do_not_add(self, constant, disk):
        first = xray_transform_scan(constant, disk, ParallelBeamGeometry.covering(disk, 4, 5))
        second = xray_transform_scan(constant, disk, ParallelBeamGeometry.covering(disk, 4, 9))
        assert (first + first).values == pytest.approx(2.0 * first.values)
        with pytest.raises(GridMismatchError, match="different geometries"):
            first + second

    @pytest.mark.integration
    def test_measured_central_lines(self, absorber, disk, coarse_solver):
        geometry = ParallelBeamGeometry.covering(disk, 2, 3)
        sinogram = xray_transform_scan(
            absorber,
            disk,
            geometry,
            mode=XRayMode.MEASUREMENT,
            solver=coarse_solver(absorber, disk),
            scene=SceneSettings(point_source=True),
        )
        assert sinogram.mode is XRayMode.MEASUREMENT
        assert sinogram.epsilon == 0.05
        assert not sinogram.flagged[:, 1].any()
        assert sinogram.values[:, 1] == pytest.approx([1.0, 1.0], rel=1e-6)


@pytest.mark.unit
class TestFilter:
    def test_ram_lak_samples(self):
        kernel = ram_lak_kernel(8, 1.0)
        assert kernel[0] == pytest.approx(0.25)
        assert kernel[1] == pytest.approx(-1.0 / math.pi**2)
        assert kernel[2] == 0.0
        assert kernel[3] == pytest.approx(-1.0 / (9.0 * math.pi**2))
        # circular buffer: the last entry is lag -1
        assert kernel[7] == kernel[1]

    def test_ramp_filter_is_padded_and_windowed(self):
        response, size = ramp_filter(65, 1.0 / 32.0, FilterWindow.HANN, cutoff=0.5)
        assert size >= 130
        assert response.shape == (size,)
        frequency = np.abs(np.fft.fftfreq(size, d=1.0 / 32.0))
        assert not np.any(response[frequency > 0.5 * 16.0])

    def test_rejects_cutoff(self):
        with pytest.raises(ReconstructionError, match="cutoff"):
            ramp_filter(65, 0.1, cutoff=1.5)

    def test_zero_projection_stays_zero(self):
        assert not filter_projections(np.zeros((3, 17)), 0.1).any()


@pytest.mark.unit
class TestReconstruction:
    def test_needs_angular_coverage(self, constant, disk):
        sinogram = xray_transform_scan(constant, disk, ParallelBeamGeometry.covering(disk, 16, 33))
        with pytest.raises(ReconstructionError, match="Insufficient angular coverage"):
            reconstruct_sigma(sinogram, disk, size=16)

    def test_offsets_must_cover_domain(self, constant, disk):
        sinogram = xray_transform_scan(constant, disk, ParallelBeamGeometry(32, 33, 0.5))
        with pytest.raises(ReconstructionError, match="Offsets cover radius"):
            reconstruct_sigma(sinogram, disk, size=16)

    def test_constant_disk(self, constant, disk):
        sinogram = xray_transform_scan(constant, disk, ParallelBeamGeometry.covering(disk, 64, 65))
        grid = reconstruct_sigma(sinogram, disk, size=64, window=FilterWindow.RAM_LAK, cutoff=1.0)
        assert grid.mean_within(0.5) == pytest.approx(0.5, rel=0.05)
        assert not grid.values[~grid.inside].any()

    def test_reconstruction_is_linear(self, constant, catalog_pair, disk):
        geometry = ParallelBeamGeometry.covering(disk, 32, 33)
        first = xray_transform_scan(constant, disk, geometry)
        second = xray_transform_scan(catalog_pair("gaussian"), disk, geometry)
        scaled = Sinogram(geometry, 2.5 * second.values, second.chords, second.flagged)
        sum_image = reconstruct_sigma(first + second, disk, size=24).values
        parts = reconstruct_sigma(first, disk, size=24).values + reconstruct_sigma(second, disk, size=24).values
        np.testing.assert_allclose(sum_image, parts, rtol=0.0, atol=1e-10)
        np.testing.assert_allclose(
            reconstruct_sigma(scaled, disk, size=24).values,
            2.5 * reconstruct_sigma(second, disk, size=24).values,
            rtol=0.0,
            atol=1e-10,
        )

    @pytest.mark.slow
    def test_gaussian_phantom(self, catalog_pair, disk):
        pair = catalog_pair("gaussian")
        sinogram = xray_transform_scan(pair, disk, ParallelBeamGeometry.covering(disk, 128, 129))
        grid = reconstruct_sigma(sinogram, disk, size=64)
        assert grid.relative_l2_error(pair) < 0.1
        recovered = grid.as_pair(pair)
        assert recovered.name == "gaussian-fbp"
        assert float(recovered.sigma_at([0.1, -0.05])) == pytest.approx(1.0, abs=0.1)
        assert grid.artifact(relative_l2_error=0.05).size == 64


@pytest.mark.unit
class TestBallisticExtraction:
    def test_absorber_chord(self, absorber, disk, west_entry, coarse_solver):
        response = coarse_solver(absorber, disk).solve(point_source(disk, west_entry), 5.0, order=2)
        extraction = extract_ballistic(response, west_entry)
        assert extraction.value == pytest.approx(math.exp(-1.0))
        assert extraction.exponent == pytest.approx(1.0)
        assert extraction.contamination == 0.0
        assert extraction.travel_time == pytest.approx(2.0)
        lower, upper = extraction.gate
        assert lower < 2.0 < upper

    def test_needs_horizon_beyond_diameter(self, absorber, disk, west_entry, coarse_solver):
        response = coarse_solver(absorber, disk, horizon=2.0).solve(point_source(disk, west_entry), 2.0, order=0)
        with pytest.raises(ReconstructionError, match="T > diam"):
            extract_ballistic(response, west_entry)

    def test_tangent_entry(self, absorber, disk, west_entry, coarse_solver):
        response = coarse_solver(absorber, disk).solve(point_source(disk, west_entry), 5.0, order=0)
        with pytest.raises(ReconstructionError, match="Near-tangent"):
            extract_ballistic(response, PhasePoint.planar([-1.0, 0.0], 0.5 * math.pi))


@pytest.mark.unit
class TestRichardson:
    def test_linear_rate(self):
        estimate = richardson_limit([1.0, 0.5], ratio=2.0, rate=1.0)
        assert estimate.limit == pytest.approx(0.0)
        assert estimate.decrements == (0.5,)

    def test_quadratic_rate(self):
        estimate = richardson_limit([1.0, 0.5, 0.4], ratio=2.0, rate=2.0)
        assert estimate.limit == pytest.approx(0.4 - 0.1 / 3.0)
        assert estimate.contracting

    def test_single_value(self):
        assert richardson_limit([0.3]).limit == 0.3

    def test_invalid_input(self):
        with pytest.raises(ReconstructionError, match="at least one value"):
            richardson_limit([])
        with pytest.raises(ValueError, match="Refinement ratio"):
            richardson_limit([1.0, 0.5], ratio=1.0)


@pytest.mark.unit
class TestScatteringExtraction:
    def test_broken_ray_depths(self):
        s, s_out = broken_ray_depths([0.0, 1.0], [0.0, 1.0], [-1.0, 0.0], [1.0, 0.0])
        assert float(s) == pytest.approx(1.0)
        assert float(s_out) == pytest.approx(1.0)
        parallel, _ = broken_ray_depths([1.0, 0.0], [1.0, 0.0], [-1.0, 0.0], [1.0, 0.0])
        assert math.isnan(float(parallel))

    def test_needs_twice_the_diameter(self, constant, disk, west_entry, coarse_solver):
        source = point_source(disk, west_entry)
        response = coarse_solver(constant, disk, kappa=0.05, horizon=3.5).solve(source, 3.5, order=1)
        with pytest.raises(ReconstructionError, match="T > 2 diam"):
            extract_k(response, west_entry, constant, source)

    def test_needs_single_scatter_part(self, absorber, disk, west_entry, coarse_solver):
        source = point_source(disk, west_entry)
        response = coarse_solver(absorber, disk).solve(source, 5.0, order=0)
        with pytest.raises(ReconstructionError, match="single-scatter part"):
            extract_k(response, west_entry, absorber, source)

    @pytest.mark.integration
    def test_constant_kernel_is_recovered(self, constant, disk, west_entry, coarse_solver):
        source = point_source(disk, west_entry)
        response = coarse_solver(constant, disk, kappa=0.05).solve(source, 5.0, order=1)
        samples = extract_k(response, west_entry, constant, source)
        assert len(samples.accepted()) > 0
        assert samples.max_relative_error(constant) < 1e-3
        assert all(0.0 <= sample.depth <= 2.0 for sample in samples.accepted())
        # nothing inside the exclusion cone around +-v'0
        assert all(abs(sample.direction[1]) > math.sin(0.1) for sample in samples.samples)
