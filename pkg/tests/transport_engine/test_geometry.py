import math

import numpy as np
import pytest

from core.config import DomainSettings
from core.types import BoundarySign, DomainKind, IntegrationRoute, RaySign
from transport_engine.errors import GeometryError
from transport_engine.geometry import (
    BoundaryGrid,
    Domain,
    LineQuadrature,
    PhasePoint,
    SphereRule,
    VolumeRule,
    exit_time,
    gauss_legendre,
    phase_space_integral,
    segment_indicator,
)


@pytest.mark.unit
class TestDomain:
    def test_unit_disk_shape_constants(self, disk):
        assert disk.dimension == 2
        assert disk.diameter == 2.0
        assert disk.volume == pytest.approx(math.pi)
        assert disk.boundary_measure == pytest.approx(2.0 * math.pi)

    def test_unit_ball_shape_constants(self, ball):
        assert ball.dimension == 3
        assert ball.volume == pytest.approx(4.0 / 3.0 * math.pi)
        assert ball.boundary_measure == pytest.approx(4.0 * math.pi)

    def test_ellipse_perimeter(self):
        # circle limit of the elliptic integral
        assert Domain.ellipse(2.0, 2.0).boundary_measure == pytest.approx(4.0 * math.pi)
        assert Domain.ellipse(2.0, 1.0).diameter == 4.0

    def test_from_settings(self):
        assert Domain.from_settings(DomainSettings(kind=DomainKind.UNIT_BALL)) == Domain.unit_ball()
        ellipse = Domain.from_settings(DomainSettings(kind=DomainKind.ELLIPSE, semi_axes=(1.5, 1.0)))
        assert ellipse.semi_axes == (1.5, 1.0)

    def test_rejects_bad_semi_axes(self):
        with pytest.raises(GeometryError, match="needs 2 semi-axes"):
            Domain(DomainKind.UNIT_DISK, (1.0, 1.0, 1.0))
        with pytest.raises(GeometryError, match="positive"):
            Domain.ellipse(1.0, 0.0)

    def test_exit_times_from_center(self, disk):
        assert float(disk.exit_time([0.0, 0.0], [1.0, 0.0])) == pytest.approx(1.0)
        assert float(disk.exit_time([0.5, 0.0], [1.0, 0.0], RaySign.MINUS)) == pytest.approx(1.5)

    def test_outgoing_boundary_point_exits_immediately(self, disk):
        assert float(disk.exit_time([1.0, 0.0], [1.0, 0.0])) == 0.0
        assert float(disk.exit_time([1.0, 0.0], [-1.0, 0.0])) == pytest.approx(2.0)

    def test_chord_time_is_sum_of_exit_times(self, disk):
        x = np.array([0.2, -0.3])
        v = np.array([math.cos(0.7), math.sin(0.7)])
        chord = float(disk.chord_time(x, v))
        assert chord == pytest.approx(float(disk.exit_time(x, v)) + float(disk.exit_time(x, v, RaySign.MINUS)))

    def test_chord_at_offset(self, disk):
        # horizontal chord at height h has length 2 sqrt(1 - h^2)
        chord = float(disk.chord_time([0.0, 0.6], [1.0, 0.0]))
        assert chord == pytest.approx(1.6)

    def test_exit_time_rejects_non_unit_direction(self, disk):
        with pytest.raises(GeometryError, match="unit vectors"):
            disk.exit_time([0.0, 0.0], [2.0, 0.0])

    def test_exit_time_rejects_outside_point(self, disk):
        with pytest.raises(GeometryError, match="inside the closure"):
            disk.exit_time([1.5, 0.0], [1.0, 0.0])

    def test_line_intersection_hit_and_miss(self, disk):
        s0, s1, hit = disk.line_intersection(np.array([[-3.0, 0.0], [-3.0, 2.0]]), np.array([[1.0, 0.0], [1.0, 0.0]]))
        assert hit.tolist() == [True, False]
        assert s0[0] == pytest.approx(2.0)
        assert s1[0] == pytest.approx(4.0)
        assert s0[1] == 0.0 and s1[1] == 0.0

    def test_ellipse_exit_distance(self):
        ellipse = Domain.ellipse(2.0, 1.0)
        assert float(ellipse.exit_distance([0.0, 0.0], [1.0, 0.0])) == pytest.approx(2.0)
        assert float(ellipse.exit_distance([0.0, 0.0], [0.0, 1.0])) == pytest.approx(1.0)

    def test_boundary_angle_inverts_parametrization(self, disk):
        theta = np.array([0.0, 1.0, 4.0])
        assert disk.boundary_angle(disk.boundary_point(theta)) == pytest.approx(theta)

    def test_ball_boundary_point_needs_azimuth(self, ball):
        with pytest.raises(GeometryError, match="polar and an azimuthal"):
            ball.boundary_point(0.3)


@pytest.mark.unit
class TestPhasePoint:
    def test_planar_constructor(self, west_entry, disk):
        assert west_entry.v == pytest.approx([1.0, 0.0])
        assert exit_time(disk, west_entry) == pytest.approx(2.0)
        assert exit_time(disk, west_entry, RaySign.MINUS) == 0.0

    def test_rejects_shape_mismatch(self):
        with pytest.raises(GeometryError, match="does not match"):
            PhasePoint(np.zeros(3), np.array([1.0, 0.0]))

    def test_rejects_non_unit_direction(self):
        with pytest.raises(GeometryError, match="not a unit vector"):
            PhasePoint(np.zeros(2), np.array([1.0, 1.0]))

    def test_segment_indicator(self, disk):
        x = np.array([[0.0, 0.0], [0.0, 0.0]])
        y = np.array([[0.5, 0.5], [2.0, 0.0]])
        assert segment_indicator(disk, x, y).tolist() == [1, 0]


@pytest.mark.unit
class TestQuadrature:
    def test_gauss_legendre_on_unit_interval(self):
        nodes, weights = gauss_legendre(8)
        assert nodes.min() > 0.0 and nodes.max() < 1.0
        assert weights.sum() == pytest.approx(1.0)
        assert float(weights @ nodes**5) == pytest.approx(1.0 / 6.0)

    def test_line_quadrature_panels_cover_length(self):
        line = LineQuadrature.for_length(2.0, nodes_per_panel=4, panel_length=0.5)
        assert line.panels == 4
        nodes, weights = line.rule
        assert len(nodes) == 16
        assert weights.sum() == pytest.approx(1.0)

    @pytest.mark.parametrize("dimension, total", [(2, 2.0 * math.pi), (3, 4.0 * math.pi)])
    def test_sphere_rule_total(self, dimension, total):
        rule = SphereRule.build(dimension, 16)
        assert rule.total == pytest.approx(total)
        assert np.linalg.norm(rule.directions, axis=-1) == pytest.approx(np.ones(rule.size))

    def test_sphere_rule_rejects_other_dimensions(self):
        with pytest.raises(GeometryError, match="d = 4"):
            SphereRule.build(4, 8)

    @pytest.mark.parametrize("domain", [Domain.unit_disk(), Domain.unit_ball(), Domain.ellipse(2.0, 0.5)])
    def test_volume_rule_total(self, domain):
        rule = VolumeRule.build(domain, radial_nodes=8, angle_nodes=16)
        assert rule.weights.sum() == pytest.approx(domain.volume)


@pytest.mark.unit
class TestBoundaryGrid:
    def test_shape_and_time_bins(self, disk):
        grid = BoundaryGrid.build(disk, 16, 32, 10, 5.0)
        assert grid.shape == (10, 16, 32)
        assert grid.dt == pytest.approx(0.5)
        assert grid.horizon == 5.0

    def test_xi_measure_of_disk(self, disk):
        # |Gamma_+| = perimeter * integral of cos_+ = 2 pi * 2
        grid = BoundaryGrid.build(disk, 64, 64, 1, 1.0)
        assert grid.xi_measure == pytest.approx(4.0 * math.pi, rel=1e-3)

    def test_flipped_grid_has_complementary_mask(self, disk):
        outgoing = BoundaryGrid.build(disk, 16, 16, 1, 1.0)
        incoming = outgoing.flipped()
        assert incoming.sign is BoundarySign.INCOMING
        assert not np.any(outgoing.mask & incoming.mask)
        assert incoming.xi_measure == pytest.approx(outgoing.xi_measure)

    def test_tangent_pairs_carry_no_weight(self, disk):
        grid = BoundaryGrid.build(disk, 16, 16, 1, 1.0)
        # boundary node 0 is (1, 0); angle node 4 is (0, 1), tangent there
        assert grid.xi_weights[0, 4] == 0.0
        assert grid.xi_weights[0, 0] > 0.0

    def test_index_lookups(self, disk):
        grid = BoundaryGrid.build(disk, 16, 16, 10, 5.0)
        assert int(grid.boundary_index([0.0, 1.0])) == 4
        assert int(grid.angle_index([-1.0, 0.0])) == 8
        assert grid.time_bin_index([0.1, 4.99, 5.0, -0.1]).tolist() == [0, 9, -1, -1]

    def test_index_lookups_are_planar_only(self, ball):
        grid = BoundaryGrid.build(ball, 8, 8, 1, 1.0)
        with pytest.raises(GeometryError, match="planar"):
            grid.boundary_index([0.0, 0.0, 1.0])

    def test_same_discretization(self, disk, coarse_quadrature):
        grid = BoundaryGrid.from_settings(disk, coarse_quadrature, 5.0)
        assert grid.same_discretization(BoundaryGrid.from_settings(disk, coarse_quadrature, 5.0))
        assert not grid.same_discretization(BoundaryGrid.from_settings(disk, coarse_quadrature, 6.0))

    def test_rejects_non_positive_horizon(self, disk):
        with pytest.raises(GeometryError, match="Horizon"):
            BoundaryGrid.build(disk, 8, 8, 4, 0.0)


@pytest.mark.unit
class TestPhaseSpaceIntegral:
    @staticmethod
    def smooth(x, v):
        return np.exp(-np.sum(x * x, axis=-1)) * (1.0 + 0.5 * v[..., 0])

    def test_constant_integrand_on_disk(self, disk):
        total = phase_space_integral(lambda x, v: np.ones(x.shape[:-1]), disk)
        assert total == pytest.approx(2.0 * math.pi**2)

    @pytest.mark.parametrize("route", [IntegrationRoute.BOUNDARY_INCOMING, IntegrationRoute.BOUNDARY_OUTGOING])
    def test_boundary_routes_match_volume_route(self, disk, route):
        volume = phase_space_integral(self.smooth, disk, IntegrationRoute.VOLUME)
        boundary = phase_space_integral(self.smooth, disk, route, boundary_nodes=128, angle_nodes=128)
        assert boundary == pytest.approx(volume, rel=1e-4)

    def test_non_finite_integrand_is_guarded(self, disk):
        from transport_engine.errors import NumericalGuardError

        with pytest.raises(NumericalGuardError, match="non-finite"):
            phase_space_integral(lambda x, v: np.full(x.shape[:-1], np.nan), disk)
