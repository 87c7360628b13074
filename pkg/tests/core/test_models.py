import math

import pytest
from pydantic import ValidationError

from core.models import (
    ConstantSigma,
    GaussianBump,
    GaussianSigma,
    OperatorDistance,
    PhantomPairSpec,
    PhantomSpec,
    ProbeRecord,
    StabilityReport,
    StabilityRow,
)
from core.types import ResponsePart


@pytest.mark.unit
class TestStabilityRow:
    def test_upper_bound_row(self):
        row = StabilityRow(name="pointwise", lhs=1.0, rhs=2.0)
        assert row.margin == pytest.approx(1.0)
        assert row.passed

    def test_tolerance_rescues_a_near_miss(self):
        row = StabilityRow(name="pointwise", lhs=2.0 + 1e-10, rhs=2.0, tolerance=1e-8)
        assert row.passed
        assert not StabilityRow(name="pointwise", lhs=2.1, rhs=2.0, tolerance=1e-8).passed

    def test_lower_bound_row(self):
        row = StabilityRow(name="operator-lower", lhs=1.0, rhs=2.0, lower_bound=True)
        assert row.margin == pytest.approx(-1.0)
        assert not row.passed
        assert StabilityRow(name="operator-lower", lhs=3.0, rhs=2.0, lower_bound=True).passed

    def test_non_finite_values_fail(self):
        assert not StabilityRow(name="pointwise", lhs=math.nan, rhs=1.0).passed
        assert not StabilityRow(name="pointwise", lhs=0.0, rhs=math.inf).passed

    def test_flat_row_sorts_constants(self):
        row = StabilityRow(name="sobolev", entry_index=3, lhs=0.5, rhs=1.0, constants={"theta": 0.4, "C": 2.0})
        flat = row.flat()
        assert list(flat)[:7] == ["name", "entry_index", "lhs", "rhs", "tolerance", "margin", "passed"]
        assert list(flat)[7:] == ["c_C", "c_theta"]
        assert flat["passed"] is True

    def test_computed_fields_are_serialized(self):
        dumped = StabilityRow(name="pointwise", lhs=1.0, rhs=2.0).model_dump()
        assert dumped["margin"] == pytest.approx(1.0)
        assert dumped["passed"] is True


@pytest.mark.unit
class TestStabilityReport:
    def test_failures_are_listed(self):
        report = StabilityReport(
            experiment="stability-pointwise",
            rows=[
                StabilityRow(name="pointwise", lhs=1.0, rhs=2.0),
                StabilityRow(name="pointwise", entry_index=1, lhs=3.0, rhs=2.0),
            ],
        )
        assert not report.passed
        assert [row.entry_index for row in report.failures()] == [1]

    def test_report_round_trips_through_json(self):
        report = StabilityReport(
            experiment="stability-pointwise",
            rows=[StabilityRow(name="pointwise", lhs=1.0, rhs=2.0, constants={"C": 1.5})],
        )
        restored = StabilityReport.model_validate_json(report.model_dump_json())
        assert restored.rows[0].constants == {"C": 1.5}
        assert restored.passed


@pytest.mark.unit
class TestOperatorDistance:
    def test_consistency_and_probe_lookup(self):
        probes = [
            ProbeRecord(entry_index=0, point=[-1.0, 0.0], direction=[1.0, 0.0], epsilon=0.05, value=0.2),
            ProbeRecord(entry_index=0, point=[-1.0, 0.0], direction=[1.0, 0.0], epsilon=0.05, value=0.3),
            ProbeRecord(entry_index=-1, point=[0.0, 1.0], direction=[0.0, -1.0], epsilon=0.05, value=0.1),
        ]
        distance = OperatorDistance(
            lower=0.3,
            upper=0.5,
            upper_explicit=0.4,
            tail_bound_reference=0.05,
            tail_bound_perturbed=0.05,
            tolerance=0.0,
            entries=2,
            probes=probes,
        )
        assert distance.consistent
        assert distance.probe_value(0) == pytest.approx(0.3)
        assert distance.probe_value(1) is None

    def test_inconsistent_when_lower_exceeds_upper(self):
        distance = OperatorDistance(
            lower=0.6,
            upper=0.5,
            upper_explicit=0.5,
            tail_bound_reference=0.0,
            tail_bound_perturbed=0.0,
            tolerance=0.05,
            entries=1,
        )
        assert not distance.consistent


@pytest.mark.unit
class TestPhantomSpec:
    def test_bump_centers_must_match_dimension(self):
        bump = GaussianBump(amplitude=1.0, center=(0.0, 0.0, 0.0), width=0.2)
        with pytest.raises(ValidationError, match="does not have 2 coordinates"):
            PhantomSpec(name="bad", sigma=GaussianSigma(bumps=(bump,)))

    def test_sigma_scaling(self):
        bump = GaussianBump(amplitude=1.5, center=(0.0, 0.0), width=0.2)
        spec = PhantomSpec(name="bump", sigma=GaussianSigma(background=0.5, bumps=(bump,)))
        scaled = spec.with_sigma_scale(2.0)
        assert scaled.name == "bump*2"
        assert scaled.sigma.bumps[0].amplitude == pytest.approx(3.0)
        assert scaled.sigma.background == pytest.approx(0.5)
        assert spec.sigma.bumps[0].amplitude == pytest.approx(1.5)

    def test_constant_scaling(self):
        spec = PhantomSpec(name="flat", sigma=ConstantSigma(value=1.0))
        assert spec.with_sigma_scale(0.5, name="half").sigma.value == pytest.approx(0.5)

    def test_discriminated_kappa_from_mapping(self):
        spec = PhantomSpec.model_validate(
            {"name": "hg", "kappa": {"kind": "henyey-greenstein", "scale": 0.1, "asymmetry": 0.3}}
        )
        assert spec.kappa.asymmetry == pytest.approx(0.3)

    def test_negative_extinction_is_rejected(self):
        with pytest.raises(ValidationError):
            PhantomSpec(name="bad", sigma={"kind": "constant", "value": -1.0})

    def test_pair_dimensions_must_agree(self):
        flat = PhantomSpec(name="flat")
        ball = PhantomSpec(name="ball", dimension=3)
        with pytest.raises(ValidationError, match="share the spatial dimension"):
            PhantomPairSpec(name="mixed", reference=flat, perturbed=ball)


@pytest.mark.unit
def test_response_part_labels():
    assert ResponsePart.from_order(0) is ResponsePart.BALLISTIC
    assert ResponsePart.from_order(2) is ResponsePart.DOUBLE
    with pytest.raises(ValueError, match="No part label for collision order 3"):
        ResponsePart.from_order(3)
