"""Stability report models.

A report is a flat list of inequality rows plus the operator-distance estimate
they were checked against. Rows carry their own tolerance so that a reader can
re-evaluate pass/fail without the code that produced them.
"""

import math
from typing import Optional

from pydantic import BaseModel, Field, computed_field

from .artifacts import Artifact


class ProbeRecord(BaseModel):
    """One probing source used for the lower distance estimate."""

    entry_index: int = Field(description="Index into the entry set, -1 for off-grid probes")
    point: list[float]
    direction: list[float]
    epsilon: float = Field(description="Mollifier width of the probe")
    value: float = Field(ge=0.0, description="||(A - A~) phi||_1 / ||phi||_1 for this probe")


class OperatorDistance(BaseModel):
    """Two-sided estimate of the albedo operator distance."""

    lower: float = Field(ge=0.0, description="Max over probes of the normalized response difference")
    upper: float = Field(ge=0.0, description="Sup over entries of the kernel difference plus both tail bounds")
    upper_explicit: float = Field(ge=0.0, description="Upper estimate without the tail bounds")
    tail_bound_reference: float = Field(ge=0.0)
    tail_bound_perturbed: float = Field(ge=0.0)
    tolerance: float = Field(ge=0.0, description="Declared tolerance for lower <= upper")
    entries: int = Field(ge=0, description="Number of entry nodes in the sup")
    entry_values: list[float] = Field(default_factory=list, description="Explicit kernel difference per entry")
    probes: list[ProbeRecord] = Field(default_factory=list)

    @property
    def consistent(self) -> bool:
        return self.lower <= self.upper + self.tolerance

    def probe_value(self, entry_index: int) -> Optional[float]:
        """Largest probe value recorded for a given entry node."""
        values = [p.value for p in self.probes if p.entry_index == entry_index]
        return max(values) if values else None


class StabilityRow(BaseModel):
    """One inequality instance: lhs <= rhs (or lhs >= rhs for lower bounds)."""

    name: str = Field(description="Inequality family")
    entry_index: int = Field(default=-1, description="Entry node, -1 for global rows")
    lhs: float
    rhs: float
    tolerance: float = Field(default=0.0, ge=0.0)
    lower_bound: bool = Field(default=False, description="True when the row asserts lhs >= rhs")
    constants: dict[str, float] = Field(default_factory=dict)

    @computed_field
    @property
    def margin(self) -> float:
        if self.lower_bound:
            return self.lhs - self.rhs + self.tolerance
        return self.rhs - self.lhs + self.tolerance

    @computed_field
    @property
    def passed(self) -> bool:
        return math.isfinite(self.lhs) and math.isfinite(self.rhs) and self.margin >= 0.0

    def flat(self) -> dict[str, object]:
        """Row as a flat mapping for the CSV export."""
        row: dict[str, object] = {
            "name": self.name,
            "entry_index": self.entry_index,
            "lhs": self.lhs,
            "rhs": self.rhs,
            "tolerance": self.tolerance,
            "margin": self.margin,
            "passed": self.passed,
        }
        for key in sorted(self.constants):
            row[f"c_{key}"] = self.constants[key]
        return row


class StabilityReport(Artifact):
    """Every inequality checked by one stability experiment."""

    kind: str = "stability-report"
    experiment: str
    pair_hashes: list[str] = Field(default_factory=list)
    grid: dict[str, float] = Field(default_factory=dict)
    distance: Optional[OperatorDistance] = None
    rows: list[StabilityRow] = Field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(row.passed for row in self.rows)

    def failures(self) -> list[StabilityRow]:
        return [row for row in self.rows if not row.passed]
