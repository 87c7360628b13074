"""Pairing the two-collision response with test weights of shrinking support.

For psi the indicator of a set S of cells in (0, T) x Gamma_+, Hoelder gives

    <psi, multiple> <= C ||psi||_{L^p'} = C |S|^{1/p'}

with C the remainder constant of the kernel budget. Only the two-collision part
is computed; orders >= 3 enter the psi = 1 rows through their share of C, the
higher-collision constant. The ladder starts at psi = 1 and keeps, at rung j,
the densest cells covering at most 2^-j of the outgoing measure.
"""

import logging
import math
from typing import Optional, Sequence

import numpy as np
from numpy.typing import NDArray

from core.config import StabilitySettings
from core.models import StabilityRow
from core.utils import ordered_map
from transport_engine.forward import ForwardSolver, double_scatter_masses
from transport_engine.geometry import BoundaryGrid, PhasePoint

logger = logging.getLogger(__name__)


def cell_measures(grid: BoundaryGrid) -> NDArray[np.float64]:
    """dt d xi of every (time, boundary, angle) cell."""
    return grid.time_widths[:, None, None] * grid.xi_weights[None, :, :]


def shrinking_supports(masses: NDArray[np.float64], measures: NDArray[np.float64], rungs: int) -> list[NDArray]:
    """Flat cell indices of every rung; rung 0 is the whole of (0, T) x Gamma_+."""
    flat_masses = masses.ravel()
    flat_measures = measures.ravel()
    cells = np.flatnonzero(flat_measures > 0.0)
    if cells.size == 0:
        return []
    density = flat_masses[cells] / flat_measures[cells]
    ordered = cells[np.argsort(-density, kind="stable")]
    cumulative = np.cumsum(flat_measures[ordered])
    total = float(cumulative[-1])
    supports = [cells]
    for rung in range(1, rungs):
        count = max(1, int(np.searchsorted(cumulative, total * 0.5**rung, side="right")))
        supports.append(ordered[:count])
    return supports


def support_norm(measures: NDArray[np.float64], support: NDArray, p: float) -> float:
    """||psi||_{L^p'} for the indicator of ``support``."""
    measure = float(np.sum(measures.ravel()[support]))
    return measure ** ((p - 1.0) / p) if measure > 0.0 else 0.0


def pairing_ratio(masses: NDArray[np.float64], measures: NDArray[np.float64], support: NDArray, p: float) -> float:
    """<psi, multiple> / ||psi||_{L^p'} for the indicator of ``support``."""
    norm = support_norm(measures, support, p)
    if norm <= 0.0:
        return 0.0
    return math.fsum(masses.ravel()[support]) / norm


def check_multiple_scattering_tail(
    solver: ForwardSolver,
    horizon: float,
    entries: Sequence[PhasePoint],
    settings: Optional[StabilitySettings] = None,
    threads: Optional[int] = None,
) -> list[StabilityRow]:
    """``tail-two-collision`` rows for every entry and rung, ``tail-remainder`` and ``tail-mass`` at psi = 1."""
    settings = settings or StabilitySettings()
    budget = solver.budget(horizon)
    grid = solver.grid(horizon)
    measures = cell_measures(grid)
    tolerance = settings.row_tolerance
    constants = {
        "p": budget.p,
        "remainder": budget.remainder,
        "two_collision": budget.two_collision,
        "higher_collision": budget.higher_collision,
        "holder_factor": budget.holder_factor,
    }

    def entry_rows(index: int) -> list[StabilityRow]:
        if solver.pair.kappa_vanishes:
            masses = np.zeros(grid.shape)
        else:
            masses = double_scatter_masses(
                solver.pair,
                solver.domain,
                grid,
                entries[index],
                0.0,
                depth_nodes=solver.kernels.double_depth_nodes,
                panel_length=solver.quadrature.ray_panel_length,
                tube=solver.kernels.singular_tube,
            )
        supports = shrinking_supports(masses, measures, settings.psi_rungs)
        rows = []
        for rung, support in enumerate(supports):
            ratio = pairing_ratio(masses, measures, support, budget.p)
            rung_constants = {**constants, "rung": float(rung), "cells": float(support.size)}
            rows.append(
                StabilityRow(
                    name="tail-two-collision",
                    entry_index=index,
                    lhs=ratio,
                    rhs=budget.two_collision,
                    tolerance=tolerance,
                    constants=rung_constants,
                )
            )
            if rung > 0:
                continue
            # orders >= 3 pair with psi to at most higher_collision ||psi||_{L^p'}
            higher = budget.higher_collision * support_norm(measures, support, budget.p)
            rung_constants = {**rung_constants, "higher_collision_mass": higher}
            rows.append(
                StabilityRow(
                    name="tail-remainder",
                    entry_index=index,
                    lhs=ratio + budget.higher_collision,
                    rhs=budget.remainder,
                    tolerance=tolerance,
                    constants=rung_constants,
                )
            )
            if budget.double_mass is not None:
                rows.append(
                    StabilityRow(
                        name="tail-mass",
                        entry_index=index,
                        lhs=math.fsum(masses.ravel()) + higher,
                        rhs=budget.double_mass + higher,
                        tolerance=tolerance,
                        constants=rung_constants,
                    )
                )
        return rows

    rows = [row for chunk in ordered_map(entry_rows, range(len(entries)), threads) for row in chunk]
    failed = sum(not row.passed for row in rows)
    if failed:
        logger.warning(f"{failed} of {len(rows)} multiple-scattering rows failed")
    logger.info(f"Checked the two-collision pairing at {len(entries)} entries, {settings.psi_rungs} rungs each")
    return rows
