"""Sobolev norms of grid fields through the discrete Fourier transform.

With the unitary transform f^(xi) = (2 pi)^{-d/2} int f(x) exp(-i x.xi) dx,

    ||f||_{H^s}^2 = int (1 + |xi|^2)^s |f^(xi)|^2 d xi.

On a periodic grid of N^d nodes with spacing h the Riemann sum of the right
hand side is h^d / N^d sum_k (1 + |xi_k|^2)^s |F_k|^2, so s = 0 gives the grid
L^2 norm exactly (Parseval).
"""

import logging
import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy import fft

from core.models import StabilityRow
from transport_engine.errors import GridMismatchError
from transport_engine.geometry import Domain

logger = logging.getLogger(__name__)

RESOLUTION_TOLERANCE = 1e-6
OUTER_BAND = 0.75


def wavenumbers(shape: tuple[int, ...], spacing: float) -> NDArray[np.float64]:
    """|xi|^2 on the FFT grid, angular frequencies."""
    axes = [2.0 * math.pi * fft.fftfreq(n, d=spacing) for n in shape]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.sum([axis**2 for axis in mesh], axis=0)


def _outer_band(shape: tuple[int, ...], spacing: float) -> NDArray[np.bool_]:
    nyquist = math.pi / spacing
    axes = [np.abs(2.0 * math.pi * fft.fftfreq(n, d=spacing)) > OUTER_BAND * nyquist for n in shape]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.any(mesh, axis=0)


def sobolev_norm(values: ArrayLike, s: float, spacing: float, warn: bool = True) -> float:
    """||f||_{H^s} of a field sampled on a uniform grid that zero-pads its support.

    Warns when more than a tiny fraction of the weighted spectrum sits in the
    outer quarter of the frequency box, i.e. when the grid cannot resolve
    the weight (1 + |xi|^2)^s for this field.
    """
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        return 0.0
    power = np.abs(fft.fftn(values)) ** 2
    weights = (1.0 + wavenumbers(values.shape, spacing)) ** s
    weighted = weights * power
    total = float(np.sum(weighted))
    if total <= 0.0:
        return 0.0
    if warn:
        outer = float(np.sum(weighted[_outer_band(values.shape, spacing)])) / total
        if outer > RESOLUTION_TOLERANCE:
            logger.warning(
                f"H^{s:g} norm is under-resolved: {outer:.2e} of the weighted spectrum lies near Nyquist "
                f"(spacing {spacing:g})"
            )
    return math.sqrt(spacing**values.ndim * total / values.size)


@dataclass(frozen=True, eq=False)
class SobolevGrid:
    """A field on X sampled on a periodic box of half-width ``half_width``, zero outside X."""

    values: NDArray[np.float64]
    spacing: float
    half_width: float

    @classmethod
    def sample(
        cls,
        field: Callable[[NDArray[np.float64]], NDArray[np.float64]],
        domain: Domain,
        size: int = 128,
        padding: float = 2.0,
    ) -> "SobolevGrid":
        """Sample ``field`` on size^d nodes of [-padding R, padding R)^d, R the largest semi-axis."""
        half_width = padding * max(domain.semi_axes)
        spacing = 2.0 * half_width / size
        axis = -half_width + spacing * np.arange(size)
        mesh = np.meshgrid(*([axis] * domain.dimension), indexing="ij")
        points = np.stack(mesh, axis=-1)
        inside = domain.contains(points)
        values = np.zeros(points.shape[:-1])
        values[inside] = np.asarray(field(points[inside]), dtype=float)
        return cls(values=values, spacing=spacing, half_width=half_width)

    @property
    def dimension(self) -> int:
        return self.values.ndim

    def __sub__(self, other: "SobolevGrid") -> "SobolevGrid":
        if self.values.shape != other.values.shape or not math.isclose(self.spacing, other.spacing):
            raise GridMismatchError("Sobolev grids differ in shape or spacing")
        return SobolevGrid(self.values - other.values, self.spacing, self.half_width)

    def norm(self, s: float, warn: bool = True) -> float:
        return sobolev_norm(self.values, s, self.spacing, warn=warn)

    def sup(self) -> float:
        return float(np.max(np.abs(self.values))) if self.values.size else 0.0


def interpolation_exponents(s: float, r_tilde: float, dimension: int) -> tuple[float, float]:
    """Weights (theta_high, theta_low) of H^{d/2 + r_tilde} and H^{-1/2} interpolating H^s."""
    top = 0.5 * dimension + r_tilde
    if not -0.5 <= s < top:
        raise ValueError(f"Sobolev order s = {s:g} must lie in [-1/2, {top:g})")
    span = dimension + 1.0 + 2.0 * r_tilde
    return (2.0 * s + 1.0) / span, (dimension + 2.0 * (r_tilde - s)) / span


def sigma_stability_exponent(s: float, r_tilde: float, dimension: int) -> float:
    """kappa = (d + 2 (r_tilde - s)) / (d + 1 + 2 r_tilde)."""
    return interpolation_exponents(s, r_tilde, dimension)[1]


def kernel_stability_exponent(r: float, r_tilde: float, dimension: int) -> float:
    """kappa = 2 (r_tilde - r) / (d + 1 + 2 r_tilde)."""
    if not 0.0 <= r < r_tilde:
        raise ValueError(f"Kernel order r = {r:g} must lie in [0, {r_tilde:g})")
    return 2.0 * (r_tilde - r) / (dimension + 1.0 + 2.0 * r_tilde)


def interpolation_check(field: SobolevGrid, s: float, r_tilde: float, tolerance: float = 1e-10) -> StabilityRow:
    """||f||_{H^s} <= ||f||_{H^{d/2 + r_tilde}}^theta_high ||f||_{H^{-1/2}}^theta_low as a report row.

    All three norms come from the same transform, so the row is a discrete
    Hoelder inequality and holds up to rounding.
    """
    d = field.dimension
    high, low = interpolation_exponents(s, r_tilde, d)
    lhs = field.norm(s, warn=False)
    top = field.norm(0.5 * d + r_tilde, warn=False)
    bottom = field.norm(-0.5, warn=False)
    rhs = top**high * bottom**low if top > 0.0 and bottom > 0.0 else 0.0
    return StabilityRow(
        name="interpolation",
        lhs=lhs,
        rhs=rhs,
        tolerance=tolerance * (1.0 + rhs),
        constants={"s": s, "r_tilde": r_tilde, "theta_high": high, "theta_low": low},
    )


def embedding_constant(fields: Sequence[SobolevGrid], r_tilde: float, safety: float = 1.5) -> float:
    """safety * max ||f||_inf / ||f||_{H^{d/2 + r_tilde}} over the nonzero fields."""
    ratios = []
    for field in fields:
        top = field.norm(0.5 * field.dimension + r_tilde, warn=False)
        if top > 0.0:
            ratios.append(field.sup() / top)
    return safety * max(ratios, default=0.0)
