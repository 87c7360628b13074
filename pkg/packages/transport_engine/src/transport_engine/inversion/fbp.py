"""Filtered back-projection of parallel-beam sinograms (d = 2).

Each projection is convolved with the band-limited Ram-Lak kernel

    h(0) = 1 / (4 d^2),  h(m d) = -1 / (pi^2 m^2 d^2) for odd m,  0 for even m != 0,

through a zero-padded FFT, optionally apodized, and smeared back along its
lines: sigma(x) ~ (pi / n_angles) sum_k q_k(x . n_k).
"""

import logging
import math
from dataclasses import dataclass
from typing import Any, Iterator, Optional

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy import fft
from scipy.interpolate import RegularGridInterpolator

from core.config import MIN_RECONSTRUCTION_ANGLES, InversionSettings
from core.models import ReconstructionArtifact
from core.types import FilterWindow
from core.utils import chunked, ordered_map
from transport_engine.coefficients import CoefficientPair, SigmaField
from transport_engine.errors import ReconstructionError
from transport_engine.geometry import Domain
from transport_engine.inversion.xray import Sinogram

logger = logging.getLogger(__name__)

RECONSTRUCTION_COLUMNS = ("row", "column", "x", "y", "value")
ANGLE_CHUNK = 16


def ram_lak_kernel(size: int, spacing: float) -> NDArray[np.float64]:
    """Spatial Ram-Lak samples in FFT order (lags 0, 1, ..., -1) on a circular buffer of ``size``."""
    lags = np.concatenate([np.arange(0, size // 2 + 1), np.arange(-(size - size // 2 - 1), 0)])
    kernel = np.zeros(size)
    kernel[lags == 0] = 1.0 / (4.0 * spacing**2)
    odd = lags % 2 == 1
    kernel[odd] = -1.0 / (math.pi**2 * lags[odd].astype(float) ** 2 * spacing**2)
    return kernel


def ramp_filter(
    n_offsets: int,
    spacing: float,
    window: FilterWindow | str = FilterWindow.HANN,
    cutoff: float = 0.9,
) -> tuple[NDArray[np.float64], int]:
    """Frequency response of the windowed ramp and the padded length it applies to."""
    window = FilterWindow(window)
    if not 0.0 < cutoff <= 1.0:
        raise ReconstructionError(f"Filter cutoff must lie in (0, 1], got {cutoff}")
    size = fft.next_fast_len(2 * n_offsets)
    response = spacing * np.real(fft.fft(ram_lak_kernel(size, spacing)))
    frequency = np.abs(fft.fftfreq(size, d=spacing))
    band = cutoff * 0.5 / spacing
    if window is FilterWindow.HANN:
        taper = np.where(frequency <= band, 0.5 * (1.0 + np.cos(math.pi * frequency / band)), 0.0)
    else:
        taper = (frequency <= band).astype(float)
    return response * taper, size


def filter_projections(
    values: NDArray[np.float64],
    spacing: float,
    window: FilterWindow | str = FilterWindow.HANN,
    cutoff: float = 0.9,
) -> NDArray[np.float64]:
    """Ramp-filter every projection (row) of a sinogram."""
    response, size = ramp_filter(values.shape[1], spacing, window, cutoff)
    spectrum = fft.fft(values, n=size, axis=1)
    return np.real(fft.ifft(spectrum * response[None, :], axis=1))[:, : values.shape[1]]


@dataclass(frozen=True, eq=False)
class ReconstructionGrid:
    """Reconstructed sigma on the cell centers of an n x n grid over the bounding box of X.

    ``values[i, j]`` sits at (axis[i], axis[j]); cells whose center lies outside
    X are zero.
    """

    domain: Domain
    axis: NDArray[np.float64]
    values: NDArray[np.float64]
    window: FilterWindow = FilterWindow.HANN
    cutoff: float = 0.9

    def __post_init__(self):
        if not np.all(np.isfinite(self.values)):
            raise ReconstructionError("Reconstruction contains non-finite values")

    @classmethod
    def cell_centers(cls, domain: Domain, size: int) -> NDArray[np.float64]:
        half = max(domain.semi_axes)
        spacing = 2.0 * half / size
        return -half + spacing * (np.arange(size) + 0.5)

    @property
    def size(self) -> int:
        return len(self.axis)

    @property
    def spacing(self) -> float:
        return float(self.axis[1] - self.axis[0])

    @property
    def points(self) -> NDArray[np.float64]:
        xx, yy = np.meshgrid(self.axis, self.axis, indexing="ij")
        return np.stack([xx, yy], axis=-1)

    @property
    def inside(self) -> NDArray[np.bool_]:
        return self.domain.contains(self.points)

    def evaluator(self) -> SigmaField:
        """Bilinear interpolant usable as a sigma field (zero outside the grid box)."""
        interpolant = RegularGridInterpolator(
            (self.axis, self.axis), self.values, method="linear", bounds_error=False, fill_value=0.0
        )

        def sigma(x: NDArray, v: Optional[NDArray] = None) -> NDArray:
            x = np.asarray(x, dtype=float)
            shape = x.shape[:-1] if v is None else np.broadcast_shapes(x.shape[:-1], np.shape(v)[:-1])
            return np.broadcast_to(interpolant(x.reshape(-1, 2)).reshape(x.shape[:-1]), shape)

        return sigma

    def as_pair(self, pair: CoefficientPair) -> CoefficientPair:
        """``pair`` with its extinction replaced by this reconstruction."""
        return pair.with_sigma(self.evaluator(), name=f"{pair.name or 'pair'}-fbp")

    def phantom_values(self, pair: CoefficientPair) -> NDArray[np.float64]:
        return np.where(self.inside, pair.sigma_at(self.points), 0.0)

    def relative_l2_error(self, pair: CoefficientPair) -> float:
        """||recon - sigma||_2 / ||sigma||_2 over the cells inside X."""
        truth = self.phantom_values(pair)
        norm = float(np.linalg.norm(truth[self.inside]))
        error = float(np.linalg.norm((self.values - truth)[self.inside]))
        if norm == 0.0:
            return error
        return error / norm

    def mean_within(self, radius: float) -> float:
        """Mean value over the cells with |x| <= radius."""
        selected = np.linalg.norm(self.points, axis=-1) <= radius
        return float(np.mean(self.values[selected]))

    def to_rows(self) -> Iterator[dict[str, Any]]:
        for i, j in np.ndindex(*self.values.shape):
            yield {
                "row": i,
                "column": j,
                "x": float(self.axis[i]),
                "y": float(self.axis[j]),
                "value": float(self.values[i, j]),
            }

    def artifact(self, config_hash: str = "", relative_l2_error: Optional[float] = None) -> ReconstructionArtifact:
        return ReconstructionArtifact(
            config_hash=config_hash,
            size=self.size,
            spacing=self.spacing,
            window=self.window.value,
            cutoff=self.cutoff,
            relative_l2_error=relative_l2_error,
        )


def back_project(
    filtered: NDArray[np.float64],
    sinogram: Sinogram,
    points: ArrayLike,
    threads: Optional[int] = None,
) -> NDArray[np.float64]:
    """(pi / n_angles) sum_k q_k(x . n_k), linear interpolation in the offset, zero off the detector."""
    geometry = sinogram.geometry
    points = np.asarray(points, dtype=float)
    normals = geometry.normals
    offsets = geometry.offsets

    def smear(angles: slice) -> NDArray[np.float64]:
        image = np.zeros(points.shape[:-1])
        for k in range(angles.start, angles.stop):
            image += np.interp(points @ normals[k], offsets, filtered[k], left=0.0, right=0.0)
        return image

    partial = ordered_map(smear, chunked(geometry.n_angles, ANGLE_CHUNK), threads)
    return math.pi / geometry.n_angles * np.sum(partial, axis=0)


def reconstruct_sigma(
    sinogram: Sinogram,
    domain: Domain,
    size: int = 128,
    window: FilterWindow | str = FilterWindow.HANN,
    cutoff: float = 0.9,
    threads: Optional[int] = None,
) -> ReconstructionGrid:
    """Filtered back-projection onto an n x n grid, masked to X."""
    if domain.dimension != 2:
        raise ReconstructionError("Filtered back-projection is available in d = 2 only")
    geometry = sinogram.geometry
    if geometry.n_angles < MIN_RECONSTRUCTION_ANGLES:
        raise ReconstructionError(
            f"Insufficient angular coverage: {geometry.n_angles} angles, at least {MIN_RECONSTRUCTION_ANGLES} needed"
        )
    if geometry.radius < max(domain.semi_axes) - 1e-12:
        raise ReconstructionError(
            f"Offsets cover radius {geometry.radius:g}, the domain needs {max(domain.semi_axes):g}"
        )
    if sinogram.flagged.any():
        logger.warning(f"Reconstructing with {int(sinogram.flagged.sum())} flagged samples set to zero")
    values = np.where(sinogram.flagged, 0.0, sinogram.values)

    window = FilterWindow(window)
    filtered = filter_projections(values, geometry.spacing, window, cutoff)
    axis = ReconstructionGrid.cell_centers(domain, size)
    xx, yy = np.meshgrid(axis, axis, indexing="ij")
    points = np.stack([xx, yy], axis=-1)
    image = back_project(filtered, sinogram, points, threads)
    image = np.where(domain.contains(points), image, 0.0)
    logger.info(f"Reconstructed sigma on a {size}x{size} grid ({window.value} window at {cutoff:g} Nyquist)")
    return ReconstructionGrid(domain=domain, axis=axis, values=image, window=window, cutoff=cutoff)


def reconstruct_from_settings(
    sinogram: Sinogram, domain: Domain, settings: InversionSettings, threads: Optional[int] = None
) -> ReconstructionGrid:
    return reconstruct_sigma(
        sinogram, domain, size=settings.grid_size, window=settings.window, cutoff=settings.cutoff, threads=threads
    )
