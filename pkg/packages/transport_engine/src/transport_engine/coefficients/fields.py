"""Evaluable optical parameters (sigma, k).

Fields broadcast over leading axes: positions and directions carry the
coordinate on the last axis, results drop it.
"""

import math
from dataclasses import dataclass, replace
from typing import Callable, Optional

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy import special

from core.models import (
    ConstantSigma,
    GaussianSigma,
    HenyeyGreensteinKappa,
    IsotropicKappa,
    LinearKappa,
    PhantomSpec,
)
from transport_engine.errors import NumericalGuardError
from transport_engine.geometry import SphereRule

SigmaField = Callable[[NDArray[np.float64], Optional[NDArray[np.float64]]], NDArray[np.float64]]
KappaField = Callable[[NDArray[np.float64], NDArray[np.float64], NDArray[np.float64]], NDArray[np.float64]]
XRayField = Callable[[NDArray[np.float64], NDArray[np.float64], NDArray[np.float64], NDArray[np.float64]], NDArray]


def _leading(*arrays: NDArray) -> tuple[int, ...]:
    return np.broadcast_shapes(*(a.shape[:-1] for a in arrays))


def constant_sigma(value: float) -> SigmaField:
    def sigma(x: NDArray, v: Optional[NDArray] = None) -> NDArray:
        shape = _leading(x) if v is None else _leading(x, v)
        return np.full(shape, value)

    return sigma


def gaussian_sigma(spec: GaussianSigma) -> SigmaField:
    centers = np.array([bump.center for bump in spec.bumps], dtype=float)
    amplitudes = np.array([bump.amplitude for bump in spec.bumps], dtype=float)
    widths = np.array([bump.width for bump in spec.bumps], dtype=float)

    def sigma(x: NDArray, v: Optional[NDArray] = None) -> NDArray:
        x = np.asarray(x, dtype=float)
        value = np.full(x.shape[:-1], spec.background)
        for center, amplitude, width in zip(centers, amplitudes, widths):
            offset = x - center
            value = value + amplitude * np.exp(-np.sum(offset * offset, axis=-1) / (2.0 * width**2))
        if v is not None:
            value = np.broadcast_to(value, _leading(x, np.asarray(v)))
        return value

    return sigma


def gaussian_xray(spec: GaussianSigma) -> XRayField:
    """Closed form of the integral of a Gaussian-bump sigma along x + s v, s in [s0, s1]."""

    def xray(x: NDArray, v: NDArray, s0: NDArray, s1: NDArray) -> NDArray:
        x = np.asarray(x, dtype=float)
        v = np.asarray(v, dtype=float)
        s0 = np.asarray(s0, dtype=float)
        s1 = np.asarray(s1, dtype=float)
        total = spec.background * (s1 - s0)
        for bump in spec.bumps:
            offset = x - np.asarray(bump.center)
            along = np.sum(offset * v, axis=-1)
            across = np.sum(offset * offset, axis=-1) - along**2
            scale = math.sqrt(2.0) * bump.width
            total = total + (
                bump.amplitude
                * np.exp(-np.maximum(across, 0.0) / (2.0 * bump.width**2))
                * bump.width
                * math.sqrt(math.pi / 2.0)
                * (special.erf((s1 + along) / scale) - special.erf((s0 + along) / scale))
            )
        return total

    return xray


def constant_xray(value: float) -> XRayField:
    def xray(x: NDArray, v: NDArray, s0: NDArray, s1: NDArray) -> NDArray:
        return value * (np.asarray(s1, dtype=float) - np.asarray(s0, dtype=float))

    return xray


def isotropic_kappa(value: float) -> KappaField:
    def kappa(x: NDArray, v_in: NDArray, v_out: NDArray) -> NDArray:
        return np.full(_leading(np.asarray(x), np.asarray(v_in), np.asarray(v_out)), value)

    return kappa


def henyey_greenstein_kappa(scale: float, asymmetry: float) -> KappaField:
    g = asymmetry

    def kappa(x: NDArray, v_in: NDArray, v_out: NDArray) -> NDArray:
        cosine = np.sum(np.asarray(v_in) * np.asarray(v_out), axis=-1)
        value = scale * (1.0 - g * g) / (1.0 + g * g - 2.0 * g * cosine)
        return np.broadcast_to(value, _leading(np.asarray(x), np.asarray(v_in), np.asarray(v_out)))

    return kappa


def linear_kappa(isotropic: float, linear: float) -> KappaField:
    def kappa(x: NDArray, v_in: NDArray, v_out: NDArray) -> NDArray:
        cosine = np.sum(np.asarray(v_in) * np.asarray(v_out), axis=-1)
        value = isotropic + linear * cosine
        return np.broadcast_to(value, _leading(np.asarray(x), np.asarray(v_in), np.asarray(v_out)))

    return kappa


@dataclass(frozen=True, eq=False)
class CoefficientPair:
    """Optical parameters: extinction sigma(x, v) and scattering kernel k(x, v', v).

    ``xray`` is the closed-form line integral of sigma when the phantom has
    one; it serves as oracle and never replaces the quadrature of
    ``line_integral_sigma``.
    """

    sigma: SigmaField
    kappa: KappaField
    dimension: int = 2
    name: str = ""
    sigma_isotropic: bool = True
    kappa_bounded: bool = True
    kappa_vanishes: bool = False
    sigma_constant: Optional[float] = None
    xray: Optional[XRayField] = None
    spec: Optional[PhantomSpec] = None

    @classmethod
    def from_spec(cls, spec: PhantomSpec) -> "CoefficientPair":
        if isinstance(spec.sigma, ConstantSigma):
            sigma, xray, level = constant_sigma(spec.sigma.value), constant_xray(spec.sigma.value), spec.sigma.value
        elif isinstance(spec.sigma, GaussianSigma):
            sigma, xray, level = gaussian_sigma(spec.sigma), gaussian_xray(spec.sigma), None
            if not spec.sigma.bumps:
                level = spec.sigma.background
        else:
            raise ValueError(f"Unsupported sigma family: {type(spec.sigma).__name__}")

        kappa_spec = spec.kappa
        if isinstance(kappa_spec, IsotropicKappa):
            kappa, vanishes = isotropic_kappa(kappa_spec.value), kappa_spec.value == 0.0
        elif isinstance(kappa_spec, HenyeyGreensteinKappa):
            kappa = henyey_greenstein_kappa(kappa_spec.scale, kappa_spec.asymmetry)
            vanishes = kappa_spec.scale == 0.0
        elif isinstance(kappa_spec, LinearKappa):
            kappa = linear_kappa(kappa_spec.isotropic, kappa_spec.linear)
            vanishes = kappa_spec.isotropic == 0.0 and kappa_spec.linear == 0.0
        else:
            raise ValueError(f"Unsupported kappa family: {type(kappa_spec).__name__}")

        return cls(
            sigma=sigma,
            kappa=kappa,
            dimension=spec.dimension,
            name=spec.name,
            kappa_vanishes=vanishes,
            sigma_constant=level,
            xray=xray,
            spec=spec,
        )

    def with_sigma(self, sigma: SigmaField, name: Optional[str] = None) -> "CoefficientPair":
        """Same kernel, another extinction field (e.g. a reconstruction)."""
        return replace(self, sigma=sigma, name=name or self.name, sigma_constant=None, xray=None, spec=None)

    def sigma_at(self, x: ArrayLike, v: Optional[ArrayLike] = None) -> NDArray[np.float64]:
        x = np.asarray(x, dtype=float)
        if self.sigma_isotropic or v is None:
            return np.asarray(self.sigma(x, None), dtype=float)
        return np.asarray(self.sigma(x, np.asarray(v, dtype=float)), dtype=float)

    def kappa_at(self, x: ArrayLike, v_in: ArrayLike, v_out: ArrayLike) -> NDArray[np.float64]:
        if self.kappa_vanishes:
            return np.zeros(_leading(np.asarray(x), np.asarray(v_in), np.asarray(v_out)))
        return np.asarray(self.kappa(np.asarray(x, float), np.asarray(v_in, float), np.asarray(v_out, float)))


def sigma_p(pair: CoefficientPair, x: ArrayLike, v_in: ArrayLike, angle_nodes: int = 256) -> NDArray[np.float64]:
    """sigma_p(x, v') = integral of k(x, v', v) over outgoing directions v."""
    sphere = SphereRule.build(pair.dimension, angle_nodes)
    x = np.asarray(x, dtype=float)
    v_in = np.asarray(v_in, dtype=float)
    samples = pair.kappa_at(x[..., None, :], v_in[..., None, :], sphere.directions)
    if not np.all(np.isfinite(samples)):
        raise NumericalGuardError(f"Non-finite scattering kernel samples for {pair.name or 'pair'}")
    return samples @ sphere.weights
