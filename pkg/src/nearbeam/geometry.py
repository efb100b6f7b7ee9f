"""Uniform linear array geometry, spherical- and planar-wave steering."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

SPEED_OF_LIGHT = 299_792_458.0  # m/s, exact


@dataclass(frozen=True)
class ArrayConfig:
    """Uniform linear array along the x-axis, centered at the origin.

    Element n sits at x = n*d with centered indices
    n in {-(N-1)/2, ..., (N-1)/2} (half-integer steps for even N).
    The array center is the phase reference for all steering vectors.
    Spacing defaults to half a carrier wavelength.
    """

    num_elements: int
    carrier_frequency_hz: float
    element_spacing_m: float | None = None

    def __post_init__(self) -> None:
        if isinstance(self.num_elements, bool) or not isinstance(
            self.num_elements, (int, np.integer)
        ):
            raise ValueError("num_elements must be an integer")
        if self.num_elements < 2:
            raise ValueError("num_elements must be >= 2")
        if not (self.carrier_frequency_hz > 0):
            raise ValueError("carrier_frequency_hz must be > 0")
        if self.element_spacing_m is None:
            object.__setattr__(self, "element_spacing_m", self.wavelength_m / 2.0)
        if not (self.element_spacing_m > 0):
            raise ValueError("element_spacing_m must be > 0")

    @property
    def wavelength_m(self) -> float:
        return SPEED_OF_LIGHT / self.carrier_frequency_hz

    @property
    def wavenumber(self) -> float:
        """Angular wavenumber 2*pi/lambda in rad/m."""
        return 2.0 * np.pi / self.wavelength_m

    @property
    def aperture_m(self) -> float:
        """Physical aperture D = (N-1)*d."""
        return (self.num_elements - 1) * self.element_spacing_m

    def element_indices(self) -> np.ndarray:
        """Centered element indices, symmetric about 0."""
        n = self.num_elements
        return np.arange(n) - (n - 1) / 2.0

    def element_x(self) -> np.ndarray:
        """Element x-coordinates in meters, symmetric about the origin."""
        return self.element_indices() * self.element_spacing_m


@dataclass(frozen=True)
class PolarLocation:
    """Target location in the array's polar frame.

    angle is measured from the positive x-axis (the array line) and must lie
    in the open interval (0, pi): targets strictly in front of the array.
    distance is from the array center, strictly positive.
    """

    angle: float
    distance: float

    def __post_init__(self) -> None:
        if not (0.0 < self.angle < np.pi):
            raise ValueError("angle must lie in the open interval (0, pi)")
        if not (self.distance > 0):
            raise ValueError("distance must be > 0")

    def xy(self) -> np.ndarray:
        """Cartesian position (x, y) in meters."""
        return np.array(
            [self.distance * np.cos(self.angle), self.distance * np.sin(self.angle)]
        )


def element_positions(cfg: ArrayConfig) -> np.ndarray:
    """(N, 2) element coordinates (n*d, 0), centered indexing."""
    xs = cfg.element_x()
    return np.column_stack([xs, np.zeros_like(xs)])


def element_target_distance(
    cfg: ArrayConfig, loc: PolarLocation, n: float | np.ndarray | None = None
) -> float | np.ndarray:
    """Exact Euclidean distance from element(s) n to the target.

    r_n = sqrt(r^2 + (n d)^2 - 2 r n d cos(angle)). With n omitted, returns
    the full length-N vector in element order. n is the centered index
    (may be half-integer for even N).
    """
    idx = cfg.element_indices() if n is None else np.asarray(n, dtype=float)
    xn = idx * cfg.element_spacing_m
    # hypot form of the law of cosines: stable when r >> aperture
    dx = loc.distance * np.cos(loc.angle) - xn
    dy = loc.distance * np.sin(loc.angle)
    out = np.hypot(dx, dy)
    return out if n is None or np.ndim(n) else float(out)


def nearfield_steering(cfg: ArrayConfig, loc: PolarLocation) -> np.ndarray:
    """Spherical-wave steering vector, element n = exp(-j*(2pi/lambda)*(r_n - r)).

    Unit modulus per element; phase reference 0 where r_n = r (array center).
    """
    rn = element_target_distance(cfg, loc)
    return np.exp(-1j * cfg.wavenumber * (rn - loc.distance))


def farfield_steering(cfg: ArrayConfig, angle: float) -> np.ndarray:
    """Planar-wave steering vector, element n = exp(+j*(2pi/lambda)*n*d*cos(angle)).

    First-order expansion of the spherical phase in aperture/range.
    """
    xs = cfg.element_x()
    return np.exp(1j * cfg.wavenumber * xs * np.cos(angle))


def rayleigh_distance(cfg: ArrayConfig) -> float:
    """Near/far boundary 2 D^2 / lambda with aperture D = (N-1) d."""
    d = cfg.aperture_m
    return 2.0 * d * d / cfg.wavelength_m
