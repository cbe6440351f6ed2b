"""Frequency-domain primitives: grids, spectra, filters and interferograms.

All integrals are trapezoidal on a uniform angular-frequency grid.  A
spectrum turns into a Michelson fringe pattern through its normalized
Fourier transform ``mu(t) = int s(w) exp(-i w t) dw / int s(w) dw``;
the detection probability at the bright port is ``(1 + Re mu) / 2``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np

from .errors import (
    AliasingRisk,
    EmptySpectrum,
    GridMismatch,
    GridTooCoarse,
    OutOfRange,
)

__all__ = [
    "POINTS_PER_SIGMA",
    "FrequencyGrid",
    "Spectrum",
    "FilterProfile",
    "InterferencePattern",
    "gaussian_spectrum",
    "rectangular_spectrum",
    "gaussian_bandpass",
    "rectangular_filter",
    "step_filter",
    "constant_filter",
    "apply_filter",
    "transmit_probability",
    "coherence",
    "fringe_rate",
    "fringe_pattern",
]

POINTS_PER_SIGMA = 16
_SUPPORT_SIGMAS = 5.0


@dataclass(frozen=True)
class FrequencyGrid:
    """Uniform grid of angular frequencies (rad/s).

    ``min_feature_width`` declares the narrowest Gaussian width that will be
    placed on the grid; construction fails if the spacing cannot resolve it.
    """

    omega_min: float
    omega_max: float
    n_points: int
    min_feature_width: float | None = None

    def __post_init__(self):
        if not self.omega_min < self.omega_max:
            raise ValueError("omega_min must be below omega_max")
        if int(self.n_points) != self.n_points or self.n_points < 2:
            raise ValueError("n_points must be an integer >= 2")
        if self.min_feature_width is not None:
            check_resolution(self, self.min_feature_width)

    @property
    def spacing(self) -> float:
        return (self.omega_max - self.omega_min) / (self.n_points - 1)

    @property
    def center(self) -> float:
        return 0.5 * (self.omega_min + self.omega_max)

    @cached_property
    def omega(self) -> np.ndarray:
        w = np.linspace(self.omega_min, self.omega_max, self.n_points)
        w.flags.writeable = False
        return w

    @cached_property
    def weights(self) -> np.ndarray:
        """Trapezoidal quadrature weights."""
        w = np.full(self.n_points, self.spacing)
        w[0] = w[-1] = 0.5 * self.spacing
        w.flags.writeable = False
        return w

    def same_as(self, other: "FrequencyGrid") -> bool:
        return (self.omega_min, self.omega_max, self.n_points) == (
            other.omega_min,
            other.omega_max,
            other.n_points,
        )

    @classmethod
    def around(cls, center: float, half_width: float, min_feature_width: float,
               points_per_sigma: int = POINTS_PER_SIGMA) -> "FrequencyGrid":
        """Smallest odd-sized grid centred on ``center`` resolving the feature width."""
        n_half = int(np.ceil(half_width / (min_feature_width / points_per_sigma)))
        return cls(center - half_width, center + half_width, 2 * n_half + 1,
                   min_feature_width)


def check_resolution(grid: FrequencyGrid, sigma: float) -> None:
    # a hair of slack so grids built exactly at the limit are accepted
    if grid.spacing > sigma / POINTS_PER_SIGMA * (1 + 1e-12):
        raise GridTooCoarse(
            f"grid spacing {grid.spacing:.6g} rad/s resolves width {sigma:.6g} rad/s "
            f"with fewer than {POINTS_PER_SIGMA} points per sigma"
        )


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.flags.writeable = False
    return a


@dataclass(frozen=True, eq=False)
class Spectrum:
    grid: FrequencyGrid
    density: np.ndarray

    def __post_init__(self):
        d = _frozen(self.density)
        if d.shape != (self.grid.n_points,):
            raise ValueError("density must have one value per grid point")
        if not np.all(np.isfinite(d)) or np.any(d < 0):
            raise ValueError("density must be finite and non-negative")
        object.__setattr__(self, "density", d)

    @property
    def total_weight(self) -> float:
        return float(self.grid.weights @ self.density)

    @property
    def is_empty(self) -> bool:
        return self.total_weight == 0.0

    def mean(self) -> float:
        w = self.grid.weights * self.density
        return float(w @ self.grid.omega / w.sum())

    def width(self) -> float:
        """RMS width about the mean."""
        w = self.grid.weights * self.density
        m = w @ self.grid.omega / w.sum()
        return float(np.sqrt(w @ (self.grid.omega - m) ** 2 / w.sum()))

    def normalized(self) -> "Spectrum":
        tw = self.total_weight
        if tw == 0.0:
            raise EmptySpectrum("cannot normalize an empty spectrum")
        return Spectrum(self.grid, self.density / tw)

    def scaled(self, factor: float) -> "Spectrum":
        return Spectrum(self.grid, self.density * factor)

    def __add__(self, other: "Spectrum") -> "Spectrum":
        _require_same_grid(self.grid, other.grid)
        return Spectrum(self.grid, self.density + other.density)

    @classmethod
    def empty(cls, grid: FrequencyGrid) -> "Spectrum":
        return cls(grid, np.zeros(grid.n_points))


@dataclass(frozen=True, eq=False)
class FilterProfile:
    grid: FrequencyGrid
    transmission: np.ndarray

    def __post_init__(self):
        t = _frozen(self.transmission)
        if t.shape != (self.grid.n_points,):
            raise ValueError("transmission must have one value per grid point")
        if np.any(t < 0) or np.any(t > 1) or not np.all(np.isfinite(t)):
            raise ValueError("transmission must lie in [0, 1]")
        object.__setattr__(self, "transmission", t)

    def at(self, omega) -> np.ndarray:
        """Transmission at arbitrary frequencies (linear interpolation, 0 off-grid)."""
        return np.interp(omega, self.grid.omega, self.transmission, left=0.0, right=0.0)

    def mirrored(self, pivot: float) -> np.ndarray:
        """Transmission evaluated at ``pivot - omega`` for every grid frequency.

        Exact (array reversal) when the grid is symmetric about ``pivot / 2``.
        """
        g = self.grid
        if abs(g.omega_min + g.omega_max - pivot) <= 1e-9 * g.spacing:
            return self.transmission[::-1].copy()
        return self.at(pivot - g.omega)


@dataclass(frozen=True, eq=False)
class InterferencePattern:
    """Fringe data versus interferometer delay.

    ``flagged`` marks bins with no counts (value and error both zero).
    """

    delays: np.ndarray
    values: np.ndarray
    errors: np.ndarray | None = None
    flagged: np.ndarray | None = field(default=None)

    def __post_init__(self):
        d = _frozen(np.atleast_1d(self.delays))
        v = _frozen(np.atleast_1d(self.values))
        e = _frozen(np.zeros_like(v) if self.errors is None else np.atleast_1d(self.errors))
        f = np.zeros(v.shape, bool) if self.flagged is None else np.array(self.flagged, bool)
        f.flags.writeable = False
        if not (d.shape == v.shape == e.shape == f.shape) or d.ndim != 1:
            raise ValueError("delays, values and errors must be 1-D and equally long")
        if np.any(np.diff(d) <= 0):
            raise ValueError("delays must be strictly increasing")
        if np.any(v < 0) or np.any(e < 0):
            raise ValueError("values and errors must be non-negative")
        object.__setattr__(self, "delays", d)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "errors", e)
        object.__setattr__(self, "flagged", f)

    def __len__(self) -> int:
        return len(self.delays)

    def scaled(self, factor: float, offset: float = 0.0) -> "InterferencePattern":
        return InterferencePattern(self.delays, self.values * factor + offset,
                                   self.errors * abs(factor), self.flagged)


def _require_same_grid(a: FrequencyGrid, b: FrequencyGrid) -> None:
    if not a.same_as(b):
        raise GridMismatch("spectrum and filter are defined on different grids")


def _check_support(center: float, half_width: float, grid: FrequencyGrid) -> None:
    slack = 1e-9 * grid.spacing
    if center - half_width < grid.omega_min - slack or center + half_width > grid.omega_max + slack:
        raise OutOfRange(
            f"support [{center - half_width:.6g}, {center + half_width:.6g}] rad/s "
            f"exceeds grid [{grid.omega_min:.6g}, {grid.omega_max:.6g}]"
        )


def _gaussian(omega, center, sigma):
    return np.exp(-0.5 * ((omega - center) / sigma) ** 2)


def gaussian_spectrum(center: float, width_sigma: float, grid: FrequencyGrid,
                      peak: float = 1.0) -> Spectrum:
    if width_sigma <= 0:
        raise ValueError("width_sigma must be positive")
    check_resolution(grid, width_sigma)
    _check_support(center, _SUPPORT_SIGMAS * width_sigma, grid)
    return Spectrum(grid, peak * _gaussian(grid.omega, center, width_sigma))


def rectangular_spectrum(center: float, full_width: float, grid: FrequencyGrid) -> Spectrum:
    _check_support(center, 0.5 * full_width, grid)
    return Spectrum(grid, _box(grid, center - 0.5 * full_width, center + 0.5 * full_width))


def _box(grid: FrequencyGrid, low: float, high: float) -> np.ndarray:
    # nodes on an edge get half weight, as for step_filter; the trapezoid
    # sum then integrates the box to second order in the spacing
    tol = 1e-9 * grid.spacing
    w = grid.omega
    box = ((w > low + tol) & (w < high - tol)).astype(float)
    box[(np.abs(w - low) <= tol) | (np.abs(w - high) <= tol)] = 0.5
    return box


def gaussian_bandpass(center: float, width_sigma: float, grid: FrequencyGrid,
                      peak: float = 1.0) -> FilterProfile:
    """Gaussian transmission curve; no support check (tails may leave the grid)."""
    if width_sigma <= 0:
        raise ValueError("width_sigma must be positive")
    if not 0 <= peak <= 1:
        raise ValueError("peak transmission must lie in [0, 1]")
    check_resolution(grid, width_sigma)
    return FilterProfile(grid, peak * _gaussian(grid.omega, center, width_sigma))


def rectangular_filter(low: float, high: float, grid: FrequencyGrid,
                       value: float = 1.0) -> FilterProfile:
    if not low < high:
        raise ValueError("low edge must be below high edge")
    return FilterProfile(grid, value * _box(grid, low, high))


def step_filter(edge: float, grid: FrequencyGrid, pass_above: bool = True) -> FilterProfile:
    """Half-line filter; a grid node sitting exactly on the edge transmits 1/2."""
    w = grid.omega
    on_edge = np.abs(w - edge) <= 1e-9 * grid.spacing
    t = np.where(w > edge, 1.0, 0.0) if pass_above else np.where(w < edge, 1.0, 0.0)
    t[on_edge] = 0.5
    return FilterProfile(grid, t)


def constant_filter(value: float, grid: FrequencyGrid) -> FilterProfile:
    return FilterProfile(grid, np.full(grid.n_points, float(value)))


def apply_filter(s: Spectrum, f: FilterProfile) -> tuple[Spectrum, Spectrum]:
    """Split ``s`` into the parts transmitted and absorbed by ``f``."""
    _require_same_grid(s.grid, f.grid)
    transmitted = s.density * f.transmission
    return Spectrum(s.grid, transmitted), Spectrum(s.grid, s.density - transmitted)


def transmit_probability(s: Spectrum, f: FilterProfile) -> float:
    _require_same_grid(s.grid, f.grid)
    total = s.total_weight
    if total == 0.0:
        raise EmptySpectrum("transmit probability of an empty spectrum")
    p = float(s.grid.weights @ (s.density * f.transmission)) / total
    return min(max(p, 0.0), 1.0)


def _raw_transform(s: Spectrum, delays: np.ndarray) -> np.ndarray:
    """Un-normalized trapezoidal transform ``int s(w) exp(-i w t) dw``."""
    g = s.grid
    if delays.size and np.max(np.abs(delays)) * g.spacing > np.pi:
        raise AliasingRisk(
            f"delay {np.max(np.abs(delays)):.6g} s rotates the phase by more than pi "
            f"between grid points (spacing {g.spacing:.6g} rad/s)"
        )
    ws = g.weights * s.density
    # factor out the grid centre so the oscillating kernel stays small
    ref = g.center
    out = np.empty(delays.shape, dtype=complex)
    step = max(1, 4_000_000 // g.n_points)
    for i in range(0, delays.size, step):
        t = delays[i:i + step]
        kernel = np.exp(-1j * np.outer(t, g.omega - ref))
        out[i:i + step] = (kernel @ ws) * np.exp(-1j * ref * t)
    return out


def coherence(s: Spectrum, delays: Sequence[float]) -> np.ndarray:
    """Complex degree of first-order coherence at each delay."""
    total = s.total_weight
    if total == 0.0:
        raise EmptySpectrum("coherence of an empty spectrum")
    return _raw_transform(s, np.asarray(delays, dtype=float)) / total


def fringe_rate(s: Spectrum, delays: Sequence[float]) -> np.ndarray:
    """Bright-port rate ``(W + Re int s exp(-i w t)) / 2``; linear in ``s``."""
    t = np.asarray(delays, dtype=float)
    return 0.5 * (s.total_weight + _raw_transform(s, t).real)


def fringe_pattern(s: Spectrum, delays: Sequence[float], form: str = "probability"
                   ) -> InterferencePattern:
    t = np.asarray(delays, dtype=float)
    if form == "probability":
        mu = coherence(s, t)
        # at zero delay the trapezoid sum reproduces the weight exactly
        values = np.clip(0.5 * (1.0 + mu.real), 0.0, 1.0)
        values[t == 0.0] = 1.0
    elif form == "rate":
        if s.is_empty:
            raise EmptySpectrum("fringe pattern of an empty spectrum")
        values = np.maximum(fringe_rate(s, t), 0.0)
    else:
        raise ValueError(f"unknown pattern form {form!r}")
    return InterferencePattern(t, values)
