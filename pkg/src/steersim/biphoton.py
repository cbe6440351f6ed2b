"""Two-photon sources.

The energy-entangled source is a Gaussian joint spectral intensity

    J(wa, wb) ~ exp(-(wa + wb - wp)^2 / 2 sp^2) * exp(-(wa - wb - d0)^2 / 8 spm^2)

with ``d0 = 2 ws - wp``.  For a CW pump (``sp = 0``) the first factor
becomes ``delta(wa + wb - wp)`` and each wing is Gaussian with width
``spm``; a finite pump broadens the marginals to ``sqrt(spm^2 + sp^2/4)``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import GridMismatch, UnsupportedSource
from .spectra import (
    FilterProfile,
    FrequencyGrid,
    Spectrum,
    check_resolution,
    gaussian_spectrum,
)

__all__ = [
    "EnergyEntangledSource",
    "PolarizationEntangledSource",
    "PairSample",
    "marginal_spectrum",
    "conditional_bob_spectrum",
    "joint_density",
    "sample_pair",
    "sample_pairs",
    "bell_state_density",
    "reduced_polarization_state",
]


@dataclass(frozen=True)
class EnergyEntangledSource:
    pump_center: float
    pump_bandwidth_sigma: float
    signal_center: float
    phase_matching_sigma: float
    grid: FrequencyGrid

    def __post_init__(self):
        if self.pump_bandwidth_sigma < 0:
            raise ValueError("pump_bandwidth_sigma must be >= 0")
        if self.phase_matching_sigma <= 0:
            raise ValueError("phase_matching_sigma must be > 0")

    @property
    def is_cw(self) -> bool:
        return self.pump_bandwidth_sigma == 0

    @property
    def idler_center(self) -> float:
        """Mean frequency of the B photon."""
        return self.pump_center - self.signal_center

    @property
    def marginal_sigma(self) -> float:
        return float(np.hypot(self.phase_matching_sigma, 0.5 * self.pump_bandwidth_sigma))

    def center(self, wing: str) -> float:
        return self.signal_center if _wing(wing) == "A" else self.idler_center


@dataclass(frozen=True)
class PolarizationEntangledSource:
    """Polarization pair; ``center_omega`` sets Bob's fringe frequency."""

    center_omega: float
    coherence_gamma: float = 1.0

    def __post_init__(self):
        if not 0 <= self.coherence_gamma <= 1:
            raise ValueError("coherence_gamma must lie in [0, 1]")
        if self.center_omega <= 0:
            raise ValueError("center_omega must be positive")


@dataclass(frozen=True)
class PairSample:
    omega_a: float
    omega_b: float
    emission_time: float = 0.0


def _wing(wing: str) -> str:
    w = str(wing).upper()
    if w not in ("A", "B"):
        raise ValueError(f"wing must be 'A' or 'B', got {wing!r}")
    return w


def marginal_spectrum(src: EnergyEntangledSource, wing: str) -> Spectrum:
    """Single-wing spectrum normalized to unit total weight."""
    return gaussian_spectrum(src.center(wing), src.marginal_sigma, src.grid).normalized()


def joint_density(src: EnergyEntangledSource, omega_a, omega_b) -> np.ndarray:
    """Joint spectral intensity (unnormalized) for a finite-bandwidth pump."""
    if src.is_cw:
        raise UnsupportedSource("joint density of a CW pump is singular")
    wa = np.asarray(omega_a, dtype=float)
    wb = np.asarray(omega_b, dtype=float)
    d0 = 2 * src.signal_center - src.pump_center
    ssum = (wa + wb - src.pump_center) / src.pump_bandwidth_sigma
    sdiff = (wa - wb - d0) / (2 * src.phase_matching_sigma)
    return np.exp(-0.5 * (ssum ** 2 + sdiff ** 2))


def conditional_bob_spectrum(src: EnergyEntangledSource, alice_filter: FilterProfile,
                             branch: str, experimental: bool = False) -> Spectrum:
    """B-photon spectrum restricted to one of Alice's filter outcomes.

    Rate form: the transmitted and absorbed branches add up to the
    normalized B marginal, and each branch's weight is its probability.
    """
    if branch not in ("transmitted", "absorbed"):
        raise ValueError(f"unknown branch {branch!r}")
    if not alice_filter.grid.same_as(src.grid):
        raise GridMismatch("filter and source are defined on different grids")
    if not src.is_cw:
        if not experimental:
            raise UnsupportedSource(
                "closed-form conditional spectra require a CW pump; "
                "pass experimental=True for the numeric path")
        return _conditional_numeric(src, alice_filter, branch)
    s_b = marginal_spectrum(src, "B")
    t = alice_filter.mirrored(src.pump_center)
    if branch == "transmitted":
        return Spectrum(src.grid, s_b.density * t)
    return Spectrum(src.grid, s_b.density - s_b.density * t)


def _conditional_numeric(src, alice_filter, branch):
    warnings.warn("finite-pump conditional spectrum uses the experimental 2-D path",
                  stacklevel=3)
    g = src.grid
    w, wt = g.omega, g.weights
    t = alice_filter.transmission if branch == "transmitted" else 1.0 - alice_filter.transmission
    num = np.empty(g.n_points)
    total = 0.0
    step = max(1, 2_000_000 // g.n_points)
    for i in range(0, g.n_points, step):
        jd = joint_density(src, w[None, :], w[i:i + step, None])  # rows: omega_b
        num[i:i + step] = jd @ (wt * t)
        total += float((jd @ wt) @ wt[i:i + step])
    return Spectrum(g, num / total)


def sample_pairs(src: EnergyEntangledSource, rng: np.random.Generator, n: int
                 ) -> tuple[np.ndarray, np.ndarray]:
    """Draw ``n`` frequency pairs; returns ``(omega_a, omega_b)`` arrays."""
    if src.is_cw:
        wa = rng.normal(src.signal_center, src.phase_matching_sigma, n)
        return wa, src.pump_center - wa
    s = rng.normal(src.pump_center, src.pump_bandwidth_sigma, n)
    d = rng.normal(2 * src.signal_center - src.pump_center, 2 * src.phase_matching_sigma, n)
    return 0.5 * (s + d), 0.5 * (s - d)


def sample_pair(src: EnergyEntangledSource, rng: np.random.Generator,
                emission_time: float = 0.0) -> PairSample:
    wa, wb = sample_pairs(src, rng, 1)
    return PairSample(float(wa[0]), float(wb[0]), emission_time)


def bell_state_density() -> np.ndarray:
    """|Phi+><Phi+| in the basis HH, HV, VH, VV."""
    psi = np.array([1.0, 0.0, 0.0, 1.0]) / np.sqrt(2.0)
    return np.outer(psi, psi.conj())


def reduced_polarization_state(rho: np.ndarray | None = None) -> np.ndarray:
    """Bob's 2x2 polarization state, tracing out Alice."""
    if rho is None:
        rho = bell_state_density()
    return np.trace(rho.reshape(2, 2, 2, 2), axis1=0, axis2=2)


def grid_for(src_center: float, sigma: float, half_width_sigmas: float = 8.0,
             min_feature_width: float | None = None) -> FrequencyGrid:
    """Convenience grid centred on ``src_center`` that resolves ``min_feature_width``."""
    feature = sigma if min_feature_width is None else min(sigma, min_feature_width)
    g = FrequencyGrid.around(src_center, half_width_sigmas * sigma, feature)
    check_resolution(g, feature)
    return g
