"""Analytic predictors: unitary quantum mechanics and finite-speed collapse.

Both backends map a source, Alice's filter (or polarizer), a layout and a
list of interferometer delays to Bob's expected fringe patterns.  Under
unitary evolution Bob's singles depend on the B marginal only.  The
collapse backend, when the collapse front reaches Bob in time, replaces
Bob's singles by a weighted sum of the two Alice-conditioned patterns.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import geometry
from .biphoton import (
    EnergyEntangledSource,
    PolarizationEntangledSource,
    conditional_bob_spectrum,
    marginal_spectrum,
    reduced_polarization_state,
)
from .spectra import FilterProfile, InterferencePattern, fringe_pattern

__all__ = [
    "UNITARY",
    "COLLAPSE",
    "PhysicsModel",
    "Prediction",
    "predict_energy_scheme",
    "predict_coincidence",
    "predict_polarization_scheme",
    "polarization_pattern",
    "unitary_polarization_visibility",
]

UNITARY = "unitary_qm"
COLLAPSE = "finite_speed_collapse"


@dataclass(frozen=True)
class PhysicsModel:
    """Which predictor to use and, for the collapse model, its parameters.

    ``pre_collapse_gamma`` of ``None`` defers to the polarization source's
    own ``coherence_gamma``.
    """

    kind: str = UNITARY
    kappa_model: float = math.inf
    d_tau: float = math.inf
    weighting: str = "equal"
    pre_collapse_gamma: float | None = None

    def __post_init__(self):
        if self.kind not in (UNITARY, COLLAPSE):
            raise ValueError(f"unknown model kind {self.kind!r}")
        if self.weighting not in ("equal", "probability"):
            raise ValueError(f"unknown weighting {self.weighting!r}")
        if not self.kappa_model > 0:
            raise ValueError("kappa_model must be > 0")
        if not self.d_tau >= 0:
            raise ValueError("d_tau must be >= 0")
        g = self.pre_collapse_gamma
        if g is not None and not 0 <= g <= 1:
            raise ValueError("pre_collapse_gamma must lie in [0, 1]")

    @classmethod
    def unitary(cls) -> "PhysicsModel":
        return cls(UNITARY)

    @classmethod
    def collapse(cls, kappa_model: float = math.inf, d_tau: float = math.inf,
                 weighting: str = "equal", pre_collapse_gamma: float | None = None
                 ) -> "PhysicsModel":
        return cls(COLLAPSE, kappa_model, d_tau, weighting, pre_collapse_gamma)

    @property
    def is_unitary(self) -> bool:
        return self.kind == UNITARY

    def collapse_applies(self, layout: geometry.Layout, scheme: str) -> bool:
        if self.is_unitary:
            return False
        return geometry.collapse_arrival_vs_detection(layout, self.kappa_model, self.d_tau,
                                                      scheme)

    def as_dict(self) -> dict:
        if self.is_unitary:
            return {"kind": UNITARY}
        return {
            "kind": COLLAPSE,
            "kappa_model_m_s": "inf" if math.isinf(self.kappa_model) else self.kappa_model,
            "d_tau_m": "inf" if math.isinf(self.d_tau) else self.d_tau,
            "weighting": self.weighting,
            "pre_collapse_gamma": self.pre_collapse_gamma,
        }


@dataclass(frozen=True)
class Prediction:
    singles_bob: InterferencePattern
    coincidence: InterferencePattern | None
    branch_patterns: tuple[InterferencePattern | None, InterferencePattern | None]
    ordering: geometry.OrderingVerdict
    collapse_applies: bool
    transmit_probability: float
    branch_weights: tuple[float, float]
    visibility: float | None = None


def _applies(model, layout, scheme, override):
    if model.is_unitary:
        return False
    return model.collapse_applies(layout, scheme) if override is None else bool(override)


def _mix(patterns, weights, delays) -> InterferencePattern:
    live = [(p, w) for p, w in zip(patterns, weights) if p is not None and w > 0]
    total = sum(w for _, w in live)
    values = sum(w / total * p.values for p, w in live)
    return InterferencePattern(delays, np.clip(values, 0.0, 1.0))


def predict_energy_scheme(model: PhysicsModel, src: EnergyEntangledSource,
                          filt: FilterProfile, layout: geometry.Layout,
                          delays: Sequence[float], coincidence: bool = False,
                          collapse_applies: bool | None = None) -> Prediction:
    """Bob's energy-scheme patterns.

    ``collapse_applies`` overrides the geometric test (collapse model only);
    it is how reference patterns for both outcomes of a scan are produced.
    """
    delays = np.asarray(delays, dtype=float)
    transmitted = conditional_bob_spectrum(src, filt, "transmitted")
    absorbed = conditional_bob_spectrum(src, filt, "absorbed")
    w_t, w_a = transmitted.total_weight, absorbed.total_weight
    p = w_t / (w_t + w_a)
    branches = tuple(None if s.is_empty else fringe_pattern(s, delays)
                     for s in (transmitted, absorbed))

    singles = fringe_pattern(marginal_spectrum(src, "B"), delays)
    applies = _applies(model, layout, "energy", collapse_applies)
    weights = (p, 1.0 - p)
    if applies:
        if model.weighting == "equal":
            weights = (0.5, 0.5)
        # empty branches carry no photons and drop out of the sum
        weights = tuple(0.0 if b is None else w for b, w in zip(branches, weights))
        total = sum(weights)
        weights = (weights[0] / total, weights[1] / total)
        singles = _mix(branches, weights, delays)

    return Prediction(
        singles_bob=singles,
        coincidence=predict_coincidence(src, filt, delays) if coincidence else None,
        branch_patterns=branches,
        ordering=geometry.ordering(layout, "energy"),
        collapse_applies=applies,
        transmit_probability=p,
        branch_weights=weights,
    )


def predict_coincidence(src: EnergyEntangledSource, filt: FilterProfile,
                           delays: Sequence[float]) -> InterferencePattern:
    """Bob's pattern conditioned on Alice's transmission; model independent."""
    return fringe_pattern(conditional_bob_spectrum(src, filt, "transmitted"), delays)


def unitary_polarization_visibility() -> float:
    """Interferometer visibility of Bob's reduced state from the Bell pair."""
    rho_b = reduced_polarization_state()
    return float(2 * abs(rho_b[0, 1]) / np.real(np.trace(rho_b)))


def polarization_pattern(visibility: float, center_omega: float,
                         delays: Sequence[float]) -> InterferencePattern:
    delays = np.asarray(delays, dtype=float)
    return InterferencePattern(delays, 0.5 * (1.0 + visibility * np.cos(center_omega * delays)))


def predict_polarization_scheme(model: PhysicsModel, src: PolarizationEntangledSource,
                                layout: geometry.Layout, delays: Sequence[float],
                                collapse_applies: bool | None = None) -> Prediction:
    verdict = geometry.ordering(layout, "polarization")
    applies = _applies(model, layout, "polarization", collapse_applies)
    if model.is_unitary:
        v = unitary_polarization_visibility()
    elif applies:
        v = 0.0
    else:
        g = model.pre_collapse_gamma
        v = src.coherence_gamma if g is None else g
    flat = polarization_pattern(0.0, src.center_omega, delays)
    return Prediction(
        singles_bob=polarization_pattern(v, src.center_omega, delays),
        coincidence=None,
        branch_patterns=(flat, flat),
        ordering=verdict,
        collapse_applies=applies,
        transmit_probability=0.5,
        branch_weights=(0.5, 0.5),
        visibility=v,
    )
