"""Experiment layout, path ordering and the collapse-speed arithmetic.

The collapse front is modelled as light-speed transit from the source to
Alice's projective element along the optical path, followed by straight
transit at speed ``kappa`` to Bob's detector.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

from .errors import DivisionByZeroTau, MissingField, NegativeTau

__all__ = [
    "SPEED_OF_LIGHT",
    "SIMULTANEITY_TOLERANCE_M",
    "Layout",
    "Verdict",
    "OrderingVerdict",
    "ordering",
    "tau_of_flight",
    "kappa",
    "collapse_arrival_vs_detection",
]

SPEED_OF_LIGHT = 299_792_458.0
SIMULTANEITY_TOLERANCE_M = 1e-9
# relative slack on the arrival-time comparison so exact ties count as arrival
_ARRIVAL_RTOL = 1e-12


@dataclass(frozen=True)
class Layout:
    """Path lengths in metres.

    ``path_s_f`` is used by the energy scheme and ``path_s_ad`` by the
    polarization scheme.  ``dist_f_bd`` is the straight-line distance from
    Alice's projective element to Bob's detector; ``path_f_bd`` optionally
    gives the optical path for the same hop, used when
    ``collapse_transit == "optical"``.
    """

    path_s_bd: float
    dist_f_bd: float
    path_s_f: float | None = None
    path_s_ad: float | None = None
    path_f_bd: float | None = None
    light_speed: float = SPEED_OF_LIGHT
    collapse_transit: str = "spatial"

    def __post_init__(self):
        for name in ("path_s_bd", "dist_f_bd", "path_s_f", "path_s_ad", "path_f_bd"):
            v = getattr(self, name)
            if v is not None and not v >= 0:
                raise ValueError(f"{name} must be >= 0")
        if not self.light_speed > 0:
            raise ValueError("light_speed must be > 0")
        if self.collapse_transit not in ("spatial", "optical"):
            raise ValueError("collapse_transit must be 'spatial' or 'optical'")
        alice = self.path_s_f if self.path_s_f is not None else self.path_s_ad
        if alice is not None and self.dist_f_bd > alice + self.path_s_bd + 1e-12:
            raise ValueError("dist_f_bd exceeds the sum of the two source paths")
        if self.collapse_transit == "optical" and self.path_f_bd is None:
            raise ValueError("optical collapse transit needs path_f_bd")

    def alice_path(self, scheme: str) -> float:
        if scheme == "energy":
            value, name = self.path_s_f, "path_s_f"
        elif scheme == "polarization":
            value, name = self.path_s_ad, "path_s_ad"
        else:
            raise ValueError(f"unknown scheme {scheme!r}")
        if value is None:
            raise MissingField(f"layout has no {name} for the {scheme} scheme")
        return value

    @property
    def transit_distance(self) -> float:
        return self.dist_f_bd if self.collapse_transit == "spatial" else self.path_f_bd

    def with_alice_path(self, scheme: str, value: float) -> "Layout":
        from dataclasses import replace
        key = "path_s_f" if scheme == "energy" else "path_s_ad"
        return replace(self, **{key: value})


class Verdict(str, Enum):
    ALICE_AFTER_BOB = "alice_after_bob"
    ALICE_BEFORE_BOB = "alice_before_bob"
    SIMULTANEOUS = "simultaneous"


@dataclass(frozen=True)
class OrderingVerdict:
    scheme: str
    verdict: Verdict


def _compare(alice: float, bob: float) -> Verdict:
    if abs(alice - bob) <= SIMULTANEITY_TOLERANCE_M:
        return Verdict.SIMULTANEOUS
    return Verdict.ALICE_BEFORE_BOB if alice < bob else Verdict.ALICE_AFTER_BOB


def ordering(layout: Layout, scheme: str) -> OrderingVerdict:
    return OrderingVerdict(scheme, _compare(layout.alice_path(scheme), layout.path_s_bd))


def tau_of_flight(path_s_bd: float, threshold_s_f: float, light_speed: float) -> float:
    """Collapse time of flight from the threshold source-filter distance."""
    if threshold_s_f < 0:
        raise ValueError("threshold must be >= 0")
    if path_s_bd < threshold_s_f:
        raise NegativeTau(
            f"threshold {threshold_s_f} m exceeds the source-detector path {path_s_bd} m")
    return (path_s_bd - threshold_s_f) / light_speed


def kappa(dist_f_bd: float, tau: float) -> float:
    if not tau > 0:
        raise DivisionByZeroTau("kappa needs a strictly positive time of flight")
    return dist_f_bd / tau


def collapse_arrival_vs_detection(layout: Layout, kappa_model: float, d_tau: float,
                                  scheme: str = "energy") -> bool:
    """True when Alice's collapse front reaches Bob's detector in time.

    Arrival exactly at the detection time counts as arriving.
    """
    if not kappa_model > 0:
        raise ValueError("kappa_model must be > 0")
    if d_tau < 0:
        raise ValueError("d_tau must be >= 0")
    alice = layout.alice_path(scheme)
    if alice > d_tau:
        return False
    # compare in metres of light travel to avoid dividing by c twice
    front = alice + (0.0 if math.isinf(kappa_model)
                     else layout.transit_distance * layout.light_speed / kappa_model)
    return front <= layout.path_s_bd * (1 + _ARRIVAL_RTOL) + _ARRIVAL_RTOL
