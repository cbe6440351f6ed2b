"""Statistics on fringe patterns: visibility, pattern comparison, the
threshold scan with its collapse-speed bound, and sample-size planning."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import optimize, stats

from . import geometry
from .errors import DivisionByZeroTau, GridMismatch, NonMonotoneScan, TooFewPoints
from .spectra import InterferencePattern

__all__ = [
    "VisibilityEstimate",
    "Comparison",
    "ScanPoint",
    "ThresholdScanResult",
    "RequiredSamples",
    "BEYOND_RANGE",
    "UNATTAINABLE",
    "estimate_visibility",
    "compare_patterns",
    "classify",
    "threshold_scan",
    "required_samples",
]

BEYOND_RANGE = "threshold beyond scan range"
UNATTAINABLE = "unattainable"
_MAX_CONDITION = 1e8


@dataclass(frozen=True)
class VisibilityEstimate:
    v: float
    sigma_v: float
    method: str
    clamped: bool = False
    fallback: bool = False
    degenerate: bool = False
    phase: float = 0.0


def _minmax(p: InterferencePattern, fallback: bool) -> VisibilityEstimate:
    i_max, i_min = int(np.argmax(p.values)), int(np.argmin(p.values))
    hi, lo = p.values[i_max], p.values[i_min]
    if hi + lo == 0:
        return VisibilityEstimate(0.0, 0.0, "minmax", fallback=fallback, degenerate=True)
    v = (hi - lo) / (hi + lo)
    # dV/dhi = 2 lo / (hi + lo)^2, dV/dlo = -2 hi / (hi + lo)^2
    s = 2.0 * math.hypot(lo * p.errors[i_max], hi * p.errors[i_min]) / (hi + lo) ** 2
    return VisibilityEstimate(float(min(max(v, 0.0), 1.0)), float(s), "minmax",
                              clamped=not 0 <= v <= 1, fallback=fallback)


def estimate_visibility(p: InterferencePattern, center_freq: float,
                        method: str = "cosine_fit") -> VisibilityEstimate:
    """Fringe visibility with the fringe frequency held at ``center_freq``.

    The cosine fit is linear least squares of ``a + b cos(wt) + c sin(wt)``,
    weighted by the pattern errors when present; ``v = hypot(b, c) / a``.
    """
    if method not in ("cosine_fit", "minmax"):
        raise ValueError(f"unknown method {method!r}")
    n = len(p)
    if n < 2:
        raise TooFewPoints("need at least two delay points")

    values, errors = p.values, p.errors
    if np.ptp(values) == 0:
        mean = float(values[0])
        s = float(np.sqrt(np.mean(errors ** 2)) / mean) if mean > 0 else 0.0
        return VisibilityEstimate(0.0, s, method, degenerate=True)
    if method == "minmax":
        return _minmax(p, fallback=False)
    if n < 5:
        raise TooFewPoints("cosine fit needs at least five delay points")

    period = 2 * math.pi / center_freq
    phase = center_freq * p.delays
    design = np.column_stack([np.ones(n), np.cos(phase), np.sin(phase)])
    weighted = np.any(errors > 0)
    if weighted:
        floor = errors[errors > 0].min()
        w = 1.0 / np.where(errors > 0, errors, floor)
    else:
        w = np.ones(n)
    a_w = design * w[:, None]
    if (np.ptp(p.delays) < period * (1 - 1e-9)
            or np.linalg.cond(a_w) > _MAX_CONDITION):
        return _minmax(p, fallback=True)

    coef, *_ = np.linalg.lstsq(a_w, values * w, rcond=None)
    a, b, c = coef
    cov = np.linalg.inv(a_w.T @ a_w)
    if not weighted:
        resid = values - design @ coef
        cov = cov * (resid @ resid) / max(n - 3, 1)
    r = math.hypot(b, c)
    v_raw = r / a if a > 0 else 0.0
    if r > 0 and a > 0:
        grad = np.array([-r / a ** 2, b / (r * a), c / (r * a)])
    else:
        grad = np.array([0.0, 1.0 / a, 0.0]) if a > 0 else np.zeros(3)
    sigma = float(np.sqrt(max(grad @ cov @ grad, 0.0)))
    clamped = not 0.0 <= v_raw <= 1.0
    return VisibilityEstimate(float(min(max(v_raw, 0.0), 1.0)), sigma, "cosine_fit",
                              clamped=clamped, phase=float(math.atan2(-c, b)))


@dataclass(frozen=True)
class Comparison:
    chi2: float
    dof: int
    p_value: float
    excluded: int = 0


def _same_delays(p1: InterferencePattern, p2: InterferencePattern) -> None:
    if len(p1) != len(p2) or not np.allclose(p1.delays, p2.delays, rtol=1e-12, atol=0):
        raise GridMismatch("patterns are sampled at different delays")


def compare_patterns(p1: InterferencePattern, p2: InterferencePattern) -> Comparison:
    """Pearson chi-square of the per-delay differences over combined errors."""
    _same_delays(p1, p2)
    var = p1.errors ** 2 + p2.errors ** 2
    ok = var > 0
    if not ok.any():
        raise ValueError("neither pattern carries errors")
    chi2 = float(np.sum((p1.values[ok] - p2.values[ok]) ** 2 / var[ok]))
    dof = int(ok.sum())
    return Comparison(chi2, dof, float(stats.chi2.sf(chi2, dof)), int((~ok).sum()))


@dataclass(frozen=True)
class ScanPoint:
    path_s_f: float
    decision: str
    p_value: float
    p_unitary: float = 1.0
    p_collapsed: float = 1.0
    statistic: float = 0.0


def classify(data: InterferencePattern, reference_unitary: InterferencePattern,
             reference_collapsed: InterferencePattern, alpha: float
             ) -> tuple[str, float, float, float]:
    """Likelihood-ratio preference between two fully specified references.

    With Gaussian errors taken from the data, ``L = chi2_u - chi2_c`` is normal
    with mean ``-D`` under the unitary reference and ``+D`` under the collapsed
    one, variance ``4 D``, where ``D`` is the separation of the references in
    error units.  A reference is rejected when its one-sided tail probability
    falls below ``alpha``.  Returns ``(decision, p_value, p_unitary,
    p_collapsed)``.
    """
    _same_delays(data, reference_unitary)
    _same_delays(data, reference_collapsed)
    ok = data.errors > 0
    s = data.errors[ok]
    x, u, c = data.values[ok], reference_unitary.values[ok], reference_collapsed.values[ok]
    sep = float(np.sum(((c - u) / s) ** 2))
    if sep == 0:
        return "inconclusive", 1.0, 1.0, 1.0
    lr = float(np.sum(((x - u) / s) ** 2 - ((x - c) / s) ** 2))
    scale = 2.0 * math.sqrt(sep)
    p_u = float(stats.norm.sf((lr + sep) / scale))
    p_c = float(stats.norm.cdf((lr - sep) / scale))
    reject_u, reject_c = p_u < alpha, p_c < alpha
    if reject_u and not reject_c:
        return "collapsed", p_u, p_u, p_c
    if reject_c and not reject_u:
        return "unitary", p_c, p_u, p_c
    return "inconclusive", max(p_u, p_c), p_u, p_c


@dataclass(frozen=True)
class ThresholdScanResult:
    """Outcome of a scan over Alice's source distance.

    ``tau`` and ``kappa_lower_bound`` are evaluated at the lower edge of the
    threshold interval (the furthest point where collapse was still seen),
    which gives the largest time of flight consistent with the data and so
    a lower bound on the collapse speed.
    """

    scan_points: list[ScanPoint]
    verdict: str
    threshold_estimate: float | None = None
    threshold_half_width: float | None = None
    threshold_lower: float | None = None
    threshold_upper: float | None = None
    tau: float | None = None
    kappa_lower_bound: float | None = None
    notes: list[str] = field(default_factory=list)

    def as_dict(self) -> dict:
        return {
            "verdict": self.verdict,
            "threshold_estimate_m": self.threshold_estimate,
            "threshold_half_width_m": self.threshold_half_width,
            "threshold_lower_m": self.threshold_lower,
            "threshold_upper_m": self.threshold_upper,
            "tau_s": self.tau,
            "kappa_lower_bound_m_s": self.kappa_lower_bound,
            "notes": list(self.notes),
            "scan_points": [
                {"path_s_f_m": sp.path_s_f, "decision": sp.decision,
                 "p_value": sp.p_value, "p_unitary": sp.p_unitary,
                 "p_collapsed": sp.p_collapsed}
                for sp in self.scan_points
            ],
        }


def _bound(layout: geometry.Layout, edge: float, notes: list[str]):
    tau = geometry.tau_of_flight(layout.path_s_bd, edge, layout.light_speed)
    try:
        return tau, geometry.kappa(layout.transit_distance, tau)
    except DivisionByZeroTau:
        notes.append("collapse seen at the detector distance itself; kappa unbounded")
        return tau, None


def threshold_scan(results: Sequence[tuple[float, InterferencePattern]],
                   reference_unitary: InterferencePattern,
                   reference_collapsed: InterferencePattern, alpha: float,
                   layout: geometry.Layout) -> ThresholdScanResult:
    """Classify each scan point and locate the collapse threshold.

    Raises :class:`NonMonotoneScan` when a unitary-classified point precedes
    a collapsed-classified one.
    """
    paths = [float(r[0]) for r in results]
    if not paths:
        raise ValueError("empty scan")
    if any(b <= a for a, b in zip(paths, paths[1:])):
        raise ValueError("scan points must be sorted by path_s_f")
    points = []
    for path, pattern in results:
        decision, p, p_u, p_c = classify(pattern, reference_unitary, reference_collapsed, alpha)
        points.append(ScanPoint(float(path), decision, p, p_u, p_c))

    collapsed = [sp.path_s_f for sp in points if sp.decision == "collapsed"]
    unitary = [sp.path_s_f for sp in points if sp.decision == "unitary"]
    if collapsed and unitary and min(unitary) < max(collapsed):
        raise NonMonotoneScan(
            f"unitary decision at {min(unitary)} m precedes collapsed decision at "
            f"{max(collapsed)} m", points)

    notes: list[str] = []
    if not collapsed and not unitary:
        return ThresholdScanResult(points, "inconclusive", notes=["no decisive scan point"])
    if not collapsed:
        notes.append("no collapse seen; threshold below the scan range, no kappa bound")
        return ThresholdScanResult(points, BEYOND_RANGE, threshold_upper=unitary[0],
                                   notes=notes)
    last_c = collapsed[-1]
    tau, kap = _bound(layout, last_c, notes)
    if not unitary:
        notes.append("collapse seen over the whole scan; one-sided kappa bound")
        return ThresholdScanResult(points, BEYOND_RANGE, threshold_lower=last_c,
                                   tau=tau, kappa_lower_bound=kap, notes=notes)
    first_u = unitary[0]
    return ThresholdScanResult(
        points, "threshold found",
        threshold_estimate=0.5 * (last_c + first_u),
        threshold_half_width=0.5 * (first_u - last_c),
        threshold_lower=last_c, threshold_upper=first_u,
        tau=tau, kappa_lower_bound=kap, notes=notes)


@dataclass(frozen=True)
class RequiredSamples:
    """Events per delay point needed to tell two probability patterns apart.

    ``n`` is the string ``"unattainable"`` when the patterns coincide.
    """

    n: int | str
    n_exact: float
    noncentrality_per_event: float
    dof: int
    alpha: float
    power: float

    @property
    def attainable(self) -> bool:
        return self.n != UNATTAINABLE


def noncentrality_target(dof: int, alpha: float, power: float) -> float:
    crit = stats.chi2.ppf(1 - alpha, dof)
    f = lambda lam: stats.ncx2.sf(crit, dof, lam) - power  # noqa: E731
    hi = 1.0
    while f(hi) < 0:
        hi *= 2
    return float(optimize.brentq(f, 1e-9, hi, xtol=1e-10, rtol=1e-12))


def required_samples(p_unitary: InterferencePattern, p_collapsed: InterferencePattern,
                     alpha: float, power: float) -> RequiredSamples:
    """Smallest N with the Pearson test against the unitary pattern reaching ``power``.

    With N events per delay the bright-port counts are Poisson with mean
    ``N P``; the Pearson statistic against the unitary expectation is then
    approximately noncentral chi-square with ``lambda = N sum (Pc - Pu)^2 / Pu``.
    """
    _same_delays(p_unitary, p_collapsed)
    if not (0 < alpha < 1 and 0 < power < 1):
        raise ValueError("alpha and power must lie in (0, 1)")
    pu, pc = p_unitary.values, p_collapsed.values
    ok = pu > 0
    dof = int(ok.sum())
    lam1 = float(np.sum((pc[ok] - pu[ok]) ** 2 / pu[ok]))
    if lam1 == 0 or dof == 0:
        return RequiredSamples(UNATTAINABLE, math.inf, lam1, dof, alpha, power)
    n_exact = noncentrality_target(dof, alpha, power) / lam1
    return RequiredSamples(int(math.ceil(n_exact)), n_exact, lam1, dof, alpha, power)
