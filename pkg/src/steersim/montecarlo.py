"""Event-level simulation of the steering experiments.

Work is split into units (one per delay slot and per chunk of pairs), each
drawing from its own counter-based stream.  Units are merged in a fixed
order and sorted by timestamp, so the output does not depend on how many
threads evaluated them.

Per pair the simulation resolves Alice's outcome from her photon's
frequency (energy scheme) or her polarizer (polarization scheme), then
picks the branch pattern that governs Bob's photon.  Under unitary
evolution Bob follows Alice's branch, which reproduces both the unitary
singles and the conditioned coincidence pattern.  When a collapse model
applies with non-probability weights, Bob's branch is reassigned with the
smallest coupling that keeps Alice's marginal intact while giving Bob's
branches the model's weights.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np

from . import geometry
from .biphoton import EnergyEntangledSource, PolarizationEntangledSource, sample_pairs
from .errors import ConfigInvalid, IncompatibleScheme, NoHeralds
from .models import PhysicsModel, predict_energy_scheme, predict_polarization_scheme
from .rng import stream
from .spectra import FilterProfile, InterferencePattern, constant_filter

__all__ = [
    "OUTCOMES",
    "RunConfig",
    "EventRecord",
    "EventLog",
    "Coincidences",
    "simulate",
    "coincidence_pairs",
    "herald_gate",
    "bin_pattern",
    "signal_to_noise",
    "expected_rate_pattern",
]

WINGS = ("A", "B")
OUTCOMES = (
    "detected_port_plus",
    "detected_port_minus",
    "alice_transmitted",
    "alice_absorbed",
    "herald",
)
BRANCHES = ("transmitted", "absorbed")
PLUS, MINUS, A_TRANSMITTED, A_ABSORBED, HERALD = range(5)
NO_PAIR = -1
NO_BRANCH = -1

CHUNK = 1 << 18

# stream-id tags
_COUNTS, _PAIRS, _DARK = 0, 1, 2


@dataclass(frozen=True)
class RunConfig:
    delay_schedule: tuple[tuple[float, float], ...]
    mode: str = "cw"
    pair_rate: float = 0.0
    pairs_per_pulse: float = 0.0
    pulse_rate: float = 0.0
    duration: float | None = None
    detector_efficiency_a: float = 1.0
    detector_efficiency_b: float = 1.0
    dark_rate_a: float = 0.0
    dark_rate_b: float = 0.0
    timing_jitter_sigma: float = 0.0
    coincidence_window: float | None = None
    herald_gate_width: float | None = None
    seed: int = 0

    def __post_init__(self):
        sched = tuple((float(d), float(w)) for d, w in self.delay_schedule)
        object.__setattr__(self, "delay_schedule", sched)
        self.validate()

    def validate(self) -> None:
        if self.mode not in ("cw", "pulsed"):
            raise ConfigInvalid(f"mode must be 'cw' or 'pulsed', got {self.mode!r}")
        if not self.delay_schedule:
            raise ConfigInvalid("delay_schedule is empty")
        if any(not w > 0 for _, w in self.delay_schedule):
            raise ConfigInvalid("dwell times must be > 0")
        for name in ("pair_rate", "pairs_per_pulse", "pulse_rate", "dark_rate_a",
                     "dark_rate_b", "timing_jitter_sigma"):
            if not getattr(self, name) >= 0:
                raise ConfigInvalid(f"{name} must be >= 0")
        for name in ("detector_efficiency_a", "detector_efficiency_b"):
            if not 0 <= getattr(self, name) <= 1:
                raise ConfigInvalid(f"{name} must lie in [0, 1]")
        if self.coincidence_window is not None and not self.coincidence_window > 0:
            raise ConfigInvalid("coincidence_window must be > 0")
        if self.mode == "pulsed" and not self.pulse_rate > 0:
            raise ConfigInvalid("pulsed mode needs pulse_rate > 0")
        if self.duration is not None and self.duration < self.total_dwell * (1 - 1e-12):
            raise ConfigInvalid("duration is shorter than the delay schedule")
        if not 0 <= self.seed < 2 ** 64:
            raise ConfigInvalid("seed must be a 64-bit unsigned integer")

    @property
    def total_dwell(self) -> float:
        return float(sum(w for _, w in self.delay_schedule))

    @property
    def run_duration(self) -> float:
        return self.total_dwell if self.duration is None else self.duration

    @property
    def slot_edges(self) -> np.ndarray:
        return np.concatenate([[0.0], np.cumsum([w for _, w in self.delay_schedule])])

    def mean_pairs(self, dwell: float) -> float:
        if self.mode == "cw":
            return self.pair_rate * dwell
        return self.pairs_per_pulse * _pulses_in(dwell, self.pulse_rate)


def _pulses_in(dwell: float, pulse_rate: float) -> int:
    return int(math.floor(dwell * pulse_rate + 1e-9))


@dataclass(frozen=True)
class EventRecord:
    pair_id: int | None
    wing: str
    timestamp: float
    outcome: str
    hidden_branch: str | None = None


@dataclass(frozen=True, eq=False)
class EventLog:
    """Time-ordered, columnar record store.

    ``hidden_branch`` is a simulation diagnostic; analysis code only uses
    the observable columns.
    """

    pair_id: np.ndarray
    wing: np.ndarray
    timestamp: np.ndarray
    outcome: np.ndarray
    hidden_branch: np.ndarray
    config_echo: RunConfig | None = None
    model_echo: PhysicsModel | None = None
    scheme: str | None = None
    meta: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.timestamp)

    def record(self, i: int) -> EventRecord:
        pid = int(self.pair_id[i])
        hb = int(self.hidden_branch[i])
        return EventRecord(None if pid == NO_PAIR else pid, WINGS[self.wing[i]],
                           float(self.timestamp[i]), OUTCOMES[self.outcome[i]],
                           None if hb == NO_BRANCH else BRANCHES[hb])

    @property
    def records(self) -> Iterator[EventRecord]:
        return (self.record(i) for i in range(len(self)))

    def select(self, mask: np.ndarray) -> "EventLog":
        return EventLog(self.pair_id[mask], self.wing[mask], self.timestamp[mask],
                        self.outcome[mask], self.hidden_branch[mask], self.config_echo,
                        self.model_echo, self.scheme, dict(self.meta))

    def bob_detections(self) -> np.ndarray:
        return (self.wing == 1) & (self.outcome <= MINUS)

    def alice_detections(self) -> np.ndarray:
        return self.wing == 0

    def heralds(self) -> np.ndarray:
        return self.outcome == HERALD

    def same_records(self, other: "EventLog") -> bool:
        return all(np.array_equal(getattr(self, c), getattr(other, c))
                   for c in ("pair_id", "wing", "timestamp", "outcome", "hidden_branch"))


def _concat(parts: list[dict]) -> dict:
    keys = ("pair_id", "wing", "timestamp", "outcome", "hidden_branch")
    dtypes = (np.int64, np.uint8, np.float64, np.uint8, np.int8)
    return {k: np.concatenate([p[k] for p in parts]).astype(dt, copy=False) if parts
            else np.empty(0, dt) for k, dt in zip(keys, dtypes)}


def _block(pair_id, wing, t, outcome, hidden) -> dict:
    n = len(t)
    return {
        "pair_id": np.broadcast_to(np.asarray(pair_id, np.int64), (n,)),
        "wing": np.full(n, wing, np.uint8),
        "timestamp": np.asarray(t, np.float64),
        "outcome": np.broadcast_to(np.asarray(outcome, np.uint8), (n,)),
        "hidden_branch": np.broadcast_to(np.asarray(hidden, np.int8), (n,)),
    }


@dataclass(frozen=True)
class _Plan:
    """Everything a work unit needs, fixed before any randomness is drawn."""

    scheme: str
    run: RunConfig
    src: object
    filt: FilterProfile | None
    alice_path: float
    bob_path: float
    light_speed: float
    plus_prob: np.ndarray        # (2 branches, n_slots)
    transmit_p: float
    bob_weight_t: float
    starts: np.ndarray
    counts: np.ndarray           # pairs (cw) or pulses (pulsed) per slot
    pair_offsets: np.ndarray


def _branch_probabilities(scheme, model, src, filt, layout, delays):
    """Bob's bright-port probability per hidden branch and slot, plus branch weights."""
    uniq, inv = np.unique(delays, return_inverse=True)
    if scheme == "energy":
        pred = predict_energy_scheme(model, src, filt, layout, uniq)
        table = np.array([
            np.zeros_like(uniq) if b is None else b.values for b in pred.branch_patterns
        ])
        p = pred.transmit_probability
        w_t = pred.branch_weights[0] if pred.collapse_applies else p
    else:
        pred = predict_polarization_scheme(model, src, layout, uniq)
        table = np.array([pred.singles_bob.values, pred.singles_bob.values])
        p = w_t = 0.5
    return table[:, inv], p, w_t, pred


def _plan(scheme, model, src, filt, layout, run):
    if scheme == "energy":
        if not isinstance(src, EnergyEntangledSource):
            raise IncompatibleScheme("energy scheme needs an EnergyEntangledSource")
        if filt is None:
            filt = constant_filter(1.0, src.grid)
    elif scheme == "polarization":
        if not isinstance(src, PolarizationEntangledSource):
            raise IncompatibleScheme("polarization scheme needs a PolarizationEntangledSource")
        if filt is not None:
            raise IncompatibleScheme("polarization scheme takes no spectral filter")
    else:
        raise IncompatibleScheme(f"unknown scheme {scheme!r}")

    delays = np.array([d for d, _ in run.delay_schedule])
    dwell = np.array([w for _, w in run.delay_schedule])
    table, p, w_t, pred = _branch_probabilities(scheme, model, src, filt, layout, delays)
    if run.mode == "cw":
        counts = np.array([stream(run.seed, _COUNTS, k).poisson(run.pair_rate * w)
                           for k, w in enumerate(dwell)], dtype=np.int64)
    else:
        counts = np.array([_pulses_in(w, run.pulse_rate) for w in dwell], dtype=np.int64)
    plan = _Plan(scheme, run, src, filt, layout.alice_path(scheme), layout.path_s_bd,
                 layout.light_speed, table, p, w_t, run.slot_edges[:-1], counts,
                 np.concatenate([[0], np.cumsum(counts)[:-1]]))
    return plan, pred


def _pair_unit(plan: _Plan, k: int, c: int) -> list[dict]:
    """Pairs ``[c * CHUNK, (c + 1) * CHUNK)`` of slot ``k`` (pulses, in pulsed mode)."""
    run = plan.run
    rng = stream(run.seed, _PAIRS, k, c)
    lo = c * CHUNK
    n_units = int(min(CHUNK, plan.counts[k] - lo))
    dwell = run.delay_schedule[k][1]
    out = []
    if run.mode == "cw":
        bob_t = plan.starts[k] + rng.uniform(0.0, dwell, n_units)
        ids = plan.pair_offsets[k] + lo + np.arange(n_units)
    else:
        period = 1.0 / run.pulse_rate
        pulse_idx = lo + np.arange(n_units)
        herald_t = plan.starts[k] + (pulse_idx + 0.5) * period
        out.append(_block(NO_PAIR, 1, herald_t, HERALD, NO_BRANCH))
        per_pulse = rng.poisson(run.pairs_per_pulse, n_units)
        bob_t = np.repeat(herald_t, per_pulse)
        # pulsed pair ids: pulse index in the run, times a bound on pairs per pulse
        within = np.arange(bob_t.size) - np.repeat(np.cumsum(per_pulse) - per_pulse, per_pulse)
        ids = (plan.pair_offsets[k] + np.repeat(pulse_idx, per_pulse)) * 1024 + within
    n = bob_t.size
    emission = bob_t - plan.bob_path / plan.light_speed

    if plan.scheme == "energy":
        omega_a, _ = sample_pairs(plan.src, rng, n)
        alice_t = rng.uniform(size=n) < plan.filt.at(omega_a)
    else:
        alice_t = rng.uniform(size=n) >= 0.5
    alice_branch = np.where(alice_t, 0, 1).astype(np.int8)

    u = rng.uniform(size=n)
    p, w_t = plan.transmit_p, plan.bob_weight_t
    bob_branch = alice_branch.copy()
    if w_t > p:
        bob_branch[(~alice_t) & (u < (w_t - p) / (1.0 - p))] = 0
    elif w_t < p:
        bob_branch[alice_t & (u < (p - w_t) / p)] = 1

    jitter = run.timing_jitter_sigma
    bob_seen = rng.uniform(size=n) < run.detector_efficiency_b
    plus = rng.uniform(size=n) < plan.plus_prob[bob_branch, k]
    bob_ts = bob_t + (rng.normal(0.0, jitter, n) if jitter > 0 else 0.0)
    if plan.scheme == "energy":
        alice_clicks = alice_t
        alice_outcome = A_TRANSMITTED
    else:
        alice_clicks = ~alice_t
        alice_outcome = A_ABSORBED
    alice_seen = alice_clicks & (rng.uniform(size=n) < run.detector_efficiency_a)
    alice_ts = emission + plan.alice_path / plan.light_speed
    alice_ts = alice_ts + (rng.normal(0.0, jitter, n) if jitter > 0 else 0.0)

    hidden = bob_branch if plan.scheme == "energy" else alice_branch
    out.append(_block(ids[bob_seen], 1, bob_ts[bob_seen],
                      np.where(plus[bob_seen], PLUS, MINUS), hidden[bob_seen]))
    out.append(_block(ids[alice_seen], 0, alice_ts[alice_seen], alice_outcome,
                      alice_branch[alice_seen]))
    return out


def _dark_unit(plan: _Plan, k: int) -> list[dict]:
    run = plan.run
    rng = stream(run.seed, _DARK, k)
    start, dwell = plan.starts[k], run.delay_schedule[k][1]
    alice_outcome = A_TRANSMITTED if plan.scheme == "energy" else A_ABSORBED
    out = []
    for wing, rate, outcome in ((0, run.dark_rate_a, alice_outcome),
                                (1, run.dark_rate_b, PLUS), (1, run.dark_rate_b, MINUS)):
        n = rng.poisson(rate * dwell)
        out.append(_block(NO_PAIR, wing, start + rng.uniform(0.0, dwell, n), outcome,
                          NO_BRANCH))
    return out


def _units(plan: _Plan):
    for k in range(len(plan.counts)):
        n_chunks = max(1, -(-int(plan.counts[k]) // CHUNK))
        for c in range(n_chunks):
            yield ("pairs", k, c)
        yield ("dark", k, 0)


def _run_unit(plan, unit):
    kind, k, c = unit
    return _pair_unit(plan, k, c) if kind == "pairs" else _dark_unit(plan, k)


def simulate(scheme: str, model: PhysicsModel, src, filt: FilterProfile | None,
             layout: geometry.Layout, run: RunConfig, threads: int = 1,
             batches: int | None = None) -> EventLog:
    """Simulate one run through the delay schedule.

    ``batches`` groups the work units into that many contiguous batches
    evaluated independently and merged in batch order; the result is the
    same for any grouping and any number of threads.  Whether the collapse
    front reaches Bob is fixed by the layout, so it is resolved once per run.
    """
    plan, pred = _plan(scheme, model, src, filt, layout, run)
    units = list(_units(plan))
    if batches is None:
        batches = 1 if threads <= 1 else 4 * threads
    size = -(-len(units) // max(1, batches))
    groups = [units[i:i + size] for i in range(0, len(units), size)]

    def run_group(group):
        return [blk for u in group for blk in _run_unit(plan, u)]

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = [blk for g in pool.map(run_group, groups) for blk in g]
    else:
        parts = [blk for g in groups for blk in run_group(g)]

    cols = _concat(parts)
    t = cols["timestamp"]
    keep = (t >= 0.0) & (t <= run.run_duration)
    order = np.argsort(t[keep], kind="stable")
    cols = {k: v[keep][order] for k, v in cols.items()}
    meta = {
        "collapse_applies": pred.collapse_applies,
        "ordering": pred.ordering.verdict.value,
        "transmit_probability": pred.transmit_probability,
        "bob_minus_alice_s": (plan.bob_path - plan.alice_path) / plan.light_speed,
    }
    return EventLog(**cols, config_echo=run, model_echo=model, scheme=scheme, meta=meta)


class Coincidences:
    """Matched (A, B) detections, held as index arrays into ``log``."""

    def __init__(self, log: EventLog, a_idx: np.ndarray, b_idx: np.ndarray):
        self.log = log
        self.a_idx = np.asarray(a_idx, dtype=np.int64)
        self.b_idx = np.asarray(b_idx, dtype=np.int64)

    def __len__(self) -> int:
        return len(self.b_idx)

    def __iter__(self):
        for a, b in zip(self.a_idx, self.b_idx):
            yield self.log.record(int(a)), self.log.record(int(b))


def coincidence_pairs(log: EventLog, window: float, offset: float = 0.0,
                      mode: str = "nearest") -> Coincidences:
    """Match Bob detections to Alice detections within ``+-window/2``.

    ``offset`` is the expected Bob-minus-Alice arrival difference (a delay
    line on Alice's channel).  ``mode="nearest"`` pairs greedily in Bob's
    time order with the nearest unused Alice record; ``mode="all"`` counts
    every A-B combination inside the window.
    """
    a_idx = np.flatnonzero(log.alice_detections())
    b_idx = np.flatnonzero(log.bob_detections())
    ta = log.timestamp[a_idx] + offset
    order = np.argsort(ta, kind="stable")
    a_idx, ta = a_idx[order], ta[order]
    tb = log.timestamp[b_idx]
    half = 0.5 * window
    lo = np.searchsorted(ta, tb - half, "left")
    hi = np.searchsorted(ta, tb + half, "right")
    n_cand = hi - lo

    if mode == "all":
        reps = n_cand
        bi = np.repeat(b_idx, reps)
        starts = np.repeat(lo, reps)
        ai = starts + (np.arange(reps.sum()) - np.repeat(np.cumsum(reps) - reps, reps))
        return Coincidences(log, a_idx[ai], bi)
    if mode != "nearest":
        raise ValueError(f"unknown pairing mode {mode!r}")

    # candidates claimed by exactly one B with exactly one option pair directly
    cover = np.zeros(len(ta) + 1, dtype=np.int64)
    has = n_cand > 0
    np.add.at(cover, lo[has], 1)
    np.add.at(cover, hi[has], -1)
    cover = np.cumsum(cover)[:-1]
    simple = (n_cand == 1)
    simple[simple] = cover[lo[simple]] == 1

    pairs_a = list(lo[simple])
    pairs_b = list(np.flatnonzero(simple))
    used = np.zeros(len(ta), dtype=bool)
    for j in np.flatnonzero(has & ~simple):
        best, best_d = -1, math.inf
        for i in range(lo[j], hi[j]):
            if not used[i]:
                d = abs(ta[i] - tb[j])
                if d < best_d:
                    best, best_d = i, d
        if best >= 0:
            used[best] = True
            pairs_a.append(best)
            pairs_b.append(j)
    pa = np.asarray(pairs_a, dtype=np.int64)
    pb = np.asarray(pairs_b, dtype=np.int64)
    order = np.argsort(pb, kind="stable")
    return Coincidences(log, a_idx[pa[order]], b_idx[pb[order]])


def herald_gate(log: EventLog, gate_width: float) -> EventLog:
    """Keep Bob detections strictly within ``gate_width/2`` of a herald."""
    h = log.timestamp[log.heralds()]
    if h.size == 0:
        raise NoHeralds("log contains no herald records")
    bob = log.bob_detections()
    t = log.timestamp[bob]
    pos = np.searchsorted(h, t)
    left = np.abs(t - h[np.clip(pos - 1, 0, h.size - 1)])
    right = np.abs(h[np.clip(pos, 0, h.size - 1)] - t)
    inside = np.minimum(left, right) < 0.5 * gate_width
    keep = ~bob
    keep[np.flatnonzero(bob)[inside]] = True
    gated = log.select(keep)
    gated.meta["herald_gate_width_s"] = gate_width
    return gated


def bin_pattern(source, delay_schedule: Sequence[tuple[float, float]],
                outcome: str = "detected_port_plus") -> InterferencePattern:
    """Counts per delay setting divided by dwell; Poisson errors.

    ``source`` is an :class:`EventLog` (Bob's detections) or
    :class:`Coincidences` (Bob's side of each pair).  Bins with no counts are
    flagged.  Repeated delays in the schedule are pooled.
    """
    if isinstance(source, Coincidences):
        log, idx = source.log, source.b_idx
    else:
        log, idx = source, np.flatnonzero(source.bob_detections())
    code = OUTCOMES.index(outcome)
    idx = idx[log.outcome[idx] == code]
    delays = np.array([d for d, _ in delay_schedule], dtype=float)
    dwell = np.array([w for _, w in delay_schedule], dtype=float)
    edges = np.concatenate([[0.0], np.cumsum(dwell)])
    slot = np.searchsorted(edges, log.timestamp[idx], "right") - 1
    slot = slot[(slot >= 0) & (slot < len(dwell))]
    counts = np.bincount(slot, minlength=len(dwell)).astype(float)
    uniq, inv = np.unique(delays, return_inverse=True)
    c = np.bincount(inv, weights=counts, minlength=len(uniq))
    w = np.bincount(inv, weights=dwell, minlength=len(uniq))
    return InterferencePattern(uniq, c / w, np.sqrt(c) / w, flagged=(c == 0))


def signal_to_noise(log: EventLog) -> dict:
    """Signal (paired) versus background (dark) counts among Bob's detections."""
    bob = log.bob_detections()
    signal = int(np.count_nonzero(bob & (log.pair_id != NO_PAIR)))
    noise = int(np.count_nonzero(bob & (log.pair_id == NO_PAIR)))
    return {"signal": signal, "background": noise,
            "snr": signal / noise if noise else math.inf}


def expected_rate_pattern(probability: InterferencePattern, run: RunConfig
                          ) -> InterferencePattern:
    """Bright-port rate implied by a probability pattern under ``run``."""
    if run.mode == "cw":
        pair_rate = run.pair_rate
    else:
        pair_rate = run.pairs_per_pulse * run.pulse_rate
    return probability.scaled(pair_rate * run.detector_efficiency_b, run.dark_rate_b)
