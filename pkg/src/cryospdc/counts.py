"""Time-tag coincidence counting and photon-pair source metrics.

Channel convention used by the simulator and CLI: 1 = signal (first splitter
output when a splitter is present), 2 = idler (herald), 3 = second signal
splitter output.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations as _combinations
from typing import Iterable, Sequence

import numpy as np

SIGNAL, IDLER, SIGNAL2 = 1, 2, 3
# one-sided 68.27 % Poisson upper limit on the mean for zero observed counts
ZERO_COUNT_UPPER = -math.log(1.0 - 0.6827)


class TagDataError(ValueError):
    pass


class UndefinedMetricError(ValueError):
    pass


@dataclass(frozen=True)
class TagStream:
    channel: int
    timestamps: np.ndarray
    tick_resolution: float
    duration: float
    origin: int = 0

    def __post_init__(self):
        ts = np.asarray(self.timestamps, dtype=np.int64)
        if ts.ndim != 1:
            raise ValueError("timestamps must be 1-D")
        if not self.tick_resolution > 0:
            raise ValueError("tick_resolution must be positive")
        if not self.duration >= 0:
            raise ValueError("duration must be non-negative")
        bad = np.nonzero(np.diff(ts) < 0)[0]
        if bad.size:
            raise TagDataError(f"channel {self.channel}: timestamps not sorted at index {int(bad[0]) + 1}")
        ts.flags.writeable = False
        object.__setattr__(self, "timestamps", ts)

    @property
    def counts(self) -> int:
        return int(self.timestamps.size)

    def shifted(self, ticks: int) -> "TagStream":
        return TagStream(self.channel, self.timestamps + ticks, self.tick_resolution, self.duration, self.origin + ticks)


@dataclass(frozen=True)
class Measurement:
    """A rate or metric with its standard error.

    ``upper_limit`` marks values derived from zero counts, where ``error`` is a
    one-sided 68 % upper bound rather than a symmetric error bar.
    """

    value: float
    error: float
    upper_limit: bool = False

    def __iter__(self):
        return iter((self.value, self.error))


@dataclass(frozen=True)
class CoincidenceStats:
    duration: float
    window: float
    singles: dict[int, int]
    coincidences: dict[tuple[int, ...], int]

    def _count(self, channels: int | tuple[int, ...]) -> int:
        if isinstance(channels, int):
            return self.singles[channels]
        key = tuple(sorted(channels))
        if key not in self.coincidences:
            raise KeyError(f"coincidence {key} was not counted")
        return self.coincidences[key]

    def count(self, channels: int | tuple[int, ...]) -> int:
        return self._count(channels)

    def rate(self, channels: int | tuple[int, ...]) -> Measurement:
        n = self._count(channels)
        if n == 0:
            return Measurement(0.0, ZERO_COUNT_UPPER / self.duration, upper_limit=True)
        return Measurement(n / self.duration, math.sqrt(n) / self.duration)


# --- coincidence matching ---------------------------------------------------


def _match(anchor: np.ndarray, others: Sequence[np.ndarray], window: int) -> int:
    """Greedy earliest-first one-to-one matching.

    Anchor tags are taken in time order; for each other channel in turn the
    earliest unused tag within ``window`` of every tag chosen so far is picked.
    A tuple is counted (and its tags consumed) only if every channel supplies
    one.
    """
    used = [[False] * o.size for o in others]
    start = [0] * len(others)
    lists = [o.tolist() for o in others]
    count = 0
    for a in anchor.tolist():
        chosen = [a]
        picks = []
        for c, tags in enumerate(lists):
            p = start[c]
            n = len(tags)
            while p < n and tags[p] < a - window:
                p += 1
            start[c] = p
            hit = -1
            while p < n and tags[p] <= a + window:
                t = tags[p]
                if not used[c][p] and all(abs(t - x) <= window for x in chosen):
                    hit = p
                    break
                p += 1
            if hit < 0:
                break
            picks.append(hit)
            chosen.append(lists[c][hit])
        else:
            for c, p in enumerate(picks):
                used[c][p] = True
            count += 1
    return count


def _common_timebase(streams: Sequence[TagStream]) -> tuple[float, float]:
    ticks = {s.tick_resolution for s in streams}
    durations = {s.duration for s in streams}
    if len(ticks) != 1:
        raise ValueError("all streams must share one tick resolution")
    if len(durations) != 1:
        raise ValueError("all streams must share one acquisition duration")
    return ticks.pop(), durations.pop()


def count_coincidences(
    streams: Sequence[TagStream],
    window: float,
    combinations: Iterable[tuple[int, ...]] | None = None,
) -> CoincidenceStats:
    """Singles and coincidence counts for the requested channel tuples.

    Tags coincide when all pairwise time differences are <= ``window`` [s].
    Defaults to every pair of channels.
    """
    if len(streams) < 2:
        raise ValueError("need at least two streams")
    by_channel: dict[int, TagStream] = {}
    for s in streams:
        if s.channel in by_channel:
            raise ValueError(f"channel id {s.channel} appears more than once")
        by_channel[s.channel] = s
    tick, duration = _common_timebase(streams)
    if not duration > 0:
        raise ValueError("acquisition duration must be positive")
    if not window > 0:
        raise ValueError("window must be positive")
    window_ticks = int(math.floor(window / tick * (1 + 1e-12)))
    if window_ticks < 1:
        raise ValueError("window must span at least one tick")
    if combinations is None:
        combinations = list(_combinations(sorted(by_channel), 2))

    coincidences = {}
    for combo in combinations:
        key = tuple(combo)
        if len(key) < 2 or len(set(key)) != len(key):
            raise ValueError(f"invalid channel combination {combo}")
        missing = [c for c in key if c not in by_channel]
        if missing:
            raise ValueError(f"no stream for channel(s) {missing}")
        anchor, *rest = (by_channel[c].timestamps for c in key)
        coincidences[tuple(sorted(key))] = _match(anchor, rest, window_ticks)
    singles = {c: s.counts for c, s in by_channel.items()}
    return CoincidenceStats(duration, window_ticks * tick, singles, coincidences)


def default_window(repetition_rate: float) -> float:
    """A quarter of the laser period."""
    return 0.25 / repetition_rate


# --- metrics ----------------------------------------------------------------


def _rel(m: Measurement) -> float:
    return m.error / m.value if m.value else 0.0


def brightness(stats: CoincidenceStats, pump, signal: int = SIGNAL, idler: int = IDLER) -> Measurement:
    """Pair rate per transmitted pump power, in pairs/(s mW)."""
    power_mw = pump.transmitted_power * 1e3
    if not power_mw > 0:
        raise ValueError("transmitted power must be positive")
    c_si = stats.rate((signal, idler))
    return Measurement(c_si.value / power_mw, c_si.error / power_mw, c_si.upper_limit)


def _singles(stats, *channels):
    rates = [stats.rate(c) for c in channels]
    if any(r.value <= 0 for r in rates):
        raise UndefinedMetricError(f"zero singles on channel(s) {channels}")
    return rates


def klyshko_efficiency(stats: CoincidenceStats, signal: int = SIGNAL, idler: int = IDLER) -> Measurement:
    c_s, c_i = _singles(stats, signal, idler)
    c_si = stats.rate((signal, idler))
    norm = math.sqrt(c_s.value * c_i.value)
    if c_si.upper_limit:
        return Measurement(0.0, c_si.error / norm, True)
    value = c_si.value / norm
    rel = math.sqrt(_rel(c_si) ** 2 + 0.25 * _rel(c_s) ** 2 + 0.25 * _rel(c_i) ** 2)
    return Measurement(value, value * rel)


def car(stats: CoincidenceStats, pump, signal: int = SIGNAL, idler: int = IDLER) -> Measurement:
    """Coincidences-to-accidentals ratio in the low-gain approximation."""
    rep = pump.repetition_rate
    if not rep > 0:
        raise ValueError("repetition rate must be positive")
    c_s, c_i = _singles(stats, signal, idler)
    c_si = stats.rate((signal, idler))
    norm = rep / (c_s.value * c_i.value)
    if c_si.upper_limit:
        return Measurement(0.0, c_si.error * norm, True)
    value = c_si.value * norm
    rel = math.sqrt(_rel(c_si) ** 2 + _rel(c_s) ** 2 + _rel(c_i) ** 2)
    return Measurement(value, value * rel)


def heralded_g2(
    stats: CoincidenceStats, signal1: int = SIGNAL, signal2: int = SIGNAL2, idler: int = IDLER
) -> Measurement:
    c_1i = stats.rate((signal1, idler))
    c_2i = stats.rate((signal2, idler))
    if c_1i.value <= 0 or c_2i.value <= 0:
        raise UndefinedMetricError("no heralded coincidences on one splitter arm")
    (c_i,) = _singles(stats, idler)
    c_3 = stats.rate((signal1, signal2, idler))
    norm = c_i.value / (c_1i.value * c_2i.value)
    if c_3.upper_limit:
        return Measurement(0.0, c_3.error * norm, True)
    value = c_3.value * norm
    rel = math.sqrt(_rel(c_3) ** 2 + _rel(c_i) ** 2 + _rel(c_1i) ** 2 + _rel(c_2i) ** 2)
    return Measurement(value, value * rel)


# --- simulation -------------------------------------------------------------

STATISTICS = ("poisson", "thermal", "fixed")


def _pair_numbers(rng, statistics, mean, size):
    if statistics == "poisson":
        return rng.poisson(mean, size)
    if statistics == "thermal":
        return rng.geometric(1.0 / (1.0 + mean), size) - 1
    return np.full(size, int(round(mean)), dtype=np.int64)


def simulate_tag_source(
    mean_pairs_per_pulse: float,
    efficiencies: tuple[float, float] = (1.0, 1.0),
    dark_rates: tuple[float, float] = (0.0, 0.0),
    repetition_rate: float = 80e6,
    duration: float = 1e-3,
    splitter: bool = False,
    statistics: str = "poisson",
    correlated: bool = True,
    seed: int = 0,
    tick_resolution: float = 1e-12,
    chunk: int = 1_000_000,
) -> list[TagStream]:
    """Pulsed pair source with threshold detectors.

    Per pulse the pair number follows ``statistics``; each photon is detected
    independently with its arm efficiency (Bernoulli), and a detector clicks
    once if any photon reaches it. With ``splitter`` the signal arm is split
    50:50 onto channels 1 and 3. ``correlated=False`` draws the idler photon
    number independently of the signal. Dark counts are uniform in time.
    """
    eta_s, eta_i = efficiencies
    if not (0 <= eta_s <= 1 and 0 <= eta_i <= 1):
        raise ValueError("efficiencies must lie in [0, 1]")
    if mean_pairs_per_pulse < 0 or min(dark_rates) < 0 or repetition_rate <= 0 or duration <= 0:
        raise ValueError("rates, mean pair number and duration must be non-negative")
    if statistics not in STATISTICS:
        raise ValueError(f"statistics must be one of {STATISTICS}")
    if statistics == "fixed" and mean_pairs_per_pulse != round(mean_pairs_per_pulse):
        raise ValueError("fixed statistics need an integer pair number")

    rng = np.random.default_rng(seed)
    n_pulses = int(round(duration * repetition_rate))
    period_ticks = 1.0 / repetition_rate / tick_resolution
    channels = [SIGNAL, IDLER] + ([SIGNAL2] if splitter else [])
    clicks: dict[int, list[np.ndarray]] = {c: [] for c in channels}

    for first in range(0, n_pulses, chunk):
        size = min(chunk, n_pulses - first)
        n_s = _pair_numbers(rng, statistics, mean_pairs_per_pulse, size)
        n_i = n_s if correlated else _pair_numbers(rng, statistics, mean_pairs_per_pulse, size)
        k_s = rng.binomial(n_s, eta_s)
        k_i = rng.binomial(n_i, eta_i)
        pulse = first + np.arange(size)
        times = np.round(pulse * period_ticks).astype(np.int64)
        if splitter:
            k_1 = rng.binomial(k_s, 0.5)
            clicks[SIGNAL].append(times[k_1 > 0])
            clicks[SIGNAL2].append(times[(k_s - k_1) > 0])
        else:
            clicks[SIGNAL].append(times[k_s > 0])
        clicks[IDLER].append(times[k_i > 0])

    total_ticks = int(round(duration / tick_resolution))
    dark = {SIGNAL: dark_rates[0], IDLER: dark_rates[1], SIGNAL2: dark_rates[0]}
    streams = []
    for c in channels:
        n_dark = rng.poisson(dark[c] * duration)
        extra = rng.integers(0, total_ticks, n_dark, endpoint=True)
        ts = np.sort(np.concatenate(clicks[c] + [extra.astype(np.int64)]), kind="stable")
        streams.append(TagStream(c, ts, tick_resolution, duration))
    return streams
