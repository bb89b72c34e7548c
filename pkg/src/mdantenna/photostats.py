"""Monte-Carlo photon statistics of a pulsed single-photon source.

simulate_source draws, pulse by pulse: the brightness state of the
emitter (continuous-time Markov flicker), a primary photon with
probability quantum_yield * brightness and exponential delay, extra
early multiexciton photons on a geometric ladder whose first rung has
probability p_biexciton (each further rung the same conditional
probability, faster exponential delays), binomial detection thinning
with efficiency x, and a 50/50 split onto two detectors (Hanbury
Brown-Twiss geometry). Optional detector imperfections: Poissonian dark
counts and a per-channel dead time.

The generator is a counter-based Philox keyed by the seed, and the draw
order is fixed (flicker trajectory, primary coins, primary delays,
ladder counts, extra delays, detection coins, dark counts, routing
coins), so identical seeds give bit-identical streams.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InsufficientDataError, OutOfDomainError


@dataclass(frozen=True)
class FlickerState:
    relative_brightness: float
    mean_dwell_s: float

    def __post_init__(self):
        if not 0 < self.relative_brightness <= 1:
            raise ValueError("relative_brightness must lie in (0, 1]")
        if not self.mean_dwell_s > 0:
            raise ValueError("mean_dwell_s must be positive")


@dataclass(frozen=True)
class EmitterPhotophysics:
    """Pulsed-excitation emitter parameters.

    p_biexciton is the per-pulse probability of at least one additional
    early photon (default lifetime: half the primary); higher multiexciton
    orders follow with the same conditional probability per rung, so k
    extras occur with probability p^k (1-p). detection_efficiency is the
    end-to-end photon survival probability x.
    """

    rep_rate_hz: float
    lifetime_ns: float
    quantum_yield: float
    p_biexciton: float = 0.0
    biexciton_lifetime_ns: float | None = None
    flicker_states: tuple[FlickerState, ...] = (FlickerState(1.0, 1.0),)
    detection_efficiency: float = 1.0

    def __post_init__(self):
        if not self.rep_rate_hz > 0:
            raise ValueError("rep_rate_hz must be positive")
        if not self.lifetime_ns > 0:
            raise ValueError("lifetime_ns must be positive")
        for name in ("quantum_yield", "p_biexciton", "detection_efficiency"):
            v = getattr(self, name)
            if not 0 <= v <= 1:
                raise OutOfDomainError(f"{name} must lie in [0, 1], got {v}")
        if self.biexciton_lifetime_ns is not None and not self.biexciton_lifetime_ns > 0:
            raise ValueError("biexciton_lifetime_ns must be positive")
        if len(self.flicker_states) < 1:
            raise ValueError("need at least one flicker state")
        object.__setattr__(self, "flicker_states", tuple(self.flicker_states))

    @property
    def pulse_period_s(self) -> float:
        return 1.0 / self.rep_rate_hz

    @property
    def bx_lifetime_ns(self) -> float:
        return self.biexciton_lifetime_ns if self.biexciton_lifetime_ns is not None \
            else 0.5 * self.lifetime_ns


@dataclass(frozen=True)
class TimestampStream:
    """Detection record: times in seconds (sorted), channel 0/1 per event."""

    times: np.ndarray
    channels: np.ndarray
    duration_s: float
    pulse_period_s: float
    seed: int

    def channel_times(self, channel: int) -> np.ndarray:
        return self.times[self.channels == channel]


def _flicker_states_at_pulses(physics: EmitterPhotophysics, n_pulses: int,
                              duration: float, rng: np.random.Generator) -> np.ndarray:
    """State index per pulse for the continuous-time Markov flicker:
    exponential dwells with the state's mean, uniform jumps among the
    other states; the initial state is dwell-weighted (stationary)."""
    states = physics.flicker_states
    n_states = len(states)
    pulse_t = np.arange(n_pulses) / physics.rep_rate_hz
    if n_states == 1:
        return np.zeros(n_pulses, dtype=np.intp)
    dwell = np.array([s.mean_dwell_s for s in states])
    current = int(rng.choice(n_states, p=dwell / dwell.sum()))
    t = 0.0
    switch_t, switch_s = [0.0], [current]
    while t < duration:
        t += rng.exponential(dwell[current])
        step = int(rng.integers(n_states - 1))
        current = (current + 1 + step) % n_states
        switch_t.append(t)
        switch_s.append(current)
    idx = np.searchsorted(switch_t, pulse_t, side="right") - 1
    return np.asarray(switch_s, dtype=np.intp)[idx]


def simulate_source(physics: EmitterPhotophysics, duration_s: float,
                    seed: int = 0, *, dead_time_ns: float = 0.0,
                    dark_rate_hz: float = 0.0) -> TimestampStream:
    """Simulate detection timestamps over a duration (seconds).

    dark_rate_hz adds uncorrelated background events at the given total
    rate; dead_time_ns drops any event closer than that to the previous
    accepted event on the same channel. Both default to an ideal detector.
    """
    if not duration_s > 0:
        raise ValueError("duration_s must be positive")
    if dead_time_ns < 0 or dark_rate_hz < 0:
        raise ValueError("dead time and dark rate must be non-negative")
    if physics.p_biexciton >= 1.0:
        raise OutOfDomainError(
            "p_biexciton = 1 makes the multiexciton ladder infinite")
    rng = np.random.Generator(np.random.Philox(seed))
    n_pulses = int(math.floor(duration_s * physics.rep_rate_hz))
    pulse_t = np.arange(n_pulses) / physics.rep_rate_hz

    state = _flicker_states_at_pulses(physics, n_pulses, duration_s, rng)
    brightness = np.array([s.relative_brightness for s in physics.flicker_states])

    p_primary = physics.quantum_yield * brightness[state]
    primary = rng.random(n_pulses) < p_primary
    t_primary = pulse_t[primary] + 1e-9 * rng.exponential(
        physics.lifetime_ns, size=int(primary.sum()))

    if physics.p_biexciton > 0 and n_pulses:
        # geometric ladder: k extra photons with probability p^k (1-p)
        extras = rng.geometric(1.0 - physics.p_biexciton, size=n_pulses) - 1
        t_bx = np.repeat(pulse_t, extras) + 1e-9 * rng.exponential(
            physics.bx_lifetime_ns, size=int(extras.sum()))
    else:
        t_bx = np.empty(0)

    emitted = np.concatenate([t_primary, t_bx])
    detected = emitted[rng.random(emitted.size) < physics.detection_efficiency]
    if dark_rate_hz > 0:
        n_dark = rng.poisson(dark_rate_hz * duration_s)
        detected = np.concatenate([detected, duration_s * rng.random(n_dark)])
    detected = np.sort(detected)
    detected = detected[detected <= duration_s]  # acquisition gate
    channels = (rng.random(detected.size) < 0.5).astype(np.uint8)
    if dead_time_ns > 0:
        keep = np.ones(detected.size, dtype=bool)
        dead_s = dead_time_ns * 1e-9
        last = [-np.inf, -np.inf]
        for i, (t, ch) in enumerate(zip(detected, channels)):
            if t - last[ch] < dead_s:
                keep[i] = False
            else:
                last[ch] = t
        detected, channels = detected[keep], channels[keep]
    return TimestampStream(times=detected, channels=channels,
                           duration_s=float(duration_s),
                           pulse_period_s=physics.pulse_period_s,
                           seed=int(seed))


@dataclass(frozen=True)
class G2Histogram:
    """Cross-correlation histogram of A-B delays.

    counts[k] is the number of pairs with delay in the bin centered at
    tau_ns[k]; center_ratio is the pair count inside the central pulse
    window divided by the mean count of the complete side windows
    (pulsed normalization), and side_level is that mean.
    """

    tau_ns: np.ndarray
    counts: np.ndarray
    bin_width_ns: float
    pulse_period_ns: float
    center_ratio: float
    side_level: float


def g2_histogram(stream: TimestampStream, bin_width_ns: float,
                 span_ns: float) -> G2Histogram:
    """Histogram all A-B delay pairs within a symmetric span.

    The span is rounded to a whole number of bins with tau = 0 at a bin
    center. The central-peak ratio is computed from the raw delays over
    windows of one pulse period centered on multiples of the period.
    """
    if not bin_width_ns > 0 or not span_ns > 0:
        raise ValueError("bin width and span must be positive")
    t_a = stream.channel_times(0) * 1e9
    t_b = stream.channel_times(1) * 1e9
    if t_a.size == 0 or t_b.size == 0:
        raise InsufficientDataError(
            f"need events on both detectors, got {t_a.size} and {t_b.size}")

    n_half = max(1, int(round(span_ns / bin_width_ns)))
    edges = (np.arange(2 * n_half + 2) - (n_half + 0.5)) * bin_width_ns
    window = edges[-1]

    taus = []
    lo = np.searchsorted(t_b, t_a - window, side="left")
    hi = np.searchsorted(t_b, t_a + window, side="right")
    for a, i, j in zip(t_a, lo, hi):
        if j > i:
            taus.append(t_b[i:j] - a)
    taus = np.concatenate(taus) if taus else np.empty(0)
    counts, _ = np.histogram(taus, bins=edges)

    period = stream.pulse_period_s * 1e9
    k_max = int(math.floor((window - period / 2) / period))
    if k_max < 1:
        raise InsufficientDataError(
            "span covers no complete side window; enlarge span_ns")
    center = int(np.count_nonzero(np.abs(taus) < period / 2))
    side = 0
    for k in range(1, k_max + 1):
        for sgn in (1.0, -1.0):
            side += int(np.count_nonzero(
                np.abs(taus - sgn * k * period) < period / 2))
    side_level = side / (2 * k_max)
    if side_level == 0:
        raise InsufficientDataError("all side windows are empty")
    centers = 0.5 * (edges[:-1] + edges[1:])
    return G2Histogram(tau_ns=centers, counts=counts,
                       bin_width_ns=float(bin_width_ns),
                       pulse_period_ns=period,
                       center_ratio=center / side_level,
                       side_level=side_level)


@dataclass(frozen=True)
class TimeTrace:
    """Binned intensity trace and its count-occurrence histogram."""

    bin_width_ms: float
    t_ms: np.ndarray
    counts: np.ndarray
    occurrences: np.ndarray  # occurrences[k] = number of bins with k counts


def time_trace(stream: TimestampStream, bin_width_ms: float) -> TimeTrace:
    if not bin_width_ms > 0:
        raise ValueError("bin_width_ms must be positive")
    width_s = bin_width_ms * 1e-3
    n_bins = int(math.floor(stream.duration_s / width_s))
    if n_bins < 1:
        raise InsufficientDataError("duration shorter than one trace bin")
    counts, edges = np.histogram(stream.times, bins=n_bins,
                                 range=(0.0, n_bins * width_s))
    t_ms = 0.5 * (edges[:-1] + edges[1:]) * 1e3
    return TimeTrace(bin_width_ms=float(bin_width_ms), t_ms=t_ms,
                     counts=counts, occurrences=np.bincount(counts))


def noise_fraction(detection_efficiency) -> float | np.ndarray:
    """Residual photon-number noise of a thinned deterministic stream,
    sqrt(1 - x), as a fraction of the shot noise of x*N photons: binomial
    thinning of N photons has variance x*N*(1-x)."""
    x = np.asarray(detection_efficiency, dtype=float)
    if np.any(x < 0) or np.any(x > 1):
        raise OutOfDomainError("detection efficiency must lie in [0, 1]")
    out = np.sqrt(1.0 - x)
    return float(out) if out.ndim == 0 else out


def biexciton_probability(mean_excitations: float) -> float:
    """Poisson-excitation saturation: probability of at least two
    excitations per pulse, 1 - (1 + n) exp(-n)."""
    if mean_excitations < 0:
        raise OutOfDomainError("mean excitation number must be >= 0")
    n = mean_excitations
    return float(1.0 - (1.0 + n) * math.exp(-n))
