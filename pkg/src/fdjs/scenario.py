"""Physical-layer scene: geometry, link budget, and licensed-user activity.

Distances feed a log-distance attenuation model anchored so that a 90 dBm
transmitter with exponent 3.6 is received at about -96 dBm at 150 km, and the
licensed user's ON/OFF behaviour is a two-state continuous-time Markov chain
with exponential dwell times.  All power quantities are dBm; the detector
modules consume the derived linear ratios.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from fdjs.numerics import RngStream

__all__ = [
    "Propagation",
    "PuActivity",
    "RadioConfig",
    "Geometry",
    "PuTrajectory",
    "received_power_dbm",
    "alpha_s_at",
    "alpha_i_of",
    "sample_trajectory",
]


@dataclass(frozen=True)
class Propagation:
    """Transmit power, path-loss exponent, receiver noise floor, keep-out radius.

    The noise floor default is thermal noise over a 6 MHz channel
    (-174 dBm/Hz + 10*log10(6e6) ~ -106.2 dBm).
    """

    e_t_dbm: float = 90.0
    beta: float = 3.6
    noise_dbm: float = -106.0
    keep_out_m: float = 150_000.0

    def __post_init__(self) -> None:
        if self.beta <= 0.0:
            raise ValueError("beta must be positive")
        if self.keep_out_m <= 0.0:
            raise ValueError("keep_out_m must be positive")


@dataclass(frozen=True)
class PuActivity:
    """Mean ON and OFF dwell times of the licensed user (seconds)."""

    mean_on_s: float
    mean_off_s: float

    def __post_init__(self) -> None:
        if self.mean_on_s <= 0.0 or self.mean_off_s <= 0.0:
            raise ValueError("dwell means must be positive")

    @property
    def payload(self) -> float:
        """Long-run fraction of time the licensed user is ON."""
        return self.mean_on_s / (self.mean_on_s + self.mean_off_s)

    @property
    def switch_cycle_s(self) -> float:
        """Mean duration of one OFF -> ON -> OFF cycle."""
        return self.mean_on_s + self.mean_off_s

    @property
    def rate_sum(self) -> float:
        """Relaxation rate of the two-state chain (sum of exit rates)."""
        return 1.0 / self.mean_on_s + 1.0 / self.mean_off_s

    @classmethod
    def from_cycle(cls, switch_cycle_s: float, payload: float) -> "PuActivity":
        if not (0.0 < payload < 1.0):
            raise ValueError("payload must lie in (0, 1)")
        return cls(payload * switch_cycle_s, (1.0 - payload) * switch_cycle_s)


@dataclass(frozen=True)
class RadioConfig:
    """Shared radio parameters of the secondary link."""

    bandwidth_hz: float = 6e6
    si_dbm: float = -86.0
    su_link_snr_db: float = 10.0
    n_samples: int = 1000
    sample_rate_hz: float | None = None  # defaults to the bandwidth

    def __post_init__(self) -> None:
        if self.bandwidth_hz <= 0.0:
            raise ValueError("bandwidth must be positive")
        if not isinstance(self.n_samples, int) or self.n_samples < 1:
            raise ValueError("n_samples must be a positive integer")
        if self.sample_rate_hz is not None and self.sample_rate_hz <= 0.0:
            raise ValueError("sample_rate_hz must be positive")

    @property
    def window_s(self) -> float:
        """Duration of one sensing window of n_samples."""
        rate = self.sample_rate_hz if self.sample_rate_hz is not None else self.bandwidth_hz
        return self.n_samples / rate

    @property
    def link_snr_linear(self) -> float:
        return 10.0 ** (self.su_link_snr_db / 10.0)


@dataclass(frozen=True)
class Geometry:
    """Distances of the two secondary radios from the licensed transmitter;
    the three radios sit on one line."""

    d_tx_m: float
    d_rx_m: float

    def __post_init__(self) -> None:
        if self.d_tx_m <= 0.0 or self.d_rx_m <= 0.0:
            raise ValueError("distances must be positive")


def received_power_dbm(prop: Propagation, distance_m: float) -> float:
    """Received power at a distance under the log-distance attenuation model."""
    if distance_m <= 0.0:
        raise ValueError(f"distance must be positive, got {distance_m!r}")
    return prop.e_t_dbm - 10.0 * prop.beta * math.log10(distance_m)


def alpha_s_at(prop: Propagation, distance_m: float) -> float:
    """Linear SNR of the licensed signal at a sensing radio."""
    return 10.0 ** ((received_power_dbm(prop, distance_m) - prop.noise_dbm) / 10.0)


def alpha_i_of(radio: RadioConfig, prop: Propagation) -> float:
    """Linear residual self-interference to noise ratio; -inf dBm disables it."""
    if radio.si_dbm == -math.inf:
        return 0.0
    return 10.0 ** ((radio.si_dbm - prop.noise_dbm) / 10.0)


@dataclass(frozen=True, eq=False)
class PuTrajectory:
    """Alternating ON/OFF intervals tiling [0, duration].

    ends[i] is the end time of interval i (ends[-1] == duration); the i-th
    interval is ON iff on[i].  cum_on[i] caches the total ON seconds up to
    ends[i] so overlap queries are O(log n).
    """

    ends: np.ndarray
    on: np.ndarray
    duration: float
    cum_on: np.ndarray = field(init=False)

    def __post_init__(self) -> None:
        ends = np.asarray(self.ends, dtype=float)
        on = np.asarray(self.on, dtype=bool)
        if ends.ndim != 1 or on.shape != ends.shape or len(ends) == 0:
            raise ValueError("ends and on must be matching 1-d arrays")
        if not (np.all(np.diff(ends) > 0.0) and ends[-1] == self.duration):
            raise ValueError("intervals must be increasing and cover the duration")
        if len(on) > 1 and not np.all(on[1:] != on[:-1]):
            raise ValueError("interval states must alternate")
        lengths = np.diff(np.concatenate(([0.0], ends)))
        object.__setattr__(self, "ends", ends)
        object.__setattr__(self, "on", on)
        object.__setattr__(self, "cum_on", np.cumsum(lengths * on))

    @property
    def intervals(self) -> list[tuple[str, float, float]]:
        starts = np.concatenate(([0.0], self.ends[:-1]))
        return [("ON" if s else "OFF", float(a), float(b))
                for s, a, b in zip(self.on, starts, self.ends)]

    def _index(self, t: float) -> int:
        return min(int(np.searchsorted(self.ends, t, side="right")), len(self.ends) - 1)

    def state_at(self, t: float) -> bool:
        """True when the licensed user is ON at time t."""
        return bool(self.on[self._index(t)])

    def next_change_after(self, t: float) -> float:
        """First interval boundary strictly after t (duration if none)."""
        return float(self.ends[self._index(t)])

    def on_time_seconds(self, t0: float, t1: float) -> float:
        """ON seconds overlapping [t0, t1]."""
        if t1 <= t0:
            return 0.0
        return self._cum(t1) - self._cum(t0)

    def _cum(self, t: float) -> float:
        t = min(max(t, 0.0), self.duration)
        i = self._index(t)
        start = self.ends[i - 1] if i > 0 else 0.0
        base = self.cum_on[i - 1] if i > 0 else 0.0
        return float(base + (t - start) * bool(self.on[i]))

    def majority_on(self, t0: float, t1: float) -> bool:
        """Hypothesis of a sensing window: the state occupying most of it
        (ties count as ON, the protective choice)."""
        return self.on_time_seconds(t0, t1) >= 0.5 * (t1 - t0)

    @property
    def total_on_seconds(self) -> float:
        return float(self.cum_on[-1])


def sample_trajectory(activity: PuActivity, duration_s: float, rng: RngStream) -> PuTrajectory:
    """Draw one ON/OFF path of the two-state chain over [0, duration].

    The initial state follows the stationary distribution (ON with
    probability payload); dwell times are exponential with the configured
    means; the final interval is truncated at the duration.
    """
    if duration_s <= 0.0:
        raise ValueError("duration must be positive")
    gen = rng.generator()
    start_on = bool(gen.random() < activity.payload)
    means = (activity.mean_off_s, activity.mean_on_s)

    # Dwells alternate deterministically, so they can be drawn in fixed-size
    # even-length blocks: global even positions keep the starting state.
    blocks: list[np.ndarray] = []
    total = 0.0
    while total < duration_s:
        dw = np.empty(32)
        dw[0::2] = gen.exponential(means[start_on], size=16)
        dw[1::2] = gen.exponential(means[not start_on], size=16)
        blocks.append(dw)
        total += float(dw.sum())

    dwells = np.concatenate(blocks)
    ends = np.cumsum(dwells)
    n_keep = int(np.searchsorted(ends, duration_s, side="left")) + 1
    ends = ends[:n_keep]
    ends[-1] = duration_s
    on = np.empty(n_keep, dtype=bool)
    on[0::2] = start_on
    on[1::2] = not start_on
    return PuTrajectory(ends=ends, on=on, duration=duration_s)
