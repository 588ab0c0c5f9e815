"""Synthetic solar-house sensor streams for tests, demos, and benchmarks.

Generates minute-cadence readings for the five raw channels (indoor
temperature, sun irradiance, humidity, CO2, rain) driven by a small
physical story:

* irradiance follows a clipped solar arc between sunrise and sunset,
  scaled by cloud cover and damped while it rains; each day draws a
  clear or overcast regime and the cover wanders slowly around that
  level during the day, so an afternoon can cloud over or clear up
  even though the clock-time arc never moves;
* indoor temperature sits in a heated house: a thermostat with a small
  hysteresis band cycles the heater, so overnight the temperature traces
  a slow sawtooth whose phase follows the heater state rather than the
  clock, while on bright days a saturating solar gain overshoots the
  band and the sun takes over; occupants add a little body heat and the
  whole thing leaks toward the colder outdoor cycle;
* CO2 relaxes toward an ambient or occupied set point on a fixed
  household schedule; humidity tracks occupancy and recent rain;
* rain arrives in randomly placed episodes a few tens of minutes long.

Everything is reproducible from the seed alone.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from datetime import datetime, timezone

import numpy as np

from .exceptions import ConfigError
from .ingest import CHANNELS, RawSeries

MINUTE = 60
DAY_MINUTES = 1440


@dataclass(frozen=True)
class SynthConfig:
    """Knobs for the generator; defaults give a plausible 5-week house."""

    days: int = 35
    start: int = 0  # epoch seconds, midnight-aligned not required
    seed: int = 0

    # irradiance
    solar_peak: float = 820.0  # clear-sky max, W/m^2
    sunrise_hour: float = 6.0
    sunset_hour: float = 18.0
    cloud_min: float = 0.1  # darkest sky keeps this fraction of the sun
    cloud_max: float = 1.0
    overcast_prob: float = 0.45  # chance a day lands in the overcast regime
    cloud_rate: float = 0.006  # per-minute relaxation toward the day's regime
    cloud_noise: float = 0.015  # per-minute wander of the cloud cover
    rain_dimming: float = 0.75  # fraction of irradiance lost while raining

    # indoor temperature
    base_temp: float = 19.0  # thermostat setpoint, degrees C
    ambient_drop: float = 3.0  # how far the outdoor mean sits below it
    ambient_swing: float = 1.0  # amplitude of the daily outdoor cycle
    pull: float = 0.004  # per-minute leak toward the outdoor temperature
    comfort_band: float = 0.4  # thermostat hysteresis half-width
    heater_gain: float = 0.03  # degrees C per minute while the heater runs
    sun_gain: float = 0.026  # degrees C per minute at full saturation
    sun_scale: float = 520.0  # W/m^2 at which the response half-saturates
    occupancy_gain: float = 0.004
    temp_noise: float = 0.009

    # CO2
    co2_ambient: float = 420.0
    co2_occupied: float = 950.0
    co2_rate: float = 0.025
    co2_noise: float = 1.5

    # humidity
    humidity_base: float = 48.0
    occupancy_humidity: float = 6.0
    rain_humidity: float = 14.0
    humidity_noise: float = 0.4

    # rain
    rain_prob: float = 0.1  # chance that a given hour starts an episode

    def __post_init__(self) -> None:
        if self.days < 1:
            raise ConfigError("days must be at least 1")
        if self.start < 0 or self.start % MINUTE != 0:
            raise ConfigError("start must be a non-negative whole minute")
        if not 0.0 <= self.sunrise_hour < self.sunset_hour <= 24.0:
            raise ConfigError("need 0 <= sunrise < sunset <= 24")
        if not 0.0 < self.cloud_min <= self.cloud_max <= 1.0:
            raise ConfigError("cloud factors must satisfy 0 < min <= max <= 1")
        if not 0.0 <= self.rain_prob <= 1.0:
            raise ConfigError("rain_prob must lie in [0, 1]")
        if not 0.0 <= self.overcast_prob <= 1.0:
            raise ConfigError("overcast_prob must lie in [0, 1]")
        if not 0.0 <= self.rain_dimming <= 1.0:
            raise ConfigError("rain_dimming must lie in [0, 1]")
        for name in ("pull", "co2_rate", "cloud_rate"):
            if not 0.0 <= getattr(self, name) < 1.0:
                raise ConfigError(f"{name} must lie in [0, 1)")
        if self.comfort_band <= 0.0:
            raise ConfigError("comfort_band must be positive")
        if self.heater_gain < 0.0:
            raise ConfigError("heater_gain must be non-negative")


def _occupancy(config: SynthConfig, n: int) -> np.ndarray:
    """1.0 when someone is home: nights and evenings on weekdays,
    all weekend except a late-morning outing."""
    minute_abs = config.start // MINUTE + np.arange(n)
    minute = minute_abs % DAY_MINUTES
    weekday = (minute_abs // DAY_MINUTES) % 7 < 5
    home_workday = (minute < 8 * 60) | (minute >= 18 * 60)
    home_weekend = ~((minute >= 10 * 60) & (minute < 13 * 60))
    return np.where(weekday, home_workday, home_weekend).astype(float)


def _rain(config: SynthConfig, n: int, rng: np.random.Generator) -> np.ndarray:
    hours = -(-n // 60)
    episode = rng.random(hours) < config.rain_prob
    rain = np.zeros(n)
    for k in np.flatnonzero(episode):
        offset = int(rng.integers(0, 60))
        length = int(rng.integers(20, 121))
        lo = k * 60 + offset
        rain[lo : min(lo + length, n)] = 1.0
    return rain


def _irradiance(
    config: SynthConfig, n: int, rain: np.ndarray, rng: np.random.Generator
) -> np.ndarray:
    minute_abs = config.start // MINUTE + np.arange(n)
    minute = minute_abs % DAY_MINUTES
    rise = config.sunrise_hour * 60.0
    fall = config.sunset_hour * 60.0
    arc = np.sin(np.pi * (minute - rise) / (fall - rise))
    arc = np.where((minute > rise) & (minute < fall), np.maximum(arc, 0.0), 0.0)

    day = minute_abs // DAY_MINUTES
    day_index = day - day[0]
    # two weather regimes: overcast days sit in the bottom quarter of the
    # cloud range, clear days in the top quarter, so the hour of the clock
    # alone says little about how much sun actually arrives
    count = day_index[-1] + 1
    span = config.cloud_max - config.cloud_min
    overcast = rng.random(count) < config.overcast_prob
    level = rng.uniform(0.0, 1.0, size=count)
    dark = config.cloud_min + 0.25 * span * level
    bright = config.cloud_max - 0.25 * span * (1.0 - level)
    regime = np.where(overcast, dark, bright)[day_index]

    # within the day the cover drifts around the regime level, so a clear
    # morning can cloud over by mid-afternoon; the drift is slow enough
    # that recent sky beats clock time as a predictor of the next hour
    shock = rng.normal(0.0, config.cloud_noise, size=n)
    cloud = np.empty(n)
    cloud[0] = regime[0]
    for t in range(n - 1):
        step = config.cloud_rate * (regime[t] - cloud[t]) + shock[t]
        cloud[t + 1] = min(max(cloud[t] + step, config.cloud_min), config.cloud_max)

    dimming = 1.0 - config.rain_dimming * rain
    return config.solar_peak * cloud * arc * dimming


def _ambient(config: SynthConfig, n: int) -> np.ndarray:
    minute = (config.start // MINUTE + np.arange(n)) % DAY_MINUTES
    # warmest outdoors around 16:00
    phase = 2.0 * np.pi * minute / DAY_MINUTES - 5.0 * np.pi / 6.0
    mean = config.base_temp - config.ambient_drop
    return mean + config.ambient_swing * np.sin(phase)


def generate(config: SynthConfig | None = None) -> dict[str, RawSeries]:
    """Simulate all channels at minute cadence; bit-identical per seed."""
    config = config or SynthConfig()
    n = config.days * DAY_MINUTES

    rng_rain = np.random.default_rng([config.seed, 0])
    rng_cloud = np.random.default_rng([config.seed, 1])
    rng_temp = np.random.default_rng([config.seed, 2])
    rng_air = np.random.default_rng([config.seed, 3])

    occ = _occupancy(config, n)
    rain = _rain(config, n, rng_rain)
    sun = _irradiance(config, n, rain, rng_cloud)
    ambient = _ambient(config, n)

    saturation = sun / (sun + config.sun_scale)
    temp_shock = rng_temp.normal(0.0, config.temp_noise, size=n)
    co2_shock = rng_air.normal(0.0, config.co2_noise, size=n)
    co2_target = config.co2_ambient + (config.co2_occupied - config.co2_ambient) * occ

    temp = np.empty(n)
    co2 = np.empty(n)
    temp[0] = config.base_temp
    co2[0] = config.co2_ambient
    low = config.base_temp - config.comfort_band
    high = config.base_temp + config.comfort_band
    heating = False  # thermostat: on below the band, off above it
    for t in range(n - 1):
        if heating:
            heating = temp[t] < high
        else:
            heating = temp[t] <= low
        drift = config.pull * (ambient[t] - temp[t])
        forcing = config.sun_gain * saturation[t] + config.occupancy_gain * occ[t]
        if heating:
            forcing += config.heater_gain
        temp[t + 1] = temp[t] + drift + forcing + temp_shock[t]
        co2[t + 1] = co2[t] + config.co2_rate * (co2_target[t] - co2[t]) + co2_shock[t]
    co2 = np.maximum(co2, 380.0)

    wet = np.empty(n)
    wet[0] = rain[0]
    for t in range(n - 1):  # slow drying: humidity stays up after a shower
        wet[t + 1] = wet[t] + 0.02 * (rain[t + 1] - wet[t])
    humidity = (
        config.humidity_base
        + config.occupancy_humidity * occ
        + config.rain_humidity * wet
        + rng_air.normal(0.0, config.humidity_noise, size=n)
    )
    humidity = np.clip(humidity, 1.0, 99.0)

    values = {"d": temp, "W": sun, "H": humidity, "Q": co2, "R": rain}
    return {
        channel: RawSeries(channel, config.start, MINUTE, values[channel])
        for channel in CHANNELS
    }


def write_csv(series: dict[str, RawSeries], path) -> None:
    """One wide CSV (ISO timestamps + a column per channel), loadable
    back through the ingest reader."""
    channels = [c for c in CHANNELS if c in series]
    if not channels:
        raise ConfigError("no channels to write")
    first = series[channels[0]]
    for c in channels[1:]:
        s = series[c]
        if (s.start, s.period, len(s.values)) != (
            first.start,
            first.period,
            len(first.values),
        ):
            raise ConfigError("channels must share one time grid to share a file")

    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["timestamp"] + channels)
        stamps = first.timestamps()
        for i in range(len(first.values)):
            moment = datetime.fromtimestamp(int(stamps[i]), tz=timezone.utc)
            row = [moment.strftime("%Y-%m-%dT%H:%M:%SZ")]
            row += [repr(float(series[c].values[i])) for c in channels]
            writer.writerow(row)
