"""Fiber and free-space channel models."""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache
from importlib import resources

import numpy as np

from .pulsetrain import OpticalField

SPEED_OF_LIGHT = 299_792_458.0


class WeatherCondition(str, Enum):
    VERY_CLEAR = "Very Clear"
    CLEAR = "Clear"
    LIGHT_HAZE = "Light Haze"
    HAZE = "Haze"
    LIGHT_RAIN = "Light Rain"
    MODERATE_RAIN = "Moderate Rain"
    HEAVY_RAIN = "Heavy Rain"
    LIGHT_FOG = "Light Fog"
    MODERATE_FOG = "Moderate Fog"
    HEAVY_FOG = "Heavy Fog"

    @property
    def attenuation_db_per_km(self) -> float:
        return weather_table()[self.value]

    @property
    def key(self) -> str:
        """CamelCase identifier used in config files and CSV output (e.g. ``VeryClear``)."""
        return self.value.replace(" ", "")

    @classmethod
    def parse(cls, value) -> "WeatherCondition":
        if isinstance(value, cls):
            return value
        norm = str(value).replace(" ", "").replace("_", "").lower()
        for w in cls:
            if w.key.lower() == norm:
                return w
        raise ValueError(f"unknown weather condition {value!r}")


@lru_cache(maxsize=None)
def weather_table() -> dict[str, float]:
    """Atmospheric attenuation (dB/km) per condition, read from the bundled CSV."""
    text = resources.files("cowqkd").joinpath("data/weather.csv").read_text()
    return {row["condition"]: float(row["attenuation_db_per_km"])
            for row in csv.DictReader(io.StringIO(text))}


@dataclass(frozen=True)
class FiberParams:
    length_km: float = 0.0
    attenuation_db_per_km: float = 0.2
    dispersion_ps_nm_km: float = 16.75
    # ingested for completeness; a single-wavelength source makes it irrelevant
    dispersion_slope: float = 0.075
    reference_wavelength_nm: float = 1550.0
    source_linewidth_hz: float = 10e6
    dispersion_enabled: bool = True

    def __post_init__(self):
        if self.length_km < 0:
            raise ValueError(f"length_km must be non-negative, got {self.length_km}")
        if self.attenuation_db_per_km < 0:
            raise ValueError("attenuation_db_per_km must be non-negative")

    kind = "fiber"

    def transmission(self) -> float:
        return fiber_transmission(self.attenuation_db_per_km, self.length_km)

    def broadening_sigma(self) -> float:
        """Extra Gaussian pulse spread (s) accumulated over the span."""
        lam = self.reference_wavelength_nm * 1e-9
        dlam_nm = lam**2 * self.source_linewidth_hz / SPEED_OF_LIGHT * 1e9
        return abs(self.dispersion_ps_nm_km) * dlam_nm * self.length_km * 1e-12


@dataclass(frozen=True)
class FsoParams:
    length_km: float = 0.0
    weather: WeatherCondition = WeatherCondition.VERY_CLEAR
    tx_aperture_m: float = 0.05
    rx_aperture_m: float = 0.20
    beam_divergence_rad: float = 0.002

    def __post_init__(self):
        object.__setattr__(self, "weather", WeatherCondition.parse(self.weather))
        if self.tx_aperture_m <= 0 or self.rx_aperture_m <= 0:
            raise ValueError("apertures must be positive")
        if self.beam_divergence_rad <= 0:
            raise ValueError("beam divergence must be positive")
        if self.length_km < 0:
            raise ValueError(f"length_km must be non-negative, got {self.length_km}")

    kind = "fso"

    def transmission(self) -> float:
        return fso_total_transmission(self)


def fiber_transmission(attenuation_db_per_km: float, length_km: float) -> float:
    if attenuation_db_per_km < 0 or length_km < 0:
        raise ValueError("attenuation and length must be non-negative")
    return 10.0 ** (-attenuation_db_per_km * length_km / 10.0)


def fiber_attenuation_from_powers(p_in: float, p_out: float, length_km: float) -> float:
    """Attenuation coefficient (dB/km) from launched and received power."""
    if p_in <= 0 or p_out <= 0:
        raise ValueError("powers must be positive")
    if length_km <= 0:
        raise ValueError("length_km must be positive")
    if p_out > p_in:
        raise ValueError("p_out exceeds p_in; the fiber has no gain")
    return 10.0 / length_km * np.log10(p_in / p_out)


def fso_geometric_loss(d_t: float, d_r: float, divergence: float, length_m: float) -> float:
    """Fraction of the spread beam captured by the receive aperture, capped at 1."""
    if d_t <= 0 or d_r <= 0 or divergence <= 0:
        raise ValueError("apertures and divergence must be positive")
    if length_m < 0:
        raise ValueError("length must be non-negative")
    return min(1.0, d_r / (d_t + divergence * length_m))


def fso_atmospheric_transmission(weather, length_km: float) -> float:
    if length_km < 0:
        raise ValueError("length must be non-negative")
    a = WeatherCondition.parse(weather).attenuation_db_per_km
    return 10.0 ** (-a * length_km / 10.0)


def fso_total_transmission(params: FsoParams) -> float:
    geo = fso_geometric_loss(params.tx_aperture_m, params.rx_aperture_m,
                             params.beam_divergence_rad, params.length_km * 1e3)
    return geo * fso_atmospheric_transmission(params.weather, params.length_km)


def _gaussian_broaden(samples: np.ndarray, sigma: float, dt: float) -> np.ndarray:
    """Convolve with a unit-area Gaussian of std ``sigma`` then restore the energy."""
    n = samples.size
    freqs = np.fft.fftfreq(n, dt)
    kernel = np.exp(-0.5 * (2 * np.pi * freqs * sigma) ** 2)
    out = np.fft.ifft(np.fft.fft(samples) * kernel)
    e_in = np.sum(np.abs(samples) ** 2)
    e_out = np.sum(np.abs(out) ** 2)
    if e_out > 0:
        out *= np.sqrt(e_in / e_out)
    return out


def apply_channel(field: OpticalField, model: FiberParams | FsoParams) -> OpticalField:
    t = model.transmission()
    samples = field.samples * np.sqrt(t)
    if isinstance(model, FiberParams) and model.dispersion_enabled:
        sigma = model.broadening_sigma()
        if sigma > 0:
            samples = _gaussian_broaden(samples, sigma, field.grid.sample_period)
    return field.replace(samples)


def channel_from_dict(d: dict) -> FiberParams | FsoParams:
    d = dict(d)
    kind = d.pop("kind", "fiber")
    cls = {"fiber": FiberParams, "fso": FsoParams}.get(kind)
    if cls is None:
        raise ValueError(f"unknown channel kind {kind!r}")
    allowed = set(cls.__dataclass_fields__)
    unknown = set(d) - allowed
    if unknown:
        raise ValueError(f"unknown {kind} channel keys: {sorted(unknown)}")
    return cls(**d)


def channel_to_dict(model: FiberParams | FsoParams) -> dict:
    out = {"kind": model.kind}
    for name in model.__dataclass_fields__:
        value = getattr(model, name)
        out[name] = value.key if isinstance(value, WeatherCondition) else value
    return out
