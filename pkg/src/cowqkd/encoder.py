"""Alice's node: random symbols and the encoded weak-coherent pulse train."""
from __future__ import annotations

from dataclasses import dataclass, replace
from enum import Enum

import numpy as np

from .pulsetrain import DEFAULT_CENTER_FREQUENCY, Frame, OpticalField, SlotGrid, Symbol

PLANCK = 6.62607015e-34  # J s


class Variant(str, Enum):
    TWO_PULSE = "2p"
    THREE_PULSE = "3p"

    @property
    def slots_per_symbol(self) -> int:
        return 2 if self is Variant.TWO_PULSE else 3

    @classmethod
    def parse(cls, value) -> "Variant":
        if isinstance(value, cls):
            return value
        aliases = {"2p": cls.TWO_PULSE, "twopulse": cls.TWO_PULSE, "two_pulse": cls.TWO_PULSE,
                   "3p": cls.THREE_PULSE, "threepulse": cls.THREE_PULSE,
                   "three_pulse": cls.THREE_PULSE}
        try:
            return aliases[str(value).lower()]
        except KeyError:
            raise ValueError(f"unknown variant {value!r}; expected '2p' or '3p'") from None


# Per-symbol slot occupancy in time order.
_PATTERNS = {
    Variant.TWO_PULSE: {
        Symbol.BIT0: (0, 1),
        Symbol.BIT1: (1, 0),
        Symbol.DECOY: (1, 1),
    },
    Variant.THREE_PULSE: {
        Symbol.BIT0: (0, 1, 0),
        Symbol.BIT1: (1, 0, 0),
        Symbol.DECOY: (1, 1, 0),
    },
}


def occupancy_table(variant: Variant) -> np.ndarray:
    """(3, slots_per_symbol) table; row = symbol code, entry 1 where a pulse sits."""
    pat = _PATTERNS[Variant.parse(variant)]
    return np.array([pat[s] for s in Symbol], dtype=bool)


def default_slot_duration(variant: Variant) -> float:
    # one 3-slot block spans 5 ns
    return 1e-9 if Variant.parse(variant) is Variant.TWO_PULSE else 5e-9 / 3


@dataclass(frozen=True)
class EncoderConfig:
    variant: Variant = Variant.TWO_PULSE
    mu: float = 0.5
    decoy_fraction: float = 0.1
    slot_duration: float | None = None
    decoy_attenuation_db: float = 3.0
    center_frequency: float = DEFAULT_CENTER_FREQUENCY
    samples_per_slot: int = 16
    pulse_shape: str = "raised_cosine"
    duty: float = 0.5
    extinction_db: float | None = None
    linewidth_hz: float = 0.0
    randomize_global_phase: bool = True

    def __post_init__(self):
        object.__setattr__(self, "variant", Variant.parse(self.variant))
        if self.slot_duration is None:
            object.__setattr__(self, "slot_duration", default_slot_duration(self.variant))
        if not 0 < self.mu < 1:
            raise ValueError(f"mu must lie in (0, 1), got {self.mu}")
        if not 0 < self.decoy_fraction < 1:
            raise ValueError(f"decoy_fraction must lie in (0, 1), got {self.decoy_fraction}")
        if self.decoy_attenuation_db < 0:
            raise ValueError("decoy_attenuation_db must be non-negative")
        if self.pulse_shape not in ("raised_cosine", "rectangular"):
            raise ValueError(f"unknown pulse_shape {self.pulse_shape!r}")
        if not 0 < self.duty <= 1:
            raise ValueError(f"duty must lie in (0, 1], got {self.duty}")
        if self.linewidth_hz < 0:
            raise ValueError("linewidth_hz must be non-negative")

    @property
    def peak_power(self) -> float:
        return calibrate_amplitude(self.mu, self)

    def grid(self, n_slots: int) -> SlotGrid:
        return SlotGrid(self.slot_duration, self.samples_per_slot, n_slots)


@dataclass(frozen=True)
class SymbolSource:
    seed: int
    decoy_fraction: float = 0.1


def generate_symbols(source: SymbolSource, n: int) -> np.ndarray:
    """Draw ``n`` i.i.d. symbols with priors ((1-f)/2, (1-f)/2, f)."""
    if n < 1:
        raise ValueError(f"need at least one symbol, got n={n}")
    f = source.decoy_fraction
    if not 0 < f < 1:
        raise ValueError(f"decoy_fraction must lie in (0, 1), got {f}")
    rng = np.random.default_rng(source.seed)
    return rng.choice(3, size=n, p=[(1 - f) / 2, (1 - f) / 2, f]).astype(np.int8)


def pulse_shape(config: EncoderConfig) -> np.ndarray:
    """Normalized power envelope (peak 1) sampled across one slot."""
    sps = config.samples_per_slot
    t = (np.arange(sps) + 0.5) / sps - 0.5
    inside = np.abs(t) < config.duty / 2
    if config.pulse_shape == "rectangular":
        return inside.astype(float)
    return np.where(inside, 0.5 * (1 + np.cos(2 * np.pi * t / config.duty)), 0.0)


def calibrate_amplitude(target_mu: float, config: EncoderConfig) -> float:
    """Peak power (W) giving ``target_mu`` photons per pulse of the configured shape."""
    if not 0 < target_mu < 1:
        raise ValueError(f"target_mu must lie in (0, 1), got {target_mu}")
    mean_shape = float(np.mean(pulse_shape(config)))
    if mean_shape == 0:
        raise ValueError("pulse shape has no samples inside the duty window")
    return target_mu * PLANCK * config.center_frequency / (config.slot_duration * mean_shape)


def mean_photon_number(field: OpticalField, slot: int) -> float:
    n = field.grid.n_slots
    if not 0 <= slot < n:
        raise IndexError(f"slot {slot} out of range for {n} slots")
    sps = field.grid.samples_per_slot
    seg = field.samples[slot * sps : (slot + 1) * sps]
    energy = float(np.sum(np.abs(seg) ** 2)) * field.grid.sample_period
    return energy / (PLANCK * field.center_frequency)


def slot_amplitudes(symbols, config: EncoderConfig) -> np.ndarray:
    """Relative field amplitude (alpha = 1) of every slot of the frame."""
    symbols = np.asarray(symbols, dtype=np.int8)
    table = occupancy_table(config.variant).astype(float)
    if config.variant is Variant.THREE_PULSE:
        table[Symbol.DECOY] *= 10.0 ** (-config.decoy_attenuation_db / 20.0)
    if config.extinction_db is not None:
        table[table == 0] = 10.0 ** (-config.extinction_db / 20.0)
    return table[symbols].ravel()


def encode_frame(symbols, config: EncoderConfig, rng=None) -> tuple[OpticalField, Frame]:
    """Synthesize Alice's optical pulse train for ``symbols``.

    All pulses of one frame share a single coherent phase. When ``rng`` is
    given and ``config.randomize_global_phase`` is set, that phase is drawn
    uniformly; laser phase drift is added when ``linewidth_hz > 0``.
    """
    symbols = np.asarray(symbols, dtype=np.int8)
    if symbols.size == 0:
        raise ValueError("cannot encode an empty symbol sequence")
    frame = Frame(symbols, config.variant.slots_per_symbol)
    grid = config.grid(frame.n_slots)
    envelope = np.sqrt(config.peak_power * pulse_shape(config))
    samples = np.outer(slot_amplitudes(symbols, config), envelope).ravel().astype(np.complex128)
    if rng is not None:
        phase = rng.uniform(0, 2 * np.pi) if config.randomize_global_phase else 0.0
        if config.linewidth_hz > 0:
            # Wiener phase noise: variance 2*pi*linewidth per second
            step = np.sqrt(2 * np.pi * config.linewidth_hz * grid.sample_period)
            phase = phase + np.cumsum(rng.normal(0.0, step, grid.n_samples))
        samples *= np.exp(1j * phase)
    return OpticalField(samples, grid, config.center_frequency), frame


def with_variant(config: EncoderConfig, variant) -> EncoderConfig:
    """Copy of ``config`` for another variant, resetting the slot duration to its default."""
    return replace(config, variant=Variant.parse(variant), slot_duration=None)
