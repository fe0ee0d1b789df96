"""Bob's node: tap splitter, photodetection, filtering, decoding and the monitoring line."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .encoder import PLANCK, Variant, occupancy_table
from .pulsetrain import Frame, OpticalField, SlotGrid, Symbol, delay, split

ELEMENTARY_CHARGE = 1.602176634e-19

# decode_data_line output codes besides the bit values 0 and 1
AMBIGUOUS = 2
ERASURE = -1

DETECTORS = ("Dd", "DM1", "DM2")


class InsufficientStatistics(ValueError):
    """Raised when a ratio estimate has no events to work with."""


@dataclass(frozen=True)
class ApdParams:
    gain: float = 30.0
    responsivity: float = 1.0  # A/W
    dark_current: float = 10e-9  # A
    thermal_noise_psd: float = 1e-26  # W/Hz
    noise_enabled: bool = True
    load_resistance: float = 1.0  # ohm
    excess_noise_exponent: float = 0.7  # F = gain**x
    noise_scale: float = 1.0
    quantum_efficiency: float | None = None
    dark_count_probability: float = 0.0

    def __post_init__(self):
        for name in ("gain", "responsivity", "dark_current", "thermal_noise_psd",
                     "noise_scale", "dark_count_probability"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")
        if self.load_resistance <= 0:
            raise ValueError("load_resistance must be positive")
        if self.quantum_efficiency is not None and not 0 <= self.quantum_efficiency <= 1:
            raise ValueError("quantum_efficiency must lie in [0, 1]")
        if self.dark_count_probability > 1:
            raise ValueError("dark_count_probability must lie in [0, 1]")

    @property
    def excess_noise_factor(self) -> float:
        return self.gain**self.excess_noise_exponent

    def efficiency(self, center_frequency: float) -> float:
        """Photon detection efficiency; derived from the responsivity unless set."""
        if self.quantum_efficiency is not None:
            return self.quantum_efficiency
        return min(1.0, self.responsivity * PLANCK * center_frequency / ELEMENTARY_CHARGE)


@dataclass(frozen=True)
class FilterParams:
    cutoff_hz: float = 750e6
    order: int = 1

    def __post_init__(self):
        if self.cutoff_hz <= 0:
            raise ValueError("cutoff_hz must be positive")
        if self.order != 1:
            raise ValueError("only a first-order filter is supported")


@dataclass(frozen=True, eq=False)
class ElectricalWaveform:
    samples: np.ndarray
    grid: SlotGrid

    def __post_init__(self):
        samples = np.array(self.samples, dtype=np.float64, copy=True)
        if samples.shape != (self.grid.n_samples,):
            raise ValueError(f"expected {self.grid.n_samples} samples, got {samples.shape}")
        samples.setflags(write=False)
        object.__setattr__(self, "samples", samples)


@dataclass(frozen=True, eq=False)
class DetectionRecord:
    label: str
    clicks: np.ndarray
    energies: np.ndarray
    threshold: float

    def __post_init__(self):
        if self.label not in DETECTORS:
            raise ValueError(f"unknown detector label {self.label!r}")


@dataclass(frozen=True)
class MonitoringStats:
    n_clicks_dm1: int
    n_clicks_dm2: int
    n_opportunities: int

    def __add__(self, other: "MonitoringStats") -> "MonitoringStats":
        return MonitoringStats(self.n_clicks_dm1 + other.n_clicks_dm1,
                               self.n_clicks_dm2 + other.n_clicks_dm2,
                               self.n_opportunities + other.n_opportunities)


@dataclass(frozen=True)
class ThresholdPolicy:
    """Click threshold on baseline-subtracted slot energy (A).

    The default is ``n_sigma`` times the slot-energy spread seen on vacuum,
    never lower than ``floor``. ``absolute`` overrides both.
    """

    n_sigma: float = 5.0
    sigma: float = 0.0
    floor: float = 0.0
    absolute: float | None = None

    def threshold(self) -> float:
        if self.absolute is not None:
            return self.absolute
        return max(self.n_sigma * self.sigma, self.floor)


def variant_of(frame: Frame) -> Variant:
    return Variant.TWO_PULSE if frame.slots_per_symbol == 2 else Variant.THREE_PULSE


def tap_split(field: OpticalField, variant) -> tuple[OpticalField, OpticalField]:
    """Passive split into (data line, monitoring line)."""
    ratio = 0.9 if Variant.parse(variant) is Variant.TWO_PULSE else 0.5
    return split(field, ratio)


def mzi(field: OpticalField) -> tuple[OpticalField, OpticalField]:
    """Delay-line interferometer with a one-slot imbalance.

    DM1 is the constructive port. Content pushed past the window end by the
    delay is lost, so energy is conserved only when the last slot is empty.
    """
    if field.grid.n_slots < 2:
        raise ValueError("the interferometer needs at least two slots")
    late = delay(field, 1).samples
    return (field.replace((field.samples + late) / 2),
            field.replace((field.samples - late) / 2))


def noise_variance(apd: ApdParams, optical_power, sample_rate: float):
    """Per-sample photocurrent noise variance (A^2) for the given optical power."""
    bandwidth = sample_rate / 2
    thermal = apd.thermal_noise_psd / apd.load_resistance * bandwidth
    shot = (2 * ELEMENTARY_CHARGE * apd.gain**2 * apd.excess_noise_factor
            * (apd.responsivity * np.asarray(optical_power) + apd.dark_current) * bandwidth)
    return apd.noise_scale * (thermal + shot)


def apd_photocurrent(field: OpticalField, apd: ApdParams, noise_seed=None) -> ElectricalWaveform:
    power = field.power
    current = apd.gain * apd.responsivity * power + apd.dark_current
    if apd.noise_enabled:
        rng = np.random.default_rng(noise_seed)
        sigma = np.sqrt(noise_variance(apd, power, field.grid.sample_rate))
        current = current + sigma * rng.standard_normal(power.size)
    return ElectricalWaveform(current, field.grid)


def lowpass_coefficients(cutoff_hz: float, sample_rate: float) -> tuple[float, float, float]:
    """Bilinear-transform coefficients (b0, b1, a1) of a prewarped single-pole low-pass."""
    if sample_rate <= 2 * cutoff_hz:
        raise ValueError(
            f"sample rate {sample_rate:.4g} Hz must exceed twice the cutoff {cutoff_hz:.4g} Hz"
        )
    wa = 2 * sample_rate * np.tan(np.pi * cutoff_hz / sample_rate)
    k = 2 * sample_rate
    b = wa / (k + wa)
    return b, b, (wa - k) / (k + wa)


def bessel_lowpass(wave: ElectricalWaveform, filt: FilterParams,
                   initial: float = 0.0) -> ElectricalWaveform:
    """First-order low-pass; the state starts settled at ``initial``."""
    b0, b1, a1 = lowpass_coefficients(filt.cutoff_hz, wave.grid.sample_rate)
    return ElectricalWaveform(kernels.onepole_filter(wave.samples, b0, b1, a1, initial),
                              wave.grid)


def detect_clicks(wave: ElectricalWaveform, frame: Frame, threshold, baseline: float = 0.0,
                  label: str = "Dd") -> DetectionRecord:
    """Threshold the baseline-subtracted mean current of every slot."""
    if wave.grid.n_slots != frame.n_slots:
        raise ValueError(f"waveform has {wave.grid.n_slots} slots, frame has {frame.n_slots}")
    if isinstance(threshold, ThresholdPolicy):
        threshold = threshold.threshold()
    energies = kernels.slot_energies(wave.samples, wave.grid.samples_per_slot, baseline)
    return DetectionRecord(label, energies >= threshold, energies, float(threshold))


def photon_click_probability(mu_at_detector, efficiency: float):
    if np.any(np.asarray(mu_at_detector) < 0):
        raise ValueError("mean photon number must be non-negative")
    if not 0 <= efficiency <= 1:
        raise ValueError("efficiency must lie in [0, 1]")
    return -np.expm1(-efficiency * np.asarray(mu_at_detector, dtype=float))


def count_photons(field: OpticalField, apd: ApdParams, rng, label: str = "Dd") -> DetectionRecord:
    """Photon-counting detection: one Bernoulli click draw per slot."""
    mu = field.slot_energies() / (PLANCK * field.center_frequency)
    p = photon_click_probability(mu, apd.efficiency(field.center_frequency))
    if apd.noise_enabled and apd.dark_count_probability > 0:
        p = 1 - (1 - p) * (1 - apd.dark_count_probability)
    clicks = rng.random(mu.size) < p
    return DetectionRecord(label, clicks, mu, 0.0)


def decode_data_line(record: DetectionRecord, frame: Frame, variant=None) -> np.ndarray:
    """Per-symbol decision: 0, 1, AMBIGUOUS (both pulse slots clicked) or ERASURE."""
    variant = variant_of(frame) if variant is None else Variant.parse(variant)
    if variant.slots_per_symbol != frame.slots_per_symbol:
        raise ValueError("variant does not match the frame layout")
    clicks = np.asarray(record.clicks).reshape(frame.n_symbols, frame.slots_per_symbol)
    table = occupancy_table(variant)
    slot_for_0 = int(np.flatnonzero(table[Symbol.BIT0])[0])
    slot_for_1 = int(np.flatnonzero(table[Symbol.BIT1])[0])
    c0 = clicks[:, slot_for_0]
    c1 = clicks[:, slot_for_1]
    out = np.full(frame.n_symbols, ERASURE, dtype=np.int8)
    out[c0 & ~c1] = 0
    out[c1 & ~c0] = 1
    out[c0 & c1] = AMBIGUOUS
    return out


def slot_occupancy(frame: Frame) -> np.ndarray:
    return occupancy_table(variant_of(frame))[frame.symbols].ravel()


def adjacent_pairs(frame: Frame) -> np.ndarray:
    """Index k of every occupied slot pair (k, k+1) in Alice's frame."""
    occ = slot_occupancy(frame)
    return np.flatnonzero(occ[:-1] & occ[1:])


def conditioned_slots(frame: Frame, variant=None) -> np.ndarray:
    """Slots where the MZI overlaps two neighbouring coherent pulses.

    Two-pulse: every adjacent occupied pair, inside or across symbols.
    Three-pulse: the two pulses inside each decoy.
    """
    variant = variant_of(frame) if variant is None else Variant.parse(variant)
    if variant is Variant.TWO_PULSE:
        return adjacent_pairs(frame) + 1
    decoys = np.flatnonzero(frame.symbols == Symbol.DECOY)
    return decoys * frame.slots_per_symbol + 1


def monitoring_stats(dm1: DetectionRecord, dm2: DetectionRecord, frame: Frame,
                     variant=None) -> MonitoringStats:
    slots = conditioned_slots(frame, variant)
    return MonitoringStats(int(np.count_nonzero(dm1.clicks[slots])),
                           int(np.count_nonzero(dm2.clicks[slots])),
                           int(slots.size))


def visibility_from_stats(stats: MonitoringStats) -> float:
    total = stats.n_clicks_dm1 + stats.n_clicks_dm2
    if total == 0:
        raise InsufficientStatistics("no monitoring clicks on conditioned slots")
    return (stats.n_clicks_dm1 - stats.n_clicks_dm2) / total


def estimate_visibility(monitor_records, frames, variant=None) -> tuple[float, MonitoringStats]:
    """Visibility over matched ``(dm1, dm2)`` record pairs and frames."""
    stats = MonitoringStats(0, 0, 0)
    for (dm1, dm2), frame in zip(monitor_records, frames, strict=True):
        stats = stats + monitoring_stats(dm1, dm2, frame, variant)
    return visibility_from_stats(stats), stats


@dataclass(frozen=True)
class SnrAccumulator:
    """Sufficient statistics for the SNR so frames can be merged."""

    signal_sumsq: float = 0.0
    n_signal: int = 0
    noise_sum: float = 0.0
    noise_sumsq: float = 0.0
    n_noise: int = 0

    def __add__(self, other: "SnrAccumulator") -> "SnrAccumulator":
        return SnrAccumulator(self.signal_sumsq + other.signal_sumsq,
                              self.n_signal + other.n_signal,
                              self.noise_sum + other.noise_sum,
                              self.noise_sumsq + other.noise_sumsq,
                              self.n_noise + other.n_noise)

    @property
    def signal_power(self) -> float:
        return self.signal_sumsq / self.n_signal if self.n_signal else 0.0

    @property
    def noise_power(self) -> float:
        if self.n_noise < 2:
            return 0.0
        mean = self.noise_sum / self.n_noise
        return max(0.0, self.noise_sumsq / self.n_noise - mean * mean)

    def snr_db(self) -> float:
        p_noise = self.noise_power
        if p_noise == 0:
            return float("inf")
        p_signal = self.signal_power
        if p_signal == 0:
            return float("-inf")
        return 10 * np.log10(p_signal / p_noise)


def snr_components(signal_wave: ElectricalWaveform, frame: Frame,
                   reference: ElectricalWaveform | None = None,
                   baseline: float = 0.0) -> SnrAccumulator:
    sps = signal_wave.grid.samples_per_slot
    occ = np.repeat(slot_occupancy(frame), sps)
    if reference is None:
        sig = signal_wave.samples[occ] - baseline
        noise = signal_wave.samples[~occ] - baseline
    else:
        sig = reference.samples[occ] - baseline
        noise = signal_wave.samples[~occ] - reference.samples[~occ]
    return SnrAccumulator(float(np.dot(sig, sig)), int(sig.size),
                          float(noise.sum()), float(np.dot(noise, noise)), int(noise.size))


def measure_snr(signal_wave: ElectricalWaveform, frame: Frame,
                reference: ElectricalWaveform | None = None, baseline: float = 0.0) -> float:
    """SNR in dB: mean-square signal on occupied slots over noise variance on vacuum slots.

    With a noise-free ``reference`` the signal is read from it and the noise
    is the difference, so pulse tails leaking into vacuum slots are not
    counted as noise. Returns ``inf`` when there is no noise.
    """
    return snr_components(signal_wave, frame, reference, baseline).snr_db()
