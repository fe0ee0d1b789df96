"""Sampled optical fields on a slotted time grid.

Amplitudes are stored in units of sqrt(W), so ``|a|**2`` is the
instantaneous optical power. Every operation returns a new field; the
sample buffers are marked read-only on construction.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import IntEnum

import numpy as np

from . import kernels

DEFAULT_CENTER_FREQUENCY = 193.1e12  # Hz


class Symbol(IntEnum):
    BIT0 = 0
    BIT1 = 1
    DECOY = 2


@dataclass(frozen=True)
class SlotGrid:
    slot_duration: float
    samples_per_slot: int
    n_slots: int

    def __post_init__(self):
        if not self.slot_duration > 0:
            raise ValueError(f"slot_duration must be positive, got {self.slot_duration}")
        if self.samples_per_slot < 4:
            raise ValueError(f"samples_per_slot must be >= 4, got {self.samples_per_slot}")
        if self.n_slots < 1:
            raise ValueError(f"n_slots must be >= 1, got {self.n_slots}")

    @property
    def n_samples(self) -> int:
        return self.samples_per_slot * self.n_slots

    @property
    def sample_period(self) -> float:
        return self.slot_duration / self.samples_per_slot

    @property
    def sample_rate(self) -> float:
        return self.samples_per_slot / self.slot_duration

    def with_slots(self, n_slots: int) -> "SlotGrid":
        return SlotGrid(self.slot_duration, self.samples_per_slot, n_slots)


def _frozen(arr, dtype):
    arr = np.array(arr, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class OpticalField:
    samples: np.ndarray
    grid: SlotGrid
    center_frequency: float = DEFAULT_CENTER_FREQUENCY

    def __post_init__(self):
        samples = _frozen(self.samples, np.complex128)
        if samples.ndim != 1 or samples.shape[0] != self.grid.n_samples:
            raise ValueError(
                f"expected {self.grid.n_samples} samples, got shape {samples.shape}"
            )
        if not np.all(np.isfinite(samples)):
            raise ValueError("field amplitudes must be finite")
        object.__setattr__(self, "samples", samples)

    @classmethod
    def vacuum(cls, grid: SlotGrid, center_frequency: float = DEFAULT_CENTER_FREQUENCY):
        return cls(np.zeros(grid.n_samples, dtype=np.complex128), grid, center_frequency)

    def replace(self, samples) -> "OpticalField":
        return OpticalField(samples, self.grid, self.center_frequency)

    @property
    def power(self) -> np.ndarray:
        return np.abs(self.samples) ** 2

    def slot_powers(self) -> np.ndarray:
        """Mean power in every slot (W)."""
        return kernels.slot_energies(self.power, self.grid.samples_per_slot)

    def slot_energies(self) -> np.ndarray:
        """Optical energy in every slot (J)."""
        return self.slot_powers() * self.grid.slot_duration

    def energy(self) -> float:
        return float(np.sum(self.power) * self.grid.sample_period)


@dataclass(frozen=True, eq=False)
class Frame:
    """Alice's symbols together with the slots each one occupies."""

    symbols: np.ndarray
    slots_per_symbol: int
    slot_map: np.ndarray = field(init=False)

    def __post_init__(self):
        if self.slots_per_symbol not in (2, 3):
            raise ValueError(f"slots_per_symbol must be 2 or 3, got {self.slots_per_symbol}")
        symbols = _frozen(np.asarray(self.symbols), np.int8)
        if symbols.ndim != 1 or symbols.size == 0:
            raise ValueError("a frame needs at least one symbol")
        if symbols.min() < 0 or symbols.max() > 2:
            raise ValueError("symbol codes must be 0 (BIT0), 1 (BIT1) or 2 (DECOY)")
        object.__setattr__(self, "symbols", symbols)
        slot_map = np.arange(symbols.size * self.slots_per_symbol).reshape(
            symbols.size, self.slots_per_symbol
        )
        slot_map.setflags(write=False)
        object.__setattr__(self, "slot_map", slot_map)

    @property
    def n_symbols(self) -> int:
        return int(self.symbols.size)

    @property
    def n_slots(self) -> int:
        return self.n_symbols * self.slots_per_symbol


def slot_power(field: OpticalField, slot: int) -> float:
    """Mean of ``|a|**2`` over one slot, in watts."""
    n = field.grid.n_slots
    if not 0 <= slot < n:
        raise IndexError(f"slot {slot} out of range for {n} slots")
    sps = field.grid.samples_per_slot
    seg = field.samples[slot * sps : (slot + 1) * sps]
    return float(np.mean(np.abs(seg) ** 2))


def attenuate(field: OpticalField, loss_db: float) -> OpticalField:
    if loss_db < 0:
        raise ValueError(f"loss_db must be non-negative (no gain), got {loss_db}")
    if loss_db == 0:
        return field
    return field.replace(field.samples * 10.0 ** (-loss_db / 20.0))


def delay(field: OpticalField, n_slots_delay: int) -> OpticalField:
    """Shift the field later by whole slots inside the fixed window."""
    if not 0 <= n_slots_delay < field.grid.n_slots:
        raise ValueError(
            f"delay must be in [0, {field.grid.n_slots}), got {n_slots_delay}"
        )
    if n_slots_delay == 0:
        return field
    shift = n_slots_delay * field.grid.samples_per_slot
    out = np.zeros_like(field.samples)
    out[shift:] = field.samples[:-shift]
    return field.replace(out)


def split(field: OpticalField, transmittance: float) -> tuple[OpticalField, OpticalField]:
    """Lossless beam splitter; returns (transmitted, reflected) ports."""
    if not 0 < transmittance < 1:
        raise ValueError(f"transmittance must lie in (0, 1), got {transmittance}")
    return (
        field.replace(field.samples * np.sqrt(transmittance)),
        field.replace(field.samples * np.sqrt(1.0 - transmittance)),
    )


def superpose(a: OpticalField, b: OpticalField) -> OpticalField:
    if a.grid != b.grid:
        raise ValueError(f"grid mismatch: {a.grid} vs {b.grid}")
    if a.center_frequency != b.center_frequency:
        raise ValueError("center frequencies differ")
    return a.replace(a.samples + b.samples)


def phase_shift(field: OpticalField, radians: float) -> OpticalField:
    return field.replace(field.samples * np.exp(1j * radians))
