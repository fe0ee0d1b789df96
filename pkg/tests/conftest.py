import numpy as np
import pytest

from cowqkd.pulsetrain import OpticalField, SlotGrid


@pytest.fixture
def grid():
    return SlotGrid(slot_duration=1e-9, samples_per_slot=16, n_slots=8)


def constant_field(grid, amplitude):
    return OpticalField(np.full(grid.n_samples, amplitude, dtype=complex), grid)


def pulse_field(grid, slots, amplitude=1.0):
    samples = np.zeros(grid.n_samples, dtype=complex)
    sps = grid.samples_per_slot
    for s in slots:
        samples[s * sps:(s + 1) * sps] = amplitude
    return OpticalField(samples, grid)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
