"""Pure-Python kernels, used when the compiled extension is unavailable."""
import numpy as np


def onepole_filter(x, b0, b1, a1, initial=0.0):
    """Run ``y[n] = b0*x[n] + b1*x[n-1] - a1*y[n-1]``.

    The filter state starts as if the input had been held at ``initial``
    forever, so a constant input equal to ``initial`` passes unchanged.
    """
    x = np.ascontiguousarray(x, dtype=np.float64)
    out = np.empty_like(x)
    xp = yp = float(initial)
    for i, xi in enumerate(x.tolist()):
        yp = b0 * xi + b1 * xp - a1 * yp
        xp = xi
        out[i] = yp
    return out


def slot_energies(x, samples_per_slot, baseline=0.0):
    x = np.ascontiguousarray(x, dtype=np.float64)
    if samples_per_slot < 1 or x.shape[0] % samples_per_slot:
        raise ValueError(f"{x.shape[0]} samples do not fill slots of {samples_per_slot}")
    n_slots = x.shape[0] // samples_per_slot
    acc = x.reshape(n_slots, samples_per_slot)
    # sequential accumulation order matches the compiled loop
    total = np.zeros(n_slots)
    for k in range(samples_per_slot):
        total += acc[:, k]
    return total / samples_per_slot - baseline
