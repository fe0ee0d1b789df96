"""Distance and weather sweeps, noise-floor calibration and maximum-distance search."""
from __future__ import annotations

import csv
import io
import json
import logging
import math
import os
import tempfile
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields, replace

import numpy as np

from .channel import FiberParams, FsoParams, WeatherCondition
from .encoder import Variant, with_variant
from .protocol import SessionConfig, run_session

log = logging.getLogger(__name__)

CSV_HEADER = ("variant", "channel", "weather", "distance_km", "snr_db", "qber",
              "visibility", "seed")

DEFAULT_FIBER_DISTANCES = tuple(float(d) for d in range(10, 121, 10))
DEFAULT_FSO_DISTANCES = tuple(0.5 * i for i in range(1, 11))
ALL_WEATHERS = tuple(WeatherCondition)


class DistanceRangeError(ValueError):
    """The SNR curve does not cross the threshold inside the probe range."""


@dataclass(frozen=True)
class Calibration:
    variant: Variant = Variant.TWO_PULSE
    distance_km: float = 120.0

    def __post_init__(self):
        object.__setattr__(self, "variant", Variant.parse(self.variant))
        if self.distance_km <= 0:
            raise ValueError("calibration distance must be positive")


@dataclass(frozen=True)
class SweepSettings:
    """The ``sweep`` block of an experiment config file."""

    variants: tuple = (Variant.TWO_PULSE, Variant.THREE_PULSE)
    fiber_distances_km: tuple = DEFAULT_FIBER_DISTANCES
    fso_distances_km: tuple = DEFAULT_FSO_DISTANCES
    weathers: tuple = ALL_WEATHERS
    workers: int = 1
    averaging_sessions: int = 8
    calibrate_floor: Calibration | None = field(default_factory=Calibration)
    fiber_probe_range_km: tuple = (1.0, 300.0)
    fso_probe_range_km: tuple = (0.01, 60.0)
    compare_fso_distance_km: float = 1.0
    tolerance_km: float = 0.5

    def __post_init__(self):
        object.__setattr__(self, "variants", tuple(Variant.parse(v) for v in self.variants))
        object.__setattr__(self, "weathers",
                           tuple(WeatherCondition.parse(w) for w in self.weathers))
        for name in ("fiber_distances_km", "fso_distances_km",
                     "fiber_probe_range_km", "fso_probe_range_km"):
            object.__setattr__(self, name, tuple(float(x) for x in getattr(self, name)))
        if isinstance(self.calibrate_floor, dict):
            object.__setattr__(self, "calibrate_floor", Calibration(**self.calibrate_floor))
        if self.workers < 1 or self.averaging_sessions < 1:
            raise ValueError("workers and averaging_sessions must be >= 1")


@dataclass(frozen=True)
class ExperimentConfig:
    session: SessionConfig = field(default_factory=SessionConfig)
    sweep: SweepSettings = field(default_factory=SweepSettings)

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        d = dict(d)
        sweep = d.pop("sweep", {})
        if not isinstance(sweep, dict):
            raise ValueError("sweep must be an object")
        unknown = set(sweep) - {f.name for f in fields(SweepSettings)}
        if unknown:
            raise ValueError(f"unknown sweep keys: {sorted(unknown)}")
        return cls(SessionConfig.from_dict(d), SweepSettings(**sweep))

    @classmethod
    def load(cls, path: str | None) -> "ExperimentConfig":
        if path in (None, "default"):
            return cls()
        with open(path) as fh:
            data = json.load(fh)
        if not isinstance(data, dict):
            raise ValueError("config file must hold a JSON object")
        return cls.from_dict(data)


@dataclass(frozen=True)
class SweepSpec:
    base: SessionConfig
    channel: str = "fiber"
    variants: tuple = (Variant.TWO_PULSE, Variant.THREE_PULSE)
    distances_km: tuple = DEFAULT_FIBER_DISTANCES
    weathers: tuple = ALL_WEATHERS
    workers: int = 1
    out: str | None = None

    def __post_init__(self):
        if self.channel not in ("fiber", "fso"):
            raise ValueError(f"channel must be 'fiber' or 'fso', got {self.channel!r}")
        d = np.asarray(self.distances_km, dtype=float)
        if d.size == 0 or np.any(d < 0) or np.any(np.diff(d) <= 0):
            raise ValueError("distances must be non-negative and strictly increasing")
        object.__setattr__(self, "variants", tuple(Variant.parse(v) for v in self.variants))
        object.__setattr__(self, "weathers",
                           tuple(WeatherCondition.parse(w) for w in self.weathers))


@dataclass(frozen=True)
class CsvRow:
    variant: str
    channel: str
    weather: str
    distance_km: float
    snr_db: float | None
    qber: float | None
    visibility: float | None
    seed: int
    status: str = "ok"

    def cells(self) -> list[str]:
        return [self.variant, self.channel, self.weather, _fmt(self.distance_km),
                _fmt(self.snr_db), _fmt(self.qber), _fmt(self.visibility), str(self.seed)]


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, float) and math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return repr(float(x))


def session_at(base: SessionConfig, variant, channel: str, distance_km: float,
               weather=None) -> SessionConfig:
    """``base`` retargeted to one variant and one link length."""
    enc = base.encoder if base.variant is Variant.parse(variant) else with_variant(
        base.encoder, variant)
    if channel == "fiber":
        proto = base.channel if isinstance(base.channel, FiberParams) else FiberParams()
        ch = replace(proto, length_km=float(distance_km))
    else:
        proto = base.channel if isinstance(base.channel, FsoParams) else FsoParams()
        ch = replace(proto, length_km=float(distance_km),
                     weather=proto.weather if weather is None else WeatherCondition.parse(weather))
    return replace(base, encoder=enc, channel=ch)


def _run_cell(config: SessionConfig) -> CsvRow:
    ch = config.channel
    weather = ch.weather.key if isinstance(ch, FsoParams) else "fiber"
    try:
        r = run_session(config)
        return CsvRow(r.variant, r.channel, weather, r.distance_km, r.snr_db, r.qber,
                      r.visibility, r.seed)
    except Exception as exc:  # a failing cell must not abort the sweep
        log.warning("session failed at %s %s %.3f km: %s", config.variant.value, weather,
                    ch.length_km, exc)
        return CsvRow(config.variant.value, ch.kind, weather, float(ch.length_km), None,
                      None, None, config.seed, status=f"error: {exc}")


def _run_cells(configs: list[SessionConfig], workers: int) -> list[CsvRow]:
    if workers > 1 and len(configs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(_run_cell, configs))
    return [_run_cell(c) for c in configs]


def _row_key(row: CsvRow):
    weather_rank = -1 if row.weather == "fiber" else [w.key for w in WeatherCondition].index(
        row.weather)
    return (row.variant, weather_rank, row.distance_km)


def sweep_fiber(spec: SweepSpec) -> list[CsvRow]:
    configs = [session_at(spec.base, v, "fiber", d)
               for v in spec.variants for d in spec.distances_km]
    return sorted(_run_cells(configs, spec.workers), key=_row_key)


def sweep_fso(spec: SweepSpec) -> list[CsvRow]:
    configs = [session_at(spec.base, v, "fso", d, w)
               for v in spec.variants for w in spec.weathers for d in spec.distances_km]
    return sorted(_run_cells(configs, spec.workers), key=_row_key)


def rows_to_csv(rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for row in rows:
        writer.writerow(row.cells())
    return buf.getvalue()


def write_atomic(path: str, text: str) -> None:
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def derived_seeds(seed: int, k: int) -> list[int]:
    return [int(np.random.SeedSequence([seed, 0xAB, i]).generate_state(1)[0]) for i in range(k)]


def averaged_snr(config: SessionConfig, k: int = 8) -> float:
    """Mean SNR (dB) over ``k`` sessions that differ only in their seed."""
    values = [run_session(replace(config, seed=s)).snr_db for s in derived_seeds(config.seed, k)]
    return float(np.mean(values))


def calibrate_noise_scale(base: SessionConfig, variant, distance_km: float,
                          k: int = 8) -> SessionConfig:
    """Rescale the detector noise so ``variant`` reaches 0 dB SNR at ``distance_km`` of fiber.

    Noise variance scales every noise sample by the same factor, so the
    seed-averaged SNR in dB shifts by exactly ``-10*log10(factor)``.
    """
    if not base.apd.noise_enabled:
        raise ValueError("cannot calibrate a noise floor with noise disabled")
    snr = averaged_snr(session_at(base, variant, "fiber", distance_km), k)
    if not math.isfinite(snr):
        raise ValueError(f"uncalibratable SNR {snr} at {distance_km} km")
    scale = base.apd.noise_scale * 10.0 ** (snr / 10.0)
    return replace(base, apd=replace(base.apd, noise_scale=scale))


@dataclass(frozen=True)
class MaxDistanceResult:
    distance_km: float
    bracket_km: tuple[float, float]
    probes: tuple[tuple[float, float], ...]


def find_max_distance(base: SessionConfig, variant, channel: str = "fiber", weather=None,
                      snr_threshold_db: float = 0.0, k: int = 8,
                      probe_range_km: tuple[float, float] = (1.0, 300.0),
                      tolerance_km: float = 0.5) -> MaxDistanceResult:
    """Bisect the seed-averaged SNR curve for its ``snr_threshold_db`` crossing."""

    def snr_at(d):
        return averaged_snr(session_at(base, variant, channel, d, weather), k)

    lo, hi = map(float, probe_range_km)
    probes = {lo: snr_at(lo)}
    if not math.isfinite(probes[lo]):
        raise DistanceRangeError(
            f"SNR at {lo} km is {probes[lo]}; noise is disabled or the signal vanishes")
    if probes[lo] <= snr_threshold_db:
        raise DistanceRangeError(
            f"SNR {probes[lo]:.2f} dB at {lo} km is already below {snr_threshold_db} dB")
    probes[hi] = snr_at(hi)
    if probes[hi] > snr_threshold_db:
        raise DistanceRangeError(
            f"SNR {probes[hi]:.2f} dB at {hi} km never drops below {snr_threshold_db} dB")
    while hi - lo > tolerance_km:
        mid = 0.5 * (lo + hi)
        probes[mid] = snr_at(mid)
        if probes[mid] > snr_threshold_db:
            lo = mid
        else:
            hi = mid
    ordered = sorted(probes.items())
    values = [v for _, v in ordered]
    if any(b > a for a, b in zip(values, values[1:])):
        raise RuntimeError(f"averaged SNR curve is not monotone over the probes: {ordered}")
    return MaxDistanceResult(0.5 * (lo + hi), (lo, hi), tuple(ordered))


def compare_variants(base: SessionConfig, settings: SweepSettings | None = None) -> dict:
    """Two-pulse vs three-pulse SNR on fiber and on every weather, plus max distances."""
    settings = settings or SweepSettings()
    fiber = sweep_fiber(SweepSpec(base, "fiber", settings.variants, settings.fiber_distances_km,
                                  workers=settings.workers))
    fso = sweep_fso(SweepSpec(base, "fso", settings.variants,
                              (settings.compare_fso_distance_km,), settings.weathers,
                              workers=settings.workers))
    two, three = Variant.TWO_PULSE.value, Variant.THREE_PULSE.value

    def pair(rows, key):
        by = {(r.variant, key(r)): r.snr_db for r in rows}
        out = []
        for (v, cell), snr in by.items():
            if v != two or (three, cell) not in by:
                continue
            s3 = by[(three, cell)]
            delta = None if snr is None or s3 is None else _delta(snr, s3)
            out.append((cell, snr, s3, delta))
        return out

    fiber_cells = [{"distance_km": d, "snr_db_2p": _j(a), "snr_db_3p": _j(b), "delta_db": _j(c)}
                   for d, a, b, c in pair(fiber, lambda r: r.distance_km)]
    fso_cells = [{"weather": w, "distance_km": settings.compare_fso_distance_km,
                  "snr_db_2p": _j(a), "snr_db_3p": _j(b), "delta_db": _j(c)}
                 for w, a, b, c in pair(fso, lambda r: r.weather)]
    deltas = [c["delta_db"] for c in fiber_cells + fso_cells]
    max_dist = {}
    for v in settings.variants:
        try:
            res = find_max_distance(base, v, "fiber", k=settings.averaging_sessions,
                                    probe_range_km=settings.fiber_probe_range_km,
                                    tolerance_km=settings.tolerance_km)
            max_dist[v.value] = res.distance_km
        except (DistanceRangeError, RuntimeError) as exc:
            log.warning("max distance for %s unavailable: %s", v.value, exc)
            max_dist[v.value] = None
    return {
        "seed": base.seed,
        "noise_scale": base.apd.noise_scale,
        "fiber": fiber_cells,
        "fso": fso_cells,
        "max_distance_km": max_dist,
        "all_delta_nonnegative": all(isinstance(d, float) and d >= 0 or d == "inf"
                                     for d in deltas),
    }


def _delta(a: float, b: float) -> float:
    if math.isinf(a) and math.isinf(b) and a == b:
        return 0.0
    return a - b


def _j(x):
    """JSON-safe float: infinities become strings."""
    if isinstance(x, float) and math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return x
