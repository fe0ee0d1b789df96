"""End-to-end COW sessions: Alice -> channel -> Bob, sifting and QBER."""
from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace

import numpy as np

from .channel import FiberParams, FsoParams, apply_channel, channel_from_dict, channel_to_dict
from .encoder import EncoderConfig, SymbolSource, Variant, encode_frame, generate_symbols
from .pulsetrain import Frame, OpticalField, Symbol
from .receiver import (
    ApdParams,
    FilterParams,
    InsufficientStatistics,
    MonitoringStats,
    SnrAccumulator,
    ThresholdPolicy,
    apd_photocurrent,
    bessel_lowpass,
    count_photons,
    decode_data_line,
    detect_clicks,
    monitoring_stats,
    mzi,
    slot_occupancy,
    snr_components,
    tap_split,
    visibility_from_stats,
)

DETECTION_MODES = ("analog", "photon_counting")


@dataclass(frozen=True)
class SessionConfig:
    encoder: EncoderConfig = field(default_factory=EncoderConfig)
    channel: FiberParams | FsoParams = field(default_factory=FiberParams)
    apd: ApdParams = field(default_factory=ApdParams)
    filter: FilterParams = field(default_factory=FilterParams)
    n_symbols: int = 10_000
    seed: int = 0
    detection_mode: str = "photon_counting"
    eve_enabled: bool = False
    frame_symbols: int = 1000
    # analog clicks: threshold = max(n_sigma * vacuum spread, floor * single-pulse level)
    threshold_n_sigma: float = 5.0
    threshold_floor: float = 0.3
    threshold_absolute: float | None = None

    def __post_init__(self):
        if self.n_symbols < 1:
            raise ValueError("n_symbols must be >= 1")
        if self.frame_symbols < 1:
            raise ValueError("frame_symbols must be >= 1")
        if self.detection_mode not in DETECTION_MODES:
            raise ValueError(f"detection_mode must be one of {DETECTION_MODES}")

    @property
    def variant(self) -> Variant:
        return self.encoder.variant

    def to_dict(self) -> dict:
        out = {}
        for f in fields(self):
            value = getattr(self, f.name)
            if f.name == "channel":
                value = channel_to_dict(value)
            elif f.name == "encoder":
                value = {k: (v.value if isinstance(v, Variant) else v)
                         for k, v in asdict(value).items()}
            elif hasattr(value, "__dataclass_fields__"):
                value = asdict(value)
            out[f.name] = value
        return out

    @classmethod
    def from_dict(cls, d: dict) -> "SessionConfig":
        d = dict(d)
        unknown = set(d) - {f.name for f in fields(cls)}
        if unknown:
            raise ValueError(f"unknown session keys: {sorted(unknown)}")
        nested = {"encoder": EncoderConfig, "apd": ApdParams, "filter": FilterParams}
        for key, sub in nested.items():
            if key in d:
                _reject_unknown(d[key], sub, key)
                d[key] = sub(**d[key])
        if "channel" in d:
            d["channel"] = channel_from_dict(d["channel"])
        return cls(**d)


def _reject_unknown(d, cls, where):
    if not isinstance(d, dict):
        raise ValueError(f"{where} must be an object")
    unknown = set(d) - {f.name for f in fields(cls)}
    if unknown:
        raise ValueError(f"unknown {where} keys: {sorted(unknown)}")


@dataclass(frozen=True, eq=False)
class SiftedKey:
    alice_bits: np.ndarray
    bob_bits: np.ndarray

    def __post_init__(self):
        if len(self.alice_bits) != len(self.bob_bits):
            raise ValueError("sifted key halves differ in length")

    def __len__(self):
        return len(self.alice_bits)


def sift(alice_symbols, bob_decodings) -> SiftedKey:
    """Keep unambiguous detections of non-decoy symbols."""
    alice = np.asarray(alice_symbols, dtype=np.int8)
    bob = np.asarray(bob_decodings, dtype=np.int8)
    if alice.shape != bob.shape:
        raise ValueError("symbol and decoding sequences are not aligned")
    keep = ((bob == 0) | (bob == 1)) & (alice != Symbol.DECOY)
    return SiftedKey(alice[keep].copy(), bob[keep].copy())


def qber(key: SiftedKey) -> float:
    if len(key) == 0:
        raise InsufficientStatistics("empty sifted key")
    return float(np.count_nonzero(key.alice_bits != key.bob_bits)) / len(key)


def eve_intercept_resend(field: OpticalField, frame: Frame | None, eve_seed) -> OpticalField:
    """Resend every non-empty slot with its power intact and a fresh random phase."""
    rng = np.random.default_rng(eve_seed)
    grid = field.grid
    phases = rng.uniform(0, 2 * np.pi, grid.n_slots)
    occupied = field.slot_powers() > 0
    rot = np.where(occupied, np.exp(1j * phases), 1.0)
    return field.replace(field.samples * np.repeat(rot, grid.samples_per_slot))


@dataclass(frozen=True)
class SessionReport:
    qber: float | None
    visibility: float | None
    snr_db: float
    raw_detections: int
    sifted_length: int
    seed: int
    variant: str
    n_symbols: int
    detection_mode: str
    eve_enabled: bool
    channel: str
    distance_km: float
    weather: str
    n_opportunities: int
    dm1_clicks: int
    dm2_clicks: int
    qber_errors: int

    def to_dict(self) -> dict:
        d = asdict(self)
        if math.isinf(self.snr_db):
            d["snr_db"] = "inf" if self.snr_db > 0 else "-inf"
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


@dataclass(frozen=True)
class _FrameResult:
    symbols: np.ndarray
    decodings: np.ndarray
    monitor: MonitoringStats
    snr: SnrAccumulator


@dataclass(frozen=True)
class _Thresholds:
    data: ThresholdPolicy
    monitor: ThresholdPolicy


def _frame_streams(seed: int, index: int):
    """Independent generators for one frame, derived from (session seed, frame index)."""
    ss = np.random.SeedSequence([seed, index])
    phase, eve, n_data, n_dm1, n_dm2, clicks = ss.spawn(6)
    return {"phase": np.random.default_rng(phase), "eve": eve, "data": n_data,
            "dm1": n_dm1, "dm2": n_dm2, "clicks": np.random.default_rng(clicks)}


def _filtered(field, config, seed, noise=True):
    apd = config.apd if noise else replace(config.apd, noise_enabled=False)
    wave = apd_photocurrent(field, apd, seed)
    return bessel_lowpass(wave, config.filter, initial=config.apd.dark_current)


def _single_pulse_level(config: SessionConfig, line: str) -> float:
    """Noise-free filtered slot level of one alpha pulse reaching a detector."""
    enc = replace(config.encoder, randomize_global_phase=False, linewidth_hz=0.0)
    field, frame = encode_frame([Symbol.BIT1], enc)
    field = apply_channel(field, config.channel)
    data, monitor = tap_split(field, config.variant)
    target = data if line == "data" else monitor
    wave = _filtered(target, config, None, noise=False)
    rec = detect_clicks(wave, frame, 0.0, baseline=config.apd.dark_current)
    return float(rec.energies[0])


def _vacuum_sigma(config: SessionConfig) -> float:
    """Spread of slot levels on a noise-only calibration run."""
    if not config.apd.noise_enabled:
        return 0.0
    n = min(config.frame_symbols, config.n_symbols)
    enc = replace(config.encoder, randomize_global_phase=False)
    field = OpticalField.vacuum(enc.grid(n * enc.variant.slots_per_symbol),
                                enc.center_frequency)
    seed = np.random.SeedSequence([config.seed, 0x5EED])
    wave = _filtered(field, config, seed)
    frame = Frame(np.zeros(n, dtype=np.int8), enc.variant.slots_per_symbol)
    rec = detect_clicks(wave, frame, 0.0, baseline=config.apd.dark_current)
    return float(np.std(rec.energies))


def _thresholds(config: SessionConfig) -> _Thresholds:
    sigma = _vacuum_sigma(config)
    def policy(line):
        return ThresholdPolicy(n_sigma=config.threshold_n_sigma, sigma=sigma,
                               floor=config.threshold_floor * _single_pulse_level(config, line),
                               absolute=config.threshold_absolute)
    return _Thresholds(policy("data"), policy("monitor"))


def _run_frame(config: SessionConfig, symbols: np.ndarray, index: int,
               thresholds: _Thresholds | None) -> _FrameResult:
    streams = _frame_streams(config.seed, index)
    field, frame = encode_frame(symbols, config.encoder, streams["phase"])
    if config.eve_enabled:
        field = eve_intercept_resend(field, frame, streams["eve"])
    field = apply_channel(field, config.channel)
    data, monitor = tap_split(field, config.variant)
    to_dm1, to_dm2 = mzi(monitor)
    dark = config.apd.dark_current

    noisy = None
    if config.apd.noise_enabled:
        noisy = _filtered(data, config, streams["data"])
        reference = _filtered(data, config, None, noise=False)
        snr = snr_components(noisy, frame, reference, baseline=dark)
    else:
        snr = SnrAccumulator(n_signal=int(slot_occupancy(frame).sum()))

    if config.detection_mode == "analog":
        if noisy is None:
            noisy = _filtered(data, config, None, noise=False)
        dd = detect_clicks(noisy, frame, thresholds.data, dark, "Dd")
        dm1 = detect_clicks(_filtered(to_dm1, config, streams["dm1"]), frame,
                            thresholds.monitor, dark, "DM1")
        dm2 = detect_clicks(_filtered(to_dm2, config, streams["dm2"]), frame,
                            thresholds.monitor, dark, "DM2")
    else:
        rng = streams["clicks"]
        dd = count_photons(data, config.apd, rng, "Dd")
        dm1 = count_photons(to_dm1, config.apd, rng, "DM1")
        dm2 = count_photons(to_dm2, config.apd, rng, "DM2")

    return _FrameResult(frame.symbols, decode_data_line(dd, frame),
                        monitoring_stats(dm1, dm2, frame), snr)


def run_session(config: SessionConfig, workers: int = 1) -> SessionReport:
    """Run one seeded session; the report does not depend on ``workers``."""
    symbols = generate_symbols(
        SymbolSource(np.random.SeedSequence([config.seed, 0x5A]).generate_state(1)[0],
                     config.encoder.decoy_fraction),
        config.n_symbols,
    )
    chunks = [symbols[i:i + config.frame_symbols]
              for i in range(0, config.n_symbols, config.frame_symbols)]
    thresholds = _thresholds(config) if config.detection_mode == "analog" else None

    def job(item):
        i, chunk = item
        return _run_frame(config, chunk, i, thresholds)

    if workers > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(job, enumerate(chunks)))
    else:
        results = [job(item) for item in enumerate(chunks)]

    alice = np.concatenate([r.symbols for r in results])
    bob = np.concatenate([r.decodings for r in results])
    stats = MonitoringStats(0, 0, 0)
    snr = SnrAccumulator()
    for r in results:
        stats = stats + r.monitor
        snr = snr + r.snr
    key = sift(alice, bob)
    try:
        q = qber(key)
    except InsufficientStatistics:
        q = None
    try:
        vis = visibility_from_stats(stats)
    except InsufficientStatistics:
        vis = None

    ch = config.channel
    return SessionReport(
        qber=q,
        visibility=vis,
        snr_db=float(snr.snr_db()),
        raw_detections=int(np.count_nonzero(bob != -1)),
        sifted_length=len(key),
        seed=config.seed,
        variant=config.variant.value,
        n_symbols=config.n_symbols,
        detection_mode=config.detection_mode,
        eve_enabled=config.eve_enabled,
        channel=ch.kind,
        distance_km=float(ch.length_km),
        weather=ch.weather.key if isinstance(ch, FsoParams) else "fiber",
        n_opportunities=stats.n_opportunities,
        dm1_clicks=stats.n_clicks_dm1,
        dm2_clicks=stats.n_clicks_dm2,
        qber_errors=int(np.count_nonzero(key.alice_bits != key.bob_bits)),
    )


__all__ = [
    "DETECTION_MODES", "SessionConfig", "SessionReport", "SiftedKey",
    "eve_intercept_resend", "qber", "run_session", "sift",
]
