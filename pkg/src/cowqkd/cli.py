"""Command-line entry point: ``cowqkd <subcommand> [options]``."""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
from dataclasses import replace

from .channel import WeatherCondition
from .encoder import Variant, encode_frame, mean_photon_number, with_variant
from .experiments import (
    Calibration,
    DistanceRangeError,
    ExperimentConfig,
    SweepSpec,
    calibrate_noise_scale,
    compare_variants,
    find_max_distance,
    rows_to_csv,
    sweep_fiber,
    sweep_fso,
    write_atomic,
)
from .pulsetrain import Symbol, slot_power
from .protocol import run_session

log = logging.getLogger("cowqkd")

_SYMBOL_CODES = {"0": Symbol.BIT0, "1": Symbol.BIT1, "d": Symbol.DECOY, "decoy": Symbol.DECOY}


def _common() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--config", default="default",
                   help="JSON config file, or 'default' for built-in settings")
    p.add_argument("--seed", type=int, help="override the config seed")
    p.add_argument("--out", help="write output here instead of standard output")
    p.add_argument("--variant", choices=["2p", "3p"], help="protocol variant")
    p.add_argument("--workers", type=int, help="parallel workers for sweeps")
    p.add_argument("--calibrate-floor", nargs=2, metavar=("VARIANT", "KM"),
                   help="place VARIANT's 0 dB fiber crossing at KM before running")
    p.add_argument("--no-calibrate", action="store_true",
                   help="use the raw detector noise floor")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    parser = argparse.ArgumentParser(prog="cowqkd", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    enc = sub.add_parser("encode", parents=[common], help="dump slot powers of an encoded frame")
    enc.add_argument("--pattern", default="0,1,d,1,0,1",
                     help="comma-separated symbols: 0, 1 or d (decoy)")

    sub.add_parser("session", parents=[common], help="run one session, print the JSON report")

    for name, helptext in (("sweep-fiber", "SNR/QBER/visibility vs fiber length"),
                           ("sweep-fso", "SNR/QBER/visibility vs FSO distance per weather")):
        sp = sub.add_parser(name, parents=[common], help=helptext)
        sp.add_argument("--distances", type=lambda s: [float(x) for x in s.split(",")],
                        help="comma-separated distances in km")
        if name == "sweep-fso":
            sp.add_argument("--weathers", type=lambda s: s.split(","),
                            help="comma-separated weather names, e.g. VeryClear,HeavyFog")

    md = sub.add_parser("max-distance", parents=[common], help="find the 0 dB SNR crossing")
    md.add_argument("--channel", choices=["fiber", "fso"], default="fiber")
    md.add_argument("--weather", default="VeryClear")
    md.add_argument("--threshold", type=float, default=0.0, help="SNR threshold in dB")
    md.add_argument("--k", type=int, help="sessions averaged per probe")

    sub.add_parser("compare", parents=[common], help="2-pulse vs 3-pulse summary (JSON)")
    return parser


def _emit(text: str, out: str | None) -> None:
    if out:
        write_atomic(out, text)
    else:
        sys.stdout.write(text)
        if not text.endswith("\n"):
            sys.stdout.write("\n")


def _prepare(args) -> ExperimentConfig:
    cfg = ExperimentConfig.load(args.config)
    session, sweep = cfg.session, cfg.sweep
    if args.seed is not None:
        session = replace(session, seed=args.seed)
    if args.variant is not None:
        session = replace(session, encoder=with_variant(session.encoder, args.variant))
        sweep = replace(sweep, variants=(Variant.parse(args.variant),))
    if args.workers is not None:
        sweep = replace(sweep, workers=args.workers)
    if args.no_calibrate:
        sweep = replace(sweep, calibrate_floor=None)
    elif args.calibrate_floor:
        v, km = args.calibrate_floor
        sweep = replace(sweep, calibrate_floor=Calibration(v, float(km)))
    return ExperimentConfig(session, sweep)


def _calibrated(cfg: ExperimentConfig):
    cal = cfg.sweep.calibrate_floor
    if cal is None or not cfg.session.apd.noise_enabled:
        return cfg.session
    session = calibrate_noise_scale(cfg.session, cal.variant, cal.distance_km,
                                    cfg.sweep.averaging_sessions)
    log.info("noise scale calibrated to %.6g", session.apd.noise_scale)
    return session


def _cmd_encode(args, cfg):
    symbols = []
    for tok in args.pattern.split(","):
        tok = tok.strip().lower()
        if tok not in _SYMBOL_CODES:
            raise ValueError(f"unknown symbol {tok!r} in pattern")
        symbols.append(_SYMBOL_CODES[tok])
    enc = replace(cfg.session.encoder, randomize_global_phase=False)
    field, frame = encode_frame(symbols, enc)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["slot", "symbol_index", "symbol", "power_w", "mean_photons"])
    for slot in range(frame.n_slots):
        idx = slot // frame.slots_per_symbol
        w.writerow([slot, idx, Symbol(frame.symbols[idx]).name, repr(slot_power(field, slot)),
                    repr(mean_photon_number(field, slot))])
    _emit(buf.getvalue(), args.out)


def _cmd_session(args, cfg):
    _emit(run_session(cfg.session).to_json(), args.out)


def _cmd_sweep(args, cfg):
    kind = "fiber" if args.command == "sweep-fiber" else "fso"
    base = _calibrated(cfg)
    default_d = cfg.sweep.fiber_distances_km if kind == "fiber" else cfg.sweep.fso_distances_km
    spec = SweepSpec(
        base, kind, cfg.sweep.variants, tuple(args.distances or default_d),
        tuple(getattr(args, "weathers", None) or cfg.sweep.weathers), cfg.sweep.workers,
        args.out,
    )
    rows = sweep_fiber(spec) if kind == "fiber" else sweep_fso(spec)
    _emit(rows_to_csv(rows), args.out)


def _cmd_max_distance(args, cfg):
    base = _calibrated(cfg)
    variant = Variant.parse(args.variant) if args.variant else cfg.session.variant
    rng = cfg.sweep.fiber_probe_range_km if args.channel == "fiber" else cfg.sweep.fso_probe_range_km
    weather = WeatherCondition.parse(args.weather) if args.channel == "fso" else None
    res = find_max_distance(base, variant, args.channel, weather, args.threshold,
                            args.k or cfg.sweep.averaging_sessions, rng, cfg.sweep.tolerance_km)
    doc = {"variant": variant.value, "channel": args.channel,
           "weather": weather.key if weather else "fiber", "snr_threshold_db": args.threshold,
           "distance_km": res.distance_km, "bracket_km": list(res.bracket_km),
           "noise_scale": base.apd.noise_scale}
    _emit(json.dumps(doc, indent=2), args.out)


def _cmd_compare(args, cfg):
    summary = compare_variants(_calibrated(cfg), cfg.sweep)
    _emit(json.dumps(summary, indent=2), args.out)


_COMMANDS = {"encode": _cmd_encode, "session": _cmd_session, "sweep-fiber": _cmd_sweep,
             "sweep-fso": _cmd_sweep, "max-distance": _cmd_max_distance,
             "compare": _cmd_compare}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = _prepare(args)
        _COMMANDS[args.command](args, cfg)
    except (ValueError, TypeError, OSError, DistanceRangeError) as exc:
        print(f"cowqkd: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
