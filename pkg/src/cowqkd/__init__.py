"""Slot-resolved simulator of 2-pulse and 3-pulse coherent one-way QKD."""
from .channel import FiberParams, FsoParams, WeatherCondition, apply_channel
from .encoder import EncoderConfig, SymbolSource, Variant, encode_frame, generate_symbols
from .kernels import BACKEND as KERNEL_BACKEND
from .protocol import SessionConfig, SessionReport, run_session
from .pulsetrain import Frame, OpticalField, SlotGrid, Symbol
from .receiver import ApdParams, FilterParams

__version__ = "0.1.0"

__all__ = [
    "ApdParams", "EncoderConfig", "FiberParams", "FilterParams", "Frame", "FsoParams",
    "KERNEL_BACKEND", "OpticalField", "SessionConfig", "SessionReport", "SlotGrid",
    "Symbol", "SymbolSource", "Variant", "WeatherCondition", "apply_channel",
    "encode_frame", "generate_symbols", "run_session",
]
