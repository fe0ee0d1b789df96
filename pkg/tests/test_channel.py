import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cowqkd.channel import (
    FiberParams,
    FsoParams,
    WeatherCondition,
    apply_channel,
    channel_from_dict,
    channel_to_dict,
    fiber_attenuation_from_powers,
    fiber_transmission,
    fso_atmospheric_transmission,
    fso_geometric_loss,
    fso_total_transmission,
    weather_table,
)
from cowqkd.encoder import EncoderConfig, encode_frame, generate_symbols, SymbolSource

TABLE = {"Very Clear": 0.4, "Clear": 0.57, "Light Haze": 1.5, "Haze": 3.8, "Light Rain": 6.27,
         "Moderate Rain": 9.64, "Heavy Rain": 19.28, "Light Fog": 18.0, "Moderate Fog": 28.9,
         "Heavy Fog": 75.0}


def test_weather_table_matches_source():
    assert weather_table() == TABLE
    assert list(weather_table()) == [w.value for w in WeatherCondition]
    assert len(WeatherCondition) == 10


def test_fiber_transmission_examples():
    assert fiber_transmission(0.2, 50) == pytest.approx(0.1, abs=1e-12)
    assert fiber_transmission(0.35, 0) == 1.0
    assert fiber_transmission(0.2, 120) == pytest.approx(3.981071705534973e-3, rel=1e-12)
    with pytest.raises(ValueError):
        fiber_transmission(-0.1, 10)


def test_fiber_attenuation_from_powers_examples():
    assert fiber_attenuation_from_powers(1.0, 0.1, 50) == pytest.approx(0.2)
    assert fiber_attenuation_from_powers(2.0, 2.0, 10) == 0.0
    for args in ((0, 0.1, 1), (1, 0, 1), (1, 0.5, 0), (0.5, 1.0, 3)):
        with pytest.raises(ValueError):
            fiber_attenuation_from_powers(*args)


@settings(max_examples=200)
@given(st.floats(0.0, 5.0), st.floats(0.1, 200.0))
def test_fiber_round_trip(alpha, length):
    t = fiber_transmission(alpha, length)
    rec = fiber_attenuation_from_powers(1.0, t, length)
    assert fiber_transmission(rec, length) == pytest.approx(t, rel=1e-9)
    assert rec == pytest.approx(alpha, rel=1e-9, abs=1e-12)


@settings(max_examples=100)
@given(st.floats(0.0, 1.0), st.floats(0.0, 100.0), st.floats(0.0, 100.0))
def test_fiber_transmission_multiplicative(alpha, l1, l2):
    assert fiber_transmission(alpha, l1 + l2) == pytest.approx(
        fiber_transmission(alpha, l1) * fiber_transmission(alpha, l2), rel=1e-12)


def test_geometric_loss_examples():
    assert fso_geometric_loss(0.05, 0.2, 0.002, 0.0) == 1.0
    assert fso_geometric_loss(0.05, 0.2, 0.002, 1000.0) == pytest.approx(0.0975609756097561,
                                                                         abs=1e-12)
    values = [fso_geometric_loss(0.05, 0.2, 0.002, L) for L in np.linspace(100, 1e4, 50)]
    assert all(a > b for a, b in zip(values, values[1:]))


def test_atmospheric_examples():
    assert fso_atmospheric_transmission("VeryClear", 10) == pytest.approx(0.3981071705534972)
    assert fso_atmospheric_transmission(WeatherCondition.HAZE, 0) == 1.0
    assert fso_atmospheric_transmission("HeavyFog", 1) == pytest.approx(3.1622776601683795e-8)


def test_weather_monotonicity():
    ordered = sorted(WeatherCondition, key=lambda w: w.attenuation_db_per_km)
    t = [fso_atmospheric_transmission(w, 2.0) for w in ordered]
    assert all(a > b for a, b in zip(t, t[1:]))


def test_total_transmission_examples():
    assert fso_total_transmission(FsoParams(length_km=0)) == 1.0
    assert fso_total_transmission(FsoParams(length_km=1)) == pytest.approx(0.0889766672542351,
                                                                           rel=1e-12)
    t = [fso_total_transmission(FsoParams(length_km=L, weather="Haze"))
         for L in (0.1, 0.5, 1, 2, 5, 10)]
    assert all(a > b for a, b in zip(t, t[1:]))


def _alice(n=40, variant="2p"):
    cfg = EncoderConfig(variant=variant)
    return encode_frame(generate_symbols(SymbolSource(3, 0.2), n), cfg,
                        np.random.default_rng(0))[0]


def test_apply_channel_examples():
    field = _alice()
    assert np.array_equal(apply_channel(field, FiberParams(length_km=0)).samples, field.samples)
    out = apply_channel(field, FiberParams(length_km=50))
    np.testing.assert_allclose(out.slot_powers(), 0.1 * field.slot_powers(), rtol=1e-5,
                               atol=1e-9 * field.slot_powers().max())
    out = apply_channel(field, FsoParams(length_km=1))
    np.testing.assert_allclose(out.slot_powers(), 0.0889766672542351 * field.slot_powers(),
                               rtol=1e-12)


@pytest.mark.parametrize("model", [FiberParams(length_km=120), FiberParams(length_km=7.5),
                                   FsoParams(length_km=3, weather="LightRain")])
def test_apply_channel_energy_budget(model):
    field = _alice(variant="3p")
    out = apply_channel(field, model)
    assert out.energy() == pytest.approx(field.energy() * model.transmission(), rel=1e-6)
    assert out.energy() <= field.energy()


def test_dispersion_is_negligible_at_ns_slots():
    # ~0.16 ps of spread at 120 km against a 62.5 ps sample period
    assert FiberParams(length_km=120).broadening_sigma() < 1e-12


def test_channel_dict_round_trip():
    for model in (FiberParams(length_km=12), FsoParams(length_km=2, weather="HeavyRain")):
        assert channel_from_dict(channel_to_dict(model)) == model
    with pytest.raises(ValueError):
        channel_from_dict({"kind": "fiber", "bogus": 1})
    with pytest.raises(ValueError):
        channel_from_dict({"kind": "satellite"})
