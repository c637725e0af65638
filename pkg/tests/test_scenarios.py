import numpy as np
import pytest

from cascpath.rts79 import rts79_hourly_profile, rts79_wind_config
from cascpath.scenarios import (
    ScenarioError,
    WindModelConfig,
    empirical_correlation,
    export_scenarios,
    generate_scenarios,
    import_scenarios,
    power_curve_output,
)


def _flat_profile(n=24):
    return np.full(n, 0.8)


def _config(n_farms, corr=None, ar=0.5, shape=2.0, scale=8.0):
    if corr is None:
        corr = np.eye(n_farms)
    return WindModelConfig(
        correlation=corr,
        weibull_shape=np.full(n_farms, shape),
        weibull_scale=np.full(n_farms, scale),
        ar_coefficient=ar,
        diurnal_profile=np.ones(24),
    )


def test_reproducible(rts79_wind):
    cfg = rts79_wind_config()
    a = generate_scenarios(rts79_wind, cfg, _flat_profile(), 50, seed=3)
    b = generate_scenarios(rts79_wind, cfg, _flat_profile(), 50, seed=3)
    for sa, sb in zip(a, b):
        assert np.array_equal(sa.wind_output, sb.wind_output)
        assert np.array_equal(sa.load, sb.load)
    c = generate_scenarios(rts79_wind, cfg, _flat_profile(), 50, seed=4)
    assert not all(
        np.array_equal(sa.wind_output, sc.wind_output) for sa, sc in zip(a, c)
    )


def test_wind_bounds(rts79_wind):
    cfg = rts79_wind_config()
    scenarios = generate_scenarios(rts79_wind, cfg, _flat_profile(), 500, seed=1)
    caps = rts79_wind.arr.gen_pmax[rts79_wind.arr.gen_is_wind]
    for s in scenarios:
        assert np.all(s.wind_output >= 0.0)
        assert np.all(s.wind_output <= caps + 1e-12)


def test_power_curve_regions():
    """Exactly 0 below cut-in and at/above cut-out, exactly p_max at rated."""
    cfg = _config(1)
    pmax = np.array([100.0])
    speeds = np.array([0.0, 2.99, 3.0, 7.0, 11.99, 12.0, 20.0, 24.99, 25.0, 30.0])
    out = power_curve_output(speeds, pmax, cfg)
    assert out[0] == 0.0 and out[1] == 0.0
    assert out[2] == 0.0  # cubic ramp starts at zero output
    assert 0.0 < out[3] < 100.0
    assert out[5] == 100.0 and out[6] == 100.0 and out[7] == 100.0
    assert out[8] == 0.0 and out[9] == 0.0
    # monotone on the ramp
    ramp = power_curve_output(np.linspace(3, 12, 50), pmax, cfg)
    assert np.all(np.diff(ramp) >= 0)


def test_zero_wind_case(rts79):
    scenarios = generate_scenarios(rts79, None, _flat_profile(), 10, seed=1)
    assert all(s.wind_output.size == 0 for s in scenarios)


def test_perfect_correlation_identical_series():
    cfg = _config(2, corr=np.array([[1.0, 1.0], [1.0, 1.0]]))
    from cascpath.casedata import Bus, CaseData, Generator, Line

    case = CaseData(
        name="w2",
        buses=(Bus(1, True, 0.0), Bus(2, False, 50.0)),
        lines=(Line(1, 1, 2, 0.1, 100.0),),
        generators=(
            Generator(1, 1, 100.0, 0.0, 0.0, "wind"),
            Generator(2, 2, 100.0, 0.0, 0.0, "wind"),
            Generator(3, 1, 100.0, 10.0),
        ),
    )
    scenarios = generate_scenarios(case, cfg, _flat_profile(), 100, seed=5)
    for s in scenarios:
        assert s.wind_output[0] == pytest.approx(s.wind_output[1], abs=1e-12)
    corr = empirical_correlation(scenarios)
    assert corr[0, 1] == pytest.approx(1.0, abs=0.02)


def test_empirical_correlation_tolerances(rts79_wind):
    """Monte Carlo check of the latent cross-farm correlation structure."""
    n = 8760
    # independent farms: off-diagonal within +-0.05 of zero
    cfg0 = _config(5)
    s0 = generate_scenarios(rts79_wind, cfg0, _flat_profile(), n, seed=11)
    c0 = empirical_correlation(s0)
    off = c0[~np.eye(5, dtype=bool)]
    assert np.abs(off).max() < 0.05
    # grouped config: within-region pairs near 0.6
    cfg6 = rts79_wind_config(ar_coefficient=0.5)
    s6 = generate_scenarios(rts79_wind, cfg6, _flat_profile(), n, seed=12)
    c6 = empirical_correlation(s6)
    for i, j in [(0, 1), (0, 2), (1, 2), (3, 4)]:
        assert c6[i, j] == pytest.approx(0.6, abs=0.05)
    for i, j in [(0, 3), (1, 4), (2, 3)]:
        assert c6[i, j] == pytest.approx(0.2, abs=0.05)


def test_empirical_correlation_errors(rts79_wind):
    cfg = rts79_wind_config()
    scenarios = generate_scenarios(rts79_wind, cfg, _flat_profile(), 5, seed=1)
    with pytest.raises(ScenarioError):
        empirical_correlation(scenarios[:1])


def test_load_scaling_linear(rts79):
    """Scaling peak load scales every bus load by the same factor."""
    import dataclasses

    base = generate_scenarios(rts79, None, _flat_profile(), 5, seed=1)
    doubled_case = dataclasses.replace(rts79, peak_load=2 * rts79.peak_load)
    doubled = generate_scenarios(doubled_case, None, _flat_profile(), 5, seed=1)
    for a, b in zip(base, doubled):
        assert np.allclose(2 * a.load, b.load)


def test_invalid_configs():
    with pytest.raises(ScenarioError, match="positive semidefinite"):
        _config(2, corr=np.array([[1.0, 2.0], [2.0, 1.0]]))
    with pytest.raises(ScenarioError, match="unit diagonal"):
        WindModelConfig(
            correlation=np.array([[2.0, 0.0], [0.0, 2.0]]),
            weibull_shape=np.full(2, 2.0),
            weibull_scale=np.full(2, 8.0),
        )
    with pytest.raises(ScenarioError, match="cut_in"):
        WindModelConfig(
            correlation=np.eye(1),
            weibull_shape=[2.0],
            weibull_scale=[8.0],
            cut_in=13.0,
            rated=12.0,
        )
    with pytest.raises(ScenarioError, match="ar_coefficient"):
        _config(1, ar=1.0)


def test_export_import_roundtrip(tmp_path, rts79_wind):
    cfg = rts79_wind_config()
    scenarios = generate_scenarios(rts79_wind, cfg, _flat_profile(), 20, seed=2)
    path = tmp_path / "scen.txt"
    export_scenarios(scenarios, path)
    back = import_scenarios(path)
    assert len(back) == 20
    for a, b in zip(scenarios, back):
        assert a.index == b.index
        assert np.array_equal(a.wind_output, b.wind_output)
        assert np.array_equal(a.load, b.load)
    # latent series is not exported; correlation helper says so
    with pytest.raises(ScenarioError, match="latent"):
        empirical_correlation(back)


def test_rts79_profile_shape():
    prof = rts79_hourly_profile()
    assert prof.shape == (8760,)
    assert prof.max() == pytest.approx(1.0)
    assert prof.min() > 0.25
