"""Source family evaluation, coercivity envelopes, and the gradient-ratio check."""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ergodic_hj import (
    ConfigError,
    ProblemSpec,
    SourceSpec,
    InitialSpec,
    check_h2_ratio,
    coercivity_envelope,
    eval_source,
    h1_certificate,
    h2_certificate,
    torus_half_width,
)
from ergodic_hj.errors import TableRangeError


def test_power_at_origin_is_zero():
    assert eval_source(SourceSpec("power", alpha=2.0), 0.0) == 0.0


def test_power_alpha_15_at_two():
    # |x| = 2 so f = 2^1.5
    spec = SourceSpec("power", alpha=1.5)
    assert eval_source(spec, 2.0, 0.0) == pytest.approx(2.0**1.5, rel=1e-15)
    assert eval_source(spec, 2.0) == pytest.approx(2.8284271247461903, rel=1e-15)


def test_shifted_power_at_unit_diagonal():
    # |x|^2 = 2 at (1,1), plus 3
    spec = SourceSpec("shifted_power", alpha=2.0, shift=3.0)
    assert eval_source(spec, 1.0, 1.0) == pytest.approx(5.0, rel=1e-12)


def test_eval_is_pure_bitwise():
    spec = SourceSpec("power_oscillating", alpha=1.7, osc_amp=0.9)
    x = np.linspace(-5, 7, 401)
    a = eval_source(spec, x)
    b = eval_source(spec, x)
    assert np.array_equal(a, b)


def test_oscillating_source_nonnegative():
    spec = SourceSpec("power_oscillating", alpha=2.0, osc_amp=1.9)
    x = np.linspace(-30, 30, 4001)
    assert np.min(eval_source(spec, x)) >= 0.0


@pytest.mark.parametrize("m", [0.5, 1.0, 2.5, -1.0])
def test_exponent_out_of_range_rejected(m):
    with pytest.raises(ConfigError):
        ProblemSpec(m=m, source=SourceSpec("power", alpha=2.0))


def test_conjugate_exponent():
    p = ProblemSpec(m=1.5, source=SourceSpec("power", alpha=2.0))
    assert p.m_conjugate == pytest.approx(3.0)
    p2 = ProblemSpec(m=2.0, source=SourceSpec("power", alpha=2.0))
    assert p2.m_conjugate == pytest.approx(2.0)
    assert p.m_conjugate >= 2.0 and p2.m_conjugate >= 2.0


def test_oscillation_amplitude_cap():
    with pytest.raises(ConfigError):
        SourceSpec("power_oscillating", alpha=2.0, osc_amp=2.0)


def test_negative_table_rejected():
    with pytest.raises(ConfigError):
        SourceSpec("custom_table", table=(np.array([0.0, 1.0]), np.array([1.0, -0.5])))


def test_table_out_of_range_errors():
    spec = SourceSpec("custom_table", table=(np.array([-1.0, 0.0, 1.0]), np.array([3.0, 1.0, 3.0])))
    with pytest.raises(TableRangeError):
        eval_source(spec, 2.0)


def test_envelope_pure_power():
    # inf of r^2 outside radius r is r^2 itself
    env = coercivity_envelope(SourceSpec("power", alpha=2.0), [1.0, 2.0, 3.0])
    assert env == pytest.approx([1.0, 4.0, 9.0], abs=5e-2)


def test_envelope_oscillating_matches_dense_scan():
    spec = SourceSpec("power_oscillating", alpha=2.0, osc_amp=1.0)
    radii = [1.0, 2.0]
    env = coercivity_envelope(spec, radii)
    # independent dense scan far past the oscillation scale
    rho = np.arange(0.0, 40.0, 1e-3)
    vals = rho**2 * (2.0 + np.sin(rho))
    expected = [float(np.min(vals[rho >= r - 1e-12])) for r in radii]
    assert env == pytest.approx(expected, rel=1e-2)


def test_envelope_monotone_over_radii():
    for spec in (
        SourceSpec("power", alpha=1.0),
        SourceSpec("power_oscillating", alpha=2.0, osc_amp=1.5),
        SourceSpec("shifted_power", alpha=1.3, shift=2.0),
    ):
        env = coercivity_envelope(spec, np.linspace(0.0, 8.0, 33))
        assert np.all(np.diff(env) >= -1e-12)


@settings(max_examples=30, deadline=None)
@given(
    r1=st.floats(min_value=0.0, max_value=6.0),
    dr=st.floats(min_value=0.0, max_value=6.0),
    amp=st.floats(min_value=0.0, max_value=1.9),
)
def test_envelope_monotone_property(r1, dr, amp):
    spec = SourceSpec("power_oscillating", alpha=2.0, osc_amp=amp)
    env = coercivity_envelope(spec, [r1, r1 + dr])
    assert env[1] >= env[0] - 1e-12


def test_bounded_table_tail_fails_h1():
    xs = np.linspace(-10.0, 10.0, 201)
    vals = np.minimum(xs**2, 4.0)  # plateaus: not coercive
    spec = SourceSpec("custom_table", table=(xs, vals))
    cert = h1_certificate(spec, radii=np.linspace(0.5, 9.0, 18))
    assert not cert["plausible"]


def test_h1_passes_for_powers():
    cert = h1_certificate(SourceSpec("power", alpha=2.0))
    assert cert["plausible"] and cert["monotone"]


def test_h2_ratio_power_alpha2_m2():
    # |Df| = 2r and f = r^2, so ratio = (2r)^(1/3) / r
    ratios = check_h2_ratio(SourceSpec("power", alpha=2.0), 2.0, [10.0, 100.0])
    expected = [(2 * 10.0) ** (1 / 3) / 10.0, (2 * 100.0) ** (1 / 3) / 100.0]
    assert ratios == pytest.approx(expected, rel=1e-12)
    assert ratios[1] < ratios[0]


@pytest.mark.parametrize("m", [1.2, 1.5, 2.0])
def test_h2_ratio_exponent_matches_closed_form(m):
    # for f = |x|^alpha the ratio scales like r^((alpha-1)/(2m-1) - alpha/m)
    alpha = m
    radii = np.geomspace(10.0, 1000.0, 12)
    ratios = check_h2_ratio(SourceSpec("power", alpha=alpha), m, radii)
    slope = np.polyfit(np.log(radii), np.log(ratios), 1)[0]
    expected = (alpha - 1.0) / (2.0 * m - 1.0) - alpha / m
    assert slope == pytest.approx(expected, abs=0.05)
    assert expected < 0.0


def test_h2_bump_over_constant_ratio_vanishes():
    # f bounded below by a constant with Df -> 0: ratio tends to zero
    xs = np.linspace(-20.0, 20.0, 2001)
    vals = 5.0 + np.exp(-(xs**2))
    spec = SourceSpec("custom_table", table=(xs, vals))
    ratios = check_h2_ratio(spec, 1.5, [5.0, 10.0, 18.0])
    assert np.all(np.diff(ratios) <= 1e-9)
    assert ratios[-1] < 1e-2


def test_h2_certificate_plausible_for_powers():
    cert = h2_certificate(SourceSpec("power", alpha=2.0), 2.0)
    assert cert["plausible"]


def test_h2_skips_zero_source_points():
    cert = h2_certificate(SourceSpec("power", alpha=2.0), 2.0, radii=[0.0, 1.0, 2.0, 4.0, 8.0])
    assert cert["skipped"] == 1  # f(0) = 0 has no defined ratio


def test_torus_half_width_power2_cutoff4():
    # r^2 >= 4 iff r >= 2
    assert torus_half_width(SourceSpec("power", alpha=2.0), 4.0) == pytest.approx(2.0)


def test_torus_half_width_power1_cutoff10():
    assert torus_half_width(SourceSpec("power", alpha=1.0), 10.0) == pytest.approx(10.0)


def test_torus_half_width_oscillating():
    spec = SourceSpec("power_oscillating", alpha=2.0, osc_amp=1.0)
    S = torus_half_width(spec, 4.0)
    # S is the rounded-up first radius past which r^2(2+sin r) stays >= 4
    rho = np.arange(0.0, 30.0, 1e-3)
    vals = rho**2 * (2.0 + np.sin(rho))
    below = rho[vals < 4.0]
    s_raw = float(below.max()) if below.size else 0.0
    assert S >= s_raw - 1e-9
    assert S - s_raw <= 0.26  # rounding to the next quarter unit
    assert abs(S / 0.25 - round(S / 0.25)) < 1e-9


def test_initial_families():
    zero = InitialSpec("zero")
    bowl = InitialSpec("quadratic_bowl", amplitude=0.5)
    bump = InitialSpec("bump", amplitude=1.0, width=1.0)
    from ergodic_hj.problem import eval_initial

    x = np.array([-2.0, 0.0, 2.0])
    assert np.all(eval_initial(zero, x) == 0.0)
    assert eval_initial(bowl, x) == pytest.approx([2.0, 0.0, 2.0])
    vals = eval_initial(bump, x)
    assert vals[1] == pytest.approx(1.0)
    assert np.all(vals >= 0.0)
