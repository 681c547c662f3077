import cmath
import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tepgrid.lines import (
    MILE_KM,
    ConductorSpec,
    TowerGeometry,
    UnitLineParams,
    cascaded_segment_oracle,
    equivalent_pi,
    lumped_distributed_gap,
    thermal_rating,
    unit_parameters,
)

MACAW = ConductorSpec("macaw", 0.026543, 0.0912, 870.0)
H500 = TowerGeometry("h500", ((-12.3, 24.0), (0.0, 24.0), (12.3, 24.0)), 4, 0.45)
TABLE4 = UnitLineParams.from_rlc(0.0228, 0.878, 12.975, 60.0)


def rel(a, b):
    return abs(a - b) / abs(b)


def test_flat_tower_gmd():
    # three phases 12.3 m apart in a row: D, D and 2D
    assert H500.gmd() == pytest.approx((12.3 * 12.3 * 24.6) ** (1 / 3), rel=1e-12)
    assert H500.gmd() == pytest.approx(15.497, abs=5e-4)


def test_macaw_bundle_constants():
    u = unit_parameters(H500, MACAW, 60.0)
    assert u.r_ohm_per_km == pytest.approx(0.0228, abs=1e-12)
    assert rel(u.inductance_mh_per_km(60.0), 0.878) < 0.01
    assert rel(u.capacitance_nf_per_km(60.0), 12.975) < 0.02


def test_single_conductor_resistance_is_unchanged():
    tower = TowerGeometry("t", ((0, 20), (8, 20), (16, 20)), 1, 0.0)
    assert unit_parameters(tower, MACAW, 60.0).r_ohm_per_km == MACAW.resistance_per_km


def test_bundle_radius_of_square_bundle():
    assert H500.bundle_radius() == pytest.approx(0.45 / math.sqrt(2))


@pytest.mark.parametrize("pos", [
    ((0, 20), (0, 20), (10, 20)),
    ((0, 20), (5, 0), (10, 20)),
])
def test_bad_tower_geometry(pos):
    with pytest.raises(ValueError):
        TowerGeometry("bad", pos, 2, 0.4)


def test_phase_relabeling_does_not_change_constants():
    ref = unit_parameters(H500, MACAW, 60.0)
    for perm in itertools.permutations(H500.phase_positions):
        u = unit_parameters(TowerGeometry("p", perm, 4, 0.45), MACAW, 60.0)
        assert u.x_ohm_per_km == pytest.approx(ref.x_ohm_per_km, rel=1e-14)
        assert u.b_siemens_per_km == pytest.approx(ref.b_siemens_per_km, rel=1e-14)


def test_thermal_rating_500kv():
    thermal, rating = thermal_rating(500, MACAW, 4, 0.8)
    assert thermal == pytest.approx(3013.8, abs=0.05)
    assert round(rating) == 2411


def test_thermal_rating_345kv_two_bundle():
    cond = ConductorSpec("c", 0.03, 0.05, 600.0)
    thermal, rating = thermal_rating(345, cond, 2, 1.0)
    assert thermal == pytest.approx(math.sqrt(3) * 345 * 600 * 2 / 1000)
    assert rating == pytest.approx(717.1, abs=0.05)


def test_thermal_rating_linear_in_bundle_count():
    a = thermal_rating(500, MACAW, 2)
    b = thermal_rating(500, MACAW, 4)
    assert b[0] == pytest.approx(2 * a[0]) and b[1] == pytest.approx(2 * a[1])


def test_short_line_limit():
    pi = equivalent_pi(TABLE4, 1e-4)
    assert pi.z_series / (TABLE4.z * 1e-4) == pytest.approx(1, abs=1e-12)
    assert pi.y_shunt_total / (TABLE4.y * 1e-4) == pytest.approx(1, abs=1e-12)


def test_series_branch_continuous_at_switchover():
    # just below and just above the small-argument threshold
    gl_unit = abs(cmath.sqrt(TABLE4.z * TABLE4.y))
    below = equivalent_pi(TABLE4, 0.999e-6 / gl_unit)
    above = equivalent_pi(TABLE4, 1.001e-6 / gl_unit)
    assert below.z_series / below.length_km == pytest.approx(above.z_series / above.length_km, rel=1e-9)


@pytest.mark.parametrize("length", [300.05, 458.18])
def test_pi_matches_segment_cascade(length):
    pi = equivalent_pi(TABLE4, length)
    ref = cascaded_segment_oracle(TABLE4, length, 10_000)
    assert rel(pi.z_series, ref.z_series) < 1e-6
    assert rel(pi.y_shunt_total, ref.y_shunt_total) < 1e-6


def test_cascade_converges_monotonically():
    pi = equivalent_pi(TABLE4, 458.18)
    err = [rel(cascaded_segment_oracle(TABLE4, 458.18, n).z_series, pi.z_series) for n in (10, 100, 1000)]
    assert err[0] > err[1] > err[2]
    # second order: tenfold more segments, about a hundredfold less error
    assert err[1] / err[2] == pytest.approx(100, rel=0.05)


def test_single_segment_is_nominal_pi():
    l = 250.0
    ref = cascaded_segment_oracle(TABLE4, l, 1)
    assert ref.z_series == pytest.approx(TABLE4.z * l)
    assert ref.y_shunt_total == pytest.approx(TABLE4.y * l)


def test_hundred_mile_resistance_shortfall():
    l = 100 * MILE_KM
    pi = equivalent_pi(TABLE4, l)
    drop = 100 * (1 - pi.z_series.real / (TABLE4.r_ohm_per_km * l))
    assert drop == pytest.approx(1.4, abs=0.1)


def test_gap_at_zero_and_short_lengths():
    assert lumped_distributed_gap(TABLE4, 0.0) == (0.0, 0.0, 0.0)
    assert all(g < 0.05 for g in lumped_distributed_gap(TABLE4, 10 * MILE_KM))
    with pytest.raises(ValueError):
        lumped_distributed_gap(TABLE4, -1.0)


def test_gaps_grow_with_length():
    lengths = np.linspace(0, 800, 81)
    gaps = np.array([lumped_distributed_gap(TABLE4, l) for l in lengths])
    assert np.all(np.diff(gaps, axis=0) >= -1e-12)


def test_compressed_series_impedance():
    for l in np.linspace(1, 800, 40):
        pi = equivalent_pi(TABLE4, l)
        assert abs(pi.z_series) <= abs(TABLE4.z * l)
        gl = cmath.sqrt(TABLE4.z * TABLE4.y) * l
        assert abs(cmath.sinh(gl) / gl) <= 1


@settings(max_examples=60, deadline=None)
@given(
    r=st.floats(0.0, 0.2), l_mh=st.floats(0.5, 2.0), c_nf=st.floats(5.0, 20.0),
    length=st.floats(1.0, 800.0),
)
def test_pi_against_cascade_property(r, l_mh, c_nf, length):
    u = UnitLineParams.from_rlc(r, l_mh, c_nf, 60.0)
    pi = equivalent_pi(u, length)
    n = 2000
    ref = cascaded_segment_oracle(u, length, n)
    bound = 10 * (length / n) ** 2
    assert rel(pi.z_series, ref.z_series) < bound
    assert rel(pi.y_shunt_total, ref.y_shunt_total) < bound
    assert pi.z_series.real >= 0 and pi.y_shunt_total.imag > 0


@settings(max_examples=40, deadline=None)
@given(st.permutations([(-9.0, 20.0), (0.0, 26.0), (11.0, 21.0)]), st.integers(1, 6))
def test_constants_symmetric_in_phases(perm, bundle):
    a = unit_parameters(TowerGeometry("a", perm, bundle, 0.4), MACAW, 50.0)
    b = unit_parameters(TowerGeometry("b", ((-9.0, 20.0), (0.0, 26.0), (11.0, 21.0)), bundle, 0.4), MACAW, 50.0)
    assert a.x_ohm_per_km == pytest.approx(b.x_ohm_per_km, rel=1e-13)
    assert a.b_siemens_per_km == pytest.approx(b.b_siemens_per_km, rel=1e-13)


def test_bad_inputs():
    with pytest.raises(ValueError):
        equivalent_pi(TABLE4, 0.0)
    with pytest.raises(ValueError):
        thermal_rating(500, MACAW, 4, 1.5)
    with pytest.raises(ValueError):
        ConductorSpec("x", 0.02, 0.1, 500, gmr_m=0.02)
    with pytest.raises(ValueError):
        cascaded_segment_oracle(TABLE4, 100, 0)
