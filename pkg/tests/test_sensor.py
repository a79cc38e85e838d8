import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from igplan.grid import GridGeometry, Pose, Scene, SensorFootprint, sense
from igplan.sensor import (
    DetectorParams,
    effective_pd,
    effective_pfa,
    sample_measurement,
    transition_probs,
)

GEOM = GridGeometry(10, 10, 1.0)
FP = SensorFootprint(n_bins=6, bin_spacing=1.0, max_range=6.0, beamwidth=math.radians(7))
POSE = Pose(2.0, 3.5, math.pi / 2)  # looking east along the y=3.5 cell row


def empty_scene(num_classes=3):
    return Scene(GEOM, frozenset(), {}, num_classes)


def row_scene():
    cells = {GEOM.cell_index(3, c): 1 for c in range(3, 8)}
    return Scene(GEOM, frozenset(cells), cells, 1)


def test_params_validation():
    with pytest.raises(ValueError):
        DetectorParams(p_d=0.5, p_fa=0.6)
    with pytest.raises(ValueError):
        DetectorParams(p_d=0.9, p_fa=0.1, atten_exponent=0.5)
    with pytest.raises(ValueError):
        DetectorParams(attenuation_mode="gauss")


def test_effective_pd_modes():
    flat = DetectorParams(p_d=0.9, p_fa=0.1, attenuation_mode="none")
    assert effective_pd(flat, 0.0) == 0.9
    assert effective_pd(flat, 100.0) == 0.9

    fd = DetectorParams(p_d=0.9, p_fa=0.1, atten_exponent=1.0, attenuation_mode="floor_decay")
    assert effective_pd(fd, 0.0) == pytest.approx(0.9, abs=1e-15)
    # d = 1: p_fa + (p_d - p_fa)/2 = 0.1 + 0.4 = 0.5
    assert effective_pd(fd, 1.0) == pytest.approx(0.5, abs=1e-15)
    assert effective_pd(fd, 1e9) == pytest.approx(0.1, abs=1e-6)
    assert effective_pfa(fd, 7.0) == pytest.approx(0.1, abs=1e-15)

    lit = DetectorParams(p_d=0.9, p_fa=0.1, atten_exponent=1.0, attenuation_mode="paper_literal")
    p00, p01 = transition_probs(lit, 1.0)
    assert p00 == pytest.approx((1 - 0.9) / 2, abs=1e-15)
    assert p01 == pytest.approx((1 - 0.1) / 2, abs=1e-15)
    # the printed pairing sends both non-detection probabilities to zero at range
    p00_far, p01_far = transition_probs(lit, 1e9)
    assert p00_far == pytest.approx(0.0, abs=1e-8)
    assert p01_far == pytest.approx(0.0, abs=1e-8)

    with pytest.raises(ValueError):
        effective_pd(fd, -1.0)


def test_noiseless_detector_always_fires_on_target():
    scene = row_scene()
    params = DetectorParams(p_d=1.0 - 1e-12, p_fa=0.0, attenuation_mode="none")
    # p_d must exceed p_fa strictly; 1-1e-12 is effectively certain detection
    rng = np.random.default_rng(0)
    for _ in range(50):
        meas = sample_measurement(scene, POSE, FP, params, rng)
        for k0, cells in enumerate(meas.view.bin_cells):
            if any(c in scene.occupied for c in cells):
                assert meas.bins[k0] == 1


def test_empty_scene_no_false_alarms():
    params = DetectorParams(p_d=0.9, p_fa=0.0, attenuation_mode="none")
    rng = np.random.default_rng(1)
    for _ in range(50):
        meas = sample_measurement(empty_scene(), POSE, FP, params, rng)
        assert not meas.bins.any()


def test_false_alarm_rate_monte_carlo():
    # empty scene, p_fa = 0.1, mode none: empirical bin rate within 0.1 +- 0.01
    params = DetectorParams(p_d=0.9, p_fa=0.1, attenuation_mode="none")
    rng = np.random.default_rng(7)
    n = 10_000
    fires = 0
    for _ in range(n):
        meas = sample_measurement(empty_scene(), POSE, FP, params, rng)
        fires += int(meas.bins[0])
    assert abs(fires / n - 0.1) < 0.01


def test_determinism():
    scene = row_scene()
    params = DetectorParams(p_d=0.8, p_fa=0.1)
    a = sample_measurement(scene, POSE, FP, params, np.random.default_rng(123))
    b = sample_measurement(scene, POSE, FP, params, np.random.default_rng(123))
    assert np.array_equal(a.bins, b.bins)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 10_000), lo=st.floats(0.3, 0.6), hi=st.floats(0.61, 0.99))
def test_raising_pd_never_unfires_occupied(seed, lo, hi):
    # inverse-CDF sampling: with an identical stream, a higher p_d can only
    # add occupied-cell detections, never remove them
    scene = row_scene()
    low = DetectorParams(p_d=lo, p_fa=0.05, attenuation_mode="none")
    high = DetectorParams(p_d=hi, p_fa=0.05, attenuation_mode="none")
    m_low = sample_measurement(scene, POSE, FP, low, np.random.default_rng(seed))
    m_high = sample_measurement(scene, POSE, FP, high, np.random.default_rng(seed))
    for k0, cells in enumerate(m_low.view.bin_cells):
        if cells and all(c in scene.occupied for c in cells):
            assert m_high.bins[k0] >= m_low.bins[k0]


def test_or_structure_forced_by_occupied_draw():
    # single-cell bins along the row: bin fires iff its cell's draw fires,
    # so with p_d ~ 1 and p_fa = 0 the bins mirror occupancy exactly
    scene = row_scene()
    params = DetectorParams(p_d=1.0 - 1e-12, p_fa=0.0, attenuation_mode="none")
    meas = sample_measurement(scene, POSE, FP, params, np.random.default_rng(3))
    view = sense(GEOM, POSE, FP)
    for k0, cells in enumerate(view.bin_cells):
        expect = int(any(c in scene.occupied for c in cells))
        assert meas.bins[k0] == expect
