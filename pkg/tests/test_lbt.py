import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import crandn
from mmimo_u.lbt import (CONVENTIONAL, ENHANCED, conventional_lbt, enhanced_lbt,
                         filtered_power, total_power, wifi_defer)
from mmimo_u.spatial import SilenceSnapshot, estimate_covariance, simulate_silence
from mmimo_u.units import dbm2w

GAMMA = float(dbm2w(-62.0))


def test_silence_is_granted():
    d = conventional_lbt(np.zeros((5, 8), dtype=complex), GAMMA)
    assert d.granted and d.sensed_power_w == 0.0 and d.mode == CONVENTIONAL
    assert d.threshold_w == GAMMA


def test_one_loud_sample_denies():
    z = np.zeros((4, 2), dtype=complex)
    z[2, 0] = np.sqrt(dbm2w(-60.0))
    d = conventional_lbt(z, GAMMA)
    assert not d.granted
    assert d.sensed_power_w == pytest.approx(float(dbm2w(-60.0)))


def test_threshold_is_strict():
    z = np.array([[np.sqrt(GAMMA)]], dtype=complex)
    assert not conventional_lbt(z, GAMMA).granted
    assert not enhanced_lbt(z, np.eye(1), 0, GAMMA).granted


def test_conventional_matches_scalar_max(rng):
    for _ in range(50):
        z = crandn(rng, 20, 4) * np.sqrt(GAMMA / 3)
        peak = max(sum(abs(x) ** 2 for x in row) for row in z)
        d = conventional_lbt(z, GAMMA)
        assert d.sensed_power_w == pytest.approx(peak, rel=1e-12)
        assert d.granted == (peak < GAMMA)


def test_full_null_always_grants(rng):
    z = crandn(rng, 10, 6) * 1e3
    U = np.linalg.qr(crandn(rng, 6, 6))[0]
    d = enhanced_lbt(z, U, 6, GAMMA)
    assert d.granted and d.sensed_power_w == 0.0 and d.mode == ENHANCED


def test_source_inside_null_space_is_ignored(rng):
    U = np.linalg.qr(crandn(rng, 8, 8))[0]
    z = np.outer(crandn(rng, 30), U[:, 0]) * 1e-2  # far above threshold
    assert not conventional_lbt(z, GAMMA).granted
    assert enhanced_lbt(z, U, 1, GAMMA).granted


def test_defer_rule():
    assert wifi_defer(0.0, GAMMA) is False
    assert wifi_defer(float(dbm2w(-61.0)), GAMMA) is True
    assert wifi_defer(GAMMA, GAMMA) is True
    out = wifi_defer(np.array([0.0, GAMMA * 0.99, GAMMA * 2]), GAMMA)
    assert out.tolist() == [False, False, True]


@given(st.integers(1, 12), st.integers(1, 40), st.integers(0, 2**32 - 1))
@settings(max_examples=100, deadline=None)
def test_filtered_power_never_exceeds_total(N, M, seed):
    rng = np.random.default_rng(seed)
    z = crandn(rng, M, N)
    U = estimate_covariance(SilenceSnapshot(z, 0.0, np.zeros(0))).U_hat
    total = total_power(z)
    assert np.allclose(filtered_power(z, U, 0), total, rtol=1e-12)
    prev = total
    for D in range(1, N + 1):
        f = filtered_power(z, U, D)
        assert np.all(f <= prev + 1e-12 * total)
        prev = f
    assert np.all(prev == 0.0)


def test_adding_a_transmitter_rarely_helps_access():
    # paired draws: identical symbols and noise, one extra device on top
    N, M, trials = 8, 50, 500
    flips = 0
    for seed in range(trials):
        rng = np.random.default_rng(seed)
        g = crandn(rng, 3, N) * np.sqrt(GAMMA / N)
        s = crandn(rng, M, 3)
        noise = crandn(rng, M, N) * np.sqrt(GAMMA / 100)
        base = s[:, :2] @ g[:2] + noise
        more = base + s[:, 2:] @ g[2:]
        U = estimate_covariance(SilenceSnapshot(more, 0.0, np.zeros(0))).U_hat
        flips += conventional_lbt(more, GAMMA).granted and not conventional_lbt(base, GAMMA).granted
        flips += enhanced_lbt(more, U, 0, GAMMA).granted and not enhanced_lbt(base, U, 0, GAMMA).granted
    assert flips <= trials * 0.01
