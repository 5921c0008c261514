import numpy as np
import pytest

from uavmec.channel import (
    RadioConfig,
    ZeroDistance,
    achievable_rate,
    build_channel,
    path_loss,
    rate_bound,
)
from uavmec.geometry import ArraySpec, NodeState, make_velocity


def radio(**kw):
    base = dict(wavelength=0.15, path_loss_exponent=2.0, reference_gain=1e-5,
                bandwidth=5e6, noise_density=1e-16)
    base.update(kw)
    return RadioConfig(**base)


def node(pos, vel, rows=1, cols=1, **angles):
    return NodeState(np.asarray(pos, float), np.asarray(vel, float),
                     ArraySpec(rows, cols, 0.075, **angles))


def test_path_loss_reference_distance():
    assert np.isclose(path_loss([1, 0, 0], radio()), 1e-5)


def test_path_loss_at_ten_meters():
    assert np.isclose(path_loss([10, 0, 0], radio()), 1e-7)


def test_path_loss_inverse_square():
    cfg = radio()
    assert np.isclose(path_loss([2, 0, 0], cfg), path_loss([1, 0, 0], cfg) / 4)


def test_path_loss_zero_distance_raises():
    with pytest.raises(ZeroDistance):
        path_loss([0, 0, 0], radio())


def test_scalar_channel_magnitude_and_singular_value():
    cfg = radio()
    tx = node([0, 0, 0], make_velocity(16.67, np.pi / 3))
    rx = node([0, 0, 20], [0, 0, 0])
    link = build_channel(tx, rx, cfg)
    beta = path_loss([0, 0, 20], cfg)
    assert np.allclose(np.abs(link.matrix), np.sqrt(beta))
    assert np.isclose(link.singular_values[0], np.sqrt(beta))


def test_frobenius_power_identity():
    cfg = radio()
    rng = np.random.default_rng(5)
    for _ in range(10):
        rows_t, cols_t = rng.integers(1, 7, 2)
        rows_r, cols_r = rng.integers(1, 7, 2)
        tx = node(rng.normal(size=3) * 5, make_velocity(10, 0.5), rows_t, cols_t,
                  slant=0.3, downtilt=0.2, bearing=1.0)
        rx = node(rng.normal(size=3) * 5 + [0, 0, 30], [0, 0, 0], rows_r, cols_r,
                  slant=0.3, downtilt=0.2, bearing=1.0)
        link = build_channel(tx, rx, cfg)
        fro2 = np.linalg.norm(link.matrix, "fro") ** 2
        expected = link.path_loss * tx.array.size * rx.array.size
        assert abs(fro2 - expected) <= 1e-9 * expected
        assert abs(link.trace_power - fro2) <= 1e-9 * fro2


def test_table_size_array_trace_power():
    cfg = radio()
    angles = dict(slant=np.pi / 3, downtilt=np.pi / 4, bearing=np.pi / 3)
    tx = node([10 / np.tan(np.pi / 3), 0, 0], make_velocity(16.67, np.pi / 3), 6, 6, **angles)
    rx = node([0, 0, 10.0], make_velocity(10, np.pi / 3, np.pi / 9), 6, 6, **angles)
    link = build_channel(tx, rx, cfg)
    assert link.singular_values[0] > 0
    assert np.isclose(link.trace_power, link.path_loss * 1296, rtol=1e-9)


def test_rate_zero_power():
    cfg = radio()
    tx = node([0, 0, 0], [0, 0, 0])
    rx = node([0, 0, 20], [0, 0, 0])
    link = build_channel(tx, rx, cfg)
    assert achievable_rate(0.0, link, cfg, 1) == 0.0
    assert rate_bound(0.0, link, cfg, 1, "lower") == 0.0
    assert rate_bound(0.0, link, cfg, 1, "upper") == 0.0


def test_scalar_link_rate_value():
    # 20 m scalar link at 35 dBm: snr = p*beta/(B*N0), rate = B*log2(1+snr)
    cfg = radio()
    tx = node([0, 0, 0], [0, 0, 0])
    rx = node([0, 0, 20], [0, 0, 0])
    link = build_channel(tx, rx, cfg)
    p = 10 ** 3.5 / 1000.0
    snr = p * 2.5e-8 / (5e6 * 1e-16 * 1)
    expected = 5e6 * np.log2(1 + snr)
    got = achievable_rate(p, link, cfg, 1)
    assert np.isclose(got, expected, rtol=1e-9)
    assert np.isclose(got, 3.66e7, rtol=0.01)


def test_rank_one_rate_equals_lower_bound():
    cfg = radio()
    tx = node([0, 0, 0], [0, 0, 0])
    rx = node([0, 0, 20], [0, 0, 0], rows=3, cols=2)
    link = build_channel(tx, rx, cfg)  # single tx antenna: exactly rank 1
    for p in (0.01, 0.5, 3.0):
        assert np.isclose(
            achievable_rate(p, link, cfg, 1), rate_bound(p, link, cfg, 1, "lower"),
            rtol=1e-12,
        )


def test_bounds_coincide_for_single_stream():
    cfg = radio()
    tx = node([0, 0, 0], [0, 0, 0], rows=4, cols=4)
    rx = node([0, 0, 20], [0, 0, 0], rows=1, cols=1)
    link = build_channel(tx, rx, cfg)
    assert np.isclose(
        rate_bound(1.0, link, cfg, 16, "lower"), rate_bound(1.0, link, cfg, 16, "upper")
    )


def test_rate_between_bounds_over_random_geometries():
    cfg = radio()
    rng = np.random.default_rng(7)
    for _ in range(100):
        rows_t, cols_t = rng.integers(1, 5, 2)
        rows_r, cols_r = rng.integers(1, 5, 2)
        tx = node(rng.normal(size=3) * 10, make_velocity(rng.uniform(0, 20), rng.uniform(0, 6)),
                  rows_t, cols_t, slant=rng.uniform(-1, 1), bearing=rng.uniform(0, 6))
        rx = node(rng.normal(size=3) * 10 + [0, 0, 40], [0, 0, 0], rows_r, cols_r,
                  slant=rng.uniform(-1, 1), bearing=rng.uniform(0, 6))
        link = build_channel(tx, rx, cfg)
        n_tx = tx.array.size
        p = rng.uniform(0.01, 3.0)
        r = achievable_rate(p, link, cfg, n_tx)
        lo = rate_bound(p, link, cfg, n_tx, "lower")
        hi = rate_bound(p, link, cfg, n_tx, "upper")
        assert lo <= r * (1 + 1e-12) and r <= hi * (1 + 1e-12)
        sv = link.singular_values
        rank_one = sv.size == 1 or sv[1] <= 1e-9 * sv[0]
        if rank_one:
            assert np.isclose(r, lo, rtol=1e-9)
        else:
            assert r > lo * (1 + 1e-12)


def test_trace_power_matches_trace_form():
    cfg = radio()
    tx = node([4, 2, 0], make_velocity(12, 0.4), 3, 4, slant=0.3, bearing=0.9)
    rx = node([0, 0, 35], [0, 0, 0], 4, 2, slant=0.3, bearing=0.9)
    link = build_channel(tx, rx, cfg)
    trace = np.trace(link.matrix @ link.matrix.conj().T).real
    assert abs(link.trace_power - trace) <= 1e-9 * trace
    assert abs(link.trace_power - np.sum(link.singular_values**2)) <= 1e-9 * trace


def test_singular_values_invariant_under_global_phase():
    cfg = radio()
    tx = node([3, 1, 0], make_velocity(10, 0.3), 3, 3, slant=0.2)
    rx = node([0, 0, 25], [0, 0, 0], 3, 3, slant=0.2)
    link = build_channel(tx, rx, cfg)
    rotated = link.matrix * np.exp(1j * 1.234)
    sv = np.linalg.svd(rotated, compute_uv=False)
    assert np.allclose(np.sort(sv)[::-1], link.singular_values, rtol=1e-12)


def test_rate_increasing_and_concave_in_power():
    cfg = radio()
    tx = node([5, 0, 0], [0, 0, 0], 2, 3)
    rx = node([0, 0, 30], [0, 0, 0], 3, 2)
    link = build_channel(tx, rx, cfg)
    p = np.linspace(0.01, 3.0, 40)
    r = np.array([achievable_rate(x, link, cfg, 6) for x in p])
    first = np.diff(r)
    second = np.diff(first)
    assert (first > 0).all()
    assert (second < 1e-6 * r.max()).all()


def test_accumulated_doppler_mode():
    cfg = radio(doppler_phase_mode="accumulated")
    tx = node([5, 0, 0], make_velocity(16, 0.5), 2, 2)
    rx = node([0, 0, 30], [0, 0, 0], 2, 2)
    with pytest.raises(ValueError):
        build_channel(tx, rx, cfg, slot=3)
    link = build_channel(tx, rx, cfg, slot=3, slot_len=0.2)
    lit = build_channel(tx, rx, radio(), slot=3)
    # both modes share the path loss and total singular power
    assert np.isclose(link.trace_power, lit.trace_power, rtol=1e-9)
    assert not np.allclose(link.matrix, lit.matrix)
