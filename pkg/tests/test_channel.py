import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nearcs.channel import (
    PhysicalPath,
    SystemParams,
    dft_codebook,
    draw_channel,
    far_field_steering,
    frequency_separation,
    gen_angular_channel,
    gen_measurement,
    gen_physical_channel,
    gen_sub6_channel,
    gen_support,
    grid_angle,
    near_field_steering,
    rayleigh_distance,
    to_angular,
)
from nearcs.numerics import ParameterError, RngStream

C_LIGHT = 299_792_458.0


def test_saturated_support():
    p = SystemParams(N=8, N_sub=8, M=8, d=4, S_taps=8, K=2)
    sup, _ = gen_support(p, RngStream(0))
    assert sup.tolist() == list(range(8))


def test_on_grid_alignment():
    p = SystemParams()
    for i in range(20):
        sup, starts = gen_support(p, RngStream(1, i))
        s = set(sup.tolist())
        assert len(s) == 20
        assert all(set(range(k // 4 * 4, k // 4 * 4 + 4)) <= s for k in s)
        assert np.all(starts % 4 == 0)


def test_off_grid_offset_fraction():
    p = SystemParams(N=64, N_sub=64, M=25, d=4, S_taps=8, grid_mode="off_grid")
    gen = RngStream(2).generator()
    starts = np.concatenate([gen_support(p, gen)[1] for _ in range(10_000)])
    frac = np.mean(starts % 4 != 0)
    assert abs(frac - 0.75) < 0.05


def test_off_grid_runs_disjoint():
    p = SystemParams(N=64, N_sub=64, M=25, d=4, S_taps=32, grid_mode="off_grid")
    gen = RngStream(3).generator()
    for _ in range(200):
        sup, starts = gen_support(p, gen)
        assert len(set(sup.tolist())) == 32
        assert np.all(np.diff(starts) >= 4)


def test_off_grid_full_packing():
    p = SystemParams(N=8, N_sub=8, M=8, d=4, S_taps=8, grid_mode="off_grid")
    sup, starts = gen_support(p, RngStream(0))
    assert starts.tolist() == [0, 4] and sup.tolist() == list(range(8))


def test_off_grid_matches_rejection_oracle():
    # Rejection sampling of iid starts is uniform over disjoint placements; compare start histograms.
    p = SystemParams(N=12, N_sub=12, M=8, d=3, S_taps=6, grid_mode="off_grid")
    gen = RngStream(5).generator()
    ours = np.concatenate([gen_support(p, gen)[1] for _ in range(20_000)])
    ref = []
    while len(ref) < 20_000:
        s = np.sort(gen.integers(0, 10, size=2))
        if s[1] - s[0] >= 3:
            ref.append(s)
    ref = np.concatenate(ref)
    h1, h2 = np.bincount(ours, minlength=10) / ours.size, np.bincount(ref, minlength=10) / ref.size
    assert np.max(np.abs(h1 - h2)) < 0.01


def test_constant_modulus_and_energy():
    p = SystemParams(g=1.0)
    ch = draw_channel(p, RngStream(4))
    assert np.allclose(np.abs(ch.X[ch.support]), 1.0, atol=1e-12)
    mask = np.ones(p.N, bool)
    mask[ch.support] = False
    assert not np.any(ch.X[mask])
    assert np.sum(np.abs(ch.X) ** 2) == pytest.approx(p.S_taps * p.g**2 * p.K, rel=1e-12)


def test_empty_support_zero_matrix():
    p = SystemParams(S_taps=0)
    ch = draw_channel(p, RngStream(5))
    assert not np.any(ch.X)


def test_phase_mean_near_zero():
    p = SystemParams(N=8, N_sub=8, M=8, d=4, S_taps=4, K=1)
    gen = RngStream(6).generator()
    vals = np.concatenate([gen_angular_channel(p, np.arange(4), gen).X[:4, 0] for _ in range(2500)])
    assert abs(vals.mean()) < 0.05 * p.g


def test_far_field_steering():
    assert np.allclose(far_field_steering(0.0, 16), 1 / 4)
    for th in (-1.0, -0.3, 0.7):
        assert abs(np.linalg.norm(far_field_steering(th, 64)) - 1) < 1e-12


def test_dft_codebook_properties():
    F = dft_codebook(32)
    assert np.allclose(F.conj().T @ F, np.eye(32), atol=1e-10)
    assert np.array_equal(dft_codebook(1), np.array([[1.0 + 0j]]))
    for c in range(32):
        assert np.allclose(F[:, c], far_field_steering(grid_angle(c, 32), 32), atol=1e-12)
        assert -1 <= grid_angle(c, 32) < 1


def test_dft_projection_of_grid_steering_is_one_hot():
    N = 64
    F = dft_codebook(N)
    x = F.conj().T @ far_field_steering(grid_angle(11, N), N)
    assert abs(abs(x[11]) - 1) < 1e-10
    assert np.max(np.abs(np.delete(x, 11))) <= 1e-10


def test_sub6_codebook_rows():
    assert np.allclose(dft_codebook(64, rows=8), dft_codebook(64)[:8])


def test_near_field_norm_and_far_limit():
    lam = C_LIGHT / 28e9
    N = 64
    R = rayleigh_distance(N * lam / 2, lam)
    for th in (-0.5, 0.0, 0.3):
        b = near_field_steering(th, 10.0, N, lam)
        assert abs(np.linalg.norm(b) - 1) < 1e-12
        far = near_field_steering(th, 1e6 * R, N, lam)
        # Symmetric-array reference: compare up to the common phase of element 0.
        ref = far_field_steering(th, N)
        ref = ref * (far[0] / ref[0])
        assert np.max(np.abs(far - ref)) < 1e-3


def test_near_field_energy_spread():
    lam = C_LIGHT / 28e9
    N = 256
    x = dft_codebook(N).conj().T @ near_field_steering(0.2, 10.0, N, lam)
    e = np.sort(np.abs(x) ** 2)[::-1]
    assert np.searchsorted(np.cumsum(e), 0.95) + 1 > 1


def test_rayleigh_distance():
    assert rayleigh_distance(0.5, C_LIGHT / 100e9) == pytest.approx(166.7, abs=0.1)
    assert rayleigh_distance(0.0, 0.01) == 0
    assert rayleigh_distance(1.37, C_LIGHT / 28e9) == pytest.approx(350.597212155, rel=1e-9)


def test_gamma_and_sigma_n2():
    assert frequency_separation(28e9, 3.5e9) == pytest.approx(0.875)
    p = SystemParams(C=3.0)
    assert p.sigma_n2 == pytest.approx(0.2552083333, rel=1e-9)


def test_sub6_scaled_model_mean_modulus():
    p = SystemParams(N=8, N_sub=8, M=8, d=4, S_taps=8, K=12500, q_model="scaled")
    ch = draw_channel(p, RngStream(7))
    sub = gen_sub6_channel(ch, p, RngStream(8))
    assert np.mean(np.abs(sub.X_sub)) == pytest.approx(p.gamma / 2, rel=0.02)


def test_sub6_unit_model_mean_modulus():
    p = SystemParams(N=8, N_sub=8, M=8, d=4, S_taps=8, K=12500)
    sub = gen_sub6_channel(draw_channel(p, RngStream(7)), p, RngStream(8))
    assert np.mean(np.abs(sub.X_sub)) == pytest.approx(1.0, rel=0.02)


def test_sub6_phase_spread_matches_gamma():
    p = SystemParams(N=8, N_sub=8, M=8, d=4, S_taps=8, K=5000)
    ch = draw_channel(p, RngStream(9))
    sub = gen_sub6_channel(ch, p, RngStream(10))
    rel = np.angle(sub.X_sub / ch.X)
    # arg Q = 2 pi gamma R2 delta, wrapped; |arg| <= 2 pi gamma before wrapping.
    assert np.all(np.abs(np.angle(np.exp(1j * rel))) <= np.pi + 1e-12)
    assert abs(np.mean(np.cos(rel)) - np.sin(2 * np.pi * p.gamma) / (2 * np.pi * p.gamma)) < 0.02


def test_sub6_zero_block_energy():
    p = SystemParams(N=16, N_sub=16, M=8, d=4, S_taps=4, K=4)
    gen = RngStream(11).generator()
    energies = []
    for _ in range(10_000):
        ch = gen_angular_channel(p, np.arange(4), gen)
        sub = gen_sub6_channel(ch, p, gen)
        energies.append(np.sum(np.abs(sub.X_sub[4:8]) ** 2))
    assert np.mean(energies) == pytest.approx(p.d * p.K * p.sigma_n2, rel=0.03)


def test_sub6_no_zero_rows():
    p = SystemParams()
    sub = gen_sub6_channel(draw_channel(p, RngStream(12)), p, RngStream(13))
    assert np.all(np.any(sub.X_sub != 0, axis=1))


def test_sub6_shorter_runs():
    p = SystemParams(d_sub=2)
    ch = draw_channel(p, RngStream(14))
    sub = gen_sub6_channel(ch, p, RngStream(15))
    kept = ch.support.reshape(-1, 4)[:, 1:3].ravel()
    assert np.all(np.isfinite(sub.X_sub))
    ratio = np.abs(sub.X_sub[kept] / ch.X[kept])
    assert np.all(ratio <= 1 + p.gamma + 1e-12)


def test_measurement_noiseless_limit():
    p = SystemParams(snr_db=300.0)
    ch = draw_channel(p, RngStream(16))
    m = gen_measurement(ch, p, RngStream(17))
    assert np.linalg.norm(m.Y - m.A @ ch.X) <= 1e-6 * np.linalg.norm(m.A @ ch.X)
    assert m.A.shape == (p.M, p.N) and m.Y.shape == (p.M, p.K)


def test_measurement_power_accounting():
    p = SystemParams(N=64, N_sub=64, M=16, d=4, S_taps=8, K=4, snr_db=5.0)
    gen = RngStream(18).generator()
    powers = [np.mean(np.abs(gen_measurement(draw_channel(p, gen), p, gen).Y) ** 2) for _ in range(1000)]
    assert np.mean(powers) == pytest.approx(p.S_taps * p.g**2 + p.sigma2, rel=0.03)


def test_measurement_noise_only():
    p = SystemParams(N=64, N_sub=64, M=16, d=4, S_taps=0, K=4, snr_db=5.0)
    gen = RngStream(19).generator()
    powers = [np.mean(np.abs(gen_measurement(draw_channel(p, gen), p, gen).Y) ** 2) for _ in range(1000)]
    assert np.mean(powers) == pytest.approx(p.sigma2, rel=0.03)


def test_physical_channel_far_single_path_and_linearity():
    lam = C_LIGHT / 28e9
    N = 64
    c = 17
    path = PhysicalPath(theta=grid_angle(c, N), r=1e9, gain=1.0)
    H = gen_physical_channel([path], N, 2, lam, 1e6)
    X = to_angular(H)
    e = np.abs(X[:, 0]) ** 2
    assert np.argmax(e) == c and e[c] / e.sum() > 0.99
    H2 = gen_physical_channel([PhysicalPath(path.theta, path.r, 2.0)], N, 2, lam, 1e6)
    assert np.array_equal(H2, 2 * H)


def test_physical_channel_near_field_spread():
    lam = C_LIGHT / 28e9
    X = to_angular(gen_physical_channel([PhysicalPath(0.1, 10.0)], 256, 1, lam, 1e6))
    e = np.sort(np.abs(X[:, 0]) ** 2)[::-1]
    assert np.searchsorted(np.cumsum(e) / e.sum(), 0.95) + 1 > 1


@pytest.mark.parametrize("kw", [dict(d=5), dict(S_taps=6), dict(M=300), dict(C=0.0), dict(f_s=30e9),
                                dict(g=0.0), dict(grid_mode="x"), dict(q_model="x"), dict(d_sub=5)])
def test_system_params_validation(kw):
    with pytest.raises(ParameterError):
        SystemParams(**kw)


def test_physical_path_validation():
    with pytest.raises(ParameterError):
        PhysicalPath(0.0, 0.0)


@settings(max_examples=30, deadline=None)
@given(st.sampled_from([1, 2, 4, 8]), st.integers(0, 8), st.booleans(), st.integers(0, 2**31))
def test_support_invariants_property(d, n_runs, off, seed):
    N = 64
    p = SystemParams(N=N, N_sub=N, M=16, d=d, S_taps=n_runs * d, grid_mode="off_grid" if off else "on_grid")
    sup, starts = gen_support(p, RngStream(seed))
    assert len(set(sup.tolist())) == p.S_taps
    assert np.all((sup >= 0) & (sup < N))
    if not off:
        assert np.all(starts % d == 0)
    assert math.isclose(len(starts) * d, p.S_taps)
