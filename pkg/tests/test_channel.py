"""Channel model, quantizer, SINR and secrecy-rate evaluation."""
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from secure_irs.channel import (
    LOG2E,
    BeamformingSet,
    PhaseConfig,
    SystemConfig,
    apply_csi_error,
    cascaded_channel,
    cascaded_channel_sum,
    generate_channels,
    path_loss_alice_irs,
    path_loss_irs_link,
    quantize_phase,
    random_grid_phase,
    rates,
    sample_ball,
    sample_pse,
    sample_sphere,
    secrecy_rate,
    secrecy_rates,
    sinr,
    to_bps,
)

from conftest import make_instance


# ---- quantizer


def test_quantize_on_grid_is_fixed():  # [TRIVIAL]
    for b in (1, 2, 3, 5):
        assert quantize_phase(0.0, b) == 0.0


def test_quantize_continuous_is_identity():  # [TRIVIAL]
    assert quantize_phase(1.2345, None) == 1.2345
    assert quantize_phase(1.2345, "continuous") == 1.2345


def test_quantize_nearest_point_b2():  # [DERIVED] enumerate grid distances
    theta = np.pi / 3
    grid = np.array([0, np.pi / 2, np.pi, 3 * np.pi / 2])
    dist = np.abs(np.angle(np.exp(1j * (grid - theta))))
    assert quantize_phase(theta, 2) == pytest.approx(grid[np.argmin(dist)])


def test_quantize_tie_goes_to_lower_index():  # [TRIVIAL]
    assert quantize_phase(np.pi / 4, 2) == 0.0


@given(st.floats(-50, 50), st.integers(1, 6))
def test_quantization_error_bound(theta, b):  # [DERIVED]
    q = quantize_phase(theta, b)
    err = np.abs(np.angle(np.exp(1j * (theta - q))))
    assert err <= np.pi / 2 ** b + 1e-9
    assert 0 <= q < 2 * np.pi


def test_quantize_rejects_nonfinite():  # [TRIVIAL]
    with pytest.raises(ValueError):
        quantize_phase(np.nan, 2)


# ---- phase-shift errors


def test_pse_interval_b3():  # [PAPER] interval definition
    x = sample_pse(3, 10_000, np.random.default_rng(0))
    assert x.min() >= -np.pi / 8 and x.max() < np.pi / 8


def test_pse_shrinks_with_bits():  # [TRIVIAL]
    x = sample_pse(20, 100, np.random.default_rng(0))
    assert np.max(np.abs(x)) <= np.pi / 2 ** 20


def test_pse_reproducible():  # [TRIVIAL]
    a = sample_pse(3, 16, np.random.default_rng(5))
    b = sample_pse(3, 16, np.random.default_rng(5))
    assert np.array_equal(a, b)


def test_pse_needs_finite_bits():  # [TRIVIAL]
    with pytest.raises(ValueError):
        sample_pse(None, 4, np.random.default_rng(0))


def test_continuous_phase_config_drops_pse():  # [TRIVIAL]
    ph = PhaseConfig(np.zeros(3), None, np.ones(3))
    assert np.all(ph.pse == 0)


# ---- cascaded channel


def test_cascaded_single_element():  # [TRIVIAL]
    rng = np.random.default_rng(1)
    g = np.array([0.3 - 0.2j])
    H = rng.standard_normal((1, 3)) + 1j * rng.standard_normal((1, 3))
    h = cascaded_channel(g, PhaseConfig(np.zeros(1), None), H)
    assert np.allclose(h, g[0] * H[0], atol=1e-15)


def test_cascaded_diag_equals_selector_sum():  # [DERIVED] both forms
    _, ch, phase, _, _ = make_instance(3, pse=True)
    for k in range(ch.K):
        a = cascaded_channel(ch.g[k], phase, ch.H_AR)
        b = cascaded_channel_sum(ch.g[k], phase, ch.H_AR)
        assert np.allclose(a, b, rtol=0, atol=1e-12 * np.linalg.norm(a))


def test_cascaded_continuous_no_pse_is_plain_product():  # [TRIVIAL]
    rng = np.random.default_rng(2)
    g = rng.standard_normal(4) + 1j * rng.standard_normal(4)
    H = rng.standard_normal((4, 2)) + 1j * rng.standard_normal((4, 2))
    th = rng.uniform(0, 2 * np.pi, 4)
    h = cascaded_channel(g, PhaseConfig(th, None), H)
    assert np.allclose(h, g @ np.diag(np.exp(1j * th)) @ H)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000), st.floats(-3, 3), st.floats(-3, 3))
def test_cascaded_bilinear(seed, a, c):  # [DERIVED]
    rng = np.random.default_rng(seed)
    N, M = 5, 3
    g1, g2 = (rng.standard_normal(N) + 1j * rng.standard_normal(N) for _ in range(2))
    H = rng.standard_normal((N, M)) + 1j * rng.standard_normal((N, M))
    ph = PhaseConfig(rng.uniform(0, 2 * np.pi, N), None)
    lhs = cascaded_channel(a * g1 + c * g2, ph, H)
    rhs = a * cascaded_channel(g1, ph, H) + c * cascaded_channel(g2, ph, H)
    assert np.allclose(lhs, rhs, atol=1e-10)


# ---- SINR and secrecy rate


def test_sinr_single_user():  # [TRIVIAL]
    h = np.array([1.0 + 1j, 0.5])
    w = np.array([[0.2, -0.3j]])
    assert sinr(BeamformingSet(w), h, 0, 1e-3) == pytest.approx(abs(h @ w[0]) ** 2 / 1e-3)


def test_sinr_orthogonal_beam_is_zero():  # [TRIVIAL]
    h = np.array([1.0, 0.0])
    w = np.array([[0.0, 1.0], [1.0, 0.0]])
    assert sinr(BeamformingSet(w), h, 0, 1.0) == 0.0


def test_sinr_two_users_direct():  # [DERIVED] re-computation
    rng = np.random.default_rng(4)
    h = rng.standard_normal(3) + 1j * rng.standard_normal(3)
    w = rng.standard_normal((2, 3)) + 1j * rng.standard_normal((2, 3))
    s0, s1 = abs(np.vdot(w[0].conj(), h)) ** 2, abs(np.vdot(w[1].conj(), h)) ** 2
    assert sinr(BeamformingSet(w), h, 1, 0.1, 0.05) == pytest.approx(s1 / (s0 + 0.1 + 0.05))
    with pytest.raises(IndexError):
        sinr(BeamformingSet(w), h, 2, 0.1)


def test_secrecy_rate_matches_log_formula():  # [DERIVED] re-computation
    _, ch, phase, bf, _ = make_instance(7, pse=True)
    h = (ch.g * phase.vector) @ ch.H_AR
    he = (ch.g_e * phase.vector) @ ch.H_AR
    w = bf.w
    for k in range(ch.K):
        gu = np.abs(w @ h[k]) ** 2
        ge = np.abs(w @ he) ** 2
        cu = np.log(1 + gu[k] / (gu.sum() - gu[k] + ch.sigma[k]))
        ce = np.log(1 + ge[k] / (ge.sum() - ge[k] + ch.sigma_e))
        ref = max(cu - ce, 0.0)
        assert secrecy_rate(bf, phase, ch, k) == pytest.approx(ref, rel=1e-12, abs=1e-14)


def test_secrecy_zero_when_eve_equals_user():  # [TRIVIAL]
    _, ch, phase, bf, _ = make_instance(8)
    ch.g_e = ch.g[0].copy()
    ch.sigma_e = ch.sigma[0]
    assert secrecy_rate(bf, phase, ch, 0) == pytest.approx(0.0, abs=1e-14)


def test_secrecy_clamp_and_role_swap():  # [TRIVIAL]
    _, ch, phase, bf, _ = make_instance(9)
    raw = secrecy_rates(bf, phase, ch, clamp=False)
    assert np.all(secrecy_rates(bf, phase, ch) >= 0)
    assert np.allclose(secrecy_rates(bf, phase, ch), np.maximum(raw, 0))
    cu, ce = rates(bf, phase, ch)
    assert np.allclose(raw, cu - ce)


def test_bps_conversion():  # [TRIVIAL]
    assert to_bps(1.0) == pytest.approx(1 / np.log(2))
    assert LOG2E == pytest.approx(np.log2(np.e))


# ---- CSI error


def test_csi_error_zero_and_boundary():  # [TRIVIAL]
    g = np.array([1.0 + 0j, 2.0])
    assert np.array_equal(apply_csi_error(g, np.zeros(2), 0.1), g)
    d = np.array([0.1, 0.0])
    assert np.allclose(apply_csi_error(g, d, 0.1), g + d)
    with pytest.raises(ValueError):
        apply_csi_error(g, 1.01 * d, 0.1)


def test_ball_and_sphere_radius():  # [DERIVED]
    rng = np.random.default_rng(0)
    x = sample_ball(0.3, 6, rng, size=2000)
    assert np.max(np.linalg.norm(x, axis=1)) <= 0.3 + 1e-15
    # uniform in a 12-dim real ball: E||x||^2 = r^2 * 12/14
    assert np.mean(np.sum(np.abs(x) ** 2, 1)) == pytest.approx(0.09 * 12 / 14, rel=0.03)
    s = sample_sphere(0.3, 6, rng, 50)
    assert np.allclose(np.linalg.norm(s, axis=1), 0.3)


# ---- path loss and generation


@given(st.floats(0.1, 500), st.floats(1.0, 50))
def test_path_loss_strictly_decreasing(d, step):  # [PAPER]
    assert path_loss_alice_irs(d + step) < path_loss_alice_irs(d)
    assert path_loss_irs_link(d + step) < path_loss_irs_link(d)


def test_path_loss_rejects_zero_distance():  # [TRIVIAL]
    with pytest.raises(ValueError):
        path_loss_irs_link(0.0)


def test_generation_deterministic():  # [DERIVED]
    cfg = SystemConfig(M=4, K=2, N=8, seed=11, delta_k=0.02, delta_e=0.02)
    a, b = generate_channels(cfg), generate_channels(cfg)
    for f in ("H_AR", "g", "g_e", "g_hat", "g_hat_e", "xi"):
        assert np.array_equal(getattr(a, f), getattr(b, f))


def test_generation_shapes_and_error_radius():  # [PAPER]
    cfg = SystemConfig(M=5, K=3, N=9, seed=2, delta_k=0.05, delta_e=0.05)
    ch = generate_channels(cfg)
    assert ch.H_AR.shape == (9, 5) and ch.g.shape == (3, 9) and ch.g_e.shape == (9,)
    assert np.allclose(ch.xi, 0.05 * np.linalg.norm(ch.g_hat, axis=1))
    assert np.all(np.linalg.norm(ch.g - ch.g_hat, axis=1) <= ch.xi * (1 + 1e-12))
    assert np.linalg.norm(ch.g_e - ch.g_hat_e) <= ch.xi_e * (1 + 1e-12)
    # Eve lies outside the user square
    x0, x1, y0, y1 = cfg.user_area
    e = ch.positions["eve"]
    assert not (x0 <= e[0] <= x1 and y0 <= e[1] <= y1)


def test_perfect_csi_channels_match_estimates():  # [TRIVIAL]
    ch = generate_channels(SystemConfig(M=4, K=2, N=8, seed=3))
    assert ch.perfect and np.array_equal(ch.g, ch.g_hat)


def test_config_validation():  # [TRIVIAL]
    for bad in (dict(M=0), dict(P_T=-1.0), dict(delta_k=1.0), dict(b=0), dict(rician_K=-1)):
        with pytest.raises(ValueError):
            SystemConfig(**bad)


def test_noise_power_default():  # [DERIVED]
    # -174 dBm/Hz over 1 MHz is -114 dBm
    assert SystemConfig().noise_power == pytest.approx(10 ** (-114 / 10) * 1e-3)


def test_random_grid_phase_uniform_over_grid():  # [DERIVED]
    rng = np.random.default_rng(0)
    th = np.concatenate([random_grid_phase(100, 2, rng).theta for _ in range(100)])
    counts = np.bincount(np.round(th / (np.pi / 2)).astype(int) % 4, minlength=4)
    assert np.all(np.abs(counts / th.size - 0.25) < 0.02)
