"""Ball-robust building blocks: Lemma-1 tangent, exact ball extremes, LMIs."""
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from secure_irs import conic
from secure_irs.channel import sample_ball, sample_sphere
from secure_irs.robust.lmi import (
    Receiver,
    eve_rate_majorant,
    frobenius_extremes,
    lemma1_expand,
    lmi_norm_upper,
    lmi_quad_lower,
    norm_extremes,
    signal_extremes,
    taylor_exp_upper,
    trs_min,
    user_rate_minorant,
    worst_case,
)


def _cplx(rng, *shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


def _ball(rng, xi, N, count):
    return np.vstack([sample_sphere(xi, N, rng, count // 2),
                      sample_ball(xi, N, rng, size=count - count // 2)])


# ---- Lemma-1 tangent


def test_lemma1_tight_and_dominated():  # [DERIVED]
    rng = np.random.default_rng(0)
    N, M = 6, 3
    H = _cplx(rng, N, M)
    g = _cplx(rng, N)
    w_bar, th_bar = _cplx(rng, M), rng.uniform(0, 2 * np.pi, N)
    X = lemma1_expand(w_bar, w_bar, th_bar, th_bar, H)
    exact = abs(g @ (np.exp(1j * th_bar) * (H @ w_bar))) ** 2
    assert np.real(g @ X @ g.conj()) == pytest.approx(exact, rel=1e-12)  # [TRIVIAL]
    for _ in range(100):  # [DERIVED]
        w, th = _cplx(rng, M), rng.uniform(0, 2 * np.pi, N)
        X = lemma1_expand(w, w_bar, th, th_bar, H)
        val = abs(g @ (np.exp(1j * th) * (H @ w))) ** 2
        assert np.real(g @ X @ g.conj()) <= val + 1e-9 * max(1, val)


def test_scalar_tangent_inequality():  # [DERIVED] 2 Re(x_bar* x) - |x_bar|^2 = 3 <= 4
    x_bar, x = 1.0, 2.0
    assert 2 * x_bar * x - x_bar ** 2 == 3 <= abs(x) ** 2


# ---- exponential tangent


def test_taylor_exp_cases():  # [TRIVIAL]
    assert taylor_exp_upper(1, 1, 1, 1) == pytest.approx(2.0)  # [TRIVIAL]
    assert taylor_exp_upper(2.0, 0.5, 0.0, 1.3) == pytest.approx(1.5 * 1.3 * math.log(2) * 2 ** 0.5)


def test_taylor_exp_not_a_majorant():  # [DERIVED]
    # the product beta 2^phi is a saddle; its tangent plane undercuts it somewhere
    assert taylor_exp_upper(1.0, 0.0, 1.0, 1.0) == pytest.approx(1 + math.log(2))
    assert 1 + math.log(2) < 2.0


# ---- scalar rate bounds


@settings(max_examples=80, deadline=None)
@given(st.floats(0, 50), st.floats(0.5, 50), st.floats(0.01, 50), st.floats(0.5, 50))
def test_user_rate_minorant(t, beta, t_bar, beta_bar):  # [DERIVED]
    expr, y_bar = user_rate_minorant(t, beta, 0.0, t_bar, beta_bar)
    r = y_bar / (beta + t)  # smallest r allowed by the rotated cone
    assert expr - r <= math.log1p(t / beta) + 1e-9
    e0, _ = user_rate_minorant(t_bar, beta_bar, 0.0, t_bar, beta_bar)
    assert e0 - 1.0 == pytest.approx(math.log1p(t_bar / beta_bar), abs=1e-12)


@settings(max_examples=80, deadline=None)
@given(st.floats(0, 50), st.floats(0.5, 50), st.floats(0.01, 50), st.floats(0.5, 50))
def test_eve_rate_majorant(t, beta, t_bar, beta_bar):  # [DERIVED]
    u = 1.0 / beta  # smallest u allowed by u beta >= 1
    assert eve_rate_majorant(t, beta, u, t_bar, beta_bar) >= math.log1p(t / beta) - 1e-9
    tight = eve_rate_majorant(t_bar, beta_bar, 1 / beta_bar, t_bar, beta_bar)
    assert tight == pytest.approx(math.log1p(t_bar / beta_bar), abs=1e-12)


# ---- trust region and ball extremes


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000), st.floats(0.01, 3.0))
def test_trs_beats_sampling(seed, r):  # [DERIVED]
    rng = np.random.default_rng(seed)
    N = 4
    B = _cplx(rng, N, N)
    Q = B + B.conj().T
    b = _cplx(rng, N)
    val, x = trs_min(Q, b, 0.7, r)
    f = lambda z: np.real(np.einsum("si,ij,sj->s", z.conj(), Q, z) + 2 * np.real(z @ b.conj())) + 0.7
    assert np.linalg.norm(x) <= r * (1 + 1e-9)
    assert f(x[None])[0] == pytest.approx(val, abs=1e-8 * max(1, abs(val)))
    assert np.min(f(_ball(rng, r, N, 4000))) >= val - 1e-8 * max(1, abs(val))


def test_trs_hard_case():  # [TRIVIAL]
    Q = np.diag([-1.0, 2.0]).astype(complex)
    val, x = trs_min(Q, np.zeros(2, complex), 0.0, 1.0)
    assert val == pytest.approx(-1.0) and np.linalg.norm(x) == pytest.approx(1.0)


def test_signal_extremes_closed_form():  # [DERIVED]
    rng = np.random.default_rng(3)
    g, a = _cplx(rng, 5), _cplx(rng, 5)
    xi = 0.3
    lo, hi = signal_extremes(g, xi, a)
    vals = np.abs((g + _ball(rng, xi, 5, 5000)) @ a) ** 2
    assert vals.min() >= lo - 1e-9 and vals.max() <= hi + 1e-9
    # attained by the aligned boundary errors
    ph = np.exp(1j * np.angle(g @ a))
    d = xi * ph * a.conj() / np.linalg.norm(a)
    assert abs((g + d) @ a) ** 2 == pytest.approx(hi)


def test_norm_extremes_between_samples_and_frobenius():  # [DERIVED]
    rng = np.random.default_rng(4)
    g, A = _cplx(rng, 6), _cplx(rng, 3, 6)
    xi = 0.4
    lo, hi = norm_extremes(g, xi, A)
    flo, fhi = frobenius_extremes(g, xi, A)
    vals = np.sum(np.abs((g + _ball(rng, xi, 6, 5000)) @ A.T) ** 2, axis=1)
    assert lo - 1e-9 <= vals.min() and vals.max() <= hi + 1e-9
    assert flo <= lo + 1e-12 and fhi >= hi - 1e-12
    # single row: the two coincide
    assert np.allclose(norm_extremes(g, xi, A[:1]), frobenius_extremes(g, xi, A[:1]))


def test_receiver_normalization():  # [TRIVIAL]
    rng = np.random.default_rng(5)
    g_hat, a = _cplx(rng, 8) * 1e-4, _cplx(rng, 8)
    sigma = 1e-11
    rx = Receiver.from_raw(g_hat, 1e-5, sigma)
    assert np.linalg.norm(rx.g) == pytest.approx(np.sqrt(8))
    assert abs(rx.g @ (rx.scale * a)) ** 2 == pytest.approx(abs(g_hat @ a) ** 2 / sigma)
    assert rx.xi / np.linalg.norm(rx.g) == pytest.approx(1e-5 / np.linalg.norm(g_hat))


def test_worst_case_rates():  # [DERIVED]
    rng = np.random.default_rng(6)
    rx = Receiver.from_raw(_cplx(rng, 6), 0.1, 1.0)
    rx_e = Receiver.from_raw(_cplx(rng, 6), 0.1, 1.0)
    A, A_e = _cplx(rng, 2, 6), _cplx(rng, 2, 6)
    wc = worst_case(rx, rx_e, A, A_e, 0)
    t_lo, _ = signal_extremes(rx.g, rx.xi, A[0])
    assert wc.t == pytest.approx(t_lo)
    assert wc.secrecy == pytest.approx(wc.user_rate - wc.eve_rate)
    assert worst_case(rx, None, A, None, 0).t_e == 0.0


# ---- LMI families: soundness over the ball


def _solve_quad_lower(g, xi, a_val):
    """Largest bound certified by the S-procedure block at a fixed point."""
    mdl = conic.Model()
    bound = mdl.real_var("bound")
    mult = mdl.real_var("mult")
    mdl.add_nonneg(mult, "mult >= 0")
    a = conic.Affine.constant(a_val, mdl.n)
    mdl.add_psd(lmi_quad_lower(g, xi, a, a_val, bound, mult), "S-procedure")
    mdl.maximize(bound)
    return mdl.solve()


def _solve_norm_upper(g, xi, a_val):
    mdl = conic.Model()
    bound = mdl.real_var("bound")
    mult = mdl.real_var("mult")
    mdl.add_nonneg(mult, "mult >= 0")
    a = conic.Affine.constant(a_val, mdl.n)
    mdl.add_psd(lmi_norm_upper(g, xi, a, bound, mult), "Nemirovski")
    mdl.minimize(bound)
    return mdl.solve()


@pytest.mark.parametrize("seed", range(3))
def test_lmi_blocks_sound_and_exact(seed):  # [DERIVED]
    rng = np.random.default_rng(seed)
    N = 5
    g = _cplx(rng, N)
    xi = 0.2 * np.linalg.norm(g)
    a1, A = _cplx(rng, 1, N), _cplx(rng, 2, N)
    lo = _solve_quad_lower(g, xi, a1)
    hi = _solve_norm_upper(g, xi, A)
    assert lo.ok and hi.ok
    s1 = np.abs((g + _ball(rng, xi, N, 1000)) @ a1.T) ** 2
    s2 = np.sum(np.abs((g + _ball(rng, xi, N, 1000)) @ A.T) ** 2, axis=1)
    tol = 1e-6 * max(1.0, s2.max())
    assert s1.min() >= lo.objective - tol  # [DERIVED] Monte-Carlo ball oracle
    assert s2.max() <= hi.objective + tol
    # both certificates are tight against the exact extremes
    assert lo.objective == pytest.approx(signal_extremes(g, xi, a1[0])[0], rel=1e-5, abs=1e-6)
    assert hi.objective == pytest.approx(norm_extremes(g, xi, A)[1], rel=1e-5)


def test_lmi_zero_radius_is_nominal():  # [TRIVIAL]
    rng = np.random.default_rng(9)
    g, A = _cplx(rng, 4), _cplx(rng, 2, 4)
    assert _solve_norm_upper(g, 0.0, A).objective == pytest.approx(
        np.sum(np.abs(A @ g) ** 2), rel=1e-6)
    assert _solve_quad_lower(g, 0.0, A[:1]).objective == pytest.approx(
        abs(A[0] @ g) ** 2, rel=1e-6)


def test_lmi_infeasible_target_detected():  # [TRIVIAL]
    rng = np.random.default_rng(10)
    g, a = _cplx(rng, 4), _cplx(rng, 1, 4)
    xi = 0.1
    cap = signal_extremes(g, xi, a[0])[1]
    mdl = conic.Model()
    mult = mdl.real_var("mult")
    mdl.add_nonneg(mult, "mult >= 0")
    aff = conic.Affine.constant(a, mdl.n)
    mdl.add_psd(lmi_quad_lower(g, xi, aff, a, 2 * cap, mult), "target above capacity")
    mdl.minimize(mult)
    assert mdl.solve().status == "infeasible"
