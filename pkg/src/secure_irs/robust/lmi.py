"""Ball-robust building blocks.

Everything here works in per-receiver normalized units: for a receiver with
estimate ``g_hat``, radius ``xi`` and noise ``sigma`` we pick a scale ``c``
and set ``g' = g_hat / (sqrt(sigma) c)``, ``a' = c a``. Then
``|g' a'|^2 = |g_hat a|^2 / sigma`` is an SNR and the LMIs are well scaled
regardless of path loss. The uncertainty radius is scaled the same way.

Four constraint families are provided, each robust over the ball
``||dg|| <= xi``:

* ``lmi_quad_lower``  -- sum_j |g a_j|^2 >= bound (Lemma-1 minorant + S-procedure)
* ``lmi_norm_upper``  -- sum_j |g a_j|^2 <= bound (Schur + Nemirovski)

together with scalar rate minorants that replace the bilinear ``beta 2^phi``
term by SOC-representable concave/convex bounds.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import brentq

from ..conic import Affine, block, stack


# --------------------------------------------------------------------------
# scalar pieces


def lemma1_expand(w, w_iter, phase, phase_iter, H_AR) -> np.ndarray:
    """Hermitian ``X`` with ``g X g^H <= |g Phi H w|^2`` for every g, tight at the iterate.

    ``phase`` and ``phase_iter`` are angle vectors or unit-modulus vectors.
    """
    a = _diag_apply(phase, H_AR @ np.asarray(w))
    a_bar = _diag_apply(phase_iter, H_AR @ np.asarray(w_iter))
    return tangent_matrix(a, a_bar)


def _diag_apply(phase, x):
    v = np.asarray(phase)
    if np.isrealobj(v):
        v = np.exp(1j * v)
    return v * x


def tangent_matrix(a: np.ndarray, a_bar: np.ndarray) -> np.ndarray:
    """``a a_bar^H + a_bar a^H - a_bar a_bar^H`` (from |x|^2 >= 2 Re(x_bar^* x) - |x_bar|^2)."""
    return np.outer(a, a_bar.conj()) + np.outer(a_bar, a.conj()) - np.outer(a_bar, a_bar.conj())


def taylor_exp_upper(phi, phi_iter, beta, beta_iter, base: float = 2.0):
    """Tangent plane of ``beta * base**phi`` at ``(phi_iter, beta_iter)``.

    ``((phi - phi_iter) beta_iter ln(base) + beta) base**phi_iter``. The product
    is a saddle, so this plane is exact at the iterate but is not a global
    majorant; the robust solvers use :func:`user_rate_minorant` and
    :func:`eve_rate_majorant` instead.
    """
    return ((phi - phi_iter) * beta_iter * math.log(base) + beta) * base ** phi_iter


# --------------------------------------------------------------------------
# trust-region subproblem and exact ball extremes


def trs_min(Q: np.ndarray, b: np.ndarray, c: float, r: float):
    """``min_{||x|| <= r} x^H Q x + 2 Re(b^H x) + c`` for Hermitian Q (exact).

    Returns ``(value, x)``.
    """
    Q = 0.5 * (Q + Q.conj().T)
    N = Q.shape[0]
    if r == 0:
        return float(c), np.zeros(N, dtype=complex)
    lam, U = np.linalg.eigh(Q)
    bt = U.conj().T @ b
    scale = max(np.abs(lam).max(), np.linalg.norm(b) / r, 1e-300)
    tiny = 1e-13 * scale

    def x_of(mu):
        return -(bt / (lam + mu))

    def value(x_t):
        return float(np.real(np.sum(lam * np.abs(x_t) ** 2) + 2 * np.real(np.vdot(bt, x_t)) + c))

    # interior stationary point when Q is positive definite
    if lam[0] > tiny:
        x_t = x_of(0.0)
        if np.linalg.norm(x_t) <= r:
            return value(x_t), U @ x_t
    mu_lo = max(0.0, -lam[0])
    small = np.abs(lam + mu_lo) <= tiny
    # hard case: the gradient has no weight on the bottom eigenspace
    if np.all(np.abs(bt[small]) <= 1e-12 * max(np.linalg.norm(bt), 1e-300)):
        x_t = np.zeros(N, dtype=complex)
        big = ~small
        x_t[big] = -bt[big] / (lam[big] + mu_lo)
        nrm = np.linalg.norm(x_t)
        if nrm <= r:
            idx = np.flatnonzero(small)[0]
            x_t[idx] = math.sqrt(max(r * r - nrm * nrm, 0.0))
            return value(x_t), U @ x_t

    def f(mu):
        return np.linalg.norm(x_of(mu)) - r

    lo = mu_lo + tiny
    while f(lo) < 0:
        lo = mu_lo + (lo - mu_lo) * 1e-3
        if lo - mu_lo < 1e-300:
            break
    hi = mu_lo + max(np.linalg.norm(b) / r, tiny)
    while f(hi) > 0:
        hi = mu_lo + 2 * (hi - mu_lo)
    mu = brentq(f, lo, hi, xtol=1e-15 * max(hi, 1e-300), rtol=1e-14, maxiter=500)
    x_t = x_of(mu)
    x_t *= r / np.linalg.norm(x_t)
    return value(x_t), U @ x_t


def signal_extremes(g: np.ndarray, xi: float, a: np.ndarray):
    """(min, max) of ``|(g + dg) a|^2`` over the ball, in closed form."""
    base = abs(g @ a)
    spread = xi * np.linalg.norm(a)
    return max(base - spread, 0.0) ** 2, (base + spread) ** 2


def norm_extremes(g: np.ndarray, xi: float, A: np.ndarray):
    """(min, max) of ``sum_j |(g + dg) a_j|^2`` over the ball; rows of A are a_j."""
    if A.shape[0] == 0:
        return 0.0, 0.0
    G = A.T @ A.conj()  # sum_j a_j a_j^H
    p = G @ g.conj()
    c0 = float(np.real(g @ p))
    lo, _ = trs_min(G, p, c0, xi)
    hi, _ = trs_min(-G, -p, -c0, xi)
    return max(lo, 0.0), -hi


# --------------------------------------------------------------------------
# receivers in normalized units


@dataclass(frozen=True)
class Receiver:
    g: np.ndarray      # normalized estimate
    xi: float          # normalized radius
    scale: float       # a' = scale * a
    sigma: float       # raw noise power
    extra: float = 0.0  # additional worst-case noise, normalized (AN leakage)

    @classmethod
    def from_raw(cls, g_hat, xi, sigma, extra_raw: float = 0.0) -> "Receiver":
        g_hat = np.asarray(g_hat, dtype=complex)
        N = g_hat.shape[0]
        nrm = np.linalg.norm(g_hat)
        c = nrm / math.sqrt(sigma * N) if nrm > 0 else 1.0 / math.sqrt(sigma)
        s = math.sqrt(sigma) * c
        return cls(g_hat / s, float(xi) / s, c, float(sigma), extra_raw / sigma)


@dataclass
class WorstCase:
    """Decoupled ball extremes for one stream, normalized by noise."""

    t: float        # min signal at the user
    beta: float     # max interference + noise at the user
    t_e: float      # max signal at Eve
    beta_e: float   # min interference + noise at Eve

    @property
    def user_rate(self) -> float:
        return math.log1p(self.t / self.beta)

    @property
    def eve_rate(self) -> float:
        return math.log1p(self.t_e / self.beta_e) if self.beta_e > 0 else float("inf")

    @property
    def secrecy(self) -> float:
        return self.user_rate - self.eve_rate


def frobenius_extremes(g: np.ndarray, xi: float, A: np.ndarray):
    """Outer bounds on ``sum_j |(g+dg) a_j|^2`` over ``||dg|| <= xi``.

    Triangle inequality with ``||B||_op <= ||B||_F``:
    ``(max(0, ||gB|| - xi ||B||_F))^2 <= . <= (||gB|| + xi ||B||_F)^2``.
    Exact for a single row.
    """
    A = np.atleast_2d(A)
    if A.shape[0] == 0:
        return 0.0, 0.0
    c = float(np.linalg.norm(A @ g))
    f = xi * float(np.linalg.norm(A))
    return max(c - f, 0.0) ** 2, (c + f) ** 2


def worst_case(rx: Receiver, rx_e: Optional[Receiver], A: np.ndarray, A_e: Optional[np.ndarray],
               k: int, exact: bool = True) -> WorstCase:
    """Ball extremes for stream k; ``A``/``A_e`` rows are scaled responses a'_j.

    With ``exact=False`` the interference terms use :func:`frobenius_extremes`
    (the bounds the second-order-cone model can represent).
    """
    others = np.arange(A.shape[0]) != k
    extremes = norm_extremes if exact else frobenius_extremes
    t, _ = signal_extremes(rx.g, rx.xi, A[k])
    _, interf = extremes(rx.g, rx.xi, A[others])
    if rx_e is None:
        return WorstCase(t, 1.0 + rx.extra + interf, 0.0, 1.0)
    _, t_e = signal_extremes(rx_e.g, rx_e.xi, A_e[k])
    interf_e, _ = extremes(rx_e.g, rx_e.xi, A_e[others[:A_e.shape[0]]])
    return WorstCase(t, 1.0 + rx.extra + interf, t_e, 1.0 + interf_e)


# --------------------------------------------------------------------------
# LMI builders (Affine in the decision variables)


def _col(x: Affine) -> Affine:
    return x.reshape(-1, 1)


def _scalar(x) -> Affine:
    return x.reshape(1, 1) if isinstance(x, Affine) else Affine.constant(np.full((1, 1), x))


def lmi_quad_lower(g: np.ndarray, xi: float, a: Affine, a_bar: np.ndarray,
                   bound: Affine, mult: Affine) -> Affine:
    """PSD block implying ``sum_j |(g+dg) a_j|^2 >= bound`` for all ``||dg|| <= xi``.

    ``a`` holds rows a_j (m x N), linearized at ``a_bar`` through the tangent
    matrix ``X = sum_j a_j a_bar_j^H + a_bar_j a_j^H - a_bar_j a_bar_j^H``; the
    S-procedure on the ball then yields
    ``[[mult I + X, X g^H], [g X, g X g^H - bound - mult xi^2]] >= 0``.
    """
    N = g.shape[0]
    m = a.shape[0]
    X = None
    Xg = None
    d = None
    for j in range(m):
        aj, abj = a[j], a_bar[j]
        t1 = aj.outer(abj.conj())
        t2 = aj.conj().outer(abj).T
        Xj = t1 + t2 - np.outer(abj, abj.conj())
        ga = aj.dot(g)                      # g a_j (scalar)
        gab = complex(g @ abj)
        Xgj = aj * np.conj(gab) + ga.conj() * abj - abj * np.conj(gab)
        dj = (ga * np.conj(gab)).real * 2 - abs(gab) ** 2
        X = Xj if X is None else X + Xj
        Xg = Xgj if Xg is None else Xg + Xgj
        d = dj if d is None else d + dj
    top = X + np.eye(N) * mult
    corner = d - bound - mult * (xi ** 2)
    return block([[top, _col(Xg)], [_col(Xg).H, _scalar(corner)]])


def lmi_norm_upper(g: np.ndarray, xi: float, a: Affine, bound: Affine, mult: Affine) -> Affine:
    """PSD block implying ``sum_j |(g+dg) a_j|^2 <= bound`` for all ``||dg|| <= xi``.

    Schur complement plus Nemirovski's lemma with multiplier ``mult``:
    ``[[bound - mult, t^H, 0], [t, I, xi B^H], [0, xi B, mult I_N]] >= 0`` with
    ``B = [a_1 ... a_m]`` and ``t = (g B)^H``.
    """
    N = g.shape[0]
    m = a.shape[0]
    t = (a @ g).conj()                      # (m,) = conj(g a_j)
    Bh = a.conj()                           # rows a_j^H -> (m x N) = B^H
    zero_row = np.zeros((1, N))
    rows = [
        [_scalar(bound - mult), _col(t).H, zero_row],
        [_col(t), np.eye(m), Bh * xi],
        [zero_row.T, Bh.H * xi, np.eye(N) * mult],
    ]
    return block(rows)


# --------------------------------------------------------------------------
# rate bounds


def user_rate_minorant(t: Affine, beta: Affine, r: Affine, t_bar: float, beta_bar: float):
    """Affine part of a concave minorant of ``ln(1 + t / beta)``.

    Uses ``ln(y) >= ln(y_bar) + 1 - y_bar / y`` with ``y = beta + t`` and the
    tangent of the convex ``-ln(beta)``. The caller must add the rotated cone
    ``r (beta + t) >= y_bar``; returns ``(expr, y_bar)`` with
    ``phi <= expr``.
    """
    y_bar = beta_bar + t_bar
    expr = (math.log(y_bar) + 1.0 - math.log(beta_bar) + 1.0) - r - beta / beta_bar
    return expr, y_bar


def eve_rate_majorant(t_e: Affine, beta_e: Affine, u: Affine, t_bar: float, beta_bar: float):
    """Affine part of a convex majorant of ``ln(1 + t_e / beta_e)``.

    ``ln(beta_e + t_e)`` is concave (tangent majorizes it) and
    ``-ln(beta_e) = ln(u)`` with ``u >= 1/beta_e`` is majorized by its
    tangent in u. The caller adds ``u beta_e >= 1``.
    """
    e_bar = beta_bar + t_bar
    u_bar = 1.0 / beta_bar
    expr = (math.log(e_bar) - 1.0 + math.log(u_bar) - 1.0) + (beta_e + t_e) / e_bar + u / u_bar
    return expr
