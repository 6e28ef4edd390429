"""Concave minorants of user rate, Eve rate and secrecy rate.

Every bound here is built at an iterate and is (a) a global lower bound on
the pre-clamp secrecy rate and (b) exact at the iterate. The bounds are
first written in the complex link gains x_ij = h_i w_j as

    c0 + sum_j 2 Re(conj(cu_j) xu_j) - du_j |xu_j|^2
       + sum_j 2 Re(conj(ce_j) xe_j) - de_j |xe_j|^2

and then mapped into the beamformer domain (x linear in w) or the phase
domain (x linear in v = exp(j theta)).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .channel import ChannelSet, PhaseConfig, cascaded_channel

FLOOR = 1e-30


# --------------------------------------------------------------------------
# elementary inequalities


def _outer2(A):
    A = np.atleast_2d(A)
    return A @ A.conj().T


def bound_logdet_lower(A, B, A_hat, B_hat) -> float:
    """Minorant of ``ln det(I + A A^H B^-1)`` expanded at ``(A_hat, B_hat)``.

    Scalars are promoted to 1x1 matrices. B and B_hat must be positive
    definite.
    """
    A = np.atleast_2d(np.asarray(A, dtype=complex))
    A_hat = np.atleast_2d(np.asarray(A_hat, dtype=complex))
    B = np.atleast_2d(np.asarray(B, dtype=complex))
    B_hat = np.atleast_2d(np.asarray(B_hat, dtype=complex))
    n = B.shape[0]
    Bi = np.linalg.inv(B_hat)
    AA_hat = _outer2(A_hat)
    _, logdet = np.linalg.slogdet(np.eye(n) + AA_hat @ Bi)
    inner = Bi - np.linalg.inv(B_hat + AA_hat)
    val = (logdet
           - np.trace(AA_hat @ Bi)
           + 2 * np.trace(A_hat.conj().T @ Bi @ A)
           - np.trace(inner.conj().T @ (_outer2(A) + B)))
    # the trace of A_hat^H Bi A enters through its real part only
    return float(np.real(val))


def logdet_exact(A, B) -> float:
    A = np.atleast_2d(np.asarray(A, dtype=complex))
    B = np.atleast_2d(np.asarray(B, dtype=complex))
    _, val = np.linalg.slogdet(np.eye(B.shape[0]) + _outer2(A) @ np.linalg.inv(B))
    return float(val)


def bound_logsum_lower(a, a_bar) -> float:
    """Minorant of ``ln(1 + sum |a_i|^2)`` expanded at ``a_bar``."""
    a = np.asarray(a, dtype=complex).ravel()
    a_bar = np.asarray(a_bar, dtype=complex).ravel()
    if a.shape != a_bar.shape:
        raise ValueError("a and a_bar must have the same length")
    S_bar = float(np.sum(np.abs(a_bar) ** 2))
    S = float(np.sum(np.abs(a) ** 2))
    lin = 2 * float(np.real(np.vdot(a_bar, a)))
    return float(np.log1p(S_bar) - S_bar + lin - S_bar * (1 + S) / (1 + S_bar))


def bound_neglog_lower(s: float, s_bar: float) -> float:
    """Minorant of ``-ln(1 + s)`` that is affine in ``s``."""
    return float(-np.log1p(s_bar) - (1 + s) / (1 + s_bar) + 1)


# --------------------------------------------------------------------------
# coefficient container


@dataclass
class SurrogateCoeffs:
    """Constant/linear/quadratic coefficients of a minorant.

    ``domain`` is one of

    * ``"beamformer"``: value(w) = q + 2 Re sum_j m_j^H w_j - sum_j w_j^H psi_j w_j,
      with ``m`` of shape (K, M) and ``psi`` of shape (K, M, M);
    * ``"phase"``: value(theta) = q + 2 Re sum_n m_n exp(j theta_n), ``m`` of
      shape (N,); ``psi`` keeps the quadratic weight that was majorized away
      and ``quadratic`` the intermediate bound;
    * ``"phase_quadratic"``: value(v) = q + 2 Re(m^T v) - v^H psi v.
    """

    q: float
    m: np.ndarray
    psi: Optional[np.ndarray]
    domain: str
    lam: float = 0.0
    quadratic: Optional["SurrogateCoeffs"] = None
    extras: dict = field(default_factory=dict)

    def __call__(self, x) -> float:
        return self.evaluate(x)

    def evaluate(self, x) -> float:
        if self.domain == "beamformer":
            w = np.asarray(x)
            lin = 2 * np.real(np.sum(self.m.conj() * w))
            quad = np.real(np.einsum("ki,kij,kj->", w.conj(), self.psi, w))
            return float(self.q + lin - quad)
        v = _as_vector(x)
        lin = 2 * np.real(self.m @ v)
        if self.domain == "phase":
            return float(self.q + lin)
        if self.domain == "phase_quadratic":
            return float(self.q + lin - np.real(v.conj() @ self.psi @ v))
        raise ValueError(f"unknown domain {self.domain}")

    def evaluate_batch(self, X) -> np.ndarray:
        """Vectorized evaluation over a leading sample axis."""
        X = np.asarray(X)
        if self.domain == "beamformer":
            lin = 2 * np.real(np.einsum("kj,skj->s", self.m.conj(), X))
            quad = np.real(np.einsum("ski,kij,skj->s", X.conj(), self.psi, X))
            return self.q + lin - quad
        V = np.exp(1j * X) if np.isrealobj(X) else X
        lin = 2 * np.real(V @ self.m)
        if self.domain == "phase":
            return self.q + lin
        return self.q + lin - np.real(np.einsum("si,ij,sj->s", V.conj(), self.psi, V))

    def __add__(self, other: "SurrogateCoeffs") -> "SurrogateCoeffs":
        if other.domain != self.domain:
            raise ValueError("cannot add coefficients from different domains")
        psi = None if self.psi is None else self.psi + other.psi
        quad = None
        if self.quadratic is not None and other.quadratic is not None:
            quad = self.quadratic + other.quadratic
        return SurrogateCoeffs(self.q + other.q, self.m + other.m, psi, self.domain,
                               self.lam + other.lam, quad)

    def __radd__(self, other):
        if other == 0:
            return self
        return self.__add__(other)


def _as_vector(x) -> np.ndarray:
    if isinstance(x, PhaseConfig):
        # phase-domain coefficients already carry the PSE rotation
        return np.exp(1j * x.theta)
    x = np.asarray(x)
    return np.exp(1j * x) if np.isrealobj(x) else x


# --------------------------------------------------------------------------
# scalar minorants in the link gains


@dataclass
class _Scalars:
    c0: float
    cu: np.ndarray
    du: np.ndarray
    ce: np.ndarray
    de: np.ndarray
    info: dict


def _user_scalars(xu: np.ndarray, sigma: float, k: int) -> _Scalars:
    K = xu.shape[0]
    p = np.abs(xu) ** 2
    rho = max(p.sum() - p[k] + sigma, FLOOR)
    ups = max(rho + p[k], FLOOR)
    gamma = p[k] / rho
    n = 1.0 / rho - 1.0 / ups
    cu = np.zeros(K, dtype=complex)
    cu[k] = xu[k] / rho
    return _Scalars(
        c0=float(np.log1p(gamma) - gamma - n * sigma),
        cu=cu, du=np.full(K, n),
        ce=np.zeros(K, dtype=complex), de=np.zeros(K),
        info={"rho": rho, "upsilon": ups, "n": n, "gamma": gamma},
    )


def _eve_scalars(xe: np.ndarray, sigma_e: float, k: int) -> _Scalars:
    K = xe.shape[0]
    p = np.abs(xe) ** 2 / sigma_e
    others = np.arange(K) != k
    S1 = float(p[others].sum())
    S = float(p.sum())
    ce = np.where(others, xe / sigma_e, 0)
    de = np.full(K, 1.0 / ((1 + S) * sigma_e))
    de[others] += S1 / ((1 + S1) * sigma_e)
    c0 = (np.log1p(S1) - S1 - S1 / (1 + S1)) + (-np.log1p(S) - 1.0 / (1 + S) + 1.0)
    return _Scalars(
        c0=float(c0), cu=np.zeros(K, dtype=complex), du=np.zeros(K),
        ce=ce.astype(complex), de=de,
        info={"S_interf": S1, "S_total": S},
    )


def _combine(sc_u: _Scalars, sc_e: _Scalars) -> _Scalars:
    return _Scalars(sc_u.c0 + sc_e.c0, sc_u.cu, sc_u.du, sc_e.ce, sc_e.de,
                    {**sc_u.info, **sc_e.info})


def _links(channels: ChannelSet, phase, w):
    h = cascaded_channel(channels.g, phase, channels.H_AR)
    h_e = cascaded_channel(channels.g_e, phase, channels.H_AR)
    return h, h_e, h @ w.T, h_e @ w.T


def _to_beamformer(sc: _Scalars, h_k: np.ndarray, h_e: np.ndarray) -> SurrogateCoeffs:
    K = sc.cu.shape[0]
    Gk = np.outer(h_k.conj(), h_k)
    Ge = np.outer(h_e.conj(), h_e)
    m = sc.cu[:, None] * h_k.conj()[None, :] + sc.ce[:, None] * h_e.conj()[None, :]
    psi = sc.du[:, None, None] * Gk[None] + sc.de[:, None, None] * Ge[None]
    extras = dict(sc.info, du=sc.du.copy(), de=sc.de.copy())
    return SurrogateCoeffs(sc.c0, m, psi, "beamformer", extras=extras)


def _bf(bf):
    return bf.w if hasattr(bf, "w") else np.asarray(bf)


def user_rate_lower_w(channels: ChannelSet, phase, bf_iterate, k: int) -> SurrogateCoeffs:
    """Minorant of C_k as a function of all beams, tight at ``bf_iterate``."""
    w = _bf(bf_iterate)
    h, h_e, Xu, _ = _links(channels, phase, w)
    sc = _user_scalars(Xu[k], channels.sigma[k], k)
    return _to_beamformer(sc, h[k], h_e)


def eve_rate_upper_w(channels: ChannelSet, phase, bf_iterate, k: int) -> SurrogateCoeffs:
    """Minorant of ``-C_e`` for stream k (so ``-value`` upper-bounds Eve's rate)."""
    w = _bf(bf_iterate)
    h, h_e, _, Xe = _links(channels, phase, w)
    sc = _eve_scalars(Xe, channels.sigma_e, k)
    return _to_beamformer(sc, h[k], h_e)


def sr_surrogate_w(channels: ChannelSet, phase, bf_iterate, k: int) -> SurrogateCoeffs:
    """Concave quadratic minorant of the pre-clamp secrecy rate of user k in w."""
    w = _bf(bf_iterate)
    h, h_e, Xu, Xe = _links(channels, phase, w)
    return _to_beamformer(_combine(_user_scalars(Xu[k], channels.sigma[k], k),
                                   _eve_scalars(Xe, channels.sigma_e, k)), h[k], h_e)


def ssr_surrogate_w(channels: ChannelSet, phase, bf_iterate) -> SurrogateCoeffs:
    K = channels.K
    return sum(sr_surrogate_w(channels, phase, bf_iterate, k) for k in range(K))


# --------------------------------------------------------------------------
# phase domain


def element_gains(g: np.ndarray, H_AR: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Per-element responses ``a[j, n] = g[n] (H_AR w_j)[n]`` so that h(theta) w_j = a_j^T v."""
    return g[None, :] * (w @ H_AR.T)


def _to_phase_quadratic(sc: _Scalars, A_u: np.ndarray, A_e: np.ndarray) -> SurrogateCoeffs:
    # rows of A_u/A_e are a_{k,j} / a_{e,j}; x = a^T v
    mu = (sc.cu.conj()[:, None] * A_u).sum(0) + (sc.ce.conj()[:, None] * A_e).sum(0)
    Phi = np.einsum("j,jn,jm->nm", sc.du, A_u.conj(), A_u) + \
        np.einsum("j,jn,jm->nm", sc.de, A_e.conj(), A_e)
    Phi = 0.5 * (Phi + Phi.conj().T)
    return SurrogateCoeffs(sc.c0, mu, Phi, "phase_quadratic", extras=dict(sc.info))


def linearize_quadratic(quad: SurrogateCoeffs, v_bar: np.ndarray,
                        tol: float = 1e-10) -> SurrogateCoeffs:
    """Majorize ``v^H Phi v`` on the unit-modulus torus by ``lambda_max I``.

    Returns a linear-in-v minorant exact at ``v_bar``.
    """
    Phi = quad.psi
    N = Phi.shape[0]
    lam = float(np.linalg.eigvalsh(Phi)[-1])
    lam = max(lam, 0.0) + tol * max(1.0, abs(lam))
    B = Phi - lam * np.eye(N)
    q = quad.q - 2 * lam * N + float(np.real(v_bar.conj() @ Phi @ v_bar))
    m = quad.m - np.conj(B @ v_bar)
    return SurrogateCoeffs(q, m, Phi, "phase", lam=lam, quadratic=quad,
                           extras=dict(quad.extras))


def sr_surrogate_theta(channels: ChannelSet, bf, phase_iterate: PhaseConfig, k: int,
                       linear: bool = True) -> SurrogateCoeffs:
    """Minorant of the pre-clamp secrecy rate of user k over the phase torus.

    The result is affine in ``exp(j theta)`` and exact at ``phase_iterate``.
    Set ``linear=False`` for the intermediate quadratic bound.
    """
    w = _bf(bf)
    _, _, Xu, Xe = _links(channels, phase_iterate, w)
    sc = _combine(_user_scalars(Xu[k], channels.sigma[k], k),
                  _eve_scalars(Xe, channels.sigma_e, k))
    # PSE is folded into the element responses so that v spans the nominal phases
    pse_rot = np.exp(1j * phase_iterate.pse)
    A_u = element_gains(channels.g[k] * pse_rot, channels.H_AR, w)
    A_e = element_gains(channels.g_e * pse_rot, channels.H_AR, w)
    quad = _to_phase_quadratic(sc, A_u, A_e)
    if not linear:
        return quad
    return linearize_quadratic(quad, np.exp(1j * phase_iterate.theta))


def ssr_surrogate_theta(channels: ChannelSet, bf, phase_iterate: PhaseConfig) -> SurrogateCoeffs:
    return sum(sr_surrogate_theta(channels, bf, phase_iterate, k) for k in range(channels.K))


def maximize_linear_phase(coeffs: SurrogateCoeffs) -> np.ndarray:
    """Closed-form maximizer ``theta_n = 2 pi - angle(m_n)`` on the continuous torus."""
    return np.mod(2 * np.pi - np.angle(coeffs.m), 2 * np.pi)
