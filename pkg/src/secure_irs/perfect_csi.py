"""Alternating optimization under perfect CSI.

Two problems are handled: the max-min secrecy rate (beam step is a small
SOCP, phase step picks among per-user closed-form candidates) and the sum
secrecy rate (beam step in closed form with a bisected power multiplier,
phase step from the summed coefficients). Phase candidates are accepted on
the true objective, so histories never decrease. The max-min history holds
the smallest secrecy rate before clamping, so progress is visible even while
every user is below zero. Each outer iteration repeats the beam step until
it stalls before the phase step runs.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from . import conic
from .channel import (
    BeamformingSet,
    ChannelSet,
    PhaseConfig,
    SystemConfig,
    cascaded_channel,
    mrt_beams,
    quantize_phase,
    random_grid_phase,
    secrecy_rates,
)
from .surrogate import (
    SurrogateCoeffs,
    maximize_linear_phase,
    sr_surrogate_theta,
    sr_surrogate_w,
)

EPS_T = 1e-3
MAX_ITER = 100
INNER_W_ITER = 30
COND_LIMIT = 1e12


@dataclass
class AOState:
    iteration: int
    bf: BeamformingSet
    phase: PhaseConfig
    history: List[float] = field(default_factory=list)
    status: str = "running"
    failures: int = 0
    info: dict = field(default_factory=dict)

    @property
    def objective(self) -> float:
        return self.history[-1] if self.history else float("nan")


def min_sr(bf, phase, channels) -> float:
    return float(np.min(secrecy_rates(bf, phase, channels)))


def min_sr_raw(bf, phase, channels) -> float:
    """Smallest secrecy rate before clamping; the max-min objective being tracked."""
    return float(np.min(secrecy_rates(bf, phase, channels, clamp=False)))


def sum_sr(bf, phase, channels) -> float:
    return float(np.sum(secrecy_rates(bf, phase, channels)))


def initial_state(config: SystemConfig, channels: ChannelSet,
                  rng: Optional[np.random.Generator] = None) -> AOState:
    """Random grid phases and equal-power matched-filter beams."""
    if rng is None:
        rng = np.random.default_rng(config.seed)
    phase = random_grid_phase(channels.N, config.b, rng)
    h = cascaded_channel(channels.g, phase, channels.H_AR)
    return AOState(0, BeamformingSet(mrt_beams(h, config.P_T)), phase)


# --------------------------------------------------------------------------
# beam steps


def solve_w_maxmin(channels: ChannelSet, phase: PhaseConfig, state: AOState,
                   P_T: float, tol: float = 1e-8):
    """Maximize the smallest beam-domain surrogate under the power budget.

    Returns ``(BeamformingSet, Gamma, ConicSolution)``; on solver failure the
    incumbent beams are returned and ``Gamma`` is ``nan``.
    """
    K, M = channels.K, channels.M
    coeffs = [sr_surrogate_w(channels, phase, state.bf, k) for k in range(K)]
    scale = math.sqrt(P_T)
    mdl = conic.Model()
    U = mdl.complex_var("u", (K, M))  # w = sqrt(P_T) u
    gam = mdl.real_var("Gamma")
    t = mdl.real_var("t", K)
    mdl.add_soc(1.0, U.reshape(-1), "power budget")
    h = cascaded_channel(channels.g, phase, channels.H_AR)
    h_e = cascaded_channel(channels.g_e, phase, channels.H_AR)
    for k, c in enumerate(coeffs):
        # psi_kj = du_j h_k^H h_k + de_j h_e^H h_e, so the quadratic term is
        # sum_j du_j |h_k w_j|^2 + de_j |h_e w_j|^2
        du, de = c.extras["du"], c.extras["de"]
        yu = (U @ h[k]) * (scale * np.sqrt(np.maximum(du, 0.0)))
        ye = (U @ h_e) * (scale * np.sqrt(np.maximum(de, 0.0)))
        z = conic.stack([yu, ye]).reshape(-1)
        mdl.add_rsoc(t[k], 1.0, z, f"surrogate quadratic user {k}")
        lin = 2 * (U.reshape(-1).dot((scale * c.m).reshape(-1).conj())).real
        mdl.add_nonneg(lin + c.q - t[k] - gam, f"min-rate epigraph user {k}")
    mdl.maximize(gam)
    sol = mdl.solve(tol=tol)
    if not sol.ok:
        return state.bf.copy(), float("nan"), sol
    x = sol.x
    sl = mdl.var_slices["u"]
    u = x[sl]
    n = K * M
    w = scale * (u[:n] + 1j * u[n:]).reshape(K, M)
    # guard the budget against solver round-off
    p = np.sum(np.abs(w) ** 2)
    if p > P_T:
        w *= math.sqrt(P_T / p)
    return BeamformingSet(w), float(sol.objective), sol


def _regularize(psi: np.ndarray) -> np.ndarray:
    M = psi.shape[0]
    ev = np.linalg.eigvalsh(psi)
    tr = max(np.trace(psi).real, 1e-300)
    if ev[0] <= 0 or ev[-1] / ev[0] > COND_LIMIT:
        psi = psi + 1e-12 * tr / M * np.eye(M)
    return psi


def lagrangian_beams(m: np.ndarray, psi: np.ndarray, P_T: float,
                     rel_tol: float = 1e-6, max_iter: int = 200):
    """Maximize ``sum_j 2 Re m_j^H w_j - w_j^H psi_j w_j`` s.t. ``sum ||w_j||^2 <= P_T``.

    Returns ``(w, varpi)``. The multiplier is found by bisection on the
    monotone power function; with an inactive budget ``varpi = 0``.
    """
    K, M = m.shape
    psi = np.array([_regularize(0.5 * (p + p.conj().T)) for p in psi])
    # eigen-decompose once so each trial multiplier is cheap
    eig = [np.linalg.eigh(p) for p in psi]
    proj = [V.conj().T @ m[j] for j, (_, V) in enumerate(eig)]

    def beams(varpi):
        return np.array([V @ (c / (lam + varpi)) for (lam, V), c in zip(eig, proj)])

    def power(varpi):
        return float(sum(np.sum(np.abs(c) ** 2 / (lam + varpi) ** 2)
                         for (lam, _), c in zip(eig, proj)))

    if power(0.0) <= P_T:
        return beams(0.0), 0.0
    lo, hi = 0.0, 1.0
    scale = max(max(np.abs(lam).max() for lam, _ in eig), 1e-300)
    hi = scale
    n = 0
    while power(hi) > P_T:
        hi *= 2.0
        n += 1
        if n > 2000:
            raise RuntimeError("bisection bracket not found")
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        if power(mid) > P_T:
            lo = mid
        else:
            hi = mid
        if abs(power(hi) - P_T) <= rel_tol * P_T * 0.5:
            break
    w = beams(hi)
    return w, hi


def ssr_active_surrogate(channels, phase, bf) -> SurrogateCoeffs:
    """Tight minorant of the clamped SSR in the beams.

    Users whose secrecy rate is nonpositive at ``bf`` contribute the constant
    zero (a valid and tight minorant of ``[x]^+`` there). If no user is
    active the full pre-clamp sum is used so the step still moves.
    """
    sr = secrecy_rates(bf, phase, channels, clamp=False)
    active = [k for k in range(channels.K) if sr[k] > 0] or list(range(channels.K))
    return sum(sr_surrogate_w(channels, phase, bf, k) for k in active)


def solve_w_ssr(channels: ChannelSet, phase: PhaseConfig, state: AOState, P_T: float):
    c = ssr_active_surrogate(channels, phase, state.bf)
    w, varpi = lagrangian_beams(c.m, c.psi, P_T)
    return BeamformingSet(w), varpi, c


# --------------------------------------------------------------------------
# phase steps


def phase_candidate(coeffs: SurrogateCoeffs, b) -> np.ndarray:
    return quantize_phase(maximize_linear_phase(coeffs), b)


def update_theta_maxmin(channels: ChannelSet, bf, state: AOState, b) -> PhaseConfig:
    """Best of the per-user closed-form candidates and the incumbent, by true min-SR."""
    best = state.phase
    best_val = min_sr_raw(bf, best, channels)
    for k in range(channels.K):
        c = sr_surrogate_theta(channels, bf, state.phase, k)
        cand = PhaseConfig(phase_candidate(c, b), b, state.phase.pse)
        val = min_sr_raw(bf, cand, channels)
        if val > best_val:  # strict: ties keep the incumbent / lowest index
            best, best_val = cand, val
    return best


def update_theta_ssr(channels: ChannelSet, bf, state: AOState, b) -> PhaseConfig:
    sr = secrecy_rates(bf, state.phase, channels, clamp=False)
    active = [k for k in range(channels.K) if sr[k] > 0] or list(range(channels.K))
    c = sum(sr_surrogate_theta(channels, bf, state.phase, k) for k in active)
    cand = PhaseConfig(phase_candidate(c, b), b, state.phase.pse)
    if sum_sr(bf, cand, channels) > sum_sr(bf, state.phase, channels):
        return cand
    return state.phase


# --------------------------------------------------------------------------
# drivers


def converged(prev: float, cur: float, eps: float) -> bool:
    if not np.isfinite(eps):
        return True
    return abs(cur - prev) <= eps * max(abs(prev), 1e-12)


def _run(config, channels, w_step, theta_step, objective, state, eps, max_iter,
         inner_w_iter=INNER_W_ITER):
    b = config.bits
    if state is None:
        state = initial_state(config, channels)
    state.history = [objective(state.bf, state.phase, channels)]
    for it in range(1, max_iter + 1):
        state.iteration = it
        # inner beam loop: repeat the beam step until it stalls
        cur = objective(state.bf, state.phase, channels)
        for _ in range(inner_w_iter):
            bf = w_step(state)
            if bf is None:
                state.failures += 1
                break
            val = objective(bf, state.phase, channels)
            # keep the incumbent if round-off made the beam step worse
            if val < cur:
                break
            state.bf, prev, cur = bf, cur, val
            if converged(prev, cur, eps):
                break
        state.phase = theta_step(state, b)
        state.history.append(objective(state.bf, state.phase, channels))
        if converged(state.history[-2], state.history[-1], eps):
            state.status = "converged"
            return state
    state.status = "max_iter"
    return state


def run_maxmin_ao(config: SystemConfig, channels: ChannelSet, eps: float = EPS_T,
                  max_iter: int = MAX_ITER, state: Optional[AOState] = None) -> AOState:
    """Max-min secrecy rate by alternating the SOCP beam step and phase candidates."""

    def w_step(st):
        bf, _, sol = solve_w_maxmin(channels, st.phase, st, config.P_T)
        return bf if sol.ok else None

    def th_step(st, b):
        return update_theta_maxmin(channels, st.bf, st, b)

    return _run(config, channels, w_step, th_step, min_sr_raw, state, eps, max_iter)


def run_ssr_ao(config: SystemConfig, channels: ChannelSet, eps: float = EPS_T,
               max_iter: int = MAX_ITER, state: Optional[AOState] = None) -> AOState:
    """Sum secrecy rate with the closed-form beam step."""

    def w_step(st):
        try:
            bf, _, _ = solve_w_ssr(channels, st.phase, st, config.P_T)
        except RuntimeError:
            return None
        return bf

    def th_step(st, b):
        return update_theta_ssr(channels, st.bf, st, b)

    return _run(config, channels, w_step, th_step, sum_sr, state, eps, max_iter)
