"""Transmit-power minimization under robust QoS with artificial noise.

Eve's channel is unknown here, so the design minimizes the beam power
subject to a worst-case SINR target at every user and spends the remaining
budget on artificial noise (AN) inside the null space of the estimated user
channels. Under CSI error the AN leaks through ``dg``; the leakage is
bounded with the full budget and treated as extra interference, so the QoS
guarantee holds for any AN power up to the budget.
"""
from __future__ import annotations

import math
import warnings
from typing import List, Optional, Sequence

import numpy as np
from scipy.linalg import null_space

from .. import conic
from ..channel import (
    BeamformingSet,
    ChannelSet,
    PhaseConfig,
    SystemConfig,
    cascaded_channel,
    random_grid_phase,
)
from .solvers import (
    RobustIterate,
    RobustParams,
    _complex,
    _converged,
    _families,
    _vec,
    add_pccp_modulus,
    affine_responses,
    pccp_theta,
    receivers,
    responses,
    worst_cases,
)

MARGIN = 1.05


def an_null_space(channels: ChannelSet, phase) -> np.ndarray:
    """Orthonormal basis (M x (M-K)) of the null space of the stacked estimated
    cascaded user channels."""
    h = cascaded_channel(channels.g_hat, phase, channels.H_AR)
    K, M = h.shape
    if K >= M:
        raise ValueError(f"no AN null space: K={K} users need M > K antennas (M={M})")
    # a rank-deficient stack leaves a larger complement, which is still valid
    return null_space(h)


def _an_rows(channels: ChannelSet, phase, P_tot: float, V: Optional[np.ndarray]) -> List:
    """Per-user AN leakage responses (unscaled), using the full budget."""
    if V is None or V.shape[1] == 0:
        return [None] * channels.K
    v = _vec(phase)
    cols = math.sqrt(P_tot / V.shape[1]) * (v[:, None] * channels.H_AR) @ V  # (N, r)
    return [cols.T.copy() for _ in range(channels.K)]


def qos_margins(channels: ChannelSet, bf, phase, gamma: float, V=None, P_tot=None,
                exact: bool = False) -> np.ndarray:
    """Worst-case ``t_k / beta_k - gamma`` per user (AN leakage included)."""
    extra = _an_rows(channels, phase, P_tot, V) if V is not None else None
    wcs = worst_cases(channels, bf, phase, extra_rows=extra, with_eve=False, exact=exact)
    return np.array([wc.t / wc.beta - gamma for wc in wcs])


def robust_feasible(channels, bf, phase, gamma, V=None, P_tot=None, tol: float = 1e-9) -> bool:
    return bool(np.all(qos_margins(channels, bf, phase, gamma, V, P_tot) >= -tol * max(gamma, 1.0)))


def zf_initial(channels: ChannelSet, phase, gamma: float, P_tot: float, V=None,
               margin: float = MARGIN) -> Optional[BeamformingSet]:
    """Zero-forcing directions with worst-case-aware linear power control.

    With ZF on the estimates the nominal cross terms vanish, so the bounds
    from the triangle inequality are linear in the per-user powers and the
    QoS system is a linear program in disguise: ``(diag(s) - gamma C) p =
    gamma (1 + leak)``. Returns None when no admissible power vector exists.
    """
    K, M = channels.K, channels.M
    h = cascaded_channel(channels.g_hat, phase, channels.H_AR)
    if K > M:
        return None
    U = np.linalg.pinv(h)  # (M, K), h U = I
    U = U / np.linalg.norm(U, axis=0, keepdims=True)
    rxs, _ = receivers(channels)
    v = _vec(phase)
    leak = _an_rows(channels, phase, P_tot, V)
    s = np.zeros(K)
    C = np.zeros((K, K))
    noise = np.ones(K)
    for k, rx in enumerate(rxs):
        A = responses(rx, channels.H_AR, U.T, v)  # unit-power rows a'_j
        s[k] = max(abs(rx.g @ A[k]) - rx.xi * np.linalg.norm(A[k]), 0.0) ** 2
        for j in range(K):
            if j != k:
                C[k, j] = rx.xi ** 2 * np.linalg.norm(A[j]) ** 2
        if leak[k] is not None:
            noise[k] += rx.xi ** 2 * np.linalg.norm(rx.scale * leak[k]) ** 2
    if np.any(s <= 0):
        return None
    try:
        p = np.linalg.solve(np.diag(s) - gamma * C, gamma * noise)
    except np.linalg.LinAlgError:
        return None
    if np.any(p < 0) or not np.all(np.isfinite(p)):
        return None
    p = margin * np.maximum(p, 0.0)
    if p.sum() > P_tot:
        return None
    # the Frobenius bound is additive only when the nominal cross terms vanish,
    # which ZF guarantees; still confirm with the generic evaluator
    bf = BeamformingSet((U * np.sqrt(p)[None, :]).T)
    if not robust_feasible(channels, bf, phase, gamma, V, P_tot):
        return None
    return bf


def _qos_model(channels, bf, phase, gamma, P_tot, V, step, v_bar=None, penalty=0.0,
               formulation="soc", margin=None):
    """Beam power minimization (``step="w"``) or margin maximization.

    The phase step always maximizes the common QoS margin ``eps`` in
    ``t - gamma beta >= gamma eps``; the beam step does so too when
    ``margin=True`` (phase-one search for a feasible point).
    """
    K = channels.K
    margin = step == "v" if margin is None else margin
    w_bar = bf.w
    v_bar = _vec(phase) if v_bar is None else v_bar
    rxs, _ = receivers(channels)
    mdl = conic.Model()
    X, aff = affine_responses(mdl, channels, step, w_bar, v_bar, P_tot)
    if step == "v":
        d, dh = add_pccp_modulus(mdl, X, v_bar)
    if margin:
        eps = mdl.real_var("margin")
    else:
        power = mdl.real_var("power")
        mdl.add_rsoc(power, 1.0, X.reshape(-1) * math.sqrt(P_tot), "beam power epigraph")
    leak = _an_rows(channels, v_bar, P_tot, V)
    wcs = worst_cases(channels, w_bar, v_bar, extra_rows=leak, with_eve=False,
                      exact=formulation == "lmi")
    for k in range(K):
        A = aff(rxs[k])
        A_bar = responses(rxs[k], channels.H_AR, w_bar, v_bar)
        if leak[k] is not None:
            rows = rxs[k].scale * leak[k]
            A = conic.stack([A[j] for j in range(K)] + list(rows))
            A_bar = np.vstack([A_bar, rows])
        t, beta, _, _ = _families(mdl, k, rxs[k], None, A, A_bar, None, None, formulation,
                                  f"({step}-step)")
        if margin:
            mdl.add_nonneg(t - beta * gamma - eps * gamma, f"QoS with margin [{k}]")
        else:
            mdl.add_nonneg(t - beta * gamma, f"robust QoS [{k}]")
    if step == "v":
        mdl.maximize(eps - penalty * (d.sum() + dh.sum()))
    elif margin:
        mdl.maximize(eps)
    else:
        mdl.minimize(power)
    return mdl


def feasible_start(channels, phase, gamma, P_tot, V, params: RobustParams,
                   bf: Optional[BeamformingSet] = None) -> Optional[BeamformingSet]:
    """Find robust-feasible beams: ZF with power control, else a phase-one
    SCA on the worst-case margin from regularized ZF beams."""
    zf = zf_initial(channels, phase, gamma, P_tot, V)
    if zf is not None:
        return zf
    if bf is None:
        h = cascaded_channel(channels.g_hat, phase, channels.H_AR)
        reg = np.mean(channels.sigma) / P_tot * channels.K
        W = h.conj().T @ np.linalg.inv(h @ h.conj().T + reg * np.eye(channels.K))
        W = W / np.linalg.norm(W, axis=0, keepdims=True) * math.sqrt(P_tot / channels.K)
        bf = BeamformingSet(W.T)
    best = np.min(qos_margins(channels, bf, phase, gamma, V, P_tot))
    for _ in range(params.max_iter):
        if best >= 0 and robust_feasible(channels, bf, phase, gamma, V, P_tot):
            return bf
        mdl = _qos_model(channels, bf, phase, gamma, P_tot, V, "w", margin=True,
                         formulation=params.formulation)
        sol = mdl.solve(tol=params.tol)
        if not sol.ok:
            return None
        cand = BeamformingSet(math.sqrt(P_tot) * _complex(mdl, sol.x, "u",
                                                          (channels.K, channels.M)))
        val = np.min(qos_margins(channels, cand, phase, gamma, V, P_tot))
        if val <= best + 1e-9 * max(abs(best), gamma):
            break
        bf, best = cand, val
    return bf if robust_feasible(channels, bf, phase, gamma, V, P_tot) else None


def _with_an(bf: BeamformingSet, P_tot: float, V) -> BeamformingSet:
    out = BeamformingSet(bf.w.copy())
    if V is not None and V.shape[1] > 0:
        out.an_basis = V
        out.an_power = max(P_tot - bf.power, 0.0)
    return out


def run_power_min(config: SystemConfig, channels: ChannelSet, gamma: float,
                  params: Optional[RobustParams] = None, bf: Optional[BeamformingSet] = None,
                  phase: Optional[PhaseConfig] = None,
                  rng: Optional[np.random.Generator] = None) -> RobustIterate:
    """Minimize the beam power subject to robust per-user SINR >= ``gamma``.

    ``gamma`` is a linear SINR target. The budget ``config.P_T`` caps the beam
    power and whatever is left goes to AN. A warm start ``(bf, phase)`` must
    be robust-feasible; otherwise a ZF point is built. The history holds the
    beam power of accepted iterates (nonincreasing).
    """
    params = params or RobustParams()
    rng = np.random.default_rng(config.seed) if rng is None else rng
    P_tot = config.P_T
    form = params.formulation
    if phase is None:
        phase = random_grid_phase(channels.N, config.b, rng)
    phase = phase.without_pse()
    use_an = channels.M > channels.K
    if not use_an:
        warnings.warn("M <= K: artificial noise disabled (empty null space)", RuntimeWarning)

    def basis(ph):
        return an_null_space(channels, ph) if use_an else None

    V = basis(phase)
    if bf is None or not robust_feasible(channels, bf, phase, gamma, V, P_tot):
        bf = feasible_start(channels, phase, gamma, P_tot, V, params)
    if bf is None:
        it = RobustIterate(BeamformingSet(np.zeros((channels.K, channels.M), complex)), phase)
        it.status = "infeasible"
        it.history = [float("nan")]
        return it
    bf = BeamformingSet(bf.w.copy())
    it = RobustIterate(bf, phase)
    it.history = [bf.power]
    it.pccp = {"o": [], "T": [], "T_final": [], "umc_residual": [], "iterations": [],
               "converged": []}
    v_cont = phase.vector
    for n in range(1, params.max_iter + 1):
        it.iteration = n
        for _ in range(params.inner_w_iter):
            mdl = _qos_model(channels, it.bf, it.phase, gamma, P_tot, V, "w", formulation=form)
            sol = mdl.solve(tol=params.tol)
            if not sol.ok:
                it.failures += 1
                break
            w = math.sqrt(P_tot) * _complex(mdl, sol.x, "u", (channels.K, channels.M))
            cand = BeamformingSet(w)
            if cand.power > it.bf.power or not robust_feasible(channels, cand, it.phase,
                                                               gamma, V, P_tot):
                break
            prev = it.bf.power
            it.bf = cand
            if _converged(prev, cand.power, params.eps_t):
                break

        def builder(v_bar, o):
            return _qos_model(channels, it.bf, it.phase, gamma, P_tot, V, "v", v_bar, o, form)

        theta, info = pccp_theta(channels, it.bf, it.phase, builder, params, rng, v_cont)
        v_cont = np.exp(1j * np.angle(info["v"]))
        for key in ("o", "T", "T_final", "umc_residual", "iterations", "converged"):
            it.pccp[key].append(info[key])
        cand = PhaseConfig(theta, it.phase.b)
        V_c = basis(cand)
        # a new phase is only useful if the current beams stay robust-feasible
        if not np.array_equal(cand.theta, it.phase.theta) and \
                robust_feasible(channels, it.bf, cand, gamma, V_c, P_tot) and \
                np.min(qos_margins(channels, it.bf, cand, gamma, V_c, P_tot)) > \
                np.min(qos_margins(channels, it.bf, it.phase, gamma, V, P_tot)):
            it.phase, V = cand, V_c
        it.history.append(it.bf.power)
        if _converged(it.history[-2], it.history[-1], params.eps_t):
            it.status = "converged"
            break
    else:
        it.status = "max_iter"
    it.bf = _with_an(it.bf, P_tot, V)
    it.info["gamma"] = gamma
    it.info["margins"] = qos_margins(channels, it.bf, it.phase, gamma, V, P_tot)
    return it


def power_sweep(config: SystemConfig, channels: ChannelSet, gammas: Sequence[float],
                params: Optional[RobustParams] = None,
                rng: Optional[np.random.Generator] = None) -> List[RobustIterate]:
    """Solve for each target, highest first, warm-starting from the previous
    solution. A solution for a larger target is feasible for a smaller one and
    each run only lowers the power, so the minimum power is nondecreasing in
    the target. Results are returned in the order of ``gammas``.
    """
    rng = np.random.default_rng(config.seed) if rng is None else rng
    order = np.argsort(gammas)[::-1]
    out = [None] * len(gammas)
    bf = phase = None
    for i in order:
        res = run_power_min(config, channels, float(gammas[i]), params, bf, phase, rng)
        out[i] = res
        if res.status != "infeasible":
            bf, phase = BeamformingSet(res.bf.w.copy()), res.phase
    return out
