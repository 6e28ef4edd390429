"""Robust max-min / sum secrecy rate under bounded CSI error.

Both the beam step and the phase step solve one SDP built from the four
ball-robust constraint families of :mod:`.lmi`. The tracked objective is the
decoupled worst-case secrecy rate (worst signal, worst interference and the
best case for Eve, each over its own ball), which is evaluated exactly. The
SDP is tight at the iterate for that objective, so accepted iterates never
decrease it. The phase step runs a penalty convex-concave procedure on the
unit-modulus constraint and then projects onto the b-bit grid.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional

import numpy as np

from .. import conic
from ..channel import (
    BeamformingSet,
    ChannelSet,
    PhaseConfig,
    SystemConfig,
    cascaded_channel,
    mrt_beams,
    quantize_phase,
    random_grid_phase,
    sample_ball,
    sample_pse,
    sample_sphere,
    secrecy_rates,
)
from .lmi import (
    Receiver,
    WorstCase,
    eve_rate_majorant,
    lmi_norm_upper,
    lmi_quad_lower,
    trs_min,
    user_rate_minorant,
    worst_case,
)


@dataclass
class RobustParams:
    eps_t: float = 1e-3
    max_iter: int = 100
    o_init: float = 10.0
    o_max: float = 30.0
    nu: float = 2.0
    eps_t1: float = 1e-3
    eps_t2: float = 1e-4
    pccp_max_iter: int = 50
    pccp_restarts: int = 1
    soundness_samples: int = 1000
    inner_w_iter: int = 30
    tol: float = 1e-8
    pse_draws: int = 100
    formulation: str = "soc"

    @property
    def exact(self) -> bool:
        return self.formulation == "lmi"


@dataclass
class RobustIterate:
    bf: BeamformingSet
    phase: PhaseConfig
    history: List[float] = field(default_factory=list)
    status: str = "running"
    iteration: int = 0
    failures: int = 0
    slacks: Dict[str, np.ndarray] = field(default_factory=dict)
    pccp: Dict[str, object] = field(default_factory=dict)
    info: Dict[str, object] = field(default_factory=dict)

    @property
    def objective(self) -> float:
        return self.history[-1] if self.history else float("nan")


# --------------------------------------------------------------------------
# receivers and exact worst-case evaluation


def receivers(channels: ChannelSet, extra_raw=None):
    K = channels.K
    extra_raw = np.zeros(K) if extra_raw is None else np.broadcast_to(extra_raw, (K,))
    users = [Receiver.from_raw(channels.g_hat[k], channels.xi[k], channels.sigma[k],
                               float(extra_raw[k])) for k in range(K)]
    eve = Receiver.from_raw(channels.g_hat_e, channels.xi_e, channels.sigma_e)
    return users, eve


def responses(rx: Receiver, H_AR: np.ndarray, w: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Scaled per-beam responses ``a'_j = c diag(v) H_AR w_j`` as rows (K x N)."""
    return rx.scale * (w @ H_AR.T) * v[None, :]


def _vec(phase) -> np.ndarray:
    if isinstance(phase, PhaseConfig):
        return phase.vector
    v = np.asarray(phase)
    return np.exp(1j * v) if np.isrealobj(v) else v


def worst_cases(channels: ChannelSet, bf, phase, users=None, extra_rows=None,
                with_eve: bool = True, exact: bool = False) -> List[WorstCase]:
    """Exact decoupled ball extremes for every stream (normalized by noise).

    ``extra_rows[k]`` optionally adds unscaled interference responses for user
    k (artificial-noise leakage). ``exact`` selects the trust-region
    interference extremes (matching the LMI model) instead of the Frobenius
    bounds (matching the cone model).
    """
    w = bf.w if isinstance(bf, BeamformingSet) else np.asarray(bf)
    v = _vec(phase)
    rxs, rx_e = receivers(channels)
    A_e = responses(rx_e, channels.H_AR, w, v)
    out = []
    for k in range(channels.K) if users is None else users:
        A = responses(rxs[k], channels.H_AR, w, v)
        if extra_rows is not None and extra_rows[k] is not None and len(extra_rows[k]):
            # leakage rows only ever act as interference
            A = np.vstack([A, rxs[k].scale * extra_rows[k]])
        out.append(worst_case(rxs[k], rx_e if with_eve else None, A,
                              A_e if with_eve else None, k, exact))
    return out


def robust_secrecy_rates(channels: ChannelSet, bf, phase, exact: bool = False) -> np.ndarray:
    """Worst-case (decoupled) secrecy rate per user in nats, before clamping."""
    return np.array([wc.secrecy for wc in worst_cases(channels, bf, phase, exact=exact)])


def _active(sr: np.ndarray) -> List[int]:
    act = [k for k in range(len(sr)) if sr[k] > 0]
    return act or list(range(len(sr)))


def robust_objective(channels, bf, phase, mode: str, exact: bool = False) -> float:
    sr = robust_secrecy_rates(channels, bf, phase, exact)
    if mode == "maxmin":
        return float(np.min(sr))
    return float(np.sum(np.maximum(sr, 0.0)))


# --------------------------------------------------------------------------
# model assembly


def _signal_lower_soc(mdl, g, xi, a, a_bar, t, tag):
    """``|(g+dg) a|^2 >= t`` over the ball via a tangent of the modulus.

    ``|(g+dg) a| >= Re(p* g a) - xi ||a|| >= s`` for the unit phase p of
    ``g a_bar``, and ``s^2 >= 2 s_bar s - s_bar^2``; tight at ``a_bar``.
    """
    ga = complex(g @ a_bar)
    p = ga / abs(ga) if abs(ga) > 0 else 1.0
    s_bar = max(abs(ga) - xi * np.linalg.norm(a_bar), 0.0)
    s = mdl.real_var(f"sig_{tag}")
    lin = (a.dot(g) * np.conj(p)).real
    mdl.add_soc(lin - s, a * xi, f"{tag}: signal modulus tangent")
    mdl.add_nonneg(2 * s_bar * s - s_bar ** 2 - t, f"{tag}: signal square minorant")


def _norm_upper_soc(mdl, g, xi, A, bound, tag):
    """``sum_j |(g+dg) a_j|^2 <= bound`` via ``||gB|| + xi ||B||_F``."""
    q1 = mdl.real_var(f"qc_{tag}")
    q2 = mdl.real_var(f"qf_{tag}")
    mdl.add_soc(q1, A @ g, f"{tag}: nominal norm")
    mdl.add_soc(q2, A.reshape(-1), f"{tag}: Frobenius norm")
    mdl.add_rsoc(bound, 1.0, (q1 + q2 * xi).reshape(1), f"{tag}: squared bound")


def _norm_lower_soc(mdl, g, xi, A, A_bar, bound, tag):
    """``sum_j |(g+dg) a_j|^2 >= bound`` via a tangent of ``||gB||``."""
    y_bar = A_bar @ g
    ny = float(np.linalg.norm(y_bar))
    s_bar = max(ny - xi * float(np.linalg.norm(A_bar)), 0.0)
    s = mdl.real_var(f"nrm_{tag}")
    if ny > 0:
        lin = (A @ g).dot(np.conj(y_bar) / ny).real
        mdl.add_soc(lin - s, A.reshape(-1) * xi, f"{tag}: norm tangent")
    else:
        mdl.add_zero(s, f"{tag}: degenerate norm tangent")
    mdl.add_nonneg(2 * s_bar * s - s_bar ** 2 - bound, f"{tag}: square minorant")


def _families(mdl, k, rx, rx_e, A, A_bar, A_e, A_e_bar, formulation, tags):
    """Ball-robust bounds ``t <= signal``, ``interference + noise <= beta``
    for user k and ``t_e >= Eve signal``, ``Eve interference + noise >= beta_e``.

    Returns the variables ``(t, beta, t_e, beta_e)``; the Eve pair is None when
    ``rx_e`` is None.
    """
    m = A_bar.shape[0]
    others = [j for j in range(m) if j != k]
    t = mdl.real_var(f"t{k}")
    beta = mdl.real_var(f"beta{k}")
    floor = 1.0 + rx.extra
    if formulation == "lmi":
        eta = mdl.real_var(f"eta{k}")
        mdl.add_nonneg(eta, f"user signal multiplier >= 0 [{k}]")
        mdl.add_psd(lmi_quad_lower(rx.g, rx.xi, A[[k]], A_bar[[k]], t, eta),
                    f"user signal S-procedure [{k}] {tags}")
    else:
        _signal_lower_soc(mdl, rx.g, rx.xi, A[k], A_bar[k], t, f"user signal [{k}] {tags}")
    if others:
        if formulation == "lmi":
            kappa = mdl.real_var(f"kappa{k}")
            mdl.add_nonneg(kappa, f"user interference multiplier >= 0 [{k}]")
            mdl.add_psd(lmi_norm_upper(rx.g, rx.xi, A[others], beta - floor, kappa),
                        f"user interference Schur/Nemirovski [{k}] {tags}")
        else:
            _norm_upper_soc(mdl, rx.g, rx.xi, A[others], beta - floor,
                            f"user interference [{k}] {tags}")
    else:
        mdl.add_nonneg(beta - floor, f"user noise floor [{k}]")
    if rx_e is None:
        return t, beta, None, None

    K = A_e_bar.shape[0]
    others_e = [j for j in range(K) if j != k]
    t_e = mdl.real_var(f"te{k}")
    beta_e = mdl.real_var(f"betae{k}")
    if formulation == "lmi":
        y = mdl.real_var(f"y{k}")
        mdl.add_nonneg(y, f"eve signal multiplier >= 0 [{k}]")
        mdl.add_psd(lmi_norm_upper(rx_e.g, rx_e.xi, A_e[[k]], t_e, y),
                    f"eve signal Schur/Nemirovski [{k}] {tags}")
    else:
        _norm_upper_soc(mdl, rx_e.g, rx_e.xi, A_e[[k]], t_e, f"eve signal [{k}] {tags}")
    if others_e:
        if formulation == "lmi":
            s = mdl.real_var(f"s{k}")
            mdl.add_nonneg(s, f"eve interference multiplier >= 0 [{k}]")
            mdl.add_psd(lmi_quad_lower(rx_e.g, rx_e.xi, A_e[others_e], A_e_bar[others_e],
                                       beta_e - 1.0, s),
                        f"eve interference S-procedure [{k}] {tags}")
        else:
            _norm_lower_soc(mdl, rx_e.g, rx_e.xi, A_e[others_e], A_e_bar[others_e],
                            beta_e - 1.0, f"eve interference [{k}] {tags}")
    else:
        mdl.add_nonneg(1.0 - beta_e, f"eve noise ceiling [{k}]")
    return t, beta, t_e, beta_e


def _rate_bounds(mdl, k, t, beta, t_e, beta_e, wc: WorstCase):
    """Concave minorant ``phi`` of the user rate and convex majorant ``mu`` of
    Eve's rate, both tight at the bounds ``wc`` of the iterate."""
    phi = mdl.real_var(f"phi{k}")
    r = mdl.real_var(f"r{k}")
    expr, y_bar = user_rate_minorant(t, beta, r, wc.t, wc.beta)
    mdl.add_rsoc(r, beta + t, math.sqrt(y_bar), f"user rate log bound [{k}]")
    mdl.add_nonneg(expr - phi, f"user rate minorant [{k}]")
    u = mdl.real_var(f"u{k}")
    mu = mdl.real_var(f"mu{k}")
    mdl.add_rsoc(u, beta_e, 1.0, f"eve inverse interference [{k}]")
    mdl.add_nonneg(mu - eve_rate_majorant(t_e, beta_e, u, wc.t_e, wc.beta_e),
                   f"eve rate majorant [{k}]")
    return phi, mu


def _collect(mdl, x, K):
    out = {}
    for name in ("t", "beta", "eta", "kappa", "phi", "r", "te", "betae", "y", "s", "u", "mu"):
        vals = []
        for k in range(K):
            sl = mdl.var_slices.get(f"{name}{k}")
            vals.append(float(x[sl][0]) if sl is not None else np.nan)
        out[name] = np.array(vals)
    return out


def _complex(mdl, x, name, shape):
    vals = x[mdl.var_slices[name]]
    n = vals.size // 2
    return (vals[:n] + 1j * vals[n:]).reshape(shape)


def affine_responses(mdl: conic.Model, channels: ChannelSet, step: str, w_bar, v_bar, P_T):
    """Decision variables and a map ``rx -> scaled responses`` (Affine, K x N).

    The beam step uses ``w = sqrt(P_T) u`` with ``||u|| <= 1``; the phase step
    a complex vector ``v`` with the PCCP modulus constraints added by the
    caller.
    """
    K, M, N = channels.K, channels.M, channels.N
    if step == "w":
        U = mdl.complex_var("u", (K, M))
        mdl.add_soc(1.0, U.reshape(-1), "power budget")
        scale = math.sqrt(P_T)

        def aff(rx):
            T = rx.scale * scale * (v_bar[:, None] * channels.H_AR)
            return U @ T.T
        return U, aff
    V = mdl.complex_var("v", (N,))

    def aff(rx):
        HW = rx.scale * (w_bar @ channels.H_AR.T)  # (K, N)
        return conic.stack([V * HW[j] for j in range(HW.shape[0])])
    return V, aff


def add_pccp_modulus(mdl: conic.Model, V: conic.Affine, v_bar: np.ndarray):
    """``|v_n|^2 <= 1 + d_n`` and the linearized ``|v_n|^2 >= 1 - d_hat_n``."""
    N = v_bar.shape[0]
    d = mdl.real_var("d", N)
    dh = mdl.real_var("dh", N)
    mdl.add_nonneg(d, "PCCP slack d >= 0")
    mdl.add_nonneg(dh, "PCCP slack d_hat >= 0")
    for n in range(N):
        mdl.add_rsoc(1.0 + d[n], 1.0, V[n].reshape(1), f"unit modulus upper [{n}]")
    lin = 2 * (V * np.conj(v_bar)).real - np.abs(v_bar) ** 2
    mdl.add_nonneg(lin - 1.0 + dh, "unit modulus linearized lower")
    return d, dh


def build_secrecy_model(channels: ChannelSet, bf, phase, P_T: float, mode: str,
                        step: str, users: List[int], penalty: float = 0.0,
                        v_bar: Optional[np.ndarray] = None, formulation: str = "soc"):
    """Assemble the beam-step (``step="w"``) or phase-step (``"v"``) model.

    ``mode`` is ``"maxmin"`` or ``"ssr"``; ``formulation`` is ``"soc"``
    (triangle/Frobenius cones) or ``"lmi"`` (S-procedure and Nemirovski
    blocks). In the phase step ``v_bar`` is the linearization point (defaults
    to the phase vector) and ``penalty`` the PCCP weight.
    """
    w_bar = bf.w if isinstance(bf, BeamformingSet) else np.asarray(bf)
    v_bar = _vec(phase) if v_bar is None else v_bar
    rxs, rx_e = receivers(channels)
    mdl = conic.Model()
    X, aff = affine_responses(mdl, channels, step, w_bar, v_bar, P_T)
    if step == "v":
        d, dh = add_pccp_modulus(mdl, X, v_bar)
    wcs = worst_cases(channels, w_bar, v_bar, exact=formulation == "lmi")
    A_e = aff(rx_e)
    A_e_bar = responses(rx_e, channels.H_AR, w_bar, v_bar)
    z = mdl.real_var("z")
    total = None
    tags = f"({step}-step)"
    for k in users:
        A = aff(rxs[k])
        A_bar = responses(rxs[k], channels.H_AR, w_bar, v_bar)
        t, beta, t_e, beta_e = _families(mdl, k, rxs[k], rx_e, A, A_bar, A_e, A_e_bar,
                                         formulation, tags)
        phi, mu = _rate_bounds(mdl, k, t, beta, t_e, beta_e, wcs[k])
        if mode == "maxmin":
            mdl.add_nonneg(phi - mu - z, f"min secrecy epigraph [{k}]")
        else:
            total = (phi - mu) if total is None else total + (phi - mu)
    if mode != "maxmin":
        mdl.add_nonneg(total - z, "sum secrecy epigraph")
    obj = z
    if step == "v":
        obj = z - penalty * (d.sum() + dh.sum())
    mdl.maximize(obj)
    return mdl


# --------------------------------------------------------------------------
# steps


def solve_w_robust(channels, bf, phase, P_T: float, mode: str, users: List[int],
                   tol: float = 1e-8, formulation: str = "soc"):
    """Beam step; returns ``(BeamformingSet or None, z, slacks, solution)``."""
    mdl = build_secrecy_model(channels, bf, phase, P_T, mode, "w", users,
                              formulation=formulation)
    sol = mdl.solve(tol=tol)
    if not sol.ok:
        return None, float("nan"), {}, sol
    w = math.sqrt(P_T) * _complex(mdl, sol.x, "u", (channels.K, channels.M))
    p = float(np.sum(np.abs(w) ** 2))
    if p > P_T:
        w *= math.sqrt(P_T / p)
    slacks = _collect(mdl, sol.x, channels.K)
    slacks["z"] = np.array([float(sol.x[mdl.var_slices["z"]][0])])
    return BeamformingSet(w), float(sol.objective), slacks, sol


def solve_w_robust_maxmin(channels, phase, iterate: RobustIterate, P_T: float,
                          tol: float = 1e-8, formulation: str = "soc") -> RobustIterate:
    """One robust beam step for the max-min problem (returns a new iterate)."""
    bf, z, slacks, sol = solve_w_robust(channels, iterate.bf, phase, P_T, "maxmin",
                                        list(range(channels.K)), tol, formulation)
    out = RobustIterate(bf if bf is not None else iterate.bf.copy(), phase,
                        list(iterate.history), iterate.status, iterate.iteration,
                        iterate.failures + (bf is None), slacks, dict(iterate.pccp))
    out.info["z"] = z
    out.info["solve_status"] = sol.status
    return out


def pccp_theta(channels: ChannelSet, bf, phase: PhaseConfig, builder, params: RobustParams,
               rng: Optional[np.random.Generator] = None, v_start=None):
    """Penalty convex-concave procedure over the IRS vector.

    ``builder(v_bar, o)`` returns a :class:`conic.Model` with a complex
    variable ``v`` and slacks ``d``, ``dh``. The procedure starts from
    ``v_start`` (default: the phase vector). Returns ``(theta, info)`` where
    ``theta`` is the grid-projected angle vector and ``info["v"]`` the
    continuous end point. When the iteration cap is hit with the slacks still
    above ``eps_t2`` the procedure restarts once from a random grid point and
    returns whichever attempt ended with the smaller slack sum ``T_final``.
    """
    N = channels.N
    v_bar = (_vec(phase) if v_start is None else np.asarray(v_start)).copy()
    info = {"o": [], "T": [], "step": [], "iterations": 0, "converged": False,
            "restarts": 0, "status": "ok"}
    restarts = 0
    ends = []
    o = params.o_init
    it = 0
    while True:
        it += 1
        mdl = builder(v_bar, o)
        sol = mdl.solve(tol=params.tol)
        info["o"].append(o)
        if not sol.ok:
            info["status"] = sol.status
            break
        v = _complex(mdl, sol.x, "v", (N,))
        T = float(sol.x[mdl.var_slices["d"]].sum() + sol.x[mdl.var_slices["dh"]].sum())
        step = float(np.sum(np.abs(v - v_bar)))
        info["T"].append(T)
        info["step"].append(step)
        v_bar = v
        if step <= params.eps_t1 and T <= params.eps_t2:
            info["converged"] = True
            break
        o = min(params.nu * o, params.o_max)
        if it >= params.pccp_max_iter:
            # a feasible end point that is still creeping is kept as is
            if T <= params.eps_t2 or restarts >= params.pccp_restarts or rng is None:
                break
            # re-initialize on the grid and start the penalty schedule again
            ends.append((T, v_bar))
            restarts += 1
            info["restarts"] = restarts
            v_bar = random_grid_phase(N, phase.b, rng).vector
            o = params.o_init
            it = 0
    if info["T"]:
        ends.append((info["T"][-1], v_bar))
        # keep the attempt that ended closest to unit modulus feasibility
        info["T_final"], v_bar = min(ends, key=lambda e: e[0])
    else:
        info["T_final"] = float("nan")
    info["iterations"] = len(info["T"])
    info["umc_residual"] = float(np.max(np.abs(np.abs(v_bar) - 1.0)))
    info["v"] = v_bar
    theta = quantize_phase(np.mod(np.angle(v_bar), 2 * np.pi), phase.b)
    return theta, info


# --------------------------------------------------------------------------
# drivers


def _initial(config: SystemConfig, channels: ChannelSet, rng):
    phase = random_grid_phase(channels.N, config.b, rng)
    h = cascaded_channel(channels.g_hat, phase, channels.H_AR)
    return BeamformingSet(mrt_beams(h, config.P_T)), phase


def _converged(prev, cur, eps):
    if not np.isfinite(eps):
        return True
    return abs(cur - prev) <= eps * max(abs(prev), 1e-12)


def _users(channels, bf, phase, mode, exact):
    if mode == "maxmin":
        return list(range(channels.K))
    return _active(robust_secrecy_rates(channels, bf, phase, exact))


def _run_secrecy(config: SystemConfig, channels: ChannelSet, mode: str,
                 params: Optional[RobustParams] = None, bf=None, phase=None,
                 rng: Optional[np.random.Generator] = None) -> RobustIterate:
    params = params or RobustParams()
    rng = np.random.default_rng(config.seed) if rng is None else rng
    if bf is None or phase is None:
        bf0, ph0 = _initial(config, channels, rng)
        bf = bf0 if bf is None else bf
        phase = ph0 if phase is None else phase
    phase = phase.without_pse()
    exact, form = params.exact, params.formulation

    def objective(b_, p_):
        return robust_objective(channels, b_, p_, mode, exact)

    it = RobustIterate(bf, phase)
    cur = objective(bf, phase)
    it.history = [cur]
    it.pccp = {"o": [], "T": [], "T_final": [], "umc_residual": [], "iterations": [],
               "converged": []}
    # continuous PCCP state, carried across outer iterations so that small
    # moves accumulate until they change the projected grid point
    v_cont = phase.vector
    for n in range(1, params.max_iter + 1):
        it.iteration = n
        # beam block: SCA steps on w until the tracked objective settles
        for _ in range(params.inner_w_iter):
            users = _users(channels, it.bf, it.phase, mode, exact)
            new_bf, z, slacks, sol = solve_w_robust(channels, it.bf, it.phase, config.P_T,
                                                    mode, users, params.tol, form)
            if new_bf is None:
                it.failures += 1
                break
            val = objective(new_bf, it.phase)
            # the model is tight at the iterate, so only round-off can lose ground
            if val < cur:
                break
            it.bf, prev, cur = new_bf, cur, val
            it.slacks = dict(slacks, users=np.array(users), w=new_bf.w.copy(),
                             theta=it.phase.theta.copy())
            if _converged(prev, cur, params.eps_t):
                break

        users = _users(channels, it.bf, it.phase, mode, exact)

        def builder(v_bar, o, _users=users):
            return build_secrecy_model(channels, it.bf, it.phase, config.P_T, mode, "v",
                                       _users, penalty=o, v_bar=v_bar, formulation=form)

        theta, info = pccp_theta(channels, it.bf, it.phase, builder, params, rng, v_cont)
        v_cont = np.exp(1j * np.angle(info["v"]))
        for key in ("o", "T", "T_final", "umc_residual", "iterations", "converged"):
            it.pccp[key].append(info[key])
        if info["status"] != "ok":
            it.failures += 1
        cand = PhaseConfig(theta, it.phase.b)
        val = objective(it.bf, cand)
        if val > cur:
            it.phase, cur = cand, val
        it.history.append(cur)
        if _converged(it.history[-2], it.history[-1], params.eps_t):
            it.status = "converged"
            break
    else:
        it.status = "max_iter"
    it.info.update(evaluate_robust(channels, it.bf, it.phase, params.pse_draws, rng))
    return it


def evaluate_robust(channels: ChannelSet, bf, phase: PhaseConfig, draws: int,
                    rng: np.random.Generator) -> dict:
    """Report rates on the true channels, nominal and averaged over PSE draws."""
    nominal = secrecy_rates(bf, phase, channels)
    if phase.b is None or draws <= 0:
        avg = nominal
    else:
        acc = np.zeros(channels.K)
        for _ in range(draws):
            ph = PhaseConfig(phase.theta, phase.b, sample_pse(phase.b, channels.N, rng))
            acc += secrecy_rates(bf, ph, channels)
        avg = acc / draws
    worst = np.maximum(robust_secrecy_rates(channels, bf, phase), 0.0)
    return {"sr_true": nominal, "sr_true_pse": avg, "sr_worst": worst}


def run_maxmin_robust(config: SystemConfig, channels: ChannelSet,
                      params: Optional[RobustParams] = None, **kwargs) -> RobustIterate:
    """Robust max-min secrecy rate by alternating the beam SDP and PCCP phases."""
    return _run_secrecy(config, channels, "maxmin", params, **kwargs)


def run_ssr_robust(config: SystemConfig, channels: ChannelSet,
                   params: Optional[RobustParams] = None, **kwargs) -> RobustIterate:
    """Robust sum secrecy rate; users with no worst-case secrecy are dropped per step."""
    return _run_secrecy(config, channels, "ssr", params, **kwargs)


# --------------------------------------------------------------------------
# Monte-Carlo soundness oracle


def ball_samples(xi: float, N: int, rng: np.random.Generator, count: int) -> np.ndarray:
    """Half boundary, half interior draws from the complex ball of radius xi."""
    half = count // 2
    return np.vstack([sample_sphere(xi, N, rng, half),
                      sample_ball(xi, N, rng, size=count - half)])


def adversarial_errors(g: np.ndarray, xi: float, A: np.ndarray, k: int) -> np.ndarray:
    """The exact extremizers of stream k's signal and interference over the ball."""
    out = []
    a = A[k]
    na = np.linalg.norm(a)
    if na > 0:
        ph = np.exp(1j * np.angle(g @ a))
        out += [xi * ph * a.conj() / na, -xi * ph * a.conj() / na]
    B = np.delete(A, k, axis=0)
    if B.shape[0]:
        G = B.T @ B.conj()
        p = G @ g.conj()
        c0 = float(np.real(g @ p))
        for sign in (1.0, -1.0):
            _, x = trs_min(sign * G, sign * p, sign * c0, xi)
            out.append(x.conj())
    return np.array(out).reshape(-1, g.shape[0])


def verify_soundness(channels: ChannelSet, slacks: dict, rng: np.random.Generator,
                     samples: int = 1000) -> Dict[str, float]:
    """Largest violation of every scalar constraint of a solved secrecy model
    over sampled channel errors (normalized units, relative to max(1, bound)).

    ``slacks`` is the record stored by the drivers for the last accepted beam
    step: solved beams ``w``, the phases, the users in the model and the
    values of ``t, beta, te, betae, phi, mu``.
    """
    w, v = slacks["w"], np.exp(1j * slacks["theta"])
    rxs, rx_e = receivers(channels)
    A_e = responses(rx_e, channels.H_AR, w, v)
    D_e = np.vstack([ball_samples(rx_e.xi, channels.N, rng, samples)]
                    + [adversarial_errors(rx_e.g, rx_e.xi, A_e, k) for k in range(channels.K)])
    G_e = np.abs((rx_e.g[None, :] + D_e) @ A_e.T) ** 2  # (S, K)
    worst = {"signal": 0.0, "interference": 0.0, "eve_signal": 0.0,
             "eve_interference": 0.0, "rate": 0.0, "eve_rate": 0.0}

    def viol(name, excess, bound):
        worst[name] = max(worst[name], float(np.max(excess)) / max(1.0, abs(bound)))

    for k in slacks["users"]:
        k = int(k)
        A = responses(rxs[k], channels.H_AR, w, v)
        D = np.vstack([ball_samples(rxs[k].xi, channels.N, rng, samples),
                       adversarial_errors(rxs[k].g, rxs[k].xi, A, k)])
        G = np.abs((rxs[k].g[None, :] + D) @ A.T) ** 2
        sig = G[:, k]
        intf = G.sum(axis=1) - sig + 1.0 + rxs[k].extra
        t, beta = slacks["t"][k], slacks["beta"][k]
        viol("signal", t - sig, t)
        viol("interference", intf - beta, beta)
        viol("rate", slacks["phi"][k] - np.log1p(sig / intf), slacks["phi"][k])
        sig_e = G_e[:, k]
        intf_e = G_e.sum(axis=1) - sig_e + 1.0
        te, be = slacks["te"][k], slacks["betae"][k]
        viol("eve_signal", sig_e - te, te)
        viol("eve_interference", be - intf_e, be)
        viol("eve_rate", np.log1p(sig_e / intf_e) - slacks["mu"][k], slacks["mu"][k])
    return worst
