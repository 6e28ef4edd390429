"""Invariant checks behind ``secure-irs validate``.

Each check draws small random instances and compares a solver component with
an independent computation. Every check returns ``(name, ok, detail)``.
"""
from __future__ import annotations

import itertools
from typing import List, Tuple

import numpy as np

from ..channel import (
    BeamformingSet,
    SystemConfig,
    generate_channels,
    phase_grid,
    random_grid_phase,
    sample_pse,
    secrecy_rates,
)
from ..perfect_csi import lagrangian_beams, phase_candidate, run_maxmin_ao, run_ssr_ao
from ..surrogate import SurrogateCoeffs, sr_surrogate_theta, sr_surrogate_w

Check = Tuple[str, bool, str]


def _instance(rng, M=4, K=2, N=8, b=2):
    cfg = SystemConfig(M=M, K=K, N=N, b=b)
    ch = generate_channels(cfg, rng)
    phase = random_grid_phase(N, b, rng)
    phase.pse = sample_pse(b, N, rng)
    w = rng.standard_normal((K, M)) + 1j * rng.standard_normal((K, M))
    w *= np.sqrt(cfg.P_T / np.sum(np.abs(w) ** 2))
    return cfg, ch, phase, BeamformingSet(w)


def check_minorization(rng, instances: int, points: int = 200) -> Check:
    worst, tight = -np.inf, 0.0
    for _ in range(instances):
        cfg, ch, phase, bf = _instance(rng)
        for k in range(ch.K):
            c = sr_surrogate_w(ch, phase, bf, k)
            exact = secrecy_rates(bf, phase, ch, clamp=False)[k]
            tight = max(tight, abs(c(bf.w) - exact))
            for _ in range(points):
                w = bf.w + rng.standard_normal(bf.w.shape) * 0.05 + \
                    1j * rng.standard_normal(bf.w.shape) * 0.05
                val = secrecy_rates(BeamformingSet(w), phase, ch, clamp=False)[k]
                worst = max(worst, c(w) - val)
            ct = sr_surrogate_theta(ch, bf, phase, k)
            tight = max(tight, abs(ct(phase.theta) - exact))
            for _ in range(points):
                th = rng.uniform(0, 2 * np.pi, ch.N)
                p2 = type(phase)(th, None, None)
                p2.pse = phase.pse
                val = secrecy_rates(bf, p2, ch, clamp=False)[k]
                worst = max(worst, ct(th) - val)
    ok = worst <= 1e-9 and tight <= 1e-8
    return "surrogate minorization", ok, f"max violation {worst:.2e}, tightness {tight:.2e}"


def check_phase_oracle(rng, instances: int) -> Check:
    err = 0.0
    for _ in range(instances):
        N, b = int(rng.integers(1, 5)), 2
        m = rng.standard_normal(N) + 1j * rng.standard_normal(N)
        c = SurrogateCoeffs(0.0, m, None, "phase")
        val = c(phase_candidate(c, b))
        best = max(c(np.array(t)) for t in itertools.product(phase_grid(b), repeat=N))
        err = max(err, abs(val - best))
    return "closed-form phase vs exhaustive grid", err <= 1e-9, f"max gap {err:.2e}"


def check_bisection(rng, instances: int) -> Check:
    err = 0.0
    for _ in range(instances):
        K, M = 2, 4
        m = rng.standard_normal((K, M)) + 1j * rng.standard_normal((K, M))
        psi = []
        for _ in range(K):
            B = rng.standard_normal((M, M)) + 1j * rng.standard_normal((M, M))
            psi.append(1e-3 * B @ B.conj().T)
        P_T = 0.1
        w, varpi = lagrangian_beams(m, np.array(psi), P_T)
        if varpi > 0:
            err = max(err, abs(np.sum(np.abs(w) ** 2) - P_T) / P_T)
    return "bisection beamformer power budget", err <= 1e-6, f"max relative error {err:.2e}"


def check_monotone(rng, instances: int) -> Check:
    worst = 0.0
    for i in range(instances):
        cfg = SystemConfig(M=4, K=2, N=8, b=3)
        ch = generate_channels(cfg, rng)
        for run in (run_maxmin_ao, run_ssr_ao):
            st = run(cfg, ch)
            h = np.asarray(st.history)
            if h.size > 1:
                worst = max(worst, float(np.max(h[:-1] - h[1:])))
    return "AO monotonicity", worst <= 1e-6, f"max decrease {worst:.2e}"


def run_checks(instances: int = 5, seed: int = 0) -> List[Check]:
    rng = np.random.default_rng(seed)
    return [
        check_minorization(rng, instances),
        check_phase_oracle(rng, 10 * instances),
        check_bisection(rng, 10 * instances),
        check_monotone(rng, instances),
    ]
