"""Monte-Carlo orchestration, metrics and CSV output.

Every trial draws its channels and its algorithm randomness from streams
derived from ``(seed, trial)``, so a trial is reproducible on its own and the
same channel realization is reused across the points of a sweep. CSV files
hold only deterministic fields; wall-clock times go to a separate file.
"""
from __future__ import annotations

import csv
import hashlib
import json
import math
import time
import traceback
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np

from ..channel import (
    SystemConfig,
    db_to_linear,
    generate_channels,
    secrecy_rates,
    to_bps,
)
from ..perfect_csi import initial_state, run_maxmin_ao, run_ssr_ao
from ..robust.power import power_sweep
from ..robust.solvers import run_maxmin_robust, run_ssr_robust
from .config import ExperimentSpec


def jains_index(rates) -> float:
    """``(sum r)^2 / (K sum r^2)``; NaN when every rate is zero."""
    r = np.asarray(rates, dtype=float)
    if r.size == 0:
        raise ValueError("need at least one rate")
    den = r.size * float(np.sum(r ** 2))
    if den == 0:
        return float("nan")
    return float(np.sum(r)) ** 2 / den


@dataclass
class TrialRecord:
    scenario: str
    point: Dict[str, object]
    trial: int
    seed: int
    config_hash: str
    sr_bps: List[float]
    iterations: int
    status: str
    power: float
    p_j: float = 0.0
    gamma_db: Optional[float] = None
    objective: float = float("nan")
    wall_time: float = 0.0
    trace: List[float] = field(default_factory=list)

    @property
    def min_sr(self) -> float:
        return float(min(self.sr_bps)) if self.sr_bps else float("nan")

    @property
    def ssr(self) -> float:
        return float(sum(self.sr_bps))

    @property
    def jain(self) -> float:
        return jains_index(self.sr_bps) if self.sr_bps else float("nan")


COLUMNS = ("scenario", "point", "trial", "seed", "config_hash", "gamma_db", "status",
           "iterations", "min_sr_bps", "ssr_bps", "jain", "power_w", "p_j_w", "objective",
           "sr_bps")


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, float):
        if math.isnan(x):
            return "nan"
        return repr(round(x, 12))
    return str(x)


def _point_key(point: Dict[str, object]) -> str:
    return ";".join(f"{k}={'cps' if v is None else v}" for k, v in point.items()) or "-"


def config_hash(config: SystemConfig) -> str:
    items = sorted((k, repr(v)) for k, v in vars(config).items() if k != "seed")
    return hashlib.sha1(json.dumps(items).encode()).hexdigest()[:12]


def trial_streams(seed: int, trial: int):
    """Independent generators for the channel draw and for the algorithm."""
    ss = np.random.SeedSequence([int(seed), int(trial)])
    ch, alg = ss.spawn(2)
    return np.random.default_rng(ch), np.random.default_rng(alg)


def _bps(x) -> List[float]:
    return [float(v) for v in to_bps(np.maximum(np.asarray(x, float), 0.0))]


def run_trial(spec: ExperimentSpec, point: Dict[str, object], trial: int) -> List[TrialRecord]:
    """One channel realization at one sweep point (several records for power_min)."""
    config = spec.system_config(point, seed=spec.seed * 100_003 + trial)
    ch_rng, alg_rng = trial_streams(spec.seed, trial)
    chash = config_hash(config)
    base = dict(scenario=spec.scenario, point=point, trial=trial, seed=spec.seed,
                config_hash=chash)
    t0 = time.perf_counter()
    channels = generate_channels(config, ch_rng)
    params = spec.robust_params()
    sc = spec.scenario
    if sc in ("maxmin_perfect", "ssr_perfect"):
        state = initial_state(config, channels, alg_rng)
        run = run_maxmin_ao if sc == "maxmin_perfect" else run_ssr_ao
        st = run(config, channels, eps=params.eps_t, max_iter=params.max_iter, state=state)
        sr = secrecy_rates(st.bf, st.phase, channels)
        return [TrialRecord(**base, sr_bps=_bps(sr), iterations=st.iteration, status=st.status,
                            power=st.bf.power, objective=float(st.history[-1]),
                            wall_time=time.perf_counter() - t0, trace=list(st.history))]
    if sc in ("maxmin_robust", "ssr_robust"):
        run = run_maxmin_robust if sc == "maxmin_robust" else run_ssr_robust
        it = run(config, channels, params, rng=alg_rng)
        return [TrialRecord(**base, sr_bps=_bps(it.info["sr_true_pse"]), iterations=it.iteration,
                            status=it.status, power=it.bf.power, objective=float(it.history[-1]),
                            wall_time=time.perf_counter() - t0, trace=list(it.history))]
    gammas = [db_to_linear(g) for g in spec.gammas_db]
    results = power_sweep(config, channels, gammas, params, alg_rng)
    elapsed = time.perf_counter() - t0
    out = []
    for g_db, res in zip(spec.gammas_db, results):
        if res.status == "infeasible":
            sr = np.zeros(channels.K)
        else:
            sr = secrecy_rates(res.bf, res.phase, channels)
        out.append(TrialRecord(**base, sr_bps=_bps(sr), iterations=res.iteration,
                               status=res.status, power=res.bf.power, p_j=res.bf.an_power,
                               gamma_db=g_db, objective=float(res.history[-1]),
                               wall_time=elapsed / len(results), trace=list(res.history)))
    return out


def run_experiment(spec: ExperimentSpec, progress=None) -> List[TrialRecord]:
    """All sweep points times all trials; failures become ``error`` records."""
    records: List[TrialRecord] = []
    for point in spec.points():
        for trial in range(spec.trials):
            try:
                recs = run_trial(spec, point, trial)
            except Exception as exc:  # recorded, never aborts the sweep
                recs = [TrialRecord(spec.scenario, point, trial, spec.seed, "", [], 0,
                                    f"error: {type(exc).__name__}: {exc}", float("nan"))]
                recs[0].trace = []
                if progress is not None:
                    progress(traceback.format_exc())
            records.extend(recs)
            if progress is not None:
                for r in recs:
                    progress(f"{_point_key(point)} trial {trial}: {r.status} "
                             f"min-SR {r.min_sr:.4f} bps/Hz")
    return records


def hard_failures(records: Sequence[TrialRecord]) -> int:
    return sum(r.status.startswith("error") for r in records)


def emit_csv(records: Sequence[TrialRecord], path: str) -> None:
    """Deterministic per-trial CSV (no timing columns)."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(COLUMNS)
        for r in records:
            w.writerow([r.scenario, _point_key(r.point), r.trial, r.seed, r.config_hash,
                        _fmt(r.gamma_db), r.status, r.iterations, _fmt(r.min_sr), _fmt(r.ssr),
                        _fmt(r.jain), _fmt(r.power), _fmt(r.p_j), _fmt(r.objective),
                        " ".join(_fmt(v) for v in r.sr_bps)])


def emit_traces(records: Sequence[TrialRecord], path: str) -> None:
    """Long-format convergence traces: one row per (trial, iteration)."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("scenario", "point", "trial", "gamma_db", "iteration", "objective"))
        for r in records:
            for i, val in enumerate(r.trace):
                w.writerow([r.scenario, _point_key(r.point), r.trial, _fmt(r.gamma_db), i,
                            _fmt(float(val))])


def emit_timings(records: Sequence[TrialRecord], path: str) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("scenario", "point", "trial", "gamma_db", "wall_time_s"))
        for r in records:
            w.writerow([r.scenario, _point_key(r.point), r.trial, _fmt(r.gamma_db),
                        f"{r.wall_time:.3f}"])


def summarize(records: Sequence[TrialRecord]) -> Dict[str, Dict[str, float]]:
    """Median min-SR, SSR and Jain's index per sweep point (and target)."""
    groups: Dict[str, List[TrialRecord]] = {}
    for r in records:
        key = _point_key(r.point) + ("" if r.gamma_db is None else f";gamma_db={r.gamma_db}")
        groups.setdefault(key, []).append(r)
    out = {}
    for key, recs in groups.items():
        ok = [r for r in recs if not r.status.startswith("error")]
        jain = [r.jain for r in ok if np.isfinite(r.jain)]
        out[key] = {
            "trials": len(recs),
            "median_min_sr_bps": float(np.median([r.min_sr for r in ok])) if ok else float("nan"),
            "median_ssr_bps": float(np.median([r.ssr for r in ok])) if ok else float("nan"),
            "median_jain": float(np.median(jain)) if jain else float("nan"),
            "median_power_w": float(np.median([r.power for r in ok])) if ok else float("nan"),
        }
    return out


def emit_summary(summary: Dict[str, Dict[str, float]], path: str) -> None:
    cols = ("trials", "median_min_sr_bps", "median_ssr_bps", "median_jain", "median_power_w")
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("point",) + cols)
        for key in summary:
            w.writerow([key] + [_fmt(summary[key][c]) if isinstance(summary[key][c], float)
                                else summary[key][c] for c in cols])


def quantization_gap(records: Sequence[TrialRecord], bits: int = 3) -> Dict[str, float]:
    """Relative min-SR gap of ``bits`` vs continuous phases, paired by trial.

    Trials where the continuous design has no secrecy are skipped.
    """
    by = {}
    for r in records:
        b = r.point.get("b", "missing")
        by.setdefault(b, {})[r.trial] = r.min_sr
    q, c = by.get(bits, {}), by.get(None, {})
    gaps = [(c[t] - q[t]) / c[t] for t in sorted(set(q) & set(c)) if c[t] > 0]
    return {"bits": bits, "pairs": len(gaps),
            "median_gap": float(np.median(gaps)) if gaps else float("nan")}
