"""Seeded experiment runners.

Each runner splits its work into fixed tasks (sample chunks aligned to the
sampler's block size, times sweep points), maps them over a thread pool and
reduces the results in task order, so the thread count never changes the
output bytes.  Runners return ``(fieldnames, rows)``.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import capacity as cap
from .config import ExperimentConfig, fields, sample_level
from .fbm import SAMPLE_BLOCK, sample_values
from .lift import coarsen, lift_vertices
from .rde import VectorFieldSet, solve_polyline, wz_distances
from .variation import dp_levels, rho

NAN = float("nan")


def _map(fn, tasks, threads):
    if threads <= 1:
        return [fn(t) for t in tasks]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, tasks))


def _chunks(n):
    return [(s, min(SAMPLE_BLOCK, n - s)) for s in range(0, n, SAMPLE_BLOCK)]


def _ratio(num, den):
    num, den = np.asarray(num, dtype=float), np.asarray(den, dtype=float)
    return np.divide(num, den, out=np.full(np.broadcast(num, den).shape, np.nan), where=den > 0)


def _median(x):
    x = np.asarray(x, dtype=float)
    x = x[~np.isnan(x)]
    return float(np.median(x)) if x.size else NAN


def _exp(x):
    # bounds may exceed the float range; report inf rather than fail
    return math.exp(x) if x < 709.0 else math.inf


def _base(cfg: ExperimentConfig, kind: str):
    return {"config_hash": cfg.hash, "seed": cfg["experiment.seed"], "kind": kind}


def _values(cfg, start, n, M):
    return sample_values(cfg.model, M, cfg["model.d"], n, cfg["experiment.seed"], start)


# ---------------------------------------------------------------- converge

CONVERGE_FIELDS = ["config_hash", "seed", "kind", "h", "p", "d", "m", "grid_level", "samples",
                   "median_dp", "mean_dp", "dp_ci_low", "dp_ci_high",
                   "median_dp_level1", "median_dp_level2", "median_dp_level3",
                   "median_ratio", "frac_ratio_below_one", "frac_ci_low", "frac_ci_high"]


def converge_distances(values, M: int, ms, p: float) -> dict:
    """Grid-restricted d_p(w^(m), w^(m+1)) per level on grid m+1, {m: (3, batch)}."""
    out = {}
    for m in ms:
        a = lift_vertices(coarsen(values, M, m), m, n_max=m + 1)
        b = lift_vertices(coarsen(values, M, m + 1), m + 1, n_max=m + 1)
        out[m] = dp_levels(a, b, p, m + 1)
    return out


def converge_rows(cfg: ExperimentConfig, dists: dict) -> list:
    ms = sorted(dists)
    rows = []
    for m in ms:
        lv = dists[m]
        dp = np.max(lv, axis=0)
        lo, hi = cap.t_interval(dp)
        row = _base(cfg, "per_m") | {
            "h": cfg["model.h"], "p": cfg["metric.p"], "d": cfg["model.d"], "m": m, "grid_level": m + 1,
            "samples": dp.size, "median_dp": float(np.median(dp)), "mean_dp": float(np.mean(dp)),
            "dp_ci_low": lo, "dp_ci_high": hi,
        }
        for i in range(lv.shape[0]):
            row[f"median_dp_level{i + 1}"] = float(np.median(lv[i]))
        if m + 1 in dists:
            r = _ratio(np.max(dists[m + 1], axis=0), dp)
            valid = r[~np.isnan(r)]
            below = int(np.count_nonzero(valid < 1))
            row["median_ratio"] = _median(r)
            if valid.size:
                row["frac_ratio_below_one"] = below / valid.size
                row["frac_ci_low"], row["frac_ci_high"] = cap.wilson_interval(below, valid.size)
        rows.append(row)
    return rows


def run_converge(cfg: ExperimentConfig, threads: int = 1):
    M = sample_level(cfg)
    ms = sorted(set(cfg["sweep.m"]))
    p = cfg["metric.p"]
    tasks = [(c, m) for c in _chunks(cfg["experiment.samples"]) for m in ms]

    def work(task):
        (start, n), m = task
        return converge_distances(_values(cfg, start, n, M), M, [m], p)[m]

    results = _map(work, tasks, threads)
    dists = {m: np.concatenate([r for (c, mm), r in zip(tasks, results) if mm == m], axis=-1) for m in ms}
    return CONVERGE_FIELDS, converge_rows(cfg, dists)


# ---------------------------------------------------------------- l2rates

L2_FIELDS = ["config_hash", "seed", "kind", "h", "i", "m", "n", "samples",
             "rms_diff", "rms_diff_ci_low", "rms_diff_ci_high", "rms_single", "max_abs_diff",
             "slope", "target"]


def l2_moments(values, M: int, ms, ns, levels) -> dict:
    """Per-sample mean over k of |w^{(m+1),i} - w^{(m),i}|² and |w^{(m),i}|² on level-n intervals.

    Returns {(m, n, i): (diff_ms, single_ms, max_abs_diff)} with per-sample arrays.
    """
    depth = max(levels)
    n_max = max(ns)
    out = {}
    for m in ms:
        a = lift_vertices(coarsen(values, M, m), m, n_max=n_max, depth=depth)
        b = lift_vertices(coarsen(values, M, m + 1), m + 1, n_max=n_max, depth=depth)
        for n in ns:
            for i in levels:
                x, y = a.levels[n][i - 1], b.levels[n][i - 1]
                axes = tuple(range(-i, 0))
                diff = y - x
                dsq = np.sum(diff * diff, axis=axes).mean(axis=-1)
                ssq = np.sum(x * x, axis=axes).mean(axis=-1)
                out[(m, n, i)] = (dsq, ssq, float(np.max(np.abs(diff), initial=0.0)))
    return out


def _slope(x, y):
    x, y = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
    if x.size < 2 or np.any(y <= 0):
        return NAN
    return float(np.polyfit(x, np.log2(y), 1)[0])


def l2_rows(cfg: ExperimentConfig, mom: dict, ms, ns, levels) -> list:
    h = cfg["model.h"]
    rows, rms = [], {}
    for m in ms:
        for n in ns:
            for i in levels:
                dsq, ssq, mx = mom[(m, n, i)]
                lo, hi = cap.t_interval(dsq)
                rms[(m, n, i)] = math.sqrt(float(np.mean(dsq)))
                rows.append(_base(cfg, "estimate") | {
                    "h": h, "i": i, "m": m, "n": n, "samples": dsq.size,
                    "rms_diff": rms[(m, n, i)],
                    "rms_diff_ci_low": math.sqrt(max(lo, 0.0)), "rms_diff_ci_high": math.sqrt(max(hi, 0.0)),
                    "rms_single": math.sqrt(float(np.mean(ssq))), "max_abs_diff": mx,
                })
    # level 1, n > m: slope in n at fixed m (exact linear interpolation gives -1)
    if 1 in levels:
        for m in ms:
            fine = [n for n in ns if n > m]
            if len(fine) >= 2:
                rows.append(_base(cfg, "slope_in_n") | {
                    "h": h, "i": 1, "m": m, "slope": _slope(fine, [rms[(m, n, 1)] for n in fine]),
                    "target": -1.0,
                })
    # n <= m: slope in m at fixed n; level 2 is compared with -(4h-1)/2
    for i in levels:
        if i == 1:
            continue
        for n in ns:
            coarse = [m for m in ms if n <= m]
            if len(coarse) >= 2:
                rows.append(_base(cfg, "slope_in_m") | {
                    "h": h, "i": i, "n": n, "slope": _slope(coarse, [rms[(m, n, i)] for m in coarse]),
                    "target": -(4 * h - 1) / 2 if i == 2 else NAN,
                })
    return rows


def run_l2rates(cfg: ExperimentConfig, threads: int = 1):
    M = sample_level(cfg)
    ms = sorted(set(cfg["sweep.m"]))
    ns = sorted(set(cfg["sweep.n"])) or list(range(1, cfg["metric.n_max"] + 1))
    levels = sorted(set(cfg["sweep.levels"]))
    chunks = _chunks(cfg["experiment.samples"])

    def work(chunk):
        start, n = chunk
        return l2_moments(_values(cfg, start, n, M), M, ms, ns, levels)

    parts = _map(work, chunks, threads)
    mom = {}
    for key in parts[0]:
        mom[key] = (np.concatenate([q[key][0] for q in parts]), np.concatenate([q[key][1] for q in parts]),
                    max(q[key][2] for q in parts))
    return L2_FIELDS, l2_rows(cfg, mom, ms, ns, levels)


# ---------------------------------------------------------------- ldp1d / tailrates

CAPACITY_FIELDS = ["config_hash", "seed", "kind", "b", "lam", "eps", "q", "N", "N_tilde", "m", "i",
                   "samples", "prob", "prob_ci_low", "prob_ci_high",
                   "lower", "upper", "eps2_log_lower", "eps2_log_upper",
                   "limit_lower", "limit_upper", "richardson_lower", "richardson_upper",
                   "slope", "target", "summable", "summable_series", "sandwich_ok"]


def ldp1d_rows(cfg: ExperimentConfig) -> list:
    rows = []
    N = cfg["sweep.N"]
    eps = sorted(cfg["sweep.eps"], reverse=True)
    for b, q in zip(cfg["sweep.b"], cfg["sweep.q"]):
        log_up = [cap.log_capacity_upper_1d(b, e, q, N) for e in eps]
        log_lo = [cap.log_capacity_lower_1d(b, e, q) for e in eps]
        for e, u, lo in zip(eps, log_up, log_lo):
            rows.append(_base(cfg, "point") | {
                "b": b, "eps": e, "q": q, "N": N, "lam": b / (q * e * e),
                "lower": math.exp(lo), "upper": math.exp(u),
                "eps2_log_lower": e * e * lo, "eps2_log_upper": e * e * u, "sandwich_ok": int(lo <= u),
            })
        if len(eps) >= 3:
            fu = cap.ldp_slope_fit(eps, log_values=log_up)
            fl = cap.ldp_slope_fit(eps, log_values=log_lo)
            rows.append(_base(cfg, "fit") | {
                "b": b, "eps": min(eps), "q": q, "N": N,
                "limit_lower": fl.limit, "limit_upper": fu.limit,
                "richardson_lower": fl.richardson, "richardson_upper": fu.richardson,
                "target": -b * b / (2 * q),
            })
    return rows


def run_ldp1d(cfg: ExperimentConfig, threads: int = 1):
    return CAPACITY_FIELDS, ldp1d_rows(cfg)


def _tail_params(cfg, N_tilde, lam, m, q):
    return cap.TailParams(cfg["model.h"], cfg["metric.p"], cfg["metric.gamma"], cfg.theta, N_tilde, q,
                          cfg["sweep.N"], cfg["model.d"], lam, m, cfg["sweep.C1"], cfg["sweep.C2"])


def tail_analytic_rows(cfg: ExperimentConfig) -> list:
    h, p, theta = cfg["model.h"], cfg["metric.p"], cfg.theta
    Nt = cfg.n_tilde()
    q = cfg["sweep.q"][0]
    ms = sorted(set(cfg["sweep.m"]))
    lams = sorted(set(cfg["sweep.lam"]))
    rows = []
    for i in sorted(set(cfg["sweep.levels"])):
        logs = {(m, lam): cap.log_tail_capacity_bound("difference", _tail_params(cfg, Nt, lam, m, q), i)
                for m in ms for lam in lams}
        for (m, lam), v in logs.items():
            rows.append(_base(cfg, "analytic") | {
                "lam": lam, "q": q, "N": cfg["sweep.N"], "N_tilde": Nt, "m": m, "i": i, "upper": _exp(v),
            })
        e = cap.decay_exponent(h, p, theta, Nt, i)
        for lam in lams:
            for m0, m1 in zip(ms[:-1], ms[1:]):
                rows.append(_base(cfg, "slope_in_m") | {
                    "lam": lam, "q": q, "N_tilde": Nt, "m": m0, "i": i,
                    "slope": (logs[(m1, lam)] - logs[(m0, lam)]) / (m1 - m0), "target": -e * math.log(2.0),
                    "summable": int(cap.summable_analytic(h, p, theta, Nt, i)),
                    "summable_series": int(cap.summable_by_series(h, p, theta, Nt, i)),
                })
        for m in ms:
            for l0, l1 in zip(lams[:-1], lams[1:]):
                rows.append(_base(cfg, "slope_in_log_lam") | {
                    "lam": l0, "q": q, "N_tilde": Nt, "m": m, "i": i,
                    "slope": (logs[(m, l1)] - logs[(m, l0)]) / (math.log(l1) - math.log(l0)),
                    "target": -2.0 * Nt,
                })
    return rows


def tail_rho(values, M: int, ms, levels, params) -> dict:
    """ρ_i(w^(m), w^(m+1)) per sample, {(m, i): array}."""
    depth = max(levels)
    out = {}
    for m in ms:
        n_max = max(params.n_max, m + 1)
        a = lift_vertices(coarsen(values, M, m), m, n_max=n_max, depth=depth)
        b = lift_vertices(coarsen(values, M, m + 1), m + 1, n_max=n_max, depth=depth)
        for i in levels:
            out[(m, i)] = np.atleast_1d(rho(a, b, i, params))
    return out


def tail_empirical_rows(cfg: ExperimentConfig, rhos: dict) -> list:
    h, p, theta, N = cfg["model.h"], cfg["metric.p"], cfg.theta, cfg["sweep.N"]
    rows = []
    for (m, i), r in sorted(rhos.items()):
        for q in cfg["sweep.q"]:
            for eps in sorted(cfg["sweep.eps"], reverse=True):
                Nt = cap.ldp_n_tilde(eps, h, p, theta, N)
                for lam in sorted(set(cfg["sweep.lam"])):
                    # {ρ_i(δ_ε w^(m), δ_ε w^(m+1)) > λ} = {ρ_i > λ/ε^i}
                    thr = lam / eps**i
                    k = int(np.count_nonzero(r > thr))
                    prob = k / r.size
                    lo, hi = cap.wilson_interval(k, r.size)
                    log_up = cap.log_tail_capacity_bound("difference", _tail_params(cfg, Nt, thr, m, q), i)
                    log_lo = math.log(prob) / q if k else -math.inf
                    rows.append(_base(cfg, "empirical") | {
                        "lam": lam, "eps": eps, "q": q, "N": N, "N_tilde": Nt, "m": m, "i": i,
                        "samples": r.size, "prob": prob, "prob_ci_low": lo, "prob_ci_high": hi,
                        "lower": cap.capacity_lower_from_prob(prob, q), "upper": _exp(log_up),
                        "eps2_log_lower": eps * eps * log_lo, "eps2_log_upper": eps * eps * log_up,
                        "sandwich_ok": int(log_lo <= log_up),
                    })
    return rows


def _tail_empirical(cfg, threads):
    M = sample_level(cfg)
    ms = sorted(set(cfg["sweep.m"]))
    levels = sorted(set(cfg["sweep.levels"]))
    params = cfg.metric
    chunks = _chunks(cfg["experiment.samples"])

    def work(chunk):
        start, n = chunk
        return tail_rho(_values(cfg, start, n, M), M, ms, levels, params)

    parts = _map(work, chunks, threads)
    rhos = {key: np.concatenate([q[key] for q in parts]) for key in parts[0]}
    return tail_empirical_rows(cfg, rhos)


def run_tailrates(cfg: ExperimentConfig, threads: int = 1):
    return CAPACITY_FIELDS, tail_analytic_rows(cfg) + _tail_empirical(cfg, threads)


def run_expgood(cfg: ExperimentConfig, threads: int = 1):
    return CAPACITY_FIELDS, _tail_empirical(cfg, threads)


# ---------------------------------------------------------------- rde-wz

RDE_FIELDS = ["config_hash", "seed", "kind", "m", "samples", "median_distance", "mean_distance",
              "ci_low", "ci_high", "median_ratio", "frac_ratio_below_one", "value", "slope", "target"]

CLOSED_FORM_SIGMA = 0.7


def smooth_driver(d: int, level: int) -> np.ndarray:
    """Vertices of (cos 2πkt - 1, sin 2πkt, ...) at level ``level``, starting at 0."""
    t = np.arange(2**level + 1) / 2.0**level
    cols = []
    for j in range(d):
        w = 2 * np.pi * (j // 2 + 1) * t
        cols.append(np.cos(w) - 1.0 if j % 2 == 0 else np.sin(w))
    return np.stack(cols, axis=-1)


def run_rde_wz(cfg: ExperimentConfig, threads: int = 1):
    V = fields(cfg)
    r = cfg.values["rde"]
    x0 = np.array(r["x0"])
    M = sample_level(cfg)
    ms = sorted(set(cfg["sweep.m"]))
    chunks = _chunks(cfg["experiment.samples"])

    def work(chunk):
        start, n = chunk
        return wz_distances(x0, V, _values(cfg, start, n, M), M, ms, r["substeps"], r["bound"])

    D = np.concatenate(_map(work, chunks, threads), axis=-1)
    rows = []
    for j, m in enumerate(ms):
        lo, hi = cap.t_interval(D[j])
        row = _base(cfg, "monte_carlo") | {
            "m": m, "samples": D.shape[1], "median_distance": float(np.median(D[j])),
            "mean_distance": float(np.mean(D[j])), "ci_low": lo, "ci_high": hi,
        }
        if m + 1 in ms:
            ratio = _ratio(D[j + 1], D[j])
            row["median_ratio"] = _median(ratio)
            valid = ratio[~np.isnan(ratio)]
            if valid.size:
                row["frac_ratio_below_one"] = float(np.mean(valid < 1))
        rows.append(row)

    level = r["smooth_level"]
    smooth_ms = [m for m in ms if m + 1 <= level]
    if smooth_ms:
        S = wz_distances(x0, V, smooth_driver(cfg["model.d"], level), level, smooth_ms, r["substeps"], r["bound"])
        for m, v in zip(smooth_ms, S):
            rows.append(_base(cfg, "smooth") | {"m": m, "value": float(v)})
        rows.append(_base(cfg, "smooth_fit") | {"slope": _slope(smooth_ms, S), "target": -2.0})

    # closed form for V(x) = σx along the first component of sample 0
    w = _values(cfg, 0, 1, M)[0, :, :1]
    lin = VectorFieldSet.linear([[[CLOSED_FORM_SIGMA]]])
    for m in ms:
        vert = coarsen(w, M, m)
        xs = solve_polyline(np.array([1.0]), lin, vert, max(r["substeps"], 64))
        err = float(np.max(np.abs(xs[:, 0] - np.exp(CLOSED_FORM_SIGMA * vert[:, 0]))))
        rows.append(_base(cfg, "closed_form") | {"m": m, "value": err})
    return RDE_FIELDS, rows


RUNNERS = {
    "converge": run_converge,
    "l2rates": run_l2rates,
    "ldp1d": run_ldp1d,
    "tailrates": run_tailrates,
    "expgood": run_expgood,
    "rde-wz": run_rde_wz,
}


def run(cfg: ExperimentConfig, threads: int = 1):
    return RUNNERS[cfg.kind](cfg, threads)
