"""Experiment runners shared by the command line and the acceptance tests.

Each runner returns an :class:`Outcome`: named tables (lists of rows with a
header), scalar summaries and a list of ``(description, passed)`` checks.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import conditions, hermite, metric, simulate, variation
from .funcs import HermiteOptimal

__all__ = [
    "Outcome",
    "EXPERIMENTS",
    "sigma_constant",
    "series_check",
    "limiting_variation",
    "chaining",
    "covariance",
    "jm_bound",
    "roughness_ordering",
]


@dataclass
class Outcome:
    name: str
    tables: dict = field(default_factory=dict)      # name -> (header, rows)
    summary: dict = field(default_factory=dict)
    checks: list = field(default_factory=list)     # (description, passed)

    @property
    def passed(self):
        return all(ok for _, ok in self.checks)

    def check(self, description, ok):
        self.checks.append((description, bool(ok)))


def _paths(m, H, n, n_paths, seed):
    if m == 1:
        return simulate.fbm_ensemble(H, n, n_paths, seed)
    return simulate.hermite_ensemble(m, H, n, n_paths, seed)


def sigma_constant(m=1, H=0.75, cells=128, seed=0):
    out = Outcome("sigma-constant")
    res = hermite.sigma_mH(m, H, n_cells=cells, seed=seed)
    rows = [(cells, res.sigma, res.sigma ** H, res.method, res.converged)]
    if m >= 2:
        fine = hermite.sigma_mH(m, H, n_cells=2 * cells, seed=seed)
        rows.append((2 * cells, fine.sigma, fine.sigma ** H, fine.method, fine.converged))
    out.tables["sigma"] = (["cells", "sigma", "sigma_pow_H", "method", "converged"], rows)
    out.summary.update(sigma=res.sigma, sup=res.sup, lower_bound=res.lower_bound)
    if m == 1:
        target = 2 ** (1 / (2 * H))
        out.summary["target"] = target
        out.check(f"sigma = 2^(1/(2H)) = {target:.6g} within 1e-3", abs(res.sigma / target - 1) < 1e-3)
    else:
        bound = 2 ** (m / 2) / math.sqrt(math.factorial(m))
        out.summary["bound"] = bound
        out.check(f"sigma^H below 2^(m/2)/sqrt(m!) = {bound:.6g} by 1e-3", bound - res.sigma ** H >= 1e-3)
        out.check("node doubling changes sigma by < 0.5%", abs(rows[1][1] / rows[0][1] - 1) < 5e-3)
    return out


def series_check(case=1, p=2.0, alpha=2.0, beta0=1.0, beta=1.4, c=1.0, r=1.0, v=None, C_scale=1.0,
                 m_max=200, constant="corrected", expect="converges"):
    out = Outcome("series-check")
    cfg = conditions.preset(case, p=p, alpha=alpha, beta0=beta0, beta=beta, c=c, r=r, v=v, constant=constant)
    if C_scale != 1.0:
        cfg = conditions.Theorem1Config(cfg.phi, cfg.psi, cfg.alpha, cfg.C * C_scale, cfg.M, cfg.K_alpha)
    verdict = conditions.series_check(cfg, m_max)
    out.tables["series"] = (["m", "y_m", "x_m", "term", "partial_sum"], verdict.table)
    out.summary.update(status=verdict.status, reason=verdict.reason, tail_ratio=verdict.tail_ratio,
                       phi=cfg.phi.token(), psi=cfg.psi.token(), C=cfg.C, partial_sum=verdict.partial_sums[-1][1])
    if expect == "converges":
        out.check("series converges", verdict.status == conditions.CONVERGES)
    else:
        out.check("series does not converge", verdict.status != conditions.CONVERGES)
    return out


def limiting_variation(m=1, H=0.5, grids=(2**12, 2**14, 2**16), paths=20, delta_factor=4.0, seed=0,
                       lo=1.0, hi=3.5):
    """Mean of the mesh-restricted supremum with ``δ = delta_factor/√n``, on nested grids.

    Paths are simulated on the finest grid and subsampled, so every grid
    sees the same realisations.
    """
    out = Outcome("limiting-variation")
    grids = sorted(int(g) for g in grids)
    N = grids[-1]
    X = _paths(m, H, N, paths, seed)
    phi = HermiteOptimal(m, H)
    rows = []
    for n in grids:
        Y = X[:, :: N // n]
        delta = delta_factor / math.sqrt(n)
        vals = np.array([variation.sup_variation(y, phi, mesh_cap=delta).value for y in Y])
        rows.append((n, delta, vals.mean(), vals.std(ddof=1) / math.sqrt(paths)))
    out.tables["limiting"] = (["n", "delta", "mean_sup", "stderr"], rows)
    target = hermite.sigma_mH(m, H).sigma if (m == 1 or m == 2) else math.nan
    out.summary.update(target=target, final=rows[-1][2])
    means = [r[2] for r in rows]
    out.check("mean sup nondecreasing in n", all(b >= a for a, b in zip(means, means[1:])))
    out.check(f"finest-grid mean within [{lo}, {hi}]", lo <= means[-1] <= hi)
    return out


def chaining(H=0.5, alpha=2.0, grids=(2**12, 2**16), paths=20, seed=0, max_growth=0.10):
    out = Outcome("chaining")
    grids = sorted(int(g) for g in grids)
    N = grids[-1]
    X = simulate.fbm_ensemble(H, N, paths, seed)
    d = metric.HolderScaled(1.0, H)
    rows = []
    for n in grids:
        res = metric.chaining_statistic(X[:, :: N // n], d, alpha)
        rows.append((n, res.mean, float(res.per_path.max())))
    out.tables["chaining"] = (["n", "mean_theta", "max_theta"], rows)
    growth = rows[-1][1] / rows[0][1] - 1
    out.summary["growth"] = growth
    out.check(f"mean theta grows < {max_growth:.0%} across grids", growth < max_growth)
    return out


def covariance(m=1, H=0.7, n=1024, paths=20000, seed=0, points=8, k_sigma=None):
    out = Outcome("covariance")
    X = _paths(m, H, n, paths, seed)
    rep = simulate.covariance_report(X, H, points)
    k = k_sigma if k_sigma is not None else (3.0 if m == 1 else 5.0)
    rows = [(s, t, rep.empirical[i, j], rep.target[i, j], rep.stderr[i, j])
            for i, s in enumerate(rep.times) for j, t in enumerate(rep.times) if j >= i]
    out.tables["covariance"] = (["s", "t", "empirical", "target", "stderr"], rows)
    out.summary.update(max_deviation=rep.max_deviation, mc_sigma=rep.mc_sigma)
    out.check(f"max deviation < {k:g} MC-sigma", rep.max_deviation < k * rep.mc_sigma)
    return out


def jm_bound(H=0.5, p=3.0, grids=(2**10, 2**12, 2**14), paths=20, seed=0, tolerance=0.20):
    out = Outcome("jm-bound")
    grids = sorted(int(g) for g in grids)
    N = grids[-1]
    X = simulate.fbm_ensemble(H, N, paths, seed)
    d = metric.HolderScaled(1.0, H)
    rows = []
    for n in grids:
        rep = variation.jm_bound_report(X[:, :: N // n], p, d)
        rows.append((n, rep.mean_norm, rep.W.value, rep.ratio if rep.ratio is not None else math.nan))
    out.tables["jm"] = (["n", "mean_p_norm", "W_p", "ratio"], rows)
    ratios = np.array([r[3] for r in rows])
    finite = bool(np.all(np.isfinite(ratios)))
    spread = float(ratios.max() / ratios.min() - 1) if finite else math.inf
    out.summary.update(spread=spread)
    out.check("ratio finite", finite)
    out.check(f"ratio stable within {tolerance:.0%}", spread < tolerance)
    return out


def roughness_ordering(H=0.75, grids=(2**9, 2**11), paths=10, seed=0, min_growth=0.25):
    """Grid sup-variation of Rosenblatt paths under the first- and second-order gauges."""
    out = Outcome("roughness-ordering")
    grids = sorted(int(g) for g in grids)
    N = grids[-1]
    X = simulate.hermite_ensemble(2, H, N, paths, seed)
    wrong, right = HermiteOptimal(1, H), HermiteOptimal(2, H)
    rows = []
    for n in grids:
        Y = X[:, :: N // n]
        rows.append((n, np.mean([variation.sup_variation(y, wrong).value for y in Y]),
                     np.mean([variation.sup_variation(y, right).value for y in Y])))
    out.tables["roughness"] = (["n", "wrong_gauge", "right_gauge"], rows)
    g_wrong = rows[-1][1] / rows[0][1]
    g_right = rows[-1][2] / rows[0][2]
    out.summary.update(wrong_growth=g_wrong, right_growth=g_right)
    out.check(f"wrong-gauge growth >= {min_growth:.0%}", g_wrong - 1 >= min_growth)
    out.check("right-gauge growth below wrong-gauge growth", g_right < g_wrong)
    return out


EXPERIMENTS = {
    "limiting-variation": limiting_variation,
    "sigma-constant": sigma_constant,
    "series-check": series_check,
    "chaining": chaining,
    "covariance": covariance,
    "jm-bound": jm_bound,
}
