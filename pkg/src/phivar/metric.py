"""Pseudo-metrics on [0, 1], covering numbers, entropy integrals and chaining.

Covering numbers use closed balls.  For ``HolderScaled`` metrics the
covering number is a step function of the radius with jumps at
``c (2k)^{-H}``; entropy integrals are summed exactly over those steps and
only the part below the ``K``-th jump (``K = 2**20``) is integrated with
Gauss-Legendre panels on a smooth surrogate.
"""
from __future__ import annotations

import csv
import itertools
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Sequence

import numpy as np
from scipy import integrate, optimize
from scipy.ndimage import maximum_filter1d, minimum_filter1d

from .funcs import OrliczFamily, Power, VariationFunction, orlicz_norm_mc

__all__ = [
    "PseudoMetric",
    "HolderScaled",
    "Tabulated",
    "load_tabulated_csv",
    "covering_number",
    "entropy_integral",
    "MetricVariation",
    "variation_of_metric",
    "chaining_scales",
    "ChainingResult",
    "chaining_statistic",
    "gaussian_orlicz_norm",
    "maximal_ratio",
    "maximal_inequality_check",
]

GL_NODES, GL_WEIGHTS = np.polynomial.legendre.leggauss(16)
N_STEPS = 2**20
DIVERGENCE_CAP = 1e12
BORDERLINE = 0.05


class PseudoMetric:
    diameter: float

    def pairwise(self, grid):
        raise NotImplementedError


@dataclass(frozen=True)
class HolderScaled(PseudoMetric):
    """``d(s, t) = c |s - t|^H``."""

    c: float
    H: float

    def __post_init__(self):
        if not (self.c > 0 and self.H > 0):
            raise ValueError("HolderScaled needs c > 0 and H > 0")

    @property
    def diameter(self):
        return self.c

    def lag(self, h):
        return self.c * np.abs(np.asarray(h, dtype=float)) ** self.H

    def __call__(self, s, t):
        return self.lag(np.asarray(s, dtype=float) - np.asarray(t, dtype=float))

    def pairwise(self, grid):
        g = np.asarray(grid, dtype=float)
        return self.lag(g[:, None] - g[None, :])


@dataclass(frozen=True, eq=False)
class Tabulated(PseudoMetric):
    """A pseudo-metric given by its matrix on a finite grid of [0, 1]."""

    grid: np.ndarray
    matrix: np.ndarray
    diameter: float = field(init=False)

    def __post_init__(self):
        g = np.asarray(self.grid, dtype=float)
        m = np.asarray(self.matrix, dtype=float)
        if m.shape != (g.size, g.size):
            raise ValueError("matrix must be square and match the grid")
        if np.any(np.diff(g) <= 0):
            raise ValueError("grid must be strictly increasing")
        if not np.allclose(m, m.T, rtol=0, atol=1e-12 * max(1.0, np.abs(m).max())):
            raise ValueError("matrix is not symmetric")
        if np.any(np.diag(m) != 0) or np.any(m < 0):
            raise ValueError("matrix must be nonnegative with zero diagonal")
        object.__setattr__(self, "grid", g)
        object.__setattr__(self, "matrix", 0.5 * (m + m.T))
        object.__setattr__(self, "diameter", float(m.max()))

    def pairwise(self, grid=None):
        if grid is not None and not np.array_equal(np.asarray(grid, dtype=float), self.grid):
            raise ValueError("tabulated metric is only defined on its own grid")
        return self.matrix

    def triangle_violations(self, n_triples=10000, seed=0, atol=1e-12):
        """Count violated triangle inequalities among random triples."""
        rng = np.random.default_rng(seed)
        i, j, k = rng.integers(0, self.grid.size, size=(3, n_triples))
        m = self.matrix
        return int(np.sum(m[i, k] > m[i, j] + m[j, k] + atol))


def load_tabulated_csv(path) -> Tabulated:
    """Header row of grid points, then the symmetric distance matrix."""
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r]
    grid = [float(x) for x in rows[0]]
    matrix = [[float(x) for x in r] for r in rows[1:]]
    return Tabulated(np.array(grid), np.array(matrix))


def save_tabulated_csv(d: Tabulated, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([repr(float(x)) for x in d.grid])
        for row in d.matrix:
            w.writerow([repr(float(x)) for x in row])


# -- covering numbers ----------------------------------------------------

def _holder_cover(d: HolderScaled, eps):
    eps = np.asarray(eps, dtype=float)
    with np.errstate(divide="ignore"):
        half = (np.minimum(eps, d.c) / d.c) ** (1 / d.H)
        x = 1.0 / (2.0 * half)
    n = np.ceil(x * (1 - 1e-12))
    return np.where(eps >= d.c, 1, np.maximum(n, 1)).astype(np.int64)


def _balls(matrix, eps):
    return matrix <= eps


def _greedy_cover(cover):
    uncovered = np.ones(cover.shape[0], dtype=bool)
    count = 0
    while uncovered.any():
        gains = cover[:, uncovered].sum(axis=1)
        best = int(np.argmax(gains))
        uncovered &= ~cover[best]
        count += 1
    return count


def _tabulated_cover(d: Tabulated, eps, exhaustive_limit=200_000):
    cover = _balls(d.matrix, eps)
    # points at distance 0 are indistinguishable
    g = _greedy_cover(cover)
    n = cover.shape[0]
    for k in range(1, g):
        if math.comb(n, k) > exhaustive_limit:
            break
        for combo in itertools.combinations(range(n), k):
            if np.logical_or.reduce(cover[list(combo)]).all():
                return k
    return g


def covering_number(d: PseudoMetric, eps, floored: bool = False):
    """Minimal number of closed ``eps``-balls covering [0, 1] (or the grid).

    With ``floored=True`` returns ``max(N, D/eps)`` as used in the chaining
    construction.
    """
    eps_arr = np.asarray(eps, dtype=float)
    if np.any(~(eps_arr > 0)):
        raise ValueError("covering radius must be positive")
    if isinstance(d, HolderScaled):
        n = _holder_cover(d, eps_arr)
    else:
        flat = [_tabulated_cover(d, e) for e in eps_arr.ravel()]
        n = np.array(flat, dtype=np.int64).reshape(eps_arr.shape)
    if floored:
        n = np.maximum(n, d.diameter / eps_arr)
    return n.item() if np.ndim(n) == 0 else n


# -- entropy integral ----------------------------------------------------

@lru_cache(maxsize=32)
def _holder_steps(c, H, alpha):
    k = np.arange(1, N_STEPS + 1, dtype=float)
    b = c * (2 * k) ** (-H)  # N(u) = k on [b_k, b_{k-1})
    level = np.log1p(k) ** (1 / alpha)
    tail = _holder_tail(c, H, alpha, np.array([b[-1]]))[0]
    widths = -np.diff(b)  # b_{k-1} - b_k for k = 2..K
    # cum[j] = integral over (0, b_{j+1}]
    inner = np.cumsum((level[1:] * widths)[::-1])[::-1]
    cum = np.empty(N_STEPS)
    cum[-1] = tail
    cum[:-1] = tail + inner
    return b, level, cum


def _holder_tail(c, H, alpha, x):
    """Integral over (0, x] of the smooth surrogate log(1.5 + (u/c)^{-1/H}/2)^{1/alpha}."""
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    for k in range(61):
        a, b = x * 2.0 ** (-k - 1), x * 2.0 ** (-k)
        u = 0.5 * (b - a)[:, None] * (GL_NODES + 1)[None, :] + a[:, None]
        vals = np.log(1.5 + 0.5 * (u / c) ** (-1 / H)) ** (1 / alpha)
        out += 0.5 * (b - a) * (vals @ GL_WEIGHTS)
    return out


def _holder_entropy(d: HolderScaled, eps, alpha):
    b, level, cum = _holder_steps(float(d.c), float(d.H), float(alpha))
    eps = np.asarray(eps, dtype=float)
    out = np.empty_like(eps)
    small = eps < b[-1]
    if np.any(small):
        out[small] = _holder_tail(d.c, d.H, alpha, eps[small])
    big = ~small
    if np.any(big):
        e = eps[big]
        # index j with b[j] <= e < b[j-1]  (b is decreasing)
        j = np.searchsorted(-b, -e, side="left")
        j = np.minimum(j, N_STEPS - 1)
        out[big] = cum[j] + level[j] * (e - b[j])
    return out


def _tabulated_entropy(d: Tabulated, eps, alpha):
    radii = np.unique(d.matrix)
    pos = radii[radii > 0]
    if pos.size == 0:
        # all points coincide: one ball for every radius
        return np.asarray(eps, dtype=float) * math.log(2.0) ** (1 / alpha)
    starts = np.concatenate([[0.0], pos])
    probe = np.concatenate([[pos[0] / 2], pos])
    counts = np.array([_tabulated_cover(d, r) for r in probe])
    level = np.log1p(counts) ** (1 / alpha)
    cum = np.concatenate([[0.0], np.cumsum(level[:-1] * np.diff(starts))])
    e = np.asarray(eps, dtype=float)
    j = np.searchsorted(starts, e, side="right") - 1
    return cum[j] + level[j] * (e - starts[j])


def entropy_integral(d: PseudoMetric, eps, alpha: float):
    """``δ(ε) = ∫_0^ε (log* N(T, d, u))^{1/α} du``, vectorized over ``eps``."""
    eps_arr = np.asarray(eps, dtype=float)
    if np.any(~(eps_arr > 0)):
        raise ValueError("entropy integral needs eps > 0")
    if not alpha > 0:
        raise ValueError("alpha must be positive")
    flat = eps_arr.ravel()
    if isinstance(d, HolderScaled):
        out = _holder_entropy(d, flat, alpha)
    else:
        out = _tabulated_entropy(d, flat, alpha)
    out = out.reshape(eps_arr.shape)
    return float(out) if out.ndim == 0 else out


def chaining_scales(d: PseudoMetric, alpha: float, levels: int = 20, floored: bool = True):
    """Chaining radii ``ε_n = 2^-n D`` and ``v_n = 12 ε_n (log N(ε_n))^{1/α}``."""
    n = np.arange(levels + 1)
    eps = d.diameter * 2.0 ** (-n)
    N = np.asarray(covering_number(d, eps, floored=floored), dtype=float)
    v = 12 * eps * np.log(N) ** (1 / alpha)
    return eps, N, v


# -- variation of the metric ---------------------------------------------

@dataclass(frozen=True)
class MetricVariation:
    """Outcome of ``V(Ψ, d)``: status is 'finite', 'divergent' or 'inconclusive'."""

    status: str
    value: float = math.nan
    uniform_sums: np.ndarray | None = field(default=None, repr=False)

    @property
    def finite(self):
        return self.status == "finite"


def _lag_dp(weights):
    """Max over partitions of {0..n} of sum weights[gap]; weights[0] unused."""
    n = weights.size - 1
    best = np.full(n + 1, -np.inf)
    best[0] = 0.0
    for j in range(1, n + 1):
        best[j] = np.max(best[:j] + weights[j:0:-1])
    return best[n]


def _uniform_sums(psi: VariationFunction, d: HolderScaled, depth: int):
    k = np.arange(depth + 1)
    s = np.log(d.c) - d.H * k * math.log(2.0)
    with np.errstate(over="ignore"):
        return np.exp(k * math.log(2.0) + psi.log_eval_log(s))


def variation_of_metric(psi: VariationFunction, d: PseudoMetric, depth: int = 24,
                        dp_grid: int = 2**14) -> MetricVariation:
    """``V(Ψ, d) = sup_π Σ Ψ(d(t_{i-1}, t_i))``.

    Power ``Ψ`` on a Hölder metric is decided analytically.  Other Hölder
    cases inspect the sums over dyadic uniform partitions for growth and
    refine a finite verdict by an exact grid DP.  A tabulated metric lives
    on a finite grid, where the DP is exact.
    """
    if isinstance(d, Tabulated):
        from .variation import sup_variation_matrix

        return MetricVariation("finite", sup_variation_matrix(psi(d.matrix)))
    if isinstance(d, HolderScaled) and isinstance(psi, Power):
        ph = psi.p * d.H
        if ph >= 1:
            return MetricVariation("finite", d.c ** psi.p)
        return MetricVariation("divergent", math.inf)

    sums = _uniform_sums(psi, d, depth)
    q = psi.leading_exponent
    if np.isfinite(q):
        qh = q * d.H
        if qh != 1 and abs(qh - 1) < BORDERLINE:
            return MetricVariation("inconclusive", math.nan, sums)
    if not np.all(np.isfinite(sums)) or sums.max() > DIVERGENCE_CAP:
        return MetricVariation("divergent", math.inf, sums)

    tail = sums[-9:]
    inc = np.diff(tail)
    if np.all(inc > 0):
        ratios = inc[1:] / inc[:-1]
        if np.min(ratios) > 0.9:
            return MetricVariation("divergent", math.inf, sums)
        if np.max(ratios) > 0.9:
            return MetricVariation("inconclusive", math.nan, sums)
        r = np.max(ratios)
        limit = tail[-1] + inc[-1] * r / (1 - r)
    else:
        limit = sums.max()

    grid = np.arange(dp_grid + 1) / dp_grid
    dp = _lag_dp(psi(d.lag(grid)))
    return MetricVariation("finite", float(max(limit, dp, sums.max())), sums)


# -- chaining statistic --------------------------------------------------

@dataclass(frozen=True)
class ChainingResult:
    mean: float
    per_path: np.ndarray
    argmax_lag: np.ndarray


def _paths_matrix(paths):
    if isinstance(paths, np.ndarray):
        arr = np.atleast_2d(paths)
    else:
        paths = list(paths)
        if not paths:
            raise ValueError("empty ensemble")
        arr = np.vstack([np.asarray(getattr(p, "values", p), dtype=float) for p in paths])
    if arr.size == 0 or arr.shape[0] == 0:
        raise ValueError("empty ensemble")
    return np.asarray(arr, dtype=float)


def chaining_statistic(paths, d: PseudoMetric, alpha: float) -> ChainingResult:
    """Mean over paths of ``sup_{s != t} |X(s) - X(t)| / δ(d(s, t))``.

    Paths share the uniform grid ``i/n``.  For Hölder metrics the sup is
    organised by lag; dyadic blocks of lags whose sliding-window range
    cannot beat the current maximum are skipped (the bound is exact, so
    the result equals the full pairwise sup).
    """
    X = _paths_matrix(paths)
    P, n1 = X.shape
    n = n1 - 1
    if isinstance(d, Tabulated):
        if d.grid.size != n1:
            raise ValueError("metric grid does not match the paths")
        dist = d.matrix
        iu = np.triu_indices(n1, 1)
        dd = dist[iu]
        keep = dd > 0
        delta = entropy_integral(d, dd[keep], alpha)
        per = np.array([np.max(np.abs(x[iu[1]] - x[iu[0]])[keep] / delta) for x in X])
        return ChainingResult(float(per.mean()), per, np.full(P, -1))

    lags = np.arange(1, n + 1)
    delta = entropy_integral(d, d.lag(lags / n), alpha)
    best = np.zeros(P)
    arg = np.zeros(P, dtype=np.int64)
    K = 1
    while K <= n:
        hi = min(2 * K, n + 1)
        width = hi  # window of hi points covers every lag < hi
        if K > 8:
            win = min(width, n1)
            rng_ = (maximum_filter1d(X, win, axis=1, origin=-(win // 2))[:, : n1 - win + 1]
                    - minimum_filter1d(X, win, axis=1, origin=-(win // 2))[:, : n1 - win + 1]).max(axis=1)
            if np.all(rng_ / delta[K - 1] <= best):
                K *= 2
                continue
        for k in range(K, hi):
            inc = np.abs(X[:, k:] - X[:, :-k]).max(axis=1) / delta[k - 1]
            upd = inc > best
            best[upd] = inc[upd]
            arg[upd] = k
        K *= 2
    return ChainingResult(float(best.mean()), best, arg)


# -- maximal inequality --------------------------------------------------

def gaussian_orlicz_norm(alpha: float) -> float:
    """``‖N(0,1)‖_{φ_α}`` by quadrature (closed form ``sqrt(8/3)`` at α=2)."""
    if not 0 < alpha <= 2:
        raise ValueError("the standard normal has a finite φ_α norm only for α <= 2")
    if alpha == 2:
        # E exp(X²/Δ²) = (1 - 2/Δ²)^{-1/2} = 2
        return math.sqrt(8 / 3)

    def excess(delta):
        def f(x):
            e = (x / delta) ** alpha - x * x / 2
            return (math.exp(min(e, 700.0)) - math.exp(-x * x / 2)) if e < 700 else 1e300
        val, _ = integrate.quad(f, 0, math.inf, limit=400, epsabs=1e-12, epsrel=1e-10)
        return 2 * val / math.sqrt(2 * math.pi) - 1

    lo = 1e-3
    while excess(lo) < 0:
        lo /= 2
    hi = 2.0
    while excess(hi) > 0:
        hi *= 2
    return optimize.brentq(excess, lo, hi, xtol=1e-14, rtol=1e-13)


def _max_bound(n, alpha):
    return (2 * math.log(n) / math.log(2)) ** (1 / alpha)


def maximal_ratio(xi, alpha: float) -> float:
    """Empirical ``‖max_i |ξ_i|‖ / (max_i ‖ξ_i‖ · (2 log n / log 2)^{1/α})``.

    ``xi`` has shape (trials, n).
    """
    xi = np.asarray(xi, dtype=float)
    n = xi.shape[1]
    if n < 2:
        raise ValueError("the maximal inequality needs n >= 2")
    num = orlicz_norm_mc(np.abs(xi).max(axis=1), alpha)
    if num == 0:
        return 0.0
    den = max(orlicz_norm_mc(xi[:, i], alpha) for i in range(n))
    return num / (den * _max_bound(n, alpha))


@dataclass(frozen=True)
class MaximalReport:
    n: int
    alpha: float
    trials: int
    max_norm: float
    bound: float
    ratio: float


def maximal_inequality_check(n: int, alpha: float = 2.0, trials: int = 100_000, seed=0,
                             chunk: int = 4096) -> MaximalReport:
    """Monte Carlo check of the max-of-n Orlicz bound for i.i.d. standard normals."""
    if n < 2:
        raise ValueError("the maximal inequality needs n >= 2")
    rng = np.random.default_rng(seed)
    maxima = np.empty(trials)
    for start in range(0, trials, chunk):
        stop = min(start + chunk, trials)
        maxima[start:stop] = np.abs(rng.standard_normal((stop - start, n))).max(axis=1)
    num = orlicz_norm_mc(maxima, alpha)
    bound = gaussian_orlicz_norm(alpha) * _max_bound(n, alpha)
    return MaximalReport(n, alpha, trials, num, bound, num / bound)
