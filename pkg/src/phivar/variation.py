"""Φ-variation of sampled paths.

The supremum over partitions drawn from the sample grid is computed
exactly by dynamic programming::

    best[j] = max_{i < j, j - i <= w} best[i] + Φ(|f_j - f_i|)

Floating-point addition is monotone, so the DP value equals the largest
left-to-right partition sum bit for bit.  Among optimal partitions the
lexicographically smallest index sequence is returned, where "optimal"
means every partial sum attains ``best`` at its node.  With exact
arithmetic this is every maximiser; in floating point a partition with a
suboptimal prefix can round to the same total and is not considered.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .funcs import Power, PowerLogLogPlus, VariationFunction
from .metric import MetricVariation, PseudoMetric, variation_of_metric

__all__ = [
    "PartitionResult",
    "v_phi",
    "sup_variation",
    "sup_variation_matrix",
    "limiting_variation",
    "phi_norm",
    "is_convex",
    "JMReport",
    "jm_bound_report",
    "FULL_DP_LIMIT",
]

FULL_DP_LIMIT = 2**15
BLOCK = 256


def _values(f):
    vals = np.asarray(getattr(f, "values", f), dtype=float)
    if vals.ndim != 1 or vals.size < 2:
        raise ValueError("a path needs at least two grid values")
    if not np.all(np.isfinite(vals)):
        raise ValueError("path values must be finite")
    return vals


def _check_partition(pi, n):
    pi = np.asarray(pi)
    if pi.ndim != 1 or pi.size < 2 or not np.issubdtype(pi.dtype, np.integer):
        raise ValueError("partition must be an integer index list with at least two entries")
    if pi[0] != 0 or pi[-1] != n or np.any(np.diff(pi) <= 0):
        raise ValueError(f"partition must increase strictly from 0 to {n}")
    return pi


def _phi_abs(phi, x):
    # one evaluation path for every caller, so sums agree bit for bit
    return np.asarray(phi(np.ascontiguousarray(np.abs(x), dtype=float)), dtype=float)


def _left_sum(terms):
    s = 0.0
    for t in terms:
        s += float(t)
    return s


def v_phi(f, pi, phi: VariationFunction) -> float:
    """``Σ Φ(|f(t_k) - f(t_{k-1})|)`` over the partition ``pi`` (grid indices)."""
    vals = _values(f)
    pi = _check_partition(pi, vals.size - 1)
    return _left_sum(_phi_abs(phi, np.diff(vals[pi])))


@dataclass(frozen=True)
class PartitionResult:
    value: float
    partition: np.ndarray
    mesh: float
    n: int

    def to_csv(self, path, f):
        vals = _values(f)
        idx = self.partition
        contrib = np.concatenate([[0.0], np.diff(vals[idx])])
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["index", "t", "f", "increment"])
            for i, c in zip(idx, contrib):
                w.writerow([int(i), repr(i / self.n), repr(float(vals[i])), repr(float(c))])


def _dp(vals, phi, w):
    n = vals.size - 1
    best = np.full(n + 1, -np.inf)
    best[0] = 0.0
    ties = [None] * (n + 1)
    for J0 in range(1, n + 1, BLOCK):
        J1 = min(J0 + BLOCK, n + 1)
        I0 = max(0, J0 - w)
        block = _phi_abs(phi, vals[J0:J1, None] - vals[None, I0:J1])
        for j in range(J0, J1):
            lo = max(0, j - w)
            cand = best[lo:j] + block[j - J0, lo - I0:j - I0]
            top = cand.max()
            best[j] = top
            ties[j] = lo + np.flatnonzero(cand == top)
    return best, ties


def _lex_smallest(ties, n):
    # nodes lying on some optimal path back from n
    good = np.zeros(n + 1, dtype=bool)
    good[n] = True
    for j in range(n, 0, -1):
        if good[j]:
            good[ties[j]] = True
    # predecessor sets inverted: successor j of i is admissible if i in ties[j]
    part = [0]
    i = 0
    while i != n:
        nxt = None
        for j in range(i + 1, n + 1):
            if good[j] and i in ties[j]:
                nxt = j
                break
        part.append(nxt)
        i = nxt
    return np.asarray(part, dtype=np.int64)


def sup_variation(f, phi: VariationFunction, mesh_cap: float | None = None) -> PartitionResult:
    """Exact maximum of ``v_Φ(f, π)`` over grid partitions with mesh ``<= mesh_cap``."""
    vals = _values(f)
    n = vals.size - 1
    if mesh_cap is None:
        w = n
    else:
        if mesh_cap < 1.0 / n * (1 - 1e-12):
            raise ValueError(f"mesh cap {mesh_cap} is below the grid step 1/{n}")
        w = max(1, min(n, int(math.floor(mesh_cap * n * (1 + 1e-12)))))
    best, ties = _dp(vals, phi, w)
    part = _lex_smallest(ties, n)
    mesh = float(np.diff(part).max()) / n
    return PartitionResult(float(best[n]), part, mesh, n)


def sup_variation_matrix(M) -> float:
    """DP maximum of ``Σ M[i_{k-1}, i_k]`` over increasing chains from 0 to n-1."""
    M = np.asarray(M, dtype=float)
    n = M.shape[0] - 1
    best = np.full(n + 1, -np.inf)
    best[0] = 0.0
    for j in range(1, n + 1):
        best[j] = np.max(best[:j] + M[:j, j])
    return float(best[n])


def limiting_variation(f, phi: VariationFunction, delta_list):
    """``[(δ, PartitionResult)]`` for the mesh-restricted suprema."""
    deltas = [float(d) for d in delta_list]
    if any(b >= a for a, b in zip(deltas, deltas[1:])):
        raise ValueError("delta_list must be strictly decreasing")
    return [(d, sup_variation(f, phi, mesh_cap=d)) for d in deltas]


def is_convex(phi: VariationFunction, lo=1e-8, hi=1e3, n=2000) -> bool:
    """Numerical convexity check on a log-spaced grid (relative slack 1e-9)."""
    t = np.geomspace(lo, hi, n)
    y = phi(t)
    slopes = np.diff(y) / np.diff(t)
    return bool(np.all(np.diff(slopes) >= -1e-9 * np.abs(slopes[1:]) - 1e-300))


def phi_norm(f, phi: VariationFunction, rtol: float = 1e-6) -> float:
    """Gauge norm ``inf{r > 0 : V_Φ(f / r) <= 1}`` on the grid."""
    if not phi.delta2:
        raise NotImplementedError(f"{phi.kind} fails the Δ2 condition; no gauge norm")
    if isinstance(phi, Power):
        if phi.p < 1:
            raise NotImplementedError("Power with p < 1 is not convex")
        return sup_variation(f, phi).value ** (1 / phi.p)
    if not is_convex(phi):
        raise NotImplementedError(f"{phi.token()} is not convex")
    vals = _values(f)
    if np.all(vals == vals[0]):
        return 0.0
    V = lambda r: sup_variation(vals / r, phi).value
    lo = hi = max(np.ptp(vals), 1e-300)
    while V(hi) > 1:
        hi *= 2
    while V(lo) <= 1:
        lo /= 2
    while hi - lo > rtol * hi:
        mid = 0.5 * (lo + hi)
        if V(mid) > 1:
            lo = mid
        else:
            hi = mid
    return hi


@dataclass(frozen=True)
class JMReport:
    mean_norm: float
    W: MetricVariation
    ratio: float | None
    norms: np.ndarray


def jm_bound_report(ensemble, p: float, d: PseudoMetric) -> JMReport:
    """Mean grid ``‖X‖_p`` against ``W_p^{1/p} (1 + W_p^{1/2})``.

    ``W_p = V(Ψ, d)`` with ``Ψ(x) = x^p (log*_2(1/(x ∧ 1)))^{p/2}``.
    """
    paths = ensemble if isinstance(ensemble, np.ndarray) else [getattr(e, "values", e) for e in ensemble]
    X = np.atleast_2d(np.asarray(paths, dtype=float))
    norms = np.array([sup_variation(x, Power(p)).value ** (1 / p) for x in X])
    W = variation_of_metric(PowerLogLogPlus(p, 2.0), d)
    mean = float(norms.mean())
    if not W.finite:
        return JMReport(mean, W, None, norms)
    denom = W.value ** (1 / p) * (1 + math.sqrt(W.value))
    return JMReport(mean, W, mean / denom, norms)
