"""Sample paths of fractional Brownian motion and Hermite processes.

Fractional Brownian motion is exact on the grid (circulant embedding of
fractional Gaussian noise, dense Cholesky fallback).  Hermite processes of
order m <= 3 are discretised multiple Wiener-Itô integrals: the noise is
cut into cells ``c_j`` of a grid on ``[-U, 1]``, and with the cell-averaged
kernels ``g_j(v) = |c_j|^{-1} ∫_{c_j} (v - u)_+^{-γ} du``

    X(t) = c0 ∫_0^t Σ_{j_1, ..., j_m distinct} g_{j_1}(v) ⋯ g_{j_m}(v) ΔB_{j_1} ⋯ ΔB_{j_m} dv.

The off-diagonal sum is obtained from power sums ``p_k = Σ_j (g_j ΔB_j)^k``
(``p1² - p2`` and ``p1³ - 3 p1 p2 + 2 p3``).  The exact variance of the
discrete X(1) is available in closed form and used to rescale to
``Var X(1) = 1``.
"""
from __future__ import annotations

import csv
import json
import math
import struct
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import linalg

from .hermite import kernel_exponent

__all__ = [
    "SamplePath",
    "fgn_covariance",
    "simulate_fbm",
    "fbm_ensemble",
    "HermiteScheme",
    "hermite_scheme",
    "simulate_hermite",
    "hermite_ensemble",
    "CovarianceReport",
    "fbm_covariance",
    "covariance_report",
    "save_path_csv",
    "load_path_csv",
    "save_ensemble",
    "load_ensemble",
    "DENSE_LIMIT",
]

DENSE_LIMIT = 2048
MAX_KERNEL_ENTRIES = 40_000_000
ENSEMBLE_MAGIC = b"PHIVARE1"


@dataclass(frozen=True, eq=False)
class SamplePath:
    """Values at ``t_i = i/n``, ``i = 0..n``."""

    values: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 1 or v.size < 2:
            raise ValueError("a sample path needs at least two values")
        if v[0] != 0 or not np.all(np.isfinite(v)):
            raise ValueError("sample paths start at 0 and are finite")
        object.__setattr__(self, "values", v)

    @property
    def n(self):
        return self.values.size - 1

    @property
    def t(self):
        return np.arange(self.n + 1) / self.n


def _check_n(n):
    if int(n) != n or n < 2 or (int(n) & (int(n) - 1)):
        raise ValueError(f"grid size must be a power of two >= 2, got {n!r}")
    return int(n)


def _rng(seed):
    return np.random.default_rng(seed)


# -- fractional Brownian motion -------------------------------------------

def fgn_covariance(H, n):
    """Autocovariance of unit-step fractional Gaussian noise at lags 0..n."""
    k = np.arange(n + 1, dtype=float)
    return 0.5 * (np.abs(k + 1) ** (2 * H) - 2 * k ** (2 * H) + np.abs(k - 1) ** (2 * H))


@lru_cache(maxsize=16)
def _circulant_eigs(H, n):
    g = fgn_covariance(H, n)
    row = np.concatenate([g, g[-2:0:-1]])
    lam = np.fft.fft(row).real
    if lam.min() < -1e-10 * lam.max():
        return None
    return np.clip(lam, 0, None)


@lru_cache(maxsize=8)
def _dense_factor(H, n):
    g = fgn_covariance(H, n - 1)
    return linalg.cholesky(linalg.toeplitz(g), lower=True)


def _resolve_method(H, n, method):
    if method not in ("auto", "circulant", "dense"):
        raise ValueError(f"unknown fBm method {method!r}")
    if method == "dense":
        if n > 4 * DENSE_LIMIT:
            raise ValueError(f"dense factorization limited to n <= {4 * DENSE_LIMIT}")
        return "dense"
    if _circulant_eigs(H, n) is not None:
        return "circulant"
    if method == "circulant" or n > DENSE_LIMIT:
        raise ValueError(f"circulant embedding is not nonnegative for H={H}, n={n}; use n <= {DENSE_LIMIT}")
    return "dense"


def _fbm_rows(H, n, rngs, method):
    P = len(rngs)
    if method == "circulant":
        lam = _circulant_eigs(H, n)
        N = lam.size
        z = np.vstack([r.standard_normal(2 * N) for r in rngs])
        W = np.sqrt(lam / N) * (z[:, :N] + 1j * z[:, N:])
        inc = np.fft.fft(W, axis=1).real[:, :n]
    else:
        L = _dense_factor(H, n)
        z = np.vstack([r.standard_normal(n) for r in rngs])
        inc = z @ L.T
    out = np.zeros((P, n + 1))
    np.cumsum(inc * float(n) ** (-H), axis=1, out=out[:, 1:])
    return out


def simulate_fbm(H: float, n: int, seed=0, method: str = "auto") -> SamplePath:
    """Exact fBm on the grid ``i/n`` (deterministic given ``seed``)."""
    if not 0 < H < 1:
        raise ValueError("H must lie in (0, 1)")
    n = _check_n(n)
    method = _resolve_method(H, n, method)
    vals = _fbm_rows(H, n, [_rng(seed)], method)[0]
    return SamplePath(vals, {"generator": f"fbm-{method}", "m": 1, "H": H, "seed": seed})


def fbm_ensemble(H: float, n: int, n_paths: int, seed=0, method: str = "auto", chunk: int = 512) -> np.ndarray:
    """``(n_paths, n+1)`` array; path ``i`` uses the seed sequence ``(seed, i)``."""
    if not 0 < H < 1:
        raise ValueError("H must lie in (0, 1)")
    n = _check_n(n)
    method = _resolve_method(H, n, method)
    out = np.empty((n_paths, n + 1))
    for a in range(0, n_paths, chunk):
        b = min(n_paths, a + chunk)
        out[a:b] = _fbm_rows(H, n, [_rng([seed, i]) for i in range(a, b)], method)
    return out


# -- Hermite processes --------------------------------------------------------

@dataclass(frozen=True, eq=False)
class HermiteScheme:
    """Precomputed discretisation for :func:`hermite_ensemble`."""

    m: int
    H: float
    n: int
    U: float
    cells: np.ndarray      # cell edges on [-U, 1]
    G: np.ndarray          # cell-averaged kernels at the v-nodes, shape (V, J)
    wv: np.ndarray         # v-node weights
    step_of_node: np.ndarray
    scale: float           # exact variance correction (absorbs c0)
    raw_variance: float    # Var X(1) of the uncorrected scheme, in units c0 = 1

    @property
    def sd(self):
        return np.sqrt(np.diff(self.cells))

    def variance_curve(self):
        """Exact variances of the rescaled discrete ``X(t_i)``, ``i = 1..n``."""
        return np.array([_discrete_variance(self, t) for t in range(1, self.n + 1)]) * self.scale ** 2


def _u_cells(n, U, ratio=1.08):
    fine = np.linspace(-1.0, 1.0, 2 * n + 1)
    if U <= 1:
        raise ValueError("U must exceed 1")
    k = int(math.ceil(math.log(U) / math.log(ratio)))
    coarse = -np.geomspace(U, 1.0, k + 1)[:-1]
    return np.concatenate([coarse, fine])


def _cell_kernels(nodes, a, b, g):
    d1 = np.clip(nodes[:, None] - a[None, :], 0, None)
    d2 = np.clip(nodes[:, None] - b[None, :], 0, None)
    return (d1 ** (1 - g) - d2 ** (1 - g)) / ((1 - g) * (b - a)[None, :])


def _discrete_variance(s, upto=None):
    """Var of ``∫_0^{t} Σ_distinct ...`` (c0 = 1) for the first ``upto`` time steps."""
    mask = np.ones(s.wv.size, bool) if upto is None else s.step_of_node < upto
    G, w = s.G[mask], s.wv[mask]
    var_u = np.diff(s.cells)
    K = (G * var_u) @ G.T
    total = float(w @ (K ** s.m) @ w)
    if s.m == 1:
        return total
    if s.m == 2:
        d = (G ** 2).T @ w
        return 2.0 * (total - float(np.sum(d ** 2 * var_u ** 2)))
    # m == 3: distinct triples by inclusion-exclusion over coincidences
    F = (G ** 2 * w[:, None]).T @ G  # f(j, j, l)
    pair = float(np.sum(F ** 2 * (var_u ** 2)[:, None] * var_u[None, :]))
    d3 = (G ** 3).T @ w
    triple = float(np.sum(d3 ** 2 * var_u ** 3))
    return 6.0 * (total - 3 * pair + 2 * triple)


def hermite_scheme(m: int, H: float, n: int, U: float = 1e8, q: int = 2) -> HermiteScheme:
    """Discretisation with a uniform u-grid of step ``1/n`` on ``[-1, 1]`` and geometric cells below."""
    if m not in (1, 2, 3):
        raise ValueError("simulation supports m in {1, 2, 3}")
    if not 0.5 < H < 1:
        raise ValueError("Hermite processes need H in (1/2, 1)")
    n = _check_n(n)
    cells = _u_cells(n, U)
    gx, gw = np.polynomial.legendre.leggauss(q)
    left = np.arange(n) / n
    nodes = (left[:, None] + 0.5 / n * (gx + 1)).ravel()
    wv = np.tile(0.5 / n * gw, n)
    J, V = cells.size - 1, nodes.size
    if J * V > MAX_KERNEL_ENTRIES or (m == 3 and J * J > MAX_KERNEL_ENTRIES // 4):
        nmax = int(2 ** math.floor(math.log2(math.sqrt(MAX_KERNEL_ENTRIES / (4 * q)))))
        raise ValueError(f"kernel matrix too large for m={m}, n={n}; try n <= {nmax // (2 if m == 3 else 1)}")
    g = kernel_exponent(m, H)
    G = _cell_kernels(nodes, cells[:-1], cells[1:], g)
    s = HermiteScheme(m, H, n, U, cells, G, wv, np.repeat(np.arange(n), q), 1.0, 1.0)
    raw = _discrete_variance(s)
    object.__setattr__(s, "raw_variance", raw)
    object.__setattr__(s, "scale", 1.0 / math.sqrt(raw))
    return s


def _hermite_rows(s: HermiteScheme, dB):
    Z1 = dB @ s.G.T
    if s.m == 1:
        integrand = Z1
    elif s.m == 2:
        integrand = Z1 ** 2 - (dB ** 2) @ (s.G ** 2).T
    else:
        p2 = (dB ** 2) @ (s.G ** 2).T
        p3 = (dB ** 3) @ (s.G ** 3).T
        integrand = Z1 ** 3 - 3 * Z1 * p2 + 2 * p3
    steps = (integrand * s.wv).reshape(dB.shape[0], s.n, -1).sum(axis=2)
    out = np.zeros((dB.shape[0], s.n + 1))
    np.cumsum(steps * s.scale, axis=1, out=out[:, 1:])
    return out


def hermite_ensemble(m: int, H: float, n: int, n_paths: int, seed=0, U: float = 1e8,
                     scheme: HermiteScheme | None = None, chunk: int = 64) -> np.ndarray:
    """``(n_paths, n+1)`` Hermite paths; path ``i`` uses the seed sequence ``(seed, i)``."""
    s = scheme or hermite_scheme(m, H, n, U)
    if (s.m, s.H, s.n) != (m, H, _check_n(n)):
        raise ValueError("scheme does not match (m, H, n)")
    sd = s.sd
    out = np.empty((n_paths, n + 1))
    for a in range(0, n_paths, chunk):
        b = min(n_paths, a + chunk)
        dB = np.vstack([_rng([seed, i]).standard_normal(sd.size) for i in range(a, b)]) * sd
        out[a:b] = _hermite_rows(s, dB)
    return out


def simulate_hermite(m: int, H: float, n: int, seed=0, U: float = 1e8,
                     scheme: HermiteScheme | None = None) -> SamplePath:
    s = scheme or hermite_scheme(m, H, n, U)
    dB = _rng(seed).standard_normal(s.cells.size - 1) * s.sd
    vals = _hermite_rows(s, dB[None, :])[0]
    vals[0] = 0.0
    return SamplePath(vals, {"generator": "hermite", "m": m, "H": H, "seed": seed, "U": s.U})


# -- ensemble statistics ------------------------------------------------------

def fbm_covariance(s, t, H):
    s, t = np.asarray(s, float), np.asarray(t, float)
    return 0.5 * (s ** (2 * H) + t ** (2 * H) - np.abs(t - s) ** (2 * H))


@dataclass(frozen=True)
class CovarianceReport:
    times: np.ndarray
    empirical: np.ndarray
    target: np.ndarray
    stderr: np.ndarray
    max_deviation: float
    mc_sigma: float   # largest entrywise standard error


def covariance_report(paths, H: float, points: int = 8) -> CovarianceReport:
    """Empirical ``E[X(s) X(t)]`` on ``t_k = k/points`` against the fBm covariance."""
    X = np.atleast_2d(np.asarray([getattr(p, "values", p) for p in paths], dtype=float)) \
        if not isinstance(paths, np.ndarray) else np.atleast_2d(paths)
    P, n1 = X.shape
    n = n1 - 1
    if P < 100:
        raise ValueError("covariance_report needs at least 100 paths")
    if n % points:
        raise ValueError("grid size must be a multiple of the sub-grid size")
    idx = np.arange(1, points + 1) * (n // points)
    Y = X[:, idx]
    prod = Y[:, :, None] * Y[:, None, :]
    emp = prod.mean(axis=0)
    se = prod.std(axis=0, ddof=1) / math.sqrt(P)
    t = idx / n
    target = fbm_covariance(t[:, None], t[None, :], H)
    dev = np.abs(emp - target)
    return CovarianceReport(t, emp, target, se, float(dev.max()), float(se.max()))


# -- I/O -----------------------------------------------------------------------

def save_path_csv(path: SamplePath, filename):
    with open(filename, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "value"])
        for t, v in zip(path.t, path.values):
            w.writerow([repr(float(t)), repr(float(v))])


def load_path_csv(filename) -> SamplePath:
    data = np.loadtxt(filename, delimiter=",", skiprows=1, ndmin=2)
    t = data[:, 0]
    n = t.size - 1
    if not np.allclose(t, np.arange(n + 1) / n, rtol=0, atol=1e-15):
        raise ValueError("CSV grid is not uniform on [0, 1]")
    return SamplePath(data[:, 1])


def save_ensemble(filename, paths, params: dict):
    """Binary ensemble: magic, JSON header length + header, then little-endian float64 rows."""
    X = np.ascontiguousarray(np.atleast_2d(paths), dtype="<f8")
    header = json.dumps({**params, "shape": list(X.shape)}, sort_keys=True).encode()
    with open(filename, "wb") as fh:
        fh.write(ENSEMBLE_MAGIC)
        fh.write(struct.pack("<I", len(header)))
        fh.write(header)
        fh.write(X.tobytes())


def load_ensemble(filename):
    with open(filename, "rb") as fh:
        if fh.read(len(ENSEMBLE_MAGIC)) != ENSEMBLE_MAGIC:
            raise ValueError("not a phivar ensemble file")
        (hlen,) = struct.unpack("<I", fh.read(4))
        header = json.loads(fh.read(hlen))
        body = np.frombuffer(fh.read(), dtype="<f8")
    shape = tuple(header.pop("shape"))
    if body.size != shape[0] * shape[1]:
        raise ValueError("truncated ensemble file")
    return body.reshape(shape).astype(float), header
