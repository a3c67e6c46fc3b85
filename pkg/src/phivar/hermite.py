"""Hermite kernels, their L2 norms, the norming constant and σ_{m,H}.

The m-linear form of the kernel factorises through the operator
``(Tξ)(v) = ∫_{-∞}^v (v-u)^{-γ} ξ(u) du``:

    ∫ Q ξ^{⊗m} = c0 ∫_0^1 (Tξ)(v)^m dv,

and ``T T*`` is the integral operator on ``L²[0, 1]`` with kernel
``R(v, v') = B(1-γ, 2γ-1) |v - v'|^{1-2γ}``.  Optimising over
``ξ = T*φ`` turns the supremum in σ_{m,H} into a problem on the compact
interval [0, 1], which is what :class:`DiscretizedKernel` discretises
(piecewise-constant φ, exact cell integrals of R, Gauss nodes per cell).
"""
from __future__ import annotations

import hashlib
import math
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import integrate, linalg
from scipy.optimize import brentq
from scipy.special import betaln, gammaln

__all__ = [
    "HermiteKernel",
    "kernel_Q",
    "q_norm_closed_form",
    "QuadratureNorm",
    "q_norm_quadrature",
    "norming_c0",
    "DiscretizedKernel",
    "discretize_kernel",
    "SigmaResult",
    "sigma_mH",
    "ss_hopm",
    "a_n",
    "a_n_lhs",
]

CACHE_VERSION = 1
GL16 = np.polynomial.legendre.leggauss(16)


def _check_domain(m, H):
    if int(m) != m or m < 1:
        raise ValueError(f"chaos order must be a positive integer, got {m!r}")
    if not 0.5 < H < 1:
        raise ValueError(f"Hurst index must lie in (1/2, 1), got {H!r}")


def kernel_exponent(m, H):
    return 0.5 + (1 - H) / m


@dataclass(frozen=True)
class HermiteKernel:
    """``Q_t(u) = c0 ∫_0^t Π (v - u_i)_+^{-γ} dv`` with ``γ = 1/2 + (1-H)/m``.

    ``c0`` defaults to the norming constant making ``‖X(1)‖₂ = 1``.
    """

    m: int
    H: float
    c0: float = field(default=None)

    def __post_init__(self):
        _check_domain(self.m, self.H)
        object.__setattr__(self, "m", int(self.m))
        if self.c0 is None:
            object.__setattr__(self, "c0", norming_c0(self.m, self.H))
        elif not self.c0 > 0:
            raise ValueError("c0 must be positive")

    @property
    def gamma(self):
        return kernel_exponent(self.m, self.H)


def kernel_Q(k: HermiteKernel, t: float, u) -> float:
    """Evaluate ``Q_t(u_1, ..., u_m)`` by quadrature.

    The substitution ``v = a + w^{1/(1-γ)}`` (``a = max u_i``) removes the
    endpoint singularity of the largest factor.
    """
    u = np.asarray(u, dtype=float).ravel()
    if u.size != k.m:
        raise ValueError(f"expected {k.m} coordinates")
    if not 0 <= t <= 1:
        raise ValueError("t must lie in [0, 1]")
    a = float(u.max())
    if a >= t:
        return 0.0
    g = k.gamma
    kappa = 1.0 / (1.0 - g)
    lo = max(a, 0.0)
    w0, w1 = (lo - a) ** (1 - g), (t - a) ** (1 - g)
    others = np.sort(u)[:-1]

    def f(w):
        v = a + w ** kappa
        return kappa * np.prod((v - others) ** (-g))

    val, _ = integrate.quad(f, w0, w1, epsabs=0, epsrel=1e-11, limit=200)
    return k.c0 * val


def q_norm_closed_form(m: int, H: float, c0: float = 1.0) -> float:
    """``‖Q‖_{L²(R^m)} = c0 [B(1/2-(1-H)/m, (2-2H)/m)^m / (H(2H-1))]^{1/2}``."""
    _check_domain(m, H)
    lb = betaln(0.5 - (1 - H) / m, (2 - 2 * H) / m)
    return c0 * math.exp(0.5 * (m * lb - math.log(H * (2 * H - 1))))


def norming_c0(m: int, H: float) -> float:
    """``c0`` with ``m! ‖Q‖² = 1``."""
    q1 = q_norm_closed_form(m, H, 1.0)
    return math.exp(-0.5 * gammaln(m + 1)) / q1


# -- quadrature cross-check of the L2 norm -------------------------------

@dataclass(frozen=True)
class QuadratureNorm:
    value: float          # with the analytic tail beyond -U added
    truncated: float      # integral over [-U, 1]^m only
    tail_error: float     # bound on the neglected terms of the tail series


def _geom_panels(x_hi, n_panels, nodes=GL16):
    """Gauss nodes/weights on [x 2^{-k-1}, x 2^{-k}], k < n_panels (x may be an array)."""
    x, w = nodes
    k = np.arange(n_panels)
    a = np.multiply.outer(np.asarray(x_hi, dtype=float), 2.0 ** (-k - 1))
    b = 2 * a
    pts = 0.5 * (b - a)[..., None] * (x + 1) + a[..., None]
    wts = 0.5 * (b - a)[..., None] * w
    shape = pts.shape[:-2] + (-1,)
    return pts.reshape(shape), wts.reshape(shape)


def _tail_series(A, h, g, terms=8):
    """∫_A^∞ s^{-γ} (s + h)^{-γ} ds via the binomial series in h/s, plus the first omitted term."""
    total = np.zeros(np.broadcast(A, h).shape)
    coef = 1.0
    for j in range(terms):
        total = total + coef * h ** j * A ** (1 - 2 * g - j) / (2 * g + j - 1)
        coef *= (-g - j) / (j + 1)
    nxt = np.abs(coef * h ** terms * A ** (1 - 2 * g - terms) / (2 * g + terms - 1))
    return total, nxt


def q_norm_quadrature(m: int, H: float, U: float = 200.0, c0: float = 1.0,
                      v_panels: int = 40, h_panels: int = 40) -> QuadratureNorm:
    """``‖Q_1‖_{L²}`` by quadrature over ``[-U, 1]^m`` plus an analytic tail.

    Fubini reduces the m-fold integral of ``Q_1²`` exactly to
    ``∫∫_{[0,1]²} R_U(v, v')^m dv dv'`` with
    ``R_U(v, v') = ∫_{-U}^{min(v, v')} (v-u)^{-γ} (v'-u)^{-γ} du``;
    ``R_U`` is integrated numerically and the region below ``-U`` is added
    from its convergent binomial expansion.
    """
    _check_domain(m, H)
    if m > 3:
        raise NotImplementedError("quadrature cross-check supports m <= 3")
    if U < 10:
        raise ValueError("truncation radius U must be >= 10")
    g = kernel_exponent(m, H)
    kappa = 1.0 / (2 * H - 1)  # h = y^kappa flattens h^{2H-2}

    # ∫_0^1 x^{-γ}(1+x)^{-γ} dx, the self-similar part of the inner integral
    I0, _ = integrate.quad(lambda x: x ** (-g) * (1 + x) ** (-g), 0, 1, epsabs=0, epsrel=1e-13, limit=200)

    yx, yw = np.polynomial.legendre.leggauss(24)
    ys = 0.5 * (yx + 1)

    def R(v, h):
        # inner integral over s in (0, v - h + U] with s = v' - u
        A = v - h + U
        part0 = h ** (1 - 2 * g) * I0
        L = np.log(A / h)
        # s = h (A/h)^y on [h, A], 6 equal panels in y
        acc = np.zeros_like(h)
        for p in range(6):
            y = (p + ys[:, None]) / 6
            s = h * np.exp(y * L)
            acc += (yw[:, None] * s ** (1 - g) * (s + h) ** (-g)).sum(axis=0) * L / 12
        tail, err = _tail_series(A, h, g)
        return part0 + acc, part0 + acc + tail, err

    v_nodes, v_w = _geom_panels(1.0, v_panels)
    trunc = full = err_tot = 0.0
    for v, wv in zip(v_nodes, v_w):
        ymax = v ** (1 / kappa)
        yy, wy = _geom_panels(ymax, h_panels)
        h = yy ** kappa
        jac = kappa * yy ** (kappa - 1)
        r_t, r_f, e = R(v, h)
        trunc += wv * np.sum(wy * jac * r_t ** m)
        full += wv * np.sum(wy * jac * r_f ** m)
        err_tot += wv * np.sum(wy * jac * m * r_f ** (m - 1) * e)
    trunc, full, err_tot = 2 * trunc, 2 * full, 2 * err_tot
    return QuadratureNorm(c0 * math.sqrt(full), c0 * math.sqrt(trunc),
                          c0 * err_tot / (2 * math.sqrt(full)))


# -- discretisation on [0, 1] ---------------------------------------------

def _cell_integral(v, x1, x2, a):
    """∫_{x1}^{x2} |v - y|^a dy for arrays v (rows) and cells (columns)."""
    F = lambda z: np.sign(z) * np.abs(z) ** (a + 1) / (a + 1)
    return F(x2[None, :] - v[:, None]) - F(x1[None, :] - v[:, None])


def _cell_gram(edges, a):
    """∫_{cell k}∫_{cell l} |x - y|^a dy dx."""
    P = lambda z: np.abs(z) ** (a + 2) / ((a + 1) * (a + 2))
    x1, x2 = edges[:-1, None], edges[1:, None]
    y1, y2 = edges[None, :-1], edges[None, 1:]
    G = P(y2 - x1) - P(y2 - x2) - P(y1 - x1) + P(y1 - x2)
    return 0.5 * (G + G.T)


@dataclass(frozen=True, eq=False)
class DiscretizedKernel:
    """Galerkin discretisation of the normed kernel's m-linear form.

    ``objective(z) = Σ_i weights_i (S z)_i^m`` over the unit sphere equals
    ``∫ Q ξ^{⊗m} / c0`` for ``ξ = T*φ`` with φ piecewise constant on
    ``edges``; ``gram`` is ``<1_k, R 1_l>``.
    """

    m: int
    H: float
    edges: np.ndarray
    nodes: np.ndarray
    weights: np.ndarray
    S: np.ndarray
    gram: np.ndarray
    c0: float

    @property
    def n_cells(self):
        return self.edges.size - 1

    def objective(self, z):
        return float(self.weights @ (self.S @ z) ** self.m)

    def key(self):
        return cache_key(self.m, self.H, self.n_cells, self.nodes.size // self.n_cells)


def cache_key(m, H, n_cells, q):
    raw = f"v{CACHE_VERSION}:m={m}:H={float(H)!r}:cells={n_cells}:q={q}"
    return hashlib.sha1(raw.encode()).hexdigest()[:16]


def _graded_edges(n_cells):
    xi = np.linspace(0, 1, n_cells + 1)
    e = 0.5 * (1 - np.cos(np.pi * xi))
    e[0], e[-1] = 0.0, 1.0
    return e


def discretize_kernel(m: int, H: float, n_cells: int = 128, q: int = 8,
                      cache_dir=None) -> DiscretizedKernel:
    """Build (or load from ``cache_dir`` / ``$PHIVAR_CACHE``) the discretised kernel."""
    _check_domain(m, H)
    cache_dir = cache_dir or os.environ.get("PHIVAR_CACHE")
    path = None
    if cache_dir:
        path = Path(cache_dir) / f"kernel-{cache_key(m, H, n_cells, q)}.npz"
        if path.exists():
            disc = _load(path, m, H, n_cells, q)
            if disc is not None:
                return disc
    g = kernel_exponent(m, H)
    a = 1 - 2 * g
    b = math.exp(betaln(1 - g, 2 * g - 1))
    edges = _graded_edges(n_cells)
    gx, gw = np.polynomial.legendre.leggauss(q)
    h = np.diff(edges)
    nodes = (edges[:-1, None] + 0.5 * h[:, None] * (gx + 1)).ravel()
    weights = (0.5 * h[:, None] * gw).ravel()
    A = b * _cell_integral(nodes, edges[:-1], edges[1:], a)
    G = b * _cell_gram(edges, a)
    L = linalg.cholesky(G, lower=True)
    S = linalg.solve_triangular(L, A.T, lower=True).T  # A L^{-T}
    disc = DiscretizedKernel(int(m), float(H), edges, nodes, weights, S, G, norming_c0(m, H))
    if path is not None:
        _save(path, disc)
    return disc


def _save(path, disc):
    path.parent.mkdir(parents=True, exist_ok=True)
    meta = np.array([CACHE_VERSION, disc.m, disc.H, disc.n_cells, disc.nodes.size // disc.n_cells, disc.c0])
    np.savez(path, meta=meta, edges=disc.edges, nodes=disc.nodes, weights=disc.weights, S=disc.S, gram=disc.gram)


def _load(path, m, H, n_cells, q):
    with np.load(path) as f:
        meta = f["meta"]
        if (int(meta[0]) != CACHE_VERSION or int(meta[1]) != m or float(meta[2]) != float(H)
                or int(meta[3]) != n_cells or int(meta[4]) != q):
            return None
        return DiscretizedKernel(int(m), float(H), f["edges"], f["nodes"], f["weights"], f["S"], f["gram"],
                                 float(meta[5]))


# -- σ_{m,H} ----------------------------------------------------------------

@dataclass(frozen=True)
class SigmaResult:
    sigma: float
    sup: float            # sup over the unit ball of |∫ Q ξ^{⊗m}|
    method: str
    converged: bool = True
    lower_bound: bool = False


def ss_hopm(S, weights, m, z0, shift=None, tol=1e-13, max_iter=20000):
    """Shifted symmetric higher-order power method for ``max Σ w_i (S z)_i^m`` on the sphere.

    Returns ``(value, z, converged)``.
    """
    z = z0 / np.linalg.norm(z0)
    if shift is None:
        row = np.sqrt((S ** 2).sum(axis=1)).max()
        M2 = S.T @ (np.abs(weights)[:, None] * S)
        shift = (m - 1) * row ** (m - 2) * np.linalg.norm(M2, 2)
    val = float(weights @ (S @ z) ** m)
    for _ in range(max_iter):
        grad = S.T @ (weights * (S @ z) ** (m - 1))
        znew = grad + shift * z
        znew /= np.linalg.norm(znew)
        new = float(weights @ (S @ znew) ** m)
        done = abs(new - val) <= tol * max(1.0, abs(new)) and np.linalg.norm(znew - z) < 1e-7
        z, val = znew, new
        if done:
            return val, z, True
    return val, z, False


def sigma_mH(m: int, H: float, disc: DiscretizedKernel | None = None, n_cells: int = 128,
             restarts: int = 20, seed: int = 0) -> SigmaResult:
    """``σ_{m,H} = 2^{m/(2H)} (sup_{‖ξ‖₂ ≤ 1} |∫ Q ξ^{⊗m}|)^{1/H}`` for the normed kernel.

    m=1 uses the closed dual value, m=2 a dense symmetric eigensolve, and
    m >= 3 the shifted power method with random restarts (a lower bound).
    For m=1 and ``H <= 1/2`` (fractional Brownian motion outside the
    Hermite range) the duality value ``2^{1/(2H)}`` is returned.
    """
    if m == 1 and 0 < H <= 0.5:
        return SigmaResult(2 ** (1 / (2 * H)), 1.0, "duality")
    _check_domain(m, H)
    disc = disc or discretize_kernel(m, H, n_cells)
    if disc.m != m or disc.H != H:
        raise ValueError("discretised kernel does not match (m, H)")
    if m == 1:
        sup = disc.c0 * math.sqrt(disc.gram.sum())
        method, conv, lower = "gram", True, False
    elif m == 2:
        M = disc.S.T @ (disc.weights[:, None] * disc.S)
        ev = linalg.eigvalsh(M)
        sup = disc.c0 * float(np.max(np.abs(ev)))
        method, conv, lower = "eigh", True, False
    else:
        rng = np.random.default_rng(seed)
        M = disc.S.T @ (disc.weights[:, None] * disc.S)
        _, vecs = linalg.eigh(M)
        starts = [vecs[:, -1], -vecs[:, -1]] + [rng.standard_normal(disc.n_cells) for _ in range(restarts)]
        best, conv = -np.inf, False
        for z0 in starts:
            val, _, ok = ss_hopm(disc.S, disc.weights, m, z0)
            if abs(val) > best:
                best, conv = abs(val), ok
        sup = disc.c0 * best
        method, lower = "ss-hopm", True
    sigma = 2 ** (m / (2 * H)) * sup ** (1 / H)
    return SigmaResult(sigma, sup, method, conv, lower)


# -- hypercontractivity constants -------------------------------------------

def a_n_lhs(n: int, a: float) -> float:
    """``n a^{1/n} + Σ_{k>n} (2 k a^{2/n} / n)^k / k!``; ``inf`` outside the convergence region."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if a <= 0:
        return 0.0
    x = 2 * a ** (2 / n) / n
    if x * math.e >= 1:
        return math.inf
    total = n * a ** (1 / n)
    if x == 0:
        return total
    # term ratios x (1 + 1/k)^k increase to x e < 1, so the tail after a
    # term is at most term * r / (1 - r) with r = x e
    r = x * math.e
    k = n + 1
    while True:
        lt = k * math.log(k * x) - gammaln(k + 1)
        term = math.exp(lt)
        total += term
        if lt < -745 or term * r / (1 - r) < 1e-17 * total:
            return total
        k += 1
        if k > n + 10 ** 7:  # pragma: no cover
            return math.inf


def a_n(n: int) -> float:
    """Largest ``a`` with ``n a^{1/n} + Σ_{k>n} (2 k a^{2/n}/n)^k / k! <= 2``."""
    if n < 1:
        raise ValueError("n must be >= 1")
    edge = (n / (2 * math.e)) ** (n / 2)  # series radius in a
    f = lambda a: a_n_lhs(n, a) - 2.0
    # the lhs increases and diverges at the radius; walk towards it
    hi = 0.5 * edge
    while f(hi) < 0:
        hi = edge - 0.5 * (edge - hi)
    return brentq(f, 1e-300, hi, xtol=1e-300, rtol=4 * np.finfo(float).eps, maxiter=500)
