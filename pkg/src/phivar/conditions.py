"""Series condition for bounded Φ-variation and the four standard presets.

For a pair (Φ, Ψ) and Orlicz exponent α the sequences

    y_m = ∫_0^{2^{-m}} (log*(1/ε))^{1/α} Ψ^{-1}(dε),
    x_m = Φ^{-1}(C 2^{-m}) / (K_α ∫_0^{2^{-m}} (log*(2^{-m}/ε))^{1/α} Ψ^{-1}(dε))

enter the series ``Σ 2^m Φ(M y_m) exp(-x_m^α)``.  Both Stieltjes integrals
are evaluated after the substitution ``ε = Ψ(u)``, ``u = U_m w`` with
``U_m = Ψ^{-1}(2^{-m})``, entirely in log space: in the rapidly varying
presets ``U_m`` is far below the smallest double.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

from .funcs import ExpBeta, ExpLogPow, Power, PowerLogLogMinus, PowerLogLogPlus, VariationFunction

__all__ = [
    "Theorem1Config",
    "SeriesVerdict",
    "y_m",
    "x_m",
    "log_y_m",
    "log_x_m",
    "log_term",
    "K_alpha_p",
    "series_check",
    "preset",
    "CONVERGES",
    "DIVERGES",
    "INCONCLUSIVE",
]

CONVERGES, DIVERGES, INCONCLUSIVE = "converges", "diverges", "inconclusive"
LOG2 = math.log(2.0)
_GX, _GW = np.polynomial.legendre.leggauss(16)
N_PANELS = 120


def default_K_alpha(alpha):
    return 2 ** (1 / alpha) if alpha < 1 else 1.0


@dataclass(frozen=True)
class Theorem1Config:
    phi: VariationFunction
    psi: VariationFunction
    alpha: float
    C: float
    M: float = 1.0
    K_alpha: float = field(default=None)

    def __post_init__(self):
        for name in ("alpha", "C", "M"):
            v = getattr(self, name)
            if not (v > 0 and math.isfinite(v)):
                raise ValueError(f"{name} must be positive and finite, got {v!r}")
        if self.K_alpha is None:
            object.__setattr__(self, "K_alpha", default_K_alpha(self.alpha))
        elif not self.K_alpha > 0:
            raise ValueError("K_alpha must be positive")


# -- quadrature in log space ---------------------------------------------------

def _panel_nodes(n_panels=N_PANELS):
    k = np.arange(n_panels)
    a = 2.0 ** (-k - 1)
    w = (0.5 * a[:, None] * (_GX + 1) + a[:, None]).ravel()
    wt = (0.5 * a[:, None] * _GW).ravel()
    return w, wt, a[-1]


_W, _WT, _WMIN = _panel_nodes()


def _log_U(psi, m):
    ly = -m * LOG2
    if not ly < math.log(psi.sup):
        raise ValueError(f"2^-{m} lies outside the range of {psi.token()}")
    return psi.log_inverse_log(ly)


def _log_integral(psi, alpha, m, shift):
    """log ∫_0^{U_m} (log*(e^{shift}/Ψ(u)))^{1/α} du."""
    lU = _log_U(psi, m)
    s = lU + np.log(_W)
    lpsi = psi.log_eval_log(s)
    h = np.logaddexp(0.0, shift - lpsi) ** (1 / alpha)
    body = float(np.sum(_WT * h))
    # remainder on (0, w_min): local power law through the last two nodes
    h0, h1 = h[-1], h[-17]
    kappa = -math.log(h0 / h1) / math.log(_W[-1] / _W[-17]) if h0 > 0 and h1 > 0 else 0.0
    kappa = min(max(kappa, 0.0), 0.999)
    tail = h0 * _WMIN / (1 - kappa)
    return lU + math.log(body + tail)


def _check_m(m):
    if int(m) != m or m < 0:
        raise ValueError(f"m must be a nonnegative integer, got {m!r}")
    return int(m)


def log_y_m(cfg: Theorem1Config, m: int) -> float:
    return _log_integral(cfg.psi, cfg.alpha, _check_m(m), 0.0)


def y_m(cfg: Theorem1Config, m: int) -> float:
    """``∫_0^{Ψ^{-1}(2^{-m})} (log*(1/Ψ(u)))^{1/α} du``."""
    return math.exp(log_y_m(cfg, m))


def log_x_m(cfg: Theorem1Config, m: int) -> float:
    m = _check_m(m)
    lnum = cfg.phi.log_inverse_log(math.log(cfg.C) - m * LOG2)
    lden = math.log(cfg.K_alpha) + _log_integral(cfg.psi, cfg.alpha, m, -m * LOG2)
    return lnum - lden


def x_m(cfg: Theorem1Config, m: int) -> float:
    return math.exp(log_x_m(cfg, m))


def log_term(cfg: Theorem1Config, m: int) -> float:
    """``log(2^m Φ(M y_m) e^{-x_m^α})``."""
    lx = log_x_m(cfg, m)
    xa = math.exp(min(cfg.alpha * lx, 700.0))
    lphi = float(cfg.phi.log_eval_log(math.log(cfg.M) + log_y_m(cfg, m)))
    return m * LOG2 + lphi - (xa if cfg.alpha * lx < 700 else math.inf)


def K_alpha_p(alpha: float, p: float) -> float:
    """``(1/p) ∫_0^1 (log*(1/v))^{1/α} v^{1/p - 1} dv``; substitution ``v = w^p`` removes the endpoint singularity."""
    f = lambda w: math.log1p(w ** (-p)) ** (1 / alpha) if w > 0 else 0.0
    val, _ = integrate.quad(f, 0, 1, epsabs=0, epsrel=1e-12, limit=200)
    return val


# -- verdict -------------------------------------------------------------------

@dataclass
class SeriesVerdict:
    status: str
    partial_sums: list
    tail_ratio: float
    table: list = field(default_factory=list)   # (m, y_m, x_m, term, partial sum)
    reason: str = ""

    @property
    def converges(self):
        return self.status == CONVERGES

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["m", "y_m", "x_m", "term", "partial_sum"])
            for row in self.table:
                w.writerow([row[0]] + [repr(float(v)) for v in row[1:]])


def _first_defined_m(cfg):
    for m in range(0, 64):
        try:
            _log_U(cfg.psi, m)
            cfg.phi.log_inverse_log(math.log(cfg.C) - m * LOG2)
            return m
        except ValueError:
            continue
    raise ValueError("no index m with both sequences defined")


def series_check(cfg: Theorem1Config, m_max: int = 200, ratio_cut: float = 0.99, tail_cut: float = 1e-3,
                 slope_margin: float = 0.1) -> SeriesVerdict:
    """Classify ``Σ 2^m Φ(M y_m) e^{-x_m^α}`` from its first ``m_max`` terms.

    Converges when, over the last 20% of terms, either every ratio is at
    most ``ratio_cut`` and the geometric tail bound is below ``tail_cut``
    times the partial sum, or the terms decay like a power ``m^s`` with
    ``s < -1 - slope_margin`` and every local exponent below -1.  In the
    power case the integral tail estimate is reported as ``tail_ratio``
    but not thresholded: for ``s`` near -2 it is of order ``1/m_max``.  Diverges
    when the window terms are nondecreasing and at least 1e-6, or follow a
    power law with ``s > -1 + slope_margin``.  Anything else is
    inconclusive.
    """
    if m_max < 10:
        raise ValueError("m_max must be at least 10")
    m0 = _first_defined_m(cfg)
    ms = np.arange(m0, m_max + 1)
    lt = np.empty(ms.size)
    ly = np.empty(ms.size)
    lx = np.empty(ms.size)
    for i, m in enumerate(ms):
        ly[i] = log_y_m(cfg, m)
        lx[i] = log_x_m(cfg, m)
        lt[i] = log_term(cfg, m)
    lS = np.logaddexp.accumulate(lt)
    S = np.exp(lS)
    terms = np.exp(lt)
    with np.errstate(over="ignore"):
        yv, xv = np.exp(ly), np.exp(lx)
    table = [(int(m), a, b, t, s) for m, a, b, t, s in zip(ms, yv, xv, terms, S)]
    partial = [(int(m), float(s)) for m, s in zip(ms, S)]

    k = max(3, int(math.ceil(0.2 * ms.size)))
    win_m, win_lt = ms[-k:], lt[-k:]
    finite = np.isfinite(win_lt)
    lS_end = lS[-1]
    if not np.any(finite):
        return SeriesVerdict(CONVERGES, partial, 0.0, table, "terms vanish")
    dl = np.diff(win_lt)
    # geometric decay
    if np.all(finite) and np.all(dl <= math.log(ratio_cut)):
        r = math.exp(dl.max())
        tr = math.exp(lt[-1] + math.log(r / (1 - r)) - lS_end) if r > 0 else 0.0
        if tr < tail_cut:
            return SeriesVerdict(CONVERGES, partial, tr, table, f"ratio <= {r:.4g}")
    elif not np.all(finite):
        # terms reached exact zero in the window, after finite decay
        if np.all(np.diff(win_lt[finite]) <= 0):
            return SeriesVerdict(CONVERGES, partial, 0.0, table, "terms underflow")
    if np.all(finite):
        slope = np.polyfit(np.log(win_m), win_lt, 1)[0]
        local = np.diff(win_lt) / np.diff(np.log(win_m))
        if slope < -1 - slope_margin and np.all(local < -1):
            # ∫_M^∞ a_M (x/M)^s dx with the least steep local slope
            s = local.max()
            ltail = lt[-1] + math.log(ms[-1] / (-s - 1))
            tr = math.exp(ltail - lS_end)
            return SeriesVerdict(CONVERGES, partial, tr, table, f"power decay, slope {slope:.3f}")
        if np.all(dl >= 0) and terms[-1] >= 1e-6:
            return SeriesVerdict(DIVERGES, partial, math.inf, table, "terms nondecreasing")
        if slope > -1 + slope_margin and terms[-1] > 0:
            return SeriesVerdict(DIVERGES, partial, math.inf, table, f"power decay too slow, slope {slope:.3f}")
    return SeriesVerdict(INCONCLUSIVE, partial, math.nan, table, "no decay pattern")


# -- presets -------------------------------------------------------------------

def preset(case: int, *, p: float = 2.0, alpha: float = 2.0, beta0: float = 1.0, beta: float = 1.4,
           c: float = 1.0, r: float = 1.0, v: float | None = None, C: float | None = None,
           constant: str = "corrected") -> Theorem1Config:
    """(Φ, Ψ, C) pairs for the four cases.

    Cases 1-2 use ``C = (p/α + 2)^{p/α} (K_α K_{α,p})^{p}`` by default, which
    makes ``x_m^α ~ (p/α + 2) log m``; ``constant="literal"`` gives
    ``(p/α + 2)^{p/α} K_{α,p}^{-p}`` instead.  Cases 3-4 use ``C = 1``.
    """
    if case not in (1, 2, 3, 4):
        raise ValueError("case must be 1, 2, 3 or 4")
    if constant not in ("corrected", "literal"):
        raise ValueError("constant must be 'corrected' or 'literal'")
    if case in (1, 2):
        if not (p > 0 and alpha > 0):
            raise ValueError("p and alpha must be positive")
        K = K_alpha_p(alpha, p)
        Ka = default_K_alpha(alpha)
        if C is None:
            C = (p / alpha + 2) ** (p / alpha) * ((Ka * K) ** p if constant == "corrected" else K ** (-p))
        if case == 1:
            return Theorem1Config(PowerLogLogMinus(p, alpha), Power(p), alpha, C)
        return Theorem1Config(Power(p), PowerLogLogPlus(p, alpha), alpha, C)
    if case == 3:
        if not beta0 > 1 / alpha:
            raise ValueError(f"case 3 needs beta0 > 1/alpha = {1 / alpha:g}, got {beta0}")
        if not 0 < beta < 1 - 1 / alpha + beta0:
            raise ValueError(f"case 3 needs 0 < beta < 1 - 1/alpha + beta0 = {1 - 1 / alpha + beta0:g}, got {beta}")
        return Theorem1Config(ExpBeta(beta), ExpBeta(beta0), alpha, 1.0 if C is None else C)
    v = 2 * r if v is None else v
    if not v > r:
        raise ValueError(f"case 4 needs v > r, got v={v}, r={r}")
    return Theorem1Config(ExpLogPow(c, v), ExpLogPow(c, r), alpha, 1.0 if C is None else C)
