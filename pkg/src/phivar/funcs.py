"""Variation functions and Orlicz machinery.

Every catalog function is represented through ``log Φ(e^s)`` so that
evaluations and inverses stay finite far into the tails (``t`` as small
as ``1e-300`` or values like ``2**-200``).  The plain ``__call__``/``inverse``
API is built on top of that.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, fields
from typing import ClassVar

import numpy as np
from scipy.optimize import brentq

__all__ = [
    "log_star",
    "log_star2",
    "VariationFunction",
    "Power",
    "PowerLogLogMinus",
    "PowerLogLogPlus",
    "ExpBeta",
    "ExpLogPow",
    "HermiteOptimal",
    "XiScale",
    "OrliczFamily",
    "orlicz_norm_mc",
    "parse_token",
    "TokenError",
]

BRACKET = (1e-12, 1e12)
MAX_BISECT = 200

# min over (0, 1] of (t+1)(1+log*(1/t)) log*_2(1/t), attained at t=1; a
# factor t^a (log*_2(1/t))^b is increasing on (0, 1] iff a * _G1 > b.
_G1 = 2.0 * (1.0 + math.log(2.0)) * math.log1p(math.log(2.0))


def log_star(x):
    """``log*(x) = log(1 + x)`` for ``x >= 0``."""
    x = np.asarray(x, dtype=float)
    if np.any(x < 0) or np.any(np.isnan(x)):
        raise ValueError("log_star is defined on [0, inf)")
    out = np.log1p(x)
    return float(out) if out.ndim == 0 else out


def log_star2(x):
    """``log*_2(x) = log*(log*(x))``."""
    return log_star(log_star(x))


def _log_star_inv_exp(s):
    # log*(1/t) at t = e^s, stable for any real s
    return np.logaddexp(0.0, -np.asarray(s, dtype=float))


def _log_star2_inv_exp(s):
    # log*_2(1/t) at t = e^s
    return np.log1p(_log_star_inv_exp(s))


def _positive(name, value):
    if not (np.isfinite(value) and value > 0):
        raise ValueError(f"{name} must be a positive real, got {value!r}")


def _fmt(v):
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    s = repr(float(v))
    return s[:-2] if s.endswith(".0") else s


class VariationFunction:
    """Base class for the catalog of strictly increasing ``Φ`` with ``Φ(0)=0``.

    Subclasses implement :meth:`log_eval_log` (``s -> log Φ(e^s)``).
    """

    kind: ClassVar[str] = ""
    sup: ClassVar[float] = math.inf
    delta2: ClassVar[bool] = True

    def log_eval_log(self, s):
        raise NotImplementedError

    @property
    def leading_exponent(self) -> float:
        """Exponent ``q`` with ``Φ(t) = t^q`` up to slowly varying factors at 0."""
        return math.nan

    # -- evaluation -----------------------------------------------------
    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        if np.any(t < 0) or np.any(np.isnan(t)):
            raise ValueError("variation functions are defined on [0, inf)")
        out = np.zeros_like(t)
        pos = t > 0
        if np.any(pos):
            out[pos] = np.exp(self.log_eval_log(np.log(t[pos])))
        return float(out) if out.ndim == 0 else out

    def log_eval(self, t):
        """``log Φ(t)``; ``-inf`` at ``t = 0``."""
        t = np.asarray(t, dtype=float)
        with np.errstate(divide="ignore"):
            out = np.where(t > 0, self.log_eval_log(np.log(np.where(t > 0, t, 1.0))), -np.inf)
        return float(out) if out.ndim == 0 else out

    # -- inverse --------------------------------------------------------
    def log_inverse_log(self, ly: float) -> float:
        """Solve ``log Φ(e^s) = ly`` for ``s``."""
        if not ly < math.log(self.sup):
            raise ValueError(f"value exp({ly}) outside the range of {self.token()}")
        f = lambda s: float(self.log_eval_log(s)) - ly
        lo, hi = math.log(BRACKET[0]), math.log(BRACKET[1])
        while f(lo) > 0:
            lo = 2 * lo - 1.0
            if lo < -1e7:
                raise ValueError("inverse bracket exhausted below")
        while f(hi) < 0:
            hi = 2 * hi + 1.0
            if hi > 1e7:
                raise ValueError("inverse bracket exhausted above")
        return brentq(f, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=MAX_BISECT)

    def inverse(self, y):
        y_arr = np.asarray(y, dtype=float)
        if np.any(y_arr < 0) or np.any(np.isnan(y_arr)) or np.any(y_arr >= self.sup):
            raise ValueError(f"value outside the range [0, {self.sup}) of {self.token()}")
        flat = y_arr.ravel()
        out = np.zeros_like(flat)
        for i, v in enumerate(flat):
            if v > 0:
                out[i] = math.exp(self.log_inverse_log(math.log(v)))
        out = out.reshape(y_arr.shape)
        return float(out) if out.ndim == 0 else out

    # -- serialization --------------------------------------------------
    def token(self) -> str:
        params = ",".join(f"{f.name}={_fmt(getattr(self, f.name))}" for f in fields(self))
        return f"{self.kind}:{params}"


@dataclass(frozen=True)
class Power(VariationFunction):
    """``Φ(t) = t^p``."""

    p: float
    kind: ClassVar[str] = "power"

    def __post_init__(self):
        _positive("p", self.p)

    @property
    def leading_exponent(self):
        return self.p

    def log_eval_log(self, s):
        return self.p * np.asarray(s, dtype=float)

    def log_inverse_log(self, ly):
        return ly / self.p


@dataclass(frozen=True)
class PowerLogLogMinus(VariationFunction):
    """``Φ(t) = t^p (log*_2(1/t))^(-p/α)``."""

    p: float
    alpha: float
    kind: ClassVar[str] = "pllm"

    def __post_init__(self):
        _positive("p", self.p)
        _positive("alpha", self.alpha)

    @property
    def leading_exponent(self):
        return self.p

    def log_eval_log(self, s):
        s = np.asarray(s, dtype=float)
        return self.p * s - (self.p / self.alpha) * np.log(_log_star2_inv_exp(s))


@dataclass(frozen=True)
class PowerLogLogPlus(VariationFunction):
    """``Φ(t) = t^p (log*_2(1/(t∧1)))^(p/α)``.

    The ``t∧1`` cap keeps the function increasing past ``t = 1``; on
    ``(0, 1]`` monotonicity needs ``α > 0.561``.
    """

    p: float
    alpha: float
    kind: ClassVar[str] = "pllp"

    def __post_init__(self):
        _positive("p", self.p)
        _positive("alpha", self.alpha)
        if self.p * _G1 <= self.p / self.alpha:
            raise ValueError(f"pllp is not increasing for alpha={self.alpha} (need alpha > {1 / _G1:.4f})")

    @property
    def leading_exponent(self):
        return self.p

    def log_eval_log(self, s):
        s = np.asarray(s, dtype=float)
        return self.p * s + (self.p / self.alpha) * np.log(_log_star2_inv_exp(np.minimum(s, 0.0)))


@dataclass(frozen=True)
class ExpBeta(VariationFunction):
    """``Φ_β(t) = exp(-t^(-1/β))``; range ``[0, 1)``, not Δ2."""

    beta: float
    kind: ClassVar[str] = "expbeta"
    sup: ClassVar[float] = 1.0
    delta2: ClassVar[bool] = False

    def __post_init__(self):
        _positive("beta", self.beta)

    def log_eval_log(self, s):
        return -np.exp(-np.asarray(s, dtype=float) / self.beta)

    def log_inverse_log(self, ly):
        if not ly < 0:
            raise ValueError("expbeta takes values in [0, 1)")
        # Φ_β^{-1}(y) = (log(1/y))^(-β)
        return -self.beta * math.log(-ly)


@dataclass(frozen=True)
class ExpLogPow(VariationFunction):
    """``Φ_{c,r}(t) = exp(-r (log(1/t))^c)`` on ``(0, 1)``, ``Φ(t) = t`` for ``t >= 1``."""

    c: float
    r: float
    kind: ClassVar[str] = "explogpow"
    delta2: ClassVar[bool] = False

    def __post_init__(self):
        _positive("c", self.c)
        _positive("r", self.r)

    def log_eval_log(self, s):
        s = np.asarray(s, dtype=float)
        neg = np.minimum(s, 0.0)
        return np.where(s < 0, -self.r * (-neg) ** self.c, s)

    def log_inverse_log(self, ly):
        if ly >= 0:
            return ly
        return -((-ly) / self.r) ** (1.0 / self.c)


@dataclass(frozen=True)
class HermiteOptimal(VariationFunction):
    """``Φ_{m,H}(t) = t^(1/H) / (log*_2(1/t))^(m/(2H))``."""

    m: int
    H: float
    kind: ClassVar[str] = "hermite"

    def __post_init__(self):
        if int(self.m) != self.m or self.m < 1:
            raise ValueError(f"m must be a positive integer, got {self.m!r}")
        object.__setattr__(self, "m", int(self.m))
        _positive("H", self.H)

    @property
    def leading_exponent(self):
        return 1.0 / self.H

    def log_eval_log(self, s):
        s = np.asarray(s, dtype=float)
        return s / self.H - (self.m / (2 * self.H)) * np.log(_log_star2_inv_exp(s))


@dataclass(frozen=True)
class XiScale(VariationFunction):
    """``Ξ(x) = x^H (log*_2(1/(x∧1)))^(m/2)``, asymptotic inverse of :class:`HermiteOptimal`."""

    m: int
    H: float
    kind: ClassVar[str] = "xi"

    def __post_init__(self):
        if int(self.m) != self.m or self.m < 1:
            raise ValueError(f"m must be a positive integer, got {self.m!r}")
        object.__setattr__(self, "m", int(self.m))
        _positive("H", self.H)
        if self.H * _G1 <= self.m / 2:
            raise ValueError(f"xi:m={self.m},H={self.H} is not increasing on (0, 1]")

    @property
    def leading_exponent(self):
        return self.H

    def log_eval_log(self, s):
        s = np.asarray(s, dtype=float)
        return self.H * s + (self.m / 2) * np.log(_log_star2_inv_exp(np.minimum(s, 0.0)))


KINDS = {
    cls.kind: cls
    for cls in (Power, PowerLogLogMinus, PowerLogLogPlus, ExpBeta, ExpLogPow, HermiteOptimal, XiScale)
}


class TokenError(ValueError):
    """Malformed variation-function token; ``column`` is 1-based."""

    def __init__(self, message, column):
        super().__init__(f"column {column}: {message}")
        self.column = column


def parse_token(token: str) -> VariationFunction:
    """Parse ``kind:key=val,key=val`` into a catalog function."""
    kind, sep, rest = token.partition(":")
    kind = kind.strip()
    if not sep:
        raise TokenError("expected 'kind:key=val,...'", len(token) + 1)
    if kind not in KINDS:
        raise TokenError(f"unknown kind {kind!r} (known: {', '.join(KINDS)})", 1)
    cls = KINDS[kind]
    names = [f.name for f in fields(cls)]
    values = {}
    col = len(kind) + 2
    for item in rest.split(","):
        key, eq, val = item.partition("=")
        key = key.strip()
        if not eq:
            raise TokenError(f"expected key=value, got {item!r}", col)
        if key not in names:
            raise TokenError(f"unknown key {key!r} for {kind}", col)
        if key in values:
            raise TokenError(f"duplicate key {key!r}", col)
        try:
            num = float(val)
        except ValueError:
            raise TokenError(f"not a number: {val!r}", col + len(key) + 1) from None
        if not (math.isfinite(num) and num > 0):
            raise TokenError(f"{key} must be positive, got {val.strip()}", col + len(key) + 1)
        values[key] = num
        col += len(item) + 1
    missing = [n for n in names if n not in values]
    if missing:
        raise TokenError(f"missing keys {missing} for {kind}", len(token) + 1)
    if "m" in values:
        if values["m"] != int(values["m"]):
            raise TokenError("m must be an integer", 1)
        values["m"] = int(values["m"])
    try:
        return cls(**values)
    except ValueError as exc:
        raise TokenError(str(exc), 1) from None


@dataclass(frozen=True)
class OrliczFamily:
    """``φ_α(x) = exp(|x|^α) - 1`` with quasi-triangle constant ``K_α``."""

    alpha: float

    def __post_init__(self):
        _positive("alpha", self.alpha)

    @property
    def K(self) -> float:
        return 2 ** (1 / self.alpha) if self.alpha < 1 else 1.0

    def phi(self, x):
        with np.errstate(over="ignore"):
            return np.expm1(np.abs(np.asarray(x, dtype=float)) ** self.alpha)

    def phi_inv(self, y):
        return log_star(y) ** (1 / self.alpha)


def orlicz_norm_mc(samples, alpha: float, rtol: float = 1e-10) -> float:
    """Empirical ``inf{Δ > 0 : mean φ_α(U/Δ) <= 1}``.

    The data are rescaled by ``max|U|`` before the root search, so the
    estimate is positively homogeneous in the samples.
    """
    x = np.abs(np.asarray(samples, dtype=float).ravel())
    if x.size == 0:
        raise ValueError("orlicz_norm_mc needs at least one sample")
    fam = OrliczFamily(alpha)
    scale = x.max()
    if scale == 0:
        return 0.0
    x = x / scale

    def excess(delta):
        return float(np.mean(fam.phi(x / delta))) - 1.0

    # mean φ(x/Δ) >= φ(1/Δ)/n  and  <= φ(1/Δ)
    hi = 1.0 / math.log(2.0) ** (1 / alpha)
    lo = 0.999 / math.log1p(x.size) ** (1 / alpha)
    if excess(hi) > 0:  # pragma: no cover - guarded by the bound above
        raise RuntimeError("upper bracket failed")
    if excess(lo) <= 0:
        return scale * lo
    return scale * brentq(excess, lo, hi, xtol=1e-300, rtol=rtol, maxiter=MAX_BISECT)
