"""Sufficient-condition series for the four catalogue pairs (Φ, Ψ).

Prints the verdict and the last partial sum for each preset and shows
how shrinking the constant C breaks convergence.

    python3 demos/series_conditions.py
"""
from phivar import conditions as C

presets = [
    (1, dict(p=2, alpha=2)),
    (1, dict(p=2, alpha=2, constant="literal")),
    (2, dict(p=4, alpha=1)),
    (3, dict(alpha=2, beta0=1, beta=0.3)),
    (3, dict(alpha=2, beta0=1, beta=1.4)),
    (4, dict(c=1, r=1)),
]
for case, kw in presets:
    cfg = C.preset(case, **kw)
    v = C.series_check(cfg, 200)
    print(f"case {case} {kw}: {v.status:<12} sum={v.partial_sums[-1][1]:.6g}  ({v.reason})")

cfg = C.preset(1, p=2, alpha=2)
for scale in (1, 0.1, 0.01):
    small = C.Theorem1Config(cfg.phi, cfg.psi, cfg.alpha, cfg.C * scale)
    v = C.series_check(small, 200)
    print(f"case 1 with C x {scale}: {v.status}")
