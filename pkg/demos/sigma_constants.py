"""Limiting-variation constants σ_{m,H} and the Hermite kernel norm.

For m = 1 the constant is 2^{1/(2H)}; for m >= 2 the kernel form gives a
value strictly below the Gaussian-chaos bound 2^{m/2}/sqrt(m!).

    python3 demos/sigma_constants.py
"""
import math

from phivar import hermite

print(f"{'m':>2} {'H':>5} {'sigma':>10} {'sigma^H':>9} {'bound':>9} {'method':>8}")
for m in (1, 2, 3):
    bound = 2 ** (m / 2) / math.sqrt(math.factorial(m))
    for H in (0.6, 0.75, 0.9):
        r = hermite.sigma_mH(m, H, n_cells=64 if m == 3 else 128, restarts=4)
        tag = r.method + ("*" if r.lower_bound else "")
        print(f"{m:>2} {H:>5} {r.sigma:>10.6f} {r.sigma ** H:>9.6f} {bound:>9.6f} {tag:>8}")
print("* lower bound from shifted power iteration")

print("\nkernel norm, closed form against quadrature")
for m in (1, 2, 3):
    H = 0.75
    q = hermite.q_norm_quadrature(m, H)
    print(f"m={m} H={H}: {hermite.q_norm_closed_form(m, H):.12f}  {q.value:.12f}  c0={hermite.norming_c0(m, H):.6f}")

print("\na_n roots")
for n in range(1, 7):
    print(f"n={n}: a_n = {hermite.a_n(n):.12f}")
