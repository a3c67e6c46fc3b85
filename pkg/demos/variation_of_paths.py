"""Grid Φ-variation of simulated Brownian, fractional and Rosenblatt paths.

The mesh-restricted supremum with the optimal gauge Φ_{m,H} approaches
σ_{m,H} only at log-log speed, so at desk grids the values sit above the
limit and drift slowly.  Compare the first- and second-order gauges on the
same Rosenblatt paths.

    python3 demos/variation_of_paths.py
"""
import math

import numpy as np

from phivar import hermite, simulate
from phivar.funcs import HermiteOptimal, Power
from phivar.variation import limiting_variation, phi_norm, sup_variation

N = 2**12
B = simulate.fbm_ensemble(0.5, N, 5, seed=1)
phi = HermiteOptimal(1, 0.5)
print(f"Brownian, Φ = {phi.token()}, target σ = {hermite.sigma_mH(1, 0.5).sigma}")
for n in (2**8, 2**10, 2**12):
    delta = 4 / math.sqrt(n)
    vals = [sup_variation(x[:: N // n], phi, mesh_cap=delta).value for x in B]
    print(f"  n={n:>5} δ={delta:.4f} mean sup = {np.mean(vals):.4f}")

x = B[0]
print("\nmesh-restricted suprema on one path")
for d, r in limiting_variation(x, phi, [0.5, 0.125, 1 / 32, 1 / 128]):
    print(f"  δ={d:<8} value={r.value:.4f} mesh used={r.mesh:.5f} blocks={r.partition.size - 1}")

print(f"\n2-variation norm {phi_norm(x, Power(2)):.4f}, Φ-norm {phi_norm(x, phi):.4f}")

X = simulate.hermite_ensemble(2, 0.75, 2**10, 5, seed=2)
print("\nRosenblatt H=0.75")
for m in (1, 2):
    g = HermiteOptimal(m, 0.75)
    vals = [[sup_variation(y[:: 2**10 // n], g).value for y in X] for n in (2**8, 2**10)]
    print(f"  Φ_{m},H: n=256 {np.mean(vals[0]):.4f}  n=1024 {np.mean(vals[1]):.4f}")
